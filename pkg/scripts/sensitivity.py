"""Outlier fraction and metric changes under the configuration variants the CLI exposes.

Usage: python scripts/sensitivity.py
"""

import numpy as np

from enhanced_kmeans.data import SynthConfig, generate_synthetic, load_dataset
from enhanced_kmeans.experiments import run_experiment
from enhanced_kmeans.outliers import EnhancedConfig

VARIANTS = {
    "default": {},
    "cold-start": {"warm_start": False},
    "standardize": {"standardize": True},
    "cold+standardize": {"warm_start": False, "standardize": True},
}


def synthetic(variant):
    rows = []
    for seed in range(10):
        ds = generate_synthetic(SynthConfig(seed=seed))
        rep, _ = run_experiment(ds, EnhancedConfig(n_clusters=5, seed=seed, **variant))
        rows.append((rep["outlier_fraction"], -rep["percent_change"]["average_variance"]))
    frac, red = np.median(rows, axis=0)
    return f"fraction {100 * frac:5.2f}%  variance reduction {red:6.2f}%"


def labeled(name, variant, outliers_as):
    rep, _ = run_experiment(load_dataset(name), EnhancedConfig(n_clusters=5, **variant), outliers_as)
    pc = rep["percent_change"]
    return (
        f"fraction {100 * rep['outlier_fraction']:5.2f}%  variance {pc['average_variance']:+7.2f}%  "
        f"acc {pc['accuracy']:+6.2f}%  f1 {pc['f1_weighted']:+6.2f}%  "
        f"jaccard {pc['jaccard_weighted']:+6.2f}%  v {pc['v_measure']:+6.2f}%"
    )


def main():
    for label, variant in VARIANTS.items():
        print(f"== {label}")
        print(f"  synthetic k=5 median of 10: {synthetic(variant)}")
        for name in ("wbc", "wine"):
            for how in ("excluded", "nearest"):
                print(f"  {name:<4} outliers {how:<8}: {labeled(name, variant, how)}")


if __name__ == "__main__":
    main()
