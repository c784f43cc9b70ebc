"""Run and sweep drivers that turn clustering results into report payloads."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from .data import DatasetSpec, SynthConfig, generate_synthetic
from .kmeans import assign_points
from .metrics import MetricsReport, distance_ratio, evaluate_clustering
from .outliers import EnhancedConfig, EnhancedResult, enhanced_kmeans

SCHEMA_VERSION = "1.0"


def percent_change(baseline: float, final: float) -> float | None:
    """``100 * (final - baseline) / |baseline|``; ``None`` when undefined."""
    if baseline is None or final is None:
        return None
    if not (math.isfinite(baseline) and math.isfinite(final)) or baseline == 0:
        return None
    return 100.0 * (final - baseline) / abs(baseline)


def _metrics_for(X, index_map, state, truth) -> MetricsReport:
    t = None if truth is None else truth[index_map]
    report = evaluate_clustering(X[index_map], state.labels, t)
    # Keep the algorithm's own variance (about its centroids) rather than the recomputed means.
    report.average_variance = state.average_variance
    return report


def _all_points_labels(X, state) -> np.ndarray:
    return assign_points(X, state.centroids)


def summarize(result: EnhancedResult, truth=None, outliers_as: str = "excluded"):
    """Baseline and final :class:`MetricsReport` for one enhanced run.

    ``outliers_as="nearest"`` scores every original point, giving removed points
    the label of their nearest final centroid, instead of scoring inliers only.
    """
    X = result.data
    truth = None if truth is None else np.asarray(truth)
    baseline = _metrics_for(X, result.baseline_index_map, result.baseline_state, truth)
    if outliers_as == "excluded":
        final = _metrics_for(X, result.inlier_index_map, result.final_state, truth)
    elif outliers_as == "nearest":
        labels = _all_points_labels(X, result.final_state)
        final = evaluate_clustering(X, labels, truth)
        final.average_variance = result.final_state.average_variance
    else:
        raise ValueError(f"outliers_as must be 'excluded' or 'nearest', not {outliers_as!r}")
    return baseline, final


def iteration_table(result: EnhancedResult, truth=None) -> list[dict]:
    """One row of metric values per accepted iteration, plus two normalizations.

    ``*_minmax`` rescales each metric's column to [0, 1]; ``*_rel`` divides by
    the iteration-1 value.
    """
    truth = None if truth is None else np.asarray(truth)
    rows = []
    for (index_map, state), entry in zip(result.history, result.trace):
        m = _metrics_for(result.data, index_map, state, truth).to_dict()
        row = {
            "iteration": entry.iteration,
            "n_points": entry.n_points,
            "outliers_removed": entry.outliers_removed_this_iteration,
        }
        row.update(m)
        rows.append(row)
    metric_names = [k for k in rows[0] if k not in ("iteration", "n_points", "outliers_removed")] if rows else []
    for name in metric_names:
        values = np.array([r[name] for r in rows], dtype=float)
        finite = values[np.isfinite(values)]
        lo, hi = (finite.min(), finite.max()) if finite.size else (math.nan, math.nan)
        first = values[0]
        for r, v in zip(rows, values):
            r[f"{name}_minmax"] = (v - lo) / (hi - lo) if hi > lo else 0.0
            r[f"{name}_rel"] = v / first if first != 0 and math.isfinite(first) else math.nan
    return rows


def run_experiment(dataset: DatasetSpec, config: EnhancedConfig, outliers_as: str = "excluded") -> tuple[dict, EnhancedResult]:
    """Run one enhanced clustering and return ``(report, result)``.

    ``report`` is JSON-ready (layout in ``docs/formats.md``); ``result`` is the
    raw :class:`EnhancedResult` for callers that need the per-iteration states.
    """
    start = time.perf_counter()
    result = enhanced_kmeans(dataset.features, config)
    baseline, final = summarize(result, dataset.labels, outliers_as)
    elapsed = time.perf_counter() - start

    b, f = baseline.to_dict(), final.to_dict()
    n = dataset.n_rows
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "dataset": {
            "source": dataset.source,
            "rows": n,
            "cols": int(dataset.features.shape[1]),
            "label_column": dataset.label_name,
        },
        "config": asdict(config),
        "outliers_scored_as": outliers_as,
        "stop_reason": result.stop_reason,
        "iterations": len(result.trace),
        "baseline": b,
        "final": f,
        "percent_change": {k: percent_change(b[k], f[k]) for k in b if k in f},
        "outlier_count": len(result.outliers),
        "outlier_fraction": len(result.outliers) / n,
        "trace": [asdict(t) for t in result.trace],
        "wall_time_s": elapsed,
    }
    if result.outliers:
        ratios = distance_ratio(result)
        report["distance_ratio"] = {
            "per_cluster_average": {str(c): v for c, v in ratios.averages.items()},
            "per_cluster": {str(c): v for c, v in ratios.ratios.items()},
        }
    return report, result


SWEEP_METRICS = MetricsReport.INTRINSIC


def sweep_cell(k: int, seed: int, config_kwargs: dict, synth_kwargs: dict) -> dict:
    data = generate_synthetic(SynthConfig(seed=seed, **synth_kwargs))
    config = EnhancedConfig(n_clusters=k, seed=seed, **config_kwargs)
    result = enhanced_kmeans(data.features, config)
    baseline, final = summarize(result)
    b, f = baseline.to_dict(), final.to_dict()
    return {
        "k": k,
        "seed": seed,
        "percent_change": {m: percent_change(b[m], f[m]) for m in SWEEP_METRICS},
        "outlier_count": len(result.outliers),
    }


def run_sweep(
    k_values,
    repeats: int = 10,
    seed: int = 0,
    config_kwargs: dict | None = None,
    synth_kwargs: dict | None = None,
    jobs: int = 1,
) -> dict:
    """Average absolute percentage change per intrinsic metric for each k.

    Dataset ``r`` of every k uses seed ``seed + r`` for both the generator and
    K-means, so each k sees the same ``repeats`` datasets.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    config_kwargs = dict(config_kwargs or {})
    synth_kwargs = dict(synth_kwargs or {})
    n_points = synth_kwargs.get("n_points", SynthConfig.n_points)
    k_values = sorted(set(int(k) for k in k_values))
    if not k_values or k_values[0] < 2 or k_values[-1] > n_points - 1:
        raise ValueError(f"k values must lie in [2, {n_points - 1}]")

    start = time.perf_counter()
    tasks = [(k, seed + r) for k in k_values for r in range(repeats)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(sweep_cell, k, s, config_kwargs, synth_kwargs) for k, s in tasks]
            cells = [fut.result() for fut in futures]
    else:
        cells = [sweep_cell(k, s, config_kwargs, synth_kwargs) for k, s in tasks]
    cells.sort(key=lambda c: (c["k"], c["seed"]))

    rows = []
    for k in k_values:
        mine = [c for c in cells if c["k"] == k]
        row = {"k": k}
        for m in SWEEP_METRICS:
            values = [abs(c["percent_change"][m]) for c in mine if c["percent_change"][m] is not None]
            row[f"abs_pct_change_{m}"] = float(np.mean(values)) if values else 0.0
        counts = [c["outlier_count"] for c in mine]
        row["mean_outlier_count"] = float(np.mean(counts))
        row["outlier_counts"] = counts
        rows.append(row)

    return {
        "schema_version": SCHEMA_VERSION,
        "command": "sweep",
        "repeats": repeats,
        "seed": seed,
        "k_values": k_values,
        "config": config_kwargs,
        "synth": synth_kwargs,
        "rows": rows,
        "cells": cells,
        "wall_time_s": time.perf_counter() - start,
    }
