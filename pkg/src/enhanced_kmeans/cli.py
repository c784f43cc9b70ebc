"""Command-line entry point: ``enhanced-kmeans {synth,run,sweep,evaluate}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import DATA_DIR_ENV, SynthConfig, format_float, generate_synthetic, load_dataset, save_csv
from .errors import DataError, NumericError
from .experiments import SCHEMA_VERSION, iteration_table, run_experiment, run_sweep
from .metrics import evaluate_clustering
from .outliers import EnhancedConfig

log = logging.getLogger("enhanced_kmeans")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a number >= 0, got {text}")
    return value


def _clean(obj):
    """Make a payload strict-JSON safe: non-finite floats become null, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def write_json(payload, path: Path) -> None:
    text = json.dumps(_clean(payload), indent=2, allow_nan=False)
    path.write_text(text + "\n")


def write_table(rows: list[dict], path: Path, columns=None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            out = []
            for c in columns:
                v = row.get(c)
                if isinstance(v, (float, np.floating)):
                    out.append(format_float(v) if math.isfinite(v) else "nan")
                elif v is None:
                    out.append("")
                else:
                    out.append(str(v))
            writer.writerow(out)


def _add_algorithm_flags(p):
    p.add_argument("--k", type=_positive_int, default=5, help="number of clusters (default 5)")
    p.add_argument("--chebyshev-m", type=float, default=2.0, help="threshold multiplier m > 1 (default 2)")
    p.add_argument("--variance-tol", type=_nonneg_float, default=1e-4, help="relative variance-change stop (default 1e-4)")
    p.add_argument("--max-outer-iter", type=_positive_int, default=100)
    p.add_argument("--kmeans-tol", type=_nonneg_float, default=1e-6)
    p.add_argument("--kmeans-max-iter", type=_positive_int, default=300)
    p.add_argument("--init", choices=["k-means++", "random"], default="k-means++")
    p.add_argument("--cold-start", action="store_true", help="reseed K-means every outer iteration instead of warm starting")
    p.add_argument("--standardize", action="store_true", help="z-score feature columns before clustering")
    p.add_argument("--seed", type=int, default=0)


def _config_from(args) -> dict:
    if not args.chebyshev_m > 1:
        raise UsageError("--chebyshev-m must be > 1")
    return dict(
        chebyshev_m=args.chebyshev_m,
        variance_rel_tol=args.variance_tol,
        max_outer_iter=args.max_outer_iter,
        kmeans_tol=args.kmeans_tol,
        kmeans_max_iter=args.kmeans_max_iter,
        init=args.init,
        warm_start=not args.cold_start,
        standardize=args.standardize,
    )


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    if not args.low < args.high:
        raise UsageError("--low must be smaller than --high")
    cfg = SynthConfig(
        n_points=args.points,
        dims=args.dims,
        seed=args.seed,
        bounds=((args.low, args.high),) * args.dims,
    )
    dataset = generate_synthetic(cfg)
    path = Path(args.out) if args.out else _out_dir(args) / "synthetic.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_csv(dataset, path)
    print(path)
    return EXIT_OK


def cmd_run(args) -> int:
    config = EnhancedConfig(n_clusters=args.k, seed=args.seed, **_config_from(args))
    dataset = load_dataset(args.dataset, args.label_column, args.delimiter)
    if args.k > dataset.n_rows:
        raise UsageError(f"--k {args.k} exceeds the {dataset.n_rows} rows of the dataset")
    report, result = run_experiment(dataset, config, outliers_as=args.outliers_as)

    out = _out_dir(args)
    write_json(report, out / "report.json")
    write_table(
        [asdict(r) for r in result.outliers],
        out / "outliers.csv",
        ["point_index", "iteration_removed", "cluster_at_removal", "distance_at_removal", "threshold_at_removal"],
    )
    write_table(iteration_table(result, dataset.labels), out / "iterations.csv")

    print(f"{dataset.source}: {report['outlier_count']} outliers "
          f"({100 * report['outlier_fraction']:.2f}%), stop: {report['stop_reason']}")
    for name, change in report["percent_change"].items():
        shown = "n/a" if change is None else f"{change:+.2f}%"
        print(f"  {name:<18} {report['baseline'][name]:.6g} -> {report['final'][name]:.6g} ({shown})")
    print(f"reports written to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.k_min < 2 or args.k_max < args.k_min or args.k_max > args.points - 1:
        raise UsageError(f"k range must satisfy 2 <= k-min <= k-max <= {args.points - 1}")
    report = run_sweep(
        range(args.k_min, args.k_max + 1),
        repeats=args.repeats,
        seed=args.seed,
        config_kwargs=_config_from(args),
        synth_kwargs={"n_points": args.points, "dims": args.dims},
        jobs=args.jobs,
    )
    out = _out_dir(args)
    write_json(report, out / "sweep.json")
    rows = [{k: v for k, v in r.items() if k != "outlier_counts"} for r in report["rows"]]
    write_table(rows, out / "sweep.csv")
    for r in rows:
        print(f"k={r['k']:>2}  |dV|={r['abs_pct_change_average_variance']:.2f}%  outliers={r['mean_outlier_count']:.1f}")
    print(f"reports written to {out}")
    return EXIT_OK


def _read_predictions(path: str, column: str | None) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such file: {p}")
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{p} is empty") from None
        idx = 0
        if column is not None:
            if column not in header:
                raise DataError(f"predictions file has no column {column!r}")
            idx = header.index(column)
        values = [row[idx].strip() for row in reader if row]
    codes: dict[str, int] = {}
    for v in values:
        codes.setdefault(v, len(codes))
    return np.array([codes[v] for v in values], dtype=np.int64)


def cmd_evaluate(args) -> int:
    dataset = load_dataset(args.dataset, args.label_column, args.delimiter)
    predictions = _read_predictions(args.predictions, args.prediction_column)
    if predictions.shape[0] != dataset.n_rows:
        raise DataError(f"{predictions.shape[0]} predictions for {dataset.n_rows} rows")
    report = evaluate_clustering(dataset.features, predictions, dataset.labels)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "evaluate",
        "dataset": dataset.source,
        "predictions": str(args.predictions),
        "metrics": report.to_dict(),
    }
    out = _out_dir(args)
    write_json(payload, out / "metrics.json")
    print(json.dumps(_clean(payload["metrics"]), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="enhanced-kmeans",
        description="K-means with iterative Chebyshev-threshold outlier removal.",
        epilog=f"Dataset names are looked up in ${DATA_DIR_ENV} (default: the bundled datasets).",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a uniform synthetic dataset")
    p.add_argument("--points", type=_positive_int, default=1000)
    p.add_argument("--dims", type=_positive_int, default=2)
    p.add_argument("--low", type=float, default=0.0)
    p.add_argument("--high", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: <out-dir>/synthetic.csv)")
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=cmd_synth)

    def dataset_flags(p):
        p.add_argument("dataset", help="CSV path, a file in the data directory, or a bundled name (wbc, wine)")
        p.add_argument("--label-column", help="ground-truth column (bundled datasets have a default)")
        p.add_argument("--delimiter", default=",")
        p.add_argument("--out-dir", default="results")

    p = sub.add_parser("run", help="run enhanced K-means on a dataset and write reports")
    dataset_flags(p)
    _add_algorithm_flags(p)
    p.add_argument("--outliers-as", choices=["excluded", "nearest"], default="excluded",
                   help="how removed points enter the final metrics")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="k sweep over seeded synthetic datasets")
    _add_algorithm_flags(p)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--repeats", type=_positive_int, default=10)
    p.add_argument("--points", type=_positive_int, default=1000)
    p.add_argument("--dims", type=_positive_int, default=2)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="score a given labeling of a dataset")
    dataset_flags(p)
    p.add_argument("--predictions", required=True, help="CSV with a header; one prediction per row")
    p.add_argument("--prediction-column", help="column to read (default: the first)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"enhanced-kmeans: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"enhanced-kmeans: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"enhanced-kmeans: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"enhanced-kmeans: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
