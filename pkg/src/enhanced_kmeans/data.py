"""Dataset loading, the uniform synthetic generator, and column standardization."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._rng import make_rng
from .errors import DataError, MissingFileError, NonNumericCellError, RaggedRowError, UnknownColumnError

DATA_DIR_ENV = "ENHANCED_KMEANS_DATA_DIR"

# name -> (file name, label column)
BUNDLED = {
    "wbc": ("wbc.csv", "diagnosis"),
    "wine": ("winequality-red.csv", "quality"),
}


@dataclass
class DatasetSpec:
    features: np.ndarray
    feature_names: list[str]
    labels: np.ndarray | None = None
    label_name: str | None = None
    label_encoding: list[str] = field(default_factory=list)
    """Original label strings; ``label_encoding[i]`` is the value encoded as ``i``."""
    source: str = ""

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataError("features must be 2-D")
        if len(self.feature_names) != self.features.shape[1]:
            raise DataError("feature_names length does not match the number of columns")
        if self.labels is not None and len(self.labels) != self.features.shape[0]:
            raise DataError("labels length does not match the number of rows")

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])


@dataclass(frozen=True)
class SynthConfig:
    n_points: int = 1000
    dims: int = 2
    seed: int = 0
    bounds: tuple[tuple[float, float], ...] | None = None

    def resolved_bounds(self) -> np.ndarray:
        bounds = self.bounds if self.bounds is not None else ((0.0, 100.0),) * self.dims
        b = np.asarray(bounds, dtype=np.float64)
        if b.shape != (self.dims, 2):
            raise DataError(f"bounds must give one (low, high) pair per dimension, got shape {b.shape}")
        return b


def data_dir() -> Path:
    """Directory searched for dataset names; ``$ENHANCED_KMEANS_DATA_DIR`` overrides the bundled one."""
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("enhanced_kmeans") / "datasets"))


def resolve_dataset(name_or_path: str) -> tuple[Path, str | None]:
    """Map a path, a bundled dataset name, or a file inside the data directory to a path.

    Returns the path and the default label column (``None`` unless bundled).
    """
    p = Path(name_or_path)
    if p.is_file():
        return p, None
    if name_or_path in BUNDLED:
        fname, label = BUNDLED[name_or_path]
        return data_dir() / fname, label
    candidate = data_dir() / name_or_path
    if candidate.is_file():
        return candidate, None
    raise MissingFileError(f"dataset not found: {name_or_path}")


def load_csv(path, label_column: str | None = None, delimiter: str = ",", drop_columns=()) -> DatasetSpec:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty; a header row is required") from None
        rows = [r for r in reader if r]

    if not rows:
        raise DataError(f"{path} has a header but no data rows")
    for name in [label_column, *drop_columns]:
        if name is not None and name not in header:
            raise UnknownColumnError(name)

    skip = set(drop_columns)
    if label_column is not None:
        skip.add(label_column)
    feature_cols = [i for i, h in enumerate(header) if h not in skip]
    if not feature_cols:
        raise DataError("no feature columns left")

    features = np.empty((len(rows), len(feature_cols)))
    raw_labels = []
    label_idx = header.index(label_column) if label_column is not None else None
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise RaggedRowError(r, len(header), len(row))
        for out_c, c in enumerate(feature_cols):
            cell = row[c].strip()
            try:
                value = float(cell)
            except ValueError:
                raise NonNumericCellError(r, header[c], cell) from None
            if not np.isfinite(value):
                raise NonNumericCellError(r, header[c], cell)
            features[r - 1, out_c] = value
        if label_idx is not None:
            raw_labels.append(row[label_idx].strip())

    labels = None
    encoding: list[str] = []
    if label_idx is not None:
        codes: dict[str, int] = {}
        for value in raw_labels:
            codes.setdefault(value, len(codes))
        encoding = list(codes)
        labels = np.array([codes[v] for v in raw_labels], dtype=np.int64)

    return DatasetSpec(
        features=features,
        feature_names=[header[c] for c in feature_cols],
        labels=labels,
        label_name=label_column,
        label_encoding=encoding,
        source=str(path),
    )


def load_dataset(name_or_path: str, label_column: str | None = None, delimiter: str = ",") -> DatasetSpec:
    """Like :func:`load_csv`, but also accepts a bundled name (``wbc``, ``wine``)."""
    path, default_label = resolve_dataset(name_or_path)
    return load_csv(path, label_column if label_column is not None else default_label, delimiter)


def format_float(value: float) -> str:
    """17 significant digits: round-trips every float64 exactly."""
    return format(float(value), ".17g")


def save_csv(dataset: DatasetSpec, path, delimiter: str = ",") -> None:
    header = list(dataset.feature_names)
    if dataset.labels is not None:
        header.append(dataset.label_name or "label")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(header)
        for i, row in enumerate(dataset.features):
            out = [format_float(v) for v in row]
            if dataset.labels is not None:
                code = int(dataset.labels[i])
                out.append(dataset.label_encoding[code] if dataset.label_encoding else str(code))
            writer.writerow(out)


def generate_synthetic(config: SynthConfig) -> DatasetSpec:
    """I.i.d. uniform points in the box given by ``config.bounds`` (default ``[0, 100]`` per axis)."""
    if config.n_points < 1:
        raise DataError("n_points must be >= 1")
    if config.dims < 1:
        raise DataError("dims must be >= 1")
    b = config.resolved_bounds()
    low, high = b[:, 0], b[:, 1]
    if not np.all(np.isfinite(b)) or np.any(low >= high):
        raise DataError("every dimension needs finite bounds with low < high")
    u = make_rng(config.seed).random((config.n_points, config.dims))
    points = low + (high - low) * u
    return DatasetSpec(
        features=points,
        feature_names=[f"x{i}" for i in range(config.dims)],
        source=f"synthetic(uniform, n={config.n_points}, dims={config.dims}, seed={config.seed})",
    )


def standardize(features):
    """Z-score every column with the sample standard deviation.

    Constant columns become zeros and report a std of 1. Returns
    ``(standardized, mean, std)``.
    """
    X = np.asarray(features, dtype=np.float64)
    mean = X.mean(axis=0)
    centered = X - mean
    if X.shape[0] > 1:
        std = centered.std(axis=0, ddof=1)
    else:
        std = np.zeros(X.shape[1])
    constant = np.all(centered == 0, axis=0) | (std == 0)
    std = np.where(constant, 1.0, std)
    out = centered / std
    out[:, constant] = 0.0
    return out, mean, std
