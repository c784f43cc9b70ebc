"""Iterative Chebyshev-threshold outlier removal wrapped around K-means.

Each outer iteration fits K-means on the surviving points, computes for every
cluster the threshold ``mean(d) + m * std(d)`` over member-to-centroid
distances, and removes the members at or beyond it. By Chebyshev's inequality
at most ``1/m^2`` of a cluster's members can be removed per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .kmeans import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ClusteringState,
    as_data_matrix,
    lloyd_kmeans,
    row_distances,
)

STOP_CONVERGED = "variance_converged"
STOP_NO_OUTLIERS = "no_outliers_removed"
STOP_MAX_ITER = "max_outer_iter"
STOP_VARIANCE_INCREASED = "variance_increased"
STOP_TRUNCATED = "too_few_points"


@dataclass(frozen=True)
class OutlierRecord:
    point_index: int
    iteration_removed: int
    cluster_at_removal: int
    distance_at_removal: float
    threshold_at_removal: float


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    n_points: int
    average_variance: float
    outliers_removed_this_iteration: int
    per_cluster_thresholds: tuple[float, ...]
    per_cluster_sizes: tuple[int, ...]
    per_cluster_removed: tuple[int, ...]


@dataclass(frozen=True)
class EnhancedConfig:
    n_clusters: int
    chebyshev_m: float = 2.0
    variance_rel_tol: float = 1e-4
    max_outer_iter: int = 100
    seed: int = 0
    kmeans_tol: float = DEFAULT_TOL
    kmeans_max_iter: int = DEFAULT_MAX_ITER
    init: str = "k-means++"
    warm_start: bool = True
    standardize: bool = False

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if not self.chebyshev_m > 1:
            raise ValueError("chebyshev_m must be > 1")
        if self.variance_rel_tol < 0:
            raise ValueError("variance_rel_tol must be >= 0")
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be >= 1")


@dataclass
class EnhancedResult:
    final_state: ClusteringState
    outliers: list[OutlierRecord]
    trace: list[IterationTrace]
    inlier_index_map: np.ndarray
    stop_reason: str
    data: np.ndarray
    """The matrix that was clustered (standardized when the config asks for it)."""
    history: list[tuple[np.ndarray, ClusteringState]] = field(default_factory=list)
    """(surviving original indices, fitted state) for every accepted iteration."""
    scaling: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def baseline_state(self) -> ClusteringState:
        return self.history[0][1]

    @property
    def baseline_index_map(self) -> np.ndarray:
        return self.history[0][0]

    @property
    def outlier_indices(self) -> np.ndarray:
        return np.array([r.point_index for r in self.outliers], dtype=np.int64)


def per_cluster_distances(data, state: ClusteringState, cluster: int) -> np.ndarray:
    X = np.asarray(data, dtype=np.float64)
    if not 0 <= cluster < state.n_clusters:
        raise IndexError(f"cluster {cluster} out of range for {state.n_clusters} clusters")
    return row_distances(X[state.labels == cluster], state.centroids[cluster])


def chebyshev_threshold(distances, m: float = 2.0) -> float:
    """``mean + m * s`` with ``s`` the sample standard deviation (0 for a single value)."""
    d = np.asarray(distances, dtype=np.float64).ravel()
    if d.size == 0:
        raise ValueError("threshold of an empty distance sequence")
    if not m > 1:
        raise ValueError("m must be > 1")
    sigma = float(d.std(ddof=1)) if d.size > 1 else 0.0
    return float(d.mean()) + m * sigma


# Spread below this many ulps of the largest distance is rounding, not data.
_NOISE_ULPS = 64


def _spread_is_noise(distances: np.ndarray) -> bool:
    """True when the distances are equal up to floating-point rounding.

    Equidistant members (symmetric layouts) come out of the distance
    computation a few ulps apart; the rounded mean and std can then put the
    threshold at or below the larger copies and break the 1/m^2 bound.
    """
    top = float(distances.max())
    return float(distances.max() - distances.min()) <= _NOISE_ULPS * np.finfo(float).eps * top


def _cluster_outliers(distances: np.ndarray, m: float) -> tuple[float, np.ndarray]:
    """Threshold and boolean removal mask for one cluster's distances."""
    if distances.size == 0:
        return float("nan"), np.zeros(0, dtype=bool)
    threshold = chebyshev_threshold(distances, m)
    if distances.size < 2 or _spread_is_noise(distances):
        # zero spread: every member would sit on the threshold; keep them all
        return threshold, np.zeros(distances.size, dtype=bool)
    return threshold, distances >= threshold


def remove_outliers_once(data, state: ClusteringState, m: float = 2.0, iteration: int = 1, index_map=None):
    """One sweep of per-cluster threshold removal.

    Returns ``(surviving, records, thresholds, removed_per_cluster)`` where
    ``surviving`` are row positions into ``data`` and ``records`` carry
    original indices through ``index_map`` (identity when omitted).
    """
    X = np.asarray(data, dtype=np.float64)
    if index_map is None:
        index_map = np.arange(X.shape[0])
    keep = np.ones(X.shape[0], dtype=bool)
    records = []
    thresholds = []
    removed = []
    for cluster in range(state.n_clusters):
        members = np.flatnonzero(state.labels == cluster)
        distances = per_cluster_distances(X, state, cluster)
        threshold, mask = _cluster_outliers(distances, m)
        thresholds.append(threshold)
        removed.append(int(mask.sum()))
        for pos in np.flatnonzero(mask):
            row = int(members[pos])
            keep[row] = False
            records.append(
                OutlierRecord(
                    point_index=int(index_map[row]),
                    iteration_removed=iteration,
                    cluster_at_removal=cluster,
                    distance_at_removal=float(distances[pos]),
                    threshold_at_removal=threshold,
                )
            )
    records.sort(key=lambda r: r.point_index)
    return np.flatnonzero(keep), records, thresholds, removed


def enhanced_kmeans(data, config: EnhancedConfig) -> EnhancedResult:
    """Alternate K-means fits and threshold removal until the average variance settles.

    Stops on the first of: relative change of the average variance
    ``<= variance_rel_tol``; an iteration that removes nothing;
    ``max_outer_iter`` fits. Removals are tentative until the next fit on the
    reduced set is accepted: if that fit has a larger average variance, or
    fewer than ``n_clusters`` points survive, the removal is undone and the
    loop stops with the previous state.
    """
    # imported here to keep data-io out of the core import graph
    from .data import standardize

    X = as_data_matrix(data)
    scaling = None
    if config.standardize:
        X, mean, std = standardize(X)
        scaling = (mean, std)
    k = config.n_clusters
    if k > X.shape[0]:
        raise ValueError(f"cannot fit {k} clusters to {X.shape[0]} rows")

    index_map = np.arange(X.shape[0])
    outliers: list[OutlierRecord] = []
    trace: list[IterationTrace] = []
    history: list[tuple[np.ndarray, ClusteringState]] = []
    pending: list[OutlierRecord] = []
    pending_map = index_map
    state = None
    stop_reason = STOP_MAX_ITER

    for iteration in range(1, config.max_outer_iter + 1):
        if iteration > 1 and pending_map.size < k:
            stop_reason = STOP_TRUNCATED
            break
        if state is not None and config.warm_start:
            init = state.centroids
        else:
            init = config.init
        candidate = lloyd_kmeans(
            X[pending_map],
            k,
            seed=config.seed,
            max_iter=config.kmeans_max_iter,
            tol=config.kmeans_tol,
            init=init,
        )
        if state is not None and candidate.average_variance > state.average_variance:
            stop_reason = STOP_VARIANCE_INCREASED
            break

        if pending:
            outliers.extend(pending)
            pending = []
        previous = state
        state = candidate
        index_map = pending_map
        history.append((index_map, state))

        converged = False
        if previous is not None:
            scale = max(previous.average_variance, np.finfo(float).tiny)
            converged = abs(state.average_variance - previous.average_variance) / scale <= config.variance_rel_tol

        surviving, records, thresholds, removed = remove_outliers_once(
            X[index_map], state, config.chebyshev_m, iteration, index_map
        )
        last = iteration == config.max_outer_iter
        if converged or last or not records:
            records, removed = [], [0] * k
        trace.append(
            IterationTrace(
                iteration=iteration,
                n_points=int(index_map.size),
                average_variance=state.average_variance,
                outliers_removed_this_iteration=len(records),
                per_cluster_thresholds=tuple(float(t) for t in thresholds),
                per_cluster_sizes=tuple(int(s) for s in state.cluster_sizes()),
                per_cluster_removed=tuple(removed),
            )
        )
        if converged:
            stop_reason = STOP_CONVERGED
            break
        if not records:
            stop_reason = STOP_NO_OUTLIERS
            break
        if last:
            break
        pending = records
        pending_map = index_map[surviving]

    if pending and trace:
        # the removal was rolled back; the trace must not count it
        trace[-1] = replace(trace[-1], outliers_removed_this_iteration=0, per_cluster_removed=(0,) * k)

    outliers.sort(key=lambda r: r.point_index)
    return EnhancedResult(
        final_state=state,
        outliers=outliers,
        trace=trace,
        inlier_index_map=index_map,
        stop_reason=stop_reason,
        data=X,
        history=history,
        scaling=scaling,
    )
