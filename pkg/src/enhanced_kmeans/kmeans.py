"""Lloyd's K-means with k-means++ seeding and per-cluster sample variance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng
from .errors import DataError

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6


def as_data_matrix(data) -> np.ndarray:
    """Validate and return ``data`` as a 2-D float64 array with finite values."""
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"data must be a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("data contains NaN or infinite values")
    return X


def row_distances(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Euclidean distance of every row of ``points`` to ``center``."""
    diff = points - center
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(row_distances(a[None, :], b)[0])


def squared_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """(n, k) matrix of squared Euclidean distances, computed from explicit differences.

    The difference form avoids the cancellation of the ``|x|^2 + |c|^2 - 2x.c``
    expansion and does not go through BLAS, so results do not depend on thread count.
    """
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def assign_points(data, centroids) -> np.ndarray:
    """Label every row with its nearest centroid; ties go to the lowest index."""
    X = np.asarray(data, dtype=np.float64)
    C = np.asarray(centroids, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] == 0:
        raise ValueError("centroid set is empty")
    if C.shape[1] != X.shape[1]:
        raise ValueError(f"dimension mismatch: data has {X.shape[1]} columns, centroids {C.shape[1]}")
    # np.argmin returns the first minimum, which is the declared tie-break.
    return np.argmin(squared_distances(X, C), axis=1)


def update_centroids(data, labels, n: int, previous=None) -> np.ndarray:
    """Coordinatewise cluster means.

    A cluster left empty is re-seeded at the data point farthest from its
    previous centroid (points already used for re-seeding in this step are
    skipped). Without ``previous`` an empty cluster raises.
    """
    if n < 1:
        raise ValueError("number of clusters must be >= 1")
    X = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=n)
    sums = np.zeros((n, X.shape[1]))
    np.add.at(sums, labels, X)
    C = np.empty_like(sums)
    nonempty = counts > 0
    C[nonempty] = sums[nonempty] / counts[nonempty, None]

    empty = np.flatnonzero(~nonempty)
    if empty.size:
        if previous is None:
            raise ValueError(f"clusters {empty.tolist()} are empty and no previous centroids were given")
        previous = np.asarray(previous, dtype=np.float64)
        used = np.zeros(X.shape[0], dtype=bool)
        for j in empty:
            d2 = squared_distances(X, previous[j : j + 1])[:, 0]
            d2[used] = -np.inf
            far = int(np.argmax(d2))
            used[far] = True
            C[j] = X[far]
    return C


def cluster_variance(points, centroid) -> float:
    """Sum of squared distances to ``centroid`` divided by ``j - 1``; 0 for fewer than two points."""
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(1, -1)
    c = np.asarray(centroid, dtype=np.float64).ravel()
    if P.shape[0] and P.shape[1] != c.shape[0]:
        raise ValueError(f"dimension mismatch: points have {P.shape[1]} columns, centroid {c.shape[0]}")
    j = P.shape[0]
    if j < 2:
        return 0.0
    diff = P - c
    return float(np.einsum("ij,ij->", diff, diff) / (j - 1))


def average_variance(per_cluster) -> float:
    values = np.asarray(per_cluster, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("average of an empty variance sequence")
    return float(values.mean())


def kmeans_plusplus(X: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding (Arthur & Vassilvitskii)."""
    n_rows = X.shape[0]
    centers = np.empty((n, X.shape[1]))
    first = int(rng.integers(n_rows))
    centers[0] = X[first]
    closest = squared_distances(X, centers[:1])[:, 0]
    for i in range(1, n):
        total = closest.sum()
        if total > 0:
            cumulative = np.cumsum(closest)
            idx = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
            idx = min(idx, n_rows - 1)
        else:
            # every row coincides with a chosen center
            idx = int(rng.integers(n_rows))
        centers[i] = X[idx]
        closest = np.minimum(closest, squared_distances(X, centers[i : i + 1])[:, 0])
    return centers


def random_rows(X: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    return X[rng.choice(X.shape[0], size=n, replace=False)].copy()


INITIALIZERS = {"k-means++": kmeans_plusplus, "random": random_rows}


@dataclass
class ClusteringState:
    centroids: np.ndarray
    labels: np.ndarray
    per_cluster_variance: np.ndarray
    average_variance: float
    iterations_used: int
    sse_history: list[float] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def sse(self) -> float:
        """Within-cluster sum of squared distances of the returned assignment."""
        return self.sse_history[-1] if self.sse_history else float("nan")

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)


def state_from(X: np.ndarray, centroids: np.ndarray, labels: np.ndarray, iterations: int, sse_history) -> ClusteringState:
    n = centroids.shape[0]
    per_cluster = np.array([cluster_variance(X[labels == j], centroids[j]) for j in range(n)])
    return ClusteringState(
        centroids=centroids,
        labels=labels,
        per_cluster_variance=per_cluster,
        average_variance=average_variance(per_cluster),
        iterations_used=iterations,
        sse_history=list(sse_history),
    )


def _sse(X, C, labels) -> float:
    diff = X - C[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def lloyd_kmeans(
    data,
    n: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    init="k-means++",
) -> ClusteringState:
    """Run Lloyd's algorithm.

    Parameters
    ----------
    data : array-like, shape (rows, cols)
    n : int
        Number of clusters, ``1 <= n <= rows``.
    seed : int
        Seed for the initializer; ignored when ``init`` is an array.
    max_iter : int
        Maximum number of assign/update rounds.
    tol : float
        Stop once the largest centroid shift is ``<= tol``.
    init : {"k-means++", "random"} or array-like of shape (n, cols)
        Seeding strategy, or explicit starting centroids (warm start).

    Returns
    -------
    ClusteringState
        Final centroids, nearest-centroid labels, and per-cluster variances.
        ``sse_history`` holds the within-cluster sum of squares after every
        assignment step; it is non-increasing.
    """
    X = as_data_matrix(data)
    rows = X.shape[0]
    if n < 1:
        raise ValueError("number of clusters must be >= 1")
    if n > rows:
        raise ValueError(f"cannot fit {n} clusters to {rows} rows")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")

    if isinstance(init, str):
        try:
            initializer = INITIALIZERS[init]
        except KeyError:
            raise ValueError(f"unknown init {init!r}; choose from {sorted(INITIALIZERS)}") from None
        C = initializer(X, n, make_rng(seed))
    else:
        C = np.array(init, dtype=np.float64)
        if C.shape != (n, X.shape[1]):
            raise ValueError(f"initial centroids must have shape {(n, X.shape[1])}, got {C.shape}")

    history = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        labels = assign_points(X, C)
        history.append(_sse(X, C, labels))
        C_new = update_centroids(X, labels, n, previous=C)
        shift = float(np.sqrt(np.max(np.sum((C_new - C) ** 2, axis=1))))
        C = C_new
        if shift <= tol:
            break

    labels = assign_points(X, C)
    history.append(_sse(X, C, labels))
    return state_from(X, C, labels, iterations, history)
