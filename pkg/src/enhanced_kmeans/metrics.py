"""Intrinsic cluster-validity indices and extrinsic label-comparison scores."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError, NumericError
from .kmeans import average_variance, cluster_variance
from .outliers import EnhancedResult

_CHUNK = 512


def _dense(labels) -> tuple[np.ndarray, int]:
    """Relabel to 0..k-1 in sorted order of the original ids."""
    _, inverse = np.unique(np.asarray(labels), return_inverse=True)
    return inverse.ravel(), int(inverse.max()) + 1 if inverse.size else 0


def _centroids(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    return sums / np.bincount(labels, minlength=k)[:, None]


def _check_lengths(data, labels):
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    labels = np.asarray(labels)
    if X.shape[0] != labels.shape[0]:
        raise DataError(f"{X.shape[0]} rows but {labels.shape[0]} labels")
    return X, labels


def silhouette_score(data, labels) -> float:
    """Mean silhouette coefficient; points in singleton clusters score 0.

    Needs O(n^2) distance evaluations, done in row chunks.
    """
    X, labels = _check_lengths(data, labels)
    labels, k = _dense(labels)
    if k < 2:
        raise NumericError("silhouette needs at least 2 clusters")
    n = X.shape[0]
    counts = np.bincount(labels, minlength=k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0

    scores = np.zeros(n)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        diff = X[start:stop, None, :] - X[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        per_cluster = dist @ onehot  # summed distance to every cluster
        own = labels[start:stop]
        rows = np.arange(stop - start)
        own_count = counts[own]
        a = np.where(own_count > 1, per_cluster[rows, own] / np.maximum(own_count - 1, 1), 0.0)
        mean_other = per_cluster / counts[None, :]
        mean_other[rows, own] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
        scores[start:stop] = np.where(own_count > 1, s, 0.0)
    return float(scores.mean())


def within_between_traces(data, labels) -> tuple[float, float]:
    """``(tr(W), tr(B))``: within-cluster and size-weighted between-cluster dispersion."""
    X, labels = _check_lengths(data, labels)
    labels, k = _dense(labels)
    C = _centroids(X, labels, k)
    counts = np.bincount(labels, minlength=k)
    diff = X - C[labels]
    within = float(np.einsum("ij,ij->", diff, diff))
    gap = C - X.mean(axis=0)
    between = float(np.sum(counts * np.einsum("ij,ij->i", gap, gap)))
    return within, between


def calinski_harabasz(data, labels) -> float:
    """Variance-ratio criterion. Returns ``inf`` when every cluster has zero spread."""
    X, labels = _check_lengths(data, labels)
    _, k = _dense(labels)
    n = X.shape[0]
    if k < 2:
        raise NumericError("Calinski-Harabasz needs at least 2 clusters")
    if k >= n:
        raise NumericError("Calinski-Harabasz needs fewer clusters than points")
    within, between = within_between_traces(X, labels)
    if within == 0:
        return math.inf
    return between / within * (n - k) / (k - 1)


def davies_bouldin(data, labels) -> float:
    """Mean over clusters of the worst ``(s_i + s_j) / d(c_i, c_j)``, lower is better.

    ``s`` is the mean member-to-centroid distance. Coincident centroids give ``inf``.
    """
    X, labels = _check_lengths(data, labels)
    labels, k = _dense(labels)
    if k < 2:
        raise NumericError("Davies-Bouldin needs at least 2 clusters")
    C = _centroids(X, labels, k)
    diff = X - C[labels]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    s = np.bincount(labels, weights=dist, minlength=k) / np.bincount(labels, minlength=k)
    gaps = np.sqrt(np.einsum("ijk,ijk->ij", C[:, None] - C[None], C[:, None] - C[None]))
    worst = np.empty(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if j == i:
                continue
            if gaps[i, j] == 0:
                ratios.append(math.inf)
            else:
                ratios.append((s[i] + s[j]) / gaps[i, j])
        worst[i] = max(ratios)
    return float(worst.mean())


def clustering_average_variance(data, labels) -> float:
    """Mean of per-cluster sample variances about each cluster's mean."""
    X, labels = _check_lengths(data, labels)
    labels, k = _dense(labels)
    C = _centroids(X, labels, k)
    return average_variance([cluster_variance(X[labels == j], C[j]) for j in range(k)])


@dataclass(frozen=True)
class LabelMapping:
    cluster_to_class: dict[int, int]

    def apply(self, labels) -> np.ndarray:
        return np.array([self.cluster_to_class[int(c)] for c in np.asarray(labels)], dtype=np.int64)


def map_clusters_to_labels(labels, truth) -> LabelMapping:
    """Plurality ground-truth class per cluster; ties go to the smallest class id."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    if labels.shape != truth.shape:
        raise DataError(f"{labels.shape[0]} predictions but {truth.shape[0]} truth labels")
    mapping = {}
    for cluster in np.unique(labels):
        classes, counts = np.unique(truth[labels == cluster], return_counts=True)
        # np.unique sorts classes, so argmax picks the smallest id on ties
        mapping[int(cluster)] = int(classes[np.argmax(counts)])
    return LabelMapping(mapping)


def _confusion(predicted, truth):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise DataError(f"{predicted.shape[0]} predictions but {truth.shape[0]} truth labels")
    if predicted.size == 0:
        raise DataError("empty label sequences")
    classes, encoded = np.unique(np.concatenate([truth, predicted]), return_inverse=True)
    t = encoded[: truth.size]
    p = encoded[truth.size :]
    m = np.zeros((classes.size, classes.size), dtype=np.int64)
    np.add.at(m, (t, p), 1)
    return m


def accuracy_and_f1(predicted, truth) -> tuple[float, float]:
    """Accuracy and support-weighted F1 (weights are true-class counts)."""
    m = _confusion(predicted, truth)
    tp = np.diag(m).astype(float)
    true_support = m.sum(axis=1)
    pred_support = m.sum(axis=0)
    precision = np.divide(tp, pred_support, out=np.zeros_like(tp), where=pred_support > 0)
    recall = np.divide(tp, true_support, out=np.zeros_like(tp), where=true_support > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0)
    n = m.sum()
    return float(tp.sum() / n), float(np.sum(f1 * true_support) / n)


def jaccard_weighted(predicted, truth) -> float:
    """Per-class intersection over union, averaged with true-class support weights."""
    m = _confusion(predicted, truth)
    tp = np.diag(m).astype(float)
    true_support = m.sum(axis=1)
    union = true_support + m.sum(axis=0) - tp
    iou = np.divide(tp, union, out=np.zeros_like(tp), where=union > 0)
    return float(np.sum(iou * true_support) / m.sum())


def _entropy(counts: np.ndarray) -> float:
    counts = counts[counts > 0].astype(float)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def homogeneity_completeness(predicted, truth) -> tuple[float, float]:
    """``h = 1 - H(truth|pred)/H(truth)`` and ``c = 1 - H(pred|truth)/H(pred)``.

    A zero marginal entropy makes the corresponding score 1.
    """
    m = _confusion(predicted, truth).astype(float)
    n = m.sum()
    h_truth = _entropy(m.sum(axis=1))
    h_pred = _entropy(m.sum(axis=0))
    nz = m > 0
    joint = m[nz] / n
    pred_marg = np.broadcast_to(m.sum(axis=0, keepdims=True), m.shape)[nz] / n
    truth_marg = np.broadcast_to(m.sum(axis=1, keepdims=True), m.shape)[nz] / n
    h_truth_given_pred = float(-np.sum(joint * np.log(joint / pred_marg)))
    h_pred_given_truth = float(-np.sum(joint * np.log(joint / truth_marg)))
    h = 1.0 if h_truth == 0 else 1.0 - h_truth_given_pred / h_truth
    c = 1.0 if h_pred == 0 else 1.0 - h_pred_given_truth / h_pred
    return h, c


def v_measure(predicted, truth, beta: float = 1.0) -> float:
    h, c = homogeneity_completeness(predicted, truth)
    denom = beta * h + c
    if denom == 0:
        return 0.0
    return float((1 + beta) * h * c / denom)


@dataclass
class MetricsReport:
    silhouette: float
    calinski_harabasz: float
    davies_bouldin: float
    average_variance: float
    accuracy: float | None = None
    f1_weighted: float | None = None
    jaccard_weighted: float | None = None
    v_measure: float | None = None

    INTRINSIC = ("silhouette", "calinski_harabasz", "davies_bouldin", "average_variance")
    EXTRINSIC = ("accuracy", "f1_weighted", "jaccard_weighted", "v_measure")

    def to_dict(self) -> dict[str, float]:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except NumericError:
        return math.nan


def extrinsic_scores(labels, truth) -> dict[str, float]:
    """Map clusters to their plurality class, then score the mapped labels against ``truth``."""
    predicted = map_clusters_to_labels(labels, truth).apply(labels)
    accuracy, f1 = accuracy_and_f1(predicted, truth)
    return {
        "accuracy": accuracy,
        "f1_weighted": f1,
        "jaccard_weighted": jaccard_weighted(predicted, truth),
        "v_measure": v_measure(predicted, truth),
    }


def evaluate_clustering(data, labels, truth=None) -> MetricsReport:
    """Every intrinsic metric, plus the extrinsic ones when ``truth`` is given.

    Undefined intrinsic values (e.g. a single cluster) are reported as NaN.
    """
    X, labels = _check_lengths(data, labels)
    report = MetricsReport(
        silhouette=_safe(silhouette_score, X, labels),
        calinski_harabasz=_safe(calinski_harabasz, X, labels),
        davies_bouldin=_safe(davies_bouldin, X, labels),
        average_variance=clustering_average_variance(X, labels),
    )
    if truth is not None:
        truth = np.asarray(truth)
        if truth.shape[0] != labels.shape[0]:
            raise DataError(f"{labels.shape[0]} predictions but {truth.shape[0]} truth labels")
        for name, value in extrinsic_scores(labels, truth).items():
            setattr(report, name, value)
    return report


@dataclass
class DistanceRatioReport:
    ratios: dict[int, list[float]]
    """cluster index -> one ratio per outlier removed from that cluster (absent when undefined)."""
    averages: dict[int, float]


def distance_ratio(result: EnhancedResult, data=None) -> DistanceRatioReport:
    """Outlier distance over the mean centroid distance of the final inliers of its cluster.

    Each outlier uses its removal-time distance and the cluster index it had
    when removed; the denominator comes from the final clustering. Clusters
    with no final inliers are left out. ``data`` defaults to ``result.data``.
    """
    if not result.outliers:
        raise ValueError("result has no outliers")
    X = result.data if data is None else np.asarray(data, dtype=np.float64)
    state = result.final_state
    inliers = X[result.inlier_index_map]
    diff = inliers - state.centroids[state.labels]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))

    ratios: dict[int, list[float]] = {}
    for rec in result.outliers:
        members = dist[state.labels == rec.cluster_at_removal]
        if members.size == 0:
            continue
        mean = members.mean()
        if mean <= 0:
            continue
        ratios.setdefault(rec.cluster_at_removal, []).append(rec.distance_at_removal / mean)
    ratios = dict(sorted(ratios.items()))
    return DistanceRatioReport(ratios=ratios, averages={c: float(np.mean(v)) for c, v in ratios.items()})
