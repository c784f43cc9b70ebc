import math

import numpy as np
import pytest

from enhanced_kmeans.kmeans import euclidean_distance, lloyd_kmeans
from enhanced_kmeans.outliers import (
    STOP_MAX_ITER,
    STOP_NO_OUTLIERS,
    STOP_TRUNCATED,
    STOP_VARIANCE_INCREASED,
    EnhancedConfig,
    chebyshev_threshold,
    enhanced_kmeans,
    per_cluster_distances,
    remove_outliers_once,
)

DIAMOND = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def blobs_with_planted(rng, spread=0.5, per_blob=30):
    centers = np.array([[0.0, 0.0], [40.0, 0.0], [0.0, 40.0]])
    X = np.concatenate([c + rng.normal(scale=spread, size=(per_blob, 2)) for c in centers])
    planted = centers + np.array([6.0, 0.0])
    return np.concatenate([X, planted]), np.arange(len(X), len(X) + 3)


class TestPerClusterDistances:
    def test_members_at_centroid(self):
        X = np.zeros((3, 2))
        state = lloyd_kmeans(X, 1)
        assert per_cluster_distances(X, state, 0).tolist() == [0.0, 0.0, 0.0]

    def test_hand_case(self):
        X = np.array([[0.0], [2.0]])
        state = lloyd_kmeans(X, 1)
        assert per_cluster_distances(X, state, 0).tolist() == [1.0, 1.0]

    def test_matches_elementwise_distance(self, rng):
        X = rng.normal(size=(30, 3))
        state = lloyd_kmeans(X, 3, seed=0)
        for j in range(3):
            members = X[state.labels == j]
            expected = [euclidean_distance(p, state.centroids[j]) for p in members]
            np.testing.assert_array_equal(per_cluster_distances(X, state, j), expected)


class TestChebyshevThreshold:
    def test_constant(self):
        assert chebyshev_threshold([2.5] * 6, 2) == 2.5

    def test_single_value(self):
        assert chebyshev_threshold([4.0], 3) == 4.0

    def test_hand_case(self):
        assert chebyshev_threshold([0.0, 2.0], 2) == pytest.approx(1 + 2 * math.sqrt(2), rel=1e-15)

    def test_chebyshev_bound_on_random_sequences(self, rng):
        # zero-spread sequences sit exactly on their threshold; removal guards those separately
        for _ in range(500):
            m = rng.uniform(1.01, 4.0)
            d = np.abs(rng.standard_cauchy(size=rng.integers(2, 60)))
            t = chebyshev_threshold(d, m)
            assert np.count_nonzero(d >= t) <= d.size / m**2

    def test_errors(self):
        with pytest.raises(ValueError):
            chebyshev_threshold([], 2)
        with pytest.raises(ValueError):
            chebyshev_threshold([1.0, 2.0], 1.0)


class TestRemoveOutliersOnce:
    def test_zero_spread_cluster_keeps_everything(self):
        X = np.concatenate([DIAMOND, DIAMOND + 10])
        state = lloyd_kmeans(X, 2)
        surviving, records, _, removed = remove_outliers_once(X, state, 2.0)
        assert surviving.tolist() == list(range(8))
        assert records == [] and removed == [0, 0]

    def test_rounding_level_spread_keeps_everything(self):
        # three points equidistant from their mean; the computed distances differ by one ulp
        X = np.array([[3.0, 2.0, 2.0], [1.0, 2.0, 0.0], [3.0, 0.0, 0.0]])
        state = lloyd_kmeans(X, 1)
        d = per_cluster_distances(X, state, 0)
        assert 0 < d.max() - d.min() < 1e-15
        assert np.count_nonzero(d >= chebyshev_threshold(d, 1.45)) == 2  # would break the bound
        _, records, _, removed = remove_outliers_once(X, state, 1.45)
        assert records == [] and removed == [0]

    def test_planted_far_point_is_the_only_removal(self, rng):
        angles = np.linspace(0, 2 * np.pi, 40, endpoint=False)
        ring = np.column_stack([np.cos(angles), np.sin(angles)]) * rng.uniform(0.9, 1.1, size=(40, 1))
        X = np.vstack([ring, [[100.0, 0.0]]])
        state = lloyd_kmeans(X, 1)
        d = per_cluster_distances(X, state, 0)
        t = d.mean() + 2 * d.std(ddof=1)
        assert np.flatnonzero(d >= t).tolist() == [40]
        surviving, records, thresholds, _ = remove_outliers_once(X, state, 2.0)
        assert [r.point_index for r in records] == [40]
        assert records[0].distance_at_removal >= records[0].threshold_at_removal == thresholds[0]
        assert surviving.size == 40

    def test_small_clusters_remove_nothing(self):
        X = np.array([[0.0], [1.0], [50.0]])
        state = lloyd_kmeans(X, 2, init=[[0.5], [50.0]])
        _, records, _, _ = remove_outliers_once(X, state, 2.0)
        assert records == []

    def test_per_cluster_fraction_within_bound(self, rng):
        for trial in range(50):
            X = rng.standard_t(df=2, size=(120, 2))
            state = lloyd_kmeans(X, 4, seed=trial)
            m = rng.uniform(1.2, 3.0)
            _, _, _, removed = remove_outliers_once(X, state, m)
            sizes = state.cluster_sizes()
            assert all(r <= s / m**2 for r, s in zip(removed, sizes))

    def test_index_map_translates_indices(self):
        X = np.vstack([np.zeros((10, 1)) + np.arange(10)[:, None] * 0.01, [[5.0]]])
        state = lloyd_kmeans(X, 1)
        _, records, _, _ = remove_outliers_once(X, state, 2.0, index_map=np.arange(100, 111))
        assert [r.point_index for r in records] == [110]


class TestEnhancedKMeans:
    def test_equidistant_clusters_converge_immediately(self):
        X = np.concatenate([DIAMOND, DIAMOND + 10, DIAMOND * 2 - 30])
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=3))
        assert result.outliers == []
        assert len(result.trace) == 1
        assert result.stop_reason == STOP_NO_OUTLIERS

    def test_planted_outliers_found(self, rng):
        X, planted = blobs_with_planted(rng)
        state = lloyd_kmeans(X, 3, seed=0)
        for j in range(3):
            d = per_cluster_distances(X, state, j)
            members = np.flatnonzero(state.labels == j)
            t = d.mean() + 2 * d.std(ddof=1)
            assert set(planted) & set(members) <= set(members[d >= t])
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=3))
        assert set(planted.tolist()) <= set(result.outlier_indices.tolist())

    def test_conservation_and_records(self, rng):
        X = rng.standard_t(df=3, size=(300, 2))
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=4, seed=7))
        inl = set(result.inlier_index_map.tolist())
        out = result.outlier_indices.tolist()
        assert len(out) == len(set(out))
        assert inl.isdisjoint(out)
        assert inl | set(out) == set(range(300))
        assert all(r.distance_at_removal >= r.threshold_at_removal for r in result.outliers)
        assert sum(t.outliers_removed_this_iteration for t in result.trace) == len(out)
        assert result.final_state.labels.size == len(inl)

    def test_trace_variance_non_increasing(self, rng):
        for seed in range(20):
            X = rng.standard_t(df=3, size=(200, 2))
            result = enhanced_kmeans(X, EnhancedConfig(n_clusters=3, seed=seed))
            v = [t.average_variance for t in result.trace]
            assert all(b <= a + 1e-9 for a, b in zip(v, v[1:]))

    def test_baseline_is_first_iteration(self, rng):
        X = rng.standard_t(df=3, size=(150, 2))
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=3, seed=1))
        assert result.baseline_index_map.size == 150
        assert result.baseline_state.average_variance == result.trace[0].average_variance

    def test_single_outer_iteration_is_plain_kmeans(self, rng):
        X = rng.normal(size=(60, 2))
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=3, max_outer_iter=1, seed=2))
        plain = lloyd_kmeans(X, 3, seed=2)
        assert result.outliers == []
        assert result.stop_reason in (STOP_MAX_ITER, STOP_NO_OUTLIERS)
        np.testing.assert_array_equal(result.final_state.centroids, plain.centroids)

    def test_k_equals_rows(self, rng):
        X = rng.normal(size=(7, 2))
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=7))
        assert result.outliers == [] and result.final_state.average_variance == 0.0

    def test_too_few_survivors_rolls_back(self, rng, monkeypatch):
        # every cluster keeps a member under the bound, so force the case
        import enhanced_kmeans.outliers as mod

        real = mod.remove_outliers_once

        def greedy(data, state, m, iteration, index_map):
            surviving, records, thresholds, removed = real(data, state, m, iteration, index_map)
            gone = [
                mod.OutlierRecord(int(index_map[i]), iteration, int(state.labels[i]), 1.0, 0.0)
                for i in range(1, len(data))
            ]
            return np.array([0]), gone, thresholds, removed

        monkeypatch.setattr(mod, "remove_outliers_once", greedy)
        X = rng.normal(size=(20, 2))
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=3))
        assert result.stop_reason == STOP_TRUNCATED
        assert result.outliers == []
        assert result.inlier_index_map.size == 20
        assert result.trace[-1].outliers_removed_this_iteration == 0

    def test_standardize_flag(self, rng):
        X = np.column_stack([rng.normal(size=100), 1000 * rng.normal(size=100)])
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=2, standardize=True))
        np.testing.assert_allclose(result.data.std(axis=0, ddof=1), 1.0, rtol=1e-12)
        assert result.scaling is not None

    def test_cold_start_option_runs(self, rng):
        X = rng.normal(size=(100, 2))
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=3, warm_start=False, seed=3))
        assert len(result.outliers) + result.inlier_index_map.size == 100

    def test_deterministic(self, rng):
        X = rng.standard_t(df=3, size=(250, 3))
        cfg = EnhancedConfig(n_clusters=4, seed=9)
        a, b = enhanced_kmeans(X, cfg), enhanced_kmeans(X, cfg)
        assert a.outliers == b.outliers
        assert a.trace == b.trace
        assert a.final_state.centroids.tobytes() == b.final_state.centroids.tobytes()
        assert a.inlier_index_map.tobytes() == b.inlier_index_map.tobytes()

    @pytest.mark.parametrize("kwargs", [dict(n_clusters=0), dict(n_clusters=2, chebyshev_m=1.0), dict(n_clusters=2, max_outer_iter=0)])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            EnhancedConfig(**kwargs)

    def test_variance_increase_rolls_back(self, rng, monkeypatch):
        import enhanced_kmeans.outliers as mod

        real = mod.lloyd_kmeans
        calls = []

        def worse_second_fit(*args, **kwargs):
            state = real(*args, **kwargs)
            calls.append(1)
            if len(calls) == 2:
                state.average_variance = 1e12
            return state

        monkeypatch.setattr(mod, "lloyd_kmeans", worse_second_fit)
        X = rng.standard_t(df=2, size=(200, 2))
        result = enhanced_kmeans(X, EnhancedConfig(n_clusters=3))
        assert result.stop_reason == STOP_VARIANCE_INCREASED
        assert result.outliers == [] and result.inlier_index_map.size == 200
        assert len(result.trace) == 1 and result.trace[0].outliers_removed_this_iteration == 0
