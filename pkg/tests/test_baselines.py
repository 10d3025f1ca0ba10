"""Classical detectors checked against independent brute-force scorers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from admf.baselines import (
    BaselineModel,
    abod_score,
    baseline_decide,
    baseline_score,
    baseline_scores,
    fit_baseline,
    fit_hbod,
    fit_pca,
    hbod_score,
    knn_score,
    nearest_rank_quantile,
    pca_score,
)


def cloud(n=50, f=4, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, scale, size=(n, f))


# -- independent oracles, written the slow obvious way --------------------


def knn_oracle(train, query, k):
    dists = sorted(math.dist(row, query) for row in train)
    return dists[k - 1]


def pca_oracle(train, query, cutoff=0.9):
    mean = train.mean(axis=0)
    cov = np.cov(train - mean, rowvar=False, ddof=1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    total = evals.sum()
    c = 0
    run = 0.0
    for lam in evals:
        c += 1
        run += lam
        if run / total >= cutoff - 1e-12:
            break
    basis = evecs[:, :c]
    d = query - mean
    r = d - basis @ (basis.T @ d)
    return float(r @ r)


def hbod_oracle(train, query, bins=10):
    n, f = train.shape
    total = 0.0
    for j in range(f):
        lo, hi = train[:, j].min(), train[:, j].max()
        if hi == lo:
            hi = lo + 1.0
        counts, edges = np.histogram(train[:, j], bins=bins, range=(lo, hi))
        dens = counts / n
        v = query[j]
        if v < edges[0] or v > edges[-1]:
            d = dens[dens > 0].min()
        else:
            idx = 0
            for b in range(bins):
                if edges[b] <= v <= edges[b + 1]:
                    idx = b
                    # keep scanning: right-open bins except the last
                    if v < edges[b + 1] or b == bins - 1:
                        break
            d = dens[idx]
        total += -math.log(d + 1e-12)
    return total


def abod_oracle(train, query):
    diffs = [row - query for row in train]
    diffs = [d for d in diffs if float(d @ d) > 0.0]
    if len(diffs) < 2:
        return 0.0
    vals = []
    for i in range(len(diffs)):
        for j in range(i + 1, len(diffs)):
            b, c = diffs[i], diffs[j]
            vals.append(float(b @ c) / (float(b @ b) * float(c @ c)))
    vals = np.array(vals)
    return -float(np.mean((vals - vals.mean()) ** 2))


class TestNearestRankQuantile:
    def test_known_positions(self):
        vals = np.arange(1.0, 11.0)  # 1..10
        assert nearest_rank_quantile(vals, 0.9) == 9.0  # ceil(0.9*10) = 9
        assert nearest_rank_quantile(vals, 1.0) == 10.0
        assert nearest_rank_quantile(vals, 0.05) == 1.0  # rank floor of 1

    def test_unsorted_input(self):
        assert nearest_rank_quantile(np.array([5.0, 1.0, 3.0]), 0.5) == 3.0

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=100), st.floats(0.01, 1.0))
    @settings(max_examples=100)
    def test_result_is_a_member(self, vals, q):
        arr = np.array(vals)
        assert nearest_rank_quantile(arr, q) in arr


class TestKnn:
    def test_matches_oracle(self):
        train = cloud(50, 4, seed=1)
        rng = np.random.default_rng(2)
        for k in (1, 5, 10):
            for _ in range(20):
                q = rng.normal(0, 2, size=4)
                assert knn_score(train, q, k) == pytest.approx(knn_oracle(train, q, k), rel=1e-9)

    def test_self_distance_counts(self):
        train = cloud(20, 3, seed=3)
        # k=1 scored at a training point is the zero self-distance
        assert knn_score(train, train[7], 1) == 0.0

    def test_batch_matches_single(self):
        train = cloud(300, 4, seed=4)
        queries = cloud(600, 4, seed=5, scale=2.0)
        model = BaselineModel(kind="knn", threshold=0.0, contamination=0.1, train=train, knn_k=10)
        batch = baseline_scores(model, queries)
        for i in range(0, 600, 37):
            assert batch[i] == pytest.approx(knn_score(train, queries[i], 10), rel=1e-9)

    def test_radially_monotone_from_cluster(self):
        train = cloud(100, 2, seed=6, scale=0.5)
        direction = np.array([1.0, 0.0])
        scores = [knn_score(train, r * direction, 10) for r in (2.0, 4.0, 8.0, 16.0)]
        assert scores == sorted(scores)

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            knn_score(cloud(5, 2), np.zeros(2), 6)


class TestPca:
    def test_matches_oracle(self):
        train = cloud(50, 4, seed=7)
        # stretch one direction so the cutoff keeps a strict subset
        train[:, 0] *= 10.0
        state = fit_pca(train)
        rng = np.random.default_rng(8)
        for _ in range(20):
            q = rng.normal(0, 3, size=4)
            assert pca_score(state, q) == pytest.approx(pca_oracle(train, q), rel=1e-9, abs=1e-12)

    def test_in_subspace_scores_zero(self):
        rng = np.random.default_rng(9)
        basis = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        train = rng.normal(size=(40, 2)) @ basis
        state = fit_pca(train, variance_cutoff=0.999)
        q = np.array([3.0, -2.0, 0.0])
        assert pca_score(state, q) == pytest.approx(0.0, abs=1e-18)
        assert pca_score(state, np.array([0.0, 0.0, 5.0])) == pytest.approx(25.0, rel=1e-12)

    def test_constant_data_degenerate(self):
        train = np.full((10, 3), 2.0)
        state = fit_pca(train)
        assert state.components.shape == (0, 3)
        assert pca_score(state, np.array([5.0, 2.0, 2.0])) == pytest.approx(9.0)

    def test_component_count_minimal(self):
        train = cloud(50, 4, seed=7)
        train[:, 0] *= 10.0
        state = fit_pca(train)
        _, s, _ = np.linalg.svd(train - train.mean(axis=0), full_matrices=False)
        ratios = np.cumsum(s * s) / np.sum(s * s)
        assert ratios[state.components.shape[0] - 1] >= 0.9 - 1e-12
        if state.components.shape[0] > 1:
            assert ratios[state.components.shape[0] - 2] < 0.9 - 1e-12


class TestHbod:
    def test_matches_oracle(self):
        train = cloud(50, 3, seed=10)
        state = fit_hbod(train)
        rng = np.random.default_rng(11)
        for _ in range(30):
            q = rng.normal(0, 2, size=3)
            assert hbod_score(state, q) == pytest.approx(hbod_oracle(train, q), rel=1e-9)

    def test_out_of_range_uses_min_positive_density(self):
        train = cloud(50, 1, seed=12)
        state = fit_hbod(train)
        far = hbod_score(state, np.array([1e6]))
        expected = -math.log(state.min_positive[0] + 1e-12)
        assert far == pytest.approx(expected, rel=1e-12)

    def test_constant_feature_handled(self):
        train = np.column_stack([np.full(30, 7.0), cloud(30, 1, seed=13)[:, 0]])
        state = fit_hbod(train)
        assert math.isfinite(hbod_score(state, np.array([7.0, 0.0])))
        # all mass in bin 0 for the constant column
        assert state.densities[0, 0] == 1.0

    def test_dense_region_scores_lower(self):
        rng = np.random.default_rng(14)
        train = rng.normal(0, 1, size=(500, 2))
        state = fit_hbod(train)
        assert hbod_score(state, np.zeros(2)) < hbod_score(state, np.array([3.5, -3.5]))


class TestAbod:
    def test_matches_oracle(self):
        train = cloud(25, 3, seed=15)
        rng = np.random.default_rng(16)
        for _ in range(10):
            q = rng.normal(0, 2, size=3)
            assert abod_score(train, q) == pytest.approx(abod_oracle(train, q), rel=1e-9)

    def test_coincident_points_skipped(self):
        train = cloud(10, 2, seed=17)
        q = train[0].copy()
        expect = abod_oracle(train, q)
        assert abod_score(train, q) == pytest.approx(expect, rel=1e-9)

    def test_all_coincident_scores_zero(self):
        train = np.tile(np.array([[1.0, 2.0]]), (5, 1))
        assert abod_score(train, np.array([1.0, 2.0])) == 0.0

    def test_outlier_scores_higher_than_inlier(self):
        rng = np.random.default_rng(18)
        train = rng.normal(0, 1, size=(60, 2))
        # surrounded point sees spread-out angles (high variance, low score);
        # the flipped sign makes the outlier larger
        assert abod_score(train, np.array([8.0, 8.0])) > abod_score(train, np.zeros(2))

    def test_minimum_train_size(self):
        with pytest.raises(ValueError):
            abod_score(cloud(2, 2), np.zeros(2))


class TestFitBaseline:
    def test_threshold_is_training_quantile(self):
        train = cloud(100, 3, seed=19)
        for kind in ("knn", "pca", "hbod", "abod"):
            model = fit_baseline(kind, train, contamination=0.1)
            scores = baseline_scores(model, train if model.train is None else model.train)
            # rank = ceil(0.9 * N); about 10% of training scores sit above
            above = np.sum(scores > model.threshold)
            assert above <= math.floor(0.1 * len(scores))
            assert model.threshold in scores

    def test_far_point_flagged_center_not(self):
        train = cloud(200, 3, seed=20)
        for kind in ("knn", "pca", "hbod", "abod"):
            model = fit_baseline(kind, train)
            assert baseline_decide(model, np.full(3, 25.0)), kind
            assert not baseline_decide(model, train.mean(axis=0)), kind

    def test_duplicate_heavy_training_set(self):
        base = cloud(10, 2, seed=21)
        train = np.vstack([base] * 8)
        for kind in ("knn", "pca", "hbod", "abod"):
            model = fit_baseline(kind, train)
            assert math.isfinite(model.threshold), kind
            assert math.isfinite(baseline_score(model, np.array([50.0, 50.0]))), kind

    def test_abod_subsample_deterministic(self):
        train = cloud(800, 3, seed=22)
        m1 = fit_baseline("abod", train, seed=5)
        m2 = fit_baseline("abod", train, seed=5)
        assert np.array_equal(m1.train, m2.train)
        assert m1.train.shape[0] == 500
        assert m1.threshold == m2.threshold

    def test_contamination_bounds(self):
        with pytest.raises(ValueError):
            fit_baseline("knn", cloud(), contamination=0.0)
        with pytest.raises(ValueError):
            fit_baseline("knn", cloud(), contamination=0.5)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            fit_baseline("isoforest", cloud())

    @given(st.integers(0, 100))
    @settings(max_examples=20, deadline=None)
    def test_scores_finite_on_gaussian_data(self, seed):
        train = cloud(40, 3, seed=seed)
        queries = cloud(10, 3, seed=seed + 1, scale=3.0)
        for kind in ("knn", "pca", "hbod", "abod"):
            model = fit_baseline(kind, train)
            assert np.all(np.isfinite(baseline_scores(model, queries))), kind
