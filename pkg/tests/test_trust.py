from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nostra.exceptions import ClusteringError
from nostra.gp import GPModel, TrainingSet
from nostra.trust import (
    CandidatePool,
    Clustering,
    _elbow_from_curve,
    build_pool,
    cluster_weights,
    elbow_select_k,
    kmeans_probs,
    pareto_probabilities,
    select_argmax,
    wcss,
    wcss_curve,
    weighted_scores,
)


def pool(means, variances=None):
    means = np.asarray(means, dtype=float)
    if variances is None:
        variances = np.zeros_like(means)
    return CandidatePool(np.zeros((means.shape[0], 2)), means, variances)


def brute_kmeans_1d(values, k):
    """Optimal 1-D partition by exhaustive search over sorted split points."""
    v = np.sort(values)
    best = np.inf
    for cuts in combinations(range(1, len(v)), k - 1):
        parts = np.split(v, cuts)
        best = min(best, sum(((p - p.mean()) ** 2).sum() for p in parts))
    return best


class TestParetoProbabilities:
    def test_singleton(self):
        field = pareto_probabilities(pool([[1.0, 2.0]], [[0.5, 0.5]]), 32, seed=0)
        assert field.probs.tolist() == [1.0]

    def test_deterministic_dominance(self):
        field = pareto_probabilities(pool([[0.0, 0.0], [1.0, 1.0]]), 16, seed=0)
        assert field.probs.tolist() == [1.0, 0.0]

    def test_incomparable(self):
        field = pareto_probabilities(pool([[0.0, 1.0], [1.0, 0.0]]), 16, seed=0)
        assert field.probs.tolist() == [1.0, 1.0]

    def test_invariants_on_random_pools(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            m = int(rng.integers(2, 80))
            p = pool(rng.random((m, 2)), rng.random((m, 2)) * 0.1)
            field = pareto_probabilities(p, 64, seed=int(rng.integers(1 << 30)))
            assert field.n_used == 64
            assert np.all((field.probs >= 0) & (field.probs <= 1))
            assert field.probs.sum() >= 1 - 1e-12

    def test_seeded(self):
        p = pool(np.random.default_rng(1).random((30, 2)), np.full((30, 2), 0.05))
        a = pareto_probabilities(p, 50, seed=4).probs
        b = pareto_probabilities(p, 50, seed=4).probs
        np.testing.assert_array_equal(a, b)

    def test_matches_per_realization_front_count(self):
        # independent route: draw the same normals, extract each front by brute force
        rng = np.random.default_rng(2)
        means, var = rng.random((12, 2)), rng.random((12, 2)) * 0.05
        n = 40
        field = pareto_probabilities(pool(means, var), n, seed=7)
        draws = means + np.sqrt(var) * np.random.default_rng(7).standard_normal((n, 12, 2))
        counts = np.zeros(12)
        for realization in draws:
            for j, b in enumerate(realization):
                if not any(np.all(a <= b) and np.any(a < b) for a in realization):
                    counts[j] += 1
        np.testing.assert_array_equal(field.probs, counts / n)

    def test_build_pool_uses_model_posteriors(self):
        x = np.array([[0.1, 0.2], [0.8, 0.7], [0.4, 0.9]])
        models = [GPModel.from_params(TrainingSet(x, y), 0.5, 0.01)
                  for y in ([1.0, 2.0, 0.5], [3.0, 1.0, 2.0])]
        xq = np.random.default_rng(3).random((5, 2))
        p = build_pool(models, xq)
        assert p.means.shape == (5, 2) and p.m == 5
        for j, model in enumerate(models):
            mu, var = model.predict(xq)
            np.testing.assert_array_equal(p.means[:, j], mu)
            np.testing.assert_array_equal(p.variances[:, j], var)


class TestKMeans:
    def test_separated_groups(self):
        c = kmeans_probs([0, 0, 1, 1], 2, seed=0)
        assert c.labels.tolist() == [0, 0, 1, 1]
        np.testing.assert_allclose(c.centers, [0, 1])

    def test_single_cluster(self):
        probs = [0.1, 0.5, 0.9, 0.3]
        c = kmeans_probs(probs, 1, seed=0)
        assert c.centers[0] == pytest.approx(np.mean(probs))
        assert set(c.labels.tolist()) == {0}

    def test_weight_of_pair(self):
        c = kmeans_probs([0.2, 0.4], 1)
        assert c.weights[0] == pytest.approx(0.3)

    def test_too_many_clusters(self):
        with pytest.raises(ClusteringError):
            kmeans_probs([0.5, 0.5, 0.1], 3)

    def test_deterministic(self):
        probs = np.random.default_rng(4).random(60)
        a, b = kmeans_probs(probs, 4, seed=5), kmeans_probs(probs, 4, seed=5)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_wcss_history_monotone(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            probs = rng.random(int(rng.integers(10, 100))) ** 3
            c = kmeans_probs(probs, int(rng.integers(2, 8)), seed=int(rng.integers(1000)))
            hist = np.array(c.wcss_history)
            assert np.all(np.diff(hist) <= 1e-12)
            assert hist[-1] == pytest.approx(wcss(probs, c), abs=1e-12)

    def test_converges_to_lloyd_fixed_point(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            probs = rng.random(40) ** 2
            c = kmeans_probs(probs, 4, seed=0)
            nearest = np.argmin(np.abs(probs[:, None] - c.centers[None, :]), axis=1)
            np.testing.assert_array_equal(nearest, c.labels)
            for j in range(4):
                assert c.centers[j] == pytest.approx(probs[c.labels == j].mean(), abs=1e-12)

    def test_never_worse_than_a_sorted_split(self):
        # any 1-D local optimum from k-means++ should be close to the exhaustive optimum
        rng = np.random.default_rng(8)
        for _ in range(20):
            probs = rng.random(9)
            got = wcss(probs, kmeans_probs(probs, 2, seed=0))
            assert got <= 1.5 * brute_kmeans_1d(probs, 2) + 1e-12

    def test_values_with_underflowing_gaps_still_fill_every_cluster(self):
        c = kmeans_probs([0.0, 4e-247], 2, seed=1)
        assert sorted(c.labels) == [0, 1]

    @given(st.lists(st.floats(0, 1), min_size=2, max_size=40), st.integers(1, 5))
    def test_label_and_weight_invariants(self, probs, k):
        probs = np.array(probs)
        k = min(k, np.unique(probs).shape[0])
        c = kmeans_probs(probs, k, seed=1)
        assert c.labels.min() >= 0 and c.labels.max() < k
        assert np.all(np.diff(c.centers) >= 0)
        for j in range(k):
            members = probs[c.labels == j]
            assert members.size > 0
            assert members.min() - 1e-12 <= c.weights[j] <= members.max() + 1e-12


class TestWCSS:
    def test_examples(self):
        own = Clustering(3, np.array([0, 1, 2]), np.array([0.1, 0.5, 0.9]), np.zeros(3))
        assert wcss([0.1, 0.5, 0.9], own) == 0.0
        one = Clustering(1, np.array([0, 0]), np.array([0.5]), np.zeros(1))
        assert wcss([0.0, 1.0], one) == 0.5
        assert wcss([0, 0, 1, 1], kmeans_probs([0, 0, 1, 1], 2, seed=0)) == 0.0

    def test_curve_nonincreasing(self):
        probs = np.random.default_rng(8).random(100) ** 2
        curve = wcss_curve(probs, 10, seed=0)
        assert curve.shape == (10,)
        assert np.all(np.diff(curve) <= 1e-12)


class TestElbow:
    def test_second_difference_rule(self):
        assert _elbow_from_curve([10, 4, 2.5, 2.2, 2.1]) == 2

    def test_bimodal(self):
        rng = np.random.default_rng(9)
        probs = np.concatenate([rng.normal(0.05, 0.01, 100), rng.normal(0.9, 0.01, 40)])
        assert elbow_select_k(probs, 10, seed=0) == 2

    def test_constant(self):
        assert elbow_select_k(np.full(20, 0.3), 10, seed=0) == 1
        assert elbow_select_k([0.0, 1.0, 0.0, 1.0], 10, seed=0) == 1

    def test_k_max_precondition(self):
        with pytest.raises(ValueError):
            elbow_select_k([0.1, 0.2, 0.3], 2)


class TestWeights:
    def test_equal_probs(self):
        c = Clustering(2, np.array([0, 1, 1]), np.array([0.4, 0.4]), np.zeros(2))
        np.testing.assert_allclose(cluster_weights([0.4, 0.4, 0.4], c), [0.4, 0.4])

    def test_empty_cluster(self):
        c = Clustering(2, np.array([0, 0]), np.array([0.1, 0.9]), np.zeros(2))
        with pytest.raises(ClusteringError):
            cluster_weights([0.1, 0.2], c)

    def test_relabel_equivariance(self):
        probs = np.array([0.1, 0.2, 0.8, 0.9, 0.5])
        labels = np.array([0, 0, 2, 2, 1])
        c = Clustering(3, labels, np.zeros(3), np.zeros(3))
        perm = np.array([2, 0, 1])
        c2 = Clustering(3, perm[labels], np.zeros(3), np.zeros(3))
        np.testing.assert_allclose(cluster_weights(probs, c2)[perm], cluster_weights(probs, c))


class TestScores:
    def test_unit_weights(self):
        c = Clustering(2, np.array([0, 1, 1]), np.zeros(2), np.ones(2))
        np.testing.assert_array_equal(weighted_scores([0.3, 0.1, 0.7], c), [0.3, 0.1, 0.7])

    def test_example(self):
        c = Clustering(2, np.array([0, 1]), np.zeros(2), np.array([1.0, 0.1]))
        scores = weighted_scores([1.0, 2.0], c)
        np.testing.assert_allclose(scores, [1.0, 0.2])
        assert select_argmax(scores, seed=0) == 0

    @given(st.lists(st.floats(0, 10), min_size=3, max_size=30), st.floats(0.01, 100))
    def test_scale_invariance(self, ehvi, factor):
        ehvi = np.array(ehvi)
        labels = np.arange(ehvi.shape[0]) % 3
        w = np.array([0.2, 0.5, 0.9])
        a = Clustering(3, labels, np.zeros(3), w)
        b = Clustering(3, labels, np.zeros(3), w * factor)
        assert (select_argmax(weighted_scores(ehvi, a), seed=3)
                == select_argmax(weighted_scores(ehvi, b), seed=3))

    def test_ties_broken_by_seed_only(self):
        scores = np.array([1.0, 5.0, 5.0, 5.0, 2.0])
        picks = {select_argmax(scores, seed=s) for s in range(40)}
        assert picks == {1, 2, 3}
        assert select_argmax(scores, seed=11) == select_argmax(scores, seed=11)
