import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basic_cd.clustering import KMeansOptions, ari, kmeans
from basic_cd.errors import DomainError


def exhaustive_inertia(X, K):
    """Optimal k-means cost by enumerating every labeling with all K clusters used."""
    best = np.inf
    for assign in itertools.product(range(K), repeat=len(X)):
        a = np.array(assign)
        if len(set(assign)) < K:
            continue
        cost = sum(((X[a == k] - X[a == k].mean(axis=0)) ** 2).sum() for k in range(K))
        best = min(best, cost)
    return best


def pair_count_ari(a, b):
    """ARI from explicit pair enumeration."""
    n = len(a)
    both = in_a = in_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            sa, sb = a[i] == a[j], b[i] == b[j]
            both += sa and sb
            in_a += sa
            in_b += sb
    total = comb(n, 2)
    expected = in_a * in_b / total if total else 0.0
    top = (in_a + in_b) / 2
    if top == expected:
        return 1.0
    return (both - expected) / (top - expected)


class TestKMeans:
    def test_separated_clouds(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(0, 0.3, (20, 2)), rng.normal(10, 0.3, (20, 2))])
        res = kmeans(X, KMeansOptions(K=2), rng=1)
        assert ari(res.labels, np.repeat([1, 2], 20)) == 1.0
        scatter = sum(((c - c.mean(axis=0)) ** 2).sum() for c in (X[:20], X[20:]))
        assert res.inertia == pytest.approx(scatter)

    def test_identical_points(self):
        res = kmeans(np.ones((6, 2)), KMeansOptions(K=2), rng=0)
        assert res.inertia == 0.0
        assert len(set(res.labels.tolist())) == 1

    def test_one_dimensional_example(self):
        X = np.array([[0.0], [1.0], [9.0], [10.0]])
        assert exhaustive_inertia(X, 2) == 1.0
        res = kmeans(X, KMeansOptions(K=2), rng=3)
        assert res.inertia == 1.0
        assert sorted(res.centers.ravel().tolist()) == [0.5, 9.5]
        assert res.labels[0] == res.labels[1] != res.labels[2] == res.labels[3]

    def test_too_few_points(self):
        with pytest.raises(DomainError):
            kmeans(np.zeros((2, 1)), KMeansOptions(K=3))

    def test_options_validation(self):
        with pytest.raises(DomainError):
            KMeansOptions(K=0)
        with pytest.raises(DomainError):
            KMeansOptions(K=2, init="provided-centers")

    def test_provided_centers(self):
        X = np.array([[0.0], [1.0], [9.0], [10.0]])
        res = kmeans(X, KMeansOptions(K=2, init="provided-centers", centers=np.array([[0.0], [10.0]])))
        np.testing.assert_array_equal(res.labels, [1, 1, 2, 2])

    def test_deterministic(self):
        X = np.random.default_rng(5).normal(size=(50, 2))
        a = kmeans(X, KMeansOptions(K=3), rng=7)
        b = kmeans(X, KMeansOptions(K=3), rng=7)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert a.inertia == b.inertia

    def test_stored_inertia_consistent(self):
        X = np.random.default_rng(6).normal(size=(40, 3))
        res = kmeans(X, KMeansOptions(K=4), rng=0)
        direct = ((X - res.centers[res.labels - 1]) ** 2).sum()
        assert res.inertia == direct

    @pytest.mark.parametrize("seed", range(10))
    def test_inertia_monotone(self, seed):
        X = np.random.default_rng(seed).normal(size=(60, 2))
        res = kmeans(X, KMeansOptions(K=4, n_init=1), rng=seed)
        h = np.array(res.history)
        assert (np.diff(h) <= 1e-12 * max(h[0], 1)).all()

    @pytest.mark.parametrize("trial", range(15))
    def test_matches_exhaustive_optimum(self, trial):
        rng = np.random.default_rng(100 + trial)
        n = int(rng.integers(3, 9))
        K = int(rng.integers(1, min(3, n) + 1))
        X = rng.normal(size=(n, int(rng.integers(1, 3))))
        res = kmeans(X, KMeansOptions(K=K, n_init=20), rng=trial)
        assert res.inertia == pytest.approx(exhaustive_inertia(X, K), rel=1e-12, abs=1e-12)


class TestARI:
    def test_identical(self):
        assert ari([1, 1, 2, 3], [1, 1, 2, 3]) == 1.0

    def test_label_permutation(self):
        assert ari([1, 1, 2, 2], [2, 2, 1, 1]) == 1.0

    def test_anti_correlated(self):
        assert pair_count_ari([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)
        assert ari([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)

    def test_trivial_partitions(self):
        assert ari([1, 1, 1], [2, 2, 2]) == 1.0
        assert ari([1, 2, 3], [3, 1, 2]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            ari([1, 2], [1, 2, 3])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 40).flatmap(lambda n: st.tuples(
        st.lists(st.integers(1, 4), min_size=n, max_size=n),
        st.lists(st.integers(1, 4), min_size=n, max_size=n))))
    def test_symmetric_and_matches_oracle(self, ab):
        a, b = ab
        assert ari(a, b) == pytest.approx(ari(b, a), abs=1e-12)
        assert ari(a, b) == pytest.approx(pair_count_ari(a, b), abs=1e-12)
        assert -1 <= ari(a, b) <= 1 + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(1, 4), min_size=2, max_size=30), st.permutations([1, 2, 3, 4]),
           st.randoms(use_true_random=False))
    def test_permutation_invariant(self, a, perm, rnd):
        b = [rnd.randint(1, 3) for _ in a]
        relabel = {i + 1: p for i, p in enumerate(perm)}
        assert ari([relabel[x] for x in a], b) == pytest.approx(ari(a, b), abs=1e-12)

    def test_chance_level(self):
        rng = np.random.default_rng(2024)
        vals = [ari(rng.integers(1, 4, 300), rng.integers(1, 4, 300)) for _ in range(1000)]
        assert abs(np.mean(vals)) <= 0.02
