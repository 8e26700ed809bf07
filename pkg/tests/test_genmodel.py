import numpy as np
import pytest

from basic_cd.errors import DomainError, ValidationError
from basic_cd.genmodel import (
    ScenarioConfig,
    bidcbm_mean,
    build_scenario,
    dcbm_mean,
    membership_matrix,
    out_in_transition,
    power_law_degrees,
    sample_bipartite,
    sample_symmetric,
    sequential_membership,
)


def test_sequential_membership():
    np.testing.assert_array_equal(sequential_membership([2, 2]), [1, 1, 2, 2])
    np.testing.assert_array_equal(sequential_membership([1, 1, 1]), [1, 2, 3])
    lab = sequential_membership([100, 200, 300])
    assert (lab[:100] == 1).all() and (lab[100:300] == 2).all() and (lab[300:] == 3).all()
    with pytest.raises(DomainError):
        sequential_membership([2, 0])


def test_membership_matrix_one_hot():
    X = membership_matrix([1, 2, 2, 3])
    np.testing.assert_array_equal(X.sum(axis=1), 1)
    assert X.shape == (4, 3)


@pytest.mark.parametrize("beta,K,expected", [
    (0.0, 3, np.eye(3)),
    (1.0, 2, np.ones((2, 2))),
    (0.5, 3, np.array([[1, .5, .5], [.5, 1, .5], [.5, .5, 1]])),
])
def test_out_in_transition(beta, K, expected):
    np.testing.assert_array_equal(out_in_transition(beta, K), expected)


def test_out_in_rejects_bad_beta():
    with pytest.raises(DomainError):
        out_in_transition(1.2, 2)


class TestPowerLaw:
    def test_singleton(self):
        assert power_law_degrees(1, rng=0).tolist() == [1.0]

    @pytest.mark.parametrize("seed", range(5))
    def test_max_normalization(self, seed):
        d = power_law_degrees(500, rng=seed)
        assert d.max() == 1.0 and d.min() > 0

    def test_minmax_normalization(self):
        d = power_law_degrees(500, rng=3, normalize="minmax")
        assert d.max() == 1.0 and d.min() == 0.0

    def test_raw_mean_matches_pareto(self):
        # Monte-Carlo oracle: Pareto(1, 5) has mean 5/4
        d = power_law_degrees(10_000, alpha=5, rng=11, normalize=None)
        assert d.min() >= 1.0
        assert abs(d.mean() - 1.25) < 0.1 * 1.25

    def test_raw_tail_matches_cdf(self):
        d = power_law_degrees(20_000, alpha=5, rng=12, normalize=None)
        for x in (1.2, 1.5, 2.0):
            assert abs((d > x).mean() - x ** -5) < 0.01


class TestMeans:
    def test_block_diagonal_when_beta_zero(self):
        W = dcbm_mean(np.ones(4), [1, 1, 2, 2], out_in_transition(0.0, 2))
        expected = np.kron(np.eye(2), np.ones((2, 2)))
        np.fill_diagonal(expected, 0)
        np.testing.assert_array_equal(W, expected)

    def test_homogeneous_when_beta_one(self):
        W = dcbm_mean(np.ones(5), [1, 1, 2, 2, 2], out_in_transition(1.0, 2))
        off = W[~np.eye(5, dtype=bool)]
        assert (off == 1).all()

    def test_four_node_example(self):
        theta = np.array([1, 0.5, 1, 0.5])
        labels = [1, 1, 2, 2]
        P = out_in_transition(0.5, 2)
        # oracle: explicit triple product, then zero the diagonal
        X = membership_matrix(labels)
        oracle = np.diag(theta) @ X @ P @ X.T @ np.diag(theta)
        np.fill_diagonal(oracle, 0)
        avg = oracle.sum() / 4  # makes the scale factor exactly 1
        W = dcbm_mean(theta, labels, P, avg)
        np.testing.assert_allclose(W, oracle, rtol=1e-15)
        assert W[0, 1] == pytest.approx(0.5)
        assert W[0, 2] == pytest.approx(0.5)
        assert W[1, 3] == pytest.approx(0.125)

    def test_two_values_for_flat_degrees(self):
        W = dcbm_mean(np.ones(6), [1, 1, 1, 2, 2, 2], out_in_transition(0.3, 2))
        vals = set(np.round(W[~np.eye(6, dtype=bool)], 12).tolist())
        assert vals == {1.0, 0.3}

    def test_scaling_and_properties(self):
        rng = np.random.default_rng(4)
        theta = power_law_degrees(300, rng=rng)
        labels = sequential_membership([100, 100, 100])
        W, clipped = dcbm_mean(theta, labels, out_in_transition(0.4, 3), 20, return_clipped=True)
        np.testing.assert_array_equal(W, W.T)
        assert (np.diag(W) == 0).all() and W.min() >= 0 and W.max() <= 1
        assert clipped == 0
        assert W.sum(axis=1).mean() == pytest.approx(20)

    def test_clipping_is_counted(self):
        W, clipped = dcbm_mean(np.ones(4), [1, 1, 2, 2], out_in_transition(0.0, 2), 3, return_clipped=True)
        assert clipped > 0 and W.max() == 1.0

    def test_zero_mean_is_degenerate(self):
        with pytest.raises(DomainError):
            dcbm_mean(np.zeros(3), [1, 1, 1], np.eye(1), 5)

    def test_bidcbm_toy(self):
        W = bidcbm_mean([1, 0.5], [1, 1], [1, 1], [1, 1], [[0.8]])
        np.testing.assert_allclose(W, [[0.8, 0.8], [0.4, 0.4]])

    def test_bidcbm_within_block(self):
        W = bidcbm_mean(np.ones(4), np.ones(2), [1, 1, 2, 2], [1, 2], np.eye(2))
        np.testing.assert_array_equal(W, [[1, 0], [1, 0], [0, 1], [0, 1]])

    def test_bidcbm_scaling(self):
        rng = np.random.default_rng(1)
        W = bidcbm_mean(rng.uniform(.2, 1, 50), rng.uniform(.2, 1, 30),
                        sequential_membership([25, 25]), sequential_membership([15, 15]),
                        out_in_transition(0.5, 2), avg_degree=6)
        assert W.sum(axis=1).mean() == pytest.approx(6)


class TestSampling:
    def test_extremes(self):
        assert sample_symmetric(np.zeros((5, 5)), 0).n_edges == 0
        full = np.ones((5, 5)) - np.eye(5)
        assert sample_symmetric(full, 0).n_edges == 10
        assert sample_bipartite(np.zeros((3, 4)), 0).n_edges == 0
        assert sample_bipartite(np.ones((3, 4)), 0).n_edges == 12

    def test_symmetric_edge_count(self):
        n, p = 200, 0.3
        om = np.full((n, n), p)
        np.fill_diagonal(om, 0)
        pairs = n * (n - 1) // 2
        count = sample_symmetric(om, 5).n_edges
        assert abs(count - p * pairs) <= 4 * np.sqrt(pairs * p * (1 - p))

    def test_bipartite_edge_count(self):
        count = sample_bipartite(np.full((100, 100), 0.5), 6).n_edges
        assert abs(count - 5000) <= 4 * np.sqrt(10_000 * 0.25)

    def test_rejects_invalid(self):
        with pytest.raises(DomainError):
            sample_symmetric(np.array([[0, 0.2], [0.3, 0]]))
        with pytest.raises(DomainError):
            sample_symmetric(np.array([[0, 1.5], [1.5, 0]]))
        with pytest.raises(DomainError):
            sample_bipartite(np.array([[-0.1]]))

    def test_empirical_frequencies_converge(self):
        rng = np.random.default_rng(21)
        n, R = 20, 2000
        om = rng.uniform(0.05, 0.95, (n, n))
        om = np.triu(om, 1)
        om = om + om.T
        counts = np.zeros((n, n))
        for _ in range(R):
            counts += sample_symmetric(om, rng).to_dense()
        freq = counts / R
        off = ~np.eye(n, dtype=bool)
        bound = 4 * np.sqrt(om * (1 - om) / R)
        assert (np.abs(freq - om)[off] <= bound[off]).all()
        assert (np.diag(counts) == 0).all()


class TestScenario:
    def cfg(self, **kw):
        base = dict(n=60, m=30, K=3, beta_primary=0.5, beta_bipartite=[0.5] * 5, avg_degree=10, seed=9)
        base.update(kw)
        return ScenarioConfig(**base)

    def test_defaults(self):
        c = ScenarioConfig(n=600, m=300, K=3)
        assert c.Q == 5 and c.avg_degree == 40 and c.replications == 200
        assert c.community_sizes == [200, 200, 200]
        assert c.bipartite_community_sizes == [100, 100, 100]

    def test_weak_signal_case_shapes(self):
        sc = build_scenario(ScenarioConfig(n=600, m=300, K=3, beta_primary=0.5, beta_bipartite=[0.5] * 5, seed=1))
        assert sc.primary.n == 600 and len(sc.bipartite) == 5
        assert all((b.n, b.m) == (600, 300) for b in sc.bipartite)
        np.testing.assert_array_equal(np.bincount(sc.labels)[1:], [200, 200, 200])
        assert 20 < 2 * sc.primary.n_edges / 600 < 60

    def test_q_zero(self):
        sc = build_scenario(self.cfg(beta_bipartite=[]))
        assert sc.bipartite == []

    def test_reproducible(self):
        a = build_scenario(self.cfg(), replication=3)
        b = build_scenario(self.cfg(), replication=3)
        assert a.primary == b.primary
        assert all(x == y for x, y in zip(a.bipartite, b.bipartite))
        assert build_scenario(self.cfg(), replication=4).primary != a.primary

    def test_streams_independent(self):
        a = build_scenario(self.cfg(beta_bipartite=[0.5, 0.5, 0.5, 0.5, 0.5]))
        b = build_scenario(self.cfg(beta_bipartite=[0.5, 0.5, 0.1, 0.5, 0.5]))
        assert a.primary == b.primary
        assert a.bipartite[0] == b.bipartite[0] and a.bipartite[4] == b.bipartite[4]
        assert a.bipartite[2] != b.bipartite[2]

    def test_fixed_degrees_option(self):
        c = self.cfg(redraw_degrees=False)
        np.testing.assert_array_equal(build_scenario(c, 0).theta, build_scenario(c, 1).theta)
        c = self.cfg()
        assert not np.array_equal(build_scenario(c, 0).theta, build_scenario(c, 1).theta)

    def test_validation_lists_fields(self):
        with pytest.raises(ValidationError) as exc:
            ScenarioConfig(n=10, m=5, K=2, community_sizes=[3, 3], beta_primary=2.0, beta_bipartite=[0.5])
        msg = str(exc.value)
        assert "community_sizes" in msg and "beta_primary" in msg

    def test_json_round_trip(self, tmp_path):
        import json
        c = self.cfg()
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(c.to_dict()))
        assert ScenarioConfig.from_json(p) == c

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            ScenarioConfig.from_dict({"n": 4, "m": 2, "K": 2, "bogus": 1})
