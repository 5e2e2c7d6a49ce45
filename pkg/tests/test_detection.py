import math

import numpy as np
import pytest
import scipy.stats

from comp_isac import (
    DetectionSetup,
    ScenarioConfig,
    detection_threshold,
    generate_symbols,
    glrt_statistic,
    glrt_statistic_batch,
    pfa_closed_form,
    pod_closed_form,
    pod_exact,
    sample_h0_statistics,
    simulate_detection,
)
from comp_isac.detection import SymbolBlock
from comp_isac.errors import DomainError, RankDeficiencyError

DELTA_1E6 = 19.129168188604844  # detection_threshold(3, 1e-6)
DELTA_1E3 = 11.228872242412663  # detection_threshold(3, 1e-3)


class TestSymbols:
    def test_qpsk_constant_modulus(self):
        P = np.array([0.5, 2.0, 7.0])
        block = generate_symbols(P, 64, stream=np.random.default_rng(0))
        np.testing.assert_allclose(np.abs(block.X) ** 2, np.broadcast_to(P, (64, 3)), rtol=1e-12)

    def test_gaussian_mean_power(self):
        P = np.array([4.0])
        block = generate_symbols(P, 20000, modulation="gaussian", stream=np.random.default_rng(1))
        assert np.mean(np.abs(block.X) ** 2) == pytest.approx(4.0, rel=0.05)

    def test_deterministic_per_stream(self):
        a = generate_symbols([1.0, 1.0], 32, stream=np.random.default_rng(7)).X
        b = generate_symbols([1.0, 1.0], 32, stream=np.random.default_rng(7)).X
        np.testing.assert_array_equal(a, b)

    def test_domain(self):
        with pytest.raises(DomainError):
            generate_symbols([-1.0], 16)
        with pytest.raises(DomainError):
            generate_symbols([1.0, 1.0, 1.0], 2)
        with pytest.raises(DomainError):
            generate_symbols([1.0], 16, modulation="qam64")

    def test_block_power_validation(self):
        X = np.full((8, 1), 1.0 + 0j)
        with pytest.raises(DomainError):
            SymbolBlock(X=X, modulation="qpsk", power=np.array([9.0]))


class TestGlrtStatistic:
    def test_matches_explicit_inverse(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2))
        y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        sigma = 1.7
        gram_inv = np.linalg.inv(X.conj().T @ X)
        explicit = np.real(y.conj() @ X @ gram_inv @ X.conj().T @ y) / sigma
        assert glrt_statistic(y, X, sigma) == pytest.approx(explicit, rel=1e-12)

    def test_projection_geometry(self):
        X = np.eye(6, 2, dtype=complex) * 3.0
        y_in = X[:, 0] * (2.0 - 1j)
        y_out = np.zeros(6, dtype=complex)
        y_out[5] = 4.0
        assert glrt_statistic(y_in, X, 2.0) == pytest.approx(
            float(np.real(np.vdot(y_in, y_in))) / 2.0, rel=1e-12
        )
        assert glrt_statistic(y_out, X, 2.0) == pytest.approx(0.0, abs=1e-13)

    def test_rank_deficiency(self):
        X = np.ones((10, 2), dtype=complex)
        with pytest.raises(RankDeficiencyError):
            glrt_statistic(np.zeros(10, dtype=complex), X, 1.0)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(11)
        Xs = rng.standard_normal((5, 12, 3)) + 1j * rng.standard_normal((5, 12, 3))
        Ys = rng.standard_normal((5, 12)) + 1j * rng.standard_normal((5, 12))
        batch = glrt_statistic_batch(Ys, Xs, 3.3)
        singles = [glrt_statistic(Ys[b], Xs[b], 3.3) for b in range(5)]
        np.testing.assert_allclose(batch, singles, rtol=1e-12)

    def test_domain(self):
        X = np.eye(4, 2, dtype=complex)
        with pytest.raises(DomainError):
            glrt_statistic(np.zeros(3, dtype=complex), X, 1.0)
        with pytest.raises(DomainError):
            glrt_statistic(np.zeros(4, dtype=complex), X, 0.0)


class TestThreshold:
    def test_round_trip_with_pfa(self):
        for L in (1, 2, 3, 6):
            for p in (1e-6, 1e-4, 1e-2, 0.3):
                delta = detection_threshold(L, p)
                assert pfa_closed_form(L, delta) == pytest.approx(p, rel=1e-9)

    def test_frozen_values(self):
        assert detection_threshold(3, 1e-6) == pytest.approx(DELTA_1E6, rel=1e-12)
        assert detection_threshold(3, 1e-3) == pytest.approx(DELTA_1E3, rel=1e-12)

    def test_from_scenario(self, scenario):
        setup = DetectionSetup.from_scenario(scenario, target=0)
        assert setup.delta == pytest.approx(DELTA_1E6, rel=1e-12)
        assert setup.sigma_s2 == pytest.approx(10 ** 1.5, rel=1e-12)
        assert (setup.L, setup.N) == (3, 100)


class TestPodExact:
    def test_zero_threshold_detects_always(self):
        X = generate_symbols([1.0, 1.0], 32, stream=np.random.default_rng(5))
        assert pod_exact(np.array([0.5, 0.5]), X, 1.0, 0.0) == 1.0

    def test_zero_echo_reduces_to_pfa(self):
        X = generate_symbols([2.0, 1.0, 0.5], 50, stream=np.random.default_rng(6))
        val = pod_exact(np.zeros(3), X, 2.0, DELTA_1E3)
        assert val == pytest.approx(pfa_closed_form(3, DELTA_1E3), rel=1e-10)

    def test_never_below_pfa(self):
        rng = np.random.default_rng(8)
        X = generate_symbols([3.0, 3.0, 3.0], 100, stream=rng)
        for _ in range(10):
            h = np.sqrt(rng.exponential(0.2, size=3))
            assert pod_exact(h, X, 10 ** 1.5, DELTA_1E6) >= pfa_closed_form(3, DELTA_1E6) - 1e-15

    def test_monte_carlo_oracle(self):
        # fixed block and echo; noise-only Monte Carlo on the projection
        rng = np.random.default_rng(12)
        block = generate_symbols([8.0, 8.0, 8.0], 100, stream=rng)
        h = np.array([0.9, 0.3, 0.2])
        sigma = 10 ** 1.5
        delta = DELTA_1E3
        want = pod_exact(h, block, sigma, delta)
        q, _ = np.linalg.qr(block.X)
        trials = 40000
        noise = (rng.standard_normal((trials, 100)) + 1j * rng.standard_normal((trials, 100)))
        noise *= math.sqrt(sigma / 2.0)
        y = block.X @ h + noise
        stats = np.sum(np.abs(y @ q.conj()) ** 2, axis=1) / sigma
        got = np.mean(stats >= delta)
        se = math.sqrt(max(want * (1 - want), got * (1 - got)) / trials)
        assert abs(got - want) <= 4 * se + 1e-9


class TestPodClosedForm:
    def test_formula(self):
        P = np.array([2.0, 3.0])
        g = np.array([0.5, 0.25])
        sigma, N, delta = 4.0, 64, 7.0
        from comp_isac import marcum_q

        a = math.sqrt(2.0 * N * float(P @ g) / sigma)
        assert pod_closed_form(P, g, sigma, N, delta, 2) == pytest.approx(
            marcum_q(2, a, math.sqrt(2 * delta)), rel=1e-13
        )

    def test_zero_power_reduces_to_pfa(self):
        assert pod_closed_form([0.0, 0.0], [1.0, 1.0], 2.0, 100, DELTA_1E3, 2) == pytest.approx(
            pfa_closed_form(2, DELTA_1E3), rel=1e-10
        )

    def test_monotone_in_power(self):
        g = np.array([1.0, 0.1, 0.1])
        vals = [
            pod_closed_form(np.full(3, p), g, 10 ** 1.5, 100, DELTA_1E6, 3)
            for p in np.linspace(0.1, 30.0, 40)
        ]
        assert all(b >= a - 1e-13 for a, b in zip(vals, vals[1:]))


class TestLargeNAgreement:
    """The closed form drops the off-diagonal Gram terms; for QPSK the
    diagonal is exact, so the gap comes only from zero-mean cross terms
    and shrinks with N."""

    def _gaps(self, scenario, realization, N, P, blocks=60, seed=404):
        delta = detection_threshold(scenario.L, scenario.pfa_target)
        gaps = []
        for i in range(scenario.L):
            g_col = realization.g[:, i]
            sigma = realization.sigma_s2[i]
            closed = pod_closed_form(P, g_col, sigma, N, delta, scenario.L)
            h = np.sqrt(g_col)
            for k in range(blocks):
                block = generate_symbols(P, N, stream=np.random.default_rng([seed, i, k]))
                gaps.append((abs(pod_exact(h, block, sigma, delta) - closed), closed))
        return gaps

    def test_relative_gap_small_at_moderate_pod(self, scenario, realization):
        sc = scenario.replace(power_budget_db=9.0)
        P = np.full(3, sc.power_budget / 3.0)
        gaps = self._gaps(sc, realization, sc.N, P)
        rel = [g / c for g, c in gaps if c > 0.05]
        assert np.mean(rel) <= 0.02

    def test_gap_shrinks_with_n(self, scenario, realization):
        sc = scenario.replace(power_budget_db=9.0)
        P100 = np.full(3, sc.power_budget / 3.0)
        gap100 = np.mean([g for g, _ in self._gaps(sc, realization, 100, P100, blocks=40)])
        # quadruple N at fixed noncentrality: same closed form, tighter Gram
        gap400 = np.mean([g for g, _ in self._gaps(sc, realization, 400, P100 / 4.0, blocks=40)])
        assert gap400 < gap100


class TestSimulation:
    def setup_method(self):
        self.scenario = ScenarioConfig(pfa_target=1e-3)
        from comp_isac import sample_channels

        self.realization = sample_channels(self.scenario)
        self.setup = DetectionSetup.from_scenario(self.scenario, target=0)
        self.P = np.full(3, self.scenario.power_budget / 3.0)

    def test_deterministic_and_chunk_independent(self):
        a = simulate_detection(self.setup, self.P, self.realization, 0, 2000, seed=42)
        b = simulate_detection(self.setup, self.P, self.realization, 0, 2000, seed=42)
        c = simulate_detection(self.setup, self.P, self.realization, 0, 2000, seed=42, chunk=137)
        assert a == b == c
        s42 = sample_h0_statistics(self.setup, self.P, 100, seed=42)
        s43 = sample_h0_statistics(self.setup, self.P, 100, seed=43)
        assert not np.array_equal(s42, s43)

    def test_prefix_property(self):
        short = sample_h0_statistics(self.setup, self.P, 500, seed=9)
        long = sample_h0_statistics(self.setup, self.P, 2000, seed=9)
        np.testing.assert_array_equal(short, long[:500])

    def test_h0_distribution_light(self):
        stats = sample_h0_statistics(self.setup, self.P, 4000, seed=77)
        ks = scipy.stats.kstest(2.0 * stats, "chi2", args=(2 * self.setup.L,))
        assert ks.pvalue > 0.01

    def test_pfa_matches_target_and_ignores_power(self):
        for P in (self.P, self.P * 100.0):
            sim = simulate_detection(self.setup, P, self.realization, 0, 20000, seed=5)
            se = math.sqrt(1e-3 * (1 - 1e-3) / 20000)
            assert abs(sim.pfa_hat - 1e-3) <= 4 * se

    def test_pod_tracks_closed_form(self):
        sc = self.scenario.replace(power_budget_db=9.0)
        P = np.full(3, sc.power_budget / 3.0)
        setup = DetectionSetup.from_scenario(sc, target=2)
        sim = simulate_detection(setup, P, self.realization, 2, 20000, seed=6)
        closed = pod_closed_form(
            P, self.realization.g[:, 2], setup.sigma_s2, sc.N, setup.delta, 3
        )
        se = math.sqrt(max(closed * (1 - closed), sim.pod_hat * (1 - sim.pod_hat)) / 20000)
        # closed form carries an O(1/sqrt(N)) bias; allow it on top of noise
        assert abs(sim.pod_hat - closed) <= 4 * se + 0.02

    def test_domain(self):
        with pytest.raises(DomainError):
            simulate_detection(self.setup, self.P, self.realization, 0, 0, seed=1)
