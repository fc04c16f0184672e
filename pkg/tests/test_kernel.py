from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmsb.errors import GridTooLarge, MMSBError, NonPositiveDuration, TauOutOfRange
from mmsb.kernel import (
    CostMode,
    bridge_coefficients,
    bridge_moments,
    build_gibbs,
    dump_kernel,
    load_kernel_dump,
    pair_cost,
)
from mmsb.phasegrid import PhaseGrid

finite = st.floats(-10, 10, allow_nan=False)


class TestPairCost:
    @pytest.mark.parametrize("mode", list(CostMode))
    def test_zero_cases(self, mode):
        assert pair_cost((0, 0), (0, 0), 1.0, mode) == 0.0
        assert pair_cost((0, 1), (1, 1), 1.0, mode) == 0.0

    def test_free_flight_exact_any_h(self):
        assert pair_cost((0.3, 2.0), (0.3 + 2.0 * 0.7, 2.0), 0.7) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("h", [0.0, -1.0])
    def test_duration_must_be_positive(self, h):
        with pytest.raises(NonPositiveDuration):
            pair_cost((0, 0), (1, 0), h)

    def test_matches_inverse_transition_covariance(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            z0, z1 = rng.normal(size=2), rng.normal(size=2)
            h = rng.uniform(0.1, 3.0)
            Q = np.array([[h**3 / 3, h**2 / 2], [h**2 / 2, h]])
            r = z1 - np.array([z0[0] + z0[1] * h, z0[1]])
            assert pair_cost(z0, z1, h) == pytest.approx(r @ np.linalg.solve(Q, r), rel=1e-10)

    def test_broadcasts(self):
        z = np.random.default_rng(0).normal(size=(5, 2))
        table = pair_cost(z[:, None, :], z[None, :, :], 0.5)
        assert table.shape == (5, 5)
        assert table[1, 3] == pytest.approx(pair_cost(z[1], z[3], 0.5))

    @settings(max_examples=200, deadline=None)
    @given(finite, finite, finite, finite, st.floats(0.01, 10))
    def test_nonnegative(self, x0, v0, x1, v1, h):
        for mode in CostMode:
            assert pair_cost((x0, v0), (x1, v1), h, mode) >= 0.0

    @settings(max_examples=200, deadline=None)
    @given(finite, finite, finite, finite, st.floats(0.01, 10))
    def test_time_reversal(self, x0, v0, x1, v1, h):
        for mode in CostMode:
            a = pair_cost((x0, v0), (x1, v1), h, mode)
            b = pair_cost((x1, -v1), (x0, -v0), h, mode)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(finite, finite, finite, finite)
    def test_modes_agree_at_unit_step(self, x0, v0, x1, v1):
        a = pair_cost((x0, v0), (x1, v1), 1.0, CostMode.EXACT)
        b = pair_cost((x0, v0), (x1, v1), 1.0, CostMode.PAPER)
        assert a == pytest.approx(b, rel=1e-15, abs=1e-15)

    def test_mode_parse(self):
        assert CostMode.parse("paper") is CostMode.PAPER
        assert CostMode.parse("EXACT") is CostMode.EXACT
        with pytest.raises(ValueError):
            CostMode.parse("bogus")


class TestGibbs:
    def test_zero_velocity_diagonal_is_one(self):
        g = PhaseGrid.uniform(-1, 1, 3, -1, 1, 3)
        K = build_gibbs(g, 0.5, 0.2)
        for ix in range(3):
            s = g.index(ix, 1)  # v = 0
            assert K.log_weights[s, s] == 0.0

    def test_doubling_eps_halves_log_weights(self):
        g = PhaseGrid.uniform(-1, 1, 4, -1, 1, 3)
        a = build_gibbs(g, 0.7, 0.3)
        b = build_gibbs(g, 0.7, 0.6)
        np.testing.assert_allclose(b.log_weights, 0.5 * a.log_weights, rtol=1e-15)

    @pytest.mark.parametrize("mode", list(CostMode))
    def test_kernel_time_reversal_exact(self, mode):
        g = PhaseGrid.uniform(-1, 1, 5, -2, 2, 5)
        K = build_gibbs(g, 0.4, 0.3, mode).log_weights
        flip = g.velocity_flip()
        np.testing.assert_array_equal(K, K[np.ix_(flip, flip)].T)

    def test_entries_finite(self):
        g = PhaseGrid.uniform(-5, 5, 10, -5, 5, 10)
        K = build_gibbs(g, 0.1, 0.01)
        assert np.all(np.isfinite(K.log_weights))

    def test_memory_budget(self):
        g = PhaseGrid.uniform(0, 1, 10, 0, 1, 10)
        with pytest.raises(GridTooLarge):
            build_gibbs(g, 1.0, 1.0, memory_budget=1000)

    def test_rejects_bad_eps(self):
        g = PhaseGrid.uniform(0, 1, 2, 0, 1, 2)
        with pytest.raises(ValueError):
            build_gibbs(g, 1.0, 0.0)

    def test_total_matches_linear_sum(self):
        g = PhaseGrid.uniform(0, 1, 3, -1, 1, 3)
        K = build_gibbs(g, 1.0, 2.0)
        assert K.total == pytest.approx(K.linear(shift=False).sum(), rel=1e-14)

    def test_dump_round_trip(self, tmp_path):
        g = PhaseGrid.uniform(0, 1, 3, -1, 1, 2)
        K = build_gibbs(g, 1.0, 0.5)
        p = tmp_path / "k.bin"
        dump_kernel(p, K)
        raw = p.read_bytes()
        assert raw[:8] == b"MMSBKRN1"
        assert int.from_bytes(raw[8:16], "little") == 6
        assert len(raw) == 16 + 36 * 8
        np.testing.assert_array_equal(load_kernel_dump(p), K.log_weights)

    def test_dump_rejects_garbage(self, tmp_path):
        p = tmp_path / "k.bin"
        p.write_bytes(b"NOTAKERNEL......")
        with pytest.raises(MMSBError):
            load_kernel_dump(p)


class TestBridge:
    def test_pinned_at_ends(self):
        z0, z1 = np.array([0.2, -1.0]), np.array([1.0, 0.5])
        a = bridge_moments(z0, z1, 2.0, 0.0, 0.3)
        b = bridge_moments(z0, z1, 2.0, 2.0, 0.3)
        np.testing.assert_array_equal(a.mean, z0)
        np.testing.assert_array_equal(b.mean, z1)
        assert not a.covariance.any() and not b.covariance.any()

    def test_tau_range(self):
        with pytest.raises(TauOutOfRange):
            bridge_moments((0, 0), (1, 0), 1.0, 1.5, 0.1)
        with pytest.raises(TauOutOfRange):
            bridge_moments((0, 0), (1, 0), 1.0, -0.1, 0.1)

    def test_mean_is_hermite_cubic(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            (x0, v0), (x1, v1) = rng.normal(size=(2, 2))
            h = rng.uniform(0.2, 2.0)
            # cubic Hermite basis on [0, h]
            for tau in (0.0, h / 4, h / 2, 3 * h / 4, h):
                s = tau / h
                h00, h10 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s
                h01, h11 = -2 * s**3 + 3 * s**2, s**3 - s**2
                x = h00 * x0 + h10 * h * v0 + h01 * x1 + h11 * h * v1
                m = bridge_moments((x0, v0), (x1, v1), h, tau, 0.5).mean
                assert m[0] == pytest.approx(x, abs=1e-12)

    def test_covariance_psd_and_linear_in_eps(self):
        for tau in np.linspace(0.05, 0.95, 7):
            _, _, c1 = bridge_coefficients(1.0, tau, 0.1)
            _, _, c2 = bridge_coefficients(1.0, tau, 0.3)
            np.testing.assert_allclose(c2, 3 * c1, rtol=1e-12, atol=1e-16)
            np.testing.assert_array_equal(c1, c1.T)
            assert np.linalg.eigvalsh(c1).min() >= -1e-12

    def test_covariance_vanishes_near_ends(self):
        _, _, c = bridge_coefficients(1.0, 1e-6, 1.0)
        assert np.abs(c).max() < 1e-5
