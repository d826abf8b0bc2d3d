import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critles import mhd, nse
from critles.filters import FilterParams
from critles.spectral import SpectralField, TorusGrid, divergence_residual, random_solenoidal, sobolev_norm
from critles.verify import cancellation_scale

from . import oracles

P = FilterParams(0.1, 1 / 6)


class TestRhs:
    @pytest.mark.parametrize("p", [FilterParams(0.0), P, FilterParams(0.5, 1.0)])
    @pytest.mark.parametrize("seed", [0, 1])
    def test_matches_brute_force(self, grid4, p, seed):
        w = random_solenoidal(grid4, 2 * seed, amplitude=2.0)
        B = random_solenoidal(grid4, 2 * seed + 1, amplitude=1.5)
        dw, dB = mhd.mhd_rhs(mhd.MHDState(w, B), mhd.MHDConfig(1.0, 1.0, p))
        rw, rB = oracles.mhd_nonlinear(w.coeffs, B.coeffs, grid4, p.alpha, p.theta)
        assert np.max(np.abs(dw.coeffs - rw)) <= 1e-12 * np.max(np.abs(rw))
        assert np.max(np.abs(dB.coeffs - rB)) <= 1e-12 * np.max(np.abs(rB))

    def test_zero_magnetic_field_gives_nse(self, grid16):
        w = random_solenoidal(grid16, 3)
        dw, dB = mhd.mhd_rhs(mhd.MHDState(w, SpectralField.zeros(grid16)), mhd.MHDConfig(1.0, 1.0, P))
        np.testing.assert_array_equal(dw.coeffs, nse.nonlinear_term(w, P).coeffs)
        assert dB.max_amplitude() == 0.0

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32), alpha=st.floats(0.0, 2.0), theta=st.sampled_from([1 / 6, 1.0]))
    def test_four_term_cancellation(self, seed, alpha, theta):
        g = TorusGrid(8)
        s = mhd.MHDState(random_solenoidal(g, seed, amplitude=3.0), random_solenoidal(g, seed + 1, amplitude=2.0))
        p = FilterParams(alpha, theta)
        assert mhd.cancellation_check(s, p) <= 1e-11 * cancellation_scale(s, p)

    def test_outputs_solenoidal(self, grid16):
        s = mhd.MHDState(random_solenoidal(grid16, 1), random_solenoidal(grid16, 2))
        for f in mhd.mhd_rhs(s, mhd.MHDConfig(1.0, 1.0, P)):
            assert divergence_residual(f) <= 1e-12

    def test_pressure_reduces_to_nse(self, grid16):
        w = random_solenoidal(grid16, 5)
        q = mhd.mhd_pressure(mhd.MHDState(w, SpectralField.zeros(grid16)), P)
        np.testing.assert_allclose(q.coeffs, nse.pressure_solve(w, P).coeffs, atol=1e-16)


class TestConfig:
    def test_rejects_bad_viscosity(self):
        with pytest.raises(ValueError):
            mhd.MHDConfig(0.1, 0.0)


class TestInitialData:
    def test_orszag_tang(self, grid16):
        w, B = mhd.orszag_tang(grid16, 1.0, 0.8)
        for f in (w, B):
            assert divergence_residual(f) <= 1e-14
            assert np.all(f.coeffs[2] == 0)
            # z-invariant: only kz = 0 populated
            assert not np.any(np.abs(f.coeffs[..., 1:]) > 1e-15)
        assert np.abs(B.coeffs[1, 2, 0, 0]) == pytest.approx(0.4, rel=1e-14)


class TestStep:
    def test_reduction_bitwise(self, grid16):
        w0 = random_solenoidal(grid16, 42, amplitude=2.0)
        ncfg = nse.NSEConfig(0.05, P, dt=1e-3, t_end=0.03)
        mcfg = mhd.MHDConfig(0.05, 0.2, P, dt=1e-3, t_end=0.03)
        a = list(nse.simulate(nse.initial_state(w0, ncfg), ncfg))
        b = list(mhd.simulate_mhd(mhd.initial_mhd_state(w0, SpectralField.zeros(grid16), mcfg), mcfg))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.w.coeffs, y.w.coeffs)
            assert not np.any(y.W.coeffs)

    def test_self_convergence_orszag_tang(self):
        grid = TorusGrid(32)
        finals = {}
        for dt in (0.04, 0.02, 0.01):
            cfg = mhd.MHDConfig(0.1, 0.1, P, dt=dt, t_end=0.8)
            s = mhd.initial_mhd_state(*mhd.orszag_tang(grid), cfg)
            stepper = mhd.MHDStepper(grid, cfg)
            for _ in range(cfg.n_steps):
                s = stepper.step(s)
            finals[dt] = s
        def err(a, b):
            return sobolev_norm(a.w - b.w) + sobolev_norm(a.W - b.W)
        r = err(finals[0.04], finals[0.02]) / err(finals[0.02], finals[0.01])
        assert 13.0 < r < 19.0

    def test_budget_closes(self, grid16):
        cfg = mhd.MHDConfig(0.1, 0.05, P, dt=2e-3, t_end=0.5)
        s0 = mhd.initial_mhd_state(random_solenoidal(grid16, 1), random_solenoidal(grid16, 2), cfg)
        rows = mhd.mhd_energy_budget(mhd.simulate_mhd(s0, cfg), cfg)
        assert max(r.budget_residual for r in rows) <= 1e-8 * rows[0].model_energy
        e = [r.model_energy for r in rows]
        assert all(b < a for a, b in zip(e, e[1:]))
        r = rows[10]
        assert r.dissipation_rate == pytest.approx(r.channels["dissipation_fluid"] + r.channels["dissipation_magnetic"])

    def test_blow_up(self, grid8):
        c = random_solenoidal(grid8, 0).coeffs.copy()
        c[1, 1, 1, 0] = np.inf
        with pytest.raises(nse.BlowUpError):
            mhd.mhd_step(mhd.MHDState(SpectralField.zeros(grid8), SpectralField(grid8, c)), mhd.MHDConfig(0.1, 0.1, P))


class TestBudget32:
    def test_zero_state_cancellation(self, grid8):
        z = SpectralField.zeros(grid8)
        assert mhd.cancellation_check(mhd.MHDState(z, z), P) == 0.0

    def test_zero_field_budget_equals_nse(self, grid16):
        w0 = random_solenoidal(grid16, 4)
        ncfg = nse.NSEConfig(0.1, P, dt=0.01, t_end=0.2)
        mcfg = mhd.MHDConfig(0.1, 0.3, P, dt=0.01, t_end=0.2)
        a = nse.energy_budget(nse.simulate(nse.initial_state(w0, ncfg), ncfg), ncfg)
        b = mhd.mhd_energy_budget(mhd.simulate_mhd(mhd.initial_mhd_state(w0, SpectralField.zeros(grid16), mcfg), mcfg), mcfg)
        for x, y in zip(a, b):
            assert (x.model_energy, x.dissipation_rate, x.budget_residual) == (y.model_energy, y.dissipation_rate, y.budget_residual)

    def test_orszag_tang_budget_32(self):
        grid = TorusGrid(32)
        cfg = mhd.MHDConfig(0.1, 0.1, P, dt=1e-3, t_end=1.0)
        s0 = mhd.initial_mhd_state(*mhd.orszag_tang(grid), cfg)
        rows = mhd.mhd_energy_budget(mhd.simulate_mhd(s0, cfg), cfg)
        assert max(r.budget_residual for r in rows) <= 1e-5 * rows[0].model_energy
