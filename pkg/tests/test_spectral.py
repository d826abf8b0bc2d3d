import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critles.filters import FilterParams, apply_filter
from critles.spectral import (
    SobolevIndex,
    SpectralField,
    TorusGrid,
    conjugate_asymmetry,
    dealiased_product,
    derivative,
    divergence_residual,
    inner,
    leray_project,
    load_snapshot,
    make_grid,
    random_solenoidal,
    save_snapshot,
    sobolev_norm,
    stable_sum,
    symmetrize,
)

from . import oracles


def random_real(grid, seed, components=(3,)):
    """Real-valued field with every lattice mode populated (no mask)."""
    rng = np.random.default_rng(seed)
    return SpectralField.from_physical(grid, rng.standard_normal(components + grid.shape))


def single_mode(grid, n, comp=0, amp=1.0):
    c = np.zeros((3,) + grid.shape, complex)
    pos = tuple(x % grid.n for x in n)
    neg = tuple(-x % grid.n for x in n)
    c[(comp,) + pos] += amp / 2
    c[(comp,) + neg] += amp / 2
    return SpectralField(grid, c)


class TestGrid:
    def test_eight_keeps_two(self):
        g = make_grid(8, 2 * math.pi, 2 / 3)
        assert sorted(g.index_1d.tolist()) == list(range(-3, 5))
        assert g.cutoff == 2
        assert g.mask.sum() == 5**3

    def test_four_full_retention(self):
        g = make_grid(4, 2 * math.pi, 1.0)
        assert sorted(g.index_1d.tolist()) == [-1, 0, 1, 2]
        assert g.mask.all()

    def test_six(self):
        assert make_grid(6, 2 * math.pi, 2 / 3).cutoff == 2

    @pytest.mark.parametrize("n", [3, 5, 2, 0])
    def test_rejects_bad_resolution(self, n):
        with pytest.raises(ValueError):
            TorusGrid(n)

    @pytest.mark.parametrize("length", [0.0, -1.0])
    def test_rejects_bad_period(self, length):
        with pytest.raises(ValueError):
            TorusGrid(8, length)

    def test_rejects_bad_fraction(self):
        with pytest.raises(ValueError):
            TorusGrid(8, dealias_fraction=0.0)

    def test_scaled_period(self):
        g = TorusGrid(8, length=math.pi)
        assert np.max(g.k_sq) == pytest.approx(3 * (2 * 4) ** 2)


class TestSobolev:
    def test_unit_mode_full_s1(self, grid8):
        f = single_mode(grid8, (1, 0, 0))
        f = f * (1 / sobolev_norm(f))
        assert sobolev_norm(f, SobolevIndex(1.0)) == pytest.approx(math.sqrt(2), rel=1e-14)

    def test_constant_seminorm_zero(self, grid8):
        c = np.zeros(grid8.shape, complex)
        c[0, 0, 0] = 3.0
        f = SpectralField(grid8, c)
        assert sobolev_norm(f, SobolevIndex(0.5, homogeneous=True)) == 0.0
        assert sobolev_norm(f) == pytest.approx(3 * (2 * math.pi) ** 1.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_parseval_quadrature(self, grid8, seed):
        f = random_real(grid8, seed)
        q = oracles.quadrature_l2_sq(f.physical(), grid8.length)
        assert sobolev_norm(f) ** 2 == pytest.approx(q, rel=1e-12)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SobolevIndex(math.nan)

    def test_stable_sum_deterministic_and_accurate(self):
        x = np.random.default_rng(0).standard_normal((64, 64, 33)) * 1e8
        a = stable_sum(x)
        assert a == stable_sum(x.copy())
        assert a == pytest.approx(math.fsum(x.ravel().tolist()), rel=1e-14)


class TestLeray:
    def test_gradient_annihilated(self, grid8):
        phi = random_real(grid8, 3, components=())
        grad = SpectralField(grid8, np.stack([derivative(phi, i).coeffs for i in range(3)]))
        assert leray_project(grad).max_amplitude() <= 1e-15 * grad.max_amplitude()

    def test_removes_parallel_part(self, grid8):
        c = np.zeros((3,) + grid8.shape, complex)
        c[:, 1, 0, 0] = [1, 1, 0]
        c[:, -1, 0, 0] = [1, 1, 0]
        out = leray_project(SpectralField(grid8, c)).coeffs
        np.testing.assert_array_equal(out[:, 1, 0, 0], [0, 1, 0])

    def test_idempotent_and_self_adjoint(self, grid8):
        u = random_real(grid8, 1)
        v = random_real(grid8, 2)
        pu = leray_project(u)
        np.testing.assert_allclose(leray_project(pu).coeffs, pu.coeffs, atol=1e-12 * pu.max_amplitude())
        a, b = inner(pu, v), inner(u, leray_project(v))
        assert a == pytest.approx(b, rel=1e-12)

    def test_solenoidal_unchanged(self, grid8):
        w = random_solenoidal(grid8, 5)
        np.testing.assert_allclose(leray_project(w).coeffs, w.coeffs, atol=1e-15)


class TestDerivative:
    def test_unit_mode_scaled_by_i(self, grid8):
        c = np.zeros(grid8.shape, complex)
        c[1, 0, 0] = 1.0
        out = derivative(SpectralField(grid8, c), 0).coeffs
        assert out[1, 0, 0] == 1j
        assert np.count_nonzero(out) == 1

    def test_constant(self, grid8):
        c = np.zeros(grid8.shape, complex)
        c[0, 0, 0] = 2.0
        assert derivative(SpectralField(grid8, c), 2).max_amplitude() == 0.0

    def test_commutes_with_filter(self, grid8):
        f = random_real(grid8, 9)
        p = FilterParams(0.3, 1 / 6)
        for d in range(3):
            a = derivative(apply_filter(f, p), d).coeffs
            b = apply_filter(derivative(f, d), p).coeffs
            np.testing.assert_allclose(a, b, rtol=1e-14, atol=0)

    def test_matches_analytic(self, grid16):
        x, y, z = grid16.coordinates()
        f = SpectralField.from_physical(grid16, np.sin(2 * x) * np.cos(y))
        np.testing.assert_allclose(derivative(f, 0).physical(), 2 * np.cos(2 * x) * np.cos(y), atol=1e-13)


class TestProduct:
    def test_cos_squared(self, grid8):
        a = single_mode(grid8, (1, 0, 0), comp=0, amp=2.0)
        t = dealiased_product(a, a).coeffs[0, 0]
        assert t[0, 0, 0] == pytest.approx(4 * 0.5)
        assert t[2, 0, 0] == pytest.approx(4 * 0.25)
        assert t[-2, 0, 0] == pytest.approx(4 * 0.25)
        t = t.copy()
        t[0, 0, 0] = t[2, 0, 0] = t[-2, 0, 0] = 0
        assert np.max(np.abs(t)) < 1e-15

    def test_zero(self, grid8):
        b = random_real(grid8, 4)
        assert dealiased_product(SpectralField.zeros(grid8), b).max_amplitude() == 0.0

    @pytest.mark.parametrize("n,seed", [(4, 0), (4, 1), (4, 2), (8, 3)])
    def test_matches_brute_force_convolution(self, n, seed):
        grid = TorusGrid(n)
        a = random_real(grid, seed)
        b = random_real(grid, seed + 100)
        got = dealiased_product(a, b).coeffs
        ref = oracles.convolve_outer(a.coeffs, b.coeffs, grid)
        assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_scalar_times_vector(self, grid8):
        s = random_real(grid8, 11, components=())
        v = random_real(grid8, 12)
        got = dealiased_product(s, v).coeffs
        m = grid8.mask
        ref = SpectralField.from_physical(
            grid8, SpectralField(grid8, np.where(m, s.coeffs, 0)).physical() * SpectralField(grid8, np.where(m, v.coeffs, 0)).physical()
        ).coeffs
        np.testing.assert_allclose(got, np.where(m, ref, 0), atol=1e-14)

    def test_grid_mismatch(self, grid8, grid16):
        with pytest.raises(ValueError):
            dealiased_product(SpectralField.zeros(grid8), SpectralField.zeros(grid16))

    def test_conjugate_symmetry_preserved(self, grid8):
        a = random_real(grid8, 20)
        t = dealiased_product(a, a)
        assert conjugate_asymmetry(t.coeffs, grid8) <= 1e-13 * t.max_amplitude()


class TestField:
    def test_immutable(self, grid8):
        f = random_real(grid8, 0)
        with pytest.raises(ValueError):
            f.coeffs[0, 0, 0, 0] = 1.0

    def test_rejects_wrong_shape(self, grid8):
        with pytest.raises(ValueError):
            SpectralField(grid8, np.zeros((2,) + grid8.shape))

    def test_round_trip_physical(self, grid8):
        vals = np.random.default_rng(1).standard_normal((3,) + grid8.shape)
        f = SpectralField.from_physical(grid8, vals)
        np.testing.assert_allclose(f.physical(), vals, atol=1e-14)

    def test_symmetrize_makes_real(self, grid8):
        rng = np.random.default_rng(2)
        c = symmetrize(rng.standard_normal(grid8.shape) + 1j * rng.standard_normal(grid8.shape), grid8)
        assert conjugate_asymmetry(c, grid8) == 0.0


class TestRandomSolenoidal:
    def test_properties(self, grid16):
        w = random_solenoidal(grid16, 3, amplitude=2.5)
        assert sobolev_norm(w) == pytest.approx(2.5, rel=1e-14)
        assert divergence_residual(w) <= 1e-12
        assert w.coeffs[:, 0, 0, 0].tolist() == [0, 0, 0]
        assert not np.any(w.coeffs[:, ~grid16.mask])
        assert conjugate_asymmetry(w.coeffs, grid16) == 0.0

    def test_seeded(self, grid8):
        np.testing.assert_array_equal(random_solenoidal(grid8, 7).coeffs, random_solenoidal(grid8, 7).coeffs)
        assert not np.array_equal(random_solenoidal(grid8, 7).coeffs, random_solenoidal(grid8, 8).coeffs)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**63), slope=st.floats(-4, 0))
    def test_invariants_any_seed(self, seed, slope):
        g = TorusGrid(8)
        w = random_solenoidal(g, seed, slope)
        assert divergence_residual(w) <= 1e-12
        assert sobolev_norm(w) == pytest.approx(1.0, rel=1e-13)


class TestSnapshot:
    def test_round_trip(self, grid8, tmp_path):
        w = random_solenoidal(grid8, 1)
        b, m = save_snapshot(tmp_path / "w", w, 0.25, {"step": 3})
        assert b.stat().st_size == 3 * 8**3 * 16
        meta = json.loads(m.read_text())
        assert meta["N_g"] == 8 and meta["time"] == 0.25 and meta["step"] == 3
        back, _ = load_snapshot(tmp_path / "w")
        np.testing.assert_array_equal(back.coeffs, w.coeffs)
        assert back.div_free and back.zero_mean

    def test_lexicographic_order(self, grid4, tmp_path):
        c = np.zeros(grid4.shape, complex)
        c[3, 0, 0] = 5.0  # n = (-1, 0, 0), the smallest first index
        save_snapshot(tmp_path / "s", SpectralField(grid4, c))
        raw = np.fromfile(tmp_path / "s.bin", dtype="<c16").reshape(4, 4, 4)
        assert raw[0, 1, 1] == 5.0

    def test_grid_mismatch(self, grid8, tmp_path):
        save_snapshot(tmp_path / "w", random_solenoidal(grid8, 1))
        with pytest.raises(ValueError):
            load_snapshot(tmp_path / "w", TorusGrid(16))
