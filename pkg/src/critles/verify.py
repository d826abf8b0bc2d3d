"""Property suites run by ``critles verify <suite>`` on built-in fixtures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import mhd, nse
from .filters import FilterParams, inverse_shift, verify_lemma_bounds
from .spectral import TorusGrid, inner, random_solenoidal, sobolev_norm


@dataclass
class Check:
    name: str
    attained: float
    tolerance: float
    passed: bool
    relation: str = "<="

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<58s} {self.attained:>12.4e} {self.relation} {self.tolerance:.3e}"


def _le(name: str, value: float, tol: float) -> Check:
    return Check(name, value, tol, bool(value <= tol), "<=")


def _ge(name: str, value: float, tol: float) -> Check:
    return Check(name, value, tol, bool(value >= tol), ">=")


def filter_suite() -> list[Check]:
    """Per-mode smoothing/contraction bounds on a 32^3 lattice."""
    grid = TorusGrid(32)
    checks = []
    for theta in (1.0 / 6.0, 1.0):
        for alpha in (1.0, 0.1, 0.01):
            p = FilterParams(alpha, theta)
            for beta in np.linspace(0.0, 2 * theta, 5):
                rep = verify_lemma_bounds(grid, p, float(beta))
                worst = max(rep.max_ratio_smoothing, rep.max_ratio_contraction)
                checks.append(
                    Check(f"smoothing bound theta={theta:.4g} alpha={alpha:g} beta={beta:.4g}", worst, 1 + rep.tolerance, rep.passed)
                )
    return checks


def orthogonality_residual(w, p: FilterParams) -> tuple[float, float]:
    """|(N(w), w + a^{2t}(-Lap)^t w)| and the scale ||w|| ||N(w)||."""
    n = nse.nonlinear_term(w, p)
    val = abs(inner(n, inverse_shift(w, p)))
    return val, sobolev_norm(w) * sobolev_norm(n)


def cancellation_scale(state: mhd.MHDState, p: FilterParams) -> float:
    dw, dW = mhd.mhd_rhs(state, mhd.MHDConfig(1.0, 1.0, p))
    return sobolev_norm(state.w) * sobolev_norm(dw) + sobolev_norm(state.W) * sobolev_norm(dW)


def identities_suite(n_fixtures: int = 20, n: int = 16, seed0: int = 1000) -> list[Check]:
    grid = TorusGrid(n)
    p = FilterParams(0.1, 1.0 / 6.0)
    worst_nse = 0.0
    worst_mhd = 0.0
    for i in range(n_fixtures):
        w = random_solenoidal(grid, seed0 + 2 * i)
        W = random_solenoidal(grid, seed0 + 2 * i + 1)
        val, scale = orthogonality_residual(w, p)
        worst_nse = max(worst_nse, val / scale)
        st = mhd.MHDState(w, W)
        worst_mhd = max(worst_mhd, mhd.cancellation_check(st, p) / cancellation_scale(st, p))
    return [
        _le(f"NSE nonlinear orthogonality ({n_fixtures} fields, {n}^3)", worst_nse, 1e-11),
        _le(f"MHD four-term cancellation ({n_fixtures} pairs, {n}^3)", worst_mhd, 1e-11),
    ]


def budget_residual(grid: TorusGrid, cfg: nse.NSEConfig, w0) -> float:
    st = nse.initial_state(w0, cfg)
    rows = nse.energy_budget(nse.simulate(st, cfg), cfg)
    return max(r.budget_residual for r in rows) / rows[0].model_energy


def budget_suite() -> list[Check]:
    """Shear-mode exact decay and the residual order over a coarse dt octave sweep."""
    checks = []
    grid = TorusGrid(16)
    cfg = nse.NSEConfig(0.1, FilterParams(0.1, 1.0 / 6.0), dt=1e-3, t_end=1.0)
    checks.append(_le("shear-mode budget residual / E0 (dt=1e-3)", budget_residual(grid, cfg, nse.shear_mode(grid)), 1e-8))

    dts = (0.02, 0.01, 0.005)
    res = []
    for dt in dts:
        c = nse.NSEConfig(0.1, FilterParams(0.1, 1.0 / 6.0), dt=dt, t_end=0.5)
        res.append(budget_residual(grid, c, nse.taylor_green(grid, 2.0)))
    slope = float(np.polyfit(np.log(dts), np.log(res), 1)[0])
    checks.append(_ge("Taylor-Green budget residual order (dt 0.02..0.005)", slope, 3.5))
    return checks


def reduction_suite(n_steps: int = 100) -> list[Check]:
    """MHD with zero magnetic field reproduces the NSE trajectory exactly."""
    grid = TorusGrid(16)
    p = FilterParams(0.1, 1.0 / 6.0)
    w0 = random_solenoidal(grid, 42, amplitude=2.0)
    ncfg = nse.NSEConfig(0.05, p, dt=1e-3, t_end=n_steps * 1e-3)
    mcfg = mhd.MHDConfig(0.05, 0.07, p, dt=1e-3, t_end=n_steps * 1e-3)
    a = nse.initial_state(w0, ncfg)
    b = mhd.initial_mhd_state(w0, w0 * 0.0, mcfg)
    sa = nse.NSEStepper(grid, ncfg)
    sb = mhd.MHDStepper(grid, mcfg)
    mismatched = 0
    for _ in range(n_steps):
        a = sa.step(a)
        b = sb.step(b)
        if not (np.array_equal(a.w.coeffs, b.w.coeffs) and not np.any(b.W.coeffs)):
            mismatched += 1
    max_diff = float(np.max(np.abs(a.w.coeffs - b.w.coeffs)))
    return [
        _le(f"MHD(W=0) vs NSE: steps with any coefficient mismatch ({n_steps})", float(mismatched), 0.0),
        _le("MHD(W=0) vs NSE: final max |coefficient difference|", max_diff, 0.0),
    ]


SUITES: dict[str, Callable[[], list[Check]]] = {
    "filter": filter_suite,
    "identities": identities_suite,
    "budget": budget_suite,
    "reduction": reduction_suite,
}
