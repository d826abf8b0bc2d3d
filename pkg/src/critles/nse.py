"""Filtered Navier-Stokes model with fractional Helmholtz filter.

    w_t + div( filter(w (x) w) ) - nu Lap w + grad q = fbar,   div w = 0

Pressure is eliminated by Leray projection; the viscous term is integrated
exactly with an integrating factor and the rest with classical RK4.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import scipy.integrate

from .filters import FilterParams, apply_filter, filter_multiplier
from .spectral import (
    SobolevIndex,
    SpectralField,
    TorusGrid,
    dot,
    expand,
    fix_planes,
    half,
    irfft_half,
    project_with,
    random_solenoidal,
    rfft_half,
    sobolev_norm,
    stable_sum,
    tensor_div_with,
)

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    """Raised when the state stops being finite."""

    def __init__(self, time: float, last_valid_time: float):
        super().__init__(f"non-finite state at t={time:.6g} (last valid t={last_valid_time:.6g})")
        self.time = time
        self.last_valid_time = last_valid_time


@dataclass(frozen=True, eq=False)
class FlowState:
    w: SpectralField
    time: float = 0.0


@dataclass(frozen=True, eq=False)
class NSEConfig:
    nu: float
    filter: FilterParams = field(default_factory=FilterParams)
    forcing: SpectralField | None = None
    dt: float = 1e-3
    t_end: float = 1.0
    filter_initial: bool = False

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.forcing is not None:
            if self.forcing.components != (3,):
                raise ValueError("forcing must be a vector field")
            f = self.forcing.coeffs
            kdotf = dot(self.forcing.grid.k_vec, f)
            scale = max(float(np.max(np.abs(f))), 1e-300)
            if np.max(np.abs(kdotf)) > 1e-12 * scale or np.max(np.abs(f[:, 0, 0, 0])) > 1e-12 * scale:
                raise ValueError("forcing must be divergence free with zero mean")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


# -- raw-array kernels -------------------------------------------------------
#
# The steppers work on the non-redundant half spectrum (last axis 0..N/2);
# full conjugate-symmetric arrays are rebuilt only at the API boundary.


_UPPER = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
_SYM_INDEX = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]])


class _Kernels:
    """Precomputed half-spectrum multipliers shared by the NSE and MHD steppers."""

    def __init__(self, grid: TorusGrid, p: FilterParams):
        self.grid = grid
        self.params = p
        self.mask = grid.mask_h
        self.k = grid.k_vec_h
        self.k_sq_safe = grid.k_vec_sq_safe_h
        self.symbol = None if p.is_identity else np.asarray(filter_multiplier(grid.k_sq_h, p))

    def physical(self, hc: np.ndarray) -> np.ndarray:
        return irfft_half(np.where(self.mask, hc, 0), self.grid)

    def flux(self, pa: np.ndarray, pb: np.ndarray | None = None) -> np.ndarray:
        """Filtered, dealiased tensor product ``T[p, q] = a_p b_q`` of physical vectors."""
        if pb is None:
            prod = np.stack([pa[i] * pa[j] for i, j in _UPPER])
        else:
            prod = pa[:, None] * pb[None, :]
        hc = np.where(self.mask, rfft_half(prod, self.grid), 0)
        if self.symbol is not None:
            hc *= self.symbol
        if pb is None:
            hc = hc[_SYM_INDEX]
        return hc

    def div(self, t: np.ndarray) -> np.ndarray:
        return tensor_div_with(t, self.k)

    def project(self, hc: np.ndarray) -> np.ndarray:
        return project_with(hc, self.k, self.k_sq_safe)

    def pressure(self, t: np.ndarray) -> np.ndarray:
        k = self.k
        ktk = sum(k[i] * (k[0] * t[i, 0] + k[1] * t[i, 1] + k[2] * t[i, 2]) for i in range(3))
        q = -ktk / self.k_sq_safe
        q[0, 0, 0] = 0
        return q

    def clean(self, hc: np.ndarray) -> np.ndarray:
        """Re-project, zero the mean, and restore exact conjugate symmetry."""
        hc = fix_planes(self.project(hc), self.grid)
        hc[..., 0, 0, 0] = 0
        return hc


_KERNEL_CACHE: dict = {}


def kernels(grid: TorusGrid, p: FilterParams) -> _Kernels:
    key = (id(grid), p)
    hit = _KERNEL_CACHE.get(key)
    if hit is None or hit.grid is not grid:
        if len(_KERNEL_CACHE) > 32:
            _KERNEL_CACHE.clear()
        hit = _Kernels(grid, p)
        _KERNEL_CACHE[key] = hit
    return hit


def _nse_nonlinear(hc: np.ndarray, kern: _Kernels) -> np.ndarray:
    return kern.project(-kern.div(kern.flux(kern.physical(hc))))


def lawson_rk4(
    us: Sequence[np.ndarray],
    rhs: Callable[[list[np.ndarray]], list[np.ndarray]],
    half: Sequence[np.ndarray],
    full: Sequence[np.ndarray],
    dt: float,
) -> list[np.ndarray]:
    """One integrating-factor RK4 step for u' = -L u + N(u).

    ``half`` and ``full`` hold exp(-L dt/2) and exp(-L dt) per field.
    """
    h = 0.5 * dt
    k1 = rhs(list(us))
    k2 = rhs([e * (u + h * k) for u, k, e in zip(us, k1, half)])
    k3 = rhs([e * u + h * k for u, k, e in zip(us, k2, half)])
    k4 = rhs([e2 * u + dt * (e * k) for u, k, e, e2 in zip(us, k3, half, full)])
    return [
        e2 * u + (dt / 6.0) * (e2 * a + 2.0 * (e * (b + c)) + d)
        for u, a, b, c, d, e, e2 in zip(us, k1, k2, k3, k4, half, full)
    ]


def viscous_factors(grid: TorusGrid, nu: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Half-spectrum exp(-nu |k|^2 dt/2) and exp(-nu |k|^2 dt)."""
    return np.exp(-nu * grid.k_sq_h * (0.5 * dt)), np.exp(-nu * grid.k_sq_h * dt)


def _field(hc: np.ndarray, grid: TorusGrid, **flags) -> SpectralField:
    return SpectralField(grid, expand(hc, grid), **flags)


# -- public operations -------------------------------------------------------


def nonlinear_term(w: SpectralField, p: FilterParams) -> SpectralField:
    """Leray projection of -div(filter(w (x) w)), dealiased."""
    kern = kernels(w.grid, p)
    return _field(_nse_nonlinear(half(w.coeffs, w.grid), kern), w.grid, zero_mean=True, div_free=True)


def filtered_flux(w: SpectralField, p: FilterParams) -> SpectralField:
    kern = kernels(w.grid, p)
    return _field(kern.flux(kern.physical(half(w.coeffs, w.grid))), w.grid)


def pressure_solve(w: SpectralField, p: FilterParams) -> SpectralField:
    """Zero-mean q with Lap q = -div div filter(w (x) w)."""
    kern = kernels(w.grid, p)
    t = kern.flux(kern.physical(half(w.coeffs, w.grid)))
    return _field(kern.pressure(t), w.grid, zero_mean=True)


def rhs(state: FlowState, cfg: NSEConfig) -> SpectralField:
    """Explicit part of the right side: nonlinear term plus forcing.

    The viscous part is the diagonal multiplier ``-nu |k|^2`` (see
    :func:`viscous_multiplier`) and is handled by the integrator.
    """
    out = nonlinear_term(state.w, cfg.filter)
    if cfg.forcing is not None:
        out = out + cfg.forcing
    return out


def viscous_multiplier(grid: TorusGrid, nu: float) -> np.ndarray:
    return -nu * grid.k_sq


class NSEStepper:
    """Holds the multipliers for repeated steps at fixed configuration."""

    def __init__(self, grid: TorusGrid, cfg: NSEConfig):
        self.grid = grid
        self.cfg = cfg
        self.kern = kernels(grid, cfg.filter)
        self.half, self.full = viscous_factors(grid, cfg.nu, cfg.dt)
        self.forcing = None if cfg.forcing is None else half(cfg.forcing.coeffs, grid).copy()

    def explicit(self, us: list[np.ndarray]) -> list[np.ndarray]:
        n = _nse_nonlinear(us[0], self.kern)
        if self.forcing is not None:
            n = n + self.forcing
        return [n]

    def advance(self, hc: np.ndarray) -> np.ndarray:
        (new,) = lawson_rk4([hc], self.explicit, [self.half], [self.full], self.cfg.dt)
        return self.kern.clean(new)

    def step(self, state: FlowState) -> FlowState:
        t_new = state.time + self.cfg.dt
        with np.errstate(invalid="ignore", over="ignore"):  # non-finite values are caught below
            hc = self.advance(half(state.w.coeffs, self.grid))
        if not np.all(np.isfinite(hc)):
            raise BlowUpError(t_new, state.time)
        return FlowState(_field(hc, self.grid, zero_mean=True, div_free=True), t_new)


def step(state: FlowState, cfg: NSEConfig) -> FlowState:
    return NSEStepper(state.w.grid, cfg).step(state)


def initial_state(w0: SpectralField, cfg: NSEConfig) -> FlowState:
    """Galerkin-truncate (and optionally filter) the supplied initial data."""
    grid = w0.grid
    w = apply_filter(w0, cfg.filter) if cfg.filter_initial else w0
    kern = kernels(grid, cfg.filter)
    hc = kern.clean(np.where(grid.mask_h, half(w.coeffs, grid), 0))
    return FlowState(_field(hc, grid, zero_mean=True, div_free=True), 0.0)


def simulate(state: FlowState, cfg: NSEConfig, n_steps: int | None = None) -> Iterator[FlowState]:
    """Yield the initial state and every subsequent step."""
    stepper = NSEStepper(state.w.grid, cfg)
    n_steps = cfg.n_steps if n_steps is None else n_steps
    yield state
    for i in range(n_steps):
        state = stepper.step(state)
        # time from the step counter, not accumulated sums
        state = FlowState(state.w, (i + 1) * cfg.dt)
        yield state


# -- energy budget -----------------------------------------------------------


@dataclass
class EnergyBudget:
    time: float
    model_energy: float
    dissipation_rate: float
    forcing_power: float
    budget_residual: float
    energy_unweighted: float = math.nan
    channels: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {
            "time": self.time,
            "model_energy": self.model_energy,
            "dissipation_rate": self.dissipation_rate,
            "forcing_power": self.forcing_power,
            "budget_residual": self.budget_residual,
            "energy_unweighted": self.energy_unweighted,
        }
        row.update(self.channels)
        return row


def energy_terms(w: SpectralField, p: FilterParams, nu: float, forcing: SpectralField | None = None) -> tuple[float, float, float, float]:
    """Model energy, dissipation rate, forcing power and the unweighted-energy variant.

    E = 1/2 (||w||^2 + alpha^{2 theta} |w|_{H^theta}^2)
    D = nu (|w|_{H^1}^2 + alpha^{2 theta} |w|_{H^{1+theta}}^2)
    P = <fbar, w + alpha^{2 theta} (-Lap)^theta w> = <f, w>
    """
    grid = w.grid
    vol = grid.volume
    frac = p.fractional_symbol(grid.k_sq)
    shift = 1.0 + p.strength * frac
    dens = np.sum(np.abs(w.coeffs) ** 2, axis=0)
    energy = 0.5 * vol * stable_sum(dens * shift)
    diss = nu * vol * stable_sum(dens * grid.k_sq * shift)
    unweighted = 0.5 * vol * stable_sum(dens * (1.0 + frac))
    power = 0.0
    if forcing is not None:
        power = vol * stable_sum(np.sum((forcing.coeffs * np.conj(w.coeffs)).real, axis=0) * shift)
    return energy, diss, power, unweighted


def cumulative_integral(values: np.ndarray, dt: float, rule: str = "simpson") -> np.ndarray:
    """Running integral of uniformly sampled values, starting at 0.

    ``simpson`` fits a quadratic through each triple of samples (fourth
    order locally, so the running residual tracks an RK4 integrator);
    ``trapezoid`` is second order.
    """
    y = np.asarray(values, dtype=float)
    if rule not in ("simpson", "trapezoid"):
        raise ValueError(f"unknown quadrature rule {rule!r}")
    if y.size < 2:
        return np.zeros_like(y)
    if rule == "trapezoid" or y.size < 3:
        return scipy.integrate.cumulative_trapezoid(y, dx=dt, initial=0.0)
    return scipy.integrate.cumulative_simpson(y, dx=dt, initial=0.0)


def energy_budget(
    history: Iterable[FlowState],
    cfg: NSEConfig,
    rule: str = "simpson",
) -> list[EnergyBudget]:
    """Energy-equality rows for a uniformly spaced trajectory.

    residual(t) = |E(t) - E(0) + int_0^t D - int_0^t P|. ``history`` may be
    a generator; only scalars are retained.
    """
    terms = [(st.time, *energy_terms(st.w, cfg.filter, cfg.nu, cfg.forcing)) for st in history]
    if not terms:
        return []
    t, e, d, pw, eu = (np.array(col) for col in zip(*terms))
    net = cumulative_integral(d - pw, cfg.dt, rule)
    res = np.abs(e - e[0] + net)
    return [EnergyBudget(*row) for row in zip(t.tolist(), e.tolist(), d.tolist(), pw.tolist(), res.tolist(), eu.tolist())]


# -- continuous dependence ---------------------------------------------------


@dataclass
class GrowthReport:
    times: np.ndarray
    difference: np.ndarray
    envelope: np.ndarray
    gronwall_constant: float
    integrated_norm: np.ndarray
    perturbation_size: float

    @property
    def final_difference(self) -> float:
        return float(self.difference[-1])

    @property
    def within_envelope(self) -> bool:
        return bool(np.all(self.difference <= self.envelope * (1 + 1e-9)))


def continuous_dependence_probe(
    w0: FlowState,
    perturbation_size: float,
    cfg: NSEConfig,
    seed: int = 7,
    s: float = 1.0 / 6.0,
) -> GrowthReport:
    """Evolve w0 and w0 + delta side by side and fit a Gronwall envelope.

    delta is a seeded random solenoidal field with ||delta||_{s,2} equal to
    ``perturbation_size``. The envelope is
    ||delta||_{s} exp(C int_0^t ||w_1||^2_{1+s,2}) with the smallest C that
    covers the observed difference.
    """
    grid = w0.w.grid
    idx = SobolevIndex(s)
    idx_hi = SobolevIndex(1.0 + s)
    delta = random_solenoidal(grid, seed)
    norm = sobolev_norm(delta, idx)
    delta = delta * (perturbation_size / norm) if perturbation_size else delta * 0.0
    w1 = FlowState(w0.w, w0.time)
    w2 = FlowState(w0.w + delta, w0.time)
    st1 = NSEStepper(grid, cfg)
    times, diffs, integ = [w0.time], [sobolev_norm(w2.w - w1.w, idx)], [0.0]
    hi_prev = sobolev_norm(w1.w, idx_hi) ** 2
    for i in range(cfg.n_steps):
        w1 = st1.step(w1)
        w2 = st1.step(w2)
        hi = sobolev_norm(w1.w, idx_hi) ** 2
        integ.append(integ[-1] + 0.5 * cfg.dt * (hi_prev + hi))
        hi_prev = hi
        times.append((i + 1) * cfg.dt)
        diffs.append(sobolev_norm(w2.w - w1.w, idx))
    times = np.array(times)
    diffs = np.array(diffs)
    integ = np.array(integ)
    d0 = diffs[0]
    c_fit = 0.0
    if d0 > 0:
        ok = integ > 0
        with np.errstate(divide="ignore"):
            rates = np.log(np.maximum(diffs[ok], 1e-300) / d0) / integ[ok]
        if rates.size:
            c_fit = max(0.0, float(np.max(rates)))
    envelope = d0 * np.exp(c_fit * integ)
    return GrowthReport(times, diffs, envelope, c_fit, integ, perturbation_size)


# -- canonical initial data ----------------------------------------------------


def taylor_green(grid: TorusGrid, amplitude: float = 1.0) -> SpectralField:
    x, y, z = grid.coordinates()
    scale = 2 * math.pi / grid.length
    x, y, z = scale * x, scale * y, scale * z
    u = amplitude * np.stack(
        [np.cos(x) * np.sin(y) * np.sin(z), -np.sin(x) * np.cos(y) * np.sin(z), np.zeros_like(x)]
    )
    return SpectralField.from_physical(grid, u, zero_mean=True, div_free=True)


def shear_mode(grid: TorusGrid, amplitude: float = 1.0) -> SpectralField:
    """(0, A cos x1, 0): a single solenoidal mode with no self-advection."""
    c = np.zeros((3,) + grid.shape, complex)
    c[1, 1, 0, 0] = 0.5 * amplitude
    c[1, -1, 0, 0] = 0.5 * amplitude
    return SpectralField(grid, c, zero_mean=True, div_free=True)
