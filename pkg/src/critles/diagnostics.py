"""Spectra, norm time series and the alpha -> 0 comparison machinery."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .filters import FilterParams
from .spectral import SobolevIndex, SpectralField, sobolev_norm, stable_sum

log = logging.getLogger(__name__)


def shell_spectrum(f: SpectralField) -> np.ndarray:
    """Energy per unit-width wavenumber shell, E[j] = 1/2 sum_{j-1/2 <= |n| < j+1/2} |f(k)|^2 L^3.

    Shells are indexed by |n| = |k| L / (2 pi), so the entries sum to
    1/2 ||f||_2^2.
    """
    grid = f.grid
    n_mag = np.sqrt(grid.k_sq) * grid.length / (2 * math.pi)
    shell = np.floor(n_mag + 0.5).astype(int)
    dens = np.abs(f.coeffs) ** 2
    if dens.ndim > 3:
        dens = dens.reshape(-1, *grid.shape).sum(axis=0)
    out = np.zeros(int(shell.max()) + 1)
    for j in range(out.size):
        sel = shell == j
        if sel.any():
            out[j] = 0.5 * grid.volume * stable_sum(dens[sel])
    return out


def difference_norms(a: SpectralField, b: SpectralField, p_list: Sequence[float] = (2.0, 3.0)) -> dict[str, float]:
    """L^2 distance (spectral) plus L^p distances by grid quadrature.

    Keys are ``"L2"`` and ``"L<p>"`` for each p (``"L2"`` from the list is
    the spectral value).
    """
    if not a.grid.same_as(b.grid):
        raise ValueError("fields live on different grids")
    if a.components != b.components:
        raise ValueError("fields have different component shapes")
    diff = a - b
    out = {"L2": sobolev_norm(diff, SobolevIndex(0.0))}
    grid = a.grid
    cell = (grid.length / grid.n) ** 3
    mag = None
    for p in p_list:
        if p < 1:
            raise ValueError(f"L^p needs p >= 1, got {p}")
        key = f"L{p:g}"
        if key in out:
            continue
        if mag is None:
            phys = diff.physical()
            mag = np.abs(phys) if phys.ndim == 3 else np.sqrt(np.sum(phys.reshape(-1, *grid.shape) ** 2, axis=0))
        out[key] = (cell * stable_sum(mag**p)) ** (1.0 / p)
    return out


@dataclass
class NormSeries:
    times: list[float] = field(default_factory=list)
    values: dict[str, list[float]] = field(default_factory=dict)

    def record(self, t: float, fields: dict[str, SpectralField], indices: Sequence[SobolevIndex]) -> None:
        self.times.append(t)
        for name, f in fields.items():
            for idx in indices:
                key = f"{name}:{'hom' if idx.homogeneous else 'full'}:{idx.s:g}"
                self.values.setdefault(key, []).append(sobolev_norm(f, idx))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["time", "field", "weight", "s", "value"])
            for key, vals in self.values.items():
                name, weight, s = key.split(":")
                for t, v in zip(self.times, vals):
                    wr.writerow([repr(t), name, weight, s, repr(v)])


# -- alpha sweep ---------------------------------------------------------------


@dataclass
class ConvergenceRecord:
    alpha: float
    error_L2: float
    error_Lp: dict[str, float]
    pressure_L2: float
    pressure_Lp: dict[str, float]
    magnetic_L2: float | None = None
    magnetic_Lp: dict[str, float] | None = None
    runtime_s: float = 0.0
    diverged: bool = False
    message: str = ""

    def as_row(self) -> dict:
        row = {"alpha": self.alpha, "error_L2": self.error_L2}
        row.update({f"error_{k}": v for k, v in self.error_Lp.items()})
        row["pressure_L2"] = self.pressure_L2
        row.update({f"pressure_{k}": v for k, v in self.pressure_Lp.items()})
        if self.magnetic_L2 is not None:
            row["magnetic_L2"] = self.magnetic_L2
            row.update({f"magnetic_{k}": v for k, v in (self.magnetic_Lp or {}).items()})
        row["diverged"] = int(self.diverged)
        return row


@dataclass
class Endpoint:
    """Final fields of one run: velocity, pressure and (MHD) magnetic field."""

    w: SpectralField | None
    q: SpectralField | None
    W: SpectralField | None = None
    runtime_s: float = 0.0
    error: str = ""


def run_endpoint(model: str, initial: tuple[SpectralField, ...], cfg) -> Endpoint:
    """Integrate to t_end and return the final fields; blow-up is reported, not raised."""
    from . import mhd, nse

    start = time.perf_counter()
    try:
        if model == "nse":
            st = nse.initial_state(initial[0], cfg)
            stepper = nse.NSEStepper(st.w.grid, cfg)
            for _ in range(cfg.n_steps):
                st = stepper.step(st)
            q = nse.pressure_solve(st.w, cfg.filter)
            return Endpoint(st.w, q, None, time.perf_counter() - start)
        if model == "mhd":
            st = mhd.initial_mhd_state(initial[0], initial[1], cfg)
            stepper = mhd.MHDStepper(st.w.grid, cfg)
            for _ in range(cfg.n_steps):
                st = stepper.step(st)
            q = mhd.mhd_pressure(st, cfg.filter)
            return Endpoint(st.w, q, st.W, time.perf_counter() - start)
    except Exception as exc:  # blow-up or numerical failure: flag and carry on
        from .nse import BlowUpError

        if not isinstance(exc, (BlowUpError, FloatingPointError, OverflowError)):
            raise
        return Endpoint(None, None, None, time.perf_counter() - start, str(exc))
    raise ValueError(f"unknown model {model!r}")


def _with_alpha(cfg, alpha: float):
    from dataclasses import replace

    return replace(cfg, filter=FilterParams(alpha, cfg.filter.theta))


def _sweep_member(args):
    model, initial, cfg, alpha = args
    return run_endpoint(model, initial, _with_alpha(cfg, alpha))


def alpha_sweep(
    model: str,
    initial: tuple[SpectralField, ...],
    base_cfg,
    alphas: Sequence[float],
    reference: Endpoint | None = None,
    p_list: Sequence[float] = (2.0, 3.0),
    workers: int = 1,
) -> tuple[list[ConvergenceRecord], Endpoint]:
    """Run the model per alpha and measure the final-time distance to the alpha = 0 run.

    Returns the records (in the order of ``alphas``) and the reference
    endpoint, computed here when not supplied.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("empty alpha list")
    if any(a <= 0 for a in alphas):
        raise ValueError("alphas must all be positive; the alpha = 0 run is the reference")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError(f"alphas must be strictly decreasing, got {alphas}")

    jobs = [(model, initial, base_cfg, a) for a in alphas]
    if reference is None:
        jobs.insert(0, (model, initial, base_cfg, 0.0))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            ends = list(pool.map(_sweep_member, jobs))
    else:
        ends = [_sweep_member(j) for j in jobs]
    if reference is None:
        reference, ends = ends[0], ends[1:]
    if reference.w is None:
        raise RuntimeError(f"reference run failed: {reference.error}")

    records = []
    for a, end in zip(alphas, ends):
        if end.w is None:
            nan = {f"L{p:g}": math.nan for p in p_list}
            records.append(
                ConvergenceRecord(a, math.nan, nan, math.nan, dict(nan), runtime_s=end.runtime_s, diverged=True, message=end.error)
            )
            log.warning("alpha=%g diverged: %s", a, end.error)
            continue
        ev = difference_norms(end.w, reference.w, p_list)
        eq = difference_norms(end.q, reference.q, p_list)
        rec = ConvergenceRecord(
            a,
            ev["L2"],
            {k: v for k, v in ev.items() if k != "L2" or 2.0 in p_list},
            eq["L2"],
            {k: v for k, v in eq.items() if k != "L2" or 2.0 in p_list},
            runtime_s=end.runtime_s,
        )
        if end.W is not None:
            eb = difference_norms(end.W, reference.W, p_list)
            rec.magnetic_L2 = eb["L2"]
            rec.magnetic_Lp = {k: v for k, v in eb.items() if k != "L2" or 2.0 in p_list}
        records.append(rec)
    return records, reference


def strictly_decreasing(values: Iterable[float]) -> bool:
    v = list(values)
    return all(math.isfinite(x) for x in v) and all(b < a for a, b in zip(v, v[1:]))


def loglog_slope(alphas: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(alpha)."""
    a = np.log(np.asarray(alphas, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(a, e, 1)[0])


def write_records_csv(records: Sequence[ConvergenceRecord], path: str | Path) -> None:
    rows = [r.as_row() for r in records]
    keys: list[str] = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=keys)
        wr.writeheader()
        for r in rows:
            wr.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
