"""Turn a RunConfig into model objects, execute runs and sweeps, persist results."""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import subprocess
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics, mhd, nse
from .config import RunConfig
from .filters import FilterParams
from .spectral import SobolevIndex, SpectralField, TorusGrid, load_snapshot, random_solenoidal, save_snapshot

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


def build_grid(cfg: RunConfig) -> TorusGrid:
    g = cfg.grid
    return TorusGrid(g.N, g.L, g.dealias_fraction)


def _ic_seed(cfg: RunConfig) -> int:
    ic = cfg.initial_condition
    return cfg.seed if ic.seed is None else ic.seed


def build_initial(cfg: RunConfig, grid: TorusGrid) -> tuple[SpectralField, ...]:
    """Velocity (NSE) or velocity and magnetic field (MHD) before truncation."""
    ic = cfg.initial_condition
    zero = SpectralField.zeros(grid)
    if ic.kind == "taylor-green":
        w = nse.taylor_green(grid, ic.amplitude)
        W = zero
    elif ic.kind == "shear-mode":
        w = nse.shear_mode(grid, ic.amplitude)
        W = zero
    elif ic.kind == "random-solenoidal":
        seed = _ic_seed(cfg)
        w = random_solenoidal(grid, seed, ic.slope, ic.amplitude)
        W = random_solenoidal(grid, seed + 1, ic.slope, ic.magnetic_amplitude) if cfg.model == "mhd" else zero
    elif ic.kind == "orszag-tang":
        w, W = mhd.orszag_tang(grid, ic.amplitude, ic.magnetic_amplitude)
    elif ic.kind == "file":
        if cfg.model == "mhd":
            w, _ = load_snapshot(f"{ic.path}_w", grid)
            W, _ = load_snapshot(f"{ic.path}_W", grid)
        else:
            w, _ = load_snapshot(ic.path, grid)
            W = zero
    else:  # pragma: no cover - guarded by the schema
        raise ValueError(ic.kind)
    return (w,) if cfg.model == "nse" else (w, W)


def build_forcing(cfg: RunConfig, grid: TorusGrid) -> SpectralField | None:
    """Steady solenoidal low-mode forcing A (sin y, sin z, sin x)."""
    f = cfg.forcing
    if f.kind == "none" or f.amplitude == 0:
        return None
    x, y, z = grid.coordinates() * (2 * math.pi / grid.length)
    vals = f.amplitude * np.stack([np.sin(y), np.sin(z), np.sin(x)])
    return SpectralField.from_physical(grid, vals, zero_mean=True, div_free=True)


def model_config(cfg: RunConfig, grid: TorusGrid, alpha: float | None = None):
    p = FilterParams(cfg.filter.alpha if alpha is None else alpha, cfg.filter.theta)
    t = cfg.time
    fi = cfg.initial_condition.filter_initial
    if cfg.model == "nse":
        return nse.NSEConfig(cfg.physics.nu, p, build_forcing(cfg, grid), t.dt, t.t_end, fi)
    return mhd.MHDConfig(cfg.physics.nu1, cfg.physics.nu2, p, t.dt, t.t_end, fi)


def version_stamp() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5,
        )
        rev = out.stdout.strip() if out.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+{rev}" if rev else __version__


def _manifest(command: str, cfg: RunConfig, **extra) -> dict:
    return {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "version": version_stamp(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.echo(),
        **extra,
    }


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


@dataclass
class RunResult:
    status: str
    final_time: float
    last_valid_time: float
    output_dir: Path
    max_budget_residual: float = math.nan
    message: str = ""
    files: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "completed"


NORM_INDICES = (SobolevIndex(0.0), SobolevIndex(1.0 / 6.0), SobolevIndex(1.0), SobolevIndex(7.0 / 6.0))


def execute_run(cfg: RunConfig, output_dir: str | Path | None = None) -> RunResult:
    """Run the configured model and write budget.csv, norms.csv, snapshots and manifest.json."""
    out = Path(output_dir if output_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"directory": str(out)})})
    start = time.perf_counter()
    grid = build_grid(cfg)
    initial = build_initial(cfg, grid)
    mcfg = model_config(cfg, grid)
    n_steps = mcfg.n_steps
    o = cfg.output

    if cfg.model == "nse":
        state = nse.initial_state(initial[0], mcfg)
        stepper = nse.NSEStepper(grid, mcfg)
    else:
        state = mhd.initial_mhd_state(initial[0], initial[1], mcfg)
        stepper = mhd.MHDStepper(grid, mcfg)

    series = diagnostics.NormSeries()
    terms: list[tuple] = []
    files: list[str] = []
    status, message = "completed", ""
    last_valid = 0.0

    def fields_of(st):
        return {"w": st.w} if cfg.model == "nse" else {"w": st.w, "W": st.W}

    def snapshot(st, i):
        for name, f in fields_of(st).items():
            stem = out / f"snapshot_{i:07d}_{name}"
            b, m = save_snapshot(stem, f, st.time, {"step": i, "field": name})
            files.extend([b.name, m.name])

    def record(st, i):
        if cfg.model == "nse":
            e, d, p, u = nse.energy_terms(st.w, mcfg.filter, mcfg.nu, mcfg.forcing)
            terms.append((i, st.time, e, d, p, u))
        else:
            ew, dw, pw, uw = nse.energy_terms(st.w, mcfg.filter, mcfg.nu1)
            eW, dW, _, uW = nse.energy_terms(st.W, mcfg.filter, mcfg.nu2)
            terms.append((i, st.time, ew + eW, dw + dW, pw, uw + uW, dw, dW))
        if i % o.norms_every == 0 or i == n_steps:
            series.record(st.time, fields_of(st), NORM_INDICES)
        if (o.snapshot_every and i % o.snapshot_every == 0) or i == n_steps:
            snapshot(st, i)

    record(state, 0)
    for i in range(1, n_steps + 1):
        try:
            state = stepper.step(state)
        except nse.BlowUpError as exc:
            status, message = "blow-up", str(exc)
            log.error("%s", exc)
            break
        state = replace(state, time=i * mcfg.dt)
        last_valid = state.time
        record(state, i)

    max_res = _write_budget(out / "budget.csv", terms, mcfg.dt, cfg.budget_rule, o.budget_every, cfg.model)
    series.write_csv(out / "norms.csv")
    files += ["budget.csv", "norms.csv"]
    result = RunResult(status, last_valid, last_valid, out, max_res, message, files)
    _write_json(
        out / "manifest.json",
        _manifest(
            "run",
            cfg,
            status=status,
            message=message,
            final_time=last_valid,
            last_valid_time=last_valid,
            steps_completed=len(terms) - 1,
            max_budget_residual=max_res,
            wall_time_s=time.perf_counter() - start,
            outputs=sorted(set(files)),
        ),
    )
    return result


def _write_budget(path: Path, terms, dt, rule, every, model) -> float:
    if not terms:
        return math.nan
    cols = list(zip(*terms))
    e = np.array(cols[2])
    net = nse.cumulative_integral(np.array(cols[3]) - np.array(cols[4]), dt, rule)
    res = np.abs(e - e[0] + net)
    header = ["step", "time", "model_energy", "dissipation_rate", "forcing_power", "budget_residual", "energy_unweighted"]
    if model == "mhd":
        header += ["dissipation_fluid", "dissipation_magnetic"]
    last = len(terms) - 1
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for j, row in enumerate(terms):
            if j % every and j != last:
                continue
            vals = [row[0], repr(row[1]), repr(row[2]), repr(row[3]), repr(row[4]), repr(float(res[j])), repr(row[5])]
            vals += [repr(v) for v in row[6:]]
            wr.writerow(vals)
    return float(res.max())


@dataclass
class SweepResult:
    records: list
    complete: bool
    monotone: dict
    slopes: dict
    output_dir: Path


def execute_sweep(cfg: RunConfig, output_dir: str | Path | None = None, workers: int = 1) -> SweepResult:
    """Reference alpha = 0 run plus one run per alpha; writes sweep.csv and manifest.json."""
    if cfg.sweep is None:
        raise ValueError("sweep command needs a 'sweep' section in the config")
    out = Path(output_dir if output_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"directory": str(out)})})
    start = time.perf_counter()
    grid = build_grid(cfg)
    initial = build_initial(cfg, grid)
    base = model_config(cfg, grid)
    alphas = cfg.sweep.alphas
    records, reference = diagnostics.alpha_sweep(
        cfg.model, initial, base, alphas, p_list=cfg.sweep.p_list, workers=workers
    )
    diagnostics.write_records_csv(records, out / "sweep.csv")

    def _snap(sub: str, end):
        d = out / sub
        d.mkdir(exist_ok=True)
        save_snapshot(d / "final_w", end.w, base.t_end)
        save_snapshot(d / "final_q", end.q, base.t_end)
        if end.W is not None:
            save_snapshot(d / "final_W", end.W, base.t_end)

    _snap("alpha_reference", reference)

    complete = not any(r.diverged for r in records)
    monotone = {"velocity": diagnostics.strictly_decreasing(r.error_L2 for r in records),
                "pressure": diagnostics.strictly_decreasing(r.pressure_L2 for r in records)}
    slopes = {}
    ok = [r for r in records if not r.diverged and r.error_L2 > 0]
    if len(ok) >= 2:
        slopes["velocity"] = diagnostics.loglog_slope([r.alpha for r in ok], [r.error_L2 for r in ok])
        slopes["pressure"] = diagnostics.loglog_slope([r.alpha for r in ok], [r.pressure_L2 for r in ok])
    if cfg.model == "mhd":
        monotone["magnetic"] = diagnostics.strictly_decreasing(r.magnetic_L2 for r in records)
        if len(ok) >= 2 and all(r.magnetic_L2 > 0 for r in ok):
            slopes["magnetic"] = diagnostics.loglog_slope([r.alpha for r in ok], [r.magnetic_L2 for r in ok])
    for name, mono in monotone.items():
        if not mono:
            log.warning("sweep finding: %s error is not strictly decreasing in alpha", name)
    _write_json(
        out / "manifest.json",
        _manifest(
            "sweep",
            cfg,
            status="completed" if complete else "partial",
            monotone=monotone,
            loglog_slopes=slopes,
            records=[r.as_row() for r in records],
            wall_time_s=time.perf_counter() - start,
        ),
    )
    return SweepResult(records, complete, monotone, slopes, out)
