"""JSON run configuration with strict parsing.

Unknown keys and out-of-range values are rejected before any compute.
A minimal NSE config::

    {
      "model": "nse",
      "grid": {"N": 32},
      "filter": {"alpha": 0.1, "theta": 0.16666666666666666},
      "physics": {"nu": 0.1},
      "time": {"dt": 0.001, "t_end": 1.0},
      "initial_condition": "taylor-green"
    }

``initial_condition`` is either a string (``taylor-green``, ``shear-mode``,
``orszag-tang``, ``random-solenoidal``, ``file:<path>``) or an object with
``kind`` plus options. A sweep config adds ``"sweep": {"alphas": [...]}``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

__all__ = ["RunConfig", "ConfigError", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    N: int = Field(32, description="modes per axis")
    L: float = Field(2 * math.pi, gt=0)
    dealias_fraction: float = Field(2.0 / 3.0, gt=0, le=1)

    @field_validator("N")
    @classmethod
    def _even(cls, v: int) -> int:
        if v < 4 or v % 2:
            raise ValueError(f"N must be an even integer >= 4, got {v}")
        return v


class FilterSpec(_Strict):
    alpha: float = Field(0.0, ge=0)
    theta: float = Field(1.0 / 6.0, gt=0)


class PhysicsSpec(_Strict):
    nu: Optional[float] = Field(None, gt=0)
    nu1: Optional[float] = Field(None, gt=0)
    nu2: Optional[float] = Field(None, gt=0)


class TimeSpec(_Strict):
    dt: float = Field(1e-3, gt=0)
    t_end: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _whole_steps(self):
        n = self.t_end / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"t_end/dt = {n} is not a whole number of steps")
        return self


ICKind = Literal["taylor-green", "shear-mode", "orszag-tang", "random-solenoidal", "file"]


class InitialCondition(_Strict):
    kind: ICKind = "taylor-green"
    amplitude: float = 1.0
    magnetic_amplitude: float = 1.0
    seed: Optional[int] = Field(None, ge=0)
    slope: float = -5.0 / 3.0
    path: Optional[str] = None
    filter_initial: bool = False

    @model_validator(mode="after")
    def _path_for_file(self):
        if self.kind == "file" and not self.path:
            raise ValueError("initial_condition kind 'file' needs a path")
        return self


class ForcingSpec(_Strict):
    kind: Literal["none", "low-mode"] = "none"
    amplitude: float = 0.0


class OutputSpec(_Strict):
    directory: str = "output"
    snapshot_every: int = Field(0, ge=0)
    budget_every: int = Field(1, ge=1)
    norms_every: int = Field(1, ge=1)


class SweepSpec(_Strict):
    alphas: list[float]
    p_list: list[float] = Field(default_factory=lambda: [2.0, 3.0])

    @field_validator("alphas")
    @classmethod
    def _descending(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("alphas must be non-empty")
        if any(a <= 0 for a in v):
            raise ValueError("alphas must be positive (alpha = 0 is the reference run)")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError(f"alphas must be strictly decreasing, got {v}")
        return v

    @field_validator("p_list")
    @classmethod
    def _p_ok(cls, v: list[float]) -> list[float]:
        if any(p < 1 for p in v):
            raise ValueError("p_list entries must be >= 1")
        return v


class RunConfig(_Strict):
    model: Literal["nse", "mhd"]
    grid: GridSpec = GridSpec()
    filter: FilterSpec = FilterSpec()
    physics: PhysicsSpec
    time: TimeSpec = TimeSpec()
    initial_condition: InitialCondition = InitialCondition()
    forcing: ForcingSpec = ForcingSpec()
    output: OutputSpec = OutputSpec()
    seed: int = Field(0, ge=0, lt=2**64)
    budget_rule: Literal["simpson", "trapezoid"] = "simpson"
    sweep: Optional[SweepSpec] = None

    @field_validator("initial_condition", mode="before")
    @classmethod
    def _ic_string(cls, v):
        if isinstance(v, str):
            if v.startswith("file:"):
                return {"kind": "file", "path": v[len("file:") :]}
            return {"kind": v}
        return v

    @field_validator("forcing", mode="before")
    @classmethod
    def _forcing_string(cls, v):
        if isinstance(v, str):
            return {"kind": v}
        return v

    @model_validator(mode="after")
    def _physics_matches_model(self):
        p = self.physics
        if self.model == "nse":
            if p.nu is None or p.nu1 is not None or p.nu2 is not None:
                raise ValueError("nse model needs physics.nu (and not nu1/nu2)")
        else:
            if p.nu1 is None or p.nu2 is None or p.nu is not None:
                raise ValueError("mhd model needs physics.nu1 and physics.nu2 (and not nu)")
            if self.forcing.kind != "none":
                raise ValueError("the MHD model is unforced")
        if self.initial_condition.kind == "orszag-tang" and self.model != "mhd":
            raise ValueError("orszag-tang initial data needs model 'mhd'")
        return self

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def _format_errors(err: ValidationError, source: str) -> str:
    lines = [f"invalid config {source}:"]
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict, source: str = "<dict>") -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err, source)) from None


def load_config(path: str | Path) -> RunConfig:
    """Read a config file, or a run manifest (its ``config`` entry is used)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if isinstance(data, dict) and "manifest_version" in data:
        data = data["config"]
    return parse_config(data, str(path))
