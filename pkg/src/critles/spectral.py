"""Fourier infrastructure on the periodic 3-torus.

Fields are stored as full complex coefficient arrays ``c[..., i, j, l]`` in
numpy FFT index order, normalised so that the represented real field is

    f(x) = sum_k c(k) exp(i k.x)

i.e. the forward transform divides by N^3. Wavevectors are k = (2 pi / L) n
with integer n in [-N/2 + 1, N/2] on each axis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.fft

__all__ = [
    "TorusGrid",
    "SpectralField",
    "SobolevIndex",
    "make_grid",
    "to_spectral",
    "to_physical",
    "symmetrize",
    "conjugate_asymmetry",
    "stable_sum",
    "sobolev_norm",
    "inner",
    "leray_project",
    "derivative",
    "divergence",
    "tensor_divergence",
    "dealiased_product",
    "divergence_residual",
    "random_solenoidal",
    "save_snapshot",
    "load_snapshot",
]

_SPATIAL = (-3, -2, -1)


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """Wavevector lattice and 2/3-rule mask for an N^3 periodic box."""

    n: int
    length: float = 2 * math.pi
    dealias_fraction: float = 2.0 / 3.0
    workers: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError(f"resolution must be an even integer >= 4, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"period must be positive, got {self.length}")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}")

        n = self.n
        idx = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        idx[n // 2] = n // 2  # lattice runs over [-N/2+1, N/2]
        scale = 2 * math.pi / self.length
        k1 = idx * scale
        # odd operators see k=0 at the Nyquist index so that real fields stay real
        k1_odd = k1.copy()
        k1_odd[n // 2] = 0.0

        cutoff = math.floor(self.dealias_fraction * n / 2 + 1e-12)
        keep1 = np.abs(idx) <= cutoff

        kx, ky, kz = np.meshgrid(k1, k1, k1, indexing="ij")
        ox, oy, oz = np.meshgrid(k1_odd, k1_odd, k1_odd, indexing="ij")
        object.__setattr__(self, "index_1d", idx)
        object.__setattr__(self, "cutoff", cutoff)
        object.__setattr__(self, "k_sq", kx**2 + ky**2 + kz**2)
        object.__setattr__(self, "k_vec", np.stack([ox, oy, oz]))
        kv_sq = ox**2 + oy**2 + oz**2
        object.__setattr__(self, "k_vec_sq_safe", np.where(kv_sq == 0, 1.0, kv_sq))
        object.__setattr__(
            self, "mask", keep1[:, None, None] & keep1[None, :, None] & keep1[None, None, :]
        )
        h = n // 2 + 1
        object.__setattr__(self, "k_sq_h", self.k_sq[..., :h].copy())
        object.__setattr__(self, "k_vec_h", self.k_vec[..., :h].copy())
        object.__setattr__(self, "k_vec_sq_safe_h", self.k_vec_sq_safe[..., :h].copy())
        object.__setattr__(self, "mask_h", self.mask[..., :h].copy())
        mult = np.full(h, 2.0)
        mult[0] = mult[n // 2] = 1.0
        # each half-spectrum entry stands for this many full-lattice modes
        object.__setattr__(self, "multiplicity_h", np.broadcast_to(mult, self.shape[:2] + (h,)).copy())
        for name in (
            "k_sq", "k_vec", "k_vec_sq_safe", "mask", "index_1d",
            "k_sq_h", "k_vec_h", "k_vec_sq_safe_h", "mask_h", "multiplicity_h",
        ):
            getattr(self, name).flags.writeable = False

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def volume(self) -> float:
        return self.length**3

    def coordinates(self) -> np.ndarray:
        """Physical grid points, shape (3, N, N, N)."""
        x = np.arange(self.n) * (self.length / self.n)
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    def same_as(self, other: "TorusGrid") -> bool:
        return (
            self is other
            or (self.n, self.length, self.dealias_fraction)
            == (other.n, other.length, other.dealias_fraction)
        )

    def metadata(self) -> dict:
        return {"N_g": self.n, "L": self.length, "dealias_fraction": self.dealias_fraction}


def make_grid(n: int, length: float = 2 * math.pi, dealias_fraction: float = 2.0 / 3.0) -> TorusGrid:
    return TorusGrid(n, length, dealias_fraction)


@dataclass(frozen=True)
class SobolevIndex:
    s: float
    homogeneous: bool = False

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ValueError("Sobolev exponent must be finite")

    def weight(self, k_sq: np.ndarray) -> np.ndarray:
        if self.s == 0:
            if self.homogeneous:
                return np.where(k_sq == 0, 0.0, 1.0)
            return np.ones_like(k_sq)
        base = k_sq if self.homogeneous else 1.0 + k_sq
        return np.where(base == 0, 0.0, base ** np.where(base == 0, 1.0, self.s))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable Fourier coefficients of a real scalar, vector or tensor field.

    ``coeffs`` has shape ``components + (N, N, N)`` where ``components`` is
    ``()``, ``(3,)`` or ``(3, 3)``.
    """

    grid: TorusGrid
    coeffs: np.ndarray
    zero_mean: bool = False
    div_free: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape[-3:] != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        if c.shape[:-3] not in ((), (3,), (3, 3)):
            raise ValueError(f"unsupported component shape {c.shape[:-3]}")
        if c is self.coeffs and c.flags.writeable:
            c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def components(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-3]

    def with_coeffs(self, coeffs: np.ndarray, **flags) -> "SpectralField":
        return replace(self, coeffs=coeffs, **flags)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_grid(self, other)
        return SpectralField(
            self.grid,
            self.coeffs + other.coeffs,
            self.zero_mean and other.zero_mean,
            self.div_free and other.div_free,
        )

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_grid(self, other)
        return SpectralField(
            self.grid,
            self.coeffs - other.coeffs,
            self.zero_mean and other.zero_mean,
            self.div_free and other.div_free,
        )

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(-self.coeffs)

    def max_amplitude(self) -> float:
        return float(np.max(np.abs(self.coeffs), initial=0.0))

    def physical(self) -> np.ndarray:
        return to_physical(self.coeffs, self.grid)

    @classmethod
    def from_physical(cls, grid: TorusGrid, values: np.ndarray, **flags) -> "SpectralField":
        return cls(grid, to_spectral(np.asarray(values, dtype=float), grid), **flags)

    @classmethod
    def zeros(cls, grid: TorusGrid, components: tuple[int, ...] = (3,)) -> "SpectralField":
        return cls(grid, np.zeros(components + grid.shape, complex), zero_mean=True, div_free=components == (3,))


def _check_grid(a: SpectralField, b: SpectralField) -> None:
    if not a.grid.same_as(b.grid):
        raise ValueError("fields live on different grids")


def reflect(c: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Coefficients at -k, c[..., -i, -j, -l]."""
    return np.roll(np.flip(c, axis=_SPATIAL), 1, axis=_SPATIAL)


def symmetrize(c: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Project onto conjugate-symmetric coefficients (the real part of the field)."""
    return 0.5 * (c + np.conj(reflect(c, grid)))


def conjugate_asymmetry(c: np.ndarray, grid: TorusGrid) -> float:
    """max |c(-k) - conj c(k)| relative to max |c|."""
    scale = float(np.max(np.abs(c), initial=0.0))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(reflect(c, grid) - np.conj(c)))) / scale


def half(c: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """The non-redundant half spectrum (last axis 0..N/2)."""
    return c[..., : grid.n // 2 + 1]


def fix_planes(hc: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Make the self-conjugate planes l = 0 and l = N/2 exactly Hermitian (in place)."""
    for p in (0, grid.n // 2):
        plane = hc[..., p]
        hc[..., p] = 0.5 * (plane + np.conj(np.roll(np.flip(plane, axis=(-2, -1)), 1, axis=(-2, -1))))
    return hc


def expand(hc: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Full coefficient array from a half spectrum with Hermitian end planes."""
    n = grid.n
    h = n // 2 + 1
    full = np.empty(hc.shape[:-1] + (n,), dtype=np.complex128)
    full[..., :h] = hc
    inner_cols = hc[..., 1 : n // 2]
    mirrored = np.roll(np.flip(inner_cols, axis=(-3, -2)), 1, axis=(-3, -2))
    full[..., h:] = np.conj(mirrored[..., ::-1])
    return full


def rfft_half(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    hc = scipy.fft.rfftn(values, axes=_SPATIAL, norm="forward", workers=grid.workers)
    return fix_planes(hc, grid)


def irfft_half(hc: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return scipy.fft.irfftn(hc, s=grid.shape, axes=_SPATIAL, norm="forward", workers=grid.workers)


def to_spectral(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return expand(rfft_half(values, grid), grid)


def to_physical(c: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return irfft_half(half(c, grid), grid)


def stable_sum(x: np.ndarray) -> float:
    """Deterministic compensated reduction: pairwise rows, then exact fsum."""
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim == 0:
        return float(x)
    rows = x.reshape(-1, x.shape[-1]).sum(axis=1)
    return math.fsum(rows)


def sobolev_norm(f: SpectralField, idx: SobolevIndex = SobolevIndex(0.0)) -> float:
    """Continuum W^{s,2} norm of the represented field (sum over components)."""
    w = idx.weight(f.grid.k_sq)
    dens = np.abs(f.coeffs) ** 2 * w
    return math.sqrt(f.grid.volume * stable_sum(dens))


def inner(f: SpectralField, g: SpectralField) -> float:
    """L^2 inner product of two real fields of equal shape."""
    _check_grid(f, g)
    prod = (f.coeffs * np.conj(g.coeffs)).real
    return f.grid.volume * stable_sum(prod)


def leray_project(v: SpectralField) -> SpectralField:
    c = _project(v.coeffs, v.grid)
    return v.with_coeffs(c, div_free=True)


def _project(c: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return project_with(c, grid.k_vec, grid.k_vec_sq_safe)


def dot(k: np.ndarray, c: np.ndarray) -> np.ndarray:
    return k[0] * c[0] + k[1] * c[1] + k[2] * c[2]


def project_with(c: np.ndarray, k: np.ndarray, k_sq_safe: np.ndarray) -> np.ndarray:
    """Remove the k-parallel part of each mode; k = 0 is left alone."""
    return c - k * (dot(k, c) / k_sq_safe)


def derivative(f: SpectralField, direction: int) -> SpectralField:
    if direction not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {direction}")
    c = 1j * f.grid.k_vec[direction] * f.coeffs
    return f.with_coeffs(c, zero_mean=True)


def divergence(v: SpectralField) -> SpectralField:
    if v.components != (3,):
        raise ValueError("divergence needs a vector field")
    c = 1j * dot(v.grid.k_vec, v.coeffs)
    return SpectralField(v.grid, c, zero_mean=True)


def tensor_divergence(t: SpectralField) -> SpectralField:
    """(div T)_i = d_j T_{j i}, so div(a (x) b) = (a.grad) b for solenoidal a."""
    if t.components != (3, 3):
        raise ValueError("tensor_divergence needs a 3x3 tensor field")
    return SpectralField(t.grid, tensor_div_with(t.coeffs, t.grid.k_vec), zero_mean=True)


def tensor_div_with(t: np.ndarray, k: np.ndarray) -> np.ndarray:
    return 1j * (k[0] * t[0] + k[1] * t[1] + k[2] * t[2])


def dealiased_product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Truncated convolution of two real fields.

    Vector x vector gives the tensor ``T[p, q] = a_p b_q``; a scalar factor
    multiplies every component of the other.
    """
    _check_grid(a, b)
    grid = a.grid
    m = grid.mask_h
    pa = irfft_half(np.where(m, half(a.coeffs, grid), 0), grid)
    pb = pa if b is a else irfft_half(np.where(m, half(b.coeffs, grid), 0), grid)
    if a.components == (3,) and b.components == (3,):
        if b is a:
            prod = _symmetric_outer(pa)
        else:
            prod = pa[:, None] * pb[None, :]
    elif a.components == ():
        prod = pa * pb
    elif b.components == ():
        prod = pa * pb
    else:
        raise ValueError(f"unsupported product {a.components} x {b.components}")
    hc = rfft_half(prod, grid)
    return SpectralField(grid, expand(np.where(m, hc, 0), grid))


def _symmetric_outer(p: np.ndarray) -> np.ndarray:
    out = np.empty((3, 3) + p.shape[1:])
    for i in range(3):
        for j in range(i, 3):
            out[i, j] = p[i] * p[j]
            out[j, i] = out[i, j]
    return out


def divergence_residual(v: SpectralField) -> float:
    """max |k . v(k)| relative to the field's max amplitude."""
    scale = v.max_amplitude()
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(dot(v.grid.k_vec, v.coeffs)))) / scale


def random_solenoidal(
    grid: TorusGrid,
    seed: int,
    slope: float = -5.0 / 3.0,
    amplitude: float = 1.0,
    kmax: float | None = None,
) -> SpectralField:
    """Seeded random divergence-free, zero-mean field inside the dealias mask.

    Mode amplitudes follow |k|^(slope/2 - 1) so the shell spectrum goes
    like |k|^slope; the result is rescaled to unit L^2 norm times
    ``amplitude``. Uses the counter-based Philox generator.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    shape = (3,) + grid.shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k_sq = grid.k_sq
    with np.errstate(divide="ignore"):
        env = np.where(k_sq > 0, np.sqrt(k_sq) ** (slope / 2.0 - 1.0), 0.0)
    keep = grid.mask & (k_sq > 0)
    if kmax is not None:
        keep &= k_sq <= kmax**2
    c = np.where(keep, raw * env, 0)
    c = _project(symmetrize(c, grid), grid)
    c = np.where(keep, c, 0)
    f = SpectralField(grid, c, zero_mean=True, div_free=True)
    norm = sobolev_norm(f)
    if norm == 0:
        return f
    return f * (amplitude / norm)


def _lexicographic_order(grid: TorusGrid) -> np.ndarray:
    """Array positions sorted by wavevector integer n, ascending per axis."""
    return np.argsort(grid.index_1d, kind="stable")


def save_snapshot(path: str | Path, f: SpectralField, time: float = 0.0, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (little-endian complex128) and ``<path>.json``."""
    path = Path(path)
    o = _lexicographic_order(f.grid)
    c = f.coeffs[..., o, :, :][..., :, o, :][..., :, :, o]
    bin_path = path.with_suffix(".bin")
    meta_path = path.with_suffix(".json")
    np.ascontiguousarray(c).astype("<c16").tofile(bin_path)
    meta = {
        **f.grid.metadata(),
        "components": list(f.components),
        "zero_mean": f.zero_mean,
        "div_free": f.div_free,
        "time": time,
        "dtype": "<c16",
        "order": "component-major, then n1, n2, n3 ascending in [-N/2+1, N/2]",
    }
    if extra:
        meta.update(extra)
    meta_path.write_text(json.dumps(meta, indent=2))
    return bin_path, meta_path


def load_snapshot(path: str | Path, grid: TorusGrid | None = None) -> tuple[SpectralField, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if grid is None:
        grid = TorusGrid(meta["N_g"], meta["L"], meta["dealias_fraction"])
    elif (grid.n, grid.length, grid.dealias_fraction) != (meta["N_g"], meta["L"], meta["dealias_fraction"]):
        raise ValueError(f"snapshot grid {meta} does not match requested grid")
    comps = tuple(meta["components"])
    raw = np.fromfile(path.with_suffix(".bin"), dtype="<c16").reshape(comps + grid.shape)
    o = _lexicographic_order(grid)
    inv = np.argsort(o)
    c = raw[..., inv, :, :][..., :, inv, :][..., :, :, inv]
    return SpectralField(grid, c, zero_mean=meta["zero_mean"], div_free=meta["div_free"]), meta
