"""Slow reference implementations used as test oracles.

Everything here works mode by mode on integer wavevectors with plain
Python loops; no FFTs, so agreement with the solver is a real check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def retained_modes(grid):
    """(integer n, array position) for every wavevector inside the dealias mask."""
    idx = grid.index_1d
    out = []
    for i, j, l in itertools.product(range(grid.n), repeat=3):
        if grid.mask[i, j, l]:
            out.append(((int(idx[i]), int(idx[j]), int(idx[l])), (i, j, l)))
    return out


def position(grid, n):
    """Array position of integer wavevector n, or None when off the lattice."""
    half = grid.n // 2
    pos = []
    for c in n:
        if not -half < c <= half:
            return None
        pos.append(c % grid.n)
    return tuple(pos)


def convolve_outer(a: np.ndarray, b: np.ndarray, grid) -> np.ndarray:
    """T[p, q](k) = sum_{m + n = k} a_p(m) b_q(n) over retained m, n; result masked."""
    modes = retained_modes(grid)
    out = np.zeros((3, 3) + grid.shape, complex)
    for (m, pm), (n, pn) in itertools.product(modes, modes):
        k = tuple(x + y for x, y in zip(m, n))
        pk = position(grid, k)
        if pk is None or not grid.mask[pk]:
            continue
        for p in range(3):
            for q in range(3):
                out[(p, q) + pk] += a[(p,) + pm] * b[(q,) + pn]
    return out


def _k(grid, pos):
    scale = 2 * math.pi / grid.length
    return np.array([grid.index_1d[i] * scale for i in pos], dtype=float)


def filter_symbol(k, alpha, theta):
    ksq = float(k @ k)
    if alpha == 0 or ksq == 0:
        return 1.0
    return 1.0 / (1.0 + alpha ** (2 * theta) * ksq**theta)


def div_project(t: np.ndarray, grid, alpha, theta) -> np.ndarray:
    """Leray projection of div(filter(T)) with (div T)_q = sum_p i k_p T_pq."""
    out = np.zeros((3,) + grid.shape, complex)
    for _, pos in retained_modes(grid):
        k = _k(grid, pos)
        ksq = float(k @ k)
        if ksq == 0:
            continue
        m = filter_symbol(k, alpha, theta)
        d = np.array([sum(1j * k[p] * m * t[(p, q) + pos] for p in range(3)) for q in range(3)])
        d = d - k * (k @ d) / ksq
        out[(slice(None),) + pos] = d
    return out


def nse_nonlinear(c: np.ndarray, grid, alpha, theta) -> np.ndarray:
    a = np.where(grid.mask, c, 0)
    return -div_project(convolve_outer(a, a, grid), grid, alpha, theta)


def mhd_nonlinear(cw: np.ndarray, cB: np.ndarray, grid, alpha, theta) -> tuple[np.ndarray, np.ndarray]:
    w = np.where(grid.mask, cw, 0)
    B = np.where(grid.mask, cB, 0)
    dw = -div_project(convolve_outer(w, w, grid), grid, alpha, theta) + div_project(
        convolve_outer(B, B, grid), grid, alpha, theta
    )
    dB = -div_project(convolve_outer(w, B, grid), grid, alpha, theta) + div_project(
        convolve_outer(B, w, grid), grid, alpha, theta
    )
    return dw, dB


def quadrature_l2_sq(values: np.ndarray, length: float) -> float:
    """Midpoint-free uniform-grid quadrature of sum_i |f_i|^2 over the box."""
    n = values.shape[-1]
    return float(np.sum(values**2)) * (length / n) ** 3
