"""Short-time Fourier transform and modulation-space norms.

The STFT is V_g f(x, xi) = (f, M_xi T_x g), evaluated at every pair of
spatial and frequency lattice points. Mixed norms integrate over x first
and over xi second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import (
    Grid,
    GridMismatchError,
    PreconditionError,
    SampledSignal,
    compensated_sum,
    dft_array,
    idft_array,
    lp_norm,
)
from .indices import ExponentPair

__all__ = [
    "Window",
    "StftField",
    "BandNorm",
    "gaussian_window",
    "bump_window",
    "stft",
    "mixed_lpq_norm",
    "modulation_norm",
    "band_norm",
    "covering_minimum",
]


@dataclass(frozen=True)
class Window:
    signal: SampledSignal
    label: str
    normalization: float

    def __post_init__(self):
        if self.label not in ("gaussian", "bump"):
            raise PreconditionError(f"unknown window label {self.label!r}")
        if not np.any(self.signal.values):
            raise PreconditionError("window must be nonzero")

    @property
    def grid(self) -> Grid:
        return self.signal.grid


def gaussian_window(grid: Grid, width: float = 1.0, normalize: bool = True) -> Window:
    """exp(-|x|^2 / (2 width^2)), L^2-normalized unless ``normalize=False``."""
    r2 = sum(c**2 for c in grid.x_mesh())
    g = SampledSignal(grid, np.exp(-r2 / (2 * width**2)))
    return _finish(g, "gaussian", normalize)


def bump_window(grid: Grid, radius: float = 3.0, normalize: bool = True) -> Window:
    """Compactly supported C^inf bump exp(-1/(1 - |x/radius|^2))."""
    if radius >= grid.L:
        raise PreconditionError("bump radius must fit inside the box")
    r2 = sum(c**2 for c in grid.x_mesh()) / radius**2
    vals = np.zeros(grid.shape)
    inside = r2 < 1
    vals[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return _finish(SampledSignal(grid, vals), "bump", normalize)


def _finish(g: SampledSignal, label: str, normalize: bool) -> Window:
    nrm = lp_norm(g, 2)
    if normalize:
        g = g.with_values(g.values / nrm)
        nrm = 1.0
    return Window(g, label, nrm)


@dataclass(frozen=True)
class StftField:
    """V_g f on the (position x frequency) lattice, shape (N^n, N^n)."""

    grid: Grid
    values: np.ndarray
    window_label: str

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


def _check_pair(f: SampledSignal, g: Window):
    if f.grid != g.grid:
        raise GridMismatchError("signal and window live on different grids")
    if f.domain != "space":
        raise GridMismatchError("stft expects a space-domain signal")


def _stft_rows(f: SampledSignal, g: Window, positions: np.ndarray, chunk: int = 64):
    """Yield (position indices, STFT rows) in chunks; one FFT per position."""
    grid = f.grid
    N, n = grid.N, grid.n
    gconj = np.conj(g.signal.values)
    half = N // 2
    for start in range(0, len(positions), chunk):
        pos = positions[start : start + chunk]
        multi = np.array(np.unravel_index(pos, grid.shape)).T  # (chunk, n)
        block = np.empty((len(pos),) + grid.shape, dtype=complex)
        for r, idx in enumerate(multi):
            # g(t - x_a) sits at index t - a + N/2 along each axis
            block[r] = np.roll(gconj, tuple(int(i) - half for i in idx), axis=tuple(range(n)))
        block *= f.values
        yield pos, dft_array(grid, block).reshape(len(pos), -1)


def stft(f: SampledSignal, g: Window) -> StftField:
    _check_pair(f, g)
    grid = f.grid
    out = np.empty((grid.size, grid.size), dtype=complex)
    for pos, rows in _stft_rows(f, g, np.arange(grid.size)):
        out[pos] = rows
    return StftField(grid, out, g.label)


def _outer(inner: np.ndarray, q: float, weight: float) -> float:
    if math.isinf(q):
        return float(inner.max()) if inner.size else 0.0
    return (compensated_sum(inner**q) * weight) ** (1.0 / q)


def _pq(e: ExponentPair) -> tuple[float, float]:
    return e.p, e.q


def mixed_lpq_norm(F: StftField, e: ExponentPair) -> float:
    """(int (int |F(x, xi)|^p dx)^{q/p} dxi)^{1/q} as Riemann sums."""
    p, q = _pq(e)
    grid = F.grid
    absF = np.abs(F.values)
    if math.isinf(p):
        inner = absF.max(axis=0)
    else:
        inner = (np.sum(absF**p, axis=0) * grid.cell_volume) ** (1.0 / p)
    return _outer(inner, q, grid.frequency_cell_volume)


def _inner_l2_profile(F_hat: np.ndarray, g: Window) -> np.ndarray:
    """int |V_g f(x, xi)|^2 dx at every xi, computed without forming V.

    On the periodic lattice this equals (dxi / 2 pi)^n times the cyclic
    correlation of |hat f|^2 with |hat g|^2, exactly.
    """
    grid = g.grid
    Pf = np.fft.ifftshift(np.abs(F_hat) ** 2)
    Pg = np.fft.ifftshift(np.abs(dft_array(grid, g.signal.values)) ** 2)
    corr = np.fft.ifftn(np.fft.fftn(Pf) * np.conj(np.fft.fftn(Pg))).real
    corr = np.fft.fftshift(corr) * (grid.dxi / (2 * math.pi)) ** grid.n
    return np.maximum(corr, 0.0).ravel()


def modulation_norm(
    f: SampledSignal,
    g: Window,
    e: ExponentPair,
    position_stride: int = 1,
    method: str = "auto",
) -> float:
    """||f||_{M^{p,q}} = ||V_g f||_{L^{p,q}}.

    ``method="spectral"`` (the default for p = 2) never forms the STFT and
    costs a few FFTs; ``"direct"`` streams STFT rows, optionally sampling
    every ``position_stride``-th position along each axis.
    """
    _check_pair(f, g)
    p, q = _pq(e)
    grid = f.grid
    if method == "auto":
        method = "spectral" if p == 2 and position_stride == 1 else "direct"
    if method == "spectral":
        if p != 2:
            raise PreconditionError("the spectral route needs p = 2")
        inner = np.sqrt(_inner_l2_profile(dft_array(grid, f.values), g))
        return _outer(inner, q, grid.frequency_cell_volume)
    if method != "direct":
        raise PreconditionError(f"unknown method {method!r}")
    if position_stride < 1:
        raise PreconditionError("position_stride must be >= 1")
    axes_idx = np.arange(0, grid.N, position_stride)
    positions = np.ravel_multi_index(tuple(np.meshgrid(*([axes_idx] * grid.n), indexing="ij")), grid.shape).ravel()
    weight = (grid.dx * position_stride) ** grid.n
    if math.isinf(p):
        acc = np.zeros(grid.size)
        for _, rows in _stft_rows(f, g, positions):
            np.maximum(acc, np.abs(rows).max(axis=0), out=acc)
        inner = acc
    else:
        acc = np.zeros(grid.size)
        for _, rows in _stft_rows(f, g, positions):
            acc += np.sum(np.abs(rows) ** p, axis=0)
        inner = (acc * weight) ** (1.0 / p)
    return _outer(inner, q, grid.frequency_cell_volume)


Profile = Callable[..., np.ndarray]


@dataclass(frozen=True)
class BandNorm:
    value: float
    active_count: int


def _lattice_range(grid: Grid, radius: float) -> np.ndarray:
    top = int(math.floor(grid.xi_max + radius))
    return np.arange(-top, top + 1)


def covering_minimum(grid: Grid, eta: Profile, support_radius: float) -> float:
    """min over grid frequencies of |sum_nu eta(xi - nu)|."""
    total = np.zeros(grid.shape)
    nus = _lattice_range(grid, support_radius)
    mesh = grid.xi_mesh()
    for nu in np.ndindex(*([len(nus)] * grid.n)):
        shift = [nus[i] for i in nu]
        total = total + eta(*(c - s for c, s in zip(mesh, shift)))
    return float(np.min(np.abs(total)))


def band_norm(
    f: SampledSignal,
    eta: Profile,
    e: ExponentPair,
    support_radius: float = 1.0,
    covering_tol: float = 1e-3,
) -> BandNorm:
    """(sum_nu ||eta(D - nu) f||_{L^p}^q)^{1/q} over integer nu.

    ``eta`` is a frequency profile called with one coordinate array per
    axis and vanishing outside the cube of half-width ``support_radius``.
    """
    if f.domain != "space":
        raise GridMismatchError("band_norm expects a space-domain signal")
    grid = f.grid
    cmin = covering_minimum(grid, eta, support_radius)
    if cmin < covering_tol:
        raise PreconditionError(f"eta does not cover the frequency lattice: min |sum eta(. - nu)| = {cmin:.3e}")
    p, q = _pq(e)
    F = dft_array(grid, f.values)
    mesh = grid.xi_mesh()
    nus = _lattice_range(grid, support_radius)
    norms = []
    for nu in np.ndindex(*([len(nus)] * grid.n)):
        shift = [nus[i] for i in nu]
        mult = eta(*(c - s for c, s in zip(mesh, shift)))
        if not np.any(mult):
            continue
        piece = idft_array(grid, mult * F)
        norms.append(lp_norm(SampledSignal(grid, piece), p))
    arr = np.array(norms)
    return BandNorm(_outer(arr, q, 1.0), len(norms))
