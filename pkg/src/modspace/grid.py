"""Uniform periodic grids and discrete Fourier analysis.

Conventions follow the angular-frequency Fourier transform

    hat f(xi) = int e^{-i xi.x} f(x) dx,
    f(x) = (2 pi)^{-n} int e^{i x.xi} hat f(xi) dxi,

discretized on the periodic box [-L, L)^n with N points per axis.
Spatial nodes are x_i = -L + i*dx, frequency nodes xi_k = pi*k/L with
k = -N/2, ..., N/2 - 1, both stored in ascending (centered) order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridMismatchError",
    "PreconditionError",
    "SampledSignal",
    "dft",
    "idft",
    "translate",
    "modulate",
    "dilate",
    "lp_norm",
    "compensated_sum",
]


class GridMismatchError(ValueError):
    """Operands live on different grids or have the wrong shape."""


class PreconditionError(ValueError):
    """An operation was called outside its domain of validity."""


def compensated_sum(values) -> float:
    """Sum of a real array with error-free accumulation (``math.fsum``)."""
    arr = np.asarray(values, dtype=float).ravel()
    return math.fsum(arr.tolist())


@dataclass(frozen=True)
class Grid:
    """The periodic box [-L, L)^n sampled with N points per axis."""

    n: int
    points_per_axis: int
    half_length: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise PreconditionError(f"dimension must be 1 or 2, got {self.n}")
        N = self.points_per_axis
        if N <= 0 or N % 2:
            raise PreconditionError(f"points_per_axis must be a positive even integer, got {N}")
        if not self.half_length > 0:
            raise PreconditionError(f"half_length must be positive, got {self.half_length}")
        object.__setattr__(self, "half_length", float(self.half_length))

    @classmethod
    def default(cls, n: int = 1) -> "Grid":
        return cls(1, 512, 16.0) if n == 1 else cls(2, 128, 8.0)

    @property
    def N(self) -> int:
        return self.points_per_axis

    @property
    def L(self) -> float:
        return self.half_length

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.points_per_axis

    @property
    def dxi(self) -> float:
        return math.pi / self.half_length

    @property
    def xi_max(self) -> float:
        """Largest |xi| represented on the frequency lattice."""
        return math.pi * (self.points_per_axis // 2) / self.half_length

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.n

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.n

    @property
    def frequency_cell_volume(self) -> float:
        return self.dxi ** self.n

    @cached_property
    def x(self) -> np.ndarray:
        """Spatial nodes along one axis."""
        x = -self.half_length + self.dx * np.arange(self.points_per_axis)
        x.setflags(write=False)
        return x

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequency nodes along one axis."""
        k = np.arange(-(self.points_per_axis // 2), self.points_per_axis // 2)
        xi = self.dxi * k
        xi.setflags(write=False)
        return xi

    def x_mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.x] * self.n), indexing="ij"))

    def xi_mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.xi] * self.n), indexing="ij"))

    @cached_property
    def _sign(self) -> np.ndarray:
        # (-1)^(k_1 + ... + k_n) in centered ordering
        k = np.arange(-(self.points_per_axis // 2), self.points_per_axis // 2)
        s1 = np.where(k % 2 == 0, 1.0, -1.0)
        s = s1
        for _ in range(self.n - 1):
            s = np.multiply.outer(s, s1)
        s.setflags(write=False)
        return s

    def on_lattice(self, shift: Sequence[float] | float, spacing: float, tol: float = 1e-9) -> np.ndarray:
        """Integer lattice coordinates of ``shift`` or raise if off-lattice."""
        s = np.atleast_1d(np.asarray(shift, dtype=float))
        if s.size == 1 and self.n > 1:
            s = np.repeat(s, self.n)
        if s.size != self.n:
            raise GridMismatchError(f"shift has {s.size} components, grid dimension is {self.n}")
        idx = np.rint(s / spacing)
        if np.any(np.abs(s / spacing - idx) > tol * max(1.0, float(np.max(np.abs(idx))))):
            raise PreconditionError(f"{s.tolist()} is not a multiple of the lattice spacing {spacing}")
        return idx.astype(int)


@dataclass(frozen=True)
class SampledSignal:
    """Complex samples of a function on a grid.

    ``domain`` is ``"space"`` for samples f(x_i) and ``"frequency"`` for
    samples hat f(xi_k). ``flags`` carries non-fatal warnings such as
    ``"wraparound"`` raised by :func:`dilate`.
    """

    grid: Grid
    values: np.ndarray
    domain: str = "space"
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.size == self.grid.size and vals.shape != self.grid.shape:
            vals = vals.reshape(self.grid.shape)
        if vals.shape != self.grid.shape:
            raise GridMismatchError(f"values have shape {vals.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise PreconditionError("signal contains NaN or Inf entries")
        if self.domain not in ("space", "frequency"):
            raise PreconditionError(f"unknown domain {self.domain!r}")
        vals = vals.copy() if vals is self.values else vals
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "flags", frozenset(self.flags))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "SampledSignal":
        return cls(grid, func(*grid.x_mesh()))

    def with_values(self, values, **changes) -> "SampledSignal":
        return SampledSignal(self.grid, values, changes.get("domain", self.domain), changes.get("flags", self.flags))

    def __add__(self, other: "SampledSignal") -> "SampledSignal":
        _check_same(self, other)
        return self.with_values(self.values + other.values, flags=self.flags | other.flags)

    def __sub__(self, other: "SampledSignal") -> "SampledSignal":
        _check_same(self, other)
        return self.with_values(self.values - other.values, flags=self.flags | other.flags)

    def __mul__(self, c) -> "SampledSignal":
        return self.with_values(complex(c) * self.values)

    __rmul__ = __mul__


def _check_same(f: SampledSignal, g: SampledSignal):
    if f.grid != g.grid:
        raise GridMismatchError("signals live on different grids")
    if f.domain != g.domain:
        raise GridMismatchError("signals live in different domains")


def _require(f: SampledSignal, domain: str):
    if not isinstance(f, SampledSignal):
        raise GridMismatchError(f"expected a SampledSignal, got {type(f).__name__}")
    if f.domain != domain:
        raise GridMismatchError(f"expected a {domain}-domain signal, got {f.domain}")


def dft_array(grid: Grid, values: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Riemann-sum Fourier transform of raw samples along the trailing grid axes."""
    if axes is None:
        axes = tuple(range(values.ndim - grid.n, values.ndim))
    out = np.fft.fftshift(np.fft.fftn(values, axes=axes), axes=axes)
    return out * grid._sign * grid.cell_volume


def idft_array(grid: Grid, values: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Inverse of :func:`dft_array` (carries the (2 pi)^{-n} factor)."""
    if axes is None:
        axes = tuple(range(values.ndim - grid.n, values.ndim))
    vals = np.fft.ifftshift(values * grid._sign, axes=axes)
    return np.fft.ifftn(vals, axes=axes) / grid.cell_volume


def dft(f: SampledSignal) -> SampledSignal:
    """Samples of hat f at the frequency nodes."""
    _require(f, "space")
    return SampledSignal(f.grid, dft_array(f.grid, f.values), "frequency", f.flags)


def idft(F: SampledSignal) -> SampledSignal:
    _require(F, "frequency")
    return SampledSignal(F.grid, idft_array(F.grid, F.values), "space", F.flags)


def translate(f: SampledSignal, x0) -> SampledSignal:
    """T_{x0} f(t) = f(t - x0) for a lattice shift x0 (periodic)."""
    _require(f, "space")
    shift = f.grid.on_lattice(x0, f.grid.dx)
    return f.with_values(np.roll(f.values, tuple(shift), axis=tuple(range(f.grid.n))))


def modulate(f: SampledSignal, xi0) -> SampledSignal:
    """M_{xi0} f(t) = e^{i xi0.t} f(t) for a lattice frequency xi0."""
    _require(f, "space")
    k = f.grid.on_lattice(xi0, f.grid.dxi)
    phase = np.zeros(f.grid.shape)
    for axis, coord in enumerate(f.grid.x_mesh()):
        phase = phase + k[axis] * f.grid.dxi * coord
    return f.with_values(np.exp(1j * phase) * f.values)


def _interp_matrix(grid: Grid, points: np.ndarray) -> np.ndarray:
    """Rows evaluate the trigonometric interpolant at ``points`` from hat f samples.

    The Nyquist mode is split symmetrically so real data stays real.
    """
    xi = grid.xi
    E = np.exp(1j * np.outer(points, xi))
    E[:, 0] = np.cos(xi[0] * points)
    return E * (grid.dxi / (2 * math.pi))


def dilate(f: SampledSignal, a: float, mass_tol: float = 1e-8) -> SampledSignal:
    """Samples of x -> f(a x) by band-limited (trigonometric) interpolation.

    Points a*x_i that leave the box are set to zero. The result is flagged
    ``"wraparound"`` when f carries more than ``mass_tol`` of its L^1 mass
    outside |x|_inf < L*min(1, a), and ``"aliasing"`` when hat f carries
    more than ``mass_tol`` of its L^1 mass beyond xi_max/a.
    """
    _require(f, "space")
    if not a > 0:
        raise PreconditionError(f"dilation factor must be positive, got {a}")
    grid = f.grid
    if a == 1:
        return f
    flags = set(f.flags)
    F = dft_array(grid, f.values)
    absf = np.abs(f.values)
    total = compensated_sum(absf)
    if total > 0:
        inside = np.ones(grid.shape, dtype=bool)
        for coord in grid.x_mesh():
            inside &= np.abs(coord) < grid.L * min(1.0, a)
        if compensated_sum(absf[~inside]) > mass_tol * total:
            flags.add("wraparound")
        absF = np.abs(F)
        lowband = np.ones(grid.shape, dtype=bool)
        for coord in grid.xi_mesh():
            lowband &= np.abs(coord) <= grid.xi_max / a
        if compensated_sum(absF[~lowband]) > mass_tol * compensated_sum(absF):
            flags.add("aliasing")
    pts = a * grid.x
    E = _interp_matrix(grid, pts)
    E[np.abs(pts) >= grid.L] = 0.0
    vals = F
    for axis in range(grid.n):
        vals = np.moveaxis(np.tensordot(E, vals, axes=([1], [axis])), 0, axis)
    return SampledSignal(grid, vals, "space", frozenset(flags))


def lp_norm(f: SampledSignal, p: float) -> float:
    """Riemann-sum L^p norm (p = inf gives the max modulus)."""
    if p < 1:
        raise PreconditionError(f"p must be >= 1, got {p}")
    absf = np.abs(f.values)
    if math.isinf(p):
        return float(absf.max()) if absf.size else 0.0
    w = f.grid.cell_volume if f.domain == "space" else f.grid.frequency_cell_volume
    return (compensated_sum(absf**p) * w) ** (1.0 / p)
