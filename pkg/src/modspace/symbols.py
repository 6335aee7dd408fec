"""Symbol classes, smooth partitions of unity, and the built-in symbols.

Symbols are sampled on (x_i, xi_k) lattice pairs. A ``SymbolGrid`` either
holds the dense (N^n x N^n) array or a separable sum
sum_t a_t(x) b_t(xi); the counterexample and Bessel symbols use the
separable form so they can live on grids far too large for dense storage.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import Grid, GridMismatchError, PreconditionError, dft_array, idft_array

__all__ = [
    "smooth_step",
    "SymbolClassParams",
    "SymbolGrid",
    "PartitionFamily",
    "PartitionError",
    "build_partitions",
    "Box",
    "seminorm_estimate",
    "seminorm_terms",
    "symbol_piece",
    "active_pieces",
    "support_disjoint",
    "support_level",
    "min_j0_disjoint",
    "RadialBump",
    "CounterexampleParams",
    "TruncationWarning",
    "check_j0",
    "minimal_j0",
    "band_factor",
    "counterexample_symbol",
    "bessel_symbol",
    "custom_symbol",
    "multiplier_symbol",
    "multiplication_symbol",
]


def _g(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C^inf step: 0 for t <= 0, 1 for t >= 1, and S(t) + S(1 - t) = 1."""
    a, b = _g(t), _g(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


class PartitionError(RuntimeError):
    """A constructed partition failed one of its defining identities."""


class TruncationWarning(UserWarning):
    """Bands beyond j_max would still be visible on the grid."""


@dataclass(frozen=True)
class SymbolClassParams:
    m: float
    rho: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not 0 <= self.delta <= self.rho <= 1:
            raise PreconditionError(
                f"need 0 <= delta <= rho <= 1, got rho={self.rho}, delta={self.delta}"
            )


# ---------------------------------------------------------------------------
# symbol storage


@dataclass(frozen=True, eq=False)
class SymbolGrid:
    """Samples sigma(x_i, xi_k) with class metadata.

    Exactly one of ``dense`` (shape (N^n, N^n), rows = x, columns = xi) or
    ``terms`` (pairs of arrays with the grid's shape) is set.
    """

    grid: Grid
    params: SymbolClassParams
    provenance: str
    dense: np.ndarray | None = None
    terms: tuple = ()
    piece: tuple | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in ("bessel", "counterexample", "custom", "piece"):
            raise PreconditionError(f"unknown provenance {self.provenance!r}")
        if (self.dense is None) == (not self.terms) and not (self.dense is None and self.terms == ()):
            raise PreconditionError("give either dense values or separable terms")
        size = self.grid.size
        if self.dense is not None:
            d = np.asarray(self.dense, dtype=complex)
            if d.shape != (size, size):
                raise GridMismatchError(f"dense symbol has shape {d.shape}, expected {(size, size)}")
            if not np.all(np.isfinite(d)):
                raise PreconditionError("symbol has non-finite samples")
            d.setflags(write=False)
            object.__setattr__(self, "dense", d)
        else:
            terms = []
            for a, b in self.terms:
                a = np.asarray(a, dtype=complex).reshape(self.grid.shape)
                b = np.asarray(b, dtype=complex).reshape(self.grid.shape)
                if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                    raise PreconditionError("symbol factor has non-finite samples")
                a.setflags(write=False)
                b.setflags(write=False)
                terms.append((a, b))
            object.__setattr__(self, "terms", tuple(terms))

    @property
    def is_separable(self) -> bool:
        return self.dense is None

    @property
    def is_empty(self) -> bool:
        if self.is_separable:
            return all(not np.any(a) or not np.any(b) for a, b in self.terms)
        return not np.any(self.dense)

    @cached_property
    def values(self) -> np.ndarray:
        """Dense (N^n, N^n) samples; materializes separable symbols."""
        if not self.is_separable:
            return self.dense
        size = self.grid.size
        out = np.zeros((size, size), dtype=complex)
        for a, b in self.terms:
            out += np.outer(a.ravel(), b.ravel())
        return out

    def block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """sigma at flat x-indices ``rows`` and flat xi-indices ``cols``."""
        rows, cols = np.asarray(rows), np.asarray(cols)
        if not self.is_separable:
            return self.dense[np.ix_(rows, cols)]
        A = np.array([a.ravel()[rows] for a, _ in self.terms]).T
        B = np.array([b.ravel()[cols] for _, b in self.terms])
        if not len(self.terms):
            return np.zeros((len(rows), len(cols)), dtype=complex)
        return A @ B

    def scaled(self, c) -> "SymbolGrid":
        c = complex(c)
        if self.is_separable:
            return self._replace(terms=tuple((c * a, b) for a, b in self.terms))
        return self._replace(dense=c * self.dense)

    def __add__(self, other: "SymbolGrid") -> "SymbolGrid":
        if other.grid != self.grid:
            raise GridMismatchError("symbols live on different grids")
        if self.is_separable and other.is_separable:
            return SymbolGrid(self.grid, self.params, "custom", terms=self.terms + other.terms)
        return SymbolGrid(self.grid, self.params, "custom", dense=self.values + other.values)

    def _replace(self, **kw) -> "SymbolGrid":
        base = dict(
            grid=self.grid,
            params=self.params,
            provenance=self.provenance,
            dense=self.dense,
            terms=self.terms,
            piece=self.piece,
            info=dict(self.info),
        )
        if "terms" in kw:
            base["dense"] = None
        if "dense" in kw and kw["dense"] is not None:
            base["terms"] = ()
        base.update(kw)
        return SymbolGrid(**base)


def custom_symbol(grid: Grid, func, params: SymbolClassParams) -> SymbolGrid:
    """Dense symbol from ``func(x_coords, xi_coords)``, one array per axis each."""
    X = [c.ravel() for c in grid.x_mesh()]
    XI = [c.ravel() for c in grid.xi_mesh()]
    xs = [x[:, None] for x in X]
    xis = [xi[None, :] for xi in XI]
    vals = np.broadcast_to(func(xs, xis), (grid.size, grid.size))
    return SymbolGrid(grid, params, "custom", dense=np.array(vals, dtype=complex))


def multiplier_symbol(grid: Grid, xi_factor, params: SymbolClassParams, provenance: str = "custom") -> SymbolGrid:
    """x-independent symbol sigma(xi) given by samples or a callable of the xi mesh."""
    b = xi_factor(*grid.xi_mesh()) if callable(xi_factor) else xi_factor
    return SymbolGrid(grid, params, provenance, terms=((np.ones(grid.shape), b),))


def multiplication_symbol(grid: Grid, x_factor, params: SymbolClassParams) -> SymbolGrid:
    """xi-independent symbol sigma(x) = a(x)."""
    a = x_factor(*grid.x_mesh()) if callable(x_factor) else x_factor
    return SymbolGrid(grid, params, "custom", terms=((a, np.ones(grid.shape)),))


def bessel_symbol(m: float, grid: Grid) -> SymbolGrid:
    """(1 + |xi|^2)^{m/2}, an element of S^m_{1,0}."""
    r2 = sum(c**2 for c in grid.xi_mesh())
    return multiplier_symbol(grid, (1.0 + r2) ** (m / 2.0), SymbolClassParams(m, 1.0, 0.0), "bessel")


# ---------------------------------------------------------------------------
# partitions of unity


@dataclass(frozen=True)
class PartitionFamily:
    """Concrete smooth cutoffs for the dyadic and uniform decompositions.

    chi is 1 on |xi| <= chi_inner and 0 on |xi| >= chi_outer; psi0 = chi,
    psi = chi - chi(2 .), psi_j = psi(2^-j .). phi is the tensor product of
    the 1-d profile S((1/2 + w/2 - |t|)/w), whose integer translates sum
    to one. eta is the radial annulus cutoff: 1 on [eta_flat] and 0
    outside [eta_support].
    """

    n: int = 1
    chi_inner: float = 1.0
    chi_outer: float = 2.0
    phi_width: float = 1.0
    eta_flat: tuple = (2**-0.25, 2**0.25)
    eta_support: tuple = (2**-0.5, 2**0.5)

    def __post_init__(self):
        if not 1.0 <= self.chi_inner < self.chi_outer <= 2.0:
            raise PreconditionError("chi transition must lie inside [1, 2]")
        if not 0 < self.phi_width <= 1:
            raise PreconditionError("phi transition width must lie in (0, 1]")
        lo, hi = self.eta_support
        a, b = self.eta_flat
        if not lo < a <= b < hi:
            raise PreconditionError("eta flat region must sit strictly inside its support")

    @staticmethod
    def _radius(coords) -> np.ndarray:
        if len(coords) == 1:
            return np.abs(np.asarray(coords[0], dtype=float))
        return np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in coords))

    def chi(self, *coords):
        r = self._radius(coords)
        return 1.0 - smooth_step((r - self.chi_inner) / (self.chi_outer - self.chi_inner))

    def psi0(self, *coords):
        return self.chi(*coords)

    def psi(self, *coords):
        return self.chi(*coords) - self.chi(*(2.0 * np.asarray(c, dtype=float) for c in coords))

    def psi_j(self, j: int, *coords):
        if j < 0:
            raise PreconditionError("dyadic level must be >= 0")
        if j == 0:
            return self.psi0(*coords)
        return self.psi(*(np.asarray(c, dtype=float) / 2.0**j for c in coords))

    def phi1(self, t):
        w = self.phi_width
        return smooth_step((0.5 + 0.5 * w - np.abs(np.asarray(t, dtype=float))) / w)

    def phi(self, *coords):
        out = self.phi1(coords[0])
        for c in coords[1:]:
            out = out * self.phi1(c)
        return out

    @property
    def phi_support(self) -> float:
        """Half-width of the cube carrying phi."""
        return 0.5 + 0.5 * self.phi_width

    def eta(self, *coords):
        r = self._radius(coords)
        lo, hi = self.eta_support
        a, b = self.eta_flat
        return smooth_step((r - lo) / (a - lo)) * smooth_step((hi - r) / (hi - b))

    def levels_for(self, radius: float) -> int:
        """Smallest J with psi_0 + ... + psi_J = 1 on |xi| <= radius."""
        if radius <= self.chi_inner:
            return 0
        return max(0, math.ceil(math.log2(radius / self.chi_inner)))


def build_partitions(grid: Grid, smoothness: float = 1.0, tol: float = 1e-10, n_random: int = 10_000, seed: int = 0) -> PartitionFamily:
    """Construct the cutoffs and verify their identities on ``grid``.

    ``smoothness`` in (0, 1] scales the transition bands (1 uses all of the
    room the support conditions allow). Raises PartitionError naming the
    identity that fails.
    """
    if not 0 < smoothness <= 1:
        raise PreconditionError("smoothness must lie in (0, 1]")
    P = PartitionFamily(
        n=grid.n,
        chi_inner=1.5 - 0.5 * smoothness,
        chi_outer=1.5 + 0.5 * smoothness,
        phi_width=smoothness,
    )
    rng = np.random.default_rng(seed)
    mesh = grid.xi_mesh()
    idx = rng.integers(0, grid.N, size=(n_random, grid.n))
    pts = [mesh[0].ravel()[0:0]]  # placeholder to keep types simple
    pts = [grid.xi[idx[:, a]] for a in range(grid.n)]
    rmax = math.sqrt(grid.n) * grid.xi_max
    J = P.levels_for(rmax)

    total = sum(P.psi_j(j, *pts) for j in range(J + 1))
    dev = float(np.max(np.abs(total - 1.0)))
    if dev > tol:
        raise PartitionError(f"dyadic partition sum deviates from 1 by {dev:.3e}")

    ks = np.arange(-math.ceil(grid.xi_max) - 2, math.ceil(grid.xi_max) + 3)
    total = np.zeros(n_random)
    for k in itertools.product(ks, repeat=grid.n):
        total = total + P.phi(*(c - kk for c, kk in zip(pts, k)))
    dev = float(np.max(np.abs(total - 1.0)))
    if dev > tol:
        raise PartitionError(f"uniform partition sum deviates from 1 by {dev:.3e}")

    # supports, checked on dense radial samples
    r = np.linspace(0.0, 4.0, 40001)
    zero = np.zeros_like(r)
    coords = (r,) + (zero,) * (grid.n - 1)
    psi = P.psi(*coords)
    if np.any(psi[(r < 0.5) | (r > 2.0)] != 0):
        raise PartitionError("psi is nonzero outside 1/2 <= |xi| <= 2")
    if np.any(P.psi0(*coords)[r > 2.0] != 0):
        raise PartitionError("psi0 is nonzero outside |xi| <= 2")
    if np.any(P.phi(*coords)[r > 1.0] != 0):
        raise PartitionError("phi is nonzero outside [-1, 1]^n")
    eta = P.eta(*coords)
    lo, hi = P.eta_support
    a, b = P.eta_flat
    if np.any(eta[(r < lo) | (r > hi)] != 0):
        raise PartitionError("eta is nonzero outside its support annulus")
    flat = (r >= a) & (r <= b)
    if np.max(np.abs(eta[flat] - 1.0)) > tol:
        raise PartitionError("eta is not 1 on its flat annulus")

    # ||d^alpha psi_j||_inf 2^{j|alpha|} must not grow with j (|alpha| <= 2)
    for order in (1, 2):
        scaled = []
        for j in range(1, J + 1):
            h = 2.0**j * 1e-3
            rr = np.linspace(2.0 ** (j - 1), 2.0 ** (j + 1), 4001)
            f = lambda t: P.psi_j(j, t, *((0 * t,) * (grid.n - 1)))
            if order == 1:
                d = (f(rr + h) - f(rr - h)) / (2 * h)
            else:
                d = (f(rr + h) - 2 * f(rr) + f(rr - h)) / h**2
            scaled.append(np.max(np.abs(d)) * 2.0 ** (j * order))
        if scaled and max(scaled) > 1.05 * min(scaled) + 1e-9:
            raise PartitionError(f"derivative bound of order {order} drifts across levels: {scaled}")
    return P


# ---------------------------------------------------------------------------
# seminorms by finite differences

_STENCILS = {
    0: (np.array([0]), np.array([1.0])),
    1: (np.arange(-2, 3), np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0),
    2: (np.arange(-2, 3), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
    3: (np.arange(-3, 4), np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0),
    4: (np.arange(-3, 4), np.array([-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0]) / 6.0),
}
_HALO = 3


@dataclass(frozen=True)
class Box:
    """Sample region: per-axis closed intervals in x and xi, plus strides."""

    x: tuple = (-1.0, 1.0)
    xi: tuple = (-8.0, 8.0)
    x_stride: int = 1
    xi_stride: int = 1


def _box_indices(nodes: np.ndarray, interval, stride: int, step: int) -> np.ndarray:
    lo, hi = interval
    idx = np.nonzero((nodes >= lo) & (nodes <= hi))[0][::stride]
    if idx.size == 0:
        raise PreconditionError(f"box interval {interval} contains no grid nodes")
    if idx[0] - _HALO * step < 0 or idx[-1] + _HALO * step >= nodes.size:
        raise PreconditionError(f"box interval {interval} plus stencil halo exceeds the grid")
    return idx


def _fd_1d(values: np.ndarray, axis: int, order: int, step: int, spacing: float, at: np.ndarray) -> np.ndarray:
    offs, w = _STENCILS[order]
    h = step * spacing
    out = 0
    for o, c in zip(offs, w):
        if c == 0:
            continue
        out = out + c * np.take(values, at + o * step, axis=axis)
    return out / h**order


def _multi_indices(n: int, total: int):
    for parts in itertools.product(range(total + 1), repeat=n):
        if sum(parts) <= total:
            yield parts


def seminorm_terms(sigma: SymbolGrid, N: int, box: Box, h_steps: int = 2, params: SymbolClassParams | None = None) -> dict:
    """Weighted sup of |d_xi^alpha d_x^beta sigma| for every |alpha + beta| <= N."""
    if N > 4:
        raise PreconditionError("derivative order is capped at 4")
    if h_steps < 1:
        raise PreconditionError("finite-difference step must be a positive multiple of the spacing")
    grid = sigma.grid
    params = params or sigma.params
    n = grid.n
    xi_idx = _box_indices(grid.xi, box.xi, box.xi_stride, h_steps)
    x_idx = _box_indices(grid.x, box.x, box.x_stride, h_steps)
    out = {}
    for tot in range(N + 1):
        for ab in _multi_indices(2 * n, tot):
            if sum(ab) != tot:
                continue
            alpha, beta = ab[:n], ab[n:]
            out[(alpha, beta)] = _weighted_sup(sigma, alpha, beta, x_idx, xi_idx, h_steps, params)
    return out


def seminorm_estimate(sigma: SymbolGrid, N: int, box: Box, h_steps: int = 2, params: SymbolClassParams | None = None) -> float:
    """Finite-difference lower estimate of |sigma|_{S^m_{rho,delta}, N} over ``box``."""
    return max(seminorm_terms(sigma, N, box, h_steps, params).values())


def _axis_derivative(arr: np.ndarray, orders: Sequence[int], idx: np.ndarray, spacing: float, step: int, first_axis: int) -> np.ndarray:
    """Apply d^orders along consecutive axes starting at ``first_axis`` and sample at ``idx``."""
    for a, order in enumerate(orders):
        arr = _fd_1d(arr, first_axis + a, order, step, spacing, idx)
    return arr


def _weighted_sup(sigma, alpha, beta, x_idx, xi_idx, step, params) -> float:
    grid = sigma.grid
    n = grid.n
    expo = params.m - params.rho * sum(alpha) + params.delta * sum(beta)
    xi_mesh = np.meshgrid(*([grid.xi[xi_idx]] * n), indexing="ij")
    weight = (1.0 + np.sqrt(sum(c**2 for c in xi_mesh))) ** (-expo)
    weight = weight.ravel()
    if sigma.is_separable:
        A = np.array([_axis_derivative(a, beta, x_idx, grid.dx, step, 0).ravel() for a, _ in sigma.terms])
        B = np.array([_axis_derivative(b, alpha, xi_idx, grid.dxi, step, 0).ravel() for _, b in sigma.terms])
        best = 0.0
        chunk = max(1, 4_000_000 // max(1, A.shape[1]))
        for s in range(0, B.shape[1], chunk):
            vals = np.abs(A.T @ B[:, s : s + chunk]) * weight[s : s + chunk]
            best = max(best, float(vals.max(initial=0.0)))
        return best
    D = sigma.dense.reshape(grid.shape + grid.shape)
    D = _axis_derivative(D, beta, x_idx, grid.dx, step, 0)
    D = _axis_derivative(D, alpha, xi_idx, grid.dxi, step, n)
    D = D.reshape(len(x_idx) ** n, len(xi_idx) ** n)
    return float(np.max(np.abs(D) * weight[None, :]))


# ---------------------------------------------------------------------------
# symbol pieces


def _x_filter(grid: Grid, arr: np.ndarray, mult: np.ndarray, batched: bool) -> np.ndarray:
    """phi(2^{-j delta} D_x - k) applied along the x axes of ``arr``."""
    n = grid.n
    axes = tuple(range(n))
    if batched:
        F = dft_array(grid, arr, axes=axes)
        F = F * mult.reshape(mult.shape + (1,) * (arr.ndim - n))
        return idft_array(grid, F, axes=axes)
    return idft_array(grid, mult * dft_array(grid, arr))


def symbol_piece(sigma: SymbolGrid, P: PartitionFamily, j: int, k, ell, delta: float) -> SymbolGrid:
    """phi(2^{-j delta} D_x - k) sigma(x, xi) phi(2^{-j delta} xi - ell) psi_j(xi)."""
    grid = sigma.grid
    if j < 0:
        raise PreconditionError("dyadic level must be >= 0")
    k = tuple(np.atleast_1d(k).astype(int).tolist())
    ell = tuple(np.atleast_1d(ell).astype(int).tolist())
    if len(k) != grid.n or len(ell) != grid.n:
        raise GridMismatchError("lattice indices must have one entry per axis")
    s = 2.0 ** (-j * delta)
    y = grid.xi_mesh()
    xmult = P.phi(*(s * c - kk for c, kk in zip(y, k)))
    ximult = P.phi(*(s * c - ll for c, ll in zip(y, ell))) * P.psi_j(j, *y)
    if sigma.is_separable:
        terms = []
        for a, b in sigma.terms:
            terms.append((_x_filter(grid, a, xmult, False), b * ximult))
        out = SymbolGrid(grid, sigma.params, "piece", terms=tuple(terms), piece=(j, k, ell))
    else:
        D = sigma.dense.reshape(grid.shape + (grid.size,))
        D = _x_filter(grid, D, xmult, True).reshape(grid.size, grid.size)
        out = SymbolGrid(grid, sigma.params, "piece", dense=D * ximult.ravel()[None, :], piece=(j, k, ell))
    out.info["empty"] = (not np.any(xmult)) or (not np.any(ximult)) or out.is_empty
    return out


def active_pieces(grid: Grid, P: PartitionFamily, delta: float) -> list[tuple]:
    """Every (j, k, ell) whose three cutoffs are not identically zero on the grid."""
    rmax = math.sqrt(grid.n) * grid.xi_max
    J = P.levels_for(rmax)
    out = []
    y = grid.xi
    for j in range(J + 1):
        s = 2.0 ** (-j * delta)
        kmax = math.floor(s * grid.xi_max + P.phi_support)
        ks1 = [k for k in range(-kmax, kmax + 1) if np.any(P.phi1(s * y - k))]
        ks = list(itertools.product(ks1, repeat=grid.n))
        mesh = grid.xi_mesh()
        psi = P.psi_j(j, *mesh)
        ells = [
            ell
            for ell in itertools.product(ks1, repeat=grid.n)
            if np.any(P.phi(*(s * c - l for c, l in zip(mesh, ell))) * psi)
        ]
        out.extend((j, k, ell) for k in ks for ell in ells)
    return out


# ---------------------------------------------------------------------------
# support separation of phi-cubes and psi-annuli


def min_j0_disjoint(delta: float, n: int) -> int:
    """Smallest integer j0 with 2^{j0 (1 - delta) - 3} >= sqrt(n)."""
    if not 0 <= delta < 1:
        raise PreconditionError("delta must satisfy 0 <= delta < 1")
    j0 = 0
    while 2.0 ** (j0 * (1 - delta) - 3) < math.sqrt(n):
        j0 += 1
    return j0


def _cube_annulus_meet(center: np.ndarray, half: float, r_in: float, r_out: float) -> bool:
    # |xi| ranges over [dist(0, cube), farthest corner] on a connected cube
    lo = np.maximum(np.abs(center) - half, 0.0)
    hi = np.abs(center) + half
    rmin = float(np.sqrt(np.sum(lo**2)))
    rmax = float(np.sqrt(np.sum(hi**2)))
    return rmin <= r_out and rmax >= r_in


def support_disjoint(ell, j: int, delta: float, j0: int) -> bool:
    """Whether the cube 2^{j delta}(ell + [-1, 1]^n) misses {2^{j-1} <= |xi| <= 2^{j+1}}."""
    ell = np.atleast_1d(np.asarray(ell, dtype=float))
    n = ell.size
    if not 0 <= delta < 1:
        raise PreconditionError("delta must satisfy 0 <= delta < 1")
    if 2.0 ** (j0 * (1 - delta) - 3) < math.sqrt(n):
        raise PreconditionError(f"j0={j0} is too small: need 2^(j0(1-delta)-3) >= sqrt(n)")
    s = 2.0 ** (j * delta)
    return not _cube_annulus_meet(s * ell, s, 2.0 ** (j - 1), 2.0 ** (j + 1))


def support_level(ell, delta: float, j0: int, j_limit: int = 200) -> int | None:
    """Smallest j >= j0 + 1 at which the ell-cube meets the j-th annulus."""
    for j in range(j0 + 1, j_limit + 1):
        if not support_disjoint(ell, j, delta, j0):
            return j
    return None


# ---------------------------------------------------------------------------
# the counterexample symbol


@dataclass(frozen=True)
class RadialBump:
    """Radial c*exp(-1/(1 - |8 xi|^2)) on |xi| < 1/8 with unit integral.

    Its inverse Fourier transform Phi is real and band-limited; both are
    computed from one fixed quadrature of the radial profile.
    """

    n: int = 1
    radius: float = 0.125
    nodes: int = 2048

    @cached_property
    def _quadrature(self):
        # trapezoid on [0, R]; the integrand vanishes to all orders at R
        r = np.linspace(0.0, self.radius, self.nodes + 1)
        w = np.full(r.size, r[1] - r[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        prof = self._raw(r)
        if self.n == 1:
            mass = 2.0 * np.dot(w, prof)
        else:
            mass = 2.0 * math.pi * np.dot(w, prof * r)
        return r, w, 1.0 / mass

    @staticmethod
    def _raw_static(r, radius):
        t = (np.asarray(r, dtype=float) / radius) ** 2
        out = np.zeros_like(t)
        inside = t < 1
        out[inside] = np.exp(-1.0 / (1.0 - t[inside]))
        return out

    def _raw(self, r):
        return self._raw_static(r, self.radius)

    @property
    def constant(self) -> float:
        return self._quadrature[2]

    def integral(self) -> float:
        r, w, c = self._quadrature
        prof = c * self._raw(r)
        return float(2.0 * np.dot(w, prof) if self.n == 1 else 2.0 * math.pi * np.dot(w, prof * r))

    def __call__(self, *coords):
        rr = np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in coords))
        return self.constant * self._raw(rr)

    def Phi(self, *coords, chunk: int = 4096) -> np.ndarray:
        """Inverse Fourier transform of the bump at arbitrary points."""
        from scipy.special import j0 as bessel_j0

        r, w, c = self._quadrature
        prof = c * self._raw(r) * w
        rr = np.sqrt(sum(np.asarray(cc, dtype=float) ** 2 for cc in coords))
        flat = rr.ravel()
        out = np.empty(flat.size)
        for s in range(0, flat.size, chunk):
            seg = flat[s : s + chunk, None]
            if self.n == 1:
                out[s : s + chunk] = np.cos(seg * r[None, :]) @ prof / math.pi
            else:
                out[s : s + chunk] = bessel_j0(seg * r[None, :]) @ (prof * r) / (2 * math.pi)
        return out.reshape(rr.shape)


def check_j0(j0: int, delta: float, n: int, kernel_condition: bool = True) -> list[str]:
    """Names of the admissibility inequalities that ``j0`` violates."""
    failed = []
    t = 2.0 ** (j0 * (delta - 1) + 1)
    if not 1 + t <= 2**0.25:
        failed.append("1 + 2^(j0(delta-1)+1) <= 2^(1/4)")
    if not 1 - t >= 2**-0.25:
        failed.append("1 - 2^(j0(delta-1)+1) >= 2^(-1/4)")
    if not 2.0 ** (-j0 * delta / 2) * math.sqrt(n) <= 2**-3:
        failed.append("2^(-j0 delta/2) sqrt(n) <= 2^(-3)")
    if kernel_condition and not 2.0 ** (j0 * (delta - 1) + 2) < 2**-0.5:
        failed.append("2^(j0(delta-1)+2) < 2^(-1/2)")
    return failed


def minimal_j0(delta: float, n: int, kernel_condition: bool = True) -> int:
    if not 0 < delta < 1:
        raise PreconditionError("the counterexample needs 0 < delta < 1")
    j0 = 1
    while check_j0(j0, delta, n, kernel_condition):
        j0 += 1
    return j0


@dataclass(frozen=True)
class CounterexampleParams:
    m: float
    delta: float
    n: int = 1
    j0: int | None = None
    j_max: int | None = None
    kernel_condition: bool = True
    bump: RadialBump | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise PreconditionError("the counterexample needs 0 < delta < 1")
        if self.j0 is None:
            object.__setattr__(self, "j0", minimal_j0(self.delta, self.n, self.kernel_condition))
        failed = check_j0(self.j0, self.delta, self.n, self.kernel_condition)
        if failed:
            raise PreconditionError(f"j0={self.j0} violates: {'; '.join(failed)}")
        if self.j_max is None:
            object.__setattr__(self, "j_max", self.j0)
        if self.j_max < self.j0:
            raise PreconditionError("j_max must be >= j0")
        if self.bump is None:
            object.__setattr__(self, "bump", RadialBump(self.n))

    def scale(self, j: int) -> float:
        return 2.0 ** (j * self.delta / 2)

    def modulation_indices(self, j: int) -> list[tuple]:
        """Integer k with 0 < |k| <= 2^{j delta / 2}."""
        s = self.scale(j)
        K = math.floor(s)
        out = []
        for k in itertools.product(range(-K, K + 1), repeat=self.n):
            r = math.sqrt(sum(v * v for v in k))
            if 0 < r <= s:
                out.append(k)
        return out

    def band_support(self, j: int) -> tuple[float, float]:
        lo, hi = PartitionFamily().eta_support
        return 2.0**j * lo, 2.0**j * hi


def band_factor(cp: CounterexampleParams, j: int, grid: Grid, sign: int = -1) -> np.ndarray:
    """x-dependent factor sum_k e^{sign i k.(s x - k)} Phi(s x - k), s = 2^{j delta/2}.

    Computed as the inverse DFT of its exact Fourier transform
    s^{-n} sum_k e^{-i y.k/s} phi(y/s - sign k), so the samples are the
    2L-periodization of the continuum factor.
    """
    if grid.n != cp.n:
        raise GridMismatchError("grid and counterexample dimensions differ")
    s = cp.scale(j)
    y = grid.xi_mesh()
    spec = np.zeros(grid.shape, dtype=complex)
    for k in cp.modulation_indices(j):
        arg = [c / s - sign * kk for c, kk in zip(y, k)]
        amp = cp.bump(*arg)
        if not np.any(amp):
            continue
        phase = sum(c * kk for c, kk in zip(y, k)) / s
        spec += np.exp(-1j * phase) * amp
    return idft_array(grid, spec / s**cp.n)


def counterexample_symbol(cp: CounterexampleParams, grid: Grid) -> SymbolGrid:
    """sum_{j0 <= j <= j_max} 2^{jm} (band factor)(x) eta(2^{-j} xi), separable."""
    if grid.n != cp.n:
        raise GridMismatchError("grid and counterexample dimensions differ")
    if 2.0 ** (cp.j_max - 0.5) > grid.xi_max:
        raise PreconditionError(
            f"j_max={cp.j_max} starts above the grid's largest frequency {grid.xi_max:.6g}"
        )
    r_top = math.sqrt(grid.n) * grid.xi_max
    exact = 2.0 ** (cp.j_max + 0.5) >= r_top
    if not exact:
        warnings.warn(
            f"bands above j_max={cp.j_max} would be nonzero on this grid (|xi| up to {r_top:.6g})",
            TruncationWarning,
            stacklevel=2,
        )
    P = PartitionFamily(n=cp.n)
    mesh = grid.xi_mesh()
    terms = []
    for j in range(cp.j0, cp.j_max + 1):
        a = 2.0 ** (j * cp.m) * band_factor(cp, j, grid)
        b = P.eta(*(c / 2.0**j for c in mesh))
        terms.append((a, b))
    sym = SymbolGrid(
        grid,
        SymbolClassParams(cp.m, 1.0, cp.delta),
        "counterexample",
        terms=tuple(terms),
        info={
            "j0": cp.j0,
            "j_max": cp.j_max,
            "truncation_exact": exact,
            "top_band_complete": 2.0 ** (cp.j_max + 0.5) <= grid.xi_max,
        },
    )
    return sym
