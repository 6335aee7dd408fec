"""Kohn-Nirenberg quantization, kernels, and kernel-side checks.

    sigma(X, D) f(x) = (2 pi)^{-n} int e^{i x.xi} sigma(x, xi) hat f(xi) dxi

Small grids get dense matrices. Separable symbols sum_t a_t(x) b_t(xi)
also have a matrix-free form, f -> sum_t a_t * b_t(D) f, which is what the
large-grid counterexample experiments use.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .fitting import FitResult, linear_fit, loglog_fit
from .grid import (
    Grid,
    GridMismatchError,
    PreconditionError,
    SampledSignal,
    dft_array,
    idft_array,
    lp_norm,
)
from .symbols import (
    _STENCILS,
    CounterexampleParams,
    PartitionFamily,
    SymbolGrid,
    symbol_piece,
)

__all__ = [
    "OperatorMatrix",
    "KernelField",
    "CounterexampleKernel",
    "RadialTransformTable",
    "CzoCheckReport",
    "quantize",
    "apply",
    "adjoint",
    "transpose",
    "kernel",
    "l2_operator_norm",
    "czo_check",
    "kernel_decay_fit",
    "vanishing_moments",
    "PieceDecayReport",
    "piece_kernel_decay",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Discrete realization of sigma(X, D) on a grid.

    Dense operators carry ``entries`` with (Af)(x_i) = sum_j A[i, j] f(x_j).
    Matrix-free ones carry separable ``terms``; ``adjoint_form`` and
    ``conjugated`` record which of A, A^*, conj(A), A^T the terms describe.
    """

    grid: Grid
    entries: np.ndarray | None = None
    symbol_provenance: str = "custom"
    terms: tuple = ()
    adjoint_form: bool = False
    conjugated: bool = False

    def __post_init__(self):
        if self.entries is not None:
            A = np.asarray(self.entries, dtype=complex)
            if A.shape != (self.grid.size, self.grid.size):
                raise GridMismatchError(f"operator has shape {A.shape}, grid needs {(self.grid.size,) * 2}")
            A.setflags(write=False)
            object.__setattr__(self, "entries", A)
        elif not self.terms:
            raise PreconditionError("operator needs entries or separable terms")

    @property
    def is_dense(self) -> bool:
        return self.entries is not None

    def matvec(self, values: np.ndarray) -> np.ndarray:
        """Apply to raw samples of shape grid.shape or (batch,) + grid.shape."""
        grid = self.grid
        v = np.asarray(values, dtype=complex)
        batched = v.shape != grid.shape
        if batched and v.shape[1:] != grid.shape:
            raise GridMismatchError(f"cannot apply operator to shape {v.shape}")
        if self.is_dense:
            flat = v.reshape(-1, grid.size)
            return (flat @ self.entries.T).reshape(v.shape)
        if self.conjugated:
            v = np.conj(v)
        out = np.zeros(v.shape, dtype=complex)
        for a, b in self.terms:
            if self.adjoint_form:
                out += idft_array(grid, np.conj(b) * dft_array(grid, np.conj(a) * v))
            else:
                out += a * idft_array(grid, b * dft_array(grid, v))
        return np.conj(out) if self.conjugated else out

    def __call__(self, f: SampledSignal) -> SampledSignal:
        return apply(self, f)

    def adjoint(self) -> "OperatorMatrix":
        if self.is_dense:
            return OperatorMatrix(self.grid, np.conj(self.entries).T, self.symbol_provenance)
        return OperatorMatrix(
            self.grid, None, self.symbol_provenance, self.terms, not self.adjoint_form, self.conjugated
        )

    def transpose(self) -> "OperatorMatrix":
        if self.is_dense:
            return OperatorMatrix(self.grid, self.entries.T, self.symbol_provenance)
        return OperatorMatrix(
            self.grid, None, self.symbol_provenance, self.terms, not self.adjoint_form, not self.conjugated
        )

    def scaled(self, c) -> "OperatorMatrix":
        c = complex(c)
        if self.is_dense:
            return OperatorMatrix(self.grid, c * self.entries, self.symbol_provenance)
        # a -> c a scales A by c but A^* by conj(c); undo that in the stored form
        cc = c
        if self.adjoint_form != self.conjugated:
            cc = np.conj(c)
        terms = tuple((cc * a, b) for a, b in self.terms)
        return OperatorMatrix(self.grid, None, self.symbol_provenance, terms, self.adjoint_form, self.conjugated)

    def compose(self, other: "OperatorMatrix") -> "OperatorMatrix":
        """self o other, dense."""
        if other.grid != self.grid:
            raise GridMismatchError("operators live on different grids")
        return OperatorMatrix(self.grid, self.dense() @ other.dense(), "custom")

    def dense(self) -> np.ndarray:
        if self.is_dense:
            return self.entries
        if self.grid.size > DENSE_LIMIT:
            raise PreconditionError(f"refusing to materialize a {self.grid.size}-point operator densely")
        eye = np.eye(self.grid.size, dtype=complex).reshape((self.grid.size,) + self.grid.shape)
        cols = self.matvec(eye).reshape(self.grid.size, self.grid.size)
        return cols.T

    def row(self, i: int) -> np.ndarray:
        """Row i of the matrix, without materializing it."""
        if self.is_dense:
            return self.entries[i]
        e = np.zeros(self.grid.size, dtype=complex)
        e[i] = 1.0
        return np.conj(self.adjoint().matvec(e.reshape(self.grid.shape))).ravel()


def _dense_from_symbol(sigma: SymbolGrid, chunk: int = 128) -> np.ndarray:
    """A[i, j] = (2 pi)^{-n} sum_k e^{i x_i xi_k} sigma(x_i, xi_k) e^{-i xi_k x_j} dx^n dxi^n."""
    grid = sigma.grid
    n, size = grid.n, grid.size
    X = np.array([c.ravel() for c in grid.x_mesh()])  # (n, size)
    XI = np.array([c.ravel() for c in grid.xi_mesh()])
    sign = grid._sign.ravel()
    const = (grid.dx * grid.dxi / (2 * math.pi)) ** n
    A = np.empty((size, size), dtype=complex)
    for s in range(0, size, chunk):
        rows = np.arange(s, min(size, s + chunk))
        phase = np.exp(1j * (X[:, rows].T @ XI))
        C = phase * sigma.block(rows, np.arange(size)) * sign
        C = C.reshape((len(rows),) + grid.shape)
        # e^{-i xi_k x_j} = (-1)^{k} e^{-2 pi i k j / N}: an unshifted forward FFT over k
        axes = tuple(range(1, n + 1))
        A[rows] = np.fft.fftn(np.fft.ifftshift(C, axes=axes), axes=axes).reshape(len(rows), size) * const
    return A


def quantize(sigma: SymbolGrid, matrix_free: bool | str = "auto") -> OperatorMatrix:
    """Kohn-Nirenberg operator of ``sigma`` on its grid."""
    if matrix_free == "auto":
        matrix_free = sigma.is_separable and sigma.grid.size > DENSE_LIMIT
    if matrix_free:
        if not sigma.is_separable:
            raise PreconditionError("matrix-free quantization needs a separable symbol")
        return OperatorMatrix(sigma.grid, None, sigma.provenance, sigma.terms)
    if sigma.grid.size > DENSE_LIMIT:
        raise PreconditionError(f"grid has {sigma.grid.size} points; dense operators stop at {DENSE_LIMIT}")
    return OperatorMatrix(sigma.grid, _dense_from_symbol(sigma), sigma.provenance)


def apply(A: OperatorMatrix, f: SampledSignal) -> SampledSignal:
    if f.grid != A.grid:
        raise GridMismatchError("operator and signal live on different grids")
    if f.domain != "space":
        raise GridMismatchError("operators act on space-domain signals")
    return SampledSignal(A.grid, A.matvec(f.values), "space", f.flags)


def adjoint(A: OperatorMatrix) -> OperatorMatrix:
    """Adjoint for the weighted inner product sum f conj(g) dx^n."""
    return A.adjoint()


def transpose(A: OperatorMatrix) -> OperatorMatrix:
    """Adjoint for the bilinear pairing sum f g dx^n, kernel K(y, x)."""
    return A.transpose()


def l2_operator_norm(A: OperatorMatrix) -> float:
    """Exact discrete L^2 -> L^2 norm (largest singular value)."""
    if A.is_dense or A.grid.size <= DENSE_LIMIT:
        return float(np.linalg.norm(A.dense(), 2))
    from scipy.sparse.linalg import LinearOperator, svds

    shape = A.grid.shape
    op = LinearOperator(
        (A.grid.size, A.grid.size),
        matvec=lambda v: A.matvec(v.reshape(shape)).ravel(),
        rmatvec=lambda v: A.adjoint().matvec(v.reshape(shape)).ravel(),
        dtype=complex,
    )
    return float(svds(op, k=1, return_singular_vectors=False, random_state=0)[0])


# ---------------------------------------------------------------------------
# kernels


def _periodic_offset(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Signed a - b wrapped into [-L, L)."""
    d = a - b
    return (d + grid.L) % (2 * grid.L) - grid.L


@dataclass(frozen=True, eq=False)
class KernelField:
    """Samples K(x_i, y_j) = A[i, j] / dx^n with a masked diagonal band."""

    grid: Grid
    values: np.ndarray
    d_min: float

    def distance(self, i, j) -> np.ndarray:
        grid = self.grid
        ii = np.unravel_index(np.asarray(i), grid.shape)
        jj = np.unravel_index(np.asarray(j), grid.shape)
        sq = 0.0
        for a in range(grid.n):
            sq = sq + _periodic_offset(grid, grid.x[ii[a]], grid.x[jj[a]]) ** 2
        return np.sqrt(sq)

    @property
    def diagonal_mask(self) -> np.ndarray:
        size = self.grid.size
        idx = np.arange(size)
        return self.distance(idx[:, None], idx[None, :]) < self.d_min

    def transposed(self) -> "KernelField":
        return KernelField(self.grid, self.values.T, self.d_min)

    # sampling interface used by czo_check (n = 1)
    def _draw(self, rng, count, r_range, x_window):
        grid = self.grid
        N = grid.N
        lo, hi = r_range
        r = np.exp(rng.uniform(math.log(lo), math.log(hi), count))
        i = rng.integers(0, N, count)
        sgn = rng.choice([-1, 1], count)
        j = (i + sgn * np.rint(r / grid.dx).astype(int)) % N
        u = np.exp(rng.uniform(math.log(2.0**-6), math.log(0.5), count))
        step = np.maximum(1, np.floor(u * np.rint(r / grid.dx)).astype(int))
        ip = (i + rng.choice([-1, 1], count) * step) % N
        return i, j, ip

    def _dist(self, a, b):
        return np.abs(_periodic_offset(self.grid, self.grid.x[a], self.grid.x[b]))

    def _deriv(self, i, j, order):
        if order == 0:
            return self.values[i, j]
        offs, w = _STENCILS[order]
        N = self.grid.N
        acc = 0
        for o, c in zip(offs, w):
            if c:
                acc = acc + c * self.values[(i + o) % N, j]
        return acc / self.grid.dx**order

    @property
    def _reach(self) -> float:
        return 3 * self.grid.dx

    def _default_range(self):
        return (max(self.d_min, self._reach + self.grid.dx), self.grid.L)


def kernel(A: OperatorMatrix, d_min: float | None = None) -> KernelField:
    grid = A.grid
    return KernelField(grid, A.dense() / grid.cell_volume, 4 * grid.dx if d_min is None else d_min)


class RadialTransformTable:
    """Derivatives of the inverse Fourier transform of an even 1-d profile.

    F_d(t) = (1/pi) int_0^inf p(r) r^d cos(t r + d pi/2) dr is tabulated for
    d <= 4 by one large FFT and read back through cubic Hermite
    interpolation of (F_d, F_{d+1}). Beyond ``t_cut`` every F_d is below
    ``rel`` times its maximum and is returned as 0.
    """

    def __init__(self, profile, radius: float, points: int = 2**21, dt_scale: float = 0.01, rel: float = 1e-15):
        from scipy.interpolate import CubicHermiteSpline

        dt = dt_scale / radius
        xi = np.fft.fftfreq(points, d=dt / (2 * math.pi))
        dxi = 2 * math.pi / (points * dt)
        prof = profile(np.abs(xi))
        half = points // 2
        t = dt * np.arange(half)
        tables = []
        for d in range(5):
            F = np.fft.ifft(prof * (1j * xi) ** d).real * points * dxi / (2 * math.pi)
            tables.append(F[:half])
        last = 0
        for F in tables[:4]:
            big = np.nonzero(np.abs(F) > rel * np.abs(F).max())[0]
            last = max(last, int(big[-1]) + 1)
        # keep the tabulated range well inside the FFT's half period
        last = min(last, int(0.8 * half))
        self.t_cut = float(t[last])
        self._splines = [
            CubicHermiteSpline(t[: last + 1], tables[d][: last + 1], tables[d + 1][: last + 1]) for d in range(4)
        ]

    def __call__(self, t, order: int = 0) -> np.ndarray:
        if not 0 <= order <= 3:
            raise PreconditionError("transform derivatives are tabulated up to order 3")
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        out = np.zeros(t.shape)
        keep = a <= self.t_cut
        out[keep] = self._splines[order](a[keep])
        if order % 2:
            out = np.where(t < 0, -out, out)
        return out


_TABLES: dict = {}


def _table(kind: str, source) -> RadialTransformTable:
    key = (kind, source)
    if key not in _TABLES:
        if kind == "eta":
            _TABLES[key] = RadialTransformTable(source.eta, source.eta_support[1])
        else:
            _TABLES[key] = RadialTransformTable(source, source.radius)
    return _TABLES[key]


class CounterexampleKernel:
    """Continuum kernel of the truncated counterexample operator (n = 1).

    K(x, y) = sum_j 2^{jm} B_j(x) 2^j H(2^j (x - y)) with H the inverse
    Fourier transform of the annulus cutoff and B_j the modulated bump
    sum. Both transforms come from FFT tables that carry their own
    derivatives, so no finite differences enter. ``transpose=True``
    gives K*(x, y) = K(y, x).
    """

    def __init__(self, cp: CounterexampleParams, transpose: bool = False, x_window=(-1.25, 1.25), r_range=None):
        if cp.n != 1:
            raise PreconditionError("the continuum kernel is implemented for n = 1")
        self.cp = cp
        self.transpose = transpose
        self.x_window = x_window
        if r_range is None:
            r_range = (2.0 ** (-cp.j_max - 3), 2.0 ** (-cp.j0 + 4))
        self.r_range = r_range
        self.H = _table("eta", PartitionFamily(n=1))
        self.Phi = _table("bump", cp.bump)
        self._bcache = {}

    def band(self, j: int, x, order: int = 0) -> np.ndarray:
        """d^order/dx^order of sum_{0<|k|<=s} e^{-ik(sx-k)} Phi(sx - k)."""
        x = np.asarray(x, dtype=float)
        key = (j, order, x.shape, hash(x.tobytes()))
        hit = self._bcache.get(key)
        if hit is not None:
            return hit
        s = self.cp.scale(j)
        out = np.zeros(x.shape, dtype=complex)
        for (k,) in self.cp.modulation_indices(j):
            u = s * x - k
            acc = 0
            for c in range(order + 1):
                acc = acc + comb(order, c) * (-1j * k) ** (order - c) * self.Phi(u, c)
            out += np.exp(-1j * k * u) * acc
        out *= s**order
        if len(self._bcache) > 64:
            self._bcache.clear()
        self._bcache[key] = out
        return out

    def deriv(self, x, y, order: int) -> np.ndarray:
        """d_x^order K(x, y), or of K(y, x) when transposed."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        cp = self.cp
        out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for j in range(cp.j0, cp.j_max + 1):
            a = 2.0 ** (j * cp.m)
            sj = 2.0**j
            if self.transpose:
                out += a * self.band(j, y) * sj ** (1 + order) * (-1) ** order * self.H(sj * (y - x), order)
            else:
                for b in range(order + 1):
                    out += (
                        a
                        * comb(order, b)
                        * self.band(j, x, b)
                        * sj ** (1 + order - b)
                        * self.H(sj * (x - y), order - b)
                    )
        return out

    def __call__(self, x, y):
        return self.deriv(x, y, 0)

    # sampling interface used by czo_check
    def _draw(self, rng, count, r_range, x_window):
        lo, hi = r_range
        r = np.exp(rng.uniform(math.log(lo), math.log(hi), count))
        x = rng.uniform(*x_window, count)
        y = x + rng.choice([-1.0, 1.0], count) * r
        u = np.exp(rng.uniform(math.log(2.0**-6), math.log(0.5), count))
        xp = x + rng.choice([-1.0, 1.0], count) * u * r
        return x, y, xp

    def _dist(self, a, b):
        return np.abs(np.asarray(a) - np.asarray(b))

    def _deriv(self, x, y, order):
        return self.deriv(x, y, order)

    def _default_range(self):
        return self.r_range

    @property
    def fit_window(self) -> tuple:
        """Resolved band for decay fits: two octaves above the finest band down to the coarsest."""
        return (2.0 ** (-self.cp.j_max + 2), 2.0 ** (-self.cp.j0))


# ---------------------------------------------------------------------------
# Calderon-Zygmund bound checks


@dataclass
class CzoCheckReport:
    ell: int
    epsilon: float
    status: str
    constants: dict
    drift: dict
    octave_constants: dict
    worst_violation_ratio: float
    sample_count: int
    seed: int
    octave_range: tuple
    drift_tol: float
    notes: str = ""

    @property
    def passed(self) -> bool:
        return self.status in ("pass", "trivial")

    def to_text(self) -> str:
        lines = [
            f"ell={self.ell}",
            f"epsilon={self.epsilon!r}",
            f"status={self.status}",
            f"sample_count={self.sample_count}",
            f"seed={self.seed}",
            f"drift_tol={self.drift_tol!r}",
            f"octave_range={self.octave_range[0]},{self.octave_range[1]}",
            f"worst_violation_ratio={self.worst_violation_ratio!r}",
        ]
        for name in sorted(self.constants):
            lines.append(f"constant.{name}={self.constants[name]!r}")
            lines.append(f"drift.{name}={self.drift[name]!r}")
            octs = ";".join(f"{o}:{c!r}" for o, c in self.octave_constants[name])
            lines.append(f"octaves.{name}={octs}")
        if self.notes:
            lines.append(f"notes={self.notes}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CzoCheckReport":
        kv = {}
        for line in text.splitlines():
            if line.strip():
                k, _, v = line.partition("=")
                kv[k] = v
        constants, drift, octaves = {}, {}, {}
        for k, v in kv.items():
            if k.startswith("constant."):
                constants[k[9:]] = float(v)
            elif k.startswith("drift."):
                drift[k[6:]] = float(v)
            elif k.startswith("octaves."):
                pairs = [p.split(":") for p in v.split(";") if p]
                octaves[k[8:]] = [(int(o), float(c)) for o, c in pairs]
        lo, hi = kv["octave_range"].split(",")
        return cls(
            ell=int(kv["ell"]),
            epsilon=float(kv["epsilon"]),
            status=kv["status"],
            constants=constants,
            drift=drift,
            octave_constants=octaves,
            worst_violation_ratio=float(kv["worst_violation_ratio"]),
            sample_count=int(kv["sample_count"]),
            seed=int(kv["seed"]),
            octave_range=(int(lo), int(hi)),
            drift_tol=float(kv["drift_tol"]),
            notes=kv.get("notes", ""),
        )


def _edge_drift(octs: list) -> float:
    """Worst growth rate (log2 per octave) into either end of the octave range."""
    o = np.array([a for a, _ in octs], dtype=float)
    c = np.log2(np.array([b for _, b in octs]))
    low = linear_fit(o[:3], c[:3]).slope
    high = linear_fit(o[-3:], c[-3:]).slope
    return float(max(-low, high))


def czo_check(
    K,
    ell: int,
    epsilon: float,
    seed: int = 0,
    samples: int = 4000,
    drift_tol: float = 0.25,
    r_range=None,
    x_window=None,
    floor: float = 1e-8,
    min_octaves: int = 3,
) -> CzoCheckReport:
    """Size, derivative and Hoelder-difference bounds of a kernel (n = 1).

    For each inequality the per-octave constant C_o = max |quantity| / shape
    is recorded over dyadic shells of |x - y|. The check passes when every
    inequality's constants stop growing toward both ends of the sampled
    range (edge slope of log2 C_o at most ``drift_tol`` per octave); fewer
    than ``min_octaves`` populated octaves is inconclusive. Quantities that
    never exceed ``floor`` pass trivially.
    """
    if ell < 0 or ell > 2:
        raise PreconditionError("ell must lie in {0, 1, 2}")
    if not 0 < epsilon < 1:
        raise PreconditionError("epsilon must lie in (0, 1)")
    grid = getattr(K, "grid", None)
    if grid is not None and grid.n != 1:
        raise PreconditionError("kernel bound checks are implemented for n = 1")
    rng = np.random.default_rng(seed)
    r_range = r_range or K._default_range()
    if x_window is None:
        x_window = getattr(K, "x_window", None)
    x, y, xp = K._draw(rng, samples, r_range, x_window)
    r = K._dist(x, y)
    h = K._dist(x, xp)
    ok = (r >= r_range[0]) & (r <= r_range[1]) & (r > 2 * h) & (h > 0)
    if isinstance(K, KernelField):
        ok &= (r >= K.d_min) & (K._dist(xp, y) >= K.d_min)
    x, y, xp, r, h = x[ok], y[ok], xp[ok], r[ok], h[ok]
    n = 1
    quantities = {"size": (np.abs(K._deriv(x, y, 0)), r ** (-n))}
    for a in range(1, ell + 1):
        quantities[f"deriv{a}"] = (np.abs(K._deriv(x, y, a)), r ** (-n - a))
    diff = np.abs(K._deriv(x, y, ell) - K._deriv(xp, y, ell))
    quantities["holder"] = (diff, h**epsilon * r ** (-n - ell - epsilon))

    octave = np.floor(np.log2(r)).astype(int)
    constants, drift, octs_out = {}, {}, {}
    trivial = True
    status = "pass"
    notes = []
    worst = 1.0
    for name, (q, shape) in quantities.items():
        ratio = q / shape
        per = []
        for o in np.unique(octave):
            sel = octave == o
            if np.count_nonzero(sel) >= 4:
                per.append((int(o), float(ratio[sel].max())))
        octs_out[name] = per
        constants[name] = float(ratio.max()) if ratio.size else 0.0
        if q.size and q.max() > floor:
            trivial = False
        positive = [(o, c) for o, c in per if c > 0]
        if len(positive) < min_octaves:
            drift[name] = float("nan")
            if q.size and q.max() > floor:
                status = "inconclusive"
                notes.append(f"{name}: only {len(positive)} populated octaves")
            continue
        drift[name] = _edge_drift(positive)
        cs = np.array([c for _, c in positive])
        worst = max(worst, float(cs.max() / np.median(cs)))
        if q.max() > floor and drift[name] > drift_tol and status != "inconclusive":
            status = "fail"
            notes.append(f"{name}: constant drifts by 2^{drift[name]:.3f} per octave at the range edge")
    if trivial:
        status = "trivial"
    lo_oct = int(math.floor(math.log2(r_range[0])))
    hi_oct = int(math.floor(math.log2(r_range[1])))
    return CzoCheckReport(
        ell, float(epsilon), status, constants, drift, octs_out, worst, int(r.size), seed,
        (lo_oct, hi_oct), drift_tol, "; ".join(notes),
    )


def kernel_decay_fit(K, seed: int = 0, samples: int = 4000, r_range=None, x_window=None) -> FitResult:
    """Log-log fit of the per-octave max |K(x, y)| against |x - y|."""
    rng = np.random.default_rng(seed)
    r_range = r_range or getattr(K, "fit_window", None) or K._default_range()
    if x_window is None:
        x_window = getattr(K, "x_window", None)
    x, y, _ = K._draw(rng, samples, r_range, x_window)
    r = K._dist(x, y)
    ok = (r >= r_range[0]) & (r <= r_range[1])
    x, y, r = x[ok], y[ok], r[ok]
    vals = np.abs(K._deriv(x, y, 0))
    octave = np.floor(np.log2(r)).astype(int)
    rs, ms = [], []
    for o in np.unique(octave):
        sel = octave == o
        if np.count_nonzero(sel) >= 4 and vals[sel].max() > 0:
            rs.append(2.0 ** (o + 0.5))
            ms.append(float(vals[sel].max()))
    return loglog_fit(rs, ms)


# ---------------------------------------------------------------------------
# polynomial images T(x^beta)


def _xi_derivative_at_zero(grid: Grid, b: np.ndarray, gamma: tuple, step: int = 2) -> complex:
    """d_xi^gamma of a frequency-domain array at xi = 0 by central differences."""
    c = grid.N // 2
    vals = b
    for axis, order in enumerate(gamma):
        if order == 0:
            vals = np.take(vals, [c], axis=axis)
            continue
        offs, w = _STENCILS[order]
        idx = c + offs * step
        if idx.min() < 0 or idx.max() >= grid.N:
            raise PreconditionError("grid too small for the stencil at xi = 0")
        taken = np.take(vals, idx, axis=axis)
        shape = [1] * taken.ndim
        shape[axis] = len(w)
        vals = np.sum(taken * w.reshape(shape), axis=axis, keepdims=True) / (step * grid.dxi) ** order
    return complex(vals.ravel()[0])


def _beta_list(n: int, beta_max: int):
    out = []
    for tot in range(beta_max + 1):
        for b in itertools.product(range(tot + 1), repeat=n):
            if sum(b) == tot:
                out.append(tuple(b))
    return out


def vanishing_moments(sigma: SymbolGrid, beta_max: int, x_panel=None, adjoint: bool = False) -> list:
    """sup over an x panel of |sigma(X, D)(x^beta)| for |beta| <= beta_max.

    The forward operator uses T(x^beta)(x) = (-i)^{|beta|} d_xi^beta
    (e^{i x.xi} sigma(x, xi)) at xi = 0, expanded by Leibniz so only sigma
    is differenced. ``adjoint=True`` needs a separable symbol and measures
    T^*(x^beta) = sum_t conj(b_t)(D)[x^beta conj(a_t)] through its Fourier
    transform conj(b_t)(xi) (i d_xi)^beta F[conj a_t](xi).
    """
    if beta_max > 3:
        raise PreconditionError("beta_max is capped at 3")
    grid = sigma.grid
    n = grid.n
    betas = _beta_list(n, beta_max)
    if adjoint:
        return _adjoint_moments(sigma, betas)
    if x_panel is None:
        stride = max(1, grid.N // 32)
        idx1 = np.arange(0, grid.N, stride)
        x_panel = np.ravel_multi_index(tuple(np.meshgrid(*([idx1] * n), indexing="ij")), grid.shape).ravel()
    x_panel = np.asarray(x_panel)
    xcoords = np.array([c.ravel()[x_panel] for c in grid.x_mesh()])  # (n, P)
    # d_xi^gamma sigma(x, 0) for every gamma <= beta_max
    dsig = {}
    if sigma.is_separable:
        for gamma in betas:
            acc = np.zeros(x_panel.size, dtype=complex)
            for a, b in sigma.terms:
                acc += a.ravel()[x_panel] * _xi_derivative_at_zero(grid, b, gamma)
            dsig[gamma] = acc
    else:
        D = sigma.dense.reshape((grid.size,) + grid.shape)[x_panel]
        for gamma in betas:
            acc = np.empty(x_panel.size, dtype=complex)
            for p in range(x_panel.size):
                acc[p] = _xi_derivative_at_zero(grid, D[p], gamma)
            dsig[gamma] = acc
    out = []
    for beta in betas:
        total = np.zeros(x_panel.size, dtype=complex)
        for gamma in itertools.product(*(range(b + 1) for b in beta)):
            coeff = math.prod(comb(b, g) for b, g in zip(beta, gamma))
            mono = np.ones(x_panel.size, dtype=complex)
            for a in range(n):
                mono = mono * (1j * xcoords[a]) ** (beta[a] - gamma[a])
            total += coeff * mono * dsig[gamma]
        value = (-1j) ** sum(beta) * total
        out.append((beta, float(np.max(np.abs(value)))))
    return out


def _adjoint_moments(sigma: SymbolGrid, betas) -> list:
    if not sigma.is_separable:
        raise PreconditionError("adjoint moments need a separable symbol")
    grid = sigma.grid
    out = []
    for beta in betas:
        worst = 0.0
        for a, b in sigma.terms:
            F = dft_array(grid, np.conj(a))
            for axis, order in enumerate(beta):
                for _ in range(order):
                    F = 1j * np.gradient(F, grid.dxi, axis=axis)
            worst = max(worst, float(np.max(np.abs(np.conj(b) * F))))
        out.append((beta, worst))
    return out


# ---------------------------------------------------------------------------
# symbol-piece operator norms


@dataclass
class PieceDecayReport:
    ratios: dict  # (j, k, ell, p) -> sup ratio
    k_exponent: float
    j_exponent: float
    k_fit: FitResult | None
    j_fit: FitResult | None
    skipped: list = field(default_factory=list)
    notes: str = ""


def _panel(grid: Grid, centers, count: int, seed: int) -> np.ndarray:
    """Gabor atoms at each center frequency plus seeded band-limited noise."""
    rng = np.random.default_rng(seed)
    x = grid.x_mesh()
    r2 = sum(c**2 for c in x)
    out = []
    for c in centers:
        for width in (1.0, 4.0):
            ph = sum(ci * xi for ci, xi in zip(c, x))
            out.append(np.exp(-r2 / (2 * width**2) + 1j * ph))
    XI = grid.xi_mesh()
    for _ in range(count):
        spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        spec *= np.exp(-sum(c**2 for c in XI) / (2 * (0.5 * grid.xi_max) ** 2))
        out.append(idft_array(grid, spec))
    return np.array(out)


def piece_kernel_decay(
    sigma: SymbolGrid,
    P: PartitionFamily,
    sample,
    delta: float,
    p_values=(2, 4),
    panel_size: int = 8,
    seed: int = 0,
    zero_tol: float = 1e-12,
) -> PieceDecayReport:
    """sup_f ||sigma_j^{k,ell}(X, D) f||_p / ||f||_p over a fixed panel.

    The k-exponent is the slope of log ratio against log(1 + |k|) at the
    smallest sampled j; the j-exponent is the slope of log2 ratio against j
    at k = 0. A k-fit whose k != 0 ratios are all below ``zero_tol`` times
    the k = 0 ratio returns -inf: those pieces vanish.
    """
    grid = sigma.grid
    ratios = {}
    skipped = []
    for j, k, ell in sample:
        piece = symbol_piece(sigma, P, j, k, ell, delta)
        if piece.info.get("empty"):
            skipped.append((j, tuple(k), tuple(ell)))
            for p in p_values:
                ratios[(j, tuple(k), tuple(ell), p)] = 0.0
            continue
        A = quantize(piece)
        centers = [tuple(2.0 ** (j * delta) * np.asarray(ell, dtype=float))]
        panel = _panel(grid, centers, panel_size, seed)
        images = A.matvec(panel)
        for p in p_values:
            best = 0.0
            for f, g in zip(panel, images):
                nf = lp_norm(SampledSignal(grid, f), p)
                if nf > 0:
                    best = max(best, lp_norm(SampledSignal(grid, g), p) / nf)
            ratios[(j, tuple(k), tuple(ell), p)] = best

    def sup_over(pred):
        vals = {}
        for (j, k, ell, p), v in ratios.items():
            if pred(j, k):
                key = (j, k)
                vals[key] = max(vals.get(key, 0.0), v)
        return vals

    notes = []
    js = sorted({j for j, _, _ in sample})
    k_fit = j_fit = None
    k_exp = j_exp = float("nan")
    if js:
        j_ref = js[0]
        at_j = sup_over(lambda j, k: j == j_ref)
        zero_key = (j_ref, (0,) * grid.n)
        base = at_j.get(zero_key, 0.0)
        nonzero = {k: v for (j, k), v in at_j.items() if any(k)}
        if nonzero:
            if base > 0 and all(v <= zero_tol * base for v in nonzero.values()):
                k_exp = float("-inf")
                notes.append("k != 0 pieces vanish to round-off")
            else:
                ks = [(1 + math.sqrt(sum(c * c for c in k)), v) for k, v in nonzero.items() if v > 0]
                if zero_key in at_j and base > 0:
                    ks.append((1.0, base))
                if len(ks) >= 2:
                    k_fit = loglog_fit([a for a, _ in ks], [b for _, b in ks])
                    k_exp = k_fit.slope
        at_k0 = sup_over(lambda j, k: not any(k))
        pts = sorted((j, v) for (j, _), v in at_k0.items() if v > 0)
        if len(pts) >= 2:
            j_fit = linear_fit([a for a, _ in pts], [math.log2(b) for _, b in pts])
            j_exp = j_fit.slope
    return PieceDecayReport(ratios, k_exp, j_exp, k_fit, j_fit, skipped, "; ".join(notes))
