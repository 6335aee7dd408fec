"""Experiment harnesses: scaling fits, growth probes, and operator-norm search."""

from __future__ import annotations

import math
import warnings
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from ..fitting import FitResult, linear_fit, loglog_fit
from ..grid import Grid, PreconditionError, SampledSignal, dft_array, dilate, idft_array, lp_norm, modulate
from ..indices import ExponentPair, critical_order, mu1, mu2
from ..quantize import OperatorMatrix, apply, quantize
from ..symbols import (
    CounterexampleParams,
    TruncationWarning,
    bessel_symbol,
    counterexample_symbol,
)
from ..tfa import Window, _outer, gaussian_window, modulation_norm

__all__ = [
    "DilationResult",
    "dilation_scaling",
    "BesselResult",
    "bessel_growth",
    "TestMember",
    "test_family",
    "OpnormResult",
    "opnorm_lower_bound",
    "SweepRow",
    "SweepResult",
    "SubcriticalError",
    "unboundedness_sweep",
    "band_limited_signal",
    "gaussian_signal",
]


# ---------------------------------------------------------------------------
# dilation


@dataclass
class DilationResult:
    fit: FitResult
    branch: str  # "up" (a >= 1) or "down" (a <= 1)
    bound: float
    consistent: bool
    a_values: tuple
    ratios: tuple


def dilation_scaling(
    f: SampledSignal,
    e: ExponentPair,
    a_values,
    window: Window | None = None,
    tol: float = 0.1,
) -> DilationResult:
    """Fit log(||f(a.)||_M / ||f||_M) against log a and compare with the index bound.

    a >= 1 must stay below n mu1 + tol; a <= 1 must stay above n mu2 - tol.
    """
    a_values = tuple(float(a) for a in a_values)
    if len(set(a_values)) < 2:
        raise PreconditionError("dilation fit needs at least two distinct factors")
    if all(1 <= a <= 16 for a in a_values):
        branch = "up"
    elif all(1 / 16 <= a <= 1 for a in a_values):
        branch = "down"
    else:
        raise PreconditionError("dilation factors must all lie in [1, 16] or all in [1/16, 1]")
    window = window or gaussian_window(f.grid)
    base = modulation_norm(f, window, e)
    if base == 0:
        raise PreconditionError("cannot normalize by a zero signal")
    ratios = []
    for a in a_values:
        g = dilate(f, a)
        bad = g.flags & {"wraparound", "aliasing"}
        if bad:
            raise PreconditionError(f"dilation by a={a!r} violates the box precondition ({', '.join(sorted(bad))})")
        ratios.append(modulation_norm(g, window, e) / base)
    fit = loglog_fit(a_values, ratios)
    n = f.grid.n
    if branch == "up":
        bound = n * float(mu1(e)) + tol
        ok = fit.slope <= bound
    else:
        bound = n * float(mu2(e)) - tol
        ok = fit.slope >= bound
    return DilationResult(fit, branch, bound, bool(ok), a_values, tuple(ratios))


# ---------------------------------------------------------------------------
# Bessel multiplier growth


@dataclass
class BesselResult:
    fit: FitResult
    k_values: tuple
    ratios: tuple


def bessel_growth(m: float, k_values, f: SampledSignal, band: float = 0.5, mass_tol: float = 1e-12) -> BesselResult:
    """||sigma(D) M_k f||_2 / ||M_k f||_2 for sigma = (1 + |xi|^2)^{m/2}, fitted against |k|."""
    grid = f.grid
    F = dft_array(grid, f.values)
    r = np.sqrt(sum(c**2 for c in grid.xi_mesh()))
    total = float(np.sum(np.abs(F) ** 2))
    outside = float(np.sum(np.abs(F[r > band]) ** 2))
    if total == 0:
        raise PreconditionError("test signal is zero")
    if outside > mass_tol * total:
        raise PreconditionError(f"hat f carries relative L^2 mass {outside / total:.3e} outside |xi| <= {band}")
    k_values = tuple(float(k) for k in k_values)
    if max(abs(k) for k in k_values) + band >= grid.xi_max:
        raise PreconditionError("largest modulation pushes the band past the grid's Nyquist frequency")
    A = quantize(bessel_symbol(m, grid), matrix_free=True)
    ratios = []
    for k in k_values:
        shift = np.zeros(grid.n)
        shift[0] = k
        g = modulate(f, shift if grid.n > 1 else k)
        ratios.append(lp_norm(apply(A, g), 2) / lp_norm(g, 2))
    fit = loglog_fit([abs(k) for k in k_values], ratios)
    return BesselResult(fit, k_values, tuple(ratios))


# ---------------------------------------------------------------------------
# operator-norm lower bounds


@dataclass(frozen=True)
class TestMember:
    kind: str
    values: np.ndarray


def _gauss(grid: Grid, center, width) -> np.ndarray:
    r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.x_mesh(), center))
    return np.exp(-r2 / (2 * width**2))


def _plane(grid: Grid, freq) -> np.ndarray:
    return np.exp(1j * sum(c * w for c, w in zip(grid.x_mesh(), freq)))


def _snap(grid: Grid, v, spacing) -> np.ndarray:
    return np.rint(np.asarray(v, dtype=float) / spacing) * spacing


def _member(grid: Grid, window: Window, seed: int, i: int, scales) -> TestMember:
    """The i-th family member; depends only on (seed, i), so families are nested in size."""
    rng = np.random.default_rng([seed, i])
    n = grid.n
    kind = ("atom", "lattice", "noise")[i % 3]
    if scales:
        dxs, dxi, center, width, xspan = scales[(i // 3) % len(scales)]
    else:
        dxs = 2.0 ** rng.uniform(-2, 1)
        dxi = 2.0 ** rng.uniform(0, 2)
        center = rng.uniform(-0.5, 0.5) * grid.xi_max
        width = 2.0 ** rng.uniform(-1, 1)
        xspan = grid.L / 4
    if kind == "atom":
        # M_xi0 T_x0 of the analysis window itself; member 0 sits at the top lattice frequency
        if i == 0:
            x0 = np.zeros(n)
            xi0 = np.full(n, -grid.xi_max)
        elif scales:
            x0 = _snap(grid, rng.uniform(-xspan, xspan, n), grid.dx)
            xi0 = _snap(grid, center + rng.uniform(-4, 4, n) * dxi, grid.dxi)
        else:
            x0 = _snap(grid, rng.uniform(-grid.L / 2, grid.L / 2, n), grid.dx)
            xi0 = _snap(grid, rng.uniform(-grid.xi_max, grid.xi_max, n), grid.dxi)
        idx = tuple(int(v) for v in np.rint(x0 / grid.dx))
        vals = np.roll(window.signal.values, idx, axis=tuple(range(n))) * _plane(grid, xi0)
        return TestMember(kind, vals)
    if kind == "lattice":
        # signed Gaussians on a position lattice, one comb per frequency, convolved by FFT
        A = int(math.floor(xspan / dxs))
        B = int(rng.integers(0, 4))
        env = _gauss(grid, (0.0,) * n, width)
        env_hat = np.fft.fftn(np.fft.ifftshift(env))
        steps = np.rint(np.arange(-A, A + 1) * dxs / grid.dx).astype(int) + grid.N // 2
        steps = steps[(steps >= 0) & (steps < grid.N)]
        idx = np.array(np.meshgrid(*([steps] * n), indexing="ij")).reshape(n, -1)
        vals = np.zeros(grid.shape, dtype=complex)
        for w in center + np.arange(-B, B + 1) * dxi:
            comb = np.zeros(grid.shape)
            comb[tuple(idx)] = rng.choice([-1.0, 1.0], size=idx.shape[1])
            bumps = np.fft.fftshift(np.fft.ifftn(np.fft.fftn(np.fft.ifftshift(comb)) * env_hat))
            vals += bumps * _plane(grid, (w,) + (0.0,) * (n - 1))
        return TestMember(kind, vals)
    # band-limited noise around the center frequency, Gaussian envelope in x
    XI = grid.xi_mesh()
    bw = dxi * (1 + 3 * rng.random())
    spec = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    d2 = (XI[0] - center) ** 2 + sum(c**2 for c in XI[1:])
    spec = spec * np.exp(-d2 / (2 * bw**2))
    vals = idft_array(grid, spec) * _gauss(grid, (0.0,) * n, max(xspan, width))
    return TestMember(kind, vals)


def test_family(grid: Grid, window: Window, size: int, seed: int, scales=None) -> list[TestMember]:
    """Seeded Gabor atoms, random-sign lattice superpositions, and band-limited noise.

    ``scales`` is an optional list of (position spacing, frequency spacing,
    center frequency, atom width, position span) tuples steering the
    lattice members.
    """
    return [_member(grid, window, seed, i, scales) for i in range(size)]


class _NormEngine:
    """M^{p,q} norms of linear combinations of fixed vectors."""

    def __init__(self, grid: Grid, window: Window, e: ExponentPair):
        self.grid, self.window, self.e = grid, window, e
        self.spectral = e.p == 2
        if self.spectral:
            # FFT of |hat gamma|^2, reused by every correlation
            Pg = np.fft.ifftshift(np.abs(dft_array(grid, window.signal.values)) ** 2)
            self._g_fft = np.conj(np.fft.fftn(Pg))

    def prepare(self, values: np.ndarray) -> np.ndarray:
        return dft_array(self.grid, values) if self.spectral else values

    def norm(self, prepared: np.ndarray) -> float:
        if self.spectral:
            Pf = np.fft.ifftshift(np.abs(prepared) ** 2)
            corr = np.fft.fftshift(np.fft.ifftn(np.fft.fftn(Pf) * self._g_fft).real)
            corr *= (self.grid.dxi / (2 * math.pi)) ** self.grid.n
            inner = np.sqrt(np.maximum(corr, 0.0).ravel())
            return _outer(inner, self.e.q, self.grid.frequency_cell_volume)
        return modulation_norm(SampledSignal(self.grid, prepared), self.window, self.e)


@dataclass
class OpnormResult:
    value: float
    best_member: int
    best_individual: float
    refined: float
    ratios: tuple
    coefficients: tuple
    best_vector: np.ndarray | None = field(default=None, repr=False)


def _ratio(engine: _NormEngine, pf, pAf) -> float:
    nf = engine.norm(pf)
    if nf == 0:
        return 0.0
    return engine.norm(pAf) / nf


def opnorm_lower_bound(
    A: OperatorMatrix,
    e: ExponentPair,
    window: Window | None = None,
    family_size: int = 64,
    refine_steps: int = 50,
    seed: int = 0,
    scales=None,
    core: int = 8,
    extra=None,
) -> OpnormResult:
    """max ||Af||_M / ||f||_M over a seeded test family plus coordinate ascent.

    The ascent runs over combinations of the first ``core`` members,
    starting from the best of them, and only accepts improvements. Both
    the family (nested in ``family_size``) and the ascent trajectory
    (a prefix in ``refine_steps``) are deterministic, so the result never
    decreases when either parameter grows. ``extra`` adds caller-supplied
    candidate vectors (e.g. a previous incumbent).
    """
    if family_size < 8:
        raise PreconditionError("family_size must be at least 8")
    grid = A.grid
    window = window or gaussian_window(grid)
    engine = _NormEngine(grid, window, e)
    K = min(core, family_size)
    extra = [] if extra is None else [np.asarray(v, dtype=complex).reshape(grid.shape) for v in extra]
    # stream the family: only the core is kept for the ascent
    pf, pAf, ratios = [], [], []
    best_i, best_individual, best_vec = -1, -math.inf, None
    for i in range(family_size + len(extra)):
        v = _member(grid, window, seed, i, scales).values if i < family_size else extra[i - family_size]
        a, b = engine.prepare(v), engine.prepare(A.matvec(v))
        r = _ratio(engine, a, b)
        ratios.append(r)
        if i < K:
            pf.append(a)
            pAf.append(b)
        if r > best_individual:
            best_i, best_individual, best_vec = i, r, v

    c = np.zeros(K, dtype=complex)
    c[int(np.argmax(ratios[:K]))] = 1.0
    cur = max(ratios[:K])
    moves = (1.0, -1.0, 1j, -1j)
    for t in range(refine_steps):
        i = t % K
        step = 2.0 ** -(t // K)
        best_c, best_v = None, cur
        for mv in moves:
            trial = c.copy()
            trial[i] += step * mv
            vf = sum(trial[k] * pf[k] for k in range(K))
            vA = sum(trial[k] * pAf[k] for k in range(K))
            r = _ratio(engine, vf, vA)
            if r > best_v:
                best_c, best_v = trial, r
        if best_c is not None:
            c, cur = best_c, best_v
    refined = float(cur)
    if refined > best_individual:
        value = refined
        if engine.spectral:
            best_vec = idft_array(grid, sum(c[k] * pf[k] for k in range(K)))
        else:
            best_vec = sum(c[k] * pf[k] for k in range(K))
    else:
        value = float(best_individual)
    return OpnormResult(
        value, best_i, float(best_individual), refined, tuple(float(r) for r in ratios), tuple(c.tolist()), best_vec
    )


# ---------------------------------------------------------------------------
# unboundedness sweep


class SubcriticalError(PreconditionError):
    """Requested order does not exceed the critical order."""


@dataclass
class SweepRow:
    j_max: int
    lower_bound: float
    best_individual: float
    refined: float
    best_member: int


@dataclass
class SweepResult:
    exponents: ExponentPair
    delta: float
    m: float
    critical: float
    j0: int
    probe: str
    rows: list
    monotone: bool
    growth_ratio: float


def counterexample_scales(cp: CounterexampleParams, j: int, L: float) -> tuple:
    """Lattice geometry matched to band j: spacing 1/s in x, s in xi, centered at 2^j."""
    s = cp.scale(j)
    return (1.0 / s, s, 2.0**j, 1.0 / s, min(1.25, L / 2))


def unboundedness_sweep(
    e: ExponentPair,
    delta: float,
    m: float,
    j_max_values,
    n: int = 1,
    grid: Grid | None = None,
    family_size: int = 64,
    refine_steps: int = 50,
    seed: int = 0,
    window: Window | None = None,
    allow_subcritical: bool = False,
    j0: int | None = None,
) -> SweepResult:
    """Operator-norm lower bounds of truncated counterexample operators as j_max grows.

    For q > 2 the operator itself is probed on M^{p,q}; for q < 2 its
    discrete adjoint is probed on M^{p',q'}, which has the same norm.
    ``allow_subcritical`` runs the sweep at or below the critical order as
    a control.
    """
    if e.inv_q == Fraction(1, 2):
        raise PreconditionError("q = 2 is excluded: M^{2,2} = L^2 and the sweep has nothing to detect there")
    crit = critical_order(e, delta, n)
    if m <= crit.value and not allow_subcritical:
        raise SubcriticalError(
            f"m={m} does not exceed the critical order {float(crit.value):.6g} = -(mu1 - mu2) delta n; "
            "operators of this order are bounded, so the growth probe is meaningless (use the control mode)"
        )
    j_max_values = [int(j) for j in j_max_values]
    if any(b <= a for a, b in zip(j_max_values, j_max_values[1:])):
        raise PreconditionError("j_max values must increase")
    grid = grid or Grid(n, 2**19, 16.0)
    window = window or gaussian_window(grid)
    base = CounterexampleParams(m, delta, n, j0=j0, j_max=None)
    probe = "adjoint" if e.inv_q > Fraction(1, 2) else "operator"
    e_probe = e.conjugate() if probe == "adjoint" else e
    rows = []
    incumbent = None
    for J in j_max_values:
        cp = CounterexampleParams(m, delta, n, j0=base.j0, j_max=J, bump=base.bump)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            sym = counterexample_symbol(cp, grid)
        A = quantize(sym, matrix_free=True)
        if probe == "adjoint":
            A = A.adjoint()
        scales = [counterexample_scales(cp, j, grid.L) for j in range(cp.j0, J + 1)]
        res = opnorm_lower_bound(
            A,
            e_probe,
            window,
            family_size,
            refine_steps,
            seed,
            scales=scales,
            extra=None if incumbent is None else [incumbent],
        )
        incumbent = res.best_vector
        rows.append(SweepRow(J, res.value, res.best_individual, res.refined, res.best_member))
    vals = [r.lower_bound for r in rows]
    monotone = all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    growth = vals[-1] / vals[0] if vals and vals[0] > 0 else float("nan")
    return SweepResult(e, delta, m, float(crit.value), base.j0, probe, rows, monotone, growth)


# ---------------------------------------------------------------------------
# test signals


def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def band_limited_signal(grid: Grid, band: float = 0.5, seed: int | None = None) -> SampledSignal:
    """A signal whose transform vanishes outside |xi| < band.

    With ``seed=None`` the transform is the radial bump exp(-1/(1 - |xi/band|^2));
    otherwise that bump is multiplied by seeded complex Gaussian coefficients.
    """
    r = np.sqrt(sum(c**2 for c in grid.xi_mesh()))
    spec = _bump(r / band).astype(complex)
    if seed is not None:
        rng = np.random.default_rng(seed)
        spec *= rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return SampledSignal(grid, idft_array(grid, spec))


def gaussian_signal(grid: Grid, width: float = 1.0) -> SampledSignal:
    return SampledSignal(grid, _gauss(grid, (0.0,) * grid.n, width).astype(complex))
