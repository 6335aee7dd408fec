import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modspace import Grid, PreconditionError, SampledSignal
from modspace.grid import dft_array, idft_array
from modspace.quantize import (
    CounterexampleKernel,
    CzoCheckReport,
    KernelField,
    OperatorMatrix,
    RadialTransformTable,
    adjoint,
    apply,
    czo_check,
    kernel,
    kernel_decay_fit,
    l2_operator_norm,
    piece_kernel_decay,
    quantize,
    transpose,
    vanishing_moments,
)
from modspace.symbols import (
    CounterexampleParams,
    PartitionFamily,
    SymbolClassParams,
    SymbolGrid,
    TruncationWarning,
    bessel_symbol,
    build_partitions,
    counterexample_symbol,
    custom_symbol,
    multiplier_symbol,
)


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 128, 8.0)


def rand(rng, grid):
    return rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)


def generic_symbol(grid):
    return custom_symbol(
        grid,
        lambda xs, xis: (1 + 0.5 * np.sin(xs[0])) * np.exp(-0.1 * xis[0] ** 2) + 0.2j * np.cos(xs[0] * 0.3) / (1 + xis[0] ** 2),
        SymbolClassParams(0.0),
    )


def test_unit_symbol_is_identity(grid):
    one = custom_symbol(grid, lambda xs, xis: np.ones((xs[0].shape[0], xis[0].shape[1])), SymbolClassParams(0.0))
    A = quantize(one)
    assert np.max(np.abs(A.dense() - np.eye(grid.size))) < 1e-12


def test_dense_matches_brute_force_sum(grid):
    sigma = generic_symbol(grid)
    A = quantize(sigma).dense()
    x, xi = grid.x, grid.xi
    const = grid.dx * grid.dxi / (2 * math.pi)
    ref = np.einsum("ik,ik,kj->ij", np.exp(1j * np.outer(x, xi)), sigma.values, np.exp(-1j * np.outer(xi, x))) * const
    assert np.max(np.abs(A - ref)) < 1e-12


def test_multiplier_is_diagonal_in_frequency(grid):
    b = np.exp(-grid.xi**2 / 20) * (1 + 0.5j * np.sin(grid.xi))
    A = quantize(multiplier_symbol(grid, b, SymbolClassParams(0.0)), matrix_free=False)
    f = rand(np.random.default_rng(0), grid)
    got = dft_array(grid, A.matvec(f))
    assert np.max(np.abs(got - b * dft_array(grid, f))) < 1e-10


def test_multiplication_symbol(grid):
    a = np.cos(grid.x)
    sigma = SymbolGrid(grid, SymbolClassParams(0.0), "custom", terms=((a, np.ones(grid.shape)),))
    f = rand(np.random.default_rng(1), grid)
    assert np.allclose(quantize(sigma, matrix_free=False).matvec(f), a * f, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_adjoint_pairing(seed):
    g = Grid(1, 64, 6.0)
    A = quantize(generic_symbol(g))
    rng = np.random.default_rng(seed)
    f, h = rand(rng, g), rand(rng, g)
    lhs = np.vdot(h, A.matvec(f))
    rhs = np.vdot(adjoint(A).matvec(h), f)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_matrix_free_forms_agree_with_dense(grid):
    rng = np.random.default_rng(2)
    a1, a2 = rand(rng, grid), rand(rng, grid)
    b1, b2 = np.exp(-grid.xi**2 / 30), 1 / (1 + grid.xi**2)
    sigma = SymbolGrid(grid, SymbolClassParams(0.0), "custom", terms=((a1, b1), (a2, b2)))
    Mf = quantize(sigma, matrix_free=True)
    D = quantize(sigma, matrix_free=False)
    for op_mf, op_d in [
        (Mf, D),
        (Mf.adjoint(), D.adjoint()),
        (transpose(Mf), transpose(D)),
        (Mf.scaled(2 - 1j), D.scaled(2 - 1j)),
        (Mf.adjoint().scaled(1j), D.adjoint().scaled(1j)),
        (transpose(Mf).scaled(3j), transpose(D).scaled(3j)),
    ]:
        assert np.max(np.abs(op_mf.dense() - op_d.dense())) < 1e-12 * np.max(np.abs(op_d.dense()))
    assert np.allclose(Mf.row(5), D.dense()[5], atol=1e-12)


def test_l2_norm_of_bessel_multiplier(grid):
    A = quantize(bessel_symbol(1.0, grid))
    assert l2_operator_norm(A) == pytest.approx(math.sqrt(1 + grid.xi_max**2), rel=1e-12)


def test_apply_checks_grid(grid):
    A = quantize(bessel_symbol(0.0, grid))
    with pytest.raises(Exception):
        apply(A, SampledSignal(Grid(1, 64, 8.0), np.ones(64)))


def test_dense_limit():
    g = Grid(1, 8192, 8.0)
    with pytest.raises(PreconditionError):
        quantize(custom_symbol(Grid(1, 8, 1.0), lambda xs, xis: xs[0] + xis[0], SymbolClassParams(1.0)).__class__(
            g, SymbolClassParams(0.0), "custom", terms=((np.ones(g.shape), np.ones(g.shape)),)
        ), matrix_free=False)


# ---------------------------------------------------------------------------
# kernels


def test_radial_table_matches_quadrature():
    P = PartitionFamily()
    T = RadialTransformTable(P.eta, P.eta_support[1])
    r = np.linspace(0, P.eta_support[1], 200001)
    w = np.full(r.size, r[1] - r[0])
    w[[0, -1]] *= 0.5
    prof = P.eta(r) * w
    for t in (0.0, 0.7, 3.3, 12.0):
        for d in range(4):
            ref = np.sum(prof * r**d * np.cos(t * r + d * math.pi / 2)) / math.pi
            assert T(np.array([t]), d)[0] == pytest.approx(ref, abs=1e-10)
    # odd derivatives are odd in t
    assert T(np.array([-2.0]), 1)[0] == pytest.approx(-T(np.array([2.0]), 1)[0])


def test_continuum_kernel_matches_discrete_columns():
    cp = CounterexampleParams(-0.1, 0.5)
    g = Grid(1, 2**18, 32.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        A = quantize(counterexample_symbol(cp, g), matrix_free=True)
    K, KT = CounterexampleKernel(cp), CounterexampleKernel(cp, transpose=True)
    for jy in (g.N // 2, g.N // 2 + 2**12):
        e = np.zeros(g.N, dtype=complex)
        e[jy] = 1.0
        sel = (np.abs(g.x) < 1.25) & (np.abs(g.x - g.x[jy]) > 0.01)
        y = np.full(sel.sum(), g.x[jy])
        col = A.matvec(e)[sel] / g.dx
        ref = K(g.x[sel], y)
        assert np.max(np.abs(col - ref)) < 1e-3 * np.max(np.abs(ref))
        colT = transpose(A).matvec(e)[sel] / g.dx
        refT = KT(g.x[sel], y)
        assert np.max(np.abs(colT - refT)) < 1e-3 * np.max(np.abs(refT))


@pytest.fixture(scope="module")
def ce_kernel():
    base = CounterexampleParams(-0.1, 0.5)
    return CounterexampleParams(-0.1, 0.5, j0=base.j0, j_max=base.j0 + 8)


@pytest.mark.parametrize("ell", [0, 1])
@pytest.mark.parametrize("transposed", [False, True])
def test_czo_check_passes_on_counterexample(ce_kernel, ell, transposed):
    rep = czo_check(CounterexampleKernel(ce_kernel, transpose=transposed), ell, 0.5, seed=0, samples=3000)
    assert rep.status == "pass", rep.to_text()
    assert CzoCheckReport.from_text(rep.to_text()) == rep


def test_czo_check_rejects_weak_singularity():
    g = Grid(1, 512, 16.0)
    d = np.abs(g.x[:, None] - g.x[None, :])
    d = np.minimum(d, 2 * g.L - d)
    with np.errstate(divide="ignore"):
        vals = np.where(d > 0, d**-0.5, 0.0)
    rep = czo_check(KernelField(g, vals, 4 * g.dx), 0, 0.5)
    assert rep.status == "fail"


def test_czo_check_trivial_for_identity():
    g = Grid(1, 256, 8.0)
    K = kernel(OperatorMatrix(g, np.eye(g.size)))
    assert czo_check(K, 0, 0.5).status == "trivial"


def test_czo_check_limits(ce_kernel):
    with pytest.raises(PreconditionError):
        czo_check(CounterexampleKernel(ce_kernel), 3, 0.5)


def test_kernel_decay_slope(ce_kernel):
    fit = kernel_decay_fit(CounterexampleKernel(ce_kernel), seed=0, samples=3000)
    # |K| ~ |x - y|^{-(1 + m)} in the resolved window
    assert -1.3 <= fit.slope <= -0.7


# ---------------------------------------------------------------------------
# polynomial images


def test_vanishing_moments_of_counterexample():
    cp = CounterexampleParams(-0.1, 0.5)
    g = Grid(1, 16384, 4.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        sigma = counterexample_symbol(cp, g)
    for adj in (False, True):
        vals = vanishing_moments(sigma, 3, adjoint=adj)
        assert len(vals) == 4
        assert max(v for _, v in vals) < 1e-12


def test_moments_detect_nonvanishing_symbol():
    g = Grid(1, 256, 8.0)
    sigma = bessel_symbol(2.0, g)
    # (1 + |D|^2) applied to 1 is 1 and to x^2 is x^2 - 2
    vals = dict(vanishing_moments(sigma, 2))
    assert vals[(0,)] == pytest.approx(1.0, abs=1e-9)
    assert vals[(1,)] > 0.1
    with pytest.raises(PreconditionError):
        vanishing_moments(sigma, 4)


# ---------------------------------------------------------------------------
# piece norms


def test_piece_decay_for_bessel():
    g = Grid(1, 512, 16.0)
    P = build_partitions(g)
    sigma = bessel_symbol(1.0, g)
    sample = [(1, (k,), (3,)) for k in (0, 1, 2, 4, 8)] + [(j, (0,), (round(1.5 * 2**j),)) for j in (2, 3, 4, 5)]
    rep = piece_kernel_decay(sigma, P, sample, 0.0)
    assert rep.k_exponent == float("-inf")
    assert rep.j_exponent <= 1.2
    assert rep.j_exponent == pytest.approx(1.0, abs=0.1)
