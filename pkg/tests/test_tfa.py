import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modspace import (
    ExponentPair,
    Grid,
    PreconditionError,
    SampledSignal,
    band_norm,
    bump_window,
    gaussian_window,
    lp_norm,
    mixed_lpq_norm,
    modulation_norm,
    stft,
)
from modspace.experiments.engine import band_limited_signal
from modspace.symbols import build_partitions


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 128, 8.0)


def test_stft_of_gaussian_pair_matches_closed_form(grid):
    # int e^{-t^2/2} e^{-(t-x)^2/2} e^{-i xi t} dt = sqrt(pi) e^{-x^2/4 - xi^2/4 - i x xi / 2}
    f = SampledSignal.from_function(grid, lambda x: np.exp(-x**2 / 2))
    g = gaussian_window(grid, normalize=False)
    V = stft(f, g).values
    X, XI = np.meshgrid(grid.x, grid.xi, indexing="ij")
    exact = math.sqrt(math.pi) * np.exp(-X**2 / 4 - XI**2 / 4 - 1j * X * XI / 2)
    inner = (np.abs(X) < 5) & (np.abs(XI) < 10)
    assert np.max(np.abs(V - exact)[inner]) < 1e-12


def test_stft_matches_brute_force_sum(grid):
    rng = np.random.default_rng(1)
    f = SampledSignal(grid, rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N))
    g = gaussian_window(grid)
    V = stft(f, g).values
    for a in (0, 17, 64, 127):
        for k in (0, 5, 99):
            shifted = np.roll(g.signal.values, a - grid.N // 2)
            ref = np.sum(f.values * np.conj(shifted) * np.exp(-1j * grid.xi[k] * grid.x)) * grid.dx
            assert abs(V[a, k] - ref) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_m22_equals_scaled_l2(seed):
    g = Grid(1, 128, 8.0)
    f = band_limited_signal(g, band=0.3 * g.xi_max, seed=seed)
    win = gaussian_window(g)
    ratio = modulation_norm(f, win, ExponentPair(2, 2)) / (math.sqrt(2 * math.pi) * lp_norm(f, 2))
    assert ratio == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p,q", [(2, 2), (2, 4), (2, 1.5), (2, math.inf)])
def test_spectral_route_matches_direct(grid, p, q):
    f = band_limited_signal(grid, band=4.0, seed=7)
    win = gaussian_window(grid)
    e = ExponentPair(p, q)
    a = modulation_norm(f, win, e, method="spectral")
    b = modulation_norm(f, win, e, method="direct")
    assert a == pytest.approx(b, rel=1e-12)
    assert b == pytest.approx(mixed_lpq_norm(stft(f, win), e), rel=1e-12)


def test_norm_homogeneity_and_window_equivalence(grid):
    f = band_limited_signal(grid, band=4.0, seed=3)
    e = ExponentPair(3, 4)
    g1, g2 = gaussian_window(grid), bump_window(grid)
    n1 = modulation_norm(f, g1, e)
    assert modulation_norm(f * 3.0, g1, e) == pytest.approx(3 * n1, rel=1e-12)
    assert 0.1 < modulation_norm(f, g2, e) / n1 < 10


def test_position_stride_approximates_full_sum(grid):
    f = band_limited_signal(grid, band=2.0, seed=4)
    win = gaussian_window(grid)
    e = ExponentPair(4, 2)
    full = modulation_norm(f, win, e)
    coarse = modulation_norm(f, win, e, position_stride=2)
    assert coarse == pytest.approx(full, rel=1e-3)


def test_band_norm_equivalence_and_covering(grid):
    P = build_partitions(grid)
    f = band_limited_signal(grid, band=6.0, seed=5)
    e = ExponentPair(2, 2)
    bn = band_norm(f, P.phi, e, support_radius=P.phi_support)
    assert bn.active_count > 0
    ratio = modulation_norm(f, gaussian_window(grid), e) / bn.value
    assert 0.1 < ratio < 10
    # an annulus profile leaves the origin uncovered
    with pytest.raises(PreconditionError, match="cover"):
        band_norm(f, P.eta, e)


def test_mixed_norm_integrates_position_first(grid):
    # a field concentrated on one position row: L^{p,q} = (sum_xi |F|^q)^{1/q} dx^{1/p} dxi^{1/q}
    from modspace.tfa import StftField

    F = np.zeros((grid.N, grid.N), dtype=complex)
    F[10, :] = np.linspace(0, 1, grid.N)
    e = ExponentPair(4, 2)
    val = mixed_lpq_norm(StftField(grid, F, "gaussian"), e)
    ref = np.sum(np.abs(F[10]) ** 2 * grid.dx ** (2 / 4)) * grid.dxi
    assert val == pytest.approx(math.sqrt(ref), rel=1e-12)
