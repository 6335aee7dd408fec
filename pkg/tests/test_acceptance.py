"""Acceptance criteria, one test each, with the pinned tolerances.

Every test prints a PASS/FAIL line; the lines are repeated in the
terminal summary. Runtime limits count toward the verdict.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from modspace import ExponentPair, Grid, gap, gaussian_window, lp_norm, modulation_norm, mu1, mu2
from modspace.experiments import ExperimentConfig
from modspace.experiments.cli import run_cli, run_experiment
from modspace.experiments.config import EXPERIMENTS
from modspace.experiments.engine import band_limited_signal
from modspace.grid import dft_array
from modspace.indices import mu1_piecewise, mu2_piecewise
from modspace.quantize import OperatorMatrix, adjoint, quantize
from modspace.symbols import (
    SymbolClassParams,
    build_partitions,
    custom_symbol,
    min_j0_disjoint,
    multiplier_symbol,
    support_disjoint,
    support_level,
)


def _run(name, **values):
    t = time.perf_counter()
    _, verdicts, extra = run_experiment(ExperimentConfig(name, values))
    return verdicts, extra, time.perf_counter() - t


def test_01_index_algebra(acceptance):
    t = time.perf_counter()
    bad = 0
    G = 99
    for i in range(G):
        for k in range(G):
            a, b = Fraction(i, G - 1), Fraction(k, G - 1)
            e = ExponentPair.from_reciprocals(a, b)
            if set(mu1_piecewise(e).values()) != {mu1(e)} or set(mu2_piecewise(e).values()) != {mu2(e)}:
                bad += 1
            if a == Fraction(1, 2) and gap(e) != abs(b - Fraction(1, 2)):
                bad += 1
    dt = time.perf_counter() - t
    ok = acceptance(1, "index algebra", bad == 0 and dt < 1, f"{bad} mismatches on 99x99", dt, 1)
    assert ok


def test_02_partition_identities(acceptance):
    t = time.perf_counter()
    worst = {}
    for n, N in ((1, 512), (2, 64)):
        g = Grid(n, N, 8.0)
        P = build_partitions(g, tol=1e-12)
        mesh = g.xi_mesh()
        radius = math.sqrt(n) * g.xi_max
        J = P.levels_for(radius)
        psis = [P.psi_j(j, *mesh) for j in range(J + 1)]
        worst[f"dyadic n={n}"] = float(np.max(np.abs(sum(psis) - 1)))
        for delta in (0.0, 0.25, 0.5):
            joint = np.zeros(g.shape)
            for j, psi in enumerate(psis):
                s = 2.0 ** (-j * delta)
                K = math.floor(s * g.xi_max + 1)
                lattice = np.zeros(g.shape)
                for ell in np.ndindex(*(2 * K + 1,) * n):
                    c = [s * m - (l - K) for m, l in zip(mesh, ell)]
                    lattice += P.phi(*c)
                key = f"lattice n={n} delta={delta}"
                worst[key] = max(worst.get(key, 0.0), float(np.max(np.abs(lattice - 1))))
                joint += lattice * psi
            worst[f"joint n={n} delta={delta}"] = float(np.max(np.abs(joint - 1)))
    dt = time.perf_counter() - t
    err = max(worst.values())
    ok = acceptance(2, "partition identities", err < 1e-8 and dt < 10, f"max error {err:.2e} (tol 1e-8)", dt, 10)
    assert ok


def test_03_m22_is_l2(acceptance):
    t = time.perf_counter()
    g = Grid(1, 512, 16.0)
    win = gaussian_window(g, normalize=False)
    gn = lp_norm(win.signal, 2)
    ratios = []
    for i in range(20):
        f = band_limited_signal(g, band=0.25 * g.xi_max, seed=i)
        ratios.append(modulation_norm(f, win, ExponentPair(2, 2)) / (math.sqrt(2 * math.pi) * gn * lp_norm(f, 2)))
    dt = time.perf_counter() - t
    lo, hi = min(ratios), max(ratios)
    ok = acceptance(3, "M22 = L2", 0.999 <= lo and hi <= 1.001 and dt < 30, f"ratios in [{lo:.12f}, {hi:.12f}]", dt, 30)
    assert ok


def test_04_dilation_scaling(acceptance):
    verdicts, extra, dt = _run("dilation")
    l2 = next(f for f in extra["fits"] if f["p"] == 2 and f["q"] == 2 and f["branch"] == "up")
    failed = [k for k, v in verdicts.items() if not v]
    ok = acceptance(
        4,
        "dilation scaling",
        not failed and dt < 300,
        f"{len(verdicts) - 1} cells, failed={failed}, p=q=2 slope {l2['fit']['slope']:.4f}",
        dt,
        300,
    )
    assert ok


def test_05_bessel_growth(acceptance):
    t = time.perf_counter()
    slopes = {}
    ok = True
    for m in (0.25, 0.5, 1.0):
        verdicts, extra, _ = _run("bessel", m=m)
        slopes[m] = extra["slope"]
        ok &= verdicts["slope_matches_order"]
    dt = time.perf_counter() - t
    detail = ", ".join(f"m={m}: {s:.4f}" for m, s in slopes.items())
    ok = acceptance(5, "Bessel growth", ok and dt < 60, detail + " (within 5%)", dt, 60)
    assert ok


def test_06_quantization_sanity(acceptance):
    t = time.perf_counter()
    g = Grid(1, 256, 8.0)
    one = custom_symbol(g, lambda xs, xis: np.ones(np.broadcast_shapes(xs[0].shape, xis[0].shape)), SymbolClassParams(0.0))
    e_id = float(np.max(np.abs(quantize(one).dense() - np.eye(g.size))))

    rng = np.random.default_rng(0)
    b = np.exp(-g.xi**2 / 20) * (1 + 0.5j * np.sin(g.xi))
    A = quantize(multiplier_symbol(g, b, SymbolClassParams(0.0)))
    f = rng.standard_normal(g.N) + 1j * rng.standard_normal(g.N)
    e_mult = float(np.max(np.abs(dft_array(g, A.matvec(f)) - b * dft_array(g, f))))

    sigma = custom_symbol(
        g, lambda xs, xis: (1 + 0.5 * np.sin(xs[0])) * np.exp(-0.1 * xis[0] ** 2) + 0.2j * np.cos(xs[0]), SymbolClassParams(0.0)
    )
    e_adj = 0.0
    for B in (quantize(sigma, matrix_free=False), quantize(sigma.__class__(g, sigma.params, "custom", terms=((np.cos(g.x), b),)), matrix_free=True)):
        Bs = adjoint(B)
        for _ in range(100):
            u = rng.standard_normal(g.N) + 1j * rng.standard_normal(g.N)
            v = rng.standard_normal(g.N) + 1j * rng.standard_normal(g.N)
            lhs, rhs = np.vdot(v, B.matvec(u)), np.vdot(Bs.matvec(v), u)
            e_adj = max(e_adj, abs(lhs - rhs) / max(1.0, abs(lhs)))
    dt = time.perf_counter() - t
    ok = e_id < 1e-12 and e_mult < 1e-10 and e_adj < 1e-12 and dt < 60
    ok = acceptance(6, "quantization sanity", ok, f"identity {e_id:.1e}, multiplier {e_mult:.1e}, adjoint {e_adj:.1e}", dt, 60)
    assert ok


def test_07_piece_decay(acceptance):
    verdicts, extra, dt = _run("pieces")
    s = next(x for x in extra["symbols"] if x["symbol"] == "bessel")
    ok = verdicts["bessel_k_decay"] and verdicts["bessel_j_growth"] and dt < 300
    detail = f"k-exponent {s['k_exponent']} <= {extra['k_bound']}, j-exponent {s['j_exponent']:.4f} <= {extra['j_bound']}"
    ok = acceptance(7, "piece decay", ok, detail, dt, 300)
    assert ok


def test_08_counterexample_structure(acceptance):
    mv, mx, t1 = _run("moments")
    cv, cx, t2 = _run("czo")
    dt = t1 + t2
    moment_max = max(c["max"] for c in mx["cells"] if c["cell"] != "structure")
    failed = [k for k, v in {**mv, **cv}.items() if not v]
    ok = not failed and dt < 600
    ok = acceptance(
        8, "counterexample structure", ok, f"j0 minimal, low band zero, moments max {moment_max:.1e}, czo failed={failed}", dt, 600
    )
    assert ok


def test_10_support_disjointness(acceptance):
    t = time.perf_counter()
    delta, j0 = 0.5, min_j0_disjoint(0.5, 1)
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(100):
        ell, j = int(rng.integers(-4000, 4001)), int(rng.integers(j0 + 1, 24))
        s = 2.0 ** (j * delta)
        xs = np.linspace(s * (ell - 1), s * (ell + 1), 4001)
        meets = bool(np.any((np.abs(xs) >= 2.0 ** (j - 1)) & (np.abs(xs) <= 2.0 ** (j + 1))))
        mismatches += support_disjoint(ell, j, delta, j0) == meets
    window_bad = 0
    for ell in range(1, 400):
        jl = support_level(ell, delta, j0)
        if jl is None:
            continue
        for j in range(j0 + 1, jl + 2 * j0 + 1):
            if abs(j - jl) >= j0 and not support_disjoint(ell, j, delta, j0):
                window_bad += 1
    dt = time.perf_counter() - t
    ok = mismatches == 0 and window_bad == 0 and dt < 10
    ok = acceptance(10, "support disjointness", ok, f"{mismatches} oracle mismatches, {window_bad} window violations", dt, 10)
    assert ok


_SMALL = {
    "dilation": ["--set", "p_values=2,4", "--set", "q_values=2"],
    "unbounded": ["--set", "points=32768", "--set", "half_length=2.0", "--set", "family_size=8", "--set", "refine_steps=4"],
}


def test_11_determinism(acceptance, tmp_path):
    t = time.perf_counter()
    differing = []
    for name in EXPERIMENTS:
        bodies = []
        for run in ("a", "b"):
            out = tmp_path / name / run
            run_cli([name, "--seed", "7", "--out", str(out), *_SMALL.get(name, [])])
            csv = (out / f"{name}.csv").read_text().splitlines(keepends=True)
            bodies.append("".join(csv[1:]))
        if bodies[0] != bodies[1] or not bodies[0]:
            differing.append(name)
    dt = time.perf_counter() - t
    ok = acceptance(11, "determinism", not differing, f"{len(EXPERIMENTS)} subcommands, differing={differing}", dt)
    assert ok


@pytest.mark.slow
def test_09_unboundedness_probe(acceptance):
    verdicts, extra, dt = _run("unbounded")
    main, ctrl = extra["sweeps"]
    detail = (
        f"main m={main['m']} growth {main['growth_ratio']:.4f} (need >= 1.2) monotone={main['monotone']}; "
        f"control m={ctrl['m']} growth {ctrl['growth_ratio']:.4f} (need < 1.5)"
    )
    ok = all(verdicts.values()) and dt <= 900
    ok = acceptance(9, "unboundedness probe", ok, detail, dt, 900)
    assert ok
