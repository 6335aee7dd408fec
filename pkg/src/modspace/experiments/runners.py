"""Per-experiment cell planners, cell workers and verdict summaries.

Each experiment is split into independent cells. ``plan`` lists them,
``run_cell`` computes one (it must be a pure function of the config values
and the cell so the runner can farm cells out to worker processes), and
``summarize`` turns the ordered cell results into verdicts.

A cell result is a dict with ``rows`` (CSV rows, keyed by the experiment's
fixed columns), optional ``points`` (plot data) and ``summary`` (anything
JSON-serializable).
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction

import numpy as np

from ..grid import Grid, PreconditionError
from ..indices import ExponentPair, critical_order, gap, mu1, mu2, region
from ..quantize import (
    CounterexampleKernel,
    KernelField,
    czo_check,
    kernel_decay_fit,
    piece_kernel_decay,
    vanishing_moments,
)
from ..symbols import (
    CounterexampleParams,
    SymbolGrid,
    TruncationWarning,
    bessel_symbol,
    build_partitions,
    check_j0,
    counterexample_symbol,
)
from ..tfa import band_norm, bump_window, gaussian_window, modulation_norm
from .engine import (
    band_limited_signal,
    bessel_growth,
    dilation_scaling,
    gaussian_signal,
    unboundedness_sweep,
)

__all__ = ["COLUMNS", "POINT_COLUMNS", "RUNNERS"]


def _window(grid: Grid, name: str):
    if name == "gaussian":
        return gaussian_window(grid)
    if name == "bump":
        return bump_window(grid)
    raise PreconditionError(f"unknown window {name!r} (gaussian, bump)")


def _pair(text: str) -> ExponentPair:
    p, _, q = text.partition(":")
    return ExponentPair(_num(p), _num(q))


def _num(text: str):
    text = text.strip()
    return math.inf if text in ("inf", "Infinity") else float(text)


# ---------------------------------------------------------------------------
# indices


def _indices_plan(v):
    if v["grid"] < 2:
        raise PreconditionError("indices grid needs at least 2 points per axis")
    return [("table",)]


def _indices_cell(v, cell):
    G = v["grid"]
    delta = Fraction(v["delta"]).limit_denominator(10**6)
    rows = []
    for i in range(G):
        for k in range(G):
            e = ExponentPair.from_reciprocals(Fraction(i, G - 1), Fraction(k, G - 1))
            lab = region(e)
            rows.append(
                {
                    "inv_p": float(e.inv_p),
                    "inv_q": float(e.inv_q),
                    "p": e.p,
                    "q": e.q,
                    "mu1": float(mu1(e)),
                    "mu2": float(mu2(e)),
                    "gap": float(gap(e)),
                    "critical_order": float(critical_order(e, delta, v["n"]).value),
                    "i_region": "+".join(sorted(lab.i_regions)),
                    "j_region": "+".join(sorted(lab.j_regions)),
                }
            )
    return {"rows": rows, "summary": {}}


def _indices_summary(v, results):
    rows = results[0]["rows"]
    ok = all(r["gap"] >= 0 for r in rows)
    return {"gap_nonnegative": ok}, {"rows": len(rows)}


# ---------------------------------------------------------------------------
# dilation


def _dilation_plan(v):
    return [(p, q, br) for p in v["p_values"] for q in v["q_values"] for br in ("up", "down")]


def _dilation_cell(v, cell):
    p, q, branch = cell
    grid = Grid(v["n"], v["points"], v["half_length"])
    e = ExponentPair(p, q)
    f = gaussian_signal(grid, v["width"])
    a_values = v["a_up"] if branch == "up" else v["a_down"]
    res = dilation_scaling(f, e, a_values, _window(grid, v["window"]), v["tol"])
    rows = [
        {
            "p": p,
            "q": q,
            "branch": branch,
            "a": a,
            "ratio": r,
            "slope": res.fit.slope,
            "bound": res.bound,
            "verdict": "consistent" if res.consistent else "inconsistent",
        }
        for a, r in zip(res.a_values, res.ratios)
    ]
    points = [{"cell": f"{p}:{q}:{branch}", "log_x": x, "log_y": y} for x, y in zip(res.fit.log_x, res.fit.log_y)]
    return {
        "rows": rows,
        "points": points,
        "summary": {"p": p, "q": q, "branch": branch, "fit": res.fit.as_dict(), "bound": res.bound, "consistent": res.consistent},
    }


def _dilation_summary(v, results):
    verdicts = {}
    for r in results:
        s = r["summary"]
        verdicts[f"{s['p']:g}:{s['q']:g}:{s['branch']}"] = s["consistent"]
        if s["p"] == 2 and s["q"] == 2 and s["branch"] == "up":
            verdicts["l2_exact_scaling"] = abs(s["fit"]["slope"] + 0.5) < 0.05
    return verdicts, {"fits": [r["summary"] for r in results]}


# ---------------------------------------------------------------------------
# bessel


def _bessel_plan(v):
    return [(v["m"],)]


def _bessel_cell(v, cell):
    (m,) = cell
    grid = Grid(1, v["points"], v["half_length"])
    res = bessel_growth(m, v["k_values"], band_limited_signal(grid))
    rows = [{"m": m, "k": k, "ratio": r, "slope": res.fit.slope} for k, r in zip(res.k_values, res.ratios)]
    points = [{"cell": f"m={m!r}", "log_x": x, "log_y": y} for x, y in zip(res.fit.log_x, res.fit.log_y)]
    return {"rows": rows, "points": points, "summary": {"m": m, "slope": res.fit.slope, "fit": res.fit.as_dict()}}


def _bessel_summary(v, results):
    s = results[0]["summary"]
    m = s["m"]
    if m == 0:
        ok = abs(s["slope"]) <= v["abs_tol"]
    else:
        ok = abs(s["slope"] - m) <= v["rel_tol"] * abs(m)
    return {"slope_matches_order": ok}, {"slope": s["slope"], "m": m, "fit": s["fit"]}


# ---------------------------------------------------------------------------
# pieces


def _pieces_plan(v):
    return [("bessel",), ("modulated",)]


def _piece_sample(v):
    js = list(v["j_values"])
    sample = []
    for idx, j in enumerate(js):
        ell = int(round(1.5 * 2 ** (j * (1 - v["delta"]))))
        ks = v["k_values"] if idx == 0 else (0,)
        sample.extend((j, (k,), (ell,)) for k in ks)
    return sample


def _pieces_cell(v, cell):
    (kind,) = cell
    grid = Grid(1, v["points"], v["half_length"])
    P = build_partitions(grid)
    sigma = bessel_symbol(v["m"], grid)
    if kind == "modulated":
        a = 1.0 + 0.5 * np.exp(-grid.x**2 / 2)
        sigma = SymbolGrid(grid, sigma.params, "custom", terms=((a, sigma.terms[0][1]),))
    rep = piece_kernel_decay(sigma, P, _piece_sample(v), v["delta"], v["p_values"], v["panel"], v["seed"])
    rows = [
        {"symbol": kind, "j": j, "k": k[0], "ell": ell[0], "p": p, "ratio": r}
        for (j, k, ell, p), r in sorted(rep.ratios.items())
    ]
    return {
        "rows": rows,
        "summary": {"symbol": kind, "k_exponent": rep.k_exponent, "j_exponent": rep.j_exponent, "notes": rep.notes},
    }


def _pieces_summary(v, results):
    verdicts = {}
    k_bound = -2 + v["k_margin"]
    j_bound = v["m"] + v["j_margin"]
    for r in results:
        s = r["summary"]
        verdicts[f"{s['symbol']}_k_decay"] = s["k_exponent"] <= k_bound
        verdicts[f"{s['symbol']}_j_growth"] = s["j_exponent"] <= j_bound
    return verdicts, {"k_bound": k_bound, "j_bound": j_bound, "symbols": [r["summary"] for r in results]}


# ---------------------------------------------------------------------------
# czo


def _czo_params(v):
    base = CounterexampleParams(v["m"], v["delta"], 1)
    return CounterexampleParams(v["m"], v["delta"], 1, j0=base.j0, j_max=base.j0 + v["j_extra"])


def _czo_plan(v):
    cells = [(op, ell) for op in ("T", "T*") for ell in v["ells"]]
    return cells + [("decay", 0), ("control", 0)]


def _czo_row(name, rep):
    rows = []
    for q, octs in sorted(rep.octave_constants.items()):
        for o, c in octs:
            rows.append(
                {
                    "operator": name,
                    "ell": rep.ell,
                    "quantity": q,
                    "octave": o,
                    "constant": c,
                    "drift": rep.drift[q],
                    "status": rep.status,
                }
            )
    return rows


def _czo_cell(v, cell):
    op, ell = cell
    if op == "control":
        grid = Grid(1, 512, 16.0)
        d = np.abs(grid.x[:, None] - grid.x[None, :])
        d = np.minimum(d, 2 * grid.L - d)
        with np.errstate(divide="ignore"):
            vals = np.where(d > 0, d ** -0.5, 0.0)
        rep = czo_check(KernelField(grid, vals, 4 * grid.dx), 0, v["epsilon"], v["seed"], v["samples"], v["drift_tol"])
        return {"rows": _czo_row("control", rep), "summary": {"cell": "control", "status": rep.status}}
    cp = _czo_params(v)
    if op == "decay":
        K = CounterexampleKernel(cp)
        fit = kernel_decay_fit(K, v["seed"], v["samples"])
        rows = [
            {"operator": "T", "ell": -1, "quantity": "decay_fit", "octave": 0, "constant": fit.slope, "drift": fit.residual, "status": ""}
        ]
        points = [{"cell": "decay", "log_x": x, "log_y": y} for x, y in zip(fit.log_x, fit.log_y)]
        return {"rows": rows, "points": points, "summary": {"cell": "decay", "slope": fit.slope, "fit": fit.as_dict()}}
    K = CounterexampleKernel(cp, transpose=(op == "T*"))
    rep = czo_check(K, ell, v["epsilon"], v["seed"], v["samples"], v["drift_tol"])
    return {"rows": _czo_row(op, rep), "summary": {"cell": f"{op}:ell={ell}", "status": rep.status, "drift": rep.drift}}


def _czo_summary(v, results):
    verdicts = {}
    extra = {"j0": _czo_params(v).j0, "j_max": _czo_params(v).j_max, "cells": []}
    for r in results:
        s = r["summary"]
        extra["cells"].append(s)
        if s["cell"] == "control":
            verdicts["control_rejected"] = s["status"] == "fail"
        elif s["cell"] == "decay":
            verdicts["kernel_decay"] = v["decay_low"] <= s["slope"] <= v["decay_high"]
        else:
            verdicts[s["cell"]] = s["status"] in ("pass", "trivial")
    return verdicts, extra


# ---------------------------------------------------------------------------
# moments


def _moments_plan(v):
    return [("structure",), ("forward",), ("adjoint",)]


def _moments_symbol(v):
    base = CounterexampleParams(v["m"], v["delta"], 1)
    cp = CounterexampleParams(v["m"], v["delta"], 1, j0=base.j0, j_max=base.j0 + v["j_extra"])
    grid = Grid(1, v["points"], v["half_length"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return cp, counterexample_symbol(cp, grid)


def _moments_cell(v, cell):
    (kind,) = cell
    cp, sigma = _moments_symbol(v)
    if kind == "structure":
        j0 = cp.j0
        rows = [
            {"check": "j0_accepted", "beta": "", "value": float(not check_j0(j0, cp.delta, 1, True))},
            {"check": "j0_minus_1_rejected", "beta": "", "value": float(bool(check_j0(j0 - 1, cp.delta, 1, True)))},
        ]
        xi = sigma.grid.xi
        low = np.abs(xi) < 2.0 ** (j0 - 0.5)
        worst = max(float(np.max(np.abs(b[low]))) if np.any(low) else 0.0 for _, b in sigma.terms)
        rows.append({"check": "low_band_max", "beta": "", "value": worst})
        return {"rows": rows, "summary": {"cell": kind, "j0": j0, "j_max": cp.j_max, "low_band_max": worst}}
    vals = vanishing_moments(sigma, v["beta_max"], adjoint=(kind == "adjoint"))
    rows = [{"check": kind, "beta": "".join(str(b) for b in beta), "value": float(val)} for beta, val in vals]
    return {"rows": rows, "summary": {"cell": kind, "max": max(float(val) for _, val in vals)}}


def _moments_summary(v, results):
    verdicts = {}
    for r in results:
        s = r["summary"]
        if s["cell"] == "structure":
            rows = {row["check"]: row["value"] for row in r["rows"]}
            verdicts["j0_minimal"] = rows["j0_accepted"] == 1.0 and rows["j0_minus_1_rejected"] == 1.0
            verdicts["low_band_vanishes"] = s["low_band_max"] == 0.0
        else:
            verdicts[f"{s['cell']}_moments"] = s["max"] < v["tol"]
    return verdicts, {"cells": [r["summary"] for r in results]}


# ---------------------------------------------------------------------------
# unbounded


def _unbounded_plan(v):
    return [("main", v["m"]), ("control", v["control_m"])]


def _unbounded_cell(v, cell):
    role, m = cell
    e = ExponentPair(v["p"], v["q"])
    grid = Grid(1, v["points"], v["half_length"])
    j0 = CounterexampleParams(v["m"], v["delta"], 1).j0
    res = unboundedness_sweep(
        e,
        v["delta"],
        m,
        [j0 + o for o in v["j_offsets"]],
        grid=grid,
        family_size=v["family_size"],
        refine_steps=v["refine_steps"],
        seed=v["seed"],
        window=_window(grid, v["window"]),
        allow_subcritical=(role == "control"),
        j0=j0,
    )
    rows = [
        {
            "role": role,
            "m": m,
            "j_max": r.j_max,
            "lower_bound": r.lower_bound,
            "best_individual": r.best_individual,
            "refined": r.refined,
            "best_member": r.best_member,
        }
        for r in res.rows
    ]
    return {
        "rows": rows,
        "summary": {
            "role": role,
            "m": m,
            "critical_order": res.critical,
            "j0": res.j0,
            "probe": res.probe,
            "monotone": res.monotone,
            "growth_ratio": res.growth_ratio,
        },
    }


def _unbounded_summary(v, results):
    by = {r["summary"]["role"]: r["summary"] for r in results}
    main, ctrl = by["main"], by["control"]
    verdicts = {
        "main_monotone": main["monotone"],
        "main_growth": main["growth_ratio"] >= v["growth_min"],
        "control_plateau": ctrl["growth_ratio"] < v["plateau_max"],
    }
    return verdicts, {"sweeps": [main, ctrl], "note": "finite-truncation growth evidence, not a proof"}


# ---------------------------------------------------------------------------
# norm-equiv


def _norm_plan(v):
    return [(s,) for s in v["exponents"]]


def _norm_cell(v, cell):
    (text,) = cell
    e = _pair(text)
    grid = Grid(1, v["points"], v["half_length"])
    P = build_partitions(grid)
    win = _window(grid, v["window"])
    rows = []
    for i in range(v["signals"]):
        f = band_limited_signal(grid, band=0.25 * grid.xi_max, seed=np.random.SeedSequence([v["seed"], i]).generate_state(1)[0])
        bn = band_norm(f, P.phi, e, support_radius=P.phi_support).value
        mn = modulation_norm(f, win, e, position_stride=1 if e.p == 2 else 4)
        rows.append({"exponents": text, "signal": i, "band_norm": bn, "modulation_norm": mn, "ratio": mn / bn})
    ratios = [r["ratio"] for r in rows]
    return {"rows": rows, "summary": {"exponents": text, "ratio_min": min(ratios), "ratio_max": max(ratios)}}


def _norm_summary(v, results):
    verdicts = {}
    for r in results:
        s = r["summary"]
        verdicts[f"equivalent_{s['exponents']}"] = s["ratio_max"] / s["ratio_min"] <= v["ratio_max"]
    return verdicts, {"pairs": [r["summary"] for r in results]}


# ---------------------------------------------------------------------------

COLUMNS = {
    "indices": ["inv_p", "inv_q", "p", "q", "mu1", "mu2", "gap", "critical_order", "i_region", "j_region"],
    "dilation": ["p", "q", "branch", "a", "ratio", "slope", "bound", "verdict"],
    "bessel": ["m", "k", "ratio", "slope"],
    "pieces": ["symbol", "j", "k", "ell", "p", "ratio"],
    "czo": ["operator", "ell", "quantity", "octave", "constant", "drift", "status"],
    "moments": ["check", "beta", "value"],
    "unbounded": ["role", "m", "j_max", "lower_bound", "best_individual", "refined", "best_member"],
    "norm-equiv": ["exponents", "signal", "band_norm", "modulation_norm", "ratio"],
}

POINT_COLUMNS = ["cell", "log_x", "log_y"]

RUNNERS = {
    "indices": (_indices_plan, _indices_cell, _indices_summary),
    "dilation": (_dilation_plan, _dilation_cell, _dilation_summary),
    "bessel": (_bessel_plan, _bessel_cell, _bessel_summary),
    "pieces": (_pieces_plan, _pieces_cell, _pieces_summary),
    "czo": (_czo_plan, _czo_cell, _czo_summary),
    "moments": (_moments_plan, _moments_cell, _moments_summary),
    "unbounded": (_unbounded_plan, _unbounded_cell, _unbounded_summary),
    "norm-equiv": (_norm_plan, _norm_cell, _norm_summary),
}
