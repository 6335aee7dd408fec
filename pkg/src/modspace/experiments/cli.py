"""Command-line runner: ``modspace <experiment> [options]``.

Exit status: 0 when every verdict passes, 2 when any verdict fails,
1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..grid import PreconditionError
from .config import EXPERIMENTS, ConfigError, ExperimentConfig
from .runners import COLUMNS, POINT_COLUMNS, RUNNERS

__all__ = ["main", "run_cli", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

# --grid maps onto the experiment's size knob
_GRID_KEY = {
    "indices": "grid",
    "dilation": "points",
    "bessel": "points",
    "pieces": "points",
    "moments": "points",
    "unbounded": "points",
    "norm-equiv": "points",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _parser() -> _Parser:
    ap = _Parser(prog="modspace", description="Modulation-space experiments.")
    sub = ap.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--out", help="output directory (default $MODSPACE_OUT or .)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--parallel", type=int, help="worker processes")
        sp.add_argument("--grid", type=int, help="grid size")
        sp.add_argument("--m", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    return ap


def _build_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config, args.experiment)
    else:
        cfg = ExperimentConfig(args.experiment)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, _, val = item.partition("=")
        overrides[k.strip()] = val.strip()
    for key, val in (("seed", args.seed), ("parallel", args.parallel), ("out", args.out), ("m", args.m), ("delta", args.delta)):
        if val is not None:
            if key not in cfg.values:
                raise ConfigError(f"--{key} does not apply to {args.experiment}")
            overrides[key] = val
    if args.grid is not None:
        if args.experiment not in _GRID_KEY:
            raise ConfigError(f"--grid does not apply to {args.experiment}")
        overrides[_GRID_KEY[args.experiment]] = args.grid
    cfg = cfg.with_overrides(**overrides)
    if cfg["seed"] < 0 or cfg["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg["parallel"] < 1:
        raise ConfigError("parallel must be at least 1")
    return cfg


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no infinities; keep them readable
        return x if np.isfinite(x) else repr(x)
    return obj


def _run_cell(payload):
    name, values, cell = payload
    return RUNNERS[name][1](values, cell)


def run_experiment(cfg: ExperimentConfig) -> tuple[list, dict, list]:
    """Run every cell in order; returns (results, verdicts, extra summary)."""
    plan, _, summarize = RUNNERS[cfg.experiment]
    values = dict(cfg.values)
    cells = plan(values)
    payloads = [(cfg.experiment, values, c) for c in cells]
    width = min(cfg["parallel"], len(cells))
    if width > 1:
        with ProcessPoolExecutor(max_workers=width) as pool:
            results = list(pool.map(_run_cell, payloads))
    else:
        results = [_run_cell(p) for p in payloads]
    verdicts, extra = summarize(values, results)
    return results, verdicts, extra


def _write_outputs(cfg: ExperimentConfig, results, verdicts, extra, out_dir: Path) -> None:
    name = cfg.experiment
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    rows = [r for res in results for r in res["rows"]]
    (out_dir / f"{name}.csv").write_text(f"# generated {stamp}\n" + _csv_text(COLUMNS[name], rows))
    points = [p for res in results for p in res.get("points", [])]
    if points:
        (out_dir / f"{name}.points.csv").write_text(f"# generated {stamp}\n" + _csv_text(POINT_COLUMNS, points))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": name,
        "generated": stamp,
        "seed": cfg["seed"],
        "config": cfg.as_json(),
        "versions": {"modspace": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "verdicts": verdicts,
        "passed": all(verdicts.values()),
        "rows": len(rows),
        "results": extra,
    }
    (out_dir / f"{name}.summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")


def run_cli(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        cfg = _build_config(args)
    except (_UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(cfg["out"] or os.environ.get("MODSPACE_OUT") or ".")
    try:
        results, verdicts, extra = run_experiment(cfg)
    except (PreconditionError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_outputs(cfg, results, verdicts, extra, out_dir)
    for k, ok in verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {k}")
    return 0 if all(verdicts.values()) else 2


def main(argv=None) -> None:
    sys.exit(run_cli(argv))


if __name__ == "__main__":
    main()
