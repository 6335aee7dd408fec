"""Flat key=value experiment configuration with typed defaults."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "DEFAULTS", "EXPERIMENTS"]


class ConfigError(ValueError):
    """Unknown key, malformed value, or unreadable config file."""


_COMMON = {"seed": 0, "parallel": 1, "out": "", "window": "gaussian"}

DEFAULTS: dict[str, dict] = {
    "indices": {"grid": 9, "delta": 0.5, "n": 1},
    "dilation": {
        "n": 1,
        "points": 2048,
        "half_length": 56.0,
        "p_values": (2.0, 3.0, 4.0),
        "q_values": (2.0, 3.0, 4.0),
        "a_up": (1.0, 2.0, 4.0, 8.0),
        "a_down": (0.125, 0.25, 0.5, 1.0),
        "width": 1.0,
        "tol": 0.1,
    },
    "bessel": {
        "m": 1.0,
        "points": 1024,
        "half_length": 8 * math.pi,
        "k_values": (4.0, 8.0, 16.0, 32.0),
        "rel_tol": 0.05,
        "abs_tol": 0.02,
    },
    "pieces": {
        "m": 1.0,
        "points": 512,
        "half_length": 16.0,
        "delta": 0.0,
        "k_values": (0, 1, 2, 4, 8),
        "j_values": (1, 2, 3, 4, 5),
        "p_values": (2.0, 4.0),
        "panel": 8,
        "k_margin": 0.3,
        "j_margin": 0.2,
    },
    "czo": {
        "m": -0.1,
        "delta": 0.5,
        "j_extra": 8,
        "ells": (0, 1),
        "epsilon": 0.5,
        "samples": 3000,
        "drift_tol": 0.25,
        "decay_low": -1.3,
        "decay_high": -0.7,
    },
    "moments": {
        "m": -0.1,
        "delta": 0.5,
        "points": 16384,
        "half_length": 4.0,
        "j_extra": 0,
        "beta_max": 3,
        "tol": 1e-12,
    },
    "unbounded": {
        "p": 2.0,
        "q": 6.0,
        "delta": 0.5,
        "m": -0.1,
        "control_m": -0.3,
        "j_offsets": (1, 2, 3),
        "points": 524288,
        "half_length": 16.0,
        "family_size": 64,
        "refine_steps": 50,
        "growth_min": 1.2,
        "plateau_max": 1.5,
    },
    "norm-equiv": {
        "exponents": ("2:2", "2:4", "4:2", "3:3"),
        "signals": 20,
        "points": 512,
        "half_length": 16.0,
        "ratio_max": 10.0,
    },
}

EXPERIMENTS = tuple(DEFAULTS)


def _encode(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_encode(x) for x in v)
    return str(v)


def _decode_scalar(text: str, like, key: str):
    text = text.strip()
    try:
        if isinstance(like, bool):
            if text not in ("true", "false"):
                raise ValueError(text)
            return text == "true"
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(like).__name__}") from None
    return text


def _decode(text: str, like, key: str):
    if isinstance(like, tuple):
        if not text.strip():
            return ()
        proto = like[0] if like else ""
        return tuple(_decode_scalar(t, proto, key) for t in text.split(","))
    return _decode_scalar(text, like, key)


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in DEFAULTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        merged = dict(_COMMON)
        merged.update(DEFAULTS[self.experiment])
        for k, v in self.values.items():
            if k not in merged:
                raise ConfigError(f"unknown key {k!r} for experiment {self.experiment}")
            like = merged[k]
            if isinstance(v, str) and not isinstance(like, str):
                v = _decode(v, like, k)
            elif isinstance(like, tuple):
                v = tuple(v) if isinstance(v, (list, tuple)) else (v,)
            elif isinstance(like, float) and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            merged[k] = v
        self.values = merged

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        vals = dict(self.values)
        vals.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig(self.experiment, vals)

    def to_text(self) -> str:
        lines = [f"experiment = {self.experiment}"]
        for k in sorted(self.values):
            lines.append(f"{k} = {_encode(self.values[k])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, experiment: str | None = None) -> "ExperimentConfig":
        vals = {}
        name = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            k, _, v = line.partition("=")
            k, v = k.strip(), v.strip()
            if k == "experiment":
                name = v
            else:
                vals[k] = v
        name = name or experiment
        if name is None:
            raise ConfigError("config does not name its experiment")
        if experiment is not None and name != experiment:
            raise ConfigError(f"config is for {name!r}, not {experiment!r}")
        return cls(name, vals)

    @classmethod
    def load(cls, path, experiment: str | None = None) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        return cls.from_text(text, experiment)

    def as_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(self.values.items())}
