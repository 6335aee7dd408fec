"""Least-squares fits in log-log coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import PreconditionError

__all__ = ["FitResult", "loglog_fit", "linear_fit"]


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    log_x: tuple
    log_y: tuple

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "log_x": list(self.log_x),
            "log_y": list(self.log_y),
        }


def linear_fit(u, v) -> FitResult:
    """Ordinary least squares v ~ slope*u + intercept; residual is the RMS misfit."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size != v.size:
        raise PreconditionError("abscissa and ordinate lengths differ")
    if u.size < 2 or np.ptp(u) == 0:
        raise PreconditionError("a fit needs at least two distinct abscissae")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise PreconditionError("fit inputs must be finite")
    A = np.column_stack([u, np.ones_like(u)])
    (slope, intercept), *_ = np.linalg.lstsq(A, v, rcond=None)
    res = v - (slope * u + intercept)
    return FitResult(float(slope), float(intercept), float(math.sqrt(np.mean(res**2))), tuple(u.tolist()), tuple(v.tolist()))


def loglog_fit(x, y) -> FitResult:
    """Fit log y against log x (natural logs)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise PreconditionError("log-log fit needs positive data")
    return linear_fit(np.log(x), np.log(y))
