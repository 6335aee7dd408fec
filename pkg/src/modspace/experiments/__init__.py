"""Experiment engine, configuration and command-line runner."""

from ..fitting import FitResult, linear_fit, loglog_fit
from .config import ConfigError, ExperimentConfig
from .engine import (
    bessel_growth,
    dilation_scaling,
    opnorm_lower_bound,
    test_family,
    unboundedness_sweep,
)

__all__ = [
    "FitResult",
    "linear_fit",
    "loglog_fit",
    "ConfigError",
    "ExperimentConfig",
    "bessel_growth",
    "dilation_scaling",
    "opnorm_lower_bound",
    "test_family",
    "unboundedness_sweep",
]
