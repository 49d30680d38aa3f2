"""Multiclass M/G/1 preemptive-priority queue with pause/resume preemption overhead.

Analytical side: loads and stability, service-arrival joint transforms,
class-restricted busy periods and per-class response-time transforms and
moments.  Simulation side: an event-driven simulator of the same
scheduling rule, used as an independent statistical check.
"""

from __future__ import annotations

from .durations import (
    ZERO,
    Deterministic,
    Distribution,
    Erlang,
    Exponential,
    HyperExponential,
    PointMixture,
    Uniform,
    distribution_from_dict,
    lst,
    lst_deriv,
    sample,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateCaseError,
    DomainError,
    ModelError,
    NumericPrecisionError,
    UnstableSystemError,
    UnsupportedConfigurationError,
)
from .model import ClassSpec, Mode, SystemConfig

__version__ = "0.1.0"

__all__ = [
    "ZERO",
    "ClassSpec",
    "ConfigError",
    "ConvergenceError",
    "DegenerateCaseError",
    "Deterministic",
    "Distribution",
    "DomainError",
    "Erlang",
    "Exponential",
    "HyperExponential",
    "Mode",
    "ModelError",
    "NumericPrecisionError",
    "PointMixture",
    "SystemConfig",
    "Uniform",
    "UnstableSystemError",
    "UnsupportedConfigurationError",
    "distribution_from_dict",
    "lst",
    "lst_deriv",
    "sample",
]
