"""Exception hierarchy shared by the analytical and simulation layers."""

from __future__ import annotations


class ModelError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ModelError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class DegenerateCaseError(DomainError):
    """A conditional law was requested for an event of probability zero."""


class UnsupportedConfigurationError(ModelError):
    """The configuration is valid but the requested computation does not cover it."""


class UnstableSystemError(ModelError):
    """A stationary quantity was requested for a system with total load >= 1."""


class ConvergenceError(ModelError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int) -> None:
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class NumericPrecisionError(ModelError):
    """Finite-difference refinement levels disagree beyond the allowed tolerance."""


class ConfigError(ModelError, ValueError):
    """A configuration document is malformed or violates a model invariant.

    ``field`` holds the dotted path of the offending entry, e.g.
    ``classes[1].lambda``.
    """

    def __init__(self, message: str, field: str | None = None) -> None:
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
