from __future__ import annotations

from enum import Enum


class ErrorCategory(str, Enum):
    """Classification for error logging."""

    VALIDATION = "validation"
    NUMERICAL = "numerical"
    SAMPLER = "sampler"
    IO = "io"


class RelRatesError(Exception):
    """Base class for every error raised by the package."""

    category: ErrorCategory = ErrorCategory.VALIDATION


class DataValidationError(RelRatesError, ValueError):
    """Inputs violate a documented precondition (bad counts, ids, files)."""


class ConfigError(RelRatesError, ValueError):
    """Model or run configuration is inconsistent."""


class NumericalError(RelRatesError, ArithmeticError):
    """A solver (quantile inversion, bisection) failed to converge."""

    category = ErrorCategory.NUMERICAL


class DegeneratePosteriorError(NumericalError):
    """Credible interval has zero width, so relative precision is undefined."""


class SamplerDiagnosticError(RelRatesError, RuntimeError):
    """The MCMC chain hit a non-finite state or stalled on the constraint."""

    category = ErrorCategory.SAMPLER
