"""Exception types shared across the package."""


class AcktrackError(Exception):
    """Base class for package errors."""


class DomainError(AcktrackError, ValueError):
    """Input outside the operation's valid domain (non-finite, wrong sign, ...)."""


class SingularModelError(DomainError):
    """Dynamic model requested below the minimum longitudinal speed."""


class EndOfCourse(AcktrackError):
    """Raised when a query runs past the end of an open course.

    The harness treats this as normal run termination, not a failure.
    """


class FitError(AcktrackError, RuntimeError):
    """Model identification failed; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ExcitationError(FitError):
    """Regression data does not excite the parameters (rank deficient)."""


class DareConvergenceError(AcktrackError, RuntimeError):
    """Riccati fixed-point iteration did not reach tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(AcktrackError, ValueError):
    """Scenario configuration failed validation."""
