"""Exception types shared across the package."""


class TrimapError(Exception):
    """Base class for all package errors."""


class DomainError(TrimapError, ValueError):
    """A point or argument lies outside the open triangle or a function's domain."""


class AccuracyError(TrimapError):
    """A quadrature or series did not reach the requested tolerance.

    ``estimate`` carries the best value obtained and ``error`` its error estimate.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class TruncationError(AccuracyError):
    """A branch or series truncation needed more terms than the budget allows."""


class InstabilityError(TrimapError):
    """Power iteration drifted away from a bounded renormalization factor."""
