"""Exception types shared across the package."""


class LineDeltaError(Exception):
    """Base class for all library errors."""


class UsageError(LineDeltaError):
    """Invalid configuration, flags, or input files. CLI exit status 2."""


class NumericalError(LineDeltaError):
    """Numerical failure during a run. CLI exit status 1."""


class AccuracyError(NumericalError):
    """Quadrature refinement stalled before reaching the requested tolerance.

    Carries the last two estimates so callers can inspect the remaining gap.
    """

    def __init__(self, message, last_estimate=None, previous_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.previous_estimate = previous_estimate


class MonotonicityError(NumericalError):
    """The level set decreases (or is flat) along the outward distance
    direction somewhere inside the kernel support, so the codim-2 level-set
    field is not well defined there."""


class EvaluationError(NumericalError):
    """An integrand or interpolant produced a non-finite value."""


class DegenerateEdgeError(LineDeltaError, ValueError):
    """Edge geometry with zero extent (coincident endpoints, empty span)."""
