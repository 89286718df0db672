"""Exception types shared across the package."""


class CarbonSchedError(Exception):
    """Base class for all carbonsched errors."""


class TraceError(CarbonSchedError):
    """Malformed or inconsistent carbon-intensity trace input."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CurveError(CarbonSchedError):
    """Invalid throughput profile or marginal capacity curve.

    ``indices`` lists the offending server counts when the failure is a
    monotonicity violation.
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class JobError(CarbonSchedError):
    """Invalid job description (bounds, deadline, or power)."""


class InfeasibleError(CarbonSchedError):
    """The requested work cannot fit in the scheduling window.

    ``max_work`` reports the largest amount of work achievable in the
    window, so callers can decide whether to extend the deadline.
    """

    def __init__(self, message, max_work=None, progress=None):
        super().__init__(message)
        self.max_work = max_work
        self.progress = progress


class EnumerationBudgetError(CarbonSchedError):
    """Exhaustive search refused: the instance exceeds the oracle budget."""
