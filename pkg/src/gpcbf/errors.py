"""Exception types shared across the package."""


class UsageError(ValueError):
    """Caller violated a precondition (dimension mismatch, bad argument)."""


class ConfigError(ValueError):
    """Configuration file or run specification is invalid."""


class NumericalFailure(RuntimeError):
    """A maintained quantity left its provably-valid range (corrupted inverse,
    negative variance beyond round-off tolerance)."""


class DegenerateFilterError(RuntimeError):
    """Safety filter curvature vanished: both the control direction and the
    constraint value are zero, so no closed-form minimizer exists."""


class SimulationFailure(RuntimeError):
    """Closed-loop integration produced a non-finite state.

    Carries the partial trace (if any) on the ``trace`` attribute so callers
    can flush it before aborting.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
