"""Exception hierarchy shared across the package."""


class RoleModelError(Exception):
    """Base class for all numerical/contract failures raised by this package."""


class DimensionMismatch(RoleModelError):
    """Two objects that must share an alphabet or shape do not."""


class DimensionTooLarge(RoleModelError):
    """Input exceeds the enumeration-friendly bound of an exact kernel."""


class AbsoluteContinuityViolation(RoleModelError):
    """D(p||q) requested where p puts mass on a point with q = 0."""


class ZeroMassAtTruth(RoleModelError):
    """A message assigns zero probability to the true symbol.

    Carries ``index`` (position in the batch) so callers can locate the
    offending sample and, typically, floor their messages first.
    """

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"message {index} has zero mass at the true symbol")


class ZeroProbabilityConditioning(RoleModelError):
    """Posterior requested conditioned on an event of probability zero."""


class BinOutOfRange(RoleModelError):
    """Sample statistic does not resolve to a valid accumulator bin."""


class DegenerateRow(RoleModelError):
    """A constraint-node output row normalized to zero (all configurations excluded)."""


class BisectionFailure(RoleModelError):
    """Root bracketing failed: the requested target is not reachable."""
