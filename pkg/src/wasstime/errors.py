"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`WasstimeError`.
Input-validation errors additionally derive from :class:`ValueError` so callers
can catch them the usual way.
"""


class WasstimeError(Exception):
    """Base class for all package errors."""


class InvalidInput(WasstimeError, ValueError):
    pass


# measures
class EmptyMeasure(InvalidInput):
    pass


class NegativeWeight(InvalidInput):
    pass


class NonFinite(InvalidInput):
    pass


class BadSum(InvalidInput):
    pass


class BadOrder(InvalidInput):
    pass


class BadInterval(InvalidInput):
    pass


# transport
class DimensionMismatch(InvalidInput):
    pass


class BadParameter(InvalidInput):
    pass


class NonOptimalPlan(InvalidInput):
    pass


class SolverFailure(WasstimeError, RuntimeError):
    pass


# dynamics
class ProjectionNotConverged(WasstimeError, RuntimeError):
    pass


# trajectories
class StepTooLarge(InvalidInput):
    pass


class PolicyOutOfBody(WasstimeError, RuntimeError):
    pass


class EndpointMismatch(InvalidInput):
    pass


class GridMismatch(InvalidInput):
    pass


class OffGrid(InvalidInput):
    pass


# targets
class NoClassicalCounterpart(InvalidInput):
    pass


class NonConvexFamily(InvalidInput):
    pass


# mintime
class NonIntegrable(InvalidInput):
    pass


class BadParameters(InvalidInput):
    pass


class BudgetExceeded(WasstimeError, RuntimeError):
    """Raised when greedy descent runs out of iterations; carries the partial report."""

    def __init__(self, message, report=None, trajectory=None):
        super().__init__(message)
        self.report = report
        self.trajectory = trajectory


class WrongOrder(InvalidInput):
    pass


class UnsupportedOracle(InvalidInput):
    pass


# hjb
class MemberMeasure(InvalidInput):
    pass


# cli
class ConfigError(InvalidInput):
    """Scenario configuration error; the message starts with the offending field path."""
