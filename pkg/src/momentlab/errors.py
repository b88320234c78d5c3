"""Exception types raised across the package."""


class MomentLabError(Exception):
    """Base class for all package errors."""


class NotInvertible(MomentLabError, ValueError):
    pass


class BadFrequency(MomentLabError, ValueError):
    pass


class NonDivisible(MomentLabError, ValueError):
    pass


class PatternMismatch(MomentLabError, ValueError):
    pass


class BudgetExceeded(MomentLabError, RuntimeError):
    """Raised when a computation would exceed its work budget.

    ``partial`` carries whatever was computed before the budget ran out.
    """

    def __init__(self, msg: str, partial=None):
        super().__init__(msg)
        self.partial = partial


class DegenerateSupport(MomentLabError, ValueError):
    pass


class QuadratureFailure(MomentLabError, RuntimeError):
    pass


class NoStationaryPoint(MomentLabError, ValueError):
    pass


class MultipleStationaryPoints(MomentLabError, ValueError):
    pass


class ConditionViolation(MomentLabError, UserWarning):
    pass


class StationaryPointPresent(MomentLabError, ValueError):
    pass


class DegenerateHessian(MomentLabError, ValueError):
    pass


class DegenerateConfiguration(MomentLabError, ValueError):
    pass


class ZeroLeadingCoefficient(MomentLabError, ValueError):
    pass


class OutOfRange(MomentLabError, IndexError):
    pass


class PoleEncountered(MomentLabError, ValueError):
    pass


class TableTooSmall(MomentLabError, ValueError):
    pass


class ContourFailure(MomentLabError, RuntimeError):
    pass


class TruncationTooSmall(MomentLabError, RuntimeError):
    pass


class RegimeViolation(MomentLabError, ValueError):
    pass


class ConvergenceFailure(MomentLabError, RuntimeError):
    pass


class InsufficientData(MomentLabError, ValueError):
    pass
