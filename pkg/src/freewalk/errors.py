"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (CLI exit code 1),
numerical failures from :class:`NumericalError` (CLI exit code 2).
"""


class FreewalkError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(FreewalkError, ValueError):
    pass


class NotSymmetric(ValidationError):
    pass


class WeightsNotProbability(ValidationError):
    pass


class NotAdmissible(ValidationError):
    pass


class NegativeWeight(ValidationError):
    pass


class NumericalError(FreewalkError, ArithmeticError):
    pass


class DomainError(NumericalError, ValueError):
    pass


class BudgetExceeded(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class InfiniteTheta(NumericalError):
    pass


class InfiniteFlag(NumericalError):
    """A requested derivative is infinite at the evaluation point."""


class FitUnstable(NumericalError):
    pass


class RootBracketFailure(NumericalError):
    pass


class NoSignChange(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class ReversionFailure(NumericalError):
    pass


class UpstreamAccuracy(NumericalError):
    pass


class DegenerateDesignMatrix(NumericalError):
    pass


class WindowTooShort(NumericalError):
    pass


class PreconditionFailed(NumericalError):
    """An operation was called on a configuration it does not apply to."""
