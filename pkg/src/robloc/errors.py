"""Exception hierarchy shared across the package."""


class RoblocError(Exception):
    """Base class for all package errors."""


class NonFiniteResidual(RoblocError):
    """A residual sample contains NaN or infinity."""


class NoConvergence(RoblocError):
    """An iterative solver exhausted its iteration budget."""


class Underdetermined(RoblocError):
    """Fewer observed cases than free parameters."""


class DegenerateDesign(RoblocError):
    """Every candidate subset of the design was singular."""


class EmptyObservedSet(RoblocError):
    """No rows with an observed response."""


class EmptyDistribution(RoblocError):
    """A distribution with no support points."""


class DegenerateConstant(RoblocError):
    """An influence-function denominator is numerically zero."""


class SingularA0(RoblocError):
    """The gradient covariance matrix is singular."""


class ZeroDensity(RoblocError):
    """A density value required to be positive is zero."""


class MeanHasNoUABP(RoblocError):
    """The mean functional has no uniform breakdown guarantee."""


class ParseError(RoblocError):
    """Malformed input data; carries row/column location."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingCovariate(ParseError):
    """A covariate cell is empty or non-numeric."""


class IndicatorConflict(ParseError):
    """Indicator column disagrees with response presence."""
