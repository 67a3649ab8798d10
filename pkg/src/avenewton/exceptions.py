"""Exception types raised across the package."""


class AveError(Exception):
    """Base class for all package errors."""


class DimensionError(AveError, ValueError):
    """Operand shapes do not agree."""


class SingularMatrixError(AveError, ArithmeticError):
    """A direct factorization hit a zero or negligible pivot."""


class BreakdownError(AveError, ArithmeticError):
    """An iterative method produced non-finite values."""


class NotConvergedError(AveError, RuntimeError):
    """An eigen/singular value iteration exhausted its budget."""


class BoundNotApplicableError(AveError, ValueError):
    """A convergence bound was requested outside the hypothesis it needs."""


class ProblemFormatError(AveError, ValueError):
    """A problem file or suite manifest is malformed."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
