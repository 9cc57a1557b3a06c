"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class LladError(Exception):
    """Base class for user-facing errors (CLI exit code 1)."""


class ParseError(LladError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class ShapeMismatch(LladError):
    pass


class TypeCheckError(LladError):
    pass


class UnboundVar(TypeCheckError):
    pass


class LinearityViolation(TypeCheckError):
    pass


class TypeMismatch(TypeCheckError):
    pass


class NonExponentialDuplication(LinearityViolation):
    pass


class AffineViolation(TypeCheckError):
    pass


class FuelExhausted(LladError):
    pass


class NotSafe(LladError):
    pass


class NotClosed(LladError):
    pass


class IllTyped(LladError):
    pass


class SortError(LladError):
    pass


class NotPrimal(SortError):
    """The input of the forward transformation is not a primal program."""


class NotSortR(SortError):
    """A pair term was expected."""


class TangentLinearityViolation(LladError):
    pass


class NotLinearB(LladError):
    pass


class NotInFragment(LladError):
    """Raised when a term is outside the sorted fragment a transform expects."""


class OverlappingCodomains(LladError):
    pass


class DegreeOverflow(LladError):
    pass
