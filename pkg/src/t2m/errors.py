"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class T2MError(Exception):
    """Base class for all errors raised by t2m."""


class DomainError(T2MError, ValueError):
    """A point lies outside the open set a map or chart is defined on."""


class ShapeError(T2MError, ValueError):
    """Vector or matrix dimensions do not match."""


class ParameterError(T2MError, ValueError):
    """A numeric parameter (step, tolerance, level index) is out of range."""


class UnknownChartError(T2MError, LookupError):
    pass


class EmptyOverlapError(T2MError, LookupError):
    pass


class ChartMismatchError(T2MError, ValueError):
    """Objects living in different charts were combined without a transition."""


class SingularDifferentialError(T2MError, ArithmeticError):
    """The differential of a transition is not invertible at a point."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class IncompatibleConnectionError(T2MError):
    """Christoffel fields violate the compatibility condition across an overlap.

    ``residual`` carries the worst residual norm found and ``point`` the
    chart coordinates where it occurred.
    """

    def __init__(self, message: str, residual: float, point=None):
        super().__init__(message)
        self.residual = residual
        self.point = point


class ExtractionError(T2MError):
    """Supplied fiber maps cannot come from a linear connection."""


class ReconstructionError(T2MError):
    """A level family violates the projective compatibility relations."""

    def __init__(self, message: str, pair: tuple[int, int], residual: float):
        super().__init__(message)
        self.pair = pair
        self.residual = residual


class ConfigError(T2MError):
    """Fixture configuration could not be parsed or is inconsistent."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)
        self.line = line
        self.column = column
