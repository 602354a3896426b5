from __future__ import annotations

import numpy
import numpy.typing


class Error(Exception):
    ...


class InvalidArgument(Error, ValueError):
    """A precondition on shapes, ranks or parameters does not hold."""


class ShapeMismatch(InvalidArgument):
    def __init__(self, operation: str, *shapes: tuple[int, ...]) -> None:
        super().__init__(f'{operation}: incompatible shapes {" and ".join(map(str, shapes))}.')
        self.shapes = shapes


class NonFiniteInput(InvalidArgument):
    ...


class MatrixMarketError(InvalidArgument):
    def __init__(self, message: str, /, *, line: int | None = None) -> None:
        super().__init__(message if line is None else f'line {line}: {message}')
        self.line = line


class NumericalError(Error, ArithmeticError):
    ...


class RankDeficient(NumericalError):
    """Orthonormalization met a column whose pivot norm fell below threshold.

    `q` is the orthonormal Householder basis computed anyway; callers that tolerate rank loss may use it.
    """

    def __init__(self, message: str, /, *, q: numpy.typing.NDArray[numpy.float64], column: int) -> None:
        super().__init__(message)
        self.q = q
        self.column = column


class NearSingular(NumericalError):
    ...


class NotConverged(NumericalError):
    def __init__(
        self,
        message: str,
        /,
        *,
        u: numpy.typing.NDArray[numpy.float64],
        s: numpy.typing.NDArray[numpy.float64],
        v: numpy.typing.NDArray[numpy.float64],
        sweeps: int,
    ) -> None:
        super().__init__(message)
        self.u, self.s, self.v = u, s, v
        self.sweeps = sweeps
