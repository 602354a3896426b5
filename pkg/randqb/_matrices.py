"""Synthetic test matrices with known spectra, and Matrix Market (.mtx) ingestion.

Families:
- fast_decay: A = U·diag(d)·Vᵀ with dⱼ = gⱼ²·βʲ⁻¹, gⱼ uniform in [0, 1);
- slow_decay: dⱼ = (1 + 200(j−1))^(−1/2);
- sparse: Σⱼ wⱼ·xⱼyⱼᵀ over sparse uniform vectors, wⱼ = 2/j for j ≤ 10 and 1/j after;
- kahan: S·K, S = diag(1, ζ, ζ², …), K unit upper triangular with −φ above the diagonal, ζ² + φ² = 1;
- s_shaped: d hovers near 1, falls geometrically between two knots, then levels out at a plateau.
"""
from __future__ import annotations

import enum
import logging
import math
import pathlib
import typing

import annotated_types
import numpy
import pydantic

from . import _dense
from . import _errors
from . import _rng
from ._dense import DenseMatrix, SingularValues

logger = logging.getLogger(__name__)


class Family(enum.StrEnum):
    fast_decay = enum.auto()
    slow_decay = enum.auto()
    sparse = enum.auto()
    kahan = enum.auto()
    s_shaped = enum.auto()


MATRIX_IDS: dict[str, Family] = {
    'm1': Family.fast_decay,
    'm2': Family.slow_decay,
    'm3': Family.sparse,
    'm4': Family.kahan,
    'm5': Family.s_shaped,
}
WITH_SPECTRUM = frozenset({Family.fast_decay, Family.slow_decay, Family.s_shaped})

type Count = typing.Annotated[int, annotated_types.Ge(1)]
type Fraction = typing.Annotated[float, annotated_types.Interval(gt=0.0, lt=1.0)]


class TestMatrixSpec(pydantic.BaseModel):
    """A reproducible test matrix: family, shape, seed and the family's knobs.

    m×n defaults to 800×600, or 1000×1000 for kahan.
    """
    __test__: typing.ClassVar[bool] = False
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    family: Family
    m: Count
    n: Count
    seed: _rng.Seed = 0

    beta: Fraction = 0.65
    density: typing.Annotated[float, annotated_types.Interval(gt=0.0, le=1.0)] = 0.01
    zeta: Fraction = 0.99
    random_zeta: bool = False
    knots: tuple[Count, Count] = (30, 60)
    plateau: typing.Annotated[float, annotated_types.Gt(0.0)] = 10.0 ** -2.5
    hover: tuple[float, float] = (0.9, 1.0)
    unit_top: bool = False

    @pydantic.model_validator(mode='before')
    @classmethod
    def _default_shape(cls, data: typing.Any) -> typing.Any:
        if isinstance(data, dict) and (family := data.get('family')) is not None:
            side = (1000, 1000) if family == Family.kahan else (800, 600)
            data = {'m': side[0], 'n': side[1], **data}
        return data

    @pydantic.model_validator(mode='after')
    def _check_knobs(self) -> typing.Self:
        if self.knots[0] >= self.knots[1]:
            raise ValueError(f'knots must be increasing, got {self.knots}.')
        if not 0.0 < self.hover[0] <= self.hover[1]:
            raise ValueError(f'hover must satisfy 0 < low <= high, got {self.hover}.')
        if self.plateau >= self.hover[0]:
            raise ValueError(f'plateau {self.plateau} must lie below the hover band {self.hover}.')
        if self.unit_top and self.family not in WITH_SPECTRUM:
            raise ValueError(f'unit_top needs a family with a known spectrum, not {self.family}.')
        return self

    @classmethod
    def from_id(cls, matrix_id: str, /, **overrides: typing.Any) -> TestMatrixSpec:
        if (family := MATRIX_IDS.get(matrix_id)) is None:
            raise _errors.InvalidArgument(f'Unknown matrix id {matrix_id!r}; expected one of {sorted(MATRIX_IDS)}.')
        return cls(family=family, **overrides)

    @property
    def matrix_id(self) -> str:
        return next(matrix_id for matrix_id, family in MATRIX_IDS.items() if family == self.family)


class OptimalErrors(typing.NamedTuple):
    fro: float
    spec: float


def _from_spectrum(stream: _rng.RngStream, m: int, n: int, d: SingularValues, /) -> DenseMatrix:
    u = _dense.orth(_rng.gaussian_matrix(stream, m, d.shape[0]))
    v = _dense.orth(_rng.gaussian_matrix(stream, n, d.shape[0]))
    return _dense.matmul(u * d, v, transpose_b=True)


def _s_shaped(spec: TestMatrixSpec, stream: _rng.RngStream, k: int, /) -> SingularValues:
    first, second = spec.knots
    low, high = spec.hover
    d = numpy.full(k, spec.plateau)
    top = min(first, k)
    d[:top] = numpy.sort(low + (high - low) * stream.uniform(top))[::-1]
    if k > first:
        # 1-based j in (first, second] falls from d_first to the plateau.
        j = numpy.arange(first + 1, min(second, k) + 1)
        d[j - 1] = d[first - 1] * (spec.plateau / d[first - 1]) ** ((j - first) / (second - first))
    return d


def gen_test_matrix(
    spec: TestMatrixSpec,
    stream: _rng.RngStream | None = None,
    /,
) -> tuple[DenseMatrix, SingularValues | None]:
    """Returns (A, d) where d is the exact non-increasing spectrum used, or None for sparse and kahan.

    `stream` defaults to a fresh stream seeded with `spec.seed`.
    """

    stream = _rng.RngStream.from_seed(spec.seed) if stream is None else stream
    m, n = spec.m, spec.n
    k = min(m, n)
    j = numpy.arange(k)

    match spec.family:
        case Family.fast_decay:
            g = stream.uniform(k)
            d = numpy.sort(g ** 2 * spec.beta ** j)[::-1].copy()
        case Family.slow_decay:
            d = (1.0 + 200.0 * j) ** -0.5
        case Family.s_shaped:
            d = _s_shaped(spec, stream, k)
        case Family.sparse:
            x = numpy.empty((m, k), order='F')
            y = numpy.empty((n, k), order='F')
            for i in range(k):
                x[:, i] = _rng.sparse_uniform_vector(stream, m, spec.density)[:, 0]
                y[:, i] = _rng.sparse_uniform_vector(stream, n, spec.density)[:, 0]
            weights = numpy.where(j < 10, 2.0, 1.0) / (j + 1.0)
            return _dense.matmul(x * weights, y, transpose_b=True), None
        case Family.kahan:
            zeta = 0.95 + 0.049 * float(stream.uniform(1)[0]) if spec.random_zeta else spec.zeta
            phi = math.sqrt(1.0 - zeta ** 2)
            k_upper = numpy.triu(numpy.full((m, n), -phi), 1) + numpy.eye(m, n)
            return numpy.asfortranarray(zeta ** numpy.arange(m)[:, None] * k_upper), None
        case _:
            raise _errors.InvalidArgument(f'Unknown family {spec.family!r}.')

    if spec.unit_top:
        d = d / d[0]
    return _from_spectrum(stream, m, n, d), d


def optimal_errors(d: SingularValues, k: int, /) -> OptimalErrors:
    """Errors of the best rank-k approximation: (‖A − A_k‖_F, ‖A − A_k‖₂) = ((Σ_{j>k} dⱼ²)^½, d_{k+1})."""

    if not 0 <= k <= len(d):
        raise _errors.InvalidArgument(f'k must be in [0, {len(d)}], got {k}.')
    tail = numpy.sort(numpy.asarray(d, dtype=numpy.float64))[::-1][k:]
    return OptimalErrors(fro=math.sqrt(float(numpy.sum(tail ** 2))), spec=float(tail[0]) if tail.size else 0.0)


def _tokens(path: pathlib.Path, /) -> typing.Iterator[tuple[int, list[str]]]:
    with open(path) as file:
        for number, line in enumerate(file, start=1):
            if number > 1 and (line.startswith('%') or not line.strip()):
                continue
            yield number, line.split()


def _parse[T](parse: typing.Callable[[str], T], token: str, line: int, /) -> T:
    try:
        return parse(token)
    except ValueError:
        raise _errors.MatrixMarketError(f'cannot parse {token!r}.', line=line) from None


def load_matrix_market(path: pathlib.Path, /) -> DenseMatrix:
    """Reads a real general Matrix Market file, array or coordinate layout, as a dense matrix.

    Duplicate coordinate entries are summed.
    """

    lines = _tokens(pathlib.Path(path))
    line, header = next(lines, (1, []))
    if len(header) != 5 or header[0] != '%%MatrixMarket' or header[1].lower() != 'matrix':
        raise _errors.MatrixMarketError('expected a "%%MatrixMarket matrix <layout> <field> <symmetry>" header.', line=1)
    layout, field, symmetry = (token.lower() for token in header[2:])
    if layout not in ('array', 'coordinate'):
        raise _errors.MatrixMarketError(f'unsupported layout {layout!r}.', line=line)
    if field not in ('real', 'integer', 'double'):
        raise _errors.MatrixMarketError(f'unsupported field {field!r}; only real matrices are read.', line=line)
    if symmetry != 'general':
        raise _errors.MatrixMarketError(f'unsupported symmetry {symmetry!r}; only general matrices are read.', line=line)

    line, size = next(lines, (line + 1, []))
    if len(size) != (2 if layout == 'array' else 3):
        raise _errors.MatrixMarketError(f'malformed size line {" ".join(size)!r}.', line=line)
    rows, cols, *entries = (_parse(int, token, line) for token in size)
    if rows < 0 or cols < 0:
        raise _errors.MatrixMarketError(f'negative dimensions {rows}x{cols}.', line=line)

    a = numpy.zeros((rows, cols), order='F')
    count = 0
    if layout == 'array':
        values = a.reshape(-1, order='F')
        for line, tokens in lines:
            if len(tokens) != 1:
                raise _errors.MatrixMarketError(f'expected one value, got {len(tokens)} tokens.', line=line)
            if count == values.size:
                raise _errors.MatrixMarketError(f'more than {values.size} values.', line=line)
            values[count] = _parse(float, tokens[0], line)
            count += 1
        expected = rows * cols
    else:
        for line, tokens in lines:
            if len(tokens) != 3:
                raise _errors.MatrixMarketError(f'expected "row col value", got {len(tokens)} tokens.', line=line)
            i, j = _parse(int, tokens[0], line), _parse(int, tokens[1], line)
            if not (1 <= i <= rows and 1 <= j <= cols):
                raise _errors.MatrixMarketError(f'entry ({i}, {j}) outside {rows}x{cols}.', line=line)
            a[i - 1, j - 1] += _parse(float, tokens[2], line)
            count += 1
        (expected,) = entries

    if count != expected:
        raise _errors.MatrixMarketError(f'expected {expected} entries, found {count}.', line=line)
    return _dense.as_dense(a, name=str(path))


def save_matrix_market(
    path: pathlib.Path,
    a: DenseMatrix,
    /,
    *,
    layout: typing.Literal['array', 'coordinate'] = 'array',
) -> None:
    """Writes `a` at 17 significant digits, which reads back bit-equal. Coordinate layout lists nonzeros only."""

    a = _dense.as_dense(a)
    rows, cols = a.shape
    with open(path, 'w') as file:
        file.write(f'%%MatrixMarket matrix {layout} real general\n')
        match layout:
            case 'array':
                file.write(f'{rows} {cols}\n')
                file.writelines(f'{value:.17g}\n' for value in a.reshape(-1, order='F'))
            case 'coordinate':
                j, i = numpy.nonzero(a.T)
                file.write(f'{rows} {cols} {i.size}\n')
                file.writelines(f'{r + 1} {c + 1} {a[r, c]:.17g}\n' for r, c in zip(i, j))
            case _:
                raise _errors.InvalidArgument(f'Unknown Matrix Market layout {layout!r}.')
