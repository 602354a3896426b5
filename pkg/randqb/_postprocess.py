"""Conversions of a QB factorization into truncated SVD, pivoted QR, interpolative and CUR factorizations.

Also exports factor sets as one CSV file per factor or as a single binary container:

    magic  b'RQB1'
    uint32 factor kind, uint32 number of arrays
    per array: uint32 name length, utf-8 name, uint64 rows, uint64 cols
    payloads in the same order, little-endian float64, column-major

All header integers are little-endian. Index vectors are stored as float64 columns.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
import pathlib
import struct
import typing

import numpy
import numpy.typing

from . import _dense
from . import _errors
from ._dense import DenseMatrix, SingularValues
from ._qb import QBFactors

logger = logging.getLogger(__name__)

type Indices = numpy.typing.NDArray[numpy.int64]

MAGIC = b'RQB1'
ID_ENTRY_FLAG = 10.0


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class SVDFactors:
    u: DenseMatrix
    sigma: SingularValues
    v: DenseMatrix

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    def truncate(self, k: int, /) -> SVDFactors:
        if not 0 <= k <= self.k:
            raise _errors.InvalidArgument(f'Cannot truncate a rank-{self.k} SVD to rank {k}.')
        return SVDFactors(u=self.u[:, :k], sigma=self.sigma[:k], v=self.v[:, :k])

    def reconstruct(self) -> DenseMatrix:
        return _dense.matmul(self.u * self.sigma, self.v, transpose_b=True)


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class PivotedQRFactors:
    q: DenseMatrix
    r: DenseMatrix
    pivots: Indices

    def reconstruct(self) -> DenseMatrix:
        """The approximant in the original column order."""

        approximant = numpy.empty((self.q.shape[0], self.r.shape[1]), order='F')
        approximant[:, self.pivots] = _dense.matmul(self.q, self.r)
        return approximant


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class IDFactors:
    column_indices: Indices
    y: DenseMatrix

    @property
    def max_abs_y(self) -> float:
        return float(numpy.abs(self.y).max()) if self.y.size else 0.0

    @property
    def flagged(self) -> bool:
        return self.max_abs_y > ID_ENTRY_FLAG

    def reconstruct(self, a: DenseMatrix, /) -> DenseMatrix:
        return _dense.matmul(a[:, self.column_indices], self.y)


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class CURFactors:
    column_indices: Indices
    row_indices: Indices
    u_mid: DenseMatrix
    residual_fro: float

    def reconstruct(self, a: DenseMatrix, /) -> DenseMatrix:
        return _dense.matmul(_dense.matmul(a[:, self.column_indices], self.u_mid), a[self.row_indices, :])


@dataclasses.dataclass(frozen=True)
class FixedRank:
    k: int


@dataclasses.dataclass(frozen=True)
class TailTolerance:
    """Smallest k whose discarded tail (Σ_{j>k} σⱼ²)^½ is at most `epsilon`."""
    epsilon: float


type RankRule = FixedRank | TailTolerance


def qb_to_svd(qb: QBFactors, a: DenseMatrix | None, rank_rule: RankRule, /) -> SVDFactors:
    if a is not None and a.shape != (qb.q.shape[0], qb.b.shape[1]):
        raise _errors.ShapeMismatch('qb_to_svd', a.shape, (qb.q.shape[0], qb.b.shape[1]))

    u_hat, d, v = _dense.jacobi_svd(qb.b)

    match rank_rule:
        case FixedRank(k) if not 0 <= k <= d.shape[0]:
            raise _errors.InvalidArgument(f'qb_to_svd: rank {k} requested from a rank-{d.shape[0]} QB factorization.')
        case FixedRank(k):
            ...
        case TailTolerance(epsilon):
            tails = numpy.append(numpy.sqrt(numpy.cumsum((d ** 2)[::-1])[::-1]), 0.0)
            k = int(numpy.argmax(tails <= epsilon))
        case _:
            raise _errors.InvalidArgument(f'Unknown rank rule {rank_rule!r}.')

    return SVDFactors(u=_dense.matmul(qb.q, u_hat[:, :k]), sigma=d[:k], v=numpy.asfortranarray(v[:, :k]))


def qb_to_qr(qb: QBFactors, /) -> PivotedQRFactors:
    q_tilde, r, pivots = _dense.pivoted_qr(qb.b)
    return PivotedQRFactors(q=_dense.matmul(qb.q, q_tilde), r=r, pivots=pivots)


def _interpolative(b: DenseMatrix, k: int, /) -> IDFactors:
    if not 1 <= k <= min(b.shape):
        raise _errors.InvalidArgument(f'ID rank k must be in [1, {min(b.shape)}], got {k}.')

    _, r, pivots = _dense.pivoted_qr(b, rank=k)
    t = _dense.back_substitute(r[:, :k], r[:, k:])
    y = numpy.zeros((k, b.shape[1]), order='F')
    y[:, pivots[:k]] = numpy.eye(k)
    y[:, pivots[k:]] = t
    return IDFactors(column_indices=pivots[:k].copy(), y=y)


def qb_to_id(qb: QBFactors, k: int, /) -> IDFactors:
    """Column ID of B (hence of A): B ≈ B(:, J)·Y from a partial pivoted QR of B."""

    factors = _interpolative(qb.b, k)
    if factors.flagged:
        logger.warning('qb_to_id: max |Y| = %.3g exceeds %g; the column skeleton is ill-conditioned.',
                       factors.max_abs_y, ID_ENTRY_FLAG)
    return factors


def qb_to_cur(qb: QBFactors, a: DenseMatrix, k: int, /) -> CURFactors:
    """Columns from the ID of B, rows from a pivoted QR of Cᵀ, and u_mid = C⁺·A·R⁺ by QR-based least squares."""

    column_indices = qb_to_id(qb, k).column_indices
    c = numpy.asfortranarray(a[:, column_indices])
    _, _, row_pivots = _dense.pivoted_qr(c.T, rank=k)
    row_indices = row_pivots[:k].copy()
    rows = numpy.asfortranarray(a[row_indices, :])

    q_c, r_c = _dense.householder_qr(c)
    q_r, r_r = _dense.householder_qr(rows.T)
    middle = _dense.matmul(_dense.matmul(q_c, a, transpose_a=True), q_r)
    x = _dense.back_substitute(r_c, middle)
    u_mid = numpy.asfortranarray(_dense.back_substitute(r_r, numpy.asfortranarray(x.T)).T)

    residual = a - _dense.matmul(_dense.matmul(c, u_mid), rows)
    return CURFactors(
        column_indices=column_indices,
        row_indices=row_indices,
        u_mid=u_mid,
        residual_fro=_dense.frobenius_norm(residual),
    )


class FactorKind(enum.IntEnum):
    qb = 1
    svd = 2
    qr = 3
    id = 4
    cur = 5


type Factors = QBFactors | SVDFactors | PivotedQRFactors | IDFactors | CURFactors


def _column(values: numpy.typing.ArrayLike, /) -> DenseMatrix:
    return numpy.asfortranarray(numpy.asarray(values, dtype=numpy.float64).reshape((-1, 1)))


def factor_arrays(factors: Factors, /) -> tuple[FactorKind, dict[str, DenseMatrix]]:
    match factors:
        case QBFactors(q=q, b=b):
            return FactorKind.qb, {'q': q, 'b': b}
        case SVDFactors(u=u, sigma=sigma, v=v):
            return FactorKind.svd, {'u': u, 'sigma': _column(sigma), 'v': v}
        case PivotedQRFactors(q=q, r=r, pivots=pivots):
            return FactorKind.qr, {'q': q, 'r': r, 'pivots': _column(pivots)}
        case IDFactors(column_indices=columns, y=y):
            return FactorKind.id, {'column_indices': _column(columns), 'y': y}
        case CURFactors(column_indices=columns, row_indices=rows, u_mid=u_mid):
            return FactorKind.cur, {'column_indices': _column(columns), 'row_indices': _column(rows), 'u_mid': u_mid}
        case _:
            raise _errors.InvalidArgument(f'Cannot export {type(factors).__name__}.')


def write_factors_csv(factors: Factors, directory: pathlib.Path, /) -> list[pathlib.Path]:
    """Writes `<name>.csv` per factor into `directory` at 17 significant digits; returns the paths."""

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _, arrays = factor_arrays(factors)
    paths = []
    for name, array in arrays.items():
        paths.append(path := directory / f'{name}.csv')
        numpy.savetxt(path, array, delimiter=',', fmt='%.17g')
    return paths


def write_factors_binary(factors: Factors, path: pathlib.Path, /) -> None:
    kind, arrays = factor_arrays(factors)
    with open(path, 'wb') as file:
        file.write(MAGIC + struct.pack('<II', kind, len(arrays)))
        for name, array in arrays.items():
            encoded = name.encode()
            file.write(struct.pack('<I', len(encoded)) + encoded + struct.pack('<QQ', *array.shape))
        for array in arrays.values():
            file.write(numpy.asarray(array, dtype='<f8').tobytes(order='F'))


def read_factors_binary(path: pathlib.Path, /) -> tuple[FactorKind, dict[str, DenseMatrix]]:
    data = pathlib.Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise _errors.InvalidArgument(f'{path}: not a factor container (magic {data[:4]!r}).')

    try:
        kind, count = struct.unpack_from('<II', data, 4)
        offset, shapes = 12, {}
        for _ in range(count):
            (length,) = struct.unpack_from('<I', data, offset)
            name = data[offset + 4:offset + 4 + length].decode()
            shapes[name] = struct.unpack_from('<QQ', data, offset + 4 + length)
            offset += 4 + length + 16
    except (struct.error, UnicodeDecodeError) as e:
        raise _errors.InvalidArgument(f'{path}: malformed factor container header ({e}).') from None

    arrays = {}
    for name, (rows, cols) in shapes.items():
        size = rows * cols * 8
        if offset + size > len(data):
            raise _errors.InvalidArgument(f'{path}: truncated payload for factor {name!r}.')
        arrays[name] = numpy.frombuffer(data, dtype='<f8', count=rows * cols, offset=offset).reshape(
            (rows, cols), order='F'
        ).astype(numpy.float64, order='F')
        offset += size
    return FactorKind(kind), arrays


def export_factors(
    factors: Factors,
    out: pathlib.Path,
    /,
    *,
    container: typing.Literal['csv', 'binary', 'both'] = 'csv',
) -> list[pathlib.Path]:
    out = pathlib.Path(out)
    paths = write_factors_csv(factors, out) if container in ('csv', 'both') else []
    if container in ('binary', 'both'):
        out.mkdir(parents=True, exist_ok=True)
        write_factors_binary(factors, path := out / 'factors.rqb')
        paths.append(path)
    return paths
