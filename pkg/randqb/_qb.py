"""Randomized QB range finders: fixed-rank, blocked adaptive, power scheme, and blocked power scheme."""
from __future__ import annotations

import dataclasses
import enum
import logging
import math
import typing

import annotated_types
import numpy

from . import _dense
from . import _errors
from . import _log
from . import _rng
from ._dense import DenseMatrix

logger = logging.getLogger(__name__)

EXHAUSTED_TOLERANCE = 1e-14


class StoppedBy(enum.StrEnum):
    tolerance = enum.auto()
    rank_limit = enum.auto()
    matrix_exhausted = enum.auto()


class ReorthMode(enum.StrEnum):
    full = enum.auto()
    none = enum.auto()


@dataclasses.dataclass(frozen=True, kw_only=True)
class StopCriterion:
    """Stop when the Frobenius residual drops below `epsilon` (absolute; 0 disables) or the rank reaches `max_rank`.

    `max_rank` of None means min(m, n).
    """
    epsilon: typing.Annotated[float, annotated_types.Ge(0.0)] = 0.0
    max_rank: typing.Annotated[int, annotated_types.Ge(1)] | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise _errors.InvalidArgument(f'epsilon must be finite and >= 0, got {self.epsilon}.')
        if self.max_rank is not None and self.max_rank < 1:
            raise _errors.InvalidArgument(f'max_rank must be >= 1, got {self.max_rank}.')

    @classmethod
    def relative(cls, a: DenseMatrix, tol_rel: float, /, max_rank: int | None = None) -> StopCriterion:
        return cls(epsilon=tol_rel * _dense.frobenius_norm(a), max_rank=max_rank)

    def rank_limit(self, a: DenseMatrix, /) -> int:
        if self.max_rank is None:
            return min(a.shape)
        if self.max_rank > min(a.shape):
            raise _errors.InvalidArgument(f'max_rank {self.max_rank} exceeds min{a.shape}.')
        return self.max_rank


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class QBFactors:
    q: DenseMatrix
    b: DenseMatrix
    block_size: int
    power: int
    residual_history: tuple[float, ...]
    stopped_by: StoppedBy
    downdate_history: tuple[float, ...] = ()
    reorth_mode: ReorthMode = ReorthMode.full

    @property
    def rank(self) -> int:
        return self.q.shape[1]

    def reconstruct(self) -> DenseMatrix:
        return _dense.matmul(self.q, self.b)


def _check_ell(a: DenseMatrix, ell: int, /) -> None:
    if not 1 <= ell <= min(a.shape):
        raise _errors.InvalidArgument(f'ell must be in [1, {min(a.shape)}] for shape {a.shape}, got {ell}.')


def _check_power(p: int, /) -> None:
    if p < 0:
        raise _errors.InvalidArgument(f'power p must be >= 0, got {p}.')


def _orthonormalize(
    x: DenseMatrix,
    /,
    *,
    strict: bool,
    level: int = logging.WARNING,
) -> tuple[DenseMatrix, bool]:
    """orth(x), falling back to the Householder basis on rank loss unless `strict`. Returns (q, deficient)."""

    try:
        return _dense.orth(x), False
    except _errors.RankDeficient as e:
        if strict:
            raise
        logger.log(level, 'Sample of shape %s lost rank at column %d; keeping the Householder basis.', x.shape, e.column)
        return e.q, True


def _sample_basis(
    a: DenseMatrix,
    omega: DenseMatrix,
    p: int,
    /,
    *,
    reorth_mode: ReorthMode,
    strict: bool,
    level: int = logging.WARNING,
) -> tuple[DenseMatrix, bool]:
    y = _dense.matmul(a, omega)
    match reorth_mode:
        case ReorthMode.full:
            q, deficient = _orthonormalize(y, strict=strict, level=level)
            for _ in range(p):
                q, lost = _orthonormalize(_dense.matmul(a, q, transpose_a=True), strict=strict, level=level)
                deficient |= lost
                q, lost = _orthonormalize(_dense.matmul(a, q), strict=strict, level=level)
                deficient |= lost
            return q, deficient
        case ReorthMode.none:
            for _ in range(p):
                y = _dense.matmul(a, _dense.matmul(a, y, transpose_a=True))
            # Directions lost to round-off in the un-orthonormalized powers stay lost; no rank check here.
            return _dense.orth(y, check_rank=False), False


def _downdate(previous: float, b: DenseMatrix, /) -> float:
    return math.sqrt(max(previous ** 2 - _dense.frobenius_norm(b) ** 2, 0.0))


@_log.Decorator()
def rand_qb(a: DenseMatrix, ell: int, stream: _rng.RngStream, /, *, strict: bool = False) -> QBFactors:
    """Q = orth(AΩ), B = QᵀA for a Gaussian n×ℓ test matrix Ω."""

    a = _dense.as_dense(a)
    _check_ell(a, ell)

    omega = _rng.gaussian_matrix(stream, a.shape[1], ell)
    q, _ = _orthonormalize(_dense.matmul(a, omega), strict=strict)
    b = _dense.matmul(q, a, transpose_a=True)

    return QBFactors(
        q=q,
        b=b,
        block_size=ell,
        power=0,
        residual_history=(_dense.frobenius_norm(a - _dense.matmul(q, b)),),
        stopped_by=StoppedBy.rank_limit,
        downdate_history=(_downdate(_dense.frobenius_norm(a), b),),
    )


@_log.Decorator()
def rand_qb_p(
    a: DenseMatrix,
    ell: int,
    p: int,
    stream: _rng.RngStream,
    /,
    *,
    reorth_mode: ReorthMode = ReorthMode.full,
    strict: bool = False,
) -> QBFactors:
    """Power scheme: the sample AΩ is refined by P applications of AAᵀ, orthonormalizing between each product.

    With `reorth_mode=none` only the final (AAᵀ)ᴾAΩ is orthonormalized, which caps attainable accuracy at about
    ε_mach^(1/(2P+1)).
    """

    a = _dense.as_dense(a)
    _check_ell(a, ell)
    _check_power(p)
    reorth_mode = ReorthMode(reorth_mode)

    omega = _rng.gaussian_matrix(stream, a.shape[1], ell)
    q, _ = _sample_basis(a, omega, p, reorth_mode=reorth_mode, strict=strict)
    b = _dense.matmul(q, a, transpose_a=True)

    return QBFactors(
        q=q,
        b=b,
        block_size=ell,
        power=p,
        residual_history=(_dense.frobenius_norm(a - _dense.matmul(q, b)),),
        stopped_by=StoppedBy.rank_limit,
        downdate_history=(_downdate(_dense.frobenius_norm(a), b),),
        reorth_mode=reorth_mode,
    )


def reproject(q_new: DenseMatrix, q_prev_blocks: typing.Sequence[DenseMatrix], /) -> DenseMatrix:
    """orth(q_new − Σⱼ QⱼQⱼᵀq_new); identity when there are no previous blocks.

    Collapse is measured against ‖q_new‖_F, so a block lying inside the previous span raises RankDeficient.
    """

    if not q_prev_blocks:
        return q_new
    for q_j in q_prev_blocks:
        if q_j.shape[0] != q_new.shape[0]:
            raise _errors.ShapeMismatch('reproject', q_new.shape, q_j.shape)

    y = numpy.array(q_new, dtype=numpy.float64, order='F')
    for q_j in q_prev_blocks:
        y -= _dense.matmul(q_j, _dense.matmul(q_j, q_new, transpose_a=True))
    return _dense.orth(y, reference=_dense.frobenius_norm(q_new))


def _blocked(
    a: DenseMatrix,
    stop: StopCriterion,
    p: int,
    b: int,
    stream: _rng.RngStream,
    /,
    *,
    reorth_mode: ReorthMode,
    reprojecting: bool,
    overwrite_a: bool,
    strict: bool,
) -> QBFactors:
    if b < 1:
        raise _errors.InvalidArgument(f'block size b must be >= 1, got {b}.')
    _check_power(p)
    reorth_mode = ReorthMode(reorth_mode)

    if overwrite_a:
        if not (isinstance(a, numpy.ndarray) and a.dtype == numpy.float64 and a.ndim == 2
                and a.flags.f_contiguous and a.flags.writeable):
            raise _errors.InvalidArgument('overwrite_a needs a writeable column-major float64 matrix.')
        residual = _dense.as_dense(a)
    else:
        residual = numpy.array(_dense.as_dense(a), order='F')

    rows, cols = residual.shape
    max_rank = stop.rank_limit(residual)
    norm = initial = _dense.frobenius_norm(residual)
    exhausted = EXHAUSTED_TOLERANCE * initial

    def reason(rank: int) -> StoppedBy | None:
        if norm < stop.epsilon:
            return StoppedBy.tolerance
        if rank >= max_rank:
            return StoppedBy.rank_limit
        if norm <= exhausted:
            return StoppedBy.matrix_exhausted
        return None

    qs, bs, history, downdates = [], [], [], []
    rank = 0
    while (stopped_by := reason(rank)) is None:
        width = min(b, max_rank - rank)
        omega = _rng.gaussian_matrix(stream, cols, width)
        q_i, deficient = _sample_basis(
            residual, omega, p, reorth_mode=reorth_mode, strict=strict, level=logging.DEBUG,
        )
        if reprojecting and qs:
            try:
                q_i = reproject(q_i, qs)
            except _errors.RankDeficient as e:
                if strict:
                    raise
                q_i, deficient = e.q, True

        b_i = _dense.matmul(q_i, residual, transpose_a=True)
        residual -= _dense.matmul(q_i, b_i)
        downdates.append(_downdate(norm, b_i))
        norm = _dense.frobenius_norm(residual)
        qs.append(q_i)
        bs.append(b_i)
        history.append(norm)
        rank += width

        if deficient and norm > exhausted and reason(rank) is None:
            raise _errors.RankDeficient(
                f'Block {len(qs)} lost rank with residual {norm:.3e} above the exhaustion level {exhausted:.3e}.',
                q=q_i,
                column=rank - width,
            )

    logger.debug('Blocked QB stopped by %s at rank %d with residual %.3e.', stopped_by, rank, norm)

    return QBFactors(
        q=numpy.asfortranarray(numpy.hstack(qs)) if qs else numpy.zeros((rows, 0), order='F'),
        b=numpy.asfortranarray(numpy.vstack(bs)) if bs else numpy.zeros((0, cols), order='F'),
        block_size=b,
        power=p,
        residual_history=tuple(history),
        stopped_by=stopped_by,
        downdate_history=tuple(downdates),
        reorth_mode=reorth_mode,
    )


@_log.Decorator()
def rand_qb_b(
    a: DenseMatrix,
    stop: StopCriterion,
    b: int,
    stream: _rng.RngStream,
    /,
    *,
    reproject: bool = True,
    overwrite_a: bool = False,
    strict: bool = False,
) -> QBFactors:
    """Blocked adaptive range finder.

    Each block draws Ωᵢ (n×b), takes Qᵢ = orth(A⁽ⁱ⁻¹⁾Ωᵢ), reprojects it against earlier blocks when `reproject` is set,
    and peels off Bᵢ = QᵢᵀA⁽ⁱ⁻¹⁾. Stops once ‖A⁽ⁱ⁾‖_F < stop.epsilon, the rank reaches stop.max_rank (the last block is
    narrowed to land on it), or the residual is exhausted at 1e-14·‖A‖_F.

    `overwrite_a` lets the residual overwrite `a` in place.
    """

    return _blocked(
        a, stop, 0, b, stream,
        reorth_mode=ReorthMode.full, reprojecting=reproject, overwrite_a=overwrite_a, strict=strict,
    )


@_log.Decorator()
def rand_qb_pb(
    a: DenseMatrix,
    stop: StopCriterion,
    p: int,
    b: int,
    stream: _rng.RngStream,
    /,
    *,
    reorth_mode: ReorthMode = ReorthMode.full,
    reproject: bool = True,
    overwrite_a: bool = False,
    strict: bool = False,
) -> QBFactors:
    """Blocked adaptive range finder with P power iterations per block, applied to the current residual."""

    return _blocked(
        a, stop, p, b, stream,
        reorth_mode=reorth_mode, reprojecting=reproject, overwrite_a=overwrite_a, strict=strict,
    )
