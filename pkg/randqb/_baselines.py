"""Reference algorithms: column-pivoted Gram-Schmidt, single-vector greedy randomized QB, truncated SVD."""
from __future__ import annotations

import logging
import math

import numpy

from . import _dense
from . import _errors
from . import _log
from . import _rng
from ._dense import DenseMatrix
from ._postprocess import PivotedQRFactors, SVDFactors
from ._qb import EXHAUSTED_TOLERANCE, QBFactors, StoppedBy

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12
RECOMPUTE_FRACTION = 0.1


def _check_rank(a: DenseMatrix, k: int, /) -> None:
    if not 1 <= k <= min(a.shape):
        raise _errors.InvalidArgument(f'k must be in [1, {min(a.shape)}] for shape {a.shape}, got {k}.')


@_log.Decorator()
def cpqr_partial(a: DenseMatrix, k: int, /, *, reorth: bool = True) -> PivotedQRFactors:
    """Greedy column-pivoted modified Gram-Schmidt QR, stopped after k columns.

    Each step takes the remaining column of largest residual norm. Norms within a relative 1e-12 of the largest count
    as tied, and ties go to the lowest position. Norms are downdated and recomputed once a column loses 90% of its
    norm since the last exact computation. With `reorth`, each new q gets one more Gram-Schmidt pass against the
    previous columns. Returns early, with fewer than k columns, if the residual becomes exactly zero.
    """

    a = _dense.as_dense(a)
    _check_rank(a, k)

    rows, cols = a.shape
    work = numpy.array(a, order='F')
    pivots = numpy.arange(cols)
    q = numpy.zeros((rows, k), order='F')
    r = numpy.zeros((k, cols), order='F')
    norms = numpy.einsum('ij,ij->j', work, work)
    reference = norms.copy()

    rank = 0
    for j in range(k):
        remaining = norms[j:]
        if (top := float(remaining.max())) <= 0.0:
            break
        p = j + int(numpy.flatnonzero(remaining >= top * (1.0 - TIE_TOLERANCE))[0])
        if p != j:
            for array in (work, r):
                array[:, [j, p]] = array[:, [p, j]]
            for vector in (pivots, norms, reference):
                vector[[j, p]] = vector[[p, j]]

        if (column_norm := float(numpy.linalg.norm(work[:, j]))) == 0.0:
            break
        column = work[:, j] / column_norm
        if reorth and j:
            column -= q[:, :j] @ (q[:, :j].T @ column)
            column /= numpy.linalg.norm(column)
        q[:, j] = column

        r[j, j:] = column @ work[:, j:]
        work[:, j:] -= numpy.outer(column, r[j, j:])

        norms[j] = 0.0
        norms[j + 1:] = numpy.maximum(norms[j + 1:] - r[j, j + 1:] ** 2, 0.0)
        stale = j + 1 + numpy.flatnonzero(norms[j + 1:] < RECOMPUTE_FRACTION ** 2 * reference[j + 1:])
        if stale.size:
            norms[stale] = reference[stale] = numpy.einsum('ij,ij->j', work[:, stale], work[:, stale])
        rank = j + 1

    if rank < k:
        logger.info('cpqr_partial: residual exhausted at rank %d of %d.', rank, k)

    return PivotedQRFactors(q=numpy.asfortranarray(q[:, :rank]), r=numpy.asfortranarray(r[:rank]), pivots=pivots)


@_log.Decorator()
def greedy_rand_single(a: DenseMatrix, k: int, p: int, stream: _rng.RngStream, /) -> QBFactors:
    """Greedy randomized QB one vector at a time: qⱼ ∝ (AAᵀ)ᴾAω on the current residual, reorthogonalized."""

    a = _dense.as_dense(a)
    _check_rank(a, k)
    if p < 0:
        raise _errors.InvalidArgument(f'power p must be >= 0, got {p}.')

    rows, cols = a.shape
    residual = numpy.array(a, order='F')
    norm = initial = _dense.frobenius_norm(residual)
    exhausted = EXHAUSTED_TOLERANCE * initial

    def unit(x: numpy.ndarray) -> numpy.ndarray | None:
        return None if (length := numpy.linalg.norm(x)) == 0.0 else x / length

    qs, bs, history, downdates = [], [], [], []
    stopped_by = StoppedBy.rank_limit if initial > 0.0 else StoppedBy.matrix_exhausted
    for _ in range(k if initial > 0.0 else 0):
        omega = _rng.gaussian_matrix(stream, cols, 1)[:, 0]
        y = unit(residual @ omega)
        for _ in range(p):
            if y is None:
                break
            if (z := unit(residual.T @ y)) is None:
                y = None
                break
            y = unit(residual @ z)
        if y is None:
            stopped_by = StoppedBy.matrix_exhausted
            break
        if qs:
            basis = numpy.column_stack(qs)
            y = y - basis @ (basis.T @ y)
            if (y := unit(y)) is None:
                stopped_by = StoppedBy.matrix_exhausted
                break

        b_j = y @ residual
        residual -= numpy.outer(y, b_j)
        downdates.append(math.sqrt(max(norm ** 2 - float(b_j @ b_j), 0.0)))
        norm = _dense.frobenius_norm(residual)
        qs.append(y)
        bs.append(b_j)
        history.append(norm)
        if norm <= exhausted and len(qs) < k:
            stopped_by = StoppedBy.matrix_exhausted
            break

    return QBFactors(
        q=numpy.asfortranarray(numpy.column_stack(qs)) if qs else numpy.zeros((rows, 0), order='F'),
        b=numpy.asfortranarray(numpy.vstack(bs)) if bs else numpy.zeros((0, cols), order='F'),
        block_size=1,
        power=p,
        residual_history=tuple(history),
        stopped_by=stopped_by,
        downdate_history=tuple(downdates),
    )


@_log.Decorator()
def truncated_svd_oracle(a: DenseMatrix, k: int, /) -> SVDFactors:
    """The optimal rank-k approximation: the k leading singular triplets of a full Jacobi SVD."""

    a = _dense.as_dense(a)
    _check_rank(a, k)
    u, s, v = _dense.jacobi_svd(a)
    return SVDFactors(u=numpy.asfortranarray(u[:, :k]), sigma=s[:k], v=numpy.asfortranarray(v[:, :k]))
