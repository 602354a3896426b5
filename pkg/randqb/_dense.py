"""Dense kernels: products, norms, Householder QR, one-sided Jacobi SVD and spectral norm estimation.

Matrices are float64 numpy arrays in column-major (Fortran) order.
"""
from __future__ import annotations

import collections
import concurrent.futures
import contextlib
import contextvars
import dataclasses
import logging
import math
import os
import time
import typing

import annotated_types
import numpy
import numpy.typing

from . import _errors
from . import _rng

logger = logging.getLogger(__name__)

type DenseMatrix = numpy.typing.NDArray[numpy.float64]
type SingularValues = numpy.typing.NDArray[numpy.float64]
type Tolerance = typing.Annotated[float, annotated_types.Gt(0.0)]

RANK_TOLERANCE = 1e-12
SINGULAR_TOLERANCE = 1e-14

_phase_times: contextvars.ContextVar[collections.Counter[str] | None] = contextvars.ContextVar(
    'phase_times', default=None
)


@contextlib.contextmanager
def phase_clock() -> typing.Iterator[collections.Counter[str]]:
    """Accumulates wall time in ms spent in `matmul` and `orth` by the current context while active."""

    times = collections.Counter()
    token = _phase_times.set(times)
    try:
        yield times
    finally:
        _phase_times.reset(token)


@contextlib.contextmanager
def _phase(name: typing.Literal['matmul', 'orth']) -> typing.Iterator[None]:
    if (times := _phase_times.get()) is None:
        yield
        return
    started = time.perf_counter()
    try:
        yield
    finally:
        times[name] += (time.perf_counter() - started) * 1e3


def as_dense(x: numpy.typing.ArrayLike, /, *, name: str = 'a') -> DenseMatrix:
    """Returns `x` as a finite 2-D float64 column-major array, copying only when needed."""

    a = numpy.asarray(x, dtype=numpy.float64)
    if a.ndim != 2:
        raise _errors.InvalidArgument(f'{name} must be a 2-D matrix, got shape {a.shape}.')
    if not numpy.isfinite(a).all():
        raise _errors.NonFiniteInput(f'{name} has non-finite entries.')
    return numpy.asfortranarray(a)


def matmul(
    a: DenseMatrix,
    b: DenseMatrix,
    /,
    *,
    transpose_a: bool = False,
    transpose_b: bool = False,
    parallel: bool = False,
    workers: typing.Annotated[int, annotated_types.Gt(0)] | None = None,
) -> DenseMatrix:
    """Returns op(a) @ op(b).

    The serial mode is bit-reproducible. `parallel` splits the columns of op(b) across threads; results then agree with
    the serial product within rounding but are not guaranteed bit-equal.
    """

    left = a.T if transpose_a else a
    right = b.T if transpose_b else b
    if left.ndim != 2 or right.ndim != 2 or left.shape[1] != right.shape[0]:
        raise _errors.ShapeMismatch('matmul', left.shape, right.shape)
    if not (numpy.isfinite(left).all() and numpy.isfinite(right).all()):
        raise _errors.NonFiniteInput('matmul: operands have non-finite entries.')

    with _phase('matmul'):
        if not parallel or right.shape[1] < 2:
            return numpy.asfortranarray(left @ right)

        chunks = [
            chunk for chunk in numpy.array_split(numpy.arange(right.shape[1]), workers or os.cpu_count() or 1)
            if chunk.size
        ]
        with concurrent.futures.ThreadPoolExecutor(max_workers=len(chunks)) as executor:
            parts = list(executor.map(lambda columns: left @ right[:, columns], chunks))
        return numpy.asfortranarray(numpy.hstack(parts))


def frobenius_norm(a: DenseMatrix, /) -> float:
    values = numpy.abs(numpy.ravel(a, order='K'))
    if values.size == 0 or (scale := float(values.max())) == 0.0:
        return 0.0
    # numpy.sum reduces pairwise; scaling keeps squares clear of overflow and underflow.
    return scale * math.sqrt(float(numpy.sum(numpy.square(values / scale))))


@dataclasses.dataclass(frozen=True)
class SpectralNormEstimate:
    value: float
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return self.value


def spectral_norm_est(
    a: DenseMatrix,
    /,
    *,
    tol: Tolerance = 1e-10,
    max_iters: typing.Annotated[int, annotated_types.Gt(0)] = 2000,
    seed: int = 0,
) -> SpectralNormEstimate:
    """Estimates the largest singular value by power iteration on aᵀa from a seeded Gaussian start."""

    if a.size == 0:
        raise _errors.InvalidArgument(f'spectral_norm_est: empty matrix of shape {a.shape}.')
    if not tol > 0.0:
        raise _errors.InvalidArgument(f'spectral_norm_est: tol must be positive, got {tol}.')

    x = _rng.gaussian_matrix(_rng.RngStream.from_seed(seed), a.shape[1], 1)[:, 0]
    x /= numpy.linalg.norm(x)
    estimate = 0.0
    for iteration in range(1, max_iters + 1):
        y = a @ x
        if (sigma := float(numpy.linalg.norm(y))) == 0.0:
            return SpectralNormEstimate(0.0, True, iteration)
        z = a.T @ y
        x = z / numpy.linalg.norm(z)
        if abs(sigma - estimate) <= tol * sigma:
            return SpectralNormEstimate(sigma, True, iteration)
        estimate = sigma

    logger.warning('spectral_norm_est: no convergence to tol=%g after %d iterations (estimate %r).', tol, max_iters, estimate)
    return SpectralNormEstimate(estimate, False, max_iters)


def _householder_vector(x: numpy.typing.NDArray[numpy.float64], /) -> numpy.typing.NDArray[numpy.float64] | None:
    """Returns unit v with (I - 2vvᵀ)x = ∓‖x‖e₁, or None when x is zero."""

    if (alpha := float(numpy.linalg.norm(x))) == 0.0:
        return None
    v = x.copy()
    v[0] += math.copysign(alpha, v[0])
    return v / numpy.linalg.norm(v)


def _accumulate_q(reflectors: list[numpy.typing.NDArray[numpy.float64] | None], rows: int) -> DenseMatrix:
    cols = len(reflectors)
    q = numpy.zeros((rows, cols), order='F')
    q[numpy.arange(cols), numpy.arange(cols)] = 1.0
    for j in reversed(range(cols)):
        if (v := reflectors[j]) is not None:
            q[j:, j:] -= 2.0 * numpy.outer(v, v @ q[j:, j:])
    return q


def _positive_diagonal(q: DenseMatrix, r: DenseMatrix, /) -> tuple[DenseMatrix, DenseMatrix]:
    signs = numpy.where(numpy.diagonal(r) < 0.0, -1.0, 1.0)
    return numpy.asfortranarray(q * signs), numpy.asfortranarray(r * signs[:, None])


def householder_qr(a: DenseMatrix, /) -> tuple[DenseMatrix, DenseMatrix]:
    """Economic QR a = q·r by Householder reflections, with a non-negative diagonal of r."""

    rows, cols = a.shape
    if rows < cols:
        raise _errors.InvalidArgument(f'householder_qr: needs rows >= cols, got shape {a.shape}.')

    work = numpy.array(a, dtype=numpy.float64, order='F')
    reflectors = []
    for j in range(cols):
        if (v := _householder_vector(work[j:, j])) is not None:
            work[j:, j:] -= 2.0 * numpy.outer(v, v @ work[j:, j:])
        reflectors.append(v)

    return _positive_diagonal(_accumulate_q(reflectors, rows), numpy.triu(work[:cols, :]))


def pivoted_qr(
    a: DenseMatrix,
    /,
    *,
    rank: int | None = None,
) -> tuple[DenseMatrix, DenseMatrix, numpy.typing.NDArray[numpy.int64]]:
    """Column-pivoted Householder QR: a[:, pivots] ≈ q·r after `rank` steps (default min(m, n)).

    Pivots on the largest remaining column norm, recomputed each step. `pivots` is a full permutation of range(n).
    """

    rows, cols = a.shape
    steps = min(rows, cols) if rank is None else min(rank, rows, cols)
    work = numpy.array(a, dtype=numpy.float64, order='F')
    pivots = numpy.arange(cols)
    reflectors = []
    for j in range(steps):
        trailing = work[j:, j:]
        p = j + int(numpy.argmax(numpy.einsum('ij,ij->j', trailing, trailing)))
        if p != j:
            work[:, [j, p]] = work[:, [p, j]]
            pivots[[j, p]] = pivots[[p, j]]
        if (v := _householder_vector(work[j:, j])) is not None:
            work[j:, j:] -= 2.0 * numpy.outer(v, v @ work[j:, j:])
        reflectors.append(v)

    q, r = _positive_diagonal(_accumulate_q(reflectors, rows), numpy.triu(work[:steps, :]))
    return q, r, pivots


def orth(
    x: DenseMatrix,
    /,
    *,
    reference: float | None = None,
    check_rank: bool = True,
) -> DenseMatrix:
    """Orthonormal basis for the column span of `x` via Householder QR.

    Raises RankDeficient when a pivot norm |r_jj| falls below 1e-12 times `reference` (default ‖x‖_F). The exception
    carries the computed basis as `q`. `check_rank=False` returns that basis without checking.
    """

    with _phase('orth'):
        q, r = householder_qr(x)

    if check_rank and x.shape[1]:
        threshold = RANK_TOLERANCE * (frobenius_norm(x) if reference is None else reference)
        pivot_norms = numpy.abs(numpy.diagonal(r))
        if (deficient := numpy.flatnonzero((pivot_norms < threshold) | (pivot_norms == 0.0))).size:
            column = int(deficient[0])
            raise _errors.RankDeficient(
                f'orth: pivot norm {pivot_norms[column]:.3e} of column {column} is below {threshold:.3e}.',
                q=q,
                column=column,
            )
    return q


def _round_robin(n: int, /) -> list[tuple[numpy.typing.NDArray[numpy.int64], numpy.typing.NDArray[numpy.int64]]]:
    """Pairings covering every column pair once per sweep, each round made of disjoint pairs."""

    players = [*range(n), *([-1] if n % 2 else [])]
    rounds = []
    for _ in range(len(players) - 1):
        half = len(players) // 2
        pairs = [(p, q) for p, q in zip(players[:half], reversed(players[half:])) if p >= 0 and q >= 0]
        if pairs:
            rounds.append((numpy.array([p for p, _ in pairs]), numpy.array([q for _, q in pairs])))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _complete_basis(basis: DenseMatrix, count: int, /) -> DenseMatrix:
    """Extends orthonormal columns by `count` more, drawn from the least covered coordinate directions."""

    for _ in range(count):
        e = numpy.zeros(basis.shape[0])
        e[int(numpy.argmax(1.0 - numpy.einsum('ij,ij->i', basis, basis)))] = 1.0
        for _ in range(2):
            e -= basis @ (basis.T @ e)
        basis = numpy.column_stack([basis, e / numpy.linalg.norm(e)])
    return numpy.asfortranarray(basis)


def _svd_from_iterate(
    q: DenseMatrix,
    w: DenseMatrix,
    v: DenseMatrix,
    /,
) -> tuple[DenseMatrix, SingularValues, DenseMatrix]:
    s = numpy.linalg.norm(w, axis=0)
    order = numpy.argsort(-s, kind='stable')
    s, w, v = s[order], w[:, order], v[:, order]
    positive = int(numpy.count_nonzero(s > 0.0))
    u = _complete_basis(w[:, :positive] / s[:positive], w.shape[1] - positive)
    return numpy.asfortranarray(q @ u), s, numpy.asfortranarray(v)


def jacobi_svd(
    a: DenseMatrix,
    /,
    *,
    tol: Tolerance = 1e-14,
    max_sweeps: typing.Annotated[int, annotated_types.Gt(0)] = 30,
) -> tuple[DenseMatrix, SingularValues, DenseMatrix]:
    """One-sided Jacobi SVD a = u·diag(s)·vᵀ, with s non-increasing.

    The matrix is first reduced to its triangular QR factor; Jacobi rotations then orthogonalize the columns of that
    factor, visiting disjoint column pairs in round-robin order. A pair is rotated while
    |g_pq| > tol·√(g_pp·g_qq) for its Gram entries. The effective tolerance never drops below √n·ε_mach, the
    accuracy at which Gram entries of length-n columns can be computed.
    """

    rows, cols = a.shape
    if rows < cols:
        try:
            v, s, u = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        except _errors.NotConverged as e:
            raise _errors.NotConverged(str(e), u=e.v, s=e.s, v=e.u, sweeps=e.sweeps) from None
        return u, s, v
    if cols == 0:
        return numpy.zeros((rows, 0), order='F'), numpy.zeros(0), numpy.zeros((0, 0), order='F')

    q, w = householder_qr(a)
    v = numpy.eye(cols, order='F')
    threshold = max(tol, math.sqrt(cols) * numpy.finfo(numpy.float64).eps)
    rounds = _round_robin(cols)

    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p, q_ in rounds:
            w_p, w_q = w[:, p], w[:, q_]
            alpha = numpy.einsum('ij,ij->j', w_p, w_p)
            beta = numpy.einsum('ij,ij->j', w_q, w_q)
            gamma = numpy.einsum('ij,ij->j', w_p, w_q)
            if not (active := numpy.abs(gamma) > threshold * numpy.sqrt(alpha * beta)).any():
                continue
            rotated = True
            p, q_ = p[active], q_[active]
            zeta = (beta[active] - alpha[active]) / (2.0 * gamma[active])
            t = numpy.where(zeta >= 0.0, 1.0, -1.0) / (numpy.abs(zeta) + numpy.hypot(1.0, zeta))
            c = 1.0 / numpy.hypot(1.0, t)
            s = c * t
            for m in (w, v):
                m_p, m_q = m[:, p], m[:, q_]
                m[:, p] = c * m_p - s * m_q
                m[:, q_] = s * m_p + c * m_q
        if not rotated:
            logger.debug('jacobi_svd: converged after %d sweeps for shape %s.', sweep, a.shape)
            return _svd_from_iterate(q, w, v)

    u, s, v = _svd_from_iterate(q, w, v)
    raise _errors.NotConverged(
        f'jacobi_svd: no convergence within {max_sweeps} sweeps for shape {a.shape}.', u=u, s=s, v=v, sweeps=max_sweeps,
    )


def back_substitute(r: DenseMatrix, b: DenseMatrix, /) -> DenseMatrix:
    """Solves r·x = b for upper triangular r, column by column of b at once."""

    n = r.shape[0]
    if r.ndim != 2 or r.shape[1] != n or b.ndim != 2 or b.shape[0] != n:
        raise _errors.ShapeMismatch('back_substitute', r.shape, b.shape)

    x = numpy.array(b, dtype=numpy.float64, order='F')
    if n == 0:
        return x

    diagonal = numpy.abs(numpy.diagonal(r))
    threshold = SINGULAR_TOLERANCE * float(numpy.abs(r).max())
    if (small := numpy.flatnonzero(diagonal <= threshold)).size:
        i = int(small[0])
        raise _errors.NearSingular(
            f'back_substitute: |r[{i}, {i}]| = {diagonal[i]:.3e} is not above {threshold:.3e}.'
        )

    for i in reversed(range(n)):
        x[i] -= r[i, i + 1:] @ x[i + 1:]
        x[i] /= r[i, i]
    return x
