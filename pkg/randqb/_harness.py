"""Experiment runner: accuracy sweeps, trial statistics, the skipped re-orthonormalization study, timing runs and the
flop-count cost model. Results are flat records written as CSV or JSON.
"""
from __future__ import annotations

import concurrent.futures
import contextlib
import csv
import dataclasses
import enum
import io
import json
import logging
import pathlib
import sys
import time
import typing

import annotated_types
import numpy
import pydantic

from . import _baselines
from . import _cache
from . import _dense
from . import _errors
from . import _log
from . import _matrices
from . import _postprocess
from . import _qb
from . import _rng
from ._dense import DenseMatrix, SingularValues
from ._matrices import TestMatrixSpec

logger = logging.getLogger(__name__)

type Count = typing.Annotated[int, annotated_types.Ge(1)]
type Power = typing.Annotated[int, annotated_types.Ge(0)]
type Positive = typing.Annotated[float, annotated_types.Gt(0.0)]


class Experiment(enum.StrEnum):
    accuracy = 'accuracy'
    stats = 'stats'
    skip_reorth = 'skip-reorth'
    speed = 'speed'
    cost_model = 'cost'


class Algorithm(enum.StrEnum):
    qb = enum.auto()
    qb_b = enum.auto()
    qb_p = enum.auto()
    qb_pb = enum.auto()
    greedy = enum.auto()
    cpqr = enum.auto()
    svd = enum.auto()


BLOCKED = frozenset({Algorithm.qb_b, Algorithm.qb_pb})
POWERED = frozenset({Algorithm.qb_p, Algorithm.qb_pb, Algorithm.greedy})
RANDOMIZED = frozenset({*BLOCKED, *POWERED, Algorithm.qb})
REFERENCES = (Algorithm.cpqr, Algorithm.svd)


class AlgorithmSpec(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    alg: Algorithm
    P: Power = 0
    b: Count | None = None
    reorth: _qb.ReorthMode = _qb.ReorthMode.full

    @pydantic.model_validator(mode='after')
    def _check(self) -> typing.Self:
        if self.P and self.alg not in POWERED:
            raise ValueError(f'{self.alg} takes no power iterations, got P={self.P}.')
        if self.b is not None and self.alg not in BLOCKED:
            raise ValueError(f'{self.alg} is not blocked, got b={self.b}.')
        if self.reorth is _qb.ReorthMode.none and self.alg not in (Algorithm.qb_p, Algorithm.qb_pb):
            raise ValueError(f'{self.alg} has no intermediate orthonormalization to skip.')
        return self

    @property
    def label(self) -> str:
        return self.alg if self.reorth is _qb.ReorthMode.full else f'{self.alg}_noreorth'


class CostInputs(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    m: Count
    n: Count
    ell: Count
    b: Count
    p: Power = 0
    c_mm: Positive = 1.0
    c_qr: Positive = 1.0


class ExperimentConfig(pydantic.BaseModel):
    """One experiment. `matrix` is a TestMatrixSpec, an id `m1`..`m5`, or `file:<path>` to a Matrix Market file.

    `epsilon` switches the accuracy sweep from a rank grid to a relative tolerance for the blocked algorithms.
    """
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    experiment: Experiment
    matrix: TestMatrixSpec | str = 'm1'
    algorithms: tuple[AlgorithmSpec, ...] = ()
    k_grid: tuple[Count, ...] = ()
    epsilon: typing.Annotated[float, annotated_types.Interval(gt=0.0, lt=1.0)] | None = None
    oversampling: Power = 10
    trials: Count = 1
    base_seed: _rng.Seed = 0
    scatter_k: Count | None = None
    n_grid: tuple[Count, ...] = (500, 1000, 2000)
    block_grid: tuple[Count, ...] = ()
    workers: Count = 1
    record_timings: bool = True
    cost: CostInputs | None = None
    output: str | None = None
    format: typing.Literal['csv', 'json'] = 'csv'

    @pydantic.field_validator('matrix')
    @classmethod
    def _check_matrix(cls, matrix: TestMatrixSpec | str) -> TestMatrixSpec | str:
        if isinstance(matrix, str) and matrix not in _matrices.MATRIX_IDS and not matrix.startswith('file:'):
            raise ValueError(f'matrix must be one of {sorted(_matrices.MATRIX_IDS)} or file:<path>, got {matrix!r}.')
        return matrix

    @pydantic.model_validator(mode='after')
    def _check(self) -> typing.Self:
        match self.experiment:
            case Experiment.cost_model:
                if self.cost is None:
                    raise ValueError('the cost experiment needs cost inputs.')
                return self
            case Experiment.accuracy if self.epsilon is not None:
                if self.k_grid:
                    raise ValueError('give either k_grid or epsilon, not both.')
                if unblocked := [spec.alg for spec in self.algorithms if spec.alg not in BLOCKED]:
                    raise ValueError(f'a tolerance sweep runs blocked algorithms only, got {unblocked}.')
            case Experiment.stats if not self.k_grid and self.scatter_k is None:
                raise ValueError('the stats experiment needs a non-empty k_grid or a scatter_k.')
            case Experiment.accuracy | Experiment.skip_reorth if not self.k_grid:
                raise ValueError(f'the {self.experiment} experiment needs a non-empty k_grid.')
            case Experiment.speed if not self.n_grid:
                raise ValueError('the speed experiment needs a non-empty n_grid.')

        if self.experiment is not Experiment.stats and self.scatter_k is not None:
            raise ValueError('scatter_k applies to the stats experiment only.')
        for spec in self.algorithms:
            if spec.alg in BLOCKED and spec.b is None and not (self.experiment is Experiment.speed and self.block_grid):
                raise ValueError(f'{spec.alg} needs a block size b.')
        match self.matrix:
            case TestMatrixSpec() as spec:
                ...
            case str() if self.matrix in _matrices.MATRIX_IDS:
                spec = TestMatrixSpec.from_id(self.matrix)
            case _:
                spec = None
        ranks = [*self.k_grid, *([self.scatter_k] if self.scatter_k is not None else [])]
        if spec is not None and ranks and self.experiment is not Experiment.speed:
            if max(ranks) > (limit := min(spec.m, spec.n)):
                raise ValueError(f'k_grid must lie within [1, {limit}], got max {max(ranks)}.')
        return self


@dataclasses.dataclass(frozen=True, kw_only=True)
class ErrorRecord:
    matrix_id: str
    algorithm: str
    P: int
    b: int
    k: int
    trial: int
    seed: int
    err_fro_rel: float
    err_spec_rel: float
    elapsed_ms: float


@dataclasses.dataclass(frozen=True, kw_only=True)
class TimingRecord(ErrorRecord):
    n: int
    matmul_ms: float
    orth_ms: float


@dataclasses.dataclass(frozen=True, kw_only=True)
class StatsSummary:
    algorithm: str
    P: int
    b: int
    k: int
    trials: int
    mean_fro: float
    std_fro: float | None
    mean_spec: float
    std_spec: float | None


@dataclasses.dataclass(frozen=True, kw_only=True)
class StatsResult:
    records: list[ErrorRecord]
    summary: list[StatsSummary]


@dataclasses.dataclass(frozen=True, kw_only=True)
class CostPrediction:
    m: int
    n: int
    ell: int
    b: int
    p: int
    c_mm: float
    c_qr: float
    t_randqb: float
    t_randqb_b: float
    t_randqb_p: float
    t_randqb_pb: float


type Record = ErrorRecord | StatsSummary | CostPrediction
type Source = TestMatrixSpec | pathlib.Path


def _k_range(stop: int) -> tuple[int, ...]:
    return tuple(range(10, stop + 1, 10))


def config_defaults(experiment: Experiment | str, matrix_id: str = 'm1', /) -> ExperimentConfig:
    """Default grids, block sizes, trial counts and algorithm sets for each experiment and matrix id."""

    experiment = Experiment(experiment)
    blocks = (20,) if matrix_id == 'm4' else (10, 15)
    k_grid = _k_range(200 if matrix_id == 'm4' else 150)

    match experiment:
        case Experiment.accuracy:
            return ExperimentConfig(
                experiment=experiment,
                matrix=matrix_id,
                algorithms=tuple(
                    AlgorithmSpec(alg=Algorithm.qb_pb if p else Algorithm.qb_b, P=p, b=b)
                    for b in blocks for p in (0, 1, 2)
                ),
                k_grid=k_grid,
            )
        case Experiment.stats:
            return ExperimentConfig(
                experiment=experiment,
                matrix=matrix_id,
                algorithms=(AlgorithmSpec(alg=Algorithm.qb_pb, P=2, b=blocks[0]),),
                k_grid=k_grid,
                trials=25,
            )
        case Experiment.skip_reorth:
            return ExperimentConfig(
                experiment=experiment,
                matrix=TestMatrixSpec(family=_matrices.Family.fast_decay, unit_top=True),
                algorithms=tuple(
                    AlgorithmSpec(alg=alg, P=p, b=10 if alg is Algorithm.qb_pb else None, reorth=reorth)
                    for alg in (Algorithm.qb_p, Algorithm.qb_pb)
                    for p in (1, 2)
                    for reorth in _qb.ReorthMode
                ),
                k_grid=_k_range(100),
            )
        case Experiment.speed:
            return ExperimentConfig(
                experiment=experiment,
                matrix='m4',
                algorithms=(
                    AlgorithmSpec(alg=Algorithm.qb),
                    AlgorithmSpec(alg=Algorithm.qb_b),
                    AlgorithmSpec(alg=Algorithm.qb_pb, P=1),
                    AlgorithmSpec(alg=Algorithm.cpqr),
                ),
                k_grid=(100,),
                block_grid=(10, 20, 50),
            )
        case Experiment.cost_model:
            return ExperimentConfig(
                experiment=experiment,
                matrix=matrix_id,
                cost=CostInputs(m=1000, n=1000, ell=100, b=10, p=1),
            )


def _source(matrix: TestMatrixSpec | str, /) -> tuple[str, Source]:
    match matrix:
        case TestMatrixSpec():
            return matrix.matrix_id, matrix
        case str() if matrix.startswith('file:'):
            return matrix, pathlib.Path(matrix.removeprefix('file:'))
        case str():
            return matrix, TestMatrixSpec.from_id(matrix)


@_cache.Decorator(size=8)
@_log.Decorator()
def load_matrix(source: Source, /) -> tuple[DenseMatrix, SingularValues | None]:
    """The matrix named by `source` and its exact spectrum when known. Results are cached and read-only."""

    match source:
        case TestMatrixSpec():
            return _matrices.gen_test_matrix(source)
        case _:
            return _matrices.load_matrix_market(source), None


@_cache.Decorator(size=8)
@_log.Decorator()
def oracle_svd(source: Source, /) -> _postprocess.SVDFactors:
    a, _ = load_matrix(source)
    return _baselines.truncated_svd_oracle(a, min(a.shape))


@dataclasses.dataclass(frozen=True)
class _Norms:
    fro: float
    spec: float

    @classmethod
    def of(cls, a: DenseMatrix, /) -> _Norms:
        if (fro := _dense.frobenius_norm(a)) == 0.0:
            raise _errors.InvalidArgument('Relative errors are undefined for a zero matrix.')
        return cls(fro=fro, spec=float(_dense.spectral_norm_est(a)))


def _relative_errors(a: DenseMatrix, approximant: DenseMatrix, norms: _Norms, /) -> tuple[float, float]:
    residual = a - approximant
    return _dense.frobenius_norm(residual) / norms.fro, float(_dense.spectral_norm_est(residual)) / norms.spec


@dataclasses.dataclass
class _Stopwatch:
    ms: float = 0.0


@contextlib.contextmanager
def _stopwatch() -> typing.Iterator[_Stopwatch]:
    stopwatch = _Stopwatch()
    started = time.perf_counter()
    try:
        yield stopwatch
    finally:
        stopwatch.ms = (time.perf_counter() - started) * 1e3


def _factorize(
    spec: AlgorithmSpec,
    a: DenseMatrix,
    ell: int,
    stream: _rng.RngStream,
    /,
) -> _qb.QBFactors | _postprocess.PivotedQRFactors:
    match spec.alg:
        case Algorithm.qb:
            return _qb.rand_qb(a, ell, stream)
        case Algorithm.qb_p:
            return _qb.rand_qb_p(a, ell, spec.P, stream, reorth_mode=spec.reorth)
        case Algorithm.qb_b:
            return _qb.rand_qb_b(a, _qb.StopCriterion(max_rank=ell), spec.b, stream)
        case Algorithm.qb_pb:
            return _qb.rand_qb_pb(a, _qb.StopCriterion(max_rank=ell), spec.P, spec.b, stream, reorth_mode=spec.reorth)
        case Algorithm.greedy:
            return _baselines.greedy_rand_single(a, ell, spec.P, stream)
        case Algorithm.cpqr:
            return _baselines.cpqr_partial(a, ell)
        case _:
            raise _errors.InvalidArgument(f'{spec.alg} is not a factorization.')


def _approximants(
    spec: AlgorithmSpec,
    source: Source,
    ks: typing.Sequence[int],
    ell: int,
    stream: _rng.RngStream,
    /,
) -> tuple[typing.Iterator[tuple[int, DenseMatrix]], float]:
    """Rank-k approximants for each k from one factorization, and the factorization time in ms.

    Randomized algorithms run once to rank `ell` and are truncated through their SVD. CPQR keeps its leading k columns.
    """

    a, _ = load_matrix(source)
    match spec.alg:
        case Algorithm.svd:
            svd = oracle_svd(source)
            return ((k, svd.truncate(k).reconstruct()) for k in ks), 0.0
        case Algorithm.cpqr:
            with _stopwatch() as stopwatch:
                qr = _factorize(spec, a, max(ks), stream)
            return ((k, _postprocess.PivotedQRFactors(
                q=qr.q[:, :k], r=qr.r[:k], pivots=qr.pivots,
            ).reconstruct()) for k in ks), stopwatch.ms
        case _:
            with _stopwatch() as stopwatch:
                qb = _factorize(spec, a, ell, stream)
                svd = _postprocess.qb_to_svd(qb, a, _postprocess.FixedRank(qb.rank))
            return ((k, svd.truncate(min(k, svd.k)).reconstruct()) for k in ks), stopwatch.ms


def _sweep_ell(cfg: ExperimentConfig, a: DenseMatrix, ks: typing.Sequence[int], /) -> int:
    if max(ks) > (limit := min(a.shape)):
        raise _errors.InvalidArgument(f'k_grid must lie within [1, {limit}] for shape {a.shape}, got max {max(ks)}.')
    return min(max(ks) + cfg.oversampling, limit)


def _error_records(
    cfg: ExperimentConfig,
    spec: AlgorithmSpec,
    matrix_id: str,
    source: Source,
    ks: typing.Sequence[int],
    stream: _rng.RngStream,
    /,
    *,
    trial: int = 0,
) -> list[ErrorRecord]:
    a, _ = load_matrix(source)
    norms = _norms(source)
    approximants, elapsed_ms = _approximants(spec, source, ks, _sweep_ell(cfg, a, ks), stream)
    return [
        ErrorRecord(
            matrix_id=matrix_id,
            algorithm=spec.label,
            P=spec.P,
            b=spec.b or 0,
            k=k,
            trial=trial,
            seed=stream.origin_seed,
            err_fro_rel=(errors := _relative_errors(a, approximant, norms))[0],
            err_spec_rel=errors[1],
            elapsed_ms=elapsed_ms if cfg.record_timings else 0.0,
        )
        for k, approximant in approximants
    ]


@_cache.Decorator(size=8)
def _norms(source: Source, /) -> _Norms:
    a, _ = load_matrix(source)
    return _Norms.of(a)


def _tolerance_records(
    cfg: ExperimentConfig,
    matrix_id: str,
    source: Source,
    /,
) -> list[ErrorRecord]:
    a, _ = load_matrix(source)
    norms = _norms(source)
    records = []
    for spec in cfg.algorithms:
        stream = _rng.RngStream.from_seed(cfg.base_seed)
        stop = _qb.StopCriterion.relative(a, cfg.epsilon)
        with _stopwatch() as stopwatch:
            if spec.alg is Algorithm.qb_b:
                qb = _qb.rand_qb_b(a, stop, spec.b, stream)
            else:
                qb = _qb.rand_qb_pb(a, stop, spec.P, spec.b, stream, reorth_mode=spec.reorth)
        fro, spec_err = _relative_errors(a, qb.reconstruct(), norms)
        records.append(ErrorRecord(
            matrix_id=matrix_id,
            algorithm=spec.label,
            P=spec.P,
            b=spec.b,
            k=qb.rank,
            trial=0,
            seed=cfg.base_seed,
            err_fro_rel=fro,
            err_spec_rel=spec_err,
            elapsed_ms=stopwatch.ms if cfg.record_timings else 0.0,
        ))
    return records


def _with_references(algorithms: typing.Iterable[AlgorithmSpec], /) -> list[AlgorithmSpec]:
    algorithms = list(algorithms)
    present = {spec.alg for spec in algorithms}
    return algorithms + [AlgorithmSpec(alg=alg) for alg in REFERENCES if alg not in present]


def _algorithms(cfg: ExperimentConfig, matrix_id: str, /) -> tuple[AlgorithmSpec, ...]:
    return cfg.algorithms or config_defaults(cfg.experiment, matrix_id).algorithms


def _check_experiment(cfg: ExperimentConfig, experiment: Experiment, /) -> None:
    if cfg.experiment is not experiment:
        raise _errors.InvalidArgument(f'Expected a {experiment} configuration, got {cfg.experiment}.')


@_log.Decorator(ok_level='INFO')
def run_accuracy_sweep(cfg: ExperimentConfig, /) -> list[ErrorRecord]:
    """Relative Frobenius and spectral errors against k for each algorithm, plus CPQR and SVD reference rows.

    Each algorithm draws from a fresh stream seeded with `base_seed`.
    """

    _check_experiment(cfg, Experiment.accuracy)
    matrix_id, source = _source(cfg.matrix)
    if cfg.epsilon is not None:
        return _tolerance_records(cfg, matrix_id, source)

    return [
        record
        for spec in _with_references(_algorithms(cfg, matrix_id))
        for record in _error_records(
            cfg, spec, matrix_id, source, cfg.k_grid, _rng.RngStream.from_seed(cfg.base_seed),
        )
    ]


def _summarize(records: typing.Sequence[ErrorRecord], trials: int, /) -> list[StatsSummary]:
    groups: dict[tuple[str, int, int, int], list[ErrorRecord]] = {}
    for record in records:
        groups.setdefault((record.algorithm, record.P, record.b, record.k), []).append(record)

    summary = []
    for (algorithm, p, b, k), group in groups.items():
        fro = numpy.array([record.err_fro_rel for record in group])
        spec = numpy.array([record.err_spec_rel for record in group])
        summary.append(StatsSummary(
            algorithm=algorithm,
            P=p,
            b=b,
            k=k,
            trials=trials,
            mean_fro=float(fro.mean()),
            std_fro=float(fro.std(ddof=1)) if trials > 1 else None,
            mean_spec=float(spec.mean()),
            std_spec=float(spec.std(ddof=1)) if trials > 1 else None,
        ))
    return summary


@_log.Decorator(ok_level='INFO')
def run_stats(cfg: ExperimentConfig, /) -> StatsResult:
    """Repeats the randomized algorithms over `trials` independent streams split from `base_seed`.

    Trials run on `workers` threads; records come back ordered by trial, algorithm and k. With `scatter_k` set only that
    rank is evaluated and one CPQR and one SVD reference row follow the trials.
    """

    _check_experiment(cfg, Experiment.stats)
    matrix_id, source = _source(cfg.matrix)
    load_matrix(source)
    ks = (cfg.scatter_k,) if cfg.scatter_k is not None else cfg.k_grid
    algorithms = [spec for spec in _algorithms(cfg, matrix_id) if spec.alg in RANDOMIZED]
    root = _rng.RngStream.from_seed(cfg.base_seed)

    def run_trial(trial: int) -> list[ErrorRecord]:
        return [
            record
            for spec in algorithms
            for record in _error_records(cfg, spec, matrix_id, source, ks, _rng.split_stream(root, trial), trial=trial)
        ]

    with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        records = [record for records in executor.map(run_trial, range(cfg.trials)) for record in records]

    summary = _summarize(records, cfg.trials)
    if cfg.scatter_k is not None:
        records += [
            record
            for alg in REFERENCES
            for record in _error_records(cfg, AlgorithmSpec(alg=alg), matrix_id, source, ks, root)
        ]
    return StatsResult(records=records, summary=summary)


@_log.Decorator(ok_level='INFO')
def run_skip_reorth(cfg: ExperimentConfig, /) -> list[ErrorRecord]:
    """Error against k for power-scheme variants with and without orthonormalization between the products."""

    _check_experiment(cfg, Experiment.skip_reorth)
    matrix_id, source = _source(cfg.matrix)
    return [
        record
        for spec in [*_algorithms(cfg, matrix_id), AlgorithmSpec(alg=Algorithm.svd)]
        for record in _error_records(
            cfg, spec, matrix_id, source, cfg.k_grid, _rng.RngStream.from_seed(cfg.base_seed),
        )
    ]


def _speed_algorithms(cfg: ExperimentConfig, /) -> list[AlgorithmSpec]:
    algorithms = []
    for spec in cfg.algorithms or config_defaults(Experiment.speed).algorithms:
        if spec.alg in BLOCKED and cfg.block_grid:
            algorithms += [spec.model_copy(update={'b': b}) for b in cfg.block_grid]
        elif spec.alg in BLOCKED and spec.b is None:
            algorithms += [spec.model_copy(update={'b': b}) for b in config_defaults(Experiment.speed).block_grid]
        else:
            algorithms.append(spec)
    return algorithms


@_log.Decorator(ok_level='INFO')
def run_speed_bench(cfg: ExperimentConfig, /) -> list[TimingRecord]:
    """Wall time per algorithm on n×n matrices over `n_grid`, split into time in products and in orthonormalization.

    The matrix is the family of `matrix` resized to n×n; a `file:` matrix is timed at its own size.
    """

    _check_experiment(cfg, Experiment.speed)
    matrix_id, source = _source(cfg.matrix)
    k = max(cfg.k_grid) if cfg.k_grid else 100
    sources = (
        [(n, source.model_copy(update={'m': n, 'n': n})) for n in cfg.n_grid]
        if isinstance(source, TestMatrixSpec) else [(min(load_matrix(source)[0].shape), source)]
    )

    records = []
    for n, sized in sources:
        a, _ = load_matrix(sized)
        if k > min(a.shape):
            raise _errors.InvalidArgument(f'rank {k} exceeds min{a.shape}.')
        norms = _Norms.of(a)
        for spec in _speed_algorithms(cfg):
            with _dense.phase_clock() as phases, _stopwatch() as stopwatch:
                factors = _factorize(spec, a, k, _rng.RngStream.from_seed(cfg.base_seed))
            fro, spec_err = _relative_errors(a, factors.reconstruct(), norms)
            records.append(TimingRecord(
                matrix_id=matrix_id,
                algorithm=spec.label,
                P=spec.P,
                b=spec.b or 0,
                k=k,
                trial=0,
                seed=cfg.base_seed,
                err_fro_rel=fro,
                err_spec_rel=spec_err,
                elapsed_ms=stopwatch.ms if cfg.record_timings else 0.0,
                n=n,
                matmul_ms=phases['matmul'] if cfg.record_timings else 0.0,
                orth_ms=phases['orth'] if cfg.record_timings else 0.0,
            ))
    return records


def cost_model_predict(
    m: int,
    n: int,
    ell: int,
    b: int,
    p: int,
    c_mm: float = 1.0,
    c_qr: float = 1.0,
    /,
) -> CostPrediction:
    """Leading-order flop counts, with s = ℓ/b blocks:

        t_randqb    = 2·C_mm·mnℓ + C_qr·mℓ²
        t_randqb_b  = 3·C_mm·mnℓ + C_mm·mℓ² + 2·C_qr·mℓ²/s
        t_randqb_p  = (2 + 2P)·C_mm·mnℓ + (1 + 2P)·C_qr·mℓ²
        t_randqb_pb = (3 + 2P)·C_mm·mnℓ + C_mm·mℓ² + (2 + 2P)·C_qr·mℓ²/s
    """

    if min(m, n, ell, b) < 1 or p < 0 or not (c_mm > 0.0 and c_qr > 0.0):
        raise _errors.InvalidArgument(f'cost inputs must be positive (p >= 0), got {(m, n, ell, b, p, c_mm, c_qr)}.')
    if ell % b:
        raise _errors.InvalidArgument(f'block size {b} does not divide ell={ell}.')

    s = ell // b
    mnl, ml2 = m * n * ell, m * ell ** 2
    return CostPrediction(
        m=m, n=n, ell=ell, b=b, p=p, c_mm=c_mm, c_qr=c_qr,
        t_randqb=2 * c_mm * mnl + c_qr * ml2,
        t_randqb_b=3 * c_mm * mnl + c_mm * ml2 + 2 * c_qr * ml2 / s,
        t_randqb_p=(2 + 2 * p) * c_mm * mnl + (1 + 2 * p) * c_qr * ml2,
        t_randqb_pb=(3 + 2 * p) * c_mm * mnl + c_mm * ml2 + (2 + 2 * p) * c_qr * ml2 / s,
    )


def _cell(value: object, /) -> str:
    match value:
        case None:
            return ''
        case float():
            return f'{value:.17g}'
        case _:
            return str(value)


def _json_row(row: dict[str, object], /) -> str:
    items = (
        f'{json.dumps(key)}: {_cell(value) if isinstance(value, float) else json.dumps(value)}'
        for key, value in row.items()
    )
    return '  {' + ', '.join(items) + '}'


def write_records(
    records: typing.Sequence[Record],
    path: pathlib.Path | None,
    fmt: typing.Literal['csv', 'json'] = 'csv',
    /,
) -> None:
    """Writes records as CSV (header from the record fields) or as a JSON array of objects with the same key order,
    one record per line. Floats are written at 17 significant digits in both formats. `path` of None writes to stdout.
    """

    match fmt:
        case 'csv':
            buffer = io.StringIO()
            writer = csv.writer(buffer, lineterminator='\n')
            if records:
                writer.writerow([field.name for field in dataclasses.fields(records[0])])
            writer.writerows([_cell(getattr(record, field.name)) for field in dataclasses.fields(record)]
                             for record in records)
            text = buffer.getvalue()
        case 'json' if not records:
            text = '[]\n'
        case 'json':
            rows = pydantic.TypeAdapter(list[type(records[0])]).dump_python(list(records), mode='json')
            text = '[\n' + ',\n'.join(map(_json_row, rows)) + '\n]\n'
        case _:
            raise _errors.InvalidArgument(f'Unknown record format {fmt!r}.')

    if path is None:
        sys.stdout.write(text)
    else:
        pathlib.Path(path).write_text(text)


def _summary_path(path: pathlib.Path | None, fmt: str, /) -> pathlib.Path | None:
    return None if path is None else path.with_name(f'{path.stem}.summary.{fmt}')


@_log.Decorator(call_level='INFO', ok_level='INFO')
def run_experiment(cfg: ExperimentConfig, /) -> list[Record]:
    """Runs `cfg` and writes its records to `cfg.output` (stdout when unset). Stats summaries go to a sibling
    `<stem>.summary.<format>` file, or follow the records on stdout.
    """

    output = None if cfg.output is None else pathlib.Path(cfg.output)
    match cfg.experiment:
        case Experiment.accuracy:
            records = run_accuracy_sweep(cfg)
        case Experiment.stats:
            result = run_stats(cfg)
            records = result.records
            write_records(records, output, cfg.format)
            write_records(result.summary, _summary_path(output, cfg.format), cfg.format)
            return [*records, *result.summary]
        case Experiment.skip_reorth:
            records = run_skip_reorth(cfg)
        case Experiment.speed:
            records = run_speed_bench(cfg)
        case Experiment.cost_model:
            cost = cfg.cost
            records = [cost_model_predict(cost.m, cost.n, cost.ell, cost.b, cost.p, cost.c_mm, cost.c_qr)]

    write_records(records, output, cfg.format)
    return records
