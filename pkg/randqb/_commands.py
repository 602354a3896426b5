"""`randqb factorize` and `randqb bench`."""
import logging
import pathlib
import typing

from . import _baselines
from . import _cli
from . import _dense
from . import _harness
from . import _matrices
from . import _postprocess
from . import _qb
from . import _rng

CLI = _cli.Decorator

logger = logging.getLogger(__name__)

Alg = typing.Literal['qb', 'qb_b', 'qb_p', 'qb_pb', 'cpqr', 'svd']
Emit = typing.Literal['qb', 'svd', 'qr', 'id', 'cur']


def _factorize(
    a: _dense.DenseMatrix,
    alg: Alg,
    rank: int,
    tol_rel: float,
    block: int,
    power: int,
    reorth: _qb.ReorthMode,
    seed: int,
    /,
) -> _postprocess.Factors:
    stream = _rng.RngStream.from_seed(seed)
    match alg:
        case 'qb_b' | 'qb_pb':
            stop = _qb.StopCriterion.relative(a, tol_rel, max_rank=rank or None)
            if alg == 'qb_b':
                return _qb.rand_qb_b(a, stop, block, stream)
            return _qb.rand_qb_pb(a, stop, power, block, stream, reorth_mode=reorth)
        case _ if not rank:
            raise CLI.Exception(f'--alg {alg} needs --rank.')
        case _ if tol_rel:
            raise CLI.Exception(f'--alg {alg} has a fixed rank; --tol-rel applies to qb_b and qb_pb only.')
        case 'qb':
            return _qb.rand_qb(a, rank, stream)
        case 'qb_p':
            return _qb.rand_qb_p(a, rank, power, stream, reorth_mode=reorth)
        case 'cpqr':
            return _baselines.cpqr_partial(a, rank)
        case 'svd':
            return _baselines.truncated_svd_oracle(a, rank)


def _convert(factors: _postprocess.Factors, a: _dense.DenseMatrix, emit: Emit, /) -> _postprocess.Factors:
    match factors, emit:
        case _qb.QBFactors(), 'qb':
            return factors
        case _qb.QBFactors(), 'svd':
            return _postprocess.qb_to_svd(factors, a, _postprocess.FixedRank(factors.rank))
        case _qb.QBFactors(), 'qr':
            return _postprocess.qb_to_qr(factors)
        case _qb.QBFactors(), 'id':
            return _postprocess.qb_to_id(factors, factors.rank)
        case _qb.QBFactors(), 'cur':
            return _postprocess.qb_to_cur(factors, a, factors.rank)
        case _postprocess.SVDFactors(), 'svd' | 'qb':
            return factors
        case _postprocess.PivotedQRFactors(), 'qr' | 'qb':
            return factors
        case _:
            raise CLI.Exception(f'--emit {emit} needs a QB algorithm, got {type(factors).__name__}.')


@CLI(key='randqb.factorize')
def factorize(
    *,
    input_: typing.Annotated[str, CLI.AddArgument(name_or_flags=['--input']), 'Matrix Market file to factorize.'],
    alg: Alg = 'qb_b',
    rank: typing.Annotated[int, 'Target rank. For qb_b/qb_pb a cap, 0 meaning min(m, n).'] = 0,
    tol_rel: typing.Annotated[float, 'Stop qb_b/qb_pb once ‖A - QB‖_F < tol_rel·‖A‖_F. 0 disables.'] = 0.0,
    block: typing.Annotated[int, 'Block size b for qb_b/qb_pb.'] = 10,
    power: typing.Annotated[int, 'Power iterations P for qb_p/qb_pb.'] = 0,
    reorth: _qb.ReorthMode = _qb.ReorthMode.full,
    seed: int = 0,
    emit: typing.Annotated[Emit, 'Factorization to write; conversions apply to QB algorithms.'] = 'qb',
    container: typing.Literal['csv', 'binary', 'both'] = 'csv',
    out: typing.Annotated[str, 'Output directory.'] = '.',
    log_level: CLI.Annotated.log_level('randqb') = 'WARNING',
    verbosity: CLI.Annotated.verbosity('randqb') = None,
) -> list[str]:
    """Factorize a Matrix Market matrix and write its factors."""

    if not (rank or tol_rel):
        raise CLI.Exception('Give --rank, --tol-rel, or both.')

    a = _matrices.load_matrix_market(pathlib.Path(input_))
    factors = _convert(_factorize(a, alg, rank, tol_rel, block, power, reorth, seed), a, emit)
    paths = _postprocess.export_factors(factors, pathlib.Path(out), container=container)
    logger.info('Wrote %s factors of a %dx%d matrix to %s.', emit, *a.shape, out)
    return [str(path) for path in paths]


@CLI(key='randqb.bench')
def bench(
    *,
    experiment: typing.Annotated[
        typing.Literal['', 'accuracy', 'stats', 'skip-reorth', 'speed', 'cost'], 'Overrides --config.'
    ] = '',
    matrix: typing.Annotated[str, 'm1..m5 or file:<path>. Overrides --config.'] = '',
    config: typing.Annotated[str, 'JSON experiment configuration.'] = '',
    format: typing.Literal['', 'csv', 'json'] = '',
    out: typing.Annotated[str, 'Output file. Stdout when empty.'] = '',
    trials: typing.Annotated[int, 'Overrides the trial count when positive.'] = 0,
    workers: typing.Annotated[int, 'Overrides the worker count when positive.'] = 0,
    record_timings: typing.Annotated[bool, 'False writes zero times, making output reproducible.'] = True,
    log_level: CLI.Annotated.log_level('randqb') = 'WARNING',
    verbosity: CLI.Annotated.verbosity('randqb') = None,
) -> list[_harness.Record]:
    """Run an experiment and write its records as CSV or JSON.

    Without --config the experiment starts from the defaults for --matrix (m1 when unset).
    """

    if config:
        base = _harness.ExperimentConfig.model_validate_json(pathlib.Path(config).read_text())
    elif experiment:
        base = _harness.config_defaults(experiment, matrix or 'm1')
    else:
        raise CLI.Exception('Give --experiment, --config, or both.')

    overrides = {
        key: value
        for key, value in {
            'experiment': experiment,
            'matrix': matrix,
            'format': format,
            'output': out,
            'trials': trials,
            'workers': workers,
        }.items()
        if value
    }
    if not record_timings:
        overrides['record_timings'] = False

    cfg = _harness.ExperimentConfig.model_validate({**base.model_dump(), **overrides})
    return _harness.run_experiment(cfg)
