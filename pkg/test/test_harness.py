import json

import pydantic
import pytest

import randqb
from randqb import _harness

small_m1 = randqb.TestMatrixSpec(family='fast_decay', m=120, n=90)
small_unit_m1 = randqb.TestMatrixSpec(family='fast_decay', m=120, n=90, unit_top=True)


def config(**kwargs) -> randqb.ExperimentConfig:
    return randqb.ExperimentConfig.model_validate({'record_timings': False, **kwargs})


def alg(alg: str, **kwargs) -> dict:
    return {'alg': alg, **kwargs}


def test_cost_model_randqb() -> None:
    prediction = randqb.cost_model_predict(1000, 1000, 100, 10, 0)
    assert prediction.t_randqb == pytest.approx(2.1e8, rel=1e-15)
    assert prediction.t_randqb_b == pytest.approx(3.12e8, rel=1e-15)


def test_cost_model_without_power_matches_unpowered() -> None:
    prediction = randqb.cost_model_predict(800, 600, 120, 20, 0, 1.5, 4.0)
    assert prediction.t_randqb_p == prediction.t_randqb
    assert prediction.t_randqb_pb == prediction.t_randqb_b


def test_cost_model_power_terms() -> None:
    prediction = randqb.cost_model_predict(1000, 1000, 100, 10, 1)
    assert prediction.t_randqb_p == pytest.approx(4e8 + 3e7, rel=1e-15)
    assert prediction.t_randqb_pb == pytest.approx(5e8 + 1e7 + 4e6, rel=1e-15)


@pytest.mark.parametrize('args', [(1000, 1000, 100, 30, 0), (1000, 1000, 100, 10, -1), (0, 1000, 100, 10, 0),
                                  (1000, 1000, 100, 10, 0, 0.0)])
def test_cost_model_rejects(args) -> None:
    with pytest.raises(randqb.InvalidArgument):
        randqb.cost_model_predict(*args)


@pytest.mark.parametrize('kwargs', [
    dict(experiment='accuracy', k_grid=()),
    dict(experiment='accuracy', k_grid=(0,)),
    dict(experiment='skip-reorth'),
    dict(experiment='stats'),
    dict(experiment='cost'),
    dict(experiment='speed', n_grid=()),
    dict(experiment='accuracy', k_grid=(700,)),
    dict(experiment='accuracy', k_grid=(10,), scatter_k=10),
    dict(experiment='accuracy', k_grid=(10,), algorithms=[alg('qb_b')]),
    dict(experiment='accuracy', k_grid=(10,), epsilon=1e-3, algorithms=[alg('qb_b', b=10)]),
    dict(experiment='accuracy', epsilon=1e-3, algorithms=[alg('qb_p', P=1)]),
    dict(experiment='accuracy', epsilon=1.5),
    dict(experiment='accuracy', k_grid=(10,), matrix='m9'),
    dict(experiment='accuracy', k_grid=(10,), format='xml'),
    dict(experiment='accuracy', k_grid=(10,), colour='red'),
    dict(experiment='benchmark', k_grid=(10,)),
])
def test_config_validation(kwargs) -> None:
    with pytest.raises(pydantic.ValidationError):
        randqb.ExperimentConfig.model_validate(kwargs)


@pytest.mark.parametrize('kwargs', [
    dict(alg='qb', P=1),
    dict(alg='qb', b=10),
    dict(alg='qb_b', reorth='none', b=10),
    dict(alg='cpqr', P=2),
    dict(alg='qb_pb', P=-1, b=10),
])
def test_algorithm_spec_validation(kwargs) -> None:
    with pytest.raises(pydantic.ValidationError):
        randqb.AlgorithmSpec(**kwargs)


@pytest.mark.parametrize('kwargs,label', [
    (dict(alg='qb_pb', P=2, b=10), 'qb_pb'),
    (dict(alg='qb_p', P=1, reorth='none'), 'qb_p_noreorth'),
    (dict(alg='svd'), 'svd'),
])
def test_algorithm_spec_label(kwargs, label) -> None:
    assert randqb.AlgorithmSpec(**kwargs).label == label


@pytest.mark.parametrize('experiment,matrix_id,count,k_max', [
    ('accuracy', 'm1', 6, 150),
    ('accuracy', 'm4', 3, 200),
    ('stats', 'm2', 1, 150),
    ('skip-reorth', 'm1', 8, 100),
    ('speed', 'm1', 4, 100),
])
def test_config_defaults(experiment, matrix_id, count, k_max) -> None:
    cfg = randqb.config_defaults(experiment, matrix_id)
    assert len(cfg.algorithms) == count
    assert max(cfg.k_grid) == k_max
    assert cfg.k_grid[0] in (10, 100)


def test_config_defaults_stats_trials() -> None:
    assert randqb.config_defaults('stats').trials == 25


def test_config_defaults_cost() -> None:
    cfg = randqb.config_defaults('cost')
    assert (cfg.cost.m, cfg.cost.n, cfg.cost.ell, cfg.cost.b) == (1000, 1000, 100, 10)


def test_config_round_trips_through_json() -> None:
    cfg = config(experiment='accuracy', matrix=small_m1, k_grid=(10, 20), algorithms=[alg('qb_pb', P=1, b=10)])
    assert randqb.ExperimentConfig.model_validate_json(cfg.model_dump_json()) == cfg


def accuracy_config(**kwargs) -> randqb.ExperimentConfig:
    return config(**{
        'experiment': 'accuracy',
        'matrix': small_m1,
        'k_grid': (10, 20, 30),
        'algorithms': [alg('qb_b', b=10), alg('qb_pb', P=1, b=10)],
        **kwargs,
    })


def test_accuracy_sweep_rows() -> None:
    records = randqb.run_accuracy_sweep(accuracy_config())
    assert [(record.algorithm, record.k) for record in records] == [
        (name, k) for name in ('qb_b', 'qb_pb', 'cpqr', 'svd') for k in (10, 20, 30)
    ]
    assert all(record.matrix_id == 'm1' and record.elapsed_ms == 0.0 for record in records)
    assert {record.b for record in records if record.algorithm in ('cpqr', 'svd')} == {0}


def test_accuracy_sweep_respects_the_optimal_floor() -> None:
    records = randqb.run_accuracy_sweep(accuracy_config())
    a, d = randqb.gen_test_matrix(small_m1)
    norm = randqb.frobenius_norm(a)
    for record in records:
        assert record.err_fro_rel >= randqb.optimal_errors(d, record.k).fro / norm * (1.0 - 1e-6)
        if record.algorithm == 'svd':
            assert record.err_fro_rel == pytest.approx(randqb.optimal_errors(d, record.k).fro / norm, rel=1e-6)


def test_accuracy_sweep_power_beats_cpqr() -> None:
    records = randqb.run_accuracy_sweep(accuracy_config())
    cpqr = {record.k: record.err_fro_rel for record in records if record.algorithm == 'cpqr'}
    for record in records:
        if record.algorithm == 'qb_pb':
            assert record.err_fro_rel <= cpqr[record.k]


@pytest.mark.parametrize('matrix_id', ['m1', 'm2', 'm5'])
def test_accuracy_sweep_power_approaches_the_optimum(matrix_id) -> None:
    ks = (10, 20, 30, 40)
    cfg = accuracy_config(
        matrix=randqb.TestMatrixSpec.from_id(matrix_id, m=120, n=90),
        k_grid=ks,
        algorithms=[alg('qb_pb', P=p, b=10) for p in (0, 1, 2)],
    )
    records = randqb.run_accuracy_sweep(cfg)
    optimal = {record.k: record.err_fro_rel for record in records if record.algorithm == 'svd'}
    errors = {(record.P, record.k): record.err_fro_rel for record in records if record.algorithm == 'qb_pb'}
    for k in ks:
        assert errors[2, k] <= errors[1, k] * (1.0 + 1e-3)
        assert errors[1, k] <= errors[0, k] * (1.0 + 1e-3)
        assert errors[2, k] <= 1.05 * optimal[k]


def test_accuracy_sweep_is_reproducible(tmp_path) -> None:
    cfg = accuracy_config()
    for name in ('first.csv', 'second.csv'):
        randqb.run_experiment(cfg.model_copy(update={'output': str(tmp_path / name)}))
    assert (tmp_path / 'first.csv').read_bytes() == (tmp_path / 'second.csv').read_bytes()


def test_accuracy_sweep_with_tolerance() -> None:
    cfg = config(experiment='accuracy', matrix=small_m1, epsilon=1e-3, algorithms=[alg('qb_b', b=10)])
    (record,) = randqb.run_accuracy_sweep(cfg)
    assert record.k % 10 == 0
    assert record.err_fro_rel < 1e-3


def test_accuracy_sweep_on_a_file(tmp_path) -> None:
    a, _ = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='slow_decay', m=40, n=30))
    randqb.save_matrix_market(tmp_path / 'a.mtx', a)
    cfg = config(experiment='accuracy', matrix=f'file:{tmp_path / "a.mtx"}', k_grid=(5,), algorithms=[alg('qb')])
    records = randqb.run_accuracy_sweep(cfg)
    assert [record.algorithm for record in records] == ['qb', 'cpqr', 'svd']
    assert records[0].matrix_id.startswith('file:')

    with pytest.raises(randqb.InvalidArgument):
        randqb.run_accuracy_sweep(cfg.model_copy(update={'k_grid': (31,)}))


def test_runner_rejects_other_experiments() -> None:
    with pytest.raises(randqb.InvalidArgument):
        randqb.run_accuracy_sweep(config(experiment='stats', matrix=small_m1, k_grid=(10,)))


def stats_config(**kwargs) -> randqb.ExperimentConfig:
    return config(**{
        'experiment': 'stats',
        'matrix': small_m1,
        'k_grid': (10, 20),
        'algorithms': [alg('qb_pb', P=1, b=10)],
        'trials': 3,
        **kwargs,
    })


def test_stats_summary() -> None:
    result = randqb.run_stats(stats_config())
    assert [(record.trial, record.k) for record in result.records] == [(t, k) for t in range(3) for k in (10, 20)]
    assert len({record.seed for record in result.records}) == 3
    assert [(summary.k, summary.trials) for summary in result.summary] == [(10, 3), (20, 3)]
    for summary in result.summary:
        errors = [record.err_fro_rel for record in result.records if record.k == summary.k]
        assert summary.mean_fro == pytest.approx(sum(errors) / 3, rel=1e-12)
        assert summary.std_fro is not None and summary.std_spec is not None


def test_stats_single_trial_has_no_spread() -> None:
    result = randqb.run_stats(stats_config(trials=1))
    assert all(summary.std_fro is None and summary.std_spec is None for summary in result.summary)


def test_stats_independent_of_workers() -> None:
    assert randqb.run_stats(stats_config(workers=1)).records == randqb.run_stats(stats_config(workers=3)).records


def test_stats_scatter() -> None:
    result = randqb.run_stats(stats_config(k_grid=(), scatter_k=15, trials=2))
    assert [(record.algorithm, record.trial) for record in result.records] == [
        ('qb_pb', 0), ('qb_pb', 1), ('cpqr', 0), ('svd', 0),
    ]
    assert all(record.k == 15 for record in result.records)
    assert len(result.summary) == 1


def test_stats_writes_summary_beside_records(tmp_path) -> None:
    randqb.run_experiment(stats_config(output=str(tmp_path / 'stats.csv')))
    header = (tmp_path / 'stats.summary.csv').read_text().splitlines()[0]
    assert header == 'algorithm,P,b,k,trials,mean_fro,std_fro,mean_spec,std_spec'


def test_stats_scatter_is_tight_and_above_the_optimum() -> None:
    result = randqb.run_stats(stats_config(k_grid=(), scatter_k=30, trials=10, algorithms=[alg('qb_pb', P=2, b=10)]))
    (summary,) = result.summary
    assert summary.std_fro <= 0.1 * summary.mean_fro
    assert summary.std_spec <= 0.1 * summary.mean_spec

    (svd,) = [record for record in result.records if record.algorithm == 'svd']
    for record in result.records:
        if record.algorithm == 'qb_pb':
            assert record.err_fro_rel >= svd.err_fro_rel - 1e-12
            assert record.err_spec_rel >= svd.err_spec_rel * (1.0 - 1e-6) - 1e-12


def test_skip_reorth_stalls_without_orthonormalization() -> None:
    cfg = config(
        experiment='skip-reorth',
        matrix=small_unit_m1,
        k_grid=(10, 70),
        algorithms=[alg('qb_p', P=2), alg('qb_p', P=2, reorth='none')],
    )
    records = randqb.run_skip_reorth(cfg)
    assert [record.algorithm for record in records] == ['qb_p', 'qb_p', 'qb_p_noreorth', 'qb_p_noreorth', 'svd', 'svd']
    at_70 = {record.algorithm: record.err_fro_rel for record in records if record.k == 70}
    assert at_70['qb_p_noreorth'] > 100.0 * at_70['qb_p']


def test_speed_bench() -> None:
    cfg = config(
        experiment='speed',
        matrix='m4',
        n_grid=(40, 60),
        k_grid=(20,),
        block_grid=(10, 20),
        algorithms=[alg('qb'), alg('qb_b'), alg('cpqr')],
    )
    records = randqb.run_speed_bench(cfg)
    assert [(record.n, record.algorithm, record.b) for record in records] == [
        (n, name, b) for n in (40, 60) for name, b in (('qb', 0), ('qb_b', 10), ('qb_b', 20), ('cpqr', 0))
    ]
    assert all(record.matmul_ms == record.orth_ms == record.elapsed_ms == 0.0 for record in records)
    assert all(0.0 <= record.err_fro_rel < 1.0 for record in records)


def test_speed_bench_records_phase_times() -> None:
    cfg = randqb.ExperimentConfig(
        experiment='speed', matrix='m4', n_grid=(40,), k_grid=(20,), algorithms=[alg('qb')],
    )
    (record,) = randqb.run_speed_bench(cfg)
    assert record.elapsed_ms > 0.0
    assert record.matmul_ms > 0.0 and record.orth_ms > 0.0


def test_cost_experiment_csv(tmp_path) -> None:
    cfg = config(experiment='cost', cost={'m': 1000, 'n': 1000, 'ell': 100, 'b': 10}, output=str(tmp_path / 'c.csv'))
    randqb.run_experiment(cfg)
    header, row = (tmp_path / 'c.csv').read_text().splitlines()
    assert header.split(',')[:5] == ['m', 'n', 'ell', 'b', 'p']
    assert row.split(',')[7] == '210000000'


def test_write_records_json(tmp_path) -> None:
    records = randqb.run_accuracy_sweep(accuracy_config(k_grid=(10,)))
    randqb.write_records(records, tmp_path / 'r.json', 'json')
    loaded = json.loads((tmp_path / 'r.json').read_text())
    assert [list(row) for row in loaded] == [[
        'matrix_id', 'algorithm', 'P', 'b', 'k', 'trial', 'seed', 'err_fro_rel', 'err_spec_rel', 'elapsed_ms',
    ]] * len(records)
    assert [row['err_fro_rel'] for row in loaded] == [record.err_fro_rel for record in records]


def test_write_records_csv_to_stdout(capsys) -> None:
    randqb.write_records([_harness.StatsSummary(
        algorithm='qb_pb', P=2, b=10, k=10, trials=1, mean_fro=0.1, std_fro=None, mean_spec=0.25, std_spec=None,
    )], None, 'csv')
    assert capsys.readouterr().out.splitlines() == [
        'algorithm,P,b,k,trials,mean_fro,std_fro,mean_spec,std_spec',
        'qb_pb,2,10,10,1,0.10000000000000001,,0.25,',
    ]


def test_write_records_json_floats_match_csv(capsys) -> None:
    summary = _harness.StatsSummary(
        algorithm='qb_pb', P=2, b=10, k=10, trials=1, mean_fro=0.1, std_fro=None, mean_spec=1 / 3, std_spec=None,
    )
    randqb.write_records([summary], None, 'json')
    text = capsys.readouterr().out
    assert text.splitlines() == [
        '[',
        '  {"algorithm": "qb_pb", "P": 2, "b": 10, "k": 10, "trials": 1, "mean_fro": 0.10000000000000001, '
        '"std_fro": null, "mean_spec": 0.33333333333333331, "std_spec": null}',
        ']',
    ]
    assert json.loads(text)[0]['mean_spec'] == summary.mean_spec


def test_write_records_empty_json(capsys) -> None:
    randqb.write_records([], None, 'json')
    assert capsys.readouterr().out == '[]\n'
