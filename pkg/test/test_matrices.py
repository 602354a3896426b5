import math

import numpy
import pydantic
import pytest

import randqb


@pytest.mark.parametrize('matrix_id,family,shape', [
    ('m1', randqb.Family.fast_decay, (800, 600)),
    ('m2', randqb.Family.slow_decay, (800, 600)),
    ('m3', randqb.Family.sparse, (800, 600)),
    ('m4', randqb.Family.kahan, (1000, 1000)),
    ('m5', randqb.Family.s_shaped, (800, 600)),
])
def test_from_id_defaults(matrix_id, family, shape) -> None:
    spec = randqb.TestMatrixSpec.from_id(matrix_id)
    assert spec.family == family
    assert (spec.m, spec.n) == shape
    assert spec.matrix_id == matrix_id


def test_from_id_overrides() -> None:
    spec = randqb.TestMatrixSpec.from_id('m1', m=50, n=40, seed=3)
    assert (spec.m, spec.n, spec.seed) == (50, 40, 3)


def test_from_id_rejects_unknown() -> None:
    with pytest.raises(randqb.InvalidArgument):
        randqb.TestMatrixSpec.from_id('m6')


@pytest.mark.parametrize('kwargs', [
    dict(family='fast_decay', beta=1.0),
    dict(family='fast_decay', m=0),
    dict(family='sparse', density=0.0),
    dict(family='kahan', zeta=1.0),
    dict(family='s_shaped', knots=(60, 30)),
    dict(family='s_shaped', hover=(1.0, 0.9)),
    dict(family='s_shaped', plateau=0.95),
    dict(family='kahan', unit_top=True),
    dict(family='fast_decay', color='red'),
])
def test_spec_validation(kwargs) -> None:
    with pytest.raises(pydantic.ValidationError):
        randqb.TestMatrixSpec(**kwargs)


@pytest.mark.parametrize('family', list(randqb.Family))
def test_gen_test_matrix_shape_and_determinism(family) -> None:
    spec = randqb.TestMatrixSpec(family=family, m=60, n=40, density=0.1)
    a, d = randqb.gen_test_matrix(spec)
    again, _ = randqb.gen_test_matrix(spec)
    assert a.shape == (60, 40)
    assert a.flags.f_contiguous
    assert numpy.array_equal(a, again)
    assert (d is None) == (family in (randqb.Family.sparse, randqb.Family.kahan))


@pytest.mark.parametrize('family', ['fast_decay', 'slow_decay', 's_shaped'])
def test_gen_test_matrix_spectrum(family) -> None:
    a, d = randqb.gen_test_matrix(randqb.TestMatrixSpec(family=family, m=90, n=70))
    assert d.shape == (70,)
    assert (numpy.diff(d) <= 0.0).all()
    _, s, _ = randqb.jacobi_svd(a)
    numpy.testing.assert_allclose(s, d, rtol=0.0, atol=1e-13 * d[0])


def test_slow_decay_values() -> None:
    _, d = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='slow_decay', m=20, n=10))
    numpy.testing.assert_allclose(d, [(1.0 + 200.0 * j) ** -0.5 for j in range(10)], rtol=1e-15)


def test_fast_decay_bounded_by_geometric_envelope() -> None:
    _, d = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='fast_decay', m=100, n=100))
    assert d[0] < 1.0
    assert (d <= 0.65 ** numpy.arange(100)).all()


def test_s_shaped_knots() -> None:
    spec = randqb.TestMatrixSpec(family='s_shaped', m=100, n=80)
    _, d = randqb.gen_test_matrix(spec)
    assert ((0.9 <= d[:30]) & (d[:30] <= 1.0)).all()
    numpy.testing.assert_allclose(d[59:], 10.0 ** -2.5, rtol=1e-14)
    ratios = d[30:60] / d[29:59]
    numpy.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)


def test_s_shaped_smaller_than_first_knot() -> None:
    _, d = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='s_shaped', m=30, n=20))
    assert ((0.9 <= d) & (d <= 1.0)).all()


def test_unit_top() -> None:
    a, d = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='fast_decay', m=50, n=40, unit_top=True))
    assert d[0] == 1.0
    assert float(randqb.spectral_norm_est(a)) == pytest.approx(1.0, rel=1e-8)


def test_kahan_structure() -> None:
    zeta = 0.99
    a, _ = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='kahan', m=40, n=40))
    phi = math.sqrt(1.0 - zeta ** 2)
    assert numpy.array_equal(a, numpy.triu(a))
    numpy.testing.assert_allclose(numpy.diagonal(a), zeta ** numpy.arange(40), rtol=1e-14)
    assert a[3, 7] == pytest.approx(-phi * zeta ** 3, rel=1e-14)
    numpy.testing.assert_allclose(numpy.linalg.norm(a, axis=0), 1.0, rtol=1e-12)


def test_kahan_random_zeta() -> None:
    a, _ = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='kahan', m=10, n=10, random_zeta=True, seed=4))
    zeta = a[1, 1]
    assert 0.95 <= zeta < 0.999
    assert a[2, 2] == pytest.approx(zeta ** 2, rel=1e-14)
    numpy.testing.assert_allclose(numpy.linalg.norm(a, axis=0), 1.0, rtol=1e-12)


def test_sparse_has_few_nonzeros() -> None:
    a, _ = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='sparse', m=200, n=100))
    assert 0 < numpy.count_nonzero(a) < 0.05 * a.size
    assert (a >= 0.0).all()


@pytest.mark.parametrize('k,expected', [
    (2, (1.0, 1.0)),
    (0, (math.sqrt(14.0), 3.0)),
    (3, (0.0, 0.0)),
])
def test_optimal_errors(k, expected) -> None:
    assert randqb.optimal_errors(numpy.array([3.0, 2.0, 1.0]), k) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize('k', [-1, 4])
def test_optimal_errors_rejects(k) -> None:
    with pytest.raises(randqb.InvalidArgument):
        randqb.optimal_errors(numpy.array([3.0, 2.0, 1.0]), k)


def test_optimal_errors_match_the_oracle() -> None:
    a, d = randqb.gen_test_matrix(randqb.TestMatrixSpec(family='slow_decay', m=80, n=60))
    residual = a - randqb.truncated_svd_oracle(a, 30).reconstruct()
    optimal = randqb.optimal_errors(d, 30)
    assert randqb.frobenius_norm(residual) == pytest.approx(optimal.fro, rel=1e-9)
    assert float(randqb.spectral_norm_est(residual)) == pytest.approx(optimal.spec, rel=1e-6)


def write(tmp_path, text: str):
    path = tmp_path / 'a.mtx'
    path.write_text(text)
    return path


def test_load_array(tmp_path) -> None:
    path = write(tmp_path, '%%MatrixMarket matrix array real general\n% comment\n2 2\n1\n2\n3\n4\n')
    numpy.testing.assert_array_equal(randqb.load_matrix_market(path), [[1.0, 3.0], [2.0, 4.0]])


def test_load_coordinate(tmp_path) -> None:
    path = write(tmp_path, '%%MatrixMarket matrix coordinate real general\n3 3 1\n1 1 5.0\n')
    expected = numpy.zeros((3, 3))
    expected[0, 0] = 5.0
    numpy.testing.assert_array_equal(randqb.load_matrix_market(path), expected)


def test_load_coordinate_sums_duplicates(tmp_path) -> None:
    path = write(tmp_path, '%%MatrixMarket matrix coordinate integer general\n2 2 3\n2 1 1\n2 1 2\n1 2 -1\n')
    numpy.testing.assert_array_equal(randqb.load_matrix_market(path), [[0.0, -1.0], [3.0, 0.0]])


@pytest.mark.parametrize('text,line', [
    ('%%MatrixMarket tensor array real general\n1 1\n1\n', 1),
    ('%%MatrixMarket matrix array complex general\n1 1\n1 0\n', 1),
    ('%%MatrixMarket matrix array real symmetric\n1 1\n1\n', 1),
    ('%%MatrixMarket matrix array real general\n1\n1\n', 2),
    ('%%MatrixMarket matrix array real general\n2 1\n1\nx\n', 4),
    ('%%MatrixMarket matrix array real general\n1 1\n1\n2\n', 4),
    ('%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n', 3),
    ('%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1\n', 3),
])
def test_load_reports_line(tmp_path, text, line) -> None:
    with pytest.raises(randqb.MatrixMarketError) as e:
        randqb.load_matrix_market(write(tmp_path, text))
    assert e.value.line == line
    assert str(e.value).startswith(f'line {line}:')


@pytest.mark.parametrize('text,line,message', [
    ('%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n', 5, 'expected 4 entries, found 3'),
    ('%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n% trailing\n', 3, 'expected 2 entries, found 1'),
    ('%%MatrixMarket matrix array real general\n2 2\n', 2, 'expected 4 entries, found 0'),
])
def test_load_counts_entries(tmp_path, text, line, message) -> None:
    with pytest.raises(randqb.MatrixMarketError, match=message) as e:
        randqb.load_matrix_market(write(tmp_path, text))
    assert e.value.line == line
    assert str(e.value) == f'line {line}: {message}.'


@pytest.mark.parametrize('layout', ['array', 'coordinate'])
def test_save_then_load_is_bit_equal(tmp_path, layout) -> None:
    a = randqb.gaussian_matrix(randqb.RngStream.from_seed(0), 10, 8)
    a[2, 3] = 0.0
    randqb.save_matrix_market(tmp_path / 'a.mtx', a, layout=layout)
    assert numpy.array_equal(randqb.load_matrix_market(tmp_path / 'a.mtx'), a)
