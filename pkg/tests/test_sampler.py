import math

import numpy as np
import pytest
from scipy import stats

from heatvar.covariance import CovMatrix, GridSpec, ModelParams, build_cov_matrix
from heatvar.sampler import (
    CSVFormatError,
    FactorizationError,
    IncrementField,
    Seed,
    factorize,
    read_field_csv,
    reconstruct_path,
    sample_batch,
    sample_increments,
)

UNIT = ModelParams(2 / math.pi, 1.0)
C11 = math.sqrt(2) / 2
C21 = 0.5 * (math.sqrt(2) - 2) + 0.5 * (math.sqrt(3) - 2 * math.sqrt(2) + 1)
C22 = 1 + 0.5 * (2 - 2 * math.sqrt(3) + math.sqrt(2))


def test_factorize_identity():
    f = factorize(np.eye(4))
    assert np.array_equal(f.lower, np.eye(4))
    assert f.clamped == 0


def test_factorize_two_by_two():
    l = factorize(build_cov_matrix(GridSpec(2, 1.0, (0.0,)), UNIT)).lower
    l11 = math.sqrt(C11)
    l21 = C21 / l11
    np.testing.assert_allclose(l, [[l11, 0.0], [l21, math.sqrt(C22 - l21 ** 2)]], rtol=1e-14)


def test_factorize_reconstruction():
    cov = build_cov_matrix(GridSpec(50, 2 ** -8, (0.0, 0.5, 1.0)), ModelParams(1.0, 1.0))
    l = cov.factor().lower
    assert np.max(np.abs(l @ l.T - cov.values)) <= 1e-10 * np.max(np.abs(cov.values))


def test_factorize_clamps_semidefinite():
    v = np.array([1.0, 2.0, 3.0])
    f = factorize(np.outer(v, v))
    assert f.clamped == 2
    np.testing.assert_allclose(f.lower @ f.lower.T, np.outer(v, v), atol=1e-12)


def test_factorize_rejects_indefinite():
    with pytest.raises(FactorizationError) as info:
        factorize(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert info.value.index == 1
    assert "pivot 1" in str(info.value)


def test_factorize_requires_symmetry():
    with pytest.raises(ValueError):
        factorize(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_seed_validation():
    with pytest.raises(ValueError):
        Seed(-1)
    with pytest.raises(ValueError):
        Seed(1, 2 ** 64)


def test_determinism():
    g = GridSpec(16, 0.01, (0.0, 0.5))
    p = ModelParams(1.0, 1.0)
    a = sample_increments(g, p, Seed(42, 3))
    b = sample_increments(g, p, Seed(42, 3))
    c = sample_increments(g, p, Seed(42, 4))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert a.values.shape == (16, 2)


def test_batch_independent_of_batch_composition():
    cov = build_cov_matrix(GridSpec(8, 0.01, (0.0, 0.4)), ModelParams(1.0, 1.0))
    full = sample_batch(cov, 7, [1, 2, 3, 4])
    part = sample_batch(cov, 7, [3])
    np.testing.assert_allclose(full[2], part[0], rtol=1e-14, atol=1e-16)


def test_scale_equivariance():
    g = GridSpec(12, 0.01, (0.0, 0.3))
    a = sample_increments(g, ModelParams(1.0, 1.0), Seed(5))
    b = sample_increments(g, ModelParams(1.0, 2.0), Seed(5))
    c = sample_increments(g, ModelParams(1.0, 3.0), Seed(5))
    # a power-of-two factor commutes exactly with every floating-point step
    assert np.array_equal(b.values, 2.0 * a.values)
    np.testing.assert_allclose(c.values, 3.0 * a.values, rtol=1e-12)


def test_single_increment_variance():
    dn = 0.04
    p = ModelParams(1.5, 0.7)
    cov = build_cov_matrix(GridSpec(1, dn, (0.0,)), p)
    draws = sample_batch(cov, 1, range(100_000))[:, 0, 0]
    target = p.sigma ** 2 * math.sqrt(dn) * math.sqrt(2 / (math.pi * p.theta)) * (1 + 0.5 * (math.sqrt(2) - 2))
    se = target * math.sqrt(2 / (draws.size - 1))
    assert abs(np.var(draws, ddof=1) - target) <= 3 * se


def test_two_increment_covariance():
    cov = build_cov_matrix(GridSpec(2, 1.0, (0.0,)), UNIT)
    x = sample_batch(cov, 2, range(100_000)).reshape(-1, 2)
    emp = np.cov(x, rowvar=False)
    target = np.array([[C11, C21], [C21, C22]])
    n = x.shape[0]
    # standard error of a Gaussian sample covariance: sqrt((s_ij^2 + s_ii s_jj) / n)
    se = np.sqrt((target ** 2 + np.outer(np.diag(target), np.diag(target))) / n)
    assert np.all(np.abs(emp - target) <= 3 * se)


def test_streams_uncorrelated():
    cov = build_cov_matrix(GridSpec(3, 0.01, (0.0,)), ModelParams(1.0, 1.0))
    n = 10_000
    a = sample_batch(cov, 9, range(1, n + 1))[:, 1, 0]
    b = sample_batch(cov, 9, range(n + 1, 2 * n + 1))[:, 1, 0]
    assert abs(np.corrcoef(a, b)[0, 1]) <= 3 / math.sqrt(n)


def test_marginal_gaussianity():
    cov = build_cov_matrix(GridSpec(4, 0.01, (0.0, 0.3)), ModelParams(1.0, 1.0))
    x = sample_batch(cov, 11, range(100_000))[:, 3, 1]
    n = x.size
    assert abs(stats.skew(x)) <= 5 * math.sqrt(6 / n)
    assert abs(stats.kurtosis(x)) <= 5 * math.sqrt(24 / n)


def test_reconstruct_path():
    g = GridSpec(5, 0.1, (0.0, 1.0))
    z = IncrementField(np.zeros((5, 2)), g)
    assert np.array_equal(reconstruct_path(z), np.zeros((5, 2)))
    one = sample_increments(GridSpec(1, 0.1, (0.0, 1.0)), ModelParams(1, 1), Seed(0))
    assert np.array_equal(reconstruct_path(one), one.values)
    f = sample_increments(g, ModelParams(1, 1), Seed(1))
    path = reconstruct_path(f)
    np.testing.assert_allclose(np.diff(np.vstack([np.zeros((1, 2)), path]), axis=0), f.values,
                               rtol=0, atol=1e-15)


def test_field_validation():
    g = GridSpec(2, 0.1, (0.0,))
    with pytest.raises(ValueError):
        IncrementField(np.zeros((3, 1)), g)
    with pytest.raises(ValueError):
        IncrementField(np.array([[0.0], [np.nan]]), g)


def test_csv_round_trip(tmp_path):
    g = GridSpec(7, 2 ** -10, (0.0, 0.25, 0.6))
    f = sample_increments(g, ModelParams(1.0, 1.0), Seed(3))
    path = tmp_path / "inc.csv"
    f.to_csv(path)
    assert path.read_text().splitlines()[0] == "i,k,t,x,dX"
    back = read_field_csv(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


@pytest.mark.parametrize("text, match", [
    ("i,k,t,x,X\n1,1,0.1,0,1\n", "expected header"),
    ("i,k,t,x,dX\n1,1,0.1,0,oops\n", "row 2, column 5"),
    ("i,k,t,x,dX\n1,1,0.1,0,1\n2,1,0.2,0\n", "row 3 has 4 columns"),
    ("i,k,t,x,dX\n1,1,0.1,0,1\n3,1,0.3,0,1\n", "complete"),
    ("i,k,t,x,dX\n", "no data"),
])
def test_csv_errors(tmp_path, text, match):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(CSVFormatError, match=match):
        read_field_csv(path)
