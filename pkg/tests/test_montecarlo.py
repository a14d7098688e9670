import json
import math
import warnings

import numpy as np
import pytest

from heatvar.covariance import GridSpec, ModelParams, build_cov_matrix
from heatvar.montecarlo import DecorrelationWarning, MCConfig, ks_statistic, run_replications

PRM = ModelParams(1.0, 1.0)


def _small(**kw):
    base = dict(grid=GridSpec.uniform(32, 2 ** -10, 4, 0.25), params=PRM, reps=300, root_seed=3)
    base.update(kw)
    return MCConfig(**base)


def test_deterministic_and_thread_independent():
    a = run_replications(_small())
    b = run_replications(_small())
    c = run_replications(_small(threads=4))
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.samples, c.samples)
    assert a.to_dict() == c.to_dict()
    json.dumps(a.to_dict())


def test_two_replications():
    rep = run_replications(_small(reps=2))
    assert rep.samples.size == 2
    x, y = rep.samples
    assert rep.empirical_var == pytest.approx((x - y) ** 2 / 2, rel=1e-12)
    assert rep.empirical_mean == pytest.approx((x + y) / 2, rel=1e-12)


def test_reps_must_allow_variance():
    with pytest.raises(ValueError):
        _small(reps=1)


def test_decorrelation_warning():
    with pytest.warns(DecorrelationWarning):
        MCConfig(GridSpec.uniform(16, 0.01, 4, 0.2), PRM, reps=10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        MCConfig(GridSpec.uniform(16, 2 ** -10, 4, 0.25), PRM, reps=10)


def test_ratio_flag_in_report():
    with pytest.warns(DecorrelationWarning):
        cfg = MCConfig(GridSpec.uniform(16, 0.01, 2, 0.2), PRM, reps=4)
    assert run_replications(cfg).to_dict()["ratio_flag"] == "warn"
    assert run_replications(_small(reps=4)).to_dict()["ratio_flag"] == "ok"


def test_ks_examples():
    assert ks_statistic([0.0], 1.0) == pytest.approx(0.5, abs=1e-15)
    rng = np.random.default_rng(0)
    x = rng.normal(scale=1.7, size=2000)
    d = ks_statistic(x, 1.7 ** 2)
    assert d < 0.05
    assert ks_statistic(3.0 * x, 9.0 * 1.7 ** 2) == pytest.approx(d, abs=1e-14)
    assert 0 <= ks_statistic(x + 5, 1.0) <= 1
    with pytest.raises(ValueError):
        ks_statistic(x, 0.0)
    with pytest.raises(ValueError):
        ks_statistic([], 1.0)


def test_samples_csv(tmp_path):
    rep = run_replications(_small(reps=5))
    path = tmp_path / "s.csv"
    rep.samples_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "s"
    assert np.array_equal(np.array([float(v) for v in lines[1:]]), rep.samples)


def test_report_invariants():
    rep = run_replications(_small())
    assert rep.empirical_var >= 0
    assert 0 <= rep.ks_stat <= 1
    assert set(rep.estimates) == {"theta", "sigma", "viscosity_adjusted"}
    assert 0 <= rep.coverage <= 1


def _exact_clt_var(grid):
    # Isserlis for p = 2: Var(sum of squares) = 2 * sum of squared covariances
    c = build_cov_matrix(grid, PRM).values / math.sqrt(grid.delta_n)
    return 2.0 * np.sum(c ** 2) / (grid.n * grid.m)


def test_exact_variance_grows_as_spacing_shrinks():
    v = [_exact_clt_var(GridSpec.uniform(256, 2 ** -10, 8, dx)) for dx in (0.25, 0.125, 0.0625, 0.03125)]
    assert v[0] < v[1] < v[2] < v[3]


@pytest.mark.slow
def test_halved_spacing_inflates_variance():
    # at spacing 0.25 -> 0.125 the exact inflation is ~0.05%, far below Monte Carlo
    # resolution, so the run uses the regime where it is ~7%
    n, dn = 256, 2 ** -10
    with pytest.warns(DecorrelationWarning):
        wide = run_replications(MCConfig(GridSpec.uniform(n, dn, 8, 0.0625), PRM, reps=2000, root_seed=21))
    with pytest.warns(DecorrelationWarning):
        narrow = run_replications(MCConfig(GridSpec.uniform(n, dn, 8, 0.03125), PRM, reps=2000, root_seed=21))
    assert narrow.decorrelation_ratio == pytest.approx(4 * wide.decorrelation_ratio)
    assert narrow.empirical_var > wide.empirical_var
    assert narrow.to_dict()["ratio_flag"] == "warn"
