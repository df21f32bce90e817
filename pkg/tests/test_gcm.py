"""Residual-product test: hand examples, the d=1 closed form, invariance
properties, and null calibration sanity checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from covmet import RegressorSpec, RngStream, gcm_statistic, gcm_test
from covmet.errors import DegenerateResidualsError, DomainError
from tests.conftest import make_linear_null


def closed_form_direct(eps, xi):
    """Direct transcription of the d=1 closed form."""
    eps = np.asarray(eps, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    n = eps.shape[0]
    prod = eps * xi
    num = (prod.sum() / np.sqrt(n)) ** 2
    den = np.mean(prod * prod) - np.mean(prod) ** 2
    return num / den


def test_orthogonal_residuals_give_zero_statistic():
    eps = np.array([1.0, -1.0, 1.0, -1.0])
    xi = np.array([1.0, 1.0, -1.0, -1.0]).reshape(-1, 1)
    r = gcm_statistic(eps, xi)
    assert r.statistic == 0.0
    assert r.p == 1.0
    assert r.df == 1


def test_hand_worked_example():
    # mean product 1/2, so numerator (2/2)^2 = 1; second moment of the
    # products is 1 and the variance 1 - 1/4 = 3/4, hence T = 4/3
    eps = np.array([2.0, 0.0, 0.0, 0.0])
    xi = np.ones((4, 1))
    r = gcm_statistic(eps, xi)
    assert r.statistic == pytest.approx(4.0 / 3.0, abs=1e-12)
    assert r.df == 1
    assert r.p == pytest.approx(0.2482, abs=5e-5)


def test_constant_products_are_degenerate():
    ones = np.ones(4)
    with pytest.raises(DegenerateResidualsError):
        gcm_statistic(ones, ones.reshape(-1, 1))


def test_zero_residuals_are_degenerate():
    with pytest.raises(DegenerateResidualsError):
        gcm_statistic(np.zeros(10), np.ones((10, 1)))


def test_duplicated_column_keeps_df_and_p():
    gen = np.random.default_rng(42)
    eps = gen.normal(size=50)
    xi = gen.normal(size=(50, 1))
    single = gcm_statistic(eps, xi)
    doubled = gcm_statistic(eps, np.hstack([xi, xi]))
    assert doubled.df == single.df == 1
    assert doubled.p == pytest.approx(single.p, abs=1e-8)
    assert doubled.statistic == pytest.approx(single.statistic, abs=1e-8)


@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    n=st.integers(min_value=5, max_value=200),
)
@settings(max_examples=100, deadline=None)
def test_general_statistic_matches_closed_form_d1(seed, n):
    gen = np.random.default_rng(seed)
    eps = gen.normal(size=n)
    xi = gen.normal(size=(n, 1))
    r = gcm_statistic(eps, xi)
    assert r.statistic == pytest.approx(closed_form_direct(eps, xi), abs=1e-10)


@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    c=st.floats(min_value=1e-3, max_value=1e3),
    flip=st.booleans(),
)
@settings(max_examples=60, deadline=None)
def test_scale_equivariance(seed, c, flip):
    gen = np.random.default_rng(seed)
    eps = gen.normal(size=40)
    xi = gen.normal(size=(40, 2))
    scale = -c if flip else c
    base = gcm_statistic(eps, xi)
    scaled = gcm_statistic(scale * eps, xi)
    assert scaled.statistic == pytest.approx(base.statistic, rel=1e-9)
    assert scaled.p == pytest.approx(base.p, rel=1e-9, abs=1e-12)
    assert scaled.df == base.df


@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_permutation_invariance(seed):
    gen = np.random.default_rng(seed)
    eps = gen.normal(size=30)
    xi = gen.normal(size=(30, 2))
    perm = gen.permutation(30)
    base = gcm_statistic(eps, xi)
    shuf = gcm_statistic(eps[perm], xi[perm])
    assert shuf.statistic == pytest.approx(base.statistic, rel=1e-10)
    assert shuf.df == base.df


def test_statistic_needs_two_rows():
    with pytest.raises(DomainError):
        gcm_statistic(np.ones(1), np.ones((1, 1)))


# ---------------------------------------------------------------------------
# the full test wrapper


def test_gcm_test_result_shape_and_counts(linear_spec):
    y, x, z = make_linear_null(0, n=120, d=3)
    res = gcm_test(y, x, z, linear_spec, linear_spec, rng=RngStream(seed=1))
    assert res.d == 3 and res.n == 120
    assert res.regressions == 4  # d + 1
    assert res.df <= 3
    assert len(res.diagnostics["mse_xz"]) == 3
    assert len(res.residual_correlations) == 3
    body = res.to_json_dict()
    assert set(body) == {"test", "statistic", "df", "p", "d", "n", "regressions",
                         "diagnostics"}
    assert body["test"] == "gcm"
    assert body["regressions"]["count"] == 4


def test_gcm_empty_z_is_marginal_covariance_test(linear_spec):
    gen = np.random.default_rng(3)
    y = gen.normal(size=80)
    x = gen.normal(size=(80, 2))
    z = np.empty((80, 0))
    res = gcm_test(y, x, z, RegressorSpec("constant"), RegressorSpec("constant"),
                   rng=RngStream(seed=2))
    direct = gcm_statistic(y - y.mean(), x - x.mean(axis=0))
    assert res.statistic == pytest.approx(direct.statistic, abs=1e-12)
    assert res.p == pytest.approx(direct.p, abs=1e-12)


def test_gcm_accepts_z_none(linear_spec):
    gen = np.random.default_rng(4)
    y = gen.normal(size=50)
    x = gen.normal(size=(50, 1))
    res = gcm_test(y, x, None, RegressorSpec("constant"), RegressorSpec("constant"),
                   rng=RngStream(seed=3))
    assert res.n == 50


def test_gcm_requires_minimum_sample(linear_spec):
    y, x, z = make_linear_null(1, n=9)
    with pytest.raises(DomainError):
        gcm_test(y, x, z, linear_spec, linear_spec, rng=RngStream(seed=4))


def test_gcm_constant_response_degenerates(linear_spec):
    gen = np.random.default_rng(5)
    z = gen.normal(size=(40, 1))
    x = z + gen.normal(size=(40, 1))
    y = np.zeros(40)
    with pytest.raises(DegenerateResidualsError):
        gcm_test(y, x, z, linear_spec, linear_spec, rng=RngStream(seed=5))


def test_gcm_threads_do_not_change_result(linear_spec):
    y, x, z = make_linear_null(6, n=150, d=4)
    r1 = gcm_test(y, x, z, linear_spec, linear_spec, rng=RngStream(seed=6), threads=1)
    r4 = gcm_test(y, x, z, linear_spec, linear_spec, rng=RngStream(seed=6), threads=4)
    assert r1.to_json_dict() == r4.to_json_dict()


def test_gcm_detects_direct_effect(linear_spec):
    gen = np.random.default_rng(7)
    z = gen.normal(size=(250, 2))
    x = z @ gen.normal(size=(2, 1)) + gen.normal(size=(250, 1))
    y = z @ gen.normal(size=2) + 1.0 * x[:, 0] + gen.normal(size=250)
    res = gcm_test(y, x, z, linear_spec, linear_spec, rng=RngStream(seed=7))
    assert res.p < 1e-6


def test_gcm_null_rate_sane(linear_spec):
    # light-duty calibration probe; the tight version lives in the
    # acceptance suite
    reps = 100
    hits = 0
    for i in range(reps):
        y, x, z = make_linear_null(1000 + i, n=200)
        res = gcm_test(y, x, z, linear_spec, linear_spec, rng=RngStream(seed=i))
        hits += res.p <= 0.05
    assert hits / reps <= 0.12


def test_gcm_null_statistics_look_chi2(linear_spec):
    # KS check of the null statistic distribution against chi2(1)
    reps = 1000
    ts = np.empty(reps)
    for i in range(reps):
        y, x, z = make_linear_null(20_000 + i, n=500)
        ts[i] = gcm_test(y, x, z, linear_spec, linear_spec,
                         rng=RngStream(seed=i)).statistic
    ks = stats.kstest(ts, stats.chi2(1).cdf)
    assert ks.pvalue > 0.01
