import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from simlab.arrivals import sample_session_length, session_cdf
from simlab.model import ModelParams
from simlab.stats import InsufficientSamplesError, cov_matrix_with_se, summarize_stats


def test_constant_sample_has_zero_variance():
    res = summarize_stats(np.full(50, 3.25), "variance")
    assert res.estimate == 0.0 and res.se == 0.0


def test_mean_and_variance_match_numpy(rng):
    x = rng.normal(1.0, 2.0, 400)
    m = summarize_stats(x, "mean")
    assert m.estimate == pytest.approx(x.mean())
    assert m.se == pytest.approx(x.std(ddof=1) / 20.0)
    v = summarize_stats(x, "variance")
    assert v.estimate == pytest.approx(x.var(ddof=1))


def test_variance_se_for_gaussian_data(rng):
    x = rng.normal(0.0, 1.5, 200_000)
    v = summarize_stats(x, "variance")
    # for Gaussian data SE(s^2) = sigma^2 sqrt(2/(n-1))
    assert v.se == pytest.approx(1.5 ** 2 * math.sqrt(2 / (len(x) - 1)), rel=0.02)


def test_covariance_estimator(rng):
    X = rng.multivariate_normal([0, 0], [[1.0, 0.6], [0.6, 2.0]], 1000)
    res = summarize_stats(X, "covariance")
    assert res.estimate == pytest.approx(np.cov(X.T)[0, 1], rel=1e-12)
    est, se = cov_matrix_with_se(X)
    assert np.allclose(est, np.cov(X.T), rtol=1e-12)
    assert se[0, 1] == pytest.approx(res.se, rel=1e-12)


def test_slope_fit_on_exact_pairs():
    n = np.array([8.0, 16.0, 32.0, 64.0])
    res = summarize_stats(np.column_stack([n, 3.7 * n ** -0.5]), "slope-fit")
    assert abs(res.estimate + 0.5) <= 1e-12


@given(st.floats(-3.0, 3.0), st.floats(0.1, 100.0))
def test_slope_fit_recovers_power(power, scale):
    n = np.array([2.0, 4.0, 8.0, 16.0, 32.0])
    res = summarize_stats(np.column_stack([n, scale * n ** power]), "slope-fit")
    assert res.estimate == pytest.approx(power, abs=1e-10)


@pytest.mark.parametrize("kind, size", [("mean", 1), ("variance", 1), ("slope-fit", 2)])
def test_insufficient_samples(kind, size):
    data = np.ones((size, 2)) if kind == "slope-fit" else np.ones(size)
    with pytest.raises(InsufficientSamplesError):
        summarize_stats(data, kind)


def test_unknown_kind_and_missing_reference():
    with pytest.raises(ValueError):
        summarize_stats([1.0, 2.0], "median")
    with pytest.raises(ValueError):
        summarize_stats([1.0, 2.0], "ks-one-sample")
    with pytest.raises(ValueError):
        summarize_stats([1.0, 2.0], "ks-two-sample")


def test_ks_pvalues_of_exact_sampler_are_uniform():
    p = ModelParams(2.5, 1.0, 2.0, 2.0, n=16)
    rng = np.random.default_rng(2024)
    pvals = np.array([summarize_stats(sample_session_length(rng.random(500), p), "ks-one-sample",
                                      cdf=lambda r: session_cdf(r, p)).pvalue for _ in range(100)])
    # rejections at the 1% level are Binomial(100, 0.01); 4 or fewer covers 99.6% of its mass
    assert np.sum(pvals <= 0.01) <= 4
    assert sps.kstest(pvals, "uniform").pvalue > 0.01


def test_ks_two_sample(rng):
    a, b = rng.normal(size=500), rng.normal(size=500)
    assert summarize_stats(a, "ks-two-sample", other=b).pvalue > 0.01
    assert summarize_stats(a, "ks-two-sample", other=b + 1.0).pvalue < 1e-6
