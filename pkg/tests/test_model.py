import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simlab.model import (ModelParams, ParamError, PolicySpec, alpha_window, intensity_eval,
                          policy_eval)


@pytest.mark.parametrize("beta, window", [(2.5, (1.5, 2.5)), (2.2, (1.2, 1.6)), (2.9, (1.9, 2.1))])
def test_alpha_window_examples(beta, window):
    assert alpha_window(beta) == pytest.approx(window, abs=1e-12)


@pytest.mark.parametrize("beta", [2.0, 3.0, 1.5, 3.1])
def test_alpha_window_rejects_outside(beta):
    with pytest.raises(ParamError):
        alpha_window(beta)


@given(st.floats(2.0, 3.0, exclude_min=True, exclude_max=True))
def test_alpha_window_nonempty_inside(beta):
    lo, hi = alpha_window(beta)
    assert lo < hi


@pytest.mark.parametrize("beta", [2.0 + 1e-9, 3.0 - 1e-9])
def test_alpha_window_collapses_at_edges(beta):
    lo, hi = alpha_window(beta)
    assert 0 < hi - lo < 1e-8


def test_valid_params_and_derived_a():
    p = ModelParams(beta=2.5, theta=1.0, alpha=2.0, b=2.0, d=1, n=16)
    assert p.a == 2.0
    assert p.balanced


@pytest.mark.parametrize("kwargs, field, code", [
    (dict(beta=2.5, theta=1.0, alpha=1.4, b=2.0), "alpha", "alpha_low"),
    (dict(beta=2.5, theta=1.0, alpha=2.6, b=2.0), "alpha", "alpha_high"),
    (dict(beta=3.1, theta=1.0, alpha=2.0, b=2.0), "beta", "beta_range"),
    (dict(beta=2.5, theta=0.0, alpha=2.0, b=2.0), "theta", "theta_positive"),
    (dict(beta=2.5, theta=1.0, alpha=2.0, b=-1.0), "b", "b_positive"),
    (dict(beta=2.5, theta=1.0, alpha=2.0, b=2.0, d=0), "d", "d_positive"),
    (dict(beta=2.5, theta=1.0, alpha=2.0, b=2.0, n=0), "n", "n_positive"),
    (dict(beta=2.5, theta=1.0, alpha=2.0, b=2.0, d=1.5), "d", "d_integer"),
])
def test_each_invariant_has_named_error(kwargs, field, code):
    with pytest.raises(ParamError) as err:
        ModelParams(**kwargs)
    assert err.value.field == field
    assert err.value.code == code


def test_alpha_error_message():
    with pytest.raises(ParamError, match="alpha below beta-1"):
        ModelParams(beta=2.5, theta=1.0, alpha=1.4, b=2.0)


def test_policy_catalog_examples():
    assert policy_eval(PolicySpec.linear(1.0), 0.0) == (0.0, 1.0, 0.0)
    g, dg, d2g = policy_eval(PolicySpec.linear_tanh(1.0, 0.5), 0.0)
    assert (g, dg, d2g) == pytest.approx((0.0, 1.5, 0.0))
    assert PolicySpec.linear_tanh(1.0, 0.5).dg(40.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("kwargs", [dict(kind="linear", c1=0.0), dict(kind="linear", c1=1.0, c2=0.5),
                                    dict(kind="linear_tanh", c1=1.0, c2=-0.1),
                                    dict(kind="cubic", c1=1.0)])
def test_policy_rejects_bad_coefficients(kwargs):
    with pytest.raises(ParamError):
        PolicySpec(**kwargs)


policies = st.builds(PolicySpec.linear_tanh, st.floats(0.05, 5.0), st.floats(0.0, 5.0))


@given(policies)
def test_certified_bounds_on_dense_grid(g):
    x = np.linspace(-10, 10, 20001)
    assert g.g(0.0) == 0.0
    dg, d2g = g.dg(x), g.d2g(x)
    assert np.all(dg >= g.ell - 1e-12)
    assert np.all(dg <= g.L + 1e-12)
    assert np.all(np.abs(d2g) <= g.L + 1e-12)


@given(policies, st.floats(-10.0, 10.0))
def test_derivatives_match_finite_differences(g, x):
    h = 1e-4
    fd1 = (g.g(x + h) - g.g(x - h)) / (2 * h)
    fd2 = (g.dg(x + h) - g.dg(x - h)) / (2 * h)
    assert fd1 == pytest.approx(g.dg(x), rel=1e-6)
    assert fd2 == pytest.approx(g.d2g(x), rel=1e-6, abs=1e-8 * g.L)


def test_intensity_examples(std_params, linear1):
    f, fy = intensity_eval(std_params, linear1, 1.0, 2.0)
    assert (f, fy) == (1.0, -1.0)
    f, _ = intensity_eval(std_params, linear1, 0.0, 1.0)
    assert f == pytest.approx(math.exp(-1.0), rel=1e-15)


@given(policies, st.floats(0.0, 50.0), st.floats(0.1, 5.0))
def test_intensity_on_diagonal_is_one(g, t, b):
    p = ModelParams(2.5, 1.0, 2.0, b)
    f, fy = intensity_eval(p, g, t, b * t)
    assert f == pytest.approx(1.0, abs=1e-12)
    assert fy < 0


@given(policies, st.floats(0.0, 10.0), st.floats(0.0, 40.0), st.floats(0.1, 5.0))
def test_intensity_dominated_by_empty_system(g, t, y, b):
    p = ModelParams(2.5, 1.0, 2.0, b)
    f, _ = intensity_eval(p, g, t, y)
    assert f <= math.exp(-g.g(-b * t)) * (1 + 1e-12)
