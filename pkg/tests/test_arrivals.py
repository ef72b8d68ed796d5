import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import quad
from scipy.optimize import brentq

from simlab.arrivals import (ConsistencyError, SimulationBudgetError, evaluate_path,
                             fluctuation_from_ybar, fluctuation_path, replication_seed, session_cdf,
                             sample_session_length, simulate_scaled_path,
                             simulate_scaled_path_inversion)
from simlab.fluid import compute_fluid
from simlab.model import ModelParams, PolicySpec

SIMULATORS = [simulate_scaled_path, simulate_scaled_path_inversion]


def test_session_length_quantiles(std_params):
    p = std_params.with_n(1)
    assert sample_session_length(0.0, p) == 0.0
    root = brentq(lambda r: 1.0 - (r + 1.0) ** -1.5 - 0.75, 0.0, 100.0, xtol=1e-14)
    assert sample_session_length(0.75, p) == pytest.approx(root, rel=1e-12)
    assert root == pytest.approx(4 ** (2 / 3) - 1, rel=1e-12)


@pytest.mark.parametrize("u", [1.0, 1.5, -0.1])
def test_session_length_rejects_bad_uniform(u, std_params):
    with pytest.raises(ValueError):
        sample_session_length(u, std_params)


def test_session_length_mean(std_params):
    p = std_params.with_n(16)
    # E tau = int_0^inf (1 - F(r)) dr
    mean_quad, _ = quad(lambda r: 1.0 - float(session_cdf(r, p)), 0.0, np.inf, epsabs=1e-12)
    assert mean_quad == pytest.approx(p.a / p.n, rel=1e-7)
    draws = sample_session_length(np.random.default_rng(7).random(1_000_000), p)
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - p.a / p.n) <= 3 * se


def test_session_length_law(std_params):
    p = std_params.with_n(4)
    draws = sample_session_length(np.random.default_rng(11).random(20000), p)
    assert stats.kstest(draws, lambda r: session_cdf(r, p)).pvalue > 0.01


def test_replication_seeds_are_distinct():
    seeds = {replication_seed(20240601, r) for r in range(1000)}
    assert len(seeds) == 1000
    assert replication_seed(1, 5) == replication_seed(1, 5)


@pytest.mark.parametrize("sim", SIMULATORS)
def test_tiny_horizon_is_empty(sim, std_params, linear1):
    path = sim(std_params.with_n(4), linear1, 1e-12, seed=3)
    assert path.n_events == 0
    ybar, Y, N = path.evaluate(np.array([0.0, 1e-12]))
    assert np.all(ybar == 0) and np.all(Y == 0) and np.all(N == 0)


@pytest.mark.parametrize("sim", SIMULATORS)
def test_bad_horizon(sim, std_params, linear1):
    with pytest.raises(ValueError):
        sim(std_params, linear1, 0.0, seed=1)


@pytest.mark.parametrize("sim", SIMULATORS)
def test_zero_policy_not_simulated(sim, std_params):
    with pytest.raises(ValueError):
        sim(std_params, PolicySpec.zero(), 1.0, seed=1)


@pytest.mark.parametrize("sim", SIMULATORS)
def test_deterministic_given_seed(sim, std_params, linear1):
    p = std_params.with_n(8)
    a, b = sim(p, linear1, 3.0, seed=99), sim(p, linear1, 3.0, seed=99)
    for name in ("times", "Y", "N", "active", "Lam", "ev_station", "ev_start", "ev_duration"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = sim(p, linear1, 3.0, seed=100)
    assert not np.array_equal(a.ev_start, c.ev_start)


def test_event_budget(std_params, linear1):
    with pytest.raises(SimulationBudgetError):
        simulate_scaled_path(std_params.with_n(16), linear1, 5.0, seed=1, max_events=50)


@pytest.mark.parametrize("sim", SIMULATORS)
@settings(max_examples=10)
@given(seed=st.integers(0, 2 ** 32), c2=st.floats(0.0, 2.0), d=st.integers(1, 3))
def test_path_invariants(sim, seed, c2, d):
    p = ModelParams(2.5, 1.0, 2.0, 1.5, d=d, n=8)
    g = PolicySpec.linear_tanh(1.0, c2)
    path = sim(p, g, 2.0, seed=seed)
    assert path.slopes_ok()
    assert np.all(path.Y[0] == 0)
    assert np.all(np.diff(path.times) >= 0)
    assert np.all(path.ev_duration > 0) and np.all(path.ev_start >= 0)
    ts = np.linspace(0, 2.0, 37)
    ybar, Y, N = evaluate_path(path, ts)
    assert np.allclose(ybar, Y.mean(axis=-1), rtol=0, atol=1e-14)
    assert N[-1].sum() == path.n_events
    assert np.array_equal(np.bincount(path.ev_station, minlength=d), N[-1])


def test_evaluate_interpolates(std_params, linear1):
    path = simulate_scaled_path(std_params.with_n(8), linear1, 2.0, seed=5)
    k = len(path.times) // 2
    _, Y, N = path.evaluate(path.times[k])
    assert np.allclose(Y, path.Y[k]) and np.array_equal(N, path.N[k])
    lo, hi = path.times[k], path.times[k + 1]
    _, Ymid, _ = path.evaluate(0.5 * (lo + hi))
    if hi > lo:
        assert np.allclose(Ymid, 0.5 * (path.Y[k] + path.Y[k + 1]), rtol=1e-12, atol=1e-15)
    with pytest.raises(ValueError):
        path.evaluate(2.5)


def test_cumulative_intensity_matches_quadrature():
    p = ModelParams(2.5, 1.0, 2.0, 1.0, d=2, n=8)
    g = PolicySpec.linear_tanh(1.0, 0.7)
    path = simulate_scaled_path(p, g, 3.0, seed=21)
    assert np.allclose(path.Lam_at(path.times), path.Lam, rtol=1e-12, atol=1e-14)

    def f(s):
        ybar, _, _ = path.evaluate(s)
        return math.exp(-g.g(float(ybar) - p.b * s))

    ref = sum(quad(f, a, b, epsabs=1e-13)[0] for a, b in zip(path.times[:-1], path.times[1:]) if b <= 3.0)
    ref += quad(f, path.times[-1], 3.0, epsabs=1e-13)[0]
    assert float(path.Lam_at(3.0)) == pytest.approx(ref, rel=1e-9)


def test_fluctuation_of_synthetic_path(std_params, std_fluid):
    p = std_params.with_n(64)
    grid = np.linspace(0, 5, 11)
    exact = std_fluid.U_at(grid) + std_fluid.V_at(grid) / p.n ** (p.beta - 2)
    assert np.allclose(fluctuation_from_ybar(exact, p, std_fluid, grid), 0.0, atol=1e-12)
    shift = 0.37 * p.n ** (-(p.alpha + p.beta - 3) / 2)
    z = fluctuation_from_ybar(exact + shift, p, std_fluid, grid)
    assert np.allclose(z, 0.37, atol=1e-9)


def test_fluctuation_model_mismatch(std_params, lagging_fluid, linear1):
    path = simulate_scaled_path(std_params.with_n(4), linear1, 1.0, seed=1)
    with pytest.raises(ConsistencyError):
        fluctuation_path(path, lagging_fluid, [0.5])


@pytest.mark.parametrize("sim", SIMULATORS)
def test_compensator_identity(sim, std_params, linear1):
    p = std_params.with_n(16)
    grid = np.array([1.0, 2.5, 5.0])
    diffs = []
    for r in range(500):
        path = sim(p, linear1, 5.0, seed=replication_seed(777, r))
        _, _, N = path.evaluate(grid)
        diffs.append(N[:, 0] - p.n ** p.alpha * path.Lam_at(grid))
    diffs = np.array(diffs)
    se = diffs.std(axis=0, ddof=1) / math.sqrt(len(diffs))
    assert np.all(np.abs(diffs.mean(axis=0)) <= 3 * se)


def test_simulators_agree_in_law(std_params, linear1):
    p = std_params.with_n(8)
    out = {}
    for sim in SIMULATORS:
        rows = []
        for r in range(400):
            path = sim(p, linear1, 3.0, seed=replication_seed(31, r))
            ybar, _, N = path.evaluate(3.0)
            rows.append((N[0], ybar))
        out[sim.__name__] = np.array(rows)
    a, b = out.values()
    assert stats.ks_2samp(a[:, 0], b[:, 0]).pvalue > 0.01
    assert stats.ks_2samp(a[:, 1], b[:, 1]).pvalue > 0.01


def test_stations_are_exchangeable(linear1):
    p = ModelParams(2.5, 1.0, 2.0, 2.0, d=2, n=8)
    counts = np.array([simulate_scaled_path(p, linear1, 2.0, seed=replication_seed(5, r)).N[-1]
                       for r in range(400)])
    diff = counts[:, 0] - counts[:, 1]
    assert abs(diff.mean()) <= 3 * diff.std(ddof=1) / math.sqrt(len(diff))


def test_event_log_csv(tmp_path, std_params, linear1):
    path = simulate_scaled_path(std_params.with_n(4), linear1, 1.0, seed=8)
    out = tmp_path / "events.csv"
    path.write_events_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "station,start,duration"
    assert len(lines) == path.n_events + 1
    station, start, dur = lines[1].split(",")
    assert station == "1"
    assert len(start.split(".")[1]) == 12 and len(dur.split(".")[1]) == 12


def test_fluid_for_other_n_is_shared(std_params, linear1):
    # the fluid depends on the model but not on the scaling level
    fluid = compute_fluid(std_params, linear1, 2.0)
    path = simulate_scaled_path(std_params.with_n(4), linear1, 2.0, seed=2)
    assert np.all(np.isfinite(fluctuation_path(path, fluid, [0.5, 1.0, 2.0])))
