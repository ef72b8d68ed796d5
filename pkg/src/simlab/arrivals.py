"""Exact event-driven simulation of the scaled d-station workload system.

Random streams
--------------
A path seed ``s`` expands into independent streams through
``numpy.random.SeedSequence(s, spawn_key=(k,))``: key 0 feeds the arrival
stream (candidate gaps, acceptance draws, station choice) and key 1+i the
session lengths of station i.  Replication ``r`` of an experiment with
base seed ``B`` uses the path seed returned by :func:`replication_seed`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .fluid import FluidSolution
from .model import ModelParams, PolicySpec


class SimulationBudgetError(RuntimeError):
    pass


class RootSolveError(ArithmeticError):
    pass


class ConsistencyError(ValueError):
    pass


DEFAULT_MAX_EVENTS = 10 ** 8


@dataclass(frozen=True)
class SessionEvent:
    station: int
    start: float
    duration: float


def replication_seed(base_seed: int, index: int) -> int:
    """64-bit path seed of replication ``index`` under ``base_seed``."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _streams(seed: int, d: int):
    arr = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    dur = [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1 + i,)))
           for i in range(d)]
    return arr, dur


def session_cdf(r, p: ModelParams):
    """CDF of the scaled session length law nu_n."""
    r = np.maximum(np.asarray(r, dtype=float), 0.0)
    return -np.expm1(-(p.beta - 1.0) * np.log1p(p.n * p.theta * r))


def sample_session_length(u, p: ModelParams):
    """Inverse CDF of nu_n: ((1-u)^(-1/(beta-1)) - 1) / (n theta)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u >= 1):
        raise ValueError("uniform variate must lie in [0, 1)")
    return np.expm1(-np.log1p(-u) / (p.beta - 1.0)) / (p.n * p.theta)


@dataclass(eq=False)
class SamplePath:
    params: ModelParams
    policy: PolicySpec
    seed: int
    horizon: float
    times: np.ndarray        # breakpoints, sorted
    Y: np.ndarray            # (breakpoints, d) workloads at breakpoints
    N: np.ndarray            # (breakpoints, d) arrival counts (right-continuous)
    active: np.ndarray       # (breakpoints, d) active sessions after breakpoint
    Lam: np.ndarray          # cumulative intensity at breakpoints
    ev_station: np.ndarray
    ev_start: np.ndarray
    ev_duration: np.ndarray
    method: str = "thinning"
    _slope_scale: float = field(init=False, repr=False)

    def __post_init__(self):
        p = self.params
        self._slope_scale = float(p.n) ** (1.0 - p.alpha)

    @property
    def events(self) -> list[SessionEvent]:
        return [SessionEvent(int(s), float(a), float(b))
                for s, a, b in zip(self.ev_station, self.ev_start, self.ev_duration)]

    @property
    def n_events(self) -> int:
        return len(self.ev_start)

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon):
            raise ValueError(f"time outside [0, {self.horizon}]")
        idx = np.searchsorted(self.times, t, side="right") - 1
        return t, idx

    def evaluate(self, t):
        """(Ybar, Y, N) at time(s) t; Y and N have a trailing station axis."""
        t, idx = self._locate(t)
        dt = (t - self.times[idx])[..., None]
        Y = self.Y[idx] + self.active[idx] * self._slope_scale * dt
        return Y.mean(axis=-1), Y, self.N[idx]

    def Lam_at(self, t):
        """Exact cumulative intensity int_0^t f(s, Ybar(s)) ds."""
        t, idx = self._locate(t)
        p, g = self.params, self.policy
        ybar0 = self.Y[idx].mean(axis=-1)
        slope = self.active[idx].sum(axis=-1) * self._slope_scale / p.d
        x0 = ybar0 - p.b * self.times[idx]
        dt = t - self.times[idx]
        seg = np.vectorize(K.seg_int, otypes=[float])(x0, slope - p.b, dt, g.c1, g.c2)
        return self.Lam[idx] + seg

    def sup_error(self, fluid: FluidSolution) -> float:
        """sup over [0, horizon] of |Ybar_n - U| on breakpoints plus the fluid grid."""
        grid = fluid.t[fluid.t <= self.horizon]
        ts = np.union1d(self.times, grid)
        ybar, _, _ = self.evaluate(ts)
        return float(np.max(np.abs(ybar - fluid.U_at(ts))))

    def slopes_ok(self) -> bool:
        """Workload is continuous, nondecreasing, with slope active/n^(alpha-1)."""
        dY = np.diff(self.Y, axis=0)
        dt = np.diff(self.times)[:, None]
        expect = self.active[:-1] * self._slope_scale * dt
        scale = np.maximum(np.abs(self.Y[1:]), 1.0)
        return bool(np.all(dY >= -1e-12 * scale)
                    and np.allclose(dY, expect, rtol=1e-9, atol=1e-12 * scale.max())
                    and np.all(np.diff(self.N, axis=0) >= 0))

    def write_events_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("station,start,duration\n")
            for s, a, b in zip(self.ev_station, self.ev_start, self.ev_duration):
                fh.write(f"{int(s) + 1},{a:.12f},{b:.12f}\n")


def _simulate(kernel, method, p: ModelParams, g: PolicySpec, horizon: float, seed: int,
              max_events: int):
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if g.baseline:
        raise ValueError("the zero policy is not simulated; it is a limit-process baseline")
    rate = float(p.n) ** p.alpha
    inv_scale = float(p.n) ** (1.0 - p.alpha)
    f_max = math.exp(-g.g(-p.b * horizon))
    expect = p.d * rate * horizon * min(f_max, max(1.0, p.a / p.b) * 1.5)
    cap = int(1.3 * expect + 10.0 * math.sqrt(expect) + 64)
    n_arr = 3 * cap + 64
    n_dur = cap // p.d + 64
    seed = int(seed)
    while True:
        arr_rng, dur_rngs = _streams(seed, p.d)
        arr_u = arr_rng.random(n_arr)
        dur_u = np.stack([r.random(n_dur) for r in dur_rngs])
        out = kernel(rate, inv_scale, p.d, p.b, g.c1, g.c2, p.beta, p.n * p.theta,
                     float(horizon), arr_u, dur_u, cap, max_events)
        status = out[0]
        if status == K.OK:
            break
        if status == K.BUDGET:
            raise SimulationBudgetError(f"event budget {max_events} exceeded")
        if status == K.ROOT_FAIL:
            raise RootSolveError("time-change inversion did not converge")
        if status == K.NEED_ARRIVAL_U:
            n_arr *= 2
        elif status == K.NEED_DURATION_U:
            n_dur *= 2
        else:
            cap *= 2
            n_arr = max(n_arr, 3 * cap)
    _, nb, bt, bY, bN, bK, bL, ne, es, e0, ed = out
    return SamplePath(p, g, seed, float(horizon), bt[:nb].copy(), bY[:nb].copy(),
                      bN[:nb].copy(), bK[:nb].copy(), bL[:nb].copy(),
                      es[:ne].copy(), e0[:ne].copy(), ed[:ne].copy(), method)


def simulate_scaled_path(p: ModelParams, g: PolicySpec, horizon: float, seed: int,
                         max_events: int = DEFAULT_MAX_EVENTS) -> SamplePath:
    """Exact realization of the scaled system by thinning.

    On a lookahead window [t, t + delta] that contains no session end the
    average workload is linear and nondecreasing, so n^alpha exp(-g(Ybar(t) -
    b (t + delta))) dominates the per-station intensity there.
    """
    return _simulate(K.simulate_thinning, "thinning", p, g, horizon, seed, max_events)


def simulate_scaled_path_inversion(p: ModelParams, g: PolicySpec, horizon: float, seed: int,
                                   max_events: int = DEFAULT_MAX_EVENTS) -> SamplePath:
    """Exact realization built in operational time.

    Arrivals form a rate n^alpha Poisson stream per station in Lambda-time;
    each is mapped to clock time by solving Lambda_n(t) = s on the current
    inter-breakpoint segment.
    """
    return _simulate(K.simulate_inversion, "inversion", p, g, horizon, seed, max_events)


def evaluate_path(path: SamplePath, t):
    return path.evaluate(t)


def fluctuation_path(path: SamplePath, fluid: FluidSolution, grid):
    """n^((alpha+beta-3)/2) (Ybar_n - U - V / n^(beta-2)) on ``grid``."""
    check_same_model(path.params, path.policy, fluid)
    ybar, _, _ = path.evaluate(grid)
    return fluctuation_from_ybar(ybar, path.params, fluid, grid)


def fluctuation_from_ybar(ybar, p: ModelParams, fluid: FluidSolution, grid):
    n = float(p.n)
    centred = ybar - fluid.U_at(grid) - fluid.V_at(grid) / n ** (p.beta - 2.0)
    return n ** ((p.alpha + p.beta - 3.0) / 2.0) * centred


def check_same_model(p: ModelParams, g: PolicySpec, fluid: FluidSolution):
    fp = fluid.params
    same = (fp.beta, fp.theta, fp.alpha, fp.b, fp.d) == (p.beta, p.theta, p.alpha, p.b, p.d)
    if not same or fluid.policy != g:
        raise ConsistencyError("path and fluid solution were built from different models")
