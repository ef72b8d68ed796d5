"""Deterministic limit objects: fluid path, time change and bias term.

All integration is done in the offset variable u = U - b t so that long
horizons do not lose precision in U - b t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .model import ModelParams, PolicySpec

DEFAULT_STEPS = 4096


def offset_root(p: ModelParams, g: PolicySpec) -> float:
    """Unique K with g(K) = log(a/b), the long-run gap U(t) - b t."""
    if g.baseline:
        raise ValueError("offset root is undefined for the zero policy")
    target = math.log(p.a / p.b)
    if target == 0.0:
        return 0.0
    lo, hi = -1.0, 1.0
    while g.g(lo) > target:
        lo *= 2.0
    while g.g(hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g.g(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    k = 0.5 * (lo + hi)
    assert abs(g.g(k) - target) <= 1e-12
    return k


def _offset_rhs(p: ModelParams, g: PolicySpec, u):
    return p.a * np.exp(-g.g(u)) - p.b


def solve_fluid(p: ModelParams, g: PolicySpec, horizon: float, steps: int = DEFAULT_STEPS):
    """Classical RK4 for u' = a exp(-g(u)) - b, u(0) = 0.

    Returns (t, U, u) on the uniform grid with ``steps`` cells.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    t = np.linspace(0.0, horizon, steps + 1)
    h = horizon / steps
    if g.baseline:
        u = (p.a - p.b) * t
        return t, u + p.b * t, u
    if p.balanced:
        u = np.zeros_like(t)
        return t, p.b * t, u
    u = np.empty_like(t)
    u[0] = 0.0
    x = 0.0
    for k in range(steps):
        k1 = _offset_rhs(p, g, x)
        k2 = _offset_rhs(p, g, x + 0.5 * h * k1)
        k3 = _offset_rhs(p, g, x + 0.5 * h * k2)
        k4 = _offset_rhs(p, g, x + h * k3)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        u[k + 1] = x
    return t, u + p.b * t, u


def time_change(t, fU, exact: bool = False):
    """Cumulative intensity and its inverse on the grid nodes.

    Lambda uses composite Simpson on fU; gamma[k] = Lambda^{-1}(t[k]) by
    bisection on the Hermite interpolant of Lambda (NaN past Lambda(T)).
    """
    if exact:
        return t.copy(), t.copy()
    lam = cumulative_simpson(fU, x=t, initial=0.0)
    spline = CubicHermiteSpline(t, lam, fU)
    gamma = np.full_like(t, np.nan)
    ok = t <= lam[-1]
    gamma[ok] = _invert_monotone(spline, t[ok], t[0], t[-1])
    return lam, gamma


def _invert_monotone(spline, s, lo, hi, tol=1e-12):
    s = np.asarray(s, dtype=float)
    a = np.full_like(s, lo)
    b = np.full_like(s, hi)
    while True:
        mid = 0.5 * (a + b)
        below = spline(mid) < s
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
        if np.all(b - a <= tol * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (a + b)


def _powint_weights(m, h, gam):
    """Product-integration weights of (r)^gam over cells at distance m.

    For the cell [(m-1)h, m h] in the distance variable r, returns the
    weights of the node farther from the evaluation point (``far``) and of
    the nearer node (``near``) for a linear interpolant.
    """
    m = np.asarray(m, dtype=float)
    p1 = (m ** (gam + 1) - (m - 1) ** (gam + 1)) / (gam + 1)
    p2 = (m ** (gam + 2) - (m - 1) ** (gam + 2)) / (gam + 2)
    scale = h ** (gam + 1)
    near = scale * (m * p1 - p2)
    far = scale * (p2 - (m - 1) * p1)
    return far, near


def singular_forcing(p: ModelParams, t, fU):
    """a theta^(2-beta) int_0^t fU(s) (t-s)^(2-beta) ds on a uniform grid.

    The kernel is integrated exactly against the linear interpolant of fU.
    """
    n = len(t) - 1
    h = t[1] - t[0]
    gam = 2.0 - p.beta
    m = np.arange(1, n + 1)
    # cell j -> node k sees distance index m = k - j; node j is the far end
    far, near = _powint_weights(m, h, gam)
    out = np.zeros(n + 1)
    # out[k] = sum_{j<k} near[k-j-1] fU[j+1] + far[k-j-1] fU[j]
    conv_far = np.convolve(fU[:-1], far)[: n]
    conv_near = np.convolve(fU[1:], near)[: n]
    out[1:] = conv_far + conv_near
    return p.a * p.theta ** (2.0 - p.beta) * out


def solve_V(p: ModelParams, t, fU, fyU):
    """Bias term of the law of large numbers.

    Solves V(t) = a int_0^t fyU V ds - a theta^(2-beta) int_0^t fU (t-s)^(2-beta) ds
    with the trapezoid rule on the regular part (implicit in V(t_k)) and exact
    product integration of the singular kernel.
    """
    h = t[1] - t[0]
    force = singular_forcing(p, t, fU)
    w = p.a * fyU
    V = np.zeros_like(t)
    acc = 0.0  # sum_{j=1}^{k-1} w_j V_j
    for k in range(1, len(t)):
        rhs = h * (0.5 * w[0] * V[0] + acc) - force[k]
        V[k] = rhs / (1.0 - 0.5 * h * w[k])
        acc += w[k] * V[k]
    return V


@dataclass(frozen=True, eq=False)
class FluidSolution:
    params: ModelParams
    policy: PolicySpec
    t: np.ndarray
    U: np.ndarray
    u: np.ndarray
    K: float
    Lam: np.ndarray
    gamma: np.ndarray
    V: np.ndarray
    fU: np.ndarray
    fyU: np.ndarray
    mu: float
    K1: float
    c: np.ndarray  # -a int_0^t f_y(z, U(z)) dz, so phi = exp(c)

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    @property
    def phi(self):
        return np.exp(self.c)

    @property
    def phitilde(self):
        return np.exp(-self.c)

    def _spline(self, name):
        cache = self.__dict__.setdefault("_splines", {})
        if name not in cache:
            p, g = self.params, self.policy
            if name == "u":
                cache[name] = CubicHermiteSpline(self.t, self.u, _offset_rhs(p, g, self.u))
            elif name == "Lam":
                cache[name] = CubicHermiteSpline(self.t, self.Lam, self.fU)
            elif name == "c":
                cache[name] = CubicHermiteSpline(self.t, self.c, -p.a * self.fyU)
        return cache[name]

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.horizon * (1 + 1e-12)):
            raise ValueError(f"time outside [0, {self.horizon}]")
        return s

    def u_at(self, s):
        s = self._check(s)
        if self.policy.baseline:
            return (self.params.a - self.params.b) * s
        if self.params.balanced:
            return np.zeros_like(s)
        return self._spline("u")(s)

    def U_at(self, s):
        return self.u_at(s) + self.params.b * np.asarray(s, dtype=float)

    def fU_at(self, s):
        return np.exp(-self.policy.g(self.u_at(s)))

    def fyU_at(self, s):
        x = self.u_at(s)
        return -np.exp(-self.policy.g(x)) * self.policy.dg(x)

    def c_at(self, s):
        s = self._check(s)
        if self.params.balanced or self.policy.baseline:
            return -self.params.a * float(self.fyU[0]) * s
        return self._spline("c")(s)

    def Lam_at(self, s):
        s = self._check(s)
        if self.params.balanced or self.policy.baseline:
            return s.copy() if s.ndim else s
        return self._spline("Lam")(s)

    def gamma_at(self, s):
        """Inverse time change at arbitrary operational times."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.Lam[-1] * (1 + 1e-12)):
            raise ValueError("operational time outside [0, Lambda(T)]")
        if self.params.balanced or self.policy.baseline:
            return s.copy() if s.ndim else s
        return _invert_monotone(self._spline("Lam"), np.atleast_1d(s), 0.0, self.horizon).reshape(s.shape)

    def V_at(self, s):
        s = self._check(s)
        return np.interp(s, self.t, self.V)

    def to_rows(self):
        cols = (self.t, self.U, self.u, self.Lam, self.gamma, self.V, self.fU, self.fyU)
        return ["t", "U", "u", "Lambda", "gamma", "V", "fU", "fyU"], np.column_stack(cols)


def compute_fluid(p: ModelParams, g: PolicySpec, horizon: float,
                  steps: int = DEFAULT_STEPS) -> FluidSolution:
    t, U, u = solve_fluid(p, g, horizon, steps)
    exact = p.balanced or g.baseline
    if g.baseline:
        fU = np.ones_like(t)
        fyU = np.zeros_like(t)
        K = math.nan
    else:
        fU = np.exp(-g.g(u))
        fyU = -fU * g.dg(u)
        K = offset_root(p, g)
    if p.balanced and not g.baseline:
        fU = np.ones_like(t)
        fyU = np.full_like(t, -float(g.dg(0.0)))
    Lam, gamma = time_change(t, fU, exact=exact)
    V = solve_V(p, t, fU, fyU)
    if exact:
        c = -p.a * fyU[0] * t
    else:
        c = cumulative_simpson(-p.a * fyU, x=t, initial=0.0)
    if g.baseline:
        mu, K1 = 0.0, 1.0
    else:
        # u moves monotonically from 0 towards K, so the infimum over all
        # t >= 0 is attained on the grid or in the limit u -> K
        negfy = np.append(-fyU, math.exp(-g.g(K)) * g.dg(K))
        f_all = np.append(fU, math.exp(-g.g(K)))
        mu, K1 = float(negfy.min()), float(f_all.max())
    return FluidSolution(p, g, t, U, u, K, Lam, gamma, V, fU, fyU, mu, K1, c)
