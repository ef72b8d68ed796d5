"""Gaussian limit of the fluctuation process.

The driver R_i of station i is a centred Gaussian process with

    cov(R_i(s), R_i(t)) = theta^(1-beta) int_0^s e(z) k(s-z, t-z) dz,   s <= t,

where e(z) = f(z, U(z)) and k(w, v) = 2 w^(3-beta)/(3-beta)
+ w (w^(2-beta) - v^(2-beta))/(beta-2) is the closed form of the double
integral of (u v v - z)^(1-beta) over [z,s] x [z,t].  The average Rbar has
1/d times that covariance.  The averaged limit solves

    Zbar(t) = Rbar(t) + a int_0^t f_y(s, U(s)) Zbar(s) ds,

so Zbar(t) = exp(-c(t)) int_0^t exp(c(s)) dRbar(s) with c(t) = -a int_0^t f_y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import CubicHermiteSpline

from .fluid import FluidSolution, _powint_weights, compute_fluid
from .model import ModelParams, PolicySpec


class FactorizationError(np.linalg.LinAlgError):
    pass


class GridMismatchError(ValueError):
    pass


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_QUAD = dict(epsabs=0.0, epsrel=1e-10, limit=400)


def _check_times(*ts):
    for t in ts:
        if t < 0:
            raise ValueError(f"negative time {t}")


def _emission(fluid: FluidSolution):
    """z -> f(z, U(z)) as a cheap scalar callable."""
    if fluid.params.balanced or fluid.policy.baseline:
        return lambda z: 1.0
    return lambda z: float(fluid.fU_at(z))


# ---------------------------------------------------------------- driver R

def _reduced_kernel(w, v, beta):
    return (2.0 / (3.0 - beta)) * w ** (3.0 - beta) + w * (w ** (2.0 - beta) - v ** (2.0 - beta)) / (beta - 2.0)


def cov_R(s: float, t: float, fluid: FluidSolution) -> float:
    """Station-level covariance of the limit driver by 1-D adaptive quadrature."""
    _check_times(s, t)
    lo, hi = min(s, t), max(s, t)
    if lo == 0.0:
        return 0.0
    p = fluid.params
    e = _emission(fluid)
    val, _ = quad(lambda z: e(z) * _reduced_kernel(lo - z, hi - z, p.beta), 0.0, lo, **_QUAD)
    return p.theta ** (1.0 - p.beta) * val


def cov_R_triple(s: float, t: float, fluid: FluidSolution, epsrel: float = 1e-8) -> float:
    """Brute-force nested quadrature of the triple-integral covariance.

    theta^(1-beta) int_0^s int_0^t int_0^(u ^ v) e(z) (u v v - z)^(1-beta) dz du dv,
    reordered with z outermost; the two inner integrals are numeric.  The u
    integral runs in log(u - z) and the v integral divides out the
    (v - z)^(2-beta) endpoint factor through an algebraic-weight rule.
    """
    _check_times(s, t)
    if min(s, t) == 0.0:
        return 0.0
    p = fluid.params
    e = _emission(fluid)
    ex = 1.0 - p.beta
    opts = dict(epsabs=0.0, epsrel=epsrel, limit=200)

    def inner_u_scaled(r, z):
        # r = v - z; (v - z)^(beta-2) int_z^t (max(u, v) - z)^(1-beta) du,
        # flat below v and a power law above it
        w = t - z
        r = max(r, 1e-280)
        flat = min(r, w) / r
        if r >= w:
            return flat
        tail, _ = quad(lambda y: math.exp((2.0 - p.beta) * y), math.log(r), math.log(w), **opts)
        return flat + tail * r ** (p.beta - 2.0)

    def over_v(z):
        if s <= z:
            return 0.0
        val, _ = quad(inner_u_scaled, 0.0, s - z, args=(z,), weight="alg", wvar=(2.0 - p.beta, 0.0), **opts)
        return e(z) * val

    val, _ = quad(over_v, 0.0, min(s, t), **opts)
    return p.theta ** (1.0 - p.beta) * val


def cov_R_star(s: float, t: float, fluid: FluidSolution) -> float:
    """Covariance of the alternative representation with kernel f^(1/2) (r ^ (t - z)).

    theta^(1-beta) (beta-1) int_0^(s^t) f(z) int_0^inf [r ^ (s-z)][r ^ (t-z)] r^(-beta) dr dz.
    """
    _check_times(s, t)
    lo, hi = min(s, t), max(s, t)
    if lo == 0.0:
        return 0.0
    p = fluid.params
    e = _emission(fluid)
    beta = p.beta

    def inner(z):
        w, v = lo - z, hi - z
        # r < w: r^(2-beta); w < r < v: w r^(1-beta); r > v: w v r^(-beta)
        a1, _ = quad(lambda r: r ** (2.0 - beta), 0.0, w, **_QUAD) if w > 0 else (0.0, 0.0)
        a2, _ = quad(lambda r: w * r ** (1.0 - beta), w, v, **_QUAD) if v > w else (0.0, 0.0)
        a3, _ = quad(lambda r: w * v * r ** (-beta), v, np.inf, **_QUAD)
        return e(z) * (a1 + a2 + a3)

    val, _ = quad(inner, 0.0, lo, **_QUAD)
    return p.theta ** (1.0 - beta) * (beta - 1.0) * val


def _cov_R_closed(grid, p: ModelParams):
    """Station-level covariance matrix when f(z, U(z)) = 1."""
    beta = p.beta
    s = np.minimum.outer(grid, grid)
    t = np.maximum.outer(grid, grid)
    c = t - s
    q3, q4 = 3.0 - beta, 4.0 - beta
    val = (2.0 / (q3 * q4) + 1.0 / ((beta - 2.0) * q4)) * s ** q4
    val -= ((t ** q4 - c ** q4) / q4 - c * (t ** q3 - c ** q3) / q3) / (beta - 2.0)
    return p.theta ** (1.0 - beta) * val


def _power_moments(grid, e, gam):
    """M[k, i] = int_0^{t_i} e(z) (t_k - z)^gam dz for k >= i (linear e)."""
    n = len(grid) - 1
    h = grid[1] - grid[0]
    m = np.arange(1, n + 1)
    far, near = _powint_weights(m, h, gam)
    k, j = np.indices((n + 1, n))
    dist = k - j
    ok = dist >= 1
    idx = np.where(ok, dist - 1, 0)
    cell = np.where(ok, far[idx] * e[j] + near[idx] * e[j + 1], 0.0)
    out = np.zeros((n + 1, n + 1))
    out[:, 1:] = np.cumsum(cell, axis=1)
    return out


def cov_R_matrix(grid, fluid: FluidSolution):
    """Station-level covariance of R on a uniform grid starting at 0.

    Closed form when f(., U) is constant; otherwise the kernel is split as
    A w^(3-beta) - v^(3-beta)/(beta-2) + (t-s) v^(2-beta)/(beta-2) and each
    power is integrated exactly against the linear interpolant of f(., U).
    """
    grid = np.asarray(grid, dtype=float)
    p = fluid.params
    if grid[0] != 0.0 or not np.allclose(np.diff(grid), grid[1] - grid[0], rtol=1e-9, atol=0):
        raise GridMismatchError("covariance grid must be uniform and start at 0")
    if p.balanced or fluid.policy.baseline:
        return _cov_R_closed(grid, p)
    beta = p.beta
    e = fluid.fU_at(grid)
    m3 = _power_moments(grid, e, 3.0 - beta)
    m2 = _power_moments(grid, e, 2.0 - beta)
    A = 2.0 / (3.0 - beta) + 1.0 / (beta - 2.0)
    diag = np.diag(m3)
    n = len(grid)
    i = np.arange(n)
    lo = np.minimum.outer(i, i)
    hi = np.maximum.outer(i, i)
    gap = grid[hi] - grid[lo]
    val = A * diag[lo] - m3[hi, lo] / (beta - 2.0) + gap * m2[hi, lo] / (beta - 2.0)
    return p.theta ** (1.0 - beta) * val


def increment_second_moment(s: float, t: float, fluid: FluidSolution) -> float:
    """E|Rbar(t) - Rbar(s)|^2 from a cancellation-free 1-D form."""
    _check_times(s, t)
    s, t = min(s, t), max(s, t)
    if t == s:
        return 0.0
    p = fluid.params
    e = _emission(fluid)
    q3, q2 = 3.0 - p.beta, 2.0 - p.beta

    def before(z):
        A, B = s - z, t - z
        return e(z) * 2.0 * ((B ** q3 - A ** q3) / q3 - A * (B ** q2 - A ** q2) / q2)

    def inside(z):
        return e(z) * 2.0 * (t - z) ** q3 / q3

    v1 = quad(before, 0.0, s, **_QUAD)[0] if s > 0 else 0.0
    v2 = quad(inside, s, t, **_QUAD)[0]
    return p.theta ** (1.0 - p.beta) * (v1 + v2) / p.d


def increment_bound(s: float, t: float, fluid: FluidSolution) -> float:
    """Hoelder-type bound 2 K1 theta^(1-beta) |t-s|^(4-beta) / (d (beta-2)(3-beta)(4-beta))."""
    p = fluid.params
    c = 2.0 * fluid.K1 * p.theta ** (1.0 - p.beta) / (p.d * (p.beta - 2.0) * (3.0 - p.beta) * (4.0 - p.beta))
    return c * abs(t - s) ** (4.0 - p.beta)


def moment_bound(p: ModelParams, fluid: FluidSolution) -> tuple[float, float]:
    """Uniform-in-time bound on E|Zbar(t)|^2 and the contraction rate mu."""
    mu = fluid.mu
    if mu <= 0:
        return math.inf, mu
    num = 2.0 * p.theta ** (1.0 - p.beta) * math.gamma(4.0 - p.beta)
    den = p.d * (p.beta - 2.0) * (3.0 - p.beta) * (p.a * mu) ** (4.0 - p.beta)
    return num / den, mu


# ---------------------------------------------------------------- averaged limit

class _Integrator:
    """exp(c(y) - c(x)) integrals used by the second-moment formulas."""

    def __init__(self, fluid: FluidSolution):
        self.fluid = fluid
        p = fluid.params
        self.closed = p.balanced or fluid.policy.baseline
        self.kappa = -p.a * float(fluid.fyU[0]) if self.closed else None
        if not self.closed:
            c = fluid.c
            self.cmax = float(c[-1])
            w = np.exp(c - self.cmax)
            self.Phi = CubicHermiteSpline(fluid.t, cumulative_simpson(w, x=fluid.t, initial=0.0), w)
            self.rate = float(np.max(-p.a * fluid.fyU))

    def c(self, x):
        return float(self.fluid.c_at(x))

    def phi_hat(self, x, z):
        """int_z^x exp(c(y) - c(x)) dy."""
        r = x - z
        if r <= 0:
            return 0.0
        if self.closed:
            k = self.kappa
            return r if k == 0 else -math.expm1(-k * r) / k
        if r * self.rate > 0.5:
            return math.exp(self.cmax - self.c(x)) * float(self.Phi(x) - self.Phi(z))
        ys = z + 0.5 * r * (_GL_X + 1.0)
        vals = np.exp(self.fluid.c_at(ys) - self.c(x))
        return 0.5 * r * float(vals @ _GL_W)


@dataclass(eq=False)
class GaussianLimitKit:
    params: ModelParams
    policy: PolicySpec
    fluid: FluidSolution
    grid: np.ndarray
    covR: np.ndarray
    covRbar: np.ndarray
    c: np.ndarray
    cholRbar: np.ndarray
    jitter: float
    momentBound: float
    mu: float
    _integ: _Integrator = field(repr=False, default=None)

    @property
    def phi(self):
        return np.exp(self.c)

    @property
    def phitilde(self):
        return np.exp(-self.c)

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def rho(self, u: float, v: float) -> float:
        """Density of the Rbar covariance, d^2/du dv cov(Rbar(u), Rbar(v)), u != v."""
        if u == v:
            return math.inf
        lo, hi = min(u, v), max(u, v)
        p = self.params
        e = _emission(self.fluid)
        val, _ = quad(lambda z: e(z) * (hi - z) ** (1.0 - p.beta), 0.0, lo, **_QUAD)
        return p.theta ** (1.0 - p.beta) * val / p.d


def cholesky_jitter(C, start=1e-14, stop=1e-8):
    """Lower Cholesky factor with escalating relative diagonal jitter."""
    scale = float(np.max(np.diag(C))) if C.size else 1.0
    jit = 0.0
    while True:
        try:
            return np.linalg.cholesky(C + jit * scale * np.eye(len(C))), jit
        except np.linalg.LinAlgError:
            jit = start if jit == 0.0 else jit * 10.0
            if jit > stop * (1 + 1e-9):
                raise FactorizationError(f"covariance not factorizable with jitter up to {stop}")


def build_kit(p: ModelParams, g: PolicySpec, grid, fluid: FluidSolution | None = None,
              fluid_steps: int = 4096) -> GaussianLimitKit:
    grid = np.asarray(grid, dtype=float)
    if fluid is None:
        fluid = compute_fluid(p, g, float(grid[-1]), fluid_steps)
    elif fluid.horizon < grid[-1] * (1 - 1e-12):
        raise GridMismatchError("fluid horizon shorter than the kit grid")
    covR = cov_R_matrix(grid, fluid)
    covRbar = covR / p.d
    L, jit = cholesky_jitter(covRbar[1:, 1:])
    bound, mu = moment_bound(p, fluid)
    c = fluid.c_at(grid)
    return GaussianLimitKit(p, g, fluid, grid, covR, covRbar, c, L, jit, bound, mu,
                            _Integrator(fluid))


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed))


def sample_Rbar(kit: GaussianLimitKit, M: int, seed: int):
    """(M, len(grid)) Gaussian paths with covariance covRbar."""
    xi = _rng(seed).standard_normal((M, len(kit.grid) - 1))
    out = np.zeros((M, len(kit.grid)))
    out[:, 1:] = xi @ kit.cholRbar.T
    return out


def solve_limit_Zbar(Rbar, kit: GaussianLimitKit):
    """Left-point Young sum exp(-c(t_k)) sum_{j<k} exp(c(t_j)) dRbar_j."""
    Rbar = np.asarray(Rbar, dtype=float)
    if Rbar.shape[-1] != len(kit.grid):
        raise GridMismatchError("path length differs from the kit grid")
    decay = np.exp(-np.diff(kit.c))
    dR = np.diff(Rbar, axis=-1)
    Z = np.zeros_like(Rbar)
    for k in range(len(kit.grid) - 1):
        Z[..., k + 1] = decay[k] * (Z[..., k] + dR[..., k])
    return Z


def zbar_residual(Zbar, Rbar, kit: GaussianLimitKit):
    """max_t |Zbar - Rbar - a int_0^t f_y Zbar ds| with the trapezoid rule."""
    p = kit.params
    fy = kit.fluid.fyU_at(kit.grid) if not (p.balanced or kit.policy.baseline) else np.full(len(kit.grid), kit.fluid.fyU[0])
    integ = cumulative_trapezoid_last(p.a * fy * Zbar, kit.h)
    return float(np.max(np.abs(Zbar - Rbar - integ)))


def cumulative_trapezoid_last(y, h):
    out = np.zeros_like(y)
    out[..., 1:] = np.cumsum(0.5 * h * (y[..., 1:] + y[..., :-1]), axis=-1)
    return out


def sample_limit_Z(kit: GaussianLimitKit, d: int | None, M: int, seed: int):
    """(M, d, len(grid)) paths of the vector limit and the (M, len(grid)) average.

    Components are R_i + (Zbar - Rbar); Zbar - Rbar is the discrete drift
    a int f_y Zbar, so the component average reproduces Zbar exactly.
    """
    d = kit.params.d if d is None else d
    if d != kit.params.d:
        raise GridMismatchError(f"kit was built for d={kit.params.d}, got d={d}")
    xi = _rng(seed).standard_normal((M, d, len(kit.grid) - 1))
    R = np.zeros((M, d, len(kit.grid)))
    R[..., 1:] = math.sqrt(d) * (xi @ kit.cholRbar.T)
    Rbar = R.mean(axis=1)
    Zbar = solve_limit_Zbar(Rbar, kit)
    Z = R + (Zbar - Rbar)[:, None, :]
    return Z, Zbar


def _q_hat(x: float, kit: GaussianLimitKit) -> float:
    """(theta^(1-beta)/d) int_0^x e(z) (x-z)^(1-beta) phi_hat(x, z) dz."""
    if x <= 0:
        return 0.0
    p = kit.params
    e = _emission(kit.fluid)
    integ = kit._integ

    def smooth(z):
        r = x - z
        if r <= 1e-300:
            return e(z)
        return e(z) * integ.phi_hat(x, z) / r

    val, _ = quad(smooth, 0.0, x, weight="alg", wvar=(0.0, 2.0 - p.beta), epsabs=0.0, epsrel=1e-10, limit=400)
    return p.theta ** (1.0 - p.beta) * val / p.d


def cov_Zbar_diag(times, kit: GaussianLimitKit):
    """E|Zbar(t)|^2 at sorted nonnegative times by panel recursion.

    Var(t) = 2 int_0^t exp(2 (c(x) - c(t))) q(x) dx, accumulated panel by
    panel so that one sweep serves every requested time.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("negative time")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted")
    integ = kit._integ
    out = np.zeros_like(times)
    prev_t, prev_v = 0.0, 0.0
    for k, t in enumerate(times):
        if t > prev_t:
            ct = integ.c(t)
            panel, _ = quad(lambda x: math.exp(2.0 * (integ.c(x) - ct)) * _q_hat(x, kit),
                            prev_t, t, epsabs=0.0, epsrel=1e-9, limit=200)
            prev_v = math.exp(-2.0 * (ct - integ.c(prev_t))) * prev_v + 2.0 * panel
            prev_t = t
        out[k] = prev_v
    return out


def cov_Zbar(s: float, t: float, kit: GaussianLimitKit) -> float:
    """cov(Zbar(s), Zbar(t)) from the isometry, reduced to nested 1-D integrals."""
    _check_times(s, t)
    s, t = min(s, t), max(s, t)
    if s == 0.0:
        return 0.0
    var_s = float(cov_Zbar_diag([s], kit)[0])
    if t == s:
        return var_s
    p = kit.params
    e = _emission(kit.fluid)
    integ = kit._integ
    cs, ct = integ.c(s), integ.c(t)
    pref = p.theta ** (1.0 - p.beta) / p.d

    def cross(v):
        knee = s - 4.0 * (v - s)
        extra = {"points": [knee]} if 0.0 < knee < s else {}
        val, _ = quad(lambda z: e(z) * (v - z) ** (1.0 - p.beta) * integ.phi_hat(s, z),
                      0.0, s, epsabs=0.0, epsrel=1e-10, limit=400, **extra)
        return math.exp(integ.c(v) - ct) * pref * val

    tail, _ = quad(cross, s, t, epsabs=0.0, epsrel=1e-9, limit=200)
    return math.exp(cs - ct) * var_s + tail


def write_cov_csv(path, kit: GaussianLimitKit, which: str = "covRbar"):
    from .csvio import write_matrix
    write_matrix(path, kit.grid, getattr(kit, which))
