"""Fractional Brownian motion and the stationary fractional OU limit.

Everything past ``sample_fbm`` assumes the balanced configuration b = a,
where f(t, U(t)) = 1 and the averaged limit is driven with constant rate
kappa = a g'(0).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .gaussian import cholesky_jitter
from .model import ModelParams, PolicySpec


class UnsupportedConfigError(ValueError):
    pass


class CirculantFallbackWarning(UserWarning):
    pass


_TAIL_EPS = 1e-12
_Q = dict(epsabs=0.0, epsrel=1e-11, limit=400)


@dataclass(frozen=True)
class FouConstants:
    kappa: float
    H: float
    sigma: float
    sigma0sq: float          # from the 2-D quadrature
    sigma0sq_closed: float   # theta^(1-beta) Gamma(3-beta) / (d (beta-2) kappa^(4-beta))

    def as_text(self) -> str:
        rows = [("kappa", self.kappa), ("H", self.H), ("sigma", self.sigma),
                ("sigma_sq", self.sigma ** 2), ("sigma0sq", self.sigma0sq),
                ("sigma0sq_closed", self.sigma0sq_closed)]
        return "".join(f"{k}={v:.12f}\n" for k, v in rows)


def fbm_cov(s, t, H: float):
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst index must lie in (0,1): {H}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("negative time")
    return 0.5 * (t ** (2 * H) + s ** (2 * H) - np.abs(t - s) ** (2 * H))


def fbm_cov_matrix(grid, H: float):
    grid = np.asarray(grid, dtype=float)
    return fbm_cov(grid[:, None], grid[None, :], H)


def fgn_autocov(n: int, H: float, h: float = 1.0):
    k = np.arange(n, dtype=float)
    g = 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    return h ** (2 * H) * g


def circulant_eigenvalues(n: int, H: float, h: float = 1.0):
    """Spectrum of the minimal circulant embedding of n fGn increments."""
    r = fgn_autocov(n + 1, H, h)
    row = np.concatenate([r, r[-2:0:-1]])
    return np.fft.fft(row).real


@dataclass(frozen=True)
class FbmEnsemble:
    grid: np.ndarray
    paths: np.ndarray       # (M, len(grid)); column 0 is the origin
    method: str             # method actually used
    fallback: bool = False


def _uniform(grid):
    d = np.diff(grid)
    return grid[0] == 0.0 and np.allclose(d, d[0], rtol=1e-9, atol=0.0)


def sample_fbm(grid, H: float, M: int, seed: int, method: str = "circulant") -> FbmEnsemble:
    """Exact fBm paths on ``grid`` (which must start at 0)."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst index must lie in (0,1): {H}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = len(grid) - 1
    fallback = False
    if method == "circulant":
        if not _uniform(grid):
            raise ValueError("circulant method needs a uniform grid")
        lam = circulant_eigenvalues(n, H, grid[1] - grid[0])
        if lam.min() < -1e-10 * lam.max():
            warnings.warn("negative circulant eigenvalue; using Cholesky", CirculantFallbackWarning)
            method, fallback = "cholesky", True
        else:
            m = len(lam)
            scale = np.sqrt(np.maximum(lam, 0.0) / m)
            pairs = (M + 1) // 2
            w = scale * (rng.standard_normal((pairs, m)) + 1j * rng.standard_normal((pairs, m)))
            x = np.fft.fft(w, axis=1)[:, :n]
            incr = np.concatenate([x.real, x.imag])[:M]
            paths = np.zeros((M, n + 1))
            paths[:, 1:] = np.cumsum(incr, axis=1)
            return FbmEnsemble(grid, paths, "circulant", False)
    if method != "cholesky":
        raise ValueError(f"unknown method {method!r}")
    L, _ = cholesky_jitter(fbm_cov_matrix(grid[1:], H))
    paths = np.zeros((M, n + 1))
    paths[:, 1:] = rng.standard_normal((M, n)) @ L.T
    return FbmEnsemble(grid, paths, "cholesky", fallback)


def _require_balanced(p: ModelParams, g: PolicySpec):
    if g.baseline or not p.balanced:
        raise UnsupportedConfigError("fractional OU limit needs b = a and a non-zero policy")


def _truncation(kappa: float) -> float:
    return -math.log(_TAIL_EPS) / kappa


def _sigma0sq_quadrature(p: ModelParams, kappa: float) -> float:
    """(theta^(1-beta)/(d(beta-2))) int int exp(-kappa(u+v)) |u-v|^(2-beta) over the quadrant."""
    gam = 2.0 - p.beta
    top = _truncation(kappa)

    def inner(u):
        # int_0^u exp(-kappa v) (u - v)^gam dv, endpoint weight at v = u
        if u <= 0:
            return 0.0
        val, _ = quad(lambda v: math.exp(-kappa * v), 0.0, u, weight="alg", wvar=(0.0, gam), **_Q)
        return val

    body, _ = quad(lambda u: math.exp(-kappa * u) * inner(u), 0.0, top, **_Q)
    # for u > top the inner integral is below Gamma(1+gam)-free bound u^gam/kappa
    tail = top ** gam * math.exp(-kappa * top) / kappa ** 2
    return p.theta ** (1.0 - p.beta) * 2.0 * (body + tail) / (p.d * (p.beta - 2.0))


def fou_constants(p: ModelParams, g: PolicySpec) -> FouConstants:
    _require_balanced(p, g)
    kappa = p.a * float(g.dg(0.0))
    H = (4.0 - p.beta) / 2.0
    tf = p.theta ** (1.0 - p.beta)
    sigma = math.sqrt(2.0 * tf / (p.d * (p.beta - 2.0) * (3.0 - p.beta) * (4.0 - p.beta)))
    closed = tf * math.gamma(3.0 - p.beta) / (p.d * (p.beta - 2.0) * kappa ** (4.0 - p.beta))
    return FouConstants(kappa, H, sigma, _sigma0sq_quadrature(p, kappa), closed)


def stationary_variance_identity(c: FouConstants) -> float:
    """sigma^2 H Gamma(2H) kappa^(-2H), the classical fOU stationary variance."""
    return c.sigma ** 2 * c.H * math.gamma(2 * c.H) * c.kappa ** (-2 * c.H)


def _cross_limit(t: float, kappa: float, beta: float) -> float:
    """int_0^inf exp(-kappa v) [(t+v)^(3-beta) - v^(3-beta)] dv (u integrated out)."""
    top = _truncation(kappa)
    q = 3.0 - beta
    body, _ = quad(lambda v: math.exp(-kappa * v) * ((t + v) ** q - v ** q), 0.0, top, **_Q)
    # the bracket is at most t * q * v^(q-1) <= t * q * top^(q-1) beyond top
    tail = t * q * top ** (q - 1.0) * math.exp(-kappa * top) / kappa
    return body + tail


def cross_cov_BH_Z0(t: float, c: FouConstants, p: ModelParams, g: PolicySpec) -> float:
    """cov(B_H(t), Z_inf(0)).

    The u-integral of (u+v)^(2-beta) over [0,t] is done in closed form,
    leaving one truncated integral over v.
    """
    _require_balanced(p, g)
    if t < 0:
        raise ValueError("negative time")
    if t == 0:
        return 0.0
    pref = p.theta ** (1.0 - p.beta) / (c.sigma * p.d * (p.beta - 2.0) * (3.0 - p.beta))
    return pref * _cross_limit(t, c.kappa, p.beta)


def cross_cov_BH_Z0_2d(t: float, c: FouConstants, p: ModelParams, g: PolicySpec) -> float:
    """Same quantity by direct nested quadrature of the double integral."""
    _require_balanced(p, g)
    if t == 0:
        return 0.0
    top = _truncation(c.kappa)
    gam = 2.0 - p.beta

    def inner(u):
        # Gauss-Kronrod never samples u = 0, where the v-integrand is singular
        val, _ = quad(lambda v: math.exp(-c.kappa * v) * (u + v) ** gam, 0.0, top,
                      points=[min(u, top / 2)], **_Q)
        return val

    body, _ = quad(inner, 0.0, t, **_Q)
    return p.theta ** (1.0 - p.beta) * body / (c.sigma * p.d * (p.beta - 2.0))


def fou_joint_cov(grid, c: FouConstants, p: ModelParams, g: PolicySpec):
    """Covariance of (Z_inf(0), B_H(t_1), ..., B_H(t_N)) for grid points t_k > 0."""
    ts = np.asarray(grid, dtype=float)[1:]
    n = len(ts)
    C = np.empty((n + 1, n + 1))
    C[0, 0] = c.sigma0sq
    cross = np.array([cross_cov_BH_Z0(t, c, p, g) for t in ts])
    C[0, 1:] = cross
    C[1:, 0] = cross
    C[1:, 1:] = fbm_cov_matrix(ts, c.H)
    return C


def sample_fou(grid, c: FouConstants, p: ModelParams, g: PolicySpec, M: int, seed: int,
               return_fbm: bool = False):
    """(M, len(grid)) stationary fOU paths.

    Uses Z(t_{k+1}) = exp(-kappa D) Z(t_k) + sigma J_k with
    J_k = int exp(-kappa(t_{k+1}-s)) dB_H(s) after integration by parts and
    the trapezoid rule on the remaining Riemann integral.
    """
    _require_balanced(p, g)
    grid = np.asarray(grid, dtype=float)
    if not _uniform(grid):
        raise ValueError("sample_fou needs a uniform grid starting at 0")
    L, _ = cholesky_jitter(fou_joint_cov(grid, c, p, g))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    joint = rng.standard_normal((M, len(grid))) @ L.T
    Z0 = joint[:, 0]
    B = np.zeros((M, len(grid)))
    B[:, 1:] = joint[:, 1:]
    Z = _fou_recursion(Z0, B, grid[1] - grid[0], c.kappa, c.sigma)
    return (Z, B) if return_fbm else Z


def _fou_recursion(Z0, B, dt, kappa, sigma):
    e = math.exp(-kappa * dt)
    kh = 0.5 * kappa * dt
    Z = np.empty_like(B)
    Z[:, 0] = Z0
    for k in range(B.shape[1] - 1):
        J = (1.0 - kh) * B[:, k + 1] - e * (1.0 + kh) * B[:, k]
        Z[:, k + 1] = e * Z[:, k] + sigma * J
    return Z


def fou_residual(Z, B, dt, kappa, sigma):
    """max |Z(t) - Z(0) + kappa int_0^t Z - sigma B(t)| with the trapezoid rule."""
    integ = np.zeros_like(Z)
    integ[:, 1:] = np.cumsum(0.5 * dt * (Z[:, 1:] + Z[:, :-1]), axis=1)
    return float(np.max(np.abs(Z - Z[:, :1] + kappa * integ - sigma * B)))


@dataclass(frozen=True)
class LongRunDiag:
    T: float
    t: float
    zbar_var: float
    zbar_var_limit: float
    rbar_var: float
    rbar_var_limit: float
    cross: float
    cross_limit: float

    @property
    def gaps(self):
        return (abs(self.zbar_var - self.zbar_var_limit),
                abs(self.rbar_var - self.rbar_var_limit),
                abs(self.cross - self.cross_limit))

    @property
    def rel_gaps(self):
        lim = (self.zbar_var_limit, self.rbar_var_limit, self.cross_limit)
        return tuple(g / abs(l) for g, l in zip(self.gaps, lim))


def _zbar_var_finite(T: float, p: ModelParams, kappa: float) -> float:
    """E|Zbar(T)|^2 = h1(T) - h2(T) for the balanced configuration."""
    if T <= 0:
        return 0.0
    gam = 2.0 - p.beta
    pref = p.theta ** (1.0 - p.beta) / (p.d * (p.beta - 2.0))

    def inner(u):
        if u <= 0:
            return 0.0
        val, _ = quad(lambda v: math.exp(-kappa * v), 0.0, u, weight="alg", wvar=(0.0, gam), **_Q)
        return val

    h1, _ = quad(lambda u: math.exp(-kappa * u) * inner(u), 0.0, T, **_Q)
    h1 *= 2.0 * pref
    h2, _ = quad(lambda v: math.exp(-2 * kappa * (T - v)) - math.exp(-kappa * (2 * T - v)), 0.0, T,
                 weight="alg", wvar=(gam, 0.0), **_Q)
    h2 *= 2.0 * pref / kappa
    return h1 - h2


def longrun_diag(T: float, t: float, c: FouConstants, p: ModelParams, g: PolicySpec) -> LongRunDiag:
    """Finite-T second moments of (Zbar(T), Rbar(T+t) - Rbar(T)) and their limits."""
    _require_balanced(p, g)
    if T < 0 or t < 0:
        raise ValueError("negative time")
    beta, kappa = p.beta, c.kappa
    tf = p.theta ** (1.0 - beta)
    q = 3.0 - beta
    zvar = _zbar_var_finite(T, p, kappa)
    rlim = c.sigma ** 2 * t ** (4.0 - beta)
    if t > 0:
        corr, _ = quad(lambda v: (v - T) * v ** (2.0 - beta), T, T + t, **_Q) if T > 0 else \
            quad(lambda v: v ** (3.0 - beta), 0.0, t, **_Q)
        rvar = rlim - 2.0 * tf * corr / (p.d * (beta - 2.0))
    else:
        rvar = 0.0
    pref = tf / (p.d * (beta - 2.0) * q)
    if T > 0 and t > 0:
        shift = (T + t) ** q - T ** q
        body, _ = quad(lambda w: math.exp(-kappa * w) * ((w + t) ** q - w ** q - shift), 0.0, T, **_Q)
        cross = pref * body
    else:
        cross = 0.0
    cross_lim = pref * _cross_limit(t, kappa, beta) if t > 0 else 0.0
    return LongRunDiag(T, t, zvar, c.sigma0sq, rvar, rlim, cross, cross_lim)
