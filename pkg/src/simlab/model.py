"""Model parameters, admission-control policies and the arrival intensity."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ParamError(ValueError):
    """A model parameter violates one of the standing assumptions.

    ``field`` names the offending parameter and ``code`` is a short
    machine-readable tag for the violated bound.
    """

    def __init__(self, field: str, code: str, message: str):
        super().__init__(message)
        self.field = field
        self.code = code


def alpha_window(beta: float) -> tuple[float, float]:
    """Open interval of admissible rate exponents for tail index ``beta``."""
    if not 2.0 < beta < 3.0:
        raise ParamError("beta", "beta_range", f"beta out of (2,3): {beta}")
    return beta - 1.0, min(3.0 * beta - 5.0, 5.0 - beta)


@dataclass(frozen=True)
class ModelParams:
    beta: float
    theta: float
    alpha: float
    b: float
    d: int = 1
    n: int = 1

    def __post_init__(self):
        validate_params(self)

    @property
    def a(self) -> float:
        """Mean session length times arrival scale, 1/(theta (beta-2))."""
        return 1.0 / (self.theta * (self.beta - 2.0))

    @property
    def balanced(self) -> bool:
        """True when the target drain rate equals ``a`` (to round-off)."""
        return math.isclose(self.b, self.a, rel_tol=1e-12, abs_tol=0.0)

    def with_n(self, n: int) -> "ModelParams":
        return ModelParams(self.beta, self.theta, self.alpha, self.b, self.d, n)

    def with_d(self, d: int) -> "ModelParams":
        return ModelParams(self.beta, self.theta, self.alpha, self.b, d, self.n)


def validate_params(p: ModelParams) -> ModelParams:
    if not 2.0 < p.beta < 3.0:
        raise ParamError("beta", "beta_range", f"beta out of (2,3): {p.beta}")
    if not p.theta > 0:
        raise ParamError("theta", "theta_positive", f"theta must be > 0: {p.theta}")
    if not p.b > 0:
        raise ParamError("b", "b_positive", f"b must be > 0: {p.b}")
    for name in ("d", "n"):
        v = getattr(p, name)
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise ParamError(name, f"{name}_integer", f"{name} must be an integer: {v!r}")
        if v < 1:
            raise ParamError(name, f"{name}_positive", f"{name} must be >= 1: {v}")
    lo, hi = alpha_window(p.beta)
    if not p.alpha > lo:
        raise ParamError("alpha", "alpha_low",
                         f"alpha below beta-1: alpha={p.alpha}, beta-1={lo}")
    if not p.alpha < hi:
        raise ParamError("alpha", "alpha_high",
                         f"alpha above min(3beta-5, 5-beta): alpha={p.alpha}, bound={hi}")
    return p


LINEAR = "linear"
LINEAR_TANH = "linear_tanh"
ZERO = "zero"


@dataclass(frozen=True)
class PolicySpec:
    """Admission-control policy g(x) = c1 x + c2 tanh(x).

    ``linear`` has c2 = 0.  ``zero`` is the no-control baseline g = 0; it
    does not satisfy the policy assumptions and is only accepted by the
    limit-process diagnostics.
    """

    kind: str
    c1: float = 1.0
    c2: float = 0.0

    def __post_init__(self):
        if self.kind == ZERO:
            if self.c1 != 0.0 or self.c2 != 0.0:
                raise ParamError("policy", "zero_coeffs", "zero policy takes no coefficients")
            return
        if self.kind not in (LINEAR, LINEAR_TANH):
            raise ParamError("policy", "policy_kind", f"unknown policy kind {self.kind!r}")
        if not self.c1 > 0:
            raise ParamError("policy", "c1_positive", f"c1 must be > 0: {self.c1}")
        if self.kind == LINEAR and self.c2 != 0.0:
            raise ParamError("policy", "linear_c2", "linear policy has c2 = 0")
        if not self.c2 >= 0:
            raise ParamError("policy", "c2_nonnegative", f"c2 must be >= 0: {self.c2}")

    @classmethod
    def linear(cls, c: float = 1.0) -> "PolicySpec":
        return cls(LINEAR, c, 0.0)

    @classmethod
    def linear_tanh(cls, c1: float, c2: float) -> "PolicySpec":
        return cls(LINEAR_TANH, c1, c2)

    @classmethod
    def zero(cls) -> "PolicySpec":
        return cls(ZERO, 0.0, 0.0)

    @property
    def baseline(self) -> bool:
        return self.kind == ZERO

    @property
    def ell(self) -> float:
        """Certified lower bound on g'."""
        return self.c1

    @property
    def L(self) -> float:
        """Certified upper bound on g' and |g''|.

        g' = c1 + c2 sech^2 <= c1 + c2 and |g''| = 2 c2 sech^2 |tanh| <= 0.77 c2.
        """
        return self.c1 + self.c2

    def g(self, x):
        return self.c1 * x + self.c2 * np.tanh(x)

    def dg(self, x):
        return self.c1 + self.c2 / np.cosh(x) ** 2

    def d2g(self, x):
        return -2.0 * self.c2 * np.tanh(x) / np.cosh(x) ** 2


def policy_eval(g: PolicySpec, x):
    """Return (g(x), g'(x), g''(x))."""
    return g.g(x), g.dg(x), g.d2g(x)


def intensity_eval(p: ModelParams, g: PolicySpec, t, y):
    """Per-station arrival intensity f(t, y) = exp(-g(y - b t)) and df/dy."""
    x = y - p.b * t
    f = np.exp(-g.g(x))
    return f, -f * g.dg(x)
