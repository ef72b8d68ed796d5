"""Estimators and tests used by the experiment harness."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

MIN_SAMPLES = 2
MIN_SLOPE_POINTS = 3
KINDS = ("mean", "variance", "covariance", "ks-one-sample", "ks-two-sample", "slope-fit")


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class StatResult:
    kind: str
    estimate: float
    se: float = float("nan")
    pvalue: float = float("nan")
    n: int = 0


def _variance_se(x: np.ndarray) -> float:
    n = len(x)
    c = x - x.mean()
    m2 = np.mean(c ** 2)
    m4 = np.mean(c ** 4)
    s2 = m2 * n / (n - 1)
    return float(np.sqrt(max(m4 - s2 ** 2 * (n - 3) / (n - 1), 0.0) / n))


def summarize_stats(samples, kind: str, *, cdf=None, other=None) -> StatResult:
    """Estimate plus standard error (or KS p-value) for one statistic.

    ``samples`` is 1-D except for ``covariance`` (two columns) and
    ``slope-fit`` (columns x, y; the fit is of log y on log x).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown statistic kind {kind!r}")
    x = np.asarray(samples, dtype=float)
    n = len(x)
    need = MIN_SLOPE_POINTS if kind == "slope-fit" else MIN_SAMPLES
    if n < need:
        raise InsufficientSamplesError(f"{kind} needs at least {need} samples, got {n}")
    if kind == "mean":
        return StatResult(kind, float(x.mean()), float(x.std(ddof=1) / np.sqrt(n)), n=n)
    if kind == "variance":
        return StatResult(kind, float(x.var(ddof=1)), _variance_se(x), n=n)
    if kind == "covariance":
        a, b = x[:, 0], x[:, 1]
        prod = (a - a.mean()) * (b - b.mean())
        est = float(prod.sum() / (n - 1))
        return StatResult(kind, est, float(prod.std(ddof=1) / np.sqrt(n)), n=n)
    if kind == "ks-one-sample":
        if cdf is None:
            raise ValueError("ks-one-sample needs a cdf")
        res = sps.kstest(x, cdf)
        return StatResult(kind, float(res.statistic), pvalue=float(res.pvalue), n=n)
    if kind == "ks-two-sample":
        if other is None:
            raise ValueError("ks-two-sample needs a second sample")
        y = np.asarray(other, dtype=float)
        if len(y) < MIN_SAMPLES:
            raise InsufficientSamplesError("second sample too small")
        res = sps.ks_2samp(x, y)
        return StatResult(kind, float(res.statistic), pvalue=float(res.pvalue), n=n)
    lx, ly = np.log(x[:, 0]), np.log(x[:, 1])
    fit = sps.linregress(lx, ly)
    se = float(fit.stderr) if n > 2 else float("nan")
    return StatResult(kind, float(fit.slope), se, n=n)


def cov_matrix_with_se(X):
    """Sample covariance matrix of the columns of X and entrywise standard errors."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    C = X - X.mean(axis=0)
    prod = C[:, :, None] * C[:, None, :]
    est = prod.sum(axis=0) / (n - 1)
    se = prod.std(axis=0, ddof=1) / np.sqrt(n)
    return est, se
