"""Finite-T gaps of the balanced limit to its stationary targets.

Prints the three relative gaps for T = m/kappa and the log-log slope of each
gap against T, which settles at 2 - beta.
"""
import numpy as np

from simlab.fractional import fou_constants, longrun_diag
from simlab.model import ModelParams, PolicySpec


def main():
    p = ModelParams(beta=2.5, theta=1.0, alpha=2.0, b=2.0)
    g = PolicySpec.linear(1.0)
    c = fou_constants(p, g)
    Ts = np.array([5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0]) / c.kappa
    gaps = []
    print(f"{'T':>8} {'E|Zbar|^2':>12} {'E|Rbar_T|^2':>12} {'cross':>12}")
    for T in Ts:
        d = longrun_diag(T, 1.0, c, p, g)
        gaps.append(d.gaps)
        print(f"{T:8.2f} " + " ".join(f"{r:12.4%}" for r in d.rel_gaps))
    gaps = np.array(gaps)
    slopes = [np.polyfit(np.log(Ts[-3:]), np.log(gaps[-3:, i]), 1)[0] for i in range(3)]
    print("tail slopes:", ", ".join(f"{s:.3f}" for s in slopes), f"(2 - beta = {2 - p.beta:g})")
    for i in range(3):
        need = Ts[-1] * (gaps[-1, i] / (0.02 * (d.zbar_var_limit, d.rbar_var_limit, d.cross_limit)[i])) ** (1 / (p.beta - 2))
        print(f"gap {i}: T needed for a 2% gap ~ {need:.0f}")


if __name__ == "__main__":
    main()
