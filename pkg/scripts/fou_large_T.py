"""Deterministic covariances of the averaged limit at T + lag against the fOU.

cov(Zbar(T), Zbar(T + lag)) by quadrature for growing T, next to a large
sampled stationary fOU ensemble.
"""
import numpy as np

from simlab import gaussian as gl
from simlab.fractional import fou_constants, sample_fou
from simlab.model import ModelParams, PolicySpec

LAGS = (0.0, 0.5, 1.0, 2.0)


def main(M=40000, h=0.005):
    p = ModelParams(beta=2.5, theta=1.0, alpha=2.0, b=2.0)
    g = PolicySpec.linear(1.0)
    for T in (10.0, 40.0, 160.0, 640.0):
        kit = gl.build_kit(p, g, np.linspace(0.0, T + 2.0, int(T) + 3))
        vals = [gl.cov_Zbar(T, T + lag, kit) for lag in LAGS]
        print(f"T={T:6.0f} " + " ".join(f"{v:.5f}" for v in vals))
    c = fou_constants(p, g)
    grid = np.arange(0.0, max(LAGS) + h / 2, h)
    Z = sample_fou(grid, c, p, g, M, seed=5)[:, np.rint(np.array(LAGS) / h).astype(int)]
    C = np.cov(Z.T)
    print("fOU      " + " ".join(f"{v:.5f}" for v in C[0]), f"(M={M}, sigma0^2={c.sigma0sq:.5f})")


if __name__ == "__main__":
    main()
