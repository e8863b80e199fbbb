"""Shared helpers for the test suite."""

import numpy as np

from sddelab import GridPath, HolderParams


def grid_fn(fn, a: float, b: float, n: int) -> GridPath:
    """Sample a callable on the uniform grid over [a, b] with n cells."""
    t = np.linspace(a, b, n + 1)
    return GridPath(a, (b - a) / n, fn(t))


def standard_params(alpha: float = 0.35) -> HolderParams:
    """Exponent bundle used throughout the suite (fBm with H = 3/4)."""
    return HolderParams(gamma=0.7, alpha=alpha, theta=0.45, hurst=0.75, beta=1.0)


def trig_pair(rng: np.random.Generator, n: int = 512, degree: int = 5):
    """A random pair of smooth trigonometric polynomials on [0, 1]."""
    t = np.linspace(0.0, 1.0, n + 1)

    def poly():
        vals = np.zeros_like(t)
        for k in range(1, degree + 1):
            ak, bk = rng.normal(size=2) / k
            vals += ak * np.cos(np.pi * k * t) + bk * np.sin(np.pi * k * t)
        return vals

    return GridPath(0.0, 1.0 / n, poly()), GridPath(0.0, 1.0 / n, poly())
