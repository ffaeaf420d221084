"""Small numerical helpers shared across modules."""
from __future__ import annotations

import math

import numpy as np

from .errors import ExtrapolationDivergence


def one_sided_weights(order: int, n_points: int = 7) -> np.ndarray:
    """Weights of the derivative stencil on nodes ``0, -1, ..., -(n_points-1)``."""
    x = -np.arange(n_points, dtype=float)
    V = np.vander(x, n_points, increasing=True).T
    rhs = np.zeros(n_points)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def left_derivatives(g, x0: float, g0: float, h: float = 3e-3,
                     n_points: int = 7) -> tuple[float, float]:
    """First and second derivative of ``g`` at ``x0`` from the left.

    ``g0`` is the (known) limit value at ``x0``; ``g`` is only evaluated
    strictly left of ``x0``.  Three step sizes ``h, h/2, h/4`` are combined
    by Richardson extrapolation.
    """
    w1 = one_sided_weights(1, n_points)
    w2 = one_sided_weights(2, n_points)
    est1, est2 = [], []
    for step in (h, h / 2, h / 4):
        xs = x0 - step * np.arange(1, n_points)
        vals = np.concatenate([[g0], np.real(g(xs))])
        est1.append(w1 @ vals / step)
        est2.append(w2 @ vals / step**2)
    return _richardson(est1, n_points - 1), _richardson(est2, n_points - 2)


def _richardson(est: list[float], order: int) -> float:
    t = 2.0**order
    r1 = (t * est[1] - est[0]) / (t - 1)
    r2 = (t * est[2] - est[1]) / (t - 1)
    t2 = 2.0 ** (order + 1)
    best = (t2 * r2 - r1) / (t2 - 1)
    spread = abs(r2 - r1)
    if not np.isfinite(best) or spread > 1e-3 * max(1.0, abs(best)):
        raise ExtrapolationDivergence(
            f"Richardson estimates disagree: {r1:.10g} vs {r2:.10g}")
    return float(best)


def pgf_coefficients(values_on_circle: np.ndarray) -> np.ndarray:
    """Power-series coefficients from PGF samples at the roots of unity."""
    size = values_on_circle.shape[0]
    return np.fft.fft(values_on_circle, axis=0).real / size


def roots_of_unity(size: int) -> np.ndarray:
    z = np.exp(2j * np.pi * np.arange(size) / size)
    z[0] = 1.0
    return z
