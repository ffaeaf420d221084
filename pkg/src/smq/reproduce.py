"""End-to-end comparison of the built-in examples with their printed values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import presets
from .config import build_model
from .stationary import mxg1_reference, queue_moments, solve_boundary
from .transient import adaptive_horizon


@dataclass(frozen=True)
class Check:
    name: str
    computed: float
    expected: float
    tolerance: float
    passed: bool
    note: str = ""

    @classmethod
    def absolute(cls, name, computed, expected, tol, note=""):
        return cls(name, float(computed), float(expected), tol,
                   bool(abs(computed - expected) <= tol), note)

    @classmethod
    def inside(cls, name, computed, lo, hi, note=""):
        return cls(name, float(computed), 0.5 * (lo + hi), 0.5 * (hi - lo),
                   bool(lo < computed < hi), note)


def mean_at(example: int, p11: float, variant: str | None = None) -> float:
    m = build_model(presets.example_model(example, p11, variant))
    return queue_moments(solve_boundary(m))[0]


def var_a_at(example: int, p11: float) -> float:
    return build_model(presets.example_model(example, p11)).moments.var_a


def refine_argmin(fn, lo: float, hi: float, points: int = 21, tol: float = 1e-7) -> float:
    """Grid minimisation that zooms in on the best grid point until the spacing is below ``tol``."""
    while True:
        grid = np.linspace(lo, hi, points)
        vals = np.array([fn(x) for x in grid])
        k = int(np.argmin(vals))
        step = grid[1] - grid[0]
        if step < tol:
            return float(grid[k])
        lo, hi = max(lo, grid[k] - step), min(hi, grid[k] + step)


def example1_checks() -> list[Check]:
    out = []
    for p11, (mean_ref, var_ref, var_mxg1_ref) in presets.EXAMPLE1_ROWS.items():
        m = build_model(presets.example_model(1, p11))
        mean, var = queue_moments(solve_boundary(m))
        _, var_mxg1 = mxg1_reference(m)
        out.append(Check.absolute(f"ex1 P11={p11} mean", mean, mean_ref, 5e-4))
        out.append(Check.absolute(f"ex1 P11={p11} var(X)", var, var_ref, 5e-3))
        out.append(Check.absolute(f"ex1 P11={p11} var(X) mxg1", var_mxg1, var_mxg1_ref, 5e-3))
        out.append(Check(f"ex1 P11={p11} var(A) closed form", m.moments.var_a,
                         presets.var_a_example1(p11), 1e-9,
                         bool(abs(m.moments.var_a / presets.var_a_example1(p11) - 1) <= 1e-9),
                         "relative"))
    return out


def example2_checks() -> list[Check]:
    arg_var = refine_argmin(lambda q: var_a_at(2, q), 0.05, 0.95)
    arg_mean = refine_argmin(lambda q: mean_at(2, q), 0.05, 0.95)
    return [Check.absolute("ex2 argmin var(A)", arg_var, 0.5, 1e-6),
            Check.inside("ex2 argmin mean", arg_mean, 0.5, 0.5009,
                         f"printed {presets.EXAMPLE2_MEAN_ARGMIN}")]


def example3_checks() -> list[Check]:
    out = []
    for p11, (mean_ref, var_a_ref) in presets.EXAMPLE3_ROWS.items():
        out.append(Check.absolute(f"ex3 P11={p11} mean", mean_at(3, p11), mean_ref, 5e-3))
        out.append(Check.absolute(f"ex3 P11={p11} var(A)", var_a_at(3, p11), var_a_ref, 5e-3))
    arg_mean = refine_argmin(lambda q: mean_at(3, q), 0.05, 0.95, tol=1e-5)
    arg_var = refine_argmin(lambda q: var_a_at(3, q), 0.05, 0.95, tol=1e-5)
    out.append(Check.inside("ex3 argmin mean", arg_mean, 0.64, 0.66))
    out.append(Check.inside("ex3 argmin var(A)", arg_var, 0.78, 0.80))
    return out


def example4_checks() -> list[Check]:
    out, curves = [], {}
    for variant, ref in presets.EXAMPLE4_MEANS.items():
        m = build_model(presets.example_model(4, variant=variant))
        stat = queue_moments(solve_boundary(m))[0]
        out.append(Check.absolute(f"ex4 {variant} stationary mean", stat, ref, 5e-3))
        curve, horizon = adaptive_horizon(m, stat)
        curves[variant] = curve.means
        monotone = bool(np.all(np.diff(curve.means) >= -1e-12) and curve.means[0] == 0.0)
        out.append(Check(f"ex4 {variant} curve monotone from 0", float(monotone), 1.0, 0.0, monotone))
        gap = abs(curve.means[horizon] / stat - 1)
        out.append(Check(f"ex4 {variant} within 1% at n={horizon}", gap, 0.0, 0.01, gap <= 0.01,
                         "relative gap"))
    order = list(presets.EXAMPLE4_MEANS)
    stack = np.array([curves[k][50:201] for k in order])
    ordered = bool(np.all(np.diff(stack, axis=0) > 0))
    out.append(Check("ex4 curve ordering for 50<=n<=200", float(ordered), 1.0, 0.0, ordered,
                     " < ".join(order)))
    return out


def reproduction_checks() -> list[Check]:
    return example1_checks() + example2_checks() + example3_checks() + example4_checks()
