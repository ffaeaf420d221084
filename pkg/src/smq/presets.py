"""Built-in scenarios for the four reference examples.

Only the load, the batch law and the alpha targets are pinned by the
examples, so every preset uses the alpha-target form with ``lambda = 1``.
Example 4 keeps the Example 2 targets at ``P11 = 0.1`` for each service
family, which fixes the gamma rates as ``shape / mean``.
"""
from __future__ import annotations

import copy
from typing import Any

GEOMETRIC_3_4 = {"kind": "geometric", "p": 0.75}

_EXAMPLES: dict[int, dict[str, Any]] = {
    1: {
        "name": "example1",
        "model": {
            "lambda": 1.0,
            "batch": GEOMETRIC_3_4,
            "P": {"pi": [0.5, 0.5], "P11": 0.5},
            "alpha": [[0.375, 0.375], [0.375, 0.375]],
            # exponential into type 1, four-phase Erlang into type 2
            "family": [[{"kind": "exponential"}, {"kind": "erlang", "phases": 4}],
                       [{"kind": "exponential"}, {"kind": "erlang", "phases": 4}]],
        },
        "analysis": "sweep",
        "sweep": {"parameter": "P11", "grid": [0.1, 0.3, 0.5, 0.7, 0.9]},
    },
    2: {
        "name": "example2",
        "model": {
            "lambda": 1.0,
            "batch": GEOMETRIC_3_4,
            "P": {"pi": [0.5, 0.5], "P11": 0.5},
            "alpha": [[0.5, 0.5], [0.25, 0.25]],
            "family": {"kind": "exponential"},
        },
        "analysis": "sweep",
        "sweep": {"parameter": "P11", "grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]},
    },
    3: {
        "name": "example3",
        "model": {
            "lambda": 1.0,
            "batch": GEOMETRIC_3_4,
            "P": {"pi": [0.4375, 0.5625], "P11": 0.65},
            "alpha": [[0.15, 0.15], [0.15, 0.95]],
            "family": {"kind": "exponential"},
        },
        "analysis": "sweep",
        "sweep": {"parameter": "P11", "grid": [0.1, 0.3, 0.5, 0.65, 0.7, 0.788, 0.9]},
    },
    4: {
        "name": "example4",
        "model": {
            "lambda": 1.0,
            "batch": GEOMETRIC_3_4,
            "P": {"pi": [0.5, 0.5], "P11": 0.1},
            "alpha": [[0.5, 0.5], [0.25, 0.25]],
            "family": {"kind": "exponential"},
        },
        "analysis": "transient",
        "variants": {
            "deterministic": {"family": {"kind": "deterministic"}},
            "gamma5": {"family": {"kind": "gamma", "shape": 5.0}},
            "exponential": {"family": {"kind": "exponential"}},
            "gamma0.5": {"family": {"kind": "gamma", "shape": 0.5}},
        },
        "transient": {"n_max": 200, "x0": 0, "initial_types": None},
    },
}

# printed reference values used by ``smq reproduce``
EXAMPLE1_ROWS = {  # P11: (E[X], Var(X), Var(X) of the independent-service queue)
    0.1: (17.8281, 374.4642, 374.4631),
    0.3: (14.9263, 237.6202, 237.6198),
    0.5: (14.5781, 223.8303, 223.8303),
    0.7: (14.9263, 237.6184, 237.6198),
    0.9: (17.8281, 374.4185, 374.4631),
}
EXAMPLE3_ROWS = {  # P11: (E[X], Var(A))
    0.1: (20.377, 8.327),
    0.3: (17.931, 7.056),
    0.5: (16.969, 6.493),
    0.65: (16.747, 6.263),
    0.7: (16.780, 6.214),
    0.788: (17.060, 6.175),
    0.9: (18.587, 6.333),
}
EXAMPLE4_MEANS = {"deterministic": 16.224, "gamma5": 16.918,
                  "exponential": 19.696, "gamma0.5": 23.168}
EXAMPLE2_MEAN_ARGMIN = 0.500411
EXAMPLE3_MEAN_ARGMIN = 0.65
EXAMPLE3_VARA_ARGMIN = 0.788


def example_config(number: int) -> dict[str, Any]:
    """Scenario document for example ``number`` (1 to 4)."""
    if number not in _EXAMPLES:
        raise KeyError(f"no built-in example {number}; choose 1, 2, 3 or 4")
    return copy.deepcopy(_EXAMPLES[number])


def example_model(number: int, p11: float | None = None, variant: str | None = None) -> dict[str, Any]:
    """Model document of an example, optionally at another ``P11`` or variant."""
    doc = example_config(number)
    spec = doc["model"]
    if variant is not None:
        spec.update(copy.deepcopy(doc["variants"][variant]))
    if p11 is not None:
        spec["P"]["P11"] = float(p11)
    return spec


def var_a_example1(p11: float) -> float:
    """Closed-form variance of the arrivals per service in Example 1."""
    return 75.0 / 16.0 + 117.0 / (512.0 * p11 * (1.0 - p11))
