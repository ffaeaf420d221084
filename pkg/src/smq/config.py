"""Scenario configuration: JSON documents, alpha-target models and sweeps.

A model document either lists every service law explicitly::

    {"lambda": 1.0, "batch": {"kind": "geometric", "p": 0.75},
     "P": [[0.5, 0.5], [0.5, 0.5]],
     "service": [[{"kind": "exponential", "rate": 0.5}, ...], ...]}

or gives targets ``alpha[i][j]`` for the mean number of arrivals during an
``i -> j`` service together with a family (one literal or an N x N matrix)::

    {"batch": ..., "P": ..., "alpha": [[...]], "family": {"kind": "exponential"}}

in which case the service means are ``alpha_ij / (P_ij * lambda * E[B])``.
For two types ``P`` may be replaced by ``{"pi": [pi_1, pi_2], "P11": p}``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .distributions import BatchDistribution, ServiceDistribution
from .errors import InfeasibleTarget, InvalidModel
from .model import SemiMarkovModel, stationary_distribution

ANALYSES = ("stationary", "transient", "epochs", "simulate", "sweep")
SWEEP_PARAMETERS = ("P11", "lambda", "batch.p")


class ConfigError(ValueError):
    """The scenario document cannot be parsed."""


def two_type_transition(p11: float, pi) -> np.ndarray:
    """Two-type transition matrix with ``P_11 = p11`` and stationary law ``pi``."""
    pi1, pi2 = (float(x) for x in pi)
    if not 0.0 < p11 < 1.0:
        raise InfeasibleTarget(f"P11 must lie in (0, 1), got {p11}")
    p12 = 1.0 - p11
    p21 = pi1 * p12 / pi2
    if p21 > 1.0:
        raise InfeasibleTarget(f"P11={p11} with pi={pi} needs P21={p21:.6g} > 1")
    return np.array([[p11, p12], [p21, 1.0 - p21]])


def _transition(spec: dict[str, Any]) -> np.ndarray:
    P = spec["P"]
    if isinstance(P, dict):
        return two_type_transition(float(P["P11"]), P["pi"])
    return np.asarray(P, dtype=float)


def _family_matrix(family, n: int) -> list[list[dict]]:
    if isinstance(family, dict):
        return [[family] * n for _ in range(n)]
    if len(family) != n or any(len(row) != n for row in family):
        raise InvalidModel("family must be one literal or an N x N matrix")
    return family


def build_model(spec: dict[str, Any]) -> SemiMarkovModel:
    """Instantiate a model document (explicit or alpha-target form)."""
    try:
        lam = float(spec.get("lambda", 1.0))
        batch = BatchDistribution.from_dict(spec["batch"])
        P = _transition(spec)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed model document: {exc!r}") from exc
    n = P.shape[0]
    if "service" in spec:
        service = [[ServiceDistribution.from_dict(d) for d in row] for row in spec["service"]]
        return SemiMarkovModel(lam=lam, P=P, service=service, batch=batch)
    if "alpha" not in spec or "family" not in spec:
        raise ConfigError("model needs either 'service' or both 'alpha' and 'family'")
    alpha = np.asarray(spec["alpha"], dtype=float)
    if alpha.shape != (n, n):
        raise InvalidModel(f"alpha must have shape {(n, n)}, got {alpha.shape}")
    family = _family_matrix(spec["family"], n)
    service = []
    for i in range(n):
        row = []
        for j in range(n):
            fam = family[i][j]
            if P[i, j] == 0.0:
                if alpha[i, j] != 0.0:
                    raise InfeasibleTarget(f"alpha[{i}][{j}]={alpha[i, j]} but P[{i}][{j}]=0")
                row.append(ServiceDistribution.deterministic(0.0))
                continue
            mean = alpha[i, j] / (P[i, j] * lam * batch.mean)
            if not (mean > 0 or (mean == 0 and fam.get("kind") == "deterministic")):
                raise InfeasibleTarget(
                    f"alpha[{i}][{j}]={alpha[i, j]} implies service mean {mean:.6g}; "
                    f"the {fam.get('kind')} family needs a positive mean")
            row.append(ServiceDistribution.with_mean(fam, mean))
        service.append(row)
    return SemiMarkovModel(lam=lam, P=P, service=service, batch=batch)


def apply_parameter(spec: dict[str, Any], name: str, value: float) -> dict[str, Any]:
    """Copy of ``spec`` with one swept parameter replaced.

    Sweeping ``P11`` in a two-type model keeps the stationary type law of
    the base model fixed, so ``P21 = pi_1 (1 - P11) / pi_2``.
    """
    out = copy.deepcopy(spec)
    if name == "P11":
        P = out["P"]
        if isinstance(P, dict):
            P["P11"] = value
        else:
            P = np.asarray(P, dtype=float)
            if P.shape != (2, 2):
                raise ConfigError("P11 sweeps need a two-type model")
            out["P"] = {"pi": stationary_distribution(P).tolist(), "P11": value}
    elif name == "lambda":
        out["lambda"] = value
    elif name == "batch.p":
        if out["batch"].get("kind") != "geometric":
            raise ConfigError("batch.p sweeps need a geometric batch")
        out["batch"]["p"] = value
    else:
        raise ConfigError(f"unknown sweep parameter {name!r}; choose from {SWEEP_PARAMETERS}")
    return out


def parse_sweep(text: str) -> tuple[str, np.ndarray]:
    """Parse ``NAME=start:stop:step`` (inclusive) or ``NAME=v1,v2,...``."""
    try:
        name, rng = text.split("=", 1)
        if ":" in rng:
            a, b, c = (float(x) for x in rng.split(":"))
            if c <= 0:
                raise ValueError("step must be positive")
            count = int(np.floor((b - a) / c + 1e-9)) + 1
            grid = np.round(a + c * np.arange(count), 12)
        else:
            grid = np.array([float(x) for x in rng.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse sweep {text!r}: {exc}") from exc
    return name.strip(), _check_grid(grid)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ConfigError("sweep grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("sweep grid must be strictly increasing")
    return grid


@dataclass
class ScenarioConfig:
    """Everything needed to run one scenario."""

    model: dict[str, Any]
    analysis: str = "stationary"
    sweep: tuple[str, np.ndarray] | None = None
    output: str = "out"
    format: str = "csv"
    variants: dict[str, dict[str, Any]] = field(default_factory=dict)
    transient: dict[str, Any] = field(default_factory=dict)
    simulate: dict[str, Any] = field(default_factory=dict)
    name: str = "scenario"

    def models(self) -> dict[str, dict[str, Any]]:
        """Model documents keyed by variant name (the base model if none)."""
        if not self.variants:
            return {"base": self.model}
        out = {}
        for key, patch in self.variants.items():
            spec = copy.deepcopy(self.model)
            spec.update(copy.deepcopy(patch))
            out[key] = spec
        return out

    def to_dict(self) -> dict[str, Any]:
        d = {"name": self.name, "model": self.model, "analysis": self.analysis,
             "output": self.output, "format": self.format}
        if self.sweep is not None:
            d["sweep"] = {"parameter": self.sweep[0], "grid": self.sweep[1].tolist()}
        for key in ("variants", "transient", "simulate"):
            if getattr(self, key):
                d[key] = getattr(self, key)
        return d


def parse_config(doc: dict[str, Any] | str) -> ScenarioConfig:
    """Validate a scenario document (dict or JSON text)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "model" not in doc:
        raise ConfigError("scenario must be a JSON object with a 'model' entry")
    analysis = doc.get("analysis", "stationary")
    if analysis not in ANALYSES:
        raise ConfigError(f"analysis must be one of {ANALYSES}, got {analysis!r}")
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "tsv"):
        raise ConfigError(f"format must be csv or tsv, got {fmt!r}")
    sweep = doc.get("sweep")
    if isinstance(sweep, str):
        sweep = parse_sweep(sweep)
    elif isinstance(sweep, dict):
        sweep = (sweep["parameter"], _check_grid(sweep["grid"]))
    if sweep is not None and sweep[0] not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {sweep[0]!r}")
    return ScenarioConfig(model=doc["model"], analysis=analysis, sweep=sweep,
                          output=doc.get("output", "out"), format=fmt,
                          variants=doc.get("variants", {}), transient=doc.get("transient", {}),
                          simulate=doc.get("simulate", {}), name=doc.get("name", "scenario"))


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)
