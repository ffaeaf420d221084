"""The semi-Markov service model and its arrival-count transforms.

``A_ij(z) = P_ij * LST_ij(lam * (1 - B(z)))`` is the joint transform of the
number of arrivals during a type-``i`` service and the next type ``j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from .distributions import BatchDistribution, ServiceDistribution
from .errors import InvalidModel, TruncationTooSmall


def _is_irreducible(P: np.ndarray) -> bool:
    n = P.shape[0]
    reach = (P > 0) | np.eye(n, dtype=bool)
    while True:
        nxt = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if np.array_equal(nxt, reach):
            return bool(reach.all())
        reach = nxt


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Solve ``pi = pi P``, ``sum(pi) = 1`` for an irreducible stochastic ``P``."""
    n = P.shape[0]
    lhs = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return pi


@dataclass(frozen=True)
class ModelMoments:
    pi: np.ndarray
    alpha: np.ndarray
    alpha_row: np.ndarray
    rho: float
    var_a: float
    mean_service: float


@dataclass(frozen=True, eq=False)
class SemiMarkovModel:
    """Batch-Poisson arrivals at rate ``lam`` feeding semi-Markov services.

    Parameters
    ----------
    lam : float
        Batch arrival rate.
    P : array_like, shape (N, N)
        Type transition matrix; must be stochastic and irreducible.
    service : N x N nested sequence of ServiceDistribution
        ``service[i][j]`` is the service law given the transition ``i -> j``.
        Entries with ``P[i, j] == 0`` are never evaluated.
    batch : BatchDistribution
    """

    lam: float
    P: np.ndarray
    service: tuple[tuple[ServiceDistribution, ...], ...]
    batch: BatchDistribution

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise InvalidModel(f"P must be a square matrix, got shape {P.shape}")
        if not self.lam > 0 or not math.isfinite(self.lam):
            raise InvalidModel(f"arrival rate must be positive, got {self.lam}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise InvalidModel("rows of P must be nonnegative and sum to 1")
        if not _is_irreducible(P):
            raise InvalidModel("P is reducible")
        service = tuple(tuple(row) for row in self.service)
        n = P.shape[0]
        if len(service) != n or any(len(row) != n for row in service):
            raise InvalidModel("service must be an N x N matrix of distributions")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "service", service)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def n_types(self) -> int:
        return self.P.shape[0]

    def _service_moments(self, order: int) -> np.ndarray:
        n = self.n_types
        return np.array([[self.service[i][j].moment(order) if self.P[i, j] > 0 else 0.0
                          for j in range(n)] for i in range(n)])

    def a_matrix(self, z) -> np.ndarray:
        """``A(z)`` with shape ``z.shape + (N, N)``."""
        z = np.asarray(z, dtype=complex)
        s = self.lam * (1.0 - self.batch.pgf(z))
        n = self.n_types
        out = np.zeros(z.shape + (n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                if self.P[i, j] > 0:
                    out[..., i, j] = self.P[i, j] * self.service[i][j].lst(s)
        return out

    def a_derivatives(self) -> list[np.ndarray]:
        """``[A(1), A'(1), A''(1), A'''(1)]`` from the chain rule, exactly."""
        lam = self.lam
        b1, b2, b3 = (self.batch.factorial_moment(k) for k in (1, 2, 3))
        m1, m2, m3 = (self._service_moments(k) for k in (1, 2, 3))
        P = self.P
        d1 = P * (m1 * lam * b1)
        d2 = P * (m2 * lam**2 * b1**2 + m1 * lam * b2)
        d3 = P * (m3 * lam**3 * b1**3 + 3.0 * m2 * lam**2 * b1 * b2 + m1 * lam * b3)
        return [P.copy(), d1, d2, d3]

    @cached_property
    def moments(self) -> ModelMoments:
        pi = stationary_distribution(self.P)
        _, alpha, a2, _ = self.a_derivatives()
        alpha_row = alpha.sum(axis=1)
        rho = float(pi @ alpha_row)
        fact2 = float(pi @ a2.sum(axis=1))
        var_a = fact2 + rho - rho**2
        mean_service = float(pi @ (self.P * self._service_moments(1)).sum(axis=1))
        return ModelMoments(pi=pi, alpha=alpha, alpha_row=alpha_row, rho=rho,
                            var_a=var_a, mean_service=mean_service)

    @property
    def rho(self) -> float:
        return self.moments.rho

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda": self.lam,
            "batch": self.batch.to_dict(),
            "P": self.P.tolist(),
            "service": [[d.to_dict() for d in row] for row in self.service],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SemiMarkovModel":
        return cls(
            lam=float(d["lambda"]),
            P=np.asarray(d["P"], dtype=float),
            service=[[ServiceDistribution.from_dict(x) for x in row] for row in d["service"]],
            batch=BatchDistribution.from_dict(d["batch"]),
        )


def a_matrix(m: SemiMarkovModel, z) -> np.ndarray:
    return m.a_matrix(z)


def model_moments(m: SemiMarkovModel) -> ModelMoments:
    return m.moments


def _fft_size(k_max: int) -> int:
    return max(8, 1 << math.ceil(math.log2(max(4 * k_max, 1))))


def _pmf_table(m: SemiMarkovModel, k_max: int) -> np.ndarray:
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    size = _fft_size(k_max)
    z = np.exp(2j * np.pi * np.arange(size) / size)
    z[0] = 1.0
    coef = np.fft.fft(m.a_matrix(z), axis=0).real[: k_max + 1] / size
    coef[coef < 0] = 0.0
    return np.moveaxis(coef, 0, -1)


def arrival_count_pmfs(m: SemiMarkovModel, k_max: int, tol: float = 1e-10) -> np.ndarray:
    """``P(A = k, J_next = j | J = i)`` for all ``i, j`` and ``k <= k_max``.

    Coefficients of ``A_ij`` come from an inverse DFT of samples on the unit
    circle.  Raises :class:`TruncationTooSmall` when the mass not captured by
    ``k_max`` exceeds ``tol`` for any pair.
    """
    coef = _pmf_table(m, k_max)
    defect = m.P - coef.sum(axis=-1)
    i, j = np.unravel_index(np.argmax(defect), defect.shape)
    if defect[i, j] > tol:
        raise TruncationTooSmall(
            f"arrival pmf ({i},{j}) misses mass {defect[i, j]:.3g} at k_max={k_max}")
    return coef


def arrival_count_pmf(m: SemiMarkovModel, i: int, j: int, k_max: int,
                      tol: float = 1e-10) -> np.ndarray:
    coef = _pmf_table(m, k_max)[i, j]
    if m.P[i, j] - coef.sum() > tol:
        raise TruncationTooSmall(
            f"arrival pmf ({i},{j}) misses mass {m.P[i, j] - coef.sum():.3g} at k_max={k_max}")
    return coef
