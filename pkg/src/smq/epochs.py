"""Queue-length laws seen at other epochs in steady state.

Customers see what departing customers leave behind, so the customer-arrival
law equals the departure law.  An arriving batch sees the time-average law
(Poisson arrivals), and a customer sees its batch's view plus the number of
its batch-mates ahead of it, whose PGF is ``(1 - B(z)) / (E[B] (1 - z))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._numerics import pgf_coefficients, roots_of_unity
from .stationary import NEAR_ROOT, StationarySolution, departure_pgf, queue_moments

SERIES_GUARD = 1e-6


class Epoch(str, Enum):
    DEPARTURE = "departure"
    CUSTOMER_ARRIVAL = "customer_arrival"
    BATCH_ARRIVAL = "batch_arrival"
    ARBITRARY_TIME = "arbitrary_time"


def forward_factor(sol: StationarySolution, z) -> np.ndarray:
    """``E[B] (1 - z) / (1 - B(z))``, continued analytically to ``z = 1``.

    Near ``z = 1`` a second-order expansion in ``z - 1`` is used.
    """
    batch = sol.model.batch
    z = np.asarray(z, dtype=complex)
    eb, b2, b3 = batch.mean, batch.factorial_moment(2), batch.factorial_moment(3)
    eps = z - 1.0
    near = np.abs(eps) < SERIES_GUARD
    # 1 / (1 + c1 eps + c2 eps^2) with c1 = B''/(2 E[B]), c2 = B'''/(6 E[B])
    c1, c2 = b2 / (2 * eb), b3 / (6 * eb)
    series = 1.0 - c1 * eps + (c1 * c1 - c2) * eps**2
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = eb * (1.0 - z) / (1.0 - batch.pgf(np.where(near, 0.5, z)))
    return np.where(near, series, direct)


def _batch_view(sol: StationarySolution, z: np.ndarray) -> np.ndarray:
    """``E[B] (z - 1) 1^T (M(z)^T)^{-1} A(z)^T f(0)`` away from the zeros of ``det M``.

    This equals ``F(z) E[B] (1 - z) / (1 - B(z))`` with the factor ``B(z) - 1``
    cancelled analytically, so zeros of ``1 - B(z)`` on the unit circle (for
    example ``B = 2``) need no special treatment.
    """
    m = sol.model
    n = m.n_types
    A = m.a_matrix(z)
    rhs = np.einsum("kij,i->kj", A, sol.f0)
    Mt = np.swapaxes(z[:, None, None] * np.eye(n) - A, -1, -2)
    g = np.linalg.solve(Mt, rhs[..., None])[..., 0]
    return m.batch.mean * (z - 1.0) * g.sum(axis=-1)


def epoch_pgf(sol: StationarySolution, epoch: Epoch | str, z) -> np.ndarray:
    """PGF of the queue length seen at ``epoch``."""
    epoch = Epoch(epoch)
    if epoch in (Epoch.DEPARTURE, Epoch.CUSTOMER_ARRIVAL):
        return departure_pgf(sol, z, strict=False)[1]
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    out = np.empty(flat.size, dtype=complex)
    near_one = np.abs(flat - 1.0) < SERIES_GUARD
    interior = sol.roots.interior
    dist = (np.abs(flat[:, None] - interior[None, :]).min(axis=1)
            if interior.size else np.full(flat.size, np.inf))
    near_root = (dist < NEAR_ROOT) & ~near_one
    plain = ~(near_one | near_root)
    if near_one.any():
        zs = flat[near_one]
        out[near_one] = departure_pgf(sol, zs, strict=False)[1] * forward_factor(sol, zs)
    if plain.any():
        out[plain] = _batch_view(sol, flat[plain])
    for idx in np.flatnonzero(near_root):
        ring = flat[idx] + 1e-5 * np.exp(2j * np.pi * np.arange(32) / 32)
        out[idx] = _batch_view(sol, ring).mean()
    return out.reshape(z.shape)


@dataclass(frozen=True, eq=False)
class EpochLaw:
    epoch: Epoch
    solution: StationarySolution

    def pgf(self, z):
        return epoch_pgf(self.solution, self.epoch, z)

    def coefficients(self, n_terms: int = 4096) -> np.ndarray:
        return epoch_coefficients(self.solution, self.epoch, n_terms)

    def mean(self) -> float:
        return epoch_mean(self.solution, self.epoch)


def epoch_laws(sol: StationarySolution) -> dict[Epoch, EpochLaw]:
    dep = EpochLaw(Epoch.DEPARTURE, sol)
    ba = EpochLaw(Epoch.BATCH_ARRIVAL, sol)
    return {Epoch.DEPARTURE: dep, Epoch.CUSTOMER_ARRIVAL: dep,
            Epoch.BATCH_ARRIVAL: ba, Epoch.ARBITRARY_TIME: ba}


def epoch_coefficients(sol: StationarySolution, epoch: Epoch | str, n_terms: int = 4096) -> np.ndarray:
    """``P(X^epoch = k)`` for ``k < n_terms`` by FFT on the unit circle."""
    return pgf_coefficients(epoch_pgf(sol, epoch, roots_of_unity(n_terms)))


def epoch_mean(sol: StationarySolution, epoch: Epoch | str) -> float:
    """Mean queue length at ``epoch``; batch-mates ahead shift it by ``E[B(B-1)] / (2 E[B])``."""
    epoch = Epoch(epoch)
    mean, _ = queue_moments(sol)
    if epoch in (Epoch.DEPARTURE, Epoch.CUSTOMER_ARRIVAL):
        return mean
    b = sol.model.batch
    return mean - b.factorial_moment(2) / (2.0 * b.mean)
