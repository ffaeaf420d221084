"""Batch-size PGFs and service-time LSTs evaluated at complex arguments.

All distribution objects are immutable.  Transforms accept scalars or numpy
arrays and broadcast elementwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import GeometricRadius, InvalidPmf, LstDomain, ModelError

MAX_EXPLICIT_SUPPORT = 10**6


@dataclass(frozen=True)
class BatchDistribution:
    """Law of the (nonempty) batch size ``B``.

    Use the constructors :meth:`deterministic`, :meth:`geometric` and
    :meth:`explicit` rather than the raw initializer.  For the explicit kind
    ``pmf[k]`` is ``P(B = k + 1)``.
    """

    kind: str
    size: int = 1
    p: float = 0.0
    pmf: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind == "deterministic":
            if int(self.size) != self.size or self.size < 1:
                raise InvalidPmf(f"deterministic batch size must be a positive integer, got {self.size}")
        elif self.kind == "geometric":
            if not 0.0 <= self.p < 1.0:
                raise InvalidPmf(f"geometric parameter must lie in [0, 1), got {self.p}")
        elif self.kind == "explicit":
            w = np.asarray(self.pmf, dtype=float)
            if w.ndim != 1 or w.size == 0:
                raise InvalidPmf("explicit pmf must be a nonempty list")
            if w.size > MAX_EXPLICIT_SUPPORT:
                raise InvalidPmf(f"explicit pmf support exceeds {MAX_EXPLICIT_SUPPORT} entries")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise InvalidPmf("explicit pmf entries must be finite and nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise InvalidPmf(f"explicit pmf sums to {w.sum():.15g}, not 1")
        else:
            raise InvalidPmf(f"unknown batch kind {self.kind!r}")

    @classmethod
    def deterministic(cls, size: int = 1) -> "BatchDistribution":
        return cls("deterministic", size=int(size))

    @classmethod
    def geometric(cls, p: float) -> "BatchDistribution":
        """``P(B = k) = p**(k-1) * (1 - p)`` for ``k >= 1``."""
        return cls("geometric", p=float(p))

    @classmethod
    def explicit(cls, pmf) -> "BatchDistribution":
        return cls("explicit", pmf=tuple(float(x) for x in pmf))

    def pgf(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "deterministic":
            return z**self.size
        if self.kind == "geometric":
            if self.p > 0 and np.any(np.abs(z) >= 1.0 / self.p):
                raise GeometricRadius(f"|z| must be below 1/p = {1.0 / self.p:.6g}")
            return (1.0 - self.p) * z / (1.0 - self.p * z)
        # Horner on sum_k pmf[k] z^(k+1)
        coeffs = np.asarray(self.pmf)
        acc = np.zeros_like(z)
        for c in coeffs[::-1]:
            acc = acc * z + c
        return acc * z

    def factorial_moment(self, order: int) -> float:
        """``E[B (B-1) ... (B-order+1)]``, i.e. the order-th derivative of the PGF at 1."""
        if order == 0:
            return 1.0
        if self.kind == "deterministic":
            d = self.size
            return float(math.prod(d - i for i in range(order)))
        if self.kind == "geometric":
            p = self.p
            return math.factorial(order) * p ** (order - 1) / (1.0 - p) ** order
        k = np.arange(1, len(self.pmf) + 1, dtype=float)
        falling = np.ones_like(k)
        for i in range(order):
            falling *= k - i
        return float(np.dot(falling, self.pmf))

    @property
    def mean(self) -> float:
        return self.factorial_moment(1)

    def pmf_array(self, k_max: int) -> np.ndarray:
        """``P(B = k)`` for ``k = 0..k_max`` (entry 0 is always zero)."""
        out = np.zeros(k_max + 1)
        if self.kind == "deterministic":
            if self.size <= k_max:
                out[self.size] = 1.0
        elif self.kind == "geometric":
            k = np.arange(1, k_max + 1)
            out[1:] = self.p ** (k - 1) * (1.0 - self.p)
        else:
            n = min(len(self.pmf), k_max)
            out[1 : n + 1] = self.pmf[:n]
        return out

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "deterministic":
            return {"kind": "deterministic", "size": self.size}
        if self.kind == "geometric":
            return {"kind": "geometric", "p": self.p}
        return {"kind": "explicit", "pmf": list(self.pmf)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BatchDistribution":
        kind = d.get("kind")
        if kind == "deterministic":
            return cls.deterministic(d.get("size", 1))
        if kind == "geometric":
            return cls.geometric(d["p"])
        if kind == "explicit":
            return cls.explicit(d["pmf"])
        raise InvalidPmf(f"unknown batch kind {kind!r}")


_SERVICE_KINDS = ("exponential", "erlang", "gamma", "deterministic")


@dataclass(frozen=True)
class ServiceDistribution:
    """Conditional service-time law for one type transition.

    ``shape`` is the number of phases for the erlang kind and the gamma shape
    for the gamma kind; ``rate`` is the (phase) rate; ``duration`` is used by
    the deterministic kind only.
    """

    kind: str
    rate: float = 1.0
    shape: float = 1.0
    duration: float = 0.0

    def __post_init__(self):
        if self.kind not in _SERVICE_KINDS:
            raise ModelError(f"unknown service kind {self.kind!r}")
        if self.kind == "deterministic":
            if not self.duration >= 0 or not math.isfinite(self.duration):
                raise ModelError(f"deterministic duration must be >= 0, got {self.duration}")
            return
        if not self.rate > 0 or not math.isfinite(self.rate):
            raise ModelError(f"service rate must be positive, got {self.rate}")
        if self.kind == "erlang" and (int(self.shape) != self.shape or self.shape < 1):
            raise ModelError(f"erlang phases must be a positive integer, got {self.shape}")
        if self.kind == "gamma" and not self.shape > 0:
            raise ModelError(f"gamma shape must be positive, got {self.shape}")

    @classmethod
    def exponential(cls, rate: float) -> "ServiceDistribution":
        return cls("exponential", rate=float(rate))

    @classmethod
    def erlang(cls, phases: int, rate: float) -> "ServiceDistribution":
        return cls("erlang", rate=float(rate), shape=int(phases))

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "ServiceDistribution":
        return cls("gamma", rate=float(rate), shape=float(shape))

    @classmethod
    def deterministic(cls, duration: float) -> "ServiceDistribution":
        return cls("deterministic", duration=float(duration))

    @classmethod
    def with_mean(cls, family: dict[str, Any], mean: float) -> "ServiceDistribution":
        """Instantiate a family literal (without rate) so that its mean is ``mean``."""
        kind = family.get("kind")
        if kind == "deterministic":
            return cls.deterministic(mean)
        if not mean > 0:
            raise ModelError(f"{kind} service needs a positive mean, got {mean}")
        if kind == "exponential":
            return cls.exponential(1.0 / mean)
        if kind == "erlang":
            k = int(family.get("phases", 1))
            return cls.erlang(k, k / mean)
        if kind == "gamma":
            a = float(family["shape"])
            return cls.gamma(a, a / mean)
        raise ModelError(f"unknown service kind {kind!r}")

    @property
    def _power(self) -> float:
        return 1.0 if self.kind == "exponential" else self.shape

    def lst(self, s):
        s = np.asarray(s, dtype=complex)
        if self.kind == "deterministic":
            return np.exp(-s * self.duration)
        if np.any(s.real <= -self.rate):
            raise LstDomain(f"LST of {self.kind} service needs Re s > -{self.rate:.6g}")
        ratio = self.rate / (self.rate + s)
        if self.kind == "exponential":
            return ratio
        if self.kind == "erlang":
            return ratio ** int(self.shape)
        # principal branch; Re(rate + s) > 0 keeps the argument in the cut plane
        return np.exp(self.shape * np.log(ratio))

    def moment(self, order: int) -> float:
        """Raw moment ``E[G**order]`` for order 1, 2 or 3."""
        if order not in (1, 2, 3):
            raise ValueError("moment order must be 1, 2 or 3")
        if self.kind == "deterministic":
            return self.duration**order
        a = self._power
        rising = math.prod(a + i for i in range(order))
        return rising / self.rate**order

    @property
    def mean(self) -> float:
        return self.moment(1)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "deterministic":
            return {"kind": "deterministic", "duration": self.duration}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.rate}
        if self.kind == "erlang":
            return {"kind": "erlang", "phases": int(self.shape), "rate": self.rate}
        return {"kind": "gamma", "shape": self.shape, "rate": self.rate}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ServiceDistribution":
        kind = d.get("kind")
        if kind == "exponential":
            return cls.exponential(d["rate"])
        if kind == "erlang":
            return cls.erlang(d["phases"], d["rate"])
        if kind == "gamma":
            return cls.gamma(d["shape"], d["rate"])
        if kind == "deterministic":
            return cls.deterministic(d.get("duration", 0.0))
        raise ModelError(f"unknown service kind {kind!r}")


def batch_pgf(b: BatchDistribution, z):
    return b.pgf(z)


def batch_mean(b: BatchDistribution) -> float:
    return b.mean


def batch_factorial_moment2(b: BatchDistribution) -> float:
    return b.factorial_moment(2)


def service_lst(d: ServiceDistribution, s):
    return d.lst(s)


def service_moment(d: ServiceDistribution, order: int) -> float:
    return d.moment(order)
