"""Zeros of ``det(z I - r A(z))`` inside the unit disc.

For ``0 <= r < 1`` there are exactly ``N`` zeros in ``|z| < 1``; for ``r = 1``
and load below one there are ``N - 1`` interior zeros plus a simple zero at
``z = 1``.  Zeros are isolated by winding-number counts over a polar
subdivision of the disc and then polished with Newton's method.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (ContourThroughZero, ConvergenceFailure, NonIntegerWinding,
                     RootCountMismatch, Unstable)
from .model import SemiMarkovModel

log = logging.getLogger(__name__)

MAX_CONTOUR_NODES = 2**16
FD_STEP = 1e-6
CLUSTER_TOL = 1e-7
STATIONARY_RADIUS = 1.0 - 1e-6
_ANGLE_OFFSET = 0.0731  # keeps cell edges off the real axis, where real roots live


@dataclass(frozen=True)
class RootSet:
    """Zeros of ``det M(r, z)`` in the open unit disc.

    ``interior`` repeats a zero according to its multiplicity.  The zero at
    ``z = 1`` for ``r = 1`` is flagged by ``boundary_root_at_one`` and never
    listed in ``interior``.
    """

    r: float
    interior: np.ndarray
    multiplicity: tuple[int, ...]
    boundary_root_at_one: bool
    residual: float
    scale: float

    def distinct(self) -> list[tuple[complex, int]]:
        """Distinct zeros with their multiplicities."""
        out, pos = [], 0
        for mult in self.multiplicity:
            out.append((complex(self.interior[pos]), mult))
            pos += mult
        return out


def det_m(m: SemiMarkovModel, r: float, z) -> np.ndarray:
    """``det(z I - r A(z))`` via LU with partial pivoting; broadcasts over ``z``."""
    z = np.asarray(z, dtype=complex)
    n = m.n_types
    M = z[..., None, None] * np.eye(n) - r * m.a_matrix(z)
    return np.linalg.det(M)


def _det_fn(m: SemiMarkovModel, r: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda z: det_m(m, r, z)


def _derivative(f, z):
    h = FD_STEP
    return (f(z + h) - f(z - h)) / (2 * h)


def boundary_scale(m: SemiMarkovModel, r: float) -> float:
    z = np.exp(2j * np.pi * np.arange(64) / 64)
    return float(max(1.0, np.abs(det_m(m, r, z)).max()))


# -- winding numbers ---------------------------------------------------------

def _path_increment(f, gamma, length: float, budget: list[int]) -> tuple[float, float, float]:
    """Total change of ``arg f`` along ``gamma(t), t in [0, 1]``.

    Nodes are bisected wherever the phase step exceeds pi/8, so zeros close
    to the path are resolved by local refinement.  Returns the increment and
    the min/max of ``|f|`` seen on the path.
    """
    n0 = max(16, int(math.ceil(96 * length)))
    t = np.linspace(0.0, 1.0, n0 + 1)
    v = f(gamma(t))
    budget[0] -= t.size
    while True:
        step = np.angle(v[1:] / v[:-1])
        bad = np.flatnonzero(np.abs(step) > math.pi / 8)
        if bad.size == 0:
            mod = np.abs(v)
            return float(step.sum()), float(mod.min()), float(mod.max())
        budget[0] -= bad.size
        if budget[0] < 0:
            raise NonIntegerWinding("argument refinement exceeded the node budget")
        tm = 0.5 * (t[bad] + t[bad + 1])
        if np.any(tm <= t[bad]) or np.any(tm >= t[bad + 1]):
            raise ContourThroughZero("phase jump could not be resolved: zero on the contour")
        vm = f(gamma(tm))
        t = np.insert(t, bad + 1, tm)
        v = np.insert(v, bad + 1, vm)


def _winding(f, pieces, max_nodes: int = MAX_CONTOUR_NODES) -> int:
    budget = [max_nodes]
    total, lo, hi = 0.0, math.inf, 0.0
    for gamma, length in pieces:
        inc, mn, mx = _path_increment(f, gamma, length, budget)
        total += inc
        lo, hi = min(lo, mn), max(hi, mx)
    if hi == 0.0 or lo <= 1e-13 * hi:
        raise ContourThroughZero(f"|det| dips to {lo:.3g} on the contour")
    value = total / (2 * math.pi)
    k = round(value)
    if abs(value - k) > 1e-3:
        raise NonIntegerWinding(f"winding number {value:.6f} is not an integer")
    return int(k)


def _circle(center: complex, radius: float, t0: float = 0.0):
    return (lambda t: center + radius * np.exp(1j * (t0 + 2 * math.pi * t)), 2 * math.pi * radius)


def count_zeros(m: SemiMarkovModel, r: float, contour_radius: float,
                *, _f=None) -> int:
    """Number of zeros of ``det M(r, .)`` inside ``|z| < contour_radius``.

    The circle is perturbed inward up to five times if a zero lies on it.
    """
    f = _f or _det_fn(m, r)
    radius = contour_radius
    for attempt in range(6):
        try:
            return _winding(f, [_circle(0.0, radius)])
        except ContourThroughZero:
            if attempt == 5:
                raise
            radius = contour_radius * (1.0 - 1e-4 * (attempt + 1) * (1 + 0.37 * attempt))
            log.debug("zero on contour; retrying with radius %.12g", radius)
    raise AssertionError("unreachable")


# -- polar subdivision -------------------------------------------------------

@dataclass(frozen=True)
class _Cell:
    r0: float
    r1: float
    t0: float
    t1: float

    @property
    def is_disc(self) -> bool:
        return self.r0 == 0.0 and self.t1 - self.t0 >= 2 * math.pi

    @property
    def center(self) -> complex:
        if self.is_disc:
            return 0j
        rm = 0.5 * (self.r0 + self.r1)
        return rm * np.exp(1j * 0.5 * (self.t0 + self.t1))

    @property
    def diameter(self) -> float:
        if self.is_disc:
            return 2 * self.r1
        return math.hypot(self.r1 - self.r0, self.r1 * (self.t1 - self.t0))

    def contains(self, z: complex) -> bool:
        rad = abs(z)
        if self.is_disc:
            return rad < self.r1
        if not self.r0 < rad < self.r1:
            return False
        ang = (math.atan2(z.imag, z.real) - self.t0) % (2 * math.pi)
        return 0.0 < ang < self.t1 - self.t0

    def pieces(self):
        if self.is_disc:
            return [_circle(0.0, self.r1)]
        r0, r1, t0, t1 = self.r0, self.r1, self.t0, self.t1
        dt = t1 - t0
        out = [
            (lambda t: r1 * np.exp(1j * (t0 + dt * t)), r1 * dt),
            (lambda t: (r1 + (r0 - r1) * t) * np.exp(1j * t1), r1 - r0),
        ]
        if r0 > 0:
            out.append((lambda t: r0 * np.exp(1j * (t1 - dt * t)), r0 * dt))
        out.append((lambda t: (r0 + (r1 - r0) * t) * np.exp(1j * t0), r1 - r0))
        return out

    def split(self, attempt: int = 0) -> list["_Cell"]:
        frac = 0.5 + 0.0613 * attempt * (-1) ** attempt
        if self.is_disc:
            rs = self.r1 * frac
            base = _ANGLE_OFFSET + 0.011 * attempt
            quarter = math.pi / 2
            return [_Cell(0.0, rs, base, base + 2 * math.pi)] + [
                _Cell(rs, self.r1, base + k * quarter, base + (k + 1) * quarter) for k in range(4)
            ]
        rm = self.r0 + frac * (self.r1 - self.r0)
        tm = self.t0 + frac * (self.t1 - self.t0)
        return [_Cell(a, b, c, d) for a, b in ((self.r0, rm), (rm, self.r1))
                for c, d in ((self.t0, tm), (tm, self.t1))]


def _newton(f, z0: complex, max_iter: int = 60) -> complex | None:
    z = complex(z0)
    for _ in range(max_iter):
        fz = complex(f(np.asarray(z)))
        if fz == 0:
            return z
        dz = fz / complex(_derivative(f, np.asarray(z)))
        if not np.isfinite(dz):
            return None
        z -= dz
        if abs(z) > 1.5:
            return None
        if abs(dz) <= 1e-14 * max(1.0, abs(z)):
            return z
    return None


def _durand_kerner(coeffs: np.ndarray, iters: int = 500) -> np.ndarray:
    """All roots of ``sum_k coeffs[k] w**k`` by simultaneous (WDK) iteration."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    deg = c.size - 1
    if deg < 1:
        return np.empty(0, dtype=complex)
    monic = c / c[-1]
    w = (0.4 + 0.9j) ** np.arange(deg)
    for _ in range(iters):
        val = np.polynomial.polynomial.polyval(w, monic)
        diff = w[:, None] - w[None, :]
        np.fill_diagonal(diff, 1.0)
        step = val / diff.prod(axis=1)
        w = w - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return w


def _local_roots(f, center: complex, radius: float, count: int) -> list[tuple[complex, int]]:
    """Roots of ``f`` in a small disc from a local Taylor polynomial.

    Taylor coefficients come from an FFT of samples on the circle; the
    ``count`` roots nearest the center are kept and clustered.
    """
    size = 64
    w = radius * np.exp(2j * np.pi * np.arange(size) / size)
    coef = np.fft.fft(f(center + w)) / size / radius ** np.arange(size)
    coef = coef[: min(size // 2, count + 10)]
    roots = _durand_kerner(coef * radius ** np.arange(coef.size)) * radius
    roots = roots[np.argsort(np.abs(roots))][:count] + center
    clusters: list[list[complex]] = []
    for z in roots:
        for cl in clusters:
            if abs(z - np.mean(cl)) < max(CLUSTER_TOL, 4 * radius):
                cl.append(z)
                break
        else:
            clusters.append([z])
    out = []
    for cl in clusters:
        z = complex(np.mean(cl))
        if len(cl) == 1:
            z = _newton(f, z) or z
        out.append((z, len(cl)))
    return out


def _isolate(f, cell: _Cell, count: int, min_size: float = 1e-9) -> list[tuple[complex, int]]:
    found: list[tuple[complex, int]] = []
    work = [(cell, count)]
    while work:
        c, k = work.pop()
        if k == 1:
            z = _newton(f, c.center)
            if z is not None and c.contains(z):
                found.append((z, 1))
                continue
        if c.diameter < max(min_size, CLUSTER_TOL if k > 1 else min_size):
            found.extend(_local_roots(f, c.center, c.diameter, k))
            continue
        for attempt in range(6):
            children = c.split(attempt)
            try:
                counts = [_winding(f, ch.pieces()) for ch in children]
            except ContourThroughZero:
                if attempt == 5:
                    raise
                continue
            if sum(counts) == k and min(counts) >= 0:
                break
            if attempt == 5:
                raise RootCountMismatch(f"children of a cell hold {sum(counts)} zeros, expected {k}")
        work.extend((ch, n) for ch, n in zip(children, counts) if n > 0)
    return found


def _symmetrize(f, roots: list[tuple[complex, int]]) -> list[tuple[complex, int]]:
    """Snap near-real roots to the axis and pair conjugates exactly."""
    out: list[tuple[complex, int]] = []
    pending = sorted(roots, key=lambda zm: (-zm[0].imag, zm[0].real))
    used = [False] * len(pending)
    for a, (z, mult) in enumerate(pending):
        if used[a]:
            continue
        used[a] = True
        if abs(z.imag) <= 1e-10 * max(1.0, abs(z)):
            x = complex(z.real)
            if mult == 1:
                x = _newton(lambda u: f(u).real + 0j, x) or x
            out.append((complex(x.real), mult))
            continue
        partner = None
        for b in range(a + 1, len(pending)):
            if not used[b] and abs(pending[b][0] - z.conjugate()) < 1e-7:
                partner = b
                break
        if partner is None:
            raise ConvergenceFailure(f"root {z:.12g} has no conjugate partner")
        used[partner] = True
        out.extend([(z, mult), (z.conjugate(), mult)])
    return out


def find_roots(m: SemiMarkovModel, r: float) -> RootSet:
    """Locate all zeros of ``det M(r, z)`` in the open unit disc.

    Parameters
    ----------
    m : SemiMarkovModel
    r : float
        Transform variable in ``[0, 1]``.  ``r = 1`` requires load below one.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    n = m.n_types
    f = _det_fn(m, r)
    scale = boundary_scale(m, r)
    stationary = r == 1.0
    if stationary:
        if m.rho >= 1.0:
            raise Unstable(f"load {m.rho:.6g} >= 1")
        h = 1e-6
        slope = (complex(f(np.asarray(1.0 + 0j))) - complex(f(np.asarray(1.0 - h + 0j)))).real / h
        if not slope > 0:
            raise RootCountMismatch(f"d/dz det M(1, z) at z=1 is {slope:.3g}, expected > 0")
        radius, expected = STATIONARY_RADIUS, n - 1
    else:
        radius, expected = 1.0, n
    if r == 0.0:
        roots = [(0j, n)]
    elif expected == 0:
        roots = []
    else:
        total = count_zeros(m, r, radius, _f=f)
        if total != expected:
            raise RootCountMismatch(f"found {total} zeros inside |z|<{radius}, expected {expected}")
        roots = _isolate(f, _Cell(0.0, radius, 0.0, 2 * math.pi), total)
        if sum(k for _, k in roots) != expected:
            raise RootCountMismatch("subdivision lost track of a zero")
        roots = _symmetrize(f, roots)
    interior = np.array([z for z, k in roots for _ in range(k)], dtype=complex)
    mults = tuple(k for _, k in roots)
    residual = float(np.abs(f(interior)).max()) if interior.size else 0.0
    if residual > 1e-9 * scale and r > 0:
        raise ConvergenceFailure(f"root residual {residual:.3g} exceeds tolerance")
    return RootSet(r=float(r), interior=interior, multiplicity=mults,
                   boundary_root_at_one=stationary, residual=residual, scale=scale)


def dominance_margin(m: SemiMarkovModel, r: float, n_points: int = 256) -> float:
    """min over |z|=1 and rows i of ``|z - r A_ii| - r sum_{j!=i} |A_ij|``."""
    z = np.exp(2j * np.pi * (np.arange(n_points) + 0.5) / n_points)
    A = m.a_matrix(z)
    diag = np.abs(z[:, None] - r * np.diagonal(A, axis1=-2, axis2=-1))
    off = r * (np.abs(A).sum(axis=-1) - np.abs(np.diagonal(A, axis1=-2, axis2=-1)))
    return float((diag - off).min())
