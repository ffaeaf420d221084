"""Stationary queue length at departure epochs.

The vector ``f(z)`` with ``f_j(z) = E[z^X 1{J = j}]`` solves
``M(z)^T f(z) = b(z)`` where ``b(z) = (B(z) - 1) A(z)^T f(0)``.  The unknown
boundary vector ``f(0)`` follows from one normalization equation and one
analyticity condition per interior zero of ``det M(z)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from ._numerics import left_derivatives, pgf_coefficients, roots_of_unity
from .errors import (ConvergenceFailure, MultiplicityUnhandled, NearSingularEvaluation,
                     NegativeProbability, SingularBoundarySystem, Unstable, WrongTypeCount)
from .model import SemiMarkovModel
from .spectral import RootSet, find_roots

log = logging.getLogger(__name__)

NEAR_ROOT = 1e-8


def _null_vectors(M: np.ndarray, mult: int, real: bool) -> np.ndarray:
    """Right null vectors of ``M`` (columns), ``mult`` of them."""
    _, s, vh = np.linalg.svd(M)
    if mult > 1 and s[-mult] > 1e-7 * max(s[0], 1.0):
        raise MultiplicityUnhandled(
            f"zero of multiplicity {mult} has a null space of dimension < {mult}")
    V = vh[-mult:].conj().T
    if real and mult > 1:
        W = np.hstack([V.real, V.imag])
        u, _, _ = np.linalg.svd(W, full_matrices=False)
        V = u[:, :mult].astype(complex)
    return V


def root_conditions(m: SemiMarkovModel, roots: RootSet, r: float,
                    x0: int | None = None, initial=None) -> tuple[np.ndarray, np.ndarray]:
    """Real linear equations on the boundary vector from the interior zeros.

    For a zero ``w`` with ``M(r, w) v = 0`` the right-hand side must satisfy
    ``v . b(r, w) = 0``.  Because ``r A(w) v = w v`` this reads
    ``w (B(w) - 1) v . f(r, 0) = -w^(x0+1) v . q`` with ``q`` the initial type
    law (``q = 0`` in the stationary case).  The common factor ``w`` is
    dropped, which is also the correct consistency condition at ``w = 0``.
    Conjugate pairs give one real and one imaginary row.
    """
    n = m.n_types
    rows, rhs = [], []
    for w, mult in roots.distinct():
        if w.imag < 0:
            continue
        real = w.imag == 0.0
        M = w * np.eye(n) - r * m.a_matrix(w)
        bw = complex(m.batch.pgf(w))
        for v in _null_vectors(M, mult, real).T:
            coef = (bw - 1.0) * v
            c0 = 0j if x0 is None else -(w ** x0) * (v @ np.asarray(initial))
            full = np.append(coef, c0)
            if real:
                k = np.argmax(np.abs(full))
                full = (full * np.exp(-1j * np.angle(full[k]))).real
                rows.append(full[:n])
                rhs.append(full[n])
            else:
                rows.extend([full[:n].real, full[:n].imag])
                rhs.extend([full[n].real, full[n].imag])
    return np.array(rows, dtype=float).reshape(-1, n), np.array(rhs, dtype=float)


def solve_square(A: np.ndarray, b: np.ndarray, exc) -> tuple[np.ndarray, float]:
    """Solve by QR with column pivoting; raise ``exc`` if rank deficient."""
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise exc(f"{A.shape[0]} root conditions for {A.shape[-1]} unknowns")
    Q, R, piv = scipy.linalg.qr(A, pivoting=True)
    diag = np.abs(np.diag(R))
    cond = float(np.linalg.cond(A))
    if diag.size == 0 or diag[-1] <= 1e-10 * diag[0]:
        raise exc(f"boundary system is rank deficient (condition number {cond:.3g})")
    y = scipy.linalg.solve_triangular(R, Q.T @ b)
    x = np.empty_like(y)
    x[piv] = y
    return x, cond


def taylor_at_one(derivs: list[np.ndarray], batch_fact: list[float], g: np.ndarray,
                  pi: np.ndarray, order: int = 2) -> list[np.ndarray]:
    """Taylor coefficients ``f^(k)(1)/k!`` for ``k <= order``.

    Expands ``M(z)^T f(z) = b(z)`` around ``z = 1``.  The singular leading
    matrix ``I - P^T`` leaves a multiple of ``pi`` free at every order; it
    is fixed by solvability of the next order, so exact derivatives of ``A``
    and ``B`` up to ``order + 1`` are needed.
    """
    n = pi.size
    fact = [1.0, 1.0, 2.0, 6.0, 24.0]
    Ak = [d / fact[k] for k, d in enumerate(derivs)]
    Mk = [np.eye(n) - Ak[0], np.eye(n) - Ak[1]] + [-a for a in Ak[2:]]
    beta = [0.0] + [b / fact[k + 1] for k, b in enumerate(batch_fact)]
    ak = [a.T @ g for a in Ak]
    bk = [sum(beta[l] * ak[k - l] for l in range(1, k + 1)) for k in range(order + 2)]
    ones = np.ones(n)
    lhs = np.vstack([Mk[0].T, ones])
    denom = ones @ Mk[1].T @ pi
    f = [pi.astype(float)]
    for k in range(1, order + 2):
        r = bk[k] - sum(Mk[l].T @ f[k - l] for l in range(1, k + 1))
        if k >= 2:
            shift = (ones @ r) / denom
            f[k - 1] = f[k - 1] + shift * pi
            r = r - shift * (Mk[1].T @ pi)
        if k == order + 1:
            break
        y, *_ = np.linalg.lstsq(lhs, np.append(r, 0.0), rcond=None)
        f.append(y)
    return f[: order + 1]


@dataclass(frozen=True, eq=False)
class StationarySolution:
    model: SemiMarkovModel
    roots: RootSet
    f0: np.ndarray
    condition_number: float

    @cached_property
    def taylor(self) -> list[np.ndarray]:
        m = self.model
        return taylor_at_one(m.a_derivatives(), [m.batch.factorial_moment(k) for k in (1, 2, 3)],
                             self.f0, m.moments.pi)

    @property
    def singular_points(self) -> np.ndarray:
        return np.append(self.roots.interior, 1.0 + 0j)

    def pgf(self, z, strict: bool = False):
        return departure_pgf(self, z, strict=strict)

    def coefficients(self, n_terms: int = 4096) -> np.ndarray:
        """``P(X = k)`` for ``k < n_terms`` by FFT of ``F`` on the unit circle."""
        _, F = departure_pgf(self, roots_of_unity(n_terms), strict=False)
        return pgf_coefficients(F)


def solve_boundary(m: SemiMarkovModel, roots: RootSet | None = None) -> StationarySolution:
    """Boundary probabilities ``f_i(0)`` and the stationary solution."""
    mom = m.moments
    if mom.rho >= 1.0:
        raise Unstable(f"load {mom.rho:.6g} >= 1")
    if roots is None:
        roots = find_roots(m, 1.0)
    rows, rhs = root_conditions(m, roots, 1.0)
    total = (1.0 - mom.rho) / m.batch.mean
    A = np.vstack([rows, np.ones((1, m.n_types))])
    b = np.append(rhs, total)
    if A.shape[0] != m.n_types:
        raise MultiplicityUnhandled(f"{A.shape[0]} boundary equations for {m.n_types} unknowns")
    f0, cond = solve_square(A, b, SingularBoundarySystem)
    if np.any(f0 < -1e-10):
        raise NegativeProbability(f"boundary probabilities {f0} contain a negative entry")
    if np.any(f0 < 0):
        log.info("clamping boundary probabilities %s to zero", f0[f0 < 0])
        f0 = np.maximum(f0, 0.0)
    return StationarySolution(model=m, roots=roots, f0=f0, condition_number=cond)


def _limit_value(sol: StationarySolution, w: complex) -> np.ndarray:
    if abs(w - 1.0) < 1e-6:
        eps = w - 1.0
        return sum(c * eps**k for k, c in enumerate(sol.taylor))
    # mean value over a small circle around an interior removable point
    ring = w + 1e-5 * np.exp(2j * np.pi * np.arange(32) / 32)
    f, _ = departure_pgf(sol, ring, strict=True)
    return f.mean(axis=0)


def departure_pgf(sol: StationarySolution, z, strict: bool = True):
    """``(f(z), F(z))`` with ``f`` of shape ``z.shape + (N,)``.

    With ``strict=True`` points within 1e-8 of a zero of ``det M`` raise
    :class:`NearSingularEvaluation`; otherwise those points use the limit
    evaluator.
    """
    m = sol.model
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    dist = np.abs(flat[:, None] - sol.singular_points[None, :]).min(axis=1)
    near = dist < NEAR_ROOT
    if strict and near.any():
        raise NearSingularEvaluation(
            f"z={flat[near][0]:.6g} is within {NEAR_ROOT} of a zero of det M; use strict=False")
    n = m.n_types
    out = np.empty((flat.size, n), dtype=complex)
    ok = ~near
    if ok.any():
        zs = flat[ok]
        A = m.a_matrix(zs)
        b = (m.batch.pgf(zs) - 1.0)[:, None] * np.einsum("kij,i->kj", A, sol.f0)
        Mt = np.swapaxes(zs[:, None, None] * np.eye(n) - A, -1, -2)
        out[ok] = np.linalg.solve(Mt, b[..., None])[..., 0]
    for idx in np.flatnonzero(near):
        out[idx] = _limit_value(sol, flat[idx])
    f = out.reshape(z.shape + (n,))
    return f, f.sum(axis=-1)


def queue_moments(sol: StationarySolution, method: str = "taylor") -> tuple[float, float]:
    """Mean and variance of the departure-epoch queue length.

    ``method="taylor"`` uses exact derivatives at ``z = 1``;
    ``method="richardson"`` differentiates ``F`` numerically from the left.
    For two types the mean is checked against the closed form.
    """
    if method == "taylor":
        t = sol.taylor
        d1 = float(t[1].sum().real)
        d2 = float(2.0 * t[2].sum().real)
    elif method == "richardson":
        d1, d2 = left_derivatives(lambda x: departure_pgf(sol, x + 0j)[1], 1.0, 1.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    mean, var = d1, d2 + d1 - d1 * d1
    if sol.model.n_types == 2:
        closed = two_type_mean(sol.model, sol)
        if abs(closed - mean) > 1e-6 * max(1.0, abs(mean)):
            raise ConvergenceFailure(f"mean {mean:.12g} disagrees with closed form {closed:.12g}")
    return mean, var


# -- two customer types ------------------------------------------------------

def _require_two(m: SemiMarkovModel):
    if m.n_types != 2:
        raise WrongTypeCount(f"closed forms need N = 2, got N = {m.n_types}")


def two_type_boundary(m: SemiMarkovModel, zhat: complex) -> np.ndarray:
    rho, eb = m.rho, m.batch.mean
    a = m.a_matrix(zhat)
    c = (1.0 - rho) / eb
    f1 = c * (a[0, 0] - zhat) / (a[0, 0] + a[0, 1] - zhat)
    f2 = c * (a[1, 1] - zhat) / (a[1, 0] + a[1, 1] - zhat)
    return np.array([f1, f2]).real


def two_type_mean(m: SemiMarkovModel, sol: StationarySolution | None = None) -> float:
    """Closed-form mean queue length at departures for ``N = 2``."""
    _require_two(m)
    if sol is None:
        sol = solve_boundary(m)
    mom = m.moments
    rho, eb, al, a = mom.rho, m.batch.mean, mom.alpha_row, mom.alpha
    ebb = m.batch.factorial_moment(2)
    f0 = two_type_boundary(m, sol.roots.interior[0])
    P = m.P
    dep = (-rho + eb * (f0[0] * al[0] + f0[1] * al[1]) + rho * (a[0, 0] + a[1, 1])
           + a[0, 1] * a[1, 0] - a[0, 0] * a[1, 1]) / ((P[0, 1] + P[1, 0]) * (1.0 - rho))
    return rho / 2 + mom.var_a / (2 * (1 - rho)) + ebb / (2 * eb) + float(dep)


def two_type_closed_form(m: SemiMarkovModel, z, sol: StationarySolution | None = None):
    """``(f_1(z), f_2(z), F(z), E[X])`` from the explicit two-type formulas."""
    _require_two(m)
    if sol is None:
        sol = solve_boundary(m)
    zhat = sol.roots.interior[0]
    f10, f20 = two_type_boundary(m, zhat)
    z = np.asarray(z, dtype=complex)
    A = m.a_matrix(z)
    a11, a12, a21, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    bz = m.batch.pgf(z)
    den = (z - a11) * (z - a22) - a12 * a21
    f1 = (bz - 1) * (f10 * (z * a11 + a12 * a21 - a11 * a22) + z * f20 * a21) / den
    f2 = (bz - 1) * (z * f10 * a12 + f20 * (z * a22 + a12 * a21 - a11 * a22)) / den
    rho, eb = m.rho, m.batch.mean
    c1, c2 = two_type_boundary(m, zhat) * eb / (1 - rho)
    F = ((1 - rho) * (bz - 1) * (c1 * z * (a11 + a12) + c2 * z * (a21 + a22) + a12 * a21 - a11 * a22)
         / (eb * den))
    return f1, f2, F, two_type_mean(m, sol)


# -- reference M^X/G/1 queue ---------------------------------------------------

def _mixture_derivs(m: SemiMarkovModel) -> list[np.ndarray]:
    pi = m.moments.pi
    return [np.array([[pi @ d.sum(axis=1)]]) for d in m.a_derivatives()]


def mxg1_pgf(m: SemiMarkovModel, z):
    """Departure-epoch PGF of the M^X/G/1 queue with the pi-mixture service law."""
    rho, eb, pi = m.rho, m.batch.mean, m.moments.pi
    z = np.asarray(z, dtype=complex)
    amix = np.einsum("i,...ij->...", pi, m.a_matrix(z))
    bz = m.batch.pgf(z)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (1 - rho) / eb * (bz - 1) * amix / (z - amix)
    return np.where(np.abs(z - 1) < NEAR_ROOT, 1.0 + 0j, out)


def mxg1_reference(m: SemiMarkovModel) -> tuple[float, float]:
    """Mean and variance for the same queue with independent services."""
    mom = m.moments
    rho = mom.rho
    if rho >= 1.0:
        raise Unstable(f"load {rho:.6g} >= 1")
    eb = m.batch.mean
    ebb = m.batch.factorial_moment(2)
    mean = rho / 2 + mom.var_a / (2 * (1 - rho)) + ebb / (2 * eb)
    t = taylor_at_one(_mixture_derivs(m), [m.batch.factorial_moment(k) for k in (1, 2, 3)],
                      np.array([(1 - rho) / eb]), np.array([1.0]))
    d1, d2 = float(t[1][0]), float(2 * t[2][0])
    return mean, d2 + d1 - d1 * d1
