"""Queue length after the n-th departure.

Two routes are provided.  :func:`step` iterates the departure recursion on
truncated pmfs ``p_n(k, j) = P(X_n = k, J_{n+1} = j)``.  :func:`transient_transform`
solves for the generating function ``f_j(r, z) = sum_n r^n E[z^X_n 1{J_{n+1}=j}]``
through the ``N`` zeros of ``det(z I - r A(z))`` inside the unit disc.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import MassLeak, NearSingularEvaluation, SingularSystem, TruncationTooSmall, WrongTypeCount
from .model import SemiMarkovModel, arrival_count_pmfs
from .spectral import RootSet, find_roots
from .stationary import NEAR_ROOT, root_conditions, solve_square

DIRECT_CONV_LIMIT = 256
KERNEL_TAIL = 1e-13
MAX_KERNEL = 1 << 20
MAX_TRUNCATION = 1 << 19
MASS_TOL = 1e-9


def _conv(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if min(x.size, y.size) < DIRECT_CONV_LIMIT:
        return np.convolve(x, y)
    out = fftconvolve(x, y)
    np.maximum(out, 0.0, out=out)
    return out


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Arrival-count pmfs needed by :func:`step`.

    ``a[i, j, k] = P(A = k, J' = j | J = i)`` and ``ab`` is the same pmf
    convolved with the batch law (the service that starts an empty period).
    ``loss`` and ``loss_empty`` are the per-type masses cut off by truncation.
    """

    a: np.ndarray
    ab: np.ndarray
    loss: np.ndarray
    loss_empty: np.ndarray

    @classmethod
    def build(cls, m: SemiMarkovModel, k_max_arr: int | None = None) -> "TransitionKernel":
        if k_max_arr is None:
            k_max_arr = 256
            while True:
                try:
                    a = arrival_count_pmfs(m, k_max_arr, tol=KERNEL_TAIL)
                    break
                except TruncationTooSmall:
                    if k_max_arr >= MAX_KERNEL:
                        raise
                    k_max_arr *= 2
        else:
            a = _checked_pmfs(m, k_max_arr)
        b = m.batch.pmf_array(k_max_arr + 1)
        n = m.n_types
        ab = np.empty_like(a)
        for i in range(n):
            for j in range(n):
                ab[i, j] = _conv(a[i, j], b)[1 : k_max_arr + 2]
        return cls(a=a, ab=ab, loss=1.0 - a.sum(axis=(1, 2)), loss_empty=1.0 - ab.sum(axis=(1, 2)))


def _checked_pmfs(m: SemiMarkovModel, k_max: int) -> np.ndarray:
    # an explicit truncation is honoured; its cut-off mass is accounted as loss
    return arrival_count_pmfs(m, k_max, tol=np.inf)


@dataclass(frozen=True)
class TransientState:
    """``pmf[k, j] = P(X_n = k, J_{n+1} = j)`` for ``k <= K`` plus the lost mass."""

    n: int
    pmf: np.ndarray
    lost_mass: float = 0.0

    @property
    def truncation(self) -> int:
        return self.pmf.shape[0] - 1

    def mean(self) -> float:
        k = np.arange(self.pmf.shape[0])
        return float(k @ self.pmf.sum(axis=1))

    def mean_by_type(self) -> np.ndarray:
        return np.arange(self.pmf.shape[0]) @ self.pmf

    def mass(self) -> float:
        return float(self.pmf.sum())


def initial_state(m: SemiMarkovModel, K: int, x0: int = 0, initial=None) -> TransientState:
    """State with ``X_0 = x0`` and ``J_1`` distributed as ``initial`` (default pi)."""
    q = _initial_types(m, initial)
    if not 0 <= x0 <= K:
        raise ValueError(f"x0={x0} must lie in [0, K={K}]")
    pmf = np.zeros((K + 1, m.n_types))
    pmf[x0] = q
    return TransientState(n=0, pmf=pmf)


def _initial_types(m: SemiMarkovModel, initial) -> np.ndarray:
    if initial is None:
        return m.moments.pi.copy()
    q = np.asarray(initial, dtype=float)
    if q.shape != (m.n_types,) or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
        raise ValueError("initial type law must be a probability vector of length N")
    return q


def step(m: SemiMarkovModel, s: TransientState, k_max_arr: int | None = None,
         kernel: TransitionKernel | None = None) -> TransientState:
    """One departure: ``X_{n+1} = max(X_n - 1, B - 1) + A_{n+1}`` pushed through the pmf.

    Mass beyond the truncation ``K`` of the state, and mass cut off by the
    kernel truncation, is added to ``lost_mass``.
    """
    if kernel is None:
        kernel = TransitionKernel.build(m, k_max_arr)
    n = m.n_types
    K = s.truncation
    p = s.pmf
    new = np.zeros_like(p)
    overflow = 0.0
    for j in range(n):
        acc = np.zeros(K + kernel.a.shape[-1] + 1)
        for i in range(n):
            busy = _conv(p[1:, i], kernel.a[i, j])
            acc[: busy.size] += busy
            acc[: kernel.ab.shape[-1]] += p[0, i] * kernel.ab[i, j]
        new[:, j] = acc[: K + 1]
        overflow += acc[K + 1 :].sum()
    cut = float(p[1:].sum(axis=0) @ kernel.loss + p[0] @ kernel.loss_empty)
    lost = s.lost_mass + overflow + cut
    defect = abs(new.sum() + lost - 1.0)
    if defect > MASS_TOL:
        raise MassLeak(f"mass defect {defect:.3g} at departure {s.n + 1}")
    return TransientState(n=s.n + 1, pmf=new, lost_mass=lost)


@dataclass(frozen=True)
class MeanCurve:
    means: np.ndarray
    by_type: np.ndarray
    lost_mass: np.ndarray
    bias_bound: np.ndarray
    truncation: int


def default_truncation(m: SemiMarkovModel) -> int:
    K = 512
    if m.rho < 1.0:
        from .stationary import queue_moments, solve_boundary
        K = max(K, int(20 * queue_moments(solve_boundary(m))[0]))
    return K


def mean_curve(m: SemiMarkovModel, n_max: int, K: int | None = None, x0: int = 0,
               initial=None, kernel: TransitionKernel | None = None) -> MeanCurve:
    """``E[X_n]`` for ``n = 0..n_max`` by pmf iteration.

    Without an explicit ``K`` the truncation starts at
    ``max(512, 20 * stationary mean)`` and doubles while the lost mass at
    ``n_max`` exceeds 1e-9.  ``bias_bound`` is ``lost_mass * K``, a bound on
    the mean lost for states that stayed below ``K``.
    """
    auto = K is None
    if auto:
        K = max(default_truncation(m), x0 + 1)
    if kernel is None:
        kernel = TransitionKernel.build(m)
    while True:
        s = initial_state(m, K, x0, initial)
        means, split, lost = [s.mean()], [s.mean_by_type()], [0.0]
        for _ in range(n_max):
            s = step(m, s, kernel=kernel)
            means.append(s.mean())
            split.append(s.mean_by_type())
            lost.append(s.lost_mass)
        if not auto or s.lost_mass <= MASS_TOL or K >= MAX_TRUNCATION:
            break
        K *= 2
    lost = np.array(lost)
    return MeanCurve(means=np.array(means), by_type=np.array(split), lost_mass=lost,
                     bias_bound=lost * K, truncation=K)


def iterate(m: SemiMarkovModel, n_max: int, K: int, x0: int = 0, initial=None,
            kernel: TransitionKernel | None = None) -> list[TransientState]:
    """States ``0..n_max`` (kept in memory; meant for moderate ``K``)."""
    if kernel is None:
        kernel = TransitionKernel.build(m)
    states = [initial_state(m, K, x0, initial)]
    for _ in range(n_max):
        states.append(step(m, states[-1], kernel=kernel))
    return states


# -- generating function in the departure index --------------------------------

@dataclass(frozen=True, eq=False)
class TransientTransformSolution:
    """``f_i(r, 0)`` and the evaluator of ``f(r, z)``."""

    model: SemiMarkovModel
    r: float
    roots: RootSet
    f_r0: np.ndarray
    x0: int
    initial: np.ndarray
    condition_number: float

    def evaluate(self, z, strict: bool = True) -> np.ndarray:
        """``f(r, z)`` with shape ``z.shape + (N,)``."""
        m, r = self.model, self.r
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        n = m.n_types
        dist = (np.abs(flat[:, None] - self.roots.interior[None, :]).min(axis=1)
                if self.roots.interior.size else np.full(flat.size, np.inf))
        near = dist < NEAR_ROOT
        if strict and near.any():
            raise NearSingularEvaluation(
                f"z={flat[near][0]:.6g} is within {NEAR_ROOT} of a zero of det M(r, z)")
        out = np.empty((flat.size, n), dtype=complex)
        ok = ~near
        if ok.any():
            zs = flat[ok]
            A = m.a_matrix(zs)
            b = (zs ** (self.x0 + 1))[:, None] * self.initial + r * (
                (m.batch.pgf(zs) - 1.0)[:, None] * np.einsum("kij,i->kj", A, self.f_r0))
            Mt = np.swapaxes(zs[:, None, None] * np.eye(n) - r * A, -1, -2)
            out[ok] = np.linalg.solve(Mt, b[..., None])[..., 0]
        for idx in np.flatnonzero(near):
            ring = flat[idx] + 1e-5 * np.exp(2j * np.pi * np.arange(32) / 32)
            out[idx] = self.evaluate(ring, strict=True).mean(axis=0)
        return out.reshape(z.shape + (n,))


def transient_transform(m: SemiMarkovModel, r: float, x0: int = 0, initial=None,
                        roots: RootSet | None = None) -> TransientTransformSolution:
    """Solve for ``f_i(r, 0)`` from the ``N`` interior zeros at ``0 < r < 1``."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    if int(x0) != x0 or x0 < 0:
        raise ValueError(f"x0 must be a nonnegative integer, got {x0}")
    q = _initial_types(m, initial)
    if roots is None:
        roots = find_roots(m, r)
    rows, rhs = root_conditions(m, roots, r, x0=int(x0), initial=q)
    f_r0, cond = solve_square(rows, rhs, SingularSystem)
    return TransientTransformSolution(model=m, r=float(r), roots=roots, f_r0=f_r0, x0=int(x0),
                                      initial=q, condition_number=cond)


def power_series(states: list[TransientState], r: float, z: complex) -> np.ndarray:
    """Truncated ``sum_n r^n E[z^X_n 1{J_{n+1}=j}]`` from iterated pmfs."""
    out = np.zeros(states[0].pmf.shape[1], dtype=complex)
    for s in states:
        zk = np.asarray(z, dtype=complex) ** np.arange(s.pmf.shape[0])
        out += r**s.n * (zk @ s.pmf)
    return out


def two_type_transient(m: SemiMarkovModel, r: float, z, x0: int = 0, initial=None,
                       roots: RootSet | None = None):
    """Explicit two-type formulas: ``(f_1(r,0), f_2(r,0), f_1(r,z), f_2(r,z))``."""
    if m.n_types != 2:
        raise WrongTypeCount(f"closed forms need N = 2, got N = {m.n_types}")
    q1, q2 = _initial_types(m, initial)
    if roots is None:
        roots = find_roots(m, r)
    z1, z2 = roots.interior
    A1, A2 = m.a_matrix(z1), m.a_matrix(z2)
    B1, B2 = complex(m.batch.pgf(z1)) - 1.0, complex(m.batch.pgf(z2)) - 1.0
    u1 = z1 - r * A1[1, 1]
    u2 = z2 - r * A2[1, 1]
    p1, p2 = z1**x0, z2**x0
    den = B1 * B2 * (A2[1, 0] * u1 - A1[1, 0] * u2)
    f10 = ((-p1 * B2 * A2[1, 0] * u1 + p2 * B1 * A1[1, 0] * u2) * q1
           + r * (p2 * B1 - p1 * B2) * A1[1, 0] * A2[1, 0] * q2) / den
    f20 = ((p1 * B2 - p2 * B1) * u1 * u2 * q1 / r
           + (-p2 * B1 * A2[1, 0] * u1 + p1 * B2 * A1[1, 0] * u2) * q2) / den
    z = np.asarray(z, dtype=complex)
    A = m.a_matrix(z)
    a11, a12, a21, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    bz = m.batch.pgf(z) - 1.0
    d = (z - r * a11) * (z - r * a22) - r**2 * a12 * a21
    cross = a12 * a21 - a11 * a22
    lead = z ** (x0 + 1)
    f1 = (lead * (z * q1 + r * (a21 * q2 - a22 * q1)) + r * z * bz * (a11 * f10 + a21 * f20)
          + r**2 * bz * cross * f10) / d
    f2 = (lead * (z * q2 + r * (a12 * q1 - a11 * q2)) + r * z * bz * (a12 * f10 + a22 * f20)
          + r**2 * bz * cross * f20) / d
    return f10, f20, f1, f2


def horizon_within(curve: MeanCurve, target: float, rel: float = 0.01) -> int | None:
    """First ``n`` from which ``E[X_n]`` stays within ``rel`` of ``target``."""
    ok = np.abs(curve.means - target) <= rel * abs(target)
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return 0
    n = int(bad[-1]) + 1
    return n if n < curve.means.size else None


def adaptive_horizon(m: SemiMarkovModel, target: float, rel: float = 0.01, n_start: int = 200,
                     n_cap: int = 1 << 16, **kwargs) -> tuple[MeanCurve, int]:
    """Extend the mean curve until it settles within ``rel`` of ``target``.

    The horizon doubles from ``n_start``; returns the curve and the first
    index from which it stays within tolerance.
    """
    n_max = n_start
    while True:
        curve = mean_curve(m, n_max, **kwargs)
        n = horizon_within(curve, target, rel)
        if n is not None:
            return curve, n
        if n_max >= n_cap:
            raise TruncationTooSmall(f"mean curve not within {rel} of {target} after {n_max} departures")
        n_max *= 2
