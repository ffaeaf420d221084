"""Discrete-event simulation of the batch-Poisson queue with semi-Markov services.

Random numbers come from numpy's ``Philox4x32-10`` counter-based generator.
A run seeded with ``seed`` uses ``SeedSequence(seed)`` and spawns one child
stream each for the type chain, the service times, the batch epochs and the
batch sizes; transient replication ``r`` uses the ``r``-th spawned child.
Sampling: exponential by inversion, Erlang as a sum of exponentials, gamma by
``Generator.standard_gamma`` (Marsaglia-Tsang with the shape < 1 boost).
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numba
import numpy as np
from scipy import stats

from .distributions import BatchDistribution, ServiceDistribution
from .model import SemiMarkovModel

N_BATCHES = 32
WARMUP = 0.1


def _generator(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_seq))


@numba.njit(cache=True)
def _type_chain(cum: np.ndarray, start: int, u: np.ndarray) -> np.ndarray:
    out = np.empty(u.size + 1, dtype=np.int64)
    out[0] = start
    j = start
    n = cum.shape[0]
    for k in range(u.size):
        row = cum[j]
        nxt = n - 1
        for c in range(n - 1):
            if u[k] < row[c]:
                nxt = c
                break
        j = nxt
        out[k + 1] = j
    return out


def type_chain(m: SemiMarkovModel, length: int, rng: np.random.Generator, start=None) -> np.ndarray:
    """Types ``J_1..J_length``; ``J_1`` from ``start`` (a law) or pi."""
    q = m.moments.pi if start is None else np.asarray(start, dtype=float)
    first = int(rng.choice(m.n_types, p=q / q.sum()))
    cum = np.cumsum(m.P, axis=1)
    cum[:, -1] = 1.0
    return _type_chain(cum, first, rng.random(length - 1))


def sample_service(d: ServiceDistribution, size: int, rng: np.random.Generator) -> np.ndarray:
    if d.kind == "deterministic":
        return np.full(size, d.duration)
    if d.kind == "exponential":
        return -np.log1p(-rng.random(size)) / d.rate
    if d.kind == "erlang":
        k = int(d.shape)
        return -np.log1p(-rng.random((size, k))).sum(axis=1) / d.rate
    return rng.standard_gamma(d.shape, size) / d.rate


def service_times(m: SemiMarkovModel, types: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Duration of service ``n`` given the transition ``types[n] -> types[n+1]``."""
    n = m.n_types
    cur, nxt = types[:-1], types[1:]
    pair = cur * n + nxt
    out = np.empty(pair.size)
    for code in range(n * n):
        idx = np.flatnonzero(pair == code)
        if idx.size:
            out[idx] = sample_service(m.service[code // n][code % n], idx.size, rng)
    return out


def sample_batches(b: BatchDistribution, size: int, rng: np.random.Generator) -> np.ndarray:
    if b.kind == "deterministic":
        return np.full(size, b.size, dtype=np.int64)
    if b.kind == "geometric":
        return rng.geometric(1.0 - b.p, size).astype(np.int64)
    return rng.choice(np.arange(1, len(b.pmf) + 1), size=size, p=np.asarray(b.pmf))


def departure_times(arrivals: np.ndarray, services: np.ndarray, start: float = 0.0) -> np.ndarray:
    """FIFO departures ``D_n = max(D_{n-1}, a_n) + S_n`` in closed form."""
    c = np.cumsum(services)
    prev = np.concatenate(([0.0], c[:-1]))
    return c + np.maximum.accumulate(np.maximum(arrivals - prev, start - prev))


def batch_means_ci(x: np.ndarray, n_batches: int = N_BATCHES, level: float = 0.95):
    """Batch means over the leading axis: ``(mean, half_width, batch values)``."""
    usable = (x.shape[0] // n_batches) * n_batches
    means = x[:usable].reshape((n_batches, -1) + x.shape[1:]).mean(axis=1)
    return _ci(means, level)


def _ci(means: np.ndarray, level: float = 0.95):
    b = means.shape[0]
    centre = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / np.sqrt(b)
    return centre, stats.t.ppf(0.5 + level / 2, b - 1) * se, means


@dataclass(eq=False)
class SimulationReport:
    """Estimates from one long run; half-widths are 95% batch-means intervals."""

    num_departures: int
    seed: int
    mean_depart: float
    mean_half_width: float
    var_depart: float
    pmf_depart: np.ndarray
    pmf_depart_batches: np.ndarray
    pmf_time_avg: np.ndarray
    pmf_time_avg_batches: np.ndarray
    pmf_batch_arrival: np.ndarray
    pmf_batch_arrival_batches: np.ndarray
    mean_time_avg: float
    mean_time_avg_half_width: float
    type_freq: np.ndarray
    type_freq_se: np.ndarray
    rho_hat: float
    rho_se: float
    unstable: bool = False
    diagnostics: dict = field(default_factory=dict)

    def standard_errors(self, name: str) -> np.ndarray:
        b = getattr(self, f"{name}_batches")
        return b.std(axis=0, ddof=1) / np.sqrt(b.shape[0])

    def pasta_check(self, n_states: int = 50, family_level: float = 0.01):
        """Batch-arrival versus time-average pmf over the first ``n_states`` states.

        Returns ``(passed, z, threshold)`` where ``z`` holds the differences in
        units of their batch-means standard error.  The per-state threshold is
        Bonferroni-corrected so that the whole family has level ``family_level``.
        """
        diff = self.pmf_batch_arrival_batches - self.pmf_time_avg_batches
        return compare_batches(diff, 0.0, n_states, family_level)

    def identical_to(self, other: "SimulationReport") -> bool:
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray):
                if a.shape != b.shape or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True


def compare_batches(batches: np.ndarray, reference, n_states: int = 50,
                    family_level: float = 0.01):
    """State-wise comparison of batch-means estimates against ``reference``.

    ``batches`` has one row per batch.  Returns ``(passed, z, threshold)``;
    the threshold is the Student-t quantile at ``family_level / (2 k)``.
    """
    k = min(n_states, batches.shape[1])
    ref = np.zeros(k)
    r = np.atleast_1d(np.asarray(reference, dtype=float))
    ref[:] = r[0] if r.size == 1 else np.pad(r[:k], (0, max(0, k - r.size)))
    d = batches[:, :k] - ref
    b = d.shape[0]
    se = d.std(axis=0, ddof=1) / np.sqrt(b)
    z = np.where(se > 0, d.mean(axis=0) / np.where(se > 0, se, 1.0), 0.0)
    threshold = float(stats.t.ppf(1.0 - family_level / (2 * k), b - 1))
    return bool(np.all(np.abs(z) <= threshold)), z, threshold


def pmf_hotelling(batches: np.ndarray, reference: np.ndarray, n_states: int = 50,
                  n_groups: int = 10) -> float:
    """p-value of a Hotelling test of a batch-means pmf against ``reference``.

    The first ``n_states`` states are pooled into ``n_groups`` consecutive
    groups so the batch covariance stays invertible.
    """
    k = n_states // n_groups * n_groups
    ref = np.zeros(k)
    ref[: min(k, reference.size)] = reference[:k]
    est = np.zeros((batches.shape[0], k))
    w = min(k, batches.shape[1])
    est[:, :w] = batches[:, :w]
    d = (est - ref).reshape(batches.shape[0], n_groups, -1).sum(axis=2)
    b, p = d.shape
    mean = d.mean(axis=0)
    cov = np.cov(d, rowvar=False)
    t2 = b * mean @ np.linalg.solve(cov, mean)
    f = (b - p) / (p * (b - 1)) * t2
    return float(stats.f.sf(f, p, b - p))


def _arrivals_until(m: SemiMarkovModel, needed: int, horizon: float, rng_t, rng_b, chunk: int):
    """Batch epochs and sizes covering ``needed`` customers and time ``horizon``."""
    times, sizes = [], []
    t0, total = 0.0, 0
    while not times or total < needed or t0 < horizon:
        gaps = rng_t.exponential(1.0 / m.lam, chunk)
        t = t0 + np.cumsum(gaps)
        s = sample_batches(m.batch, chunk, rng_b)
        times.append(t)
        sizes.append(s)
        t0, total = t[-1], total + int(s.sum())
    return np.concatenate(times), np.concatenate(sizes)


def run(m: SemiMarkovModel, num_departures: int, seed: int = 0, warmup: float = WARMUP,
        n_batches: int = N_BATCHES, start=None) -> SimulationReport:
    """Simulate ``num_departures`` services starting from an empty system.

    The first ``warmup`` fraction of departures is discarded.  Queue lengths
    are recorded just after departures, just before batch arrivals and
    continuously in time.
    """
    if num_departures < 10 * n_batches:
        raise ValueError("num_departures is too small for batch means")
    n = int(num_departures)
    ss = np.random.SeedSequence(seed)
    g_type, g_serv, g_time, g_size = (_generator(s) for s in ss.spawn(4))
    types = type_chain(m, n + 1, g_type, start)
    services = service_times(m, types, g_serv)
    types = types[:-1]

    chunk = max(1024, int(n / m.batch.mean) + 1)
    bt, bs = _arrivals_until(m, n, 0.0, g_time, g_size, chunk)
    cum = np.cumsum(bs)
    cust_batch = np.searchsorted(cum, np.arange(1, n + 1), side="left")
    arrivals = bt[cust_batch]
    dep = departure_times(arrivals, services)
    if bt[-1] < dep[-1]:
        more_t, more_s = _arrivals_until(m, 0, dep[-1] - bt[-1], g_time, g_size, chunk)
        bt = np.concatenate([bt, bt[-1] + more_t])
        bs = np.concatenate([bs, more_s])
        cum = np.cumsum(bs)
    x_dep = cum[np.searchsorted(bt, dep, side="right") - 1] - np.arange(1, n + 1)

    w = int(warmup * n)
    xs = x_dep[w:]
    usable = (xs.size // n_batches) * n_batches
    xs = xs[:usable]
    per = usable // n_batches
    last = w + usable  # departures w+1 .. last are used
    bounds = dep[w - 1 + per * np.arange(n_batches + 1)] if w > 0 else np.concatenate(
        ([0.0], dep[per * np.arange(1, n_batches + 1) - 1]))

    mean, hw, _ = batch_means_ci(xs.astype(float), n_batches)
    top = int(xs.max()) + 1

    pmf_dep_b = np.stack([np.bincount(c, minlength=top)[:top] / per for c in xs.reshape(n_batches, per)])

    # time-average occupancy over [bounds[0], bounds[-1]]
    t_lo, t_hi = bounds[0], bounds[-1]
    in_win = (bt > t_lo) & (bt < t_hi)
    ev_t = np.concatenate([bt[in_win], dep[w:last]])
    ev_d = np.concatenate([bs[in_win], -np.ones(last - w, dtype=np.int64)])
    order = np.argsort(ev_t, kind="stable")
    ev_t, ev_d = ev_t[order], ev_d[order]
    x0 = int(x_dep[w - 1]) if w > 0 else 0
    level = x0 + np.concatenate(([0], np.cumsum(ev_d)))
    seg_t = np.concatenate(([t_lo], ev_t))
    seg_len = np.diff(np.concatenate((seg_t, [t_hi])))
    level = level[: seg_len.size]
    seg_batch = np.clip(np.searchsorted(bounds, seg_t, side="right") - 1, 0, n_batches - 1)
    width = max(top, int(level.max()) + 1)
    occ = np.zeros((n_batches, width))
    np.add.at(occ, (seg_batch, level), seg_len)
    span = np.diff(bounds)
    pmf_time_b = occ / span[:, None]

    # levels seen by arriving batches
    tb = bt[in_win]
    seen = (np.concatenate(([0], cum))[np.searchsorted(bt, tb, side="left")]
            - np.searchsorted(dep, tb, side="left"))
    tb_batch = np.clip(np.searchsorted(bounds, tb, side="right") - 1, 0, n_batches - 1)
    width = max(width, int(seen.max()) + 1 if seen.size else 0)
    ba = np.zeros((n_batches, width))
    np.add.at(ba, (tb_batch, seen), 1.0)
    ba /= np.maximum(ba.sum(axis=1, keepdims=True), 1.0)

    pmf_dep_b = np.pad(pmf_dep_b, ((0, 0), (0, width - pmf_dep_b.shape[1])))
    pmf_time_b = np.pad(pmf_time_b, ((0, 0), (0, width - pmf_time_b.shape[1])))

    busy = services[w:last].reshape(n_batches, per).sum(axis=1) / span
    rho_hat, _, _ = _ci(busy)
    tf = np.stack([np.bincount(c, minlength=m.n_types) / per
                   for c in types[w:last].reshape(n_batches, per)])
    type_freq = tf.mean(axis=0)

    tavg_mean, tavg_hw, _ = _ci(pmf_time_b @ np.arange(width))
    trend = np.polyfit(np.arange(n_batches), xs.reshape(n_batches, per).mean(axis=1), 1)[0]
    return SimulationReport(
        num_departures=n, seed=int(seed),
        mean_depart=float(mean), mean_half_width=float(hw),
        var_depart=float(xs.var()),
        pmf_depart=pmf_dep_b.mean(axis=0), pmf_depart_batches=pmf_dep_b,
        pmf_time_avg=_normalise(pmf_time_b.mean(axis=0)), pmf_time_avg_batches=pmf_time_b,
        pmf_batch_arrival=_normalise(ba.mean(axis=0)), pmf_batch_arrival_batches=ba,
        mean_time_avg=float(tavg_mean), mean_time_avg_half_width=float(tavg_hw),
        type_freq=type_freq, type_freq_se=tf.std(axis=0, ddof=1) / np.sqrt(n_batches),
        rho_hat=float(rho_hat), rho_se=float(busy.std(ddof=1) / np.sqrt(n_batches)),
        unstable=bool(m.rho >= 1.0),
        diagnostics={"batch_trend": float(trend), "max_level": int(width - 1),
                     "warmup": w},
    )


def _normalise(p: np.ndarray) -> np.ndarray:
    return p / p.sum()


@dataclass(eq=False)
class TransientSimulation:
    mean: np.ndarray
    half_width: np.ndarray
    replications: int
    seed: int


def _one_replication(m: SemiMarkovModel, n: int, x0: int, start, rng) -> np.ndarray:
    types = type_chain(m, n + 1, rng, start)
    services = service_times(m, types, rng)
    bt, bs = _arrivals_until(m, max(n - x0, 0), 0.0, rng, rng, max(n, 16))
    cum = np.cumsum(bs)
    new = max(n - x0, 0)
    arrivals = np.concatenate([np.zeros(min(x0, n)), bt[np.searchsorted(cum, np.arange(1, new + 1))]])
    dep = departure_times(arrivals, services)
    while bt[-1] < dep[-1]:
        more_t, more_s = _arrivals_until(m, 0, dep[-1] - bt[-1], rng, rng, max(n, 16))
        bt = np.concatenate([bt, bt[-1] + more_t])
        bs = np.concatenate([bs, more_s])
    cum = np.concatenate(([0], np.cumsum(bs)))
    count = cum[np.searchsorted(bt, dep, side="right")]
    return np.concatenate(([x0], x0 + count - np.arange(1, n + 1)))


def run_transient(m: SemiMarkovModel, n: int, replications: int = 10_000, seed: int = 0,
                  x0: int = 0, start=None) -> TransientSimulation:
    """Mean queue length after departures ``0..n`` over independent replications.

    Replication ``r`` starts with ``x0`` waiting customers and uses its own
    spawned stream, so results do not depend on evaluation order.
    """
    children = np.random.SeedSequence(seed).spawn(replications)
    paths = np.stack([_one_replication(m, n, x0, start, _generator(c)) for c in children])
    mean = paths.mean(axis=0)
    se = paths.std(axis=0, ddof=1) / np.sqrt(replications)
    return TransientSimulation(mean=mean, half_width=stats.norm.ppf(0.975) * se,
                               replications=replications, seed=int(seed))
