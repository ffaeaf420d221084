import numpy as np
import pytest
from scipy import stats

from smq.distributions import BatchDistribution, ServiceDistribution
from smq.errors import InvalidModel, TruncationTooSmall
from smq.model import SemiMarkovModel, arrival_count_pmf, arrival_count_pmfs, model_moments
from smq.config import build_model
from smq.presets import example_model, var_a_example1


def single(service, batch=BatchDistribution.deterministic(1), lam=1.0):
    return SemiMarkovModel(lam=lam, P=[[1.0]], service=[[service]], batch=batch)


def test_a_at_one_is_p(model_corpus):
    for m in model_corpus[:20]:
        assert np.abs(m.a_matrix(1.0) - m.P).max() <= 1e-14


def test_row_sums_real_positive_at_most_one(model_corpus):
    z = np.linspace(0.05, 0.95, 10)
    for m in model_corpus[:20]:
        rows = m.a_matrix(z).sum(axis=-1)
        assert np.abs(rows.imag).max() <= 1e-14
        assert rows.real.min() > 0 and rows.real.max() <= 1 + 1e-14


def test_derivative_at_one_matches_alpha(model_corpus):
    # one-sided Richardson on A(z) approaching 1 from below
    for m in model_corpus[:20]:
        hs = np.array([1e-3, 5e-4, 2.5e-4])
        d = [((m.a_matrix(1.0) - m.a_matrix(1.0 - h)) / h).real for h in hs]
        r1 = [2 * d[k + 1] - d[k] for k in range(2)]
        est = (4 * r1[1] - r1[0]) / 3
        assert np.abs(est - m.moments.alpha).max() <= 1e-6 * max(1.0, np.abs(m.moments.alpha).max())


def test_pi_by_power_iteration(model_corpus):
    for m in model_corpus[:20]:
        v = np.full(m.n_types, 1.0 / m.n_types)
        # lazy chain avoids periodicity of sparse P
        lazy = 0.5 * (np.eye(m.n_types) + m.P)
        for _ in range(10_000):
            v = v @ lazy
        pi = m.moments.pi
        assert np.abs(v - pi).max() <= 1e-10
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.abs(pi @ m.P - pi).max() <= 1e-10


def test_rho_and_var_a_consistency(model_corpus):
    for m in model_corpus:
        mm = model_moments(m)
        assert mm.rho == pytest.approx(mm.pi @ mm.alpha_row, abs=1e-10)
        assert mm.var_a >= 0


def test_example1_moments():
    for q in (0.1, 0.3, 0.5, 0.7, 0.9):
        m = build_model(example_model(1, q))
        assert np.allclose(m.moments.pi, [0.5, 0.5], atol=1e-12)
        assert m.rho == pytest.approx(0.75, abs=1e-12)
        assert m.moments.var_a == pytest.approx(var_a_example1(q), rel=1e-9)
    assert var_a_example1(0.5) == pytest.approx(75 / 16 + 117 / 128, rel=1e-15)


def test_example1_transform_form():
    m = build_model(example_model(1, 0.3))
    z = np.array([0.2, 0.6, 0.95])
    s = 1.0 * (1 - z / (4 - 3 * z))
    phases = [1, 4]
    for i in range(2):
        for j in range(2):
            mean = 0.375 / (m.P[i, j] * 4.0)
            mu = phases[j] / mean
            expected = m.P[i, j] * (mu / (s + mu)) ** phases[j]
            assert np.allclose(m.a_matrix(z)[:, i, j], expected, rtol=1e-13)


def test_example3_moments():
    m = build_model(example_model(3))
    assert np.allclose(m.moments.pi, [7 / 16, 9 / 16], atol=1e-12)
    assert np.allclose(m.moments.alpha_row, [0.3, 1.1], atol=1e-12)
    assert m.P[1, 0] == pytest.approx(7 / 9 * m.P[0, 1], rel=1e-12)


def test_md1_transform_is_poisson():
    m = single(ServiceDistribution.deterministic(0.8), lam=1.5)
    z = np.array([0.3, -0.5 + 0.4j])
    k = np.arange(60)
    series = (stats.poisson.pmf(k, 1.2)[None, :] * z[:, None] ** k).sum(axis=1)
    assert np.allclose(m.a_matrix(z)[:, 0, 0], series, atol=1e-12)


def test_mm1_arrival_pmf_is_geometric():
    lam, mu = 0.7, 1.3
    m = single(ServiceDistribution.exponential(mu), lam=lam)
    k = np.arange(201)
    pmf = arrival_count_pmf(m, 0, 0, 200)
    ref = (lam / (lam + mu)) ** k * (mu / (lam + mu))
    assert np.abs(pmf - ref).max() <= 1e-10


def test_zero_service_pmf():
    pmf = arrival_count_pmf(single(ServiceDistribution.deterministic(0.0)), 0, 0, 10)
    assert pmf[0] == pytest.approx(1.0, abs=1e-14)
    assert np.abs(pmf[1:]).max() <= 1e-14


def test_example2_pmfs_normalised(ex2_p01):
    pmfs = arrival_count_pmfs(ex2_p01, 2048)
    assert np.abs(pmfs.sum(axis=-1) - ex2_p01.P).max() <= 1e-9
    assert pmfs.min() >= 0


def test_truncation_too_small(ex2_p01):
    with pytest.raises(TruncationTooSmall):
        arrival_count_pmfs(ex2_p01, 4)


@pytest.mark.parametrize("P", [[[1.0, 0.0], [0.0, 1.0]], [[0.5, 0.6], [0.5, 0.5]],
                               [[1.2, -0.2], [0.5, 0.5]]])
def test_invalid_transition(P):
    e = ServiceDistribution.exponential(1.0)
    with pytest.raises(InvalidModel):
        SemiMarkovModel(1.0, P, [[e, e], [e, e]], BatchDistribution.deterministic(1))


def test_invalid_rate_and_shape():
    e = ServiceDistribution.exponential(1.0)
    with pytest.raises(InvalidModel):
        single(e, lam=0.0)
    with pytest.raises(InvalidModel):
        SemiMarkovModel(1.0, [[1.0]], [[e, e]], BatchDistribution.deterministic(1))


def test_dict_round_trip(model_corpus):
    for m in model_corpus[:10]:
        m2 = SemiMarkovModel.from_dict(m.to_dict())
        z = np.array([0.3, 0.7j])
        assert np.array_equal(m.a_matrix(z), m2.a_matrix(z))
