import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from smq.distributions import (BatchDistribution, ServiceDistribution, batch_factorial_moment2,
                               batch_mean, batch_pgf, service_lst, service_moment)
from smq.errors import GeometricRadius, InvalidPmf, LstDomain, ModelError

CIRCLE = np.exp(2j * np.pi * np.arange(64) / 64)

BATCHES = [
    BatchDistribution.deterministic(1),
    BatchDistribution.deterministic(3),
    BatchDistribution.geometric(0.0),
    BatchDistribution.geometric(0.75),
    BatchDistribution.explicit([0.2, 0.0, 0.5, 0.3]),
]
SERVICES = [
    ServiceDistribution.exponential(2.0),
    ServiceDistribution.erlang(4, 3.0),
    ServiceDistribution.gamma(0.5, 0.7),
    ServiceDistribution.gamma(5.0, 2.0),
    ServiceDistribution.deterministic(1.3),
    ServiceDistribution.deterministic(0.0),
]


def test_geometric_normalised_and_mean():
    b = BatchDistribution.geometric(0.75)
    assert batch_pgf(b, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert batch_mean(b) == pytest.approx(4.0, rel=1e-15)


def test_geometric_pgf_matches_series():
    b = BatchDistribution.geometric(0.75)
    k = np.arange(1, 400)
    series = np.sum(0.75 ** (k - 1) * 0.25 * 0.5**k)
    assert batch_pgf(b, 0.5).real == pytest.approx(series, abs=1e-12)
    assert batch_pgf(b, 0.5).real == pytest.approx(0.2, abs=1e-15)


def test_geometric_radius():
    with pytest.raises(GeometricRadius):
        batch_pgf(BatchDistribution.geometric(0.5), 2.0)


@pytest.mark.parametrize("b", BATCHES, ids=lambda b: b.kind)
def test_batch_pgf_bounded_on_circle(b):
    assert np.abs(batch_pgf(b, CIRCLE)).max() <= 1 + 1e-10
    assert batch_pgf(b, 1.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("b", BATCHES, ids=lambda b: b.kind)
def test_factorial_moments_against_pmf(b):
    k = np.arange(2001)
    pmf = b.pmf_array(2000)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert batch_mean(b) == pytest.approx(k @ pmf, rel=1e-10)
    assert batch_factorial_moment2(b) == pytest.approx((k * (k - 1)) @ pmf, rel=1e-10, abs=1e-14)
    assert b.factorial_moment(3) == pytest.approx((k * (k - 1) * (k - 2)) @ pmf, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("pmf", [[0.5, 0.6], [-0.1, 1.1], [], [0.5, 0.5 + 1e-9]])
def test_invalid_explicit_pmf(pmf):
    with pytest.raises(InvalidPmf):
        BatchDistribution.explicit(pmf)


def test_invalid_batch_parameters():
    with pytest.raises(InvalidPmf):
        BatchDistribution.geometric(1.0)
    with pytest.raises(InvalidPmf):
        BatchDistribution.deterministic(0)
    with pytest.raises(InvalidPmf):
        BatchDistribution.from_dict({"kind": "poisson"})


@pytest.mark.parametrize("d", SERVICES, ids=lambda d: f"{d.kind}{d.shape}")
def test_lst_at_zero_and_modulus(d):
    assert service_lst(d, 0.0) == pytest.approx(1.0, abs=1e-12)
    s = np.linspace(0, 5, 11)[:, None] + 1j * np.linspace(-5, 5, 11)[None, :]
    assert np.abs(service_lst(d, s)).max() <= 1 + 1e-12


@pytest.mark.parametrize("d", SERVICES, ids=lambda d: f"{d.kind}{d.shape}")
def test_lst_derivative_is_minus_mean(d):
    h = 1e-5
    d1 = (service_lst(d, h) - service_lst(d, -h)).real / (2 * h)
    d2 = (service_lst(d, h / 2) - service_lst(d, -h / 2)).real / h
    richardson = (4 * d2 - d1) / 3
    assert richardson == pytest.approx(-service_moment(d, 1), abs=1e-6)


def test_moments_match_scipy():
    g = ServiceDistribution.gamma(0.5, 0.7)
    ref = stats.gamma(a=0.5, scale=1 / 0.7)
    for k in (1, 2, 3):
        assert service_moment(g, k) == pytest.approx(ref.moment(k), rel=1e-12)
    e = ServiceDistribution.erlang(4, 3.0)
    ref = stats.gamma(a=4, scale=1 / 3.0)
    for k in (1, 2, 3):
        assert service_moment(e, k) == pytest.approx(ref.moment(k), rel=1e-12)


def test_erlang_one_is_exponential():
    rng = np.random.default_rng(0)
    s = rng.uniform(0, 10, 100) + 1j * rng.uniform(-10, 10, 100)
    a = service_lst(ServiceDistribution.erlang(1, 1.7), s)
    b = service_lst(ServiceDistribution.exponential(1.7), s)
    assert np.abs(a - b).max() <= 1e-12


def test_gamma_shape_one_is_exponential():
    assert service_lst(ServiceDistribution.gamma(1.0, 2.0), 1.0) == pytest.approx(
        service_lst(ServiceDistribution.exponential(2.0), 1.0), abs=1e-15)


def test_erlang_four_phase_form():
    lam, mu = 1.0, 2.5
    b = BatchDistribution.geometric(0.75)
    z = np.array([0.3, -0.4 + 0.2j])
    s = lam * (1 - batch_pgf(b, z))
    expected = (mu / (lam * (1 - batch_pgf(b, z)) + mu)) ** 4
    assert np.allclose(service_lst(ServiceDistribution.erlang(4, mu), s), expected, atol=1e-15)


def test_deterministic_zero_duration():
    assert service_lst(ServiceDistribution.deterministic(0.0), 3 + 4j) == 1.0


def test_lst_domain():
    with pytest.raises(LstDomain):
        service_lst(ServiceDistribution.exponential(1.0), -1.5)
    with pytest.raises(ModelError):
        ServiceDistribution.exponential(-1.0)
    with pytest.raises(ModelError):
        ServiceDistribution.gamma(0.0, 1.0)


@pytest.mark.parametrize("d", SERVICES + BATCHES, ids=lambda d: d.kind)
def test_dict_round_trip(d):
    assert type(d).from_dict(d.to_dict()) == d


def test_with_mean():
    for fam in ({"kind": "exponential"}, {"kind": "erlang", "phases": 4},
                {"kind": "gamma", "shape": 0.5}, {"kind": "deterministic"}):
        assert ServiceDistribution.with_mean(fam, 1.7).mean == pytest.approx(1.7, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(0.0, 0.95), x=st.floats(-1.0, 1.0), y=st.floats(-1.0, 1.0))
def test_geometric_pgf_in_disc(p, x, y):
    z = complex(x, y)
    if abs(z) > 1:
        z /= abs(z)
    assert abs(batch_pgf(BatchDistribution.geometric(p), z)) <= 1 + 1e-12
