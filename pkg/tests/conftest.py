import numpy as np
import pytest

from smq.config import build_model
from smq.distributions import BatchDistribution, ServiceDistribution
from smq.model import SemiMarkovModel
from smq.presets import example_model

CORPUS_SIZE = 60
CORPUS_TYPES = (1, 2, 3, 4, 6)


def _random_service(rng, mean):
    kind = rng.choice(["exponential", "erlang", "gamma", "deterministic"])
    if kind == "exponential":
        return ServiceDistribution.exponential(1.0 / mean)
    if kind == "erlang":
        k = int(rng.integers(1, 5))
        return ServiceDistribution.erlang(k, k / mean)
    if kind == "gamma":
        a = float(rng.uniform(0.5, 5.0))
        return ServiceDistribution.gamma(a, a / mean)
    return ServiceDistribution.deterministic(mean)


def _random_batch(rng):
    kind = rng.integers(3)
    if kind == 0:
        return BatchDistribution.deterministic(int(rng.integers(1, 4)))
    if kind == 1:
        return BatchDistribution.geometric(float(rng.uniform(0.0, 0.6)))
    w = rng.dirichlet(np.ones(int(rng.integers(2, 6))))
    w[-1] = 1.0 - w[:-1].sum()
    return BatchDistribution.explicit(w)


def random_model(seed: int, n_types: int) -> SemiMarkovModel:
    """A stable model with load drawn from [0.2, 0.9]."""
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n_types), size=n_types)
    # sparsify while keeping a cycle through all types, hence irreducibility
    mask = rng.random((n_types, n_types)) < 0.3
    for i in range(n_types):
        mask[i, (i + 1) % n_types] = False
    P[mask] = 0.0
    P /= P.sum(axis=1, keepdims=True)
    means = rng.uniform(0.2, 2.0, (n_types, n_types))
    service = [[_random_service(rng, means[i, j]) for j in range(n_types)] for i in range(n_types)]
    batch = _random_batch(rng)
    base = SemiMarkovModel(lam=1.0, P=P, service=service, batch=batch)
    lam = rng.uniform(0.2, 0.9) / base.rho
    return SemiMarkovModel(lam=lam, P=P, service=service, batch=batch)


def corpus():
    return [random_model(1000 + k, CORPUS_TYPES[k % len(CORPUS_TYPES)]) for k in range(CORPUS_SIZE)]


@pytest.fixture(scope="session")
def model_corpus():
    return corpus()


@pytest.fixture(scope="session")
def ex1():
    return {q: build_model(example_model(1, q)) for q in (0.1, 0.3, 0.5, 0.7, 0.9)}


@pytest.fixture(scope="session")
def ex2_p01():
    return build_model(example_model(2, 0.1))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
