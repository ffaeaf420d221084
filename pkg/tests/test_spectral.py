import numpy as np
import pytest
from scipy.optimize import brentq

from smq.config import build_model
from smq.distributions import BatchDistribution, ServiceDistribution
from smq.errors import Unstable
from smq.model import SemiMarkovModel
from smq.presets import example_model
from smq.spectral import (STATIONARY_RADIUS, count_zeros, det_m, dominance_margin,
                          find_roots)

LADDER = (0.0, 0.25, 0.5, 0.75, 0.99)


def test_det_at_one_vanishes(ex2_p01):
    assert abs(det_m(ex2_p01, 1.0, 1.0)) <= 1e-14


def test_det_at_r_zero(model_corpus):
    z = np.array([0.3 + 0.1j, -0.7])
    for m in model_corpus[:10]:
        assert np.allclose(det_m(m, 0.0, z), z**m.n_types, atol=1e-14)


def test_det_matches_cofactor(ex2_p01):
    A = ex2_p01.a_matrix(0.5)
    expected = (0.5 - A[0, 0]) * (0.5 - A[1, 1]) - A[0, 1] * A[1, 0]
    assert abs(det_m(ex2_p01, 1.0, 0.5) - expected) <= 1e-12


def test_count_zeros_examples(ex2_p01):
    assert count_zeros(ex2_p01, 0.0, 0.99) == 2
    assert count_zeros(ex2_p01, 0.9, 0.999) == 2
    assert count_zeros(ex2_p01, 1.0, STATIONARY_RADIUS) == 1


def test_count_zeros_ladder(model_corpus):
    for m in model_corpus[:15]:
        for r in LADDER:
            assert count_zeros(m, r, 1 - 1e-8) == m.n_types


def test_md1_no_interior_roots():
    m = SemiMarkovModel(1.0, [[1.0]], [[ServiceDistribution.deterministic(0.6)]],
                        BatchDistribution.deterministic(1))
    rs = find_roots(m, 1.0)
    assert rs.interior.size == 0 and rs.boundary_root_at_one


def test_example1_root_against_bisection():
    m = build_model(example_model(1, 0.5))
    rs = find_roots(m, 1.0)
    assert rs.interior.size == 1
    root = rs.interior[0]
    assert abs(root.imag) <= 1e-12 and 0 <= root.real < 1

    def cofactor_det(x):
        A = m.a_matrix(x).real
        return (x - A[0, 0]) * (x - A[1, 1]) - A[0, 1] * A[1, 0]

    # the root sits at the origin for this symmetric point; bracket it in [-0.5, 0.5]
    ref = brentq(cofactor_det, -0.5, 0.5, xtol=1e-15)
    assert root.real == pytest.approx(ref, abs=1e-9)


def test_example1_root_off_symmetry_against_bisection():
    m = build_model(example_model(1, 0.3))
    root = find_roots(m, 1.0).interior[0]

    def f(x):
        A = m.a_matrix(x).real
        return (x - A[..., 0, 0]) * (x - A[..., 1, 1]) - A[..., 0, 1] * A[..., 1, 0]

    xs = np.linspace(-0.999, 0.999, 2001)
    vals = f(xs)
    k = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    refs = [brentq(f, xs[i], xs[i + 1], xtol=1e-15) for i in k]
    assert min(abs(root - r) for r in refs) <= 1e-9


def test_example2_transient_roots_grid_scan(ex2_p01):
    rs = find_roots(ex2_p01, 0.5)
    assert rs.interior.size == 2 and not rs.boundary_root_at_one
    assert np.allclose(np.sort_complex(rs.interior), np.sort_complex(rs.interior.conj()), atol=1e-9)
    # coarse grid scan of |det| over the disc locates the same zeros
    x = np.linspace(-1, 1, 401)
    Z = x[None, :] + 1j * x[:, None]
    inside = np.abs(Z) < 1
    val = np.where(inside, np.abs(det_m(ex2_p01, 0.5, np.where(inside, Z, 0))), np.inf)
    for root in rs.interior:
        near = np.abs(Z - root) < 0.02
        k = np.argmin(np.where(near, val, np.inf))
        local = Z.flat[k]
        assert abs(local - root) <= 0.01
        assert val.flat[k] <= np.abs(det_m(ex2_p01, 0.5, Z[inside])).max()


def test_root_set_invariants(model_corpus):
    for m in model_corpus:
        for r in (0.5, 1.0):
            rs = find_roots(m, r)
            n = m.n_types
            assert rs.interior.size == (n - 1 if r == 1.0 else n)
            assert rs.boundary_root_at_one == (r == 1.0)
            assert np.all(np.abs(rs.interior) < 1)
            assert rs.residual <= 1e-9 * max(1.0, rs.scale)
            conj = np.sort_complex(rs.interior.conj())
            assert np.abs(np.sort_complex(rs.interior) - conj).max(initial=0) <= 1e-9


def test_dominance_on_circle(model_corpus):
    for m in model_corpus[:20]:
        for r in (0.25, 0.5, 0.75, 0.99):
            assert dominance_margin(m, r) > 0


def test_roots_move_continuously(ex2_p01):
    prev = find_roots(ex2_p01, 0.95).interior
    for r in np.arange(0.96, 1.0, 0.01):
        cur = find_roots(ex2_p01, float(r)).interior
        dist = np.abs(cur[:, None] - prev[None, :])
        assert dist.min(axis=1).max() < 0.2
        prev = cur


def test_positive_slope_at_one(model_corpus):
    h = 1e-6
    for m in model_corpus[:20]:
        slope = (det_m(m, 1.0, 1.0) - det_m(m, 1.0, 1.0 - h)).real / h
        assert slope > 0


def test_unstable_rejected(ex2_p01):
    d = ex2_p01.to_dict()
    d["lambda"] = 2.0
    with pytest.raises(Unstable):
        find_roots(SemiMarkovModel.from_dict(d), 1.0)
