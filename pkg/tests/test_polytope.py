import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hjdecay.errors import PreconditionError
from hjdecay.polytope import (Polytope, PolarSetQuery, bipolar_check, minkowski_sum, polar_membership,
                              support_function)


def grid(r, n, dim):
    x = np.linspace(-r, r, n)
    return np.stack(np.meshgrid(*[x] * dim, indexing="ij"), axis=-1).reshape(-1, dim)


def test_support_examples():
    seg = Polytope.segment([-1.0, 0.0], [1.0, 0.0])
    assert support_function(seg, [2.0, 5.0]) == pytest.approx(2.0)
    assert support_function(Polytope.point([0.0, 0.0]), [1.0, -1.0]) == 0.0
    tri = Polytope(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]))
    assert support_function(tri, [1.0, 1.0]) == pytest.approx(2.0)


def test_polar_membership_examples():
    seg = PolarSetQuery(Polytope.segment([-1.0], [1.0]), 0.5)
    assert polar_membership(seg, [0.5])
    assert not polar_membership(seg, [0.6])
    origin = PolarSetQuery(Polytope.point([0.0, 0.0]), 0.1)
    assert polar_membership(origin, [1e6, -1e6])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 10.0), st.floats(0.1, 10.0))
def test_polar_scaling(seed, eps, lam):
    rng = np.random.default_rng(seed)
    P = Polytope(rng.normal(size=(4, 2)))
    q = rng.normal(size=2)
    # keep away from the boundary, where rounding decides
    s = support_function(P, q)
    if abs(s - eps) < 1e-6 * eps:
        return
    a = PolarSetQuery(P, eps).contains(q)
    b = PolarSetQuery(P, lam * eps).contains(lam * q)
    assert a == b


def test_from_halfspaces_box():
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    P = Polytope.from_halfspaces(A, np.array([1.0, 0.0, 2.0, 0.0]))
    assert sorted(map(tuple, np.round(P.vertices, 12))) == [(0, 0), (0, 2), (1, 0), (1, 2)]
    with pytest.raises(PreconditionError):
        Polytope.from_halfspaces(A[:2], np.array([1.0, 0.0]))


def test_min_norm_point_and_distance():
    seg = Polytope.segment([1.0, -1.0], [1.0, 1.0])
    point, weights = seg.min_norm_point()
    assert np.allclose(point, [1.0, 0.0]) and np.allclose(weights, [0.5, 0.5])
    assert seg.distance(np.array([3.0, 0.0])) == pytest.approx(2.0)
    assert seg.contains(np.array([1.0, 0.5]))
    assert not seg.contains(np.array([1.1, 0.5]))


def test_minkowski_sum_support_additive():
    rng = np.random.default_rng(3)
    A, B = Polytope(rng.normal(size=(5, 2))), Polytope(rng.normal(size=(3, 2)))
    S = minkowski_sum(A, B)
    for q in rng.normal(size=(10, 2)):
        assert support_function(S, q) == pytest.approx(support_function(A, q) + support_function(B, q))


@pytest.mark.parametrize("base", [
    Polytope.segment([-1.0], [1.0]),
    Polytope.point([0.0, 0.0]),
    Polytope(np.array([[-1.0, -1.0], [2.0, 0.0], [0.0, 1.5]])),
    Polytope.segment([-1.0, -0.5], [1.0, 0.5]),
])
def test_bipolar(base):
    probes = grid(3.0, 41 if base.dim == 2 else 401, base.dim)
    rep = bipolar_check(base, 0.25, probes)
    assert rep.ok, rep
    assert rep.max_outside_distance <= rep.tolerance
    assert rep.n_polar_samples > 0


def test_bipolar_requires_origin():
    with pytest.raises(PreconditionError):
        bipolar_check(Polytope.segment([1.0], [2.0]), 0.1, grid(2.0, 11, 1))
