import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hjdecay.errors import NonConvexInputError, PreconditionError
from hjdecay.legendre import (SampledConvex, brute_force_conjugate, convexify, discrete_conjugate,
                              legendre_1d, legendre_nd)

from oracles import brute_conjugate_1d, brute_conjugate_nd


def half_square_1d(n=4001, r=4.0):
    return SampledConvex.from_function(lambda v: 0.5 * v[..., 0] ** 2, [(-r, r, n)])


def test_half_square_at_one():
    g = legendre_1d(half_square_1d(), p_grid=(-2.0, 2.0, 401))
    p = g.points()[:, 0]
    i = int(np.argmin(np.abs(p - 1.0)))
    assert g.values[i] == pytest.approx(0.5, abs=1e-6)
    assert not g.boundary_attained[i]


def test_abs_inside_and_boundary_flag():
    f = SampledConvex.from_function(lambda v: np.abs(v[..., 0]), [(-4.0, 4.0, 801)])
    g = legendre_1d(f, p_grid=(-1.5, 1.5, 7))   # p = -1.5, -1, ..., 1.5
    p = g.points()[:, 0]
    vals = dict(zip(np.round(p, 12), g.values))
    assert vals[0.5] == pytest.approx(0.0, abs=1e-12)
    flags = dict(zip(np.round(p, 12), g.boundary_attained))
    assert flags[1.5] and flags[-1.5]
    assert not flags[0.5]
    # finite grid value at the flagged point: (1.5 - 1) * 4
    assert vals[1.5] == pytest.approx(2.0)


def test_nd_examples():
    f = SampledConvex.from_function(lambda v: 0.5 * (v ** 2).sum(-1), [(-4.0, 4.0, 161)] * 2)
    g = legendre_nd(f, p_grid=[(-2.0, 2.0, 41)] * 2)
    i = 30   # p = 1.0 on both axes
    assert g.values[i, i] == pytest.approx(1.0, abs=1e-12)
    f1 = SampledConvex.from_function(lambda v: np.abs(v).sum(-1), [(-2.0, 2.0, 81)] * 2)
    g1 = legendre_nd(f1, p_grid=[(-0.7, 0.7, 15)] * 2)
    pts = g1.points()
    j = np.argmin(np.abs(pts - np.array([0.3, -0.7])).sum(-1).reshape(-1))
    assert g1.values.reshape(-1)[j] == pytest.approx(0.0, abs=1e-12)


def test_non_convex_rejected_with_index():
    v = np.linspace(-1, 1, 21)
    f = v ** 2
    f[7] += 0.5
    with pytest.raises(NonConvexInputError) as info:
        legendre_1d(SampledConvex([(-1.0, 1.0, 21)], f))
    assert info.value.index[0] in (6, 7, 8)
    assert info.value.axis == 0


def test_non_convex_nd_reports_axis():
    F = SampledConvex.from_function(lambda v: (v ** 2).sum(-1), [(-1.0, 1.0, 11)] * 2)
    vals = F.values.copy()
    vals[5, 5] += 0.3
    with pytest.raises(NonConvexInputError) as info:
        legendre_nd(SampledConvex(F.axes, vals))
    assert info.value.index == (5, 5)


def test_check_false_uses_convex_envelope():
    v = np.linspace(-1, 1, 41)
    f = v ** 2 + 0.2 * np.cos(9 * v)
    raw = SampledConvex([(-1.0, 1.0, 41)], f)
    env = convexify(raw)
    p = (-2.0, 2.0, 21)
    a = legendre_1d(raw, p_grid=p, check=False)
    b = legendre_1d(env, p_grid=p)
    assert np.allclose(a.values, b.values, atol=1e-12)
    assert np.all(env.values <= f + 1e-12)


def test_bad_grids_rejected():
    with pytest.raises(PreconditionError):
        SampledConvex([(-1.0, 1.0, 2)], np.zeros(2))
    with pytest.raises(PreconditionError):
        SampledConvex([(1.0, 1.0, 5)], np.zeros(5))
    with pytest.raises(PreconditionError):
        SampledConvex([(-1.0, 1.0, 5)], np.zeros(6))
    f4 = SampledConvex.from_function(lambda v: (v ** 2).sum(-1), [(-1.0, 1.0, 3)] * 4)
    with pytest.raises(PreconditionError):
        legendre_nd(f4)


def test_discrete_conjugate_argmax():
    v = np.linspace(-2, 2, 41)
    vals, arg = discrete_conjugate(v, 0.5 * v ** 2, np.array([0.0, 1.0, 5.0]))
    assert list(arg[:2]) == [20, 30]
    assert arg[2] == 40
    assert vals[1] == pytest.approx(0.5)


def test_save_load_round_trip(tmp_path):
    f = SampledConvex.from_function(lambda v: np.abs(v[..., 0]) + 0.1 * v[..., 1] ** 2,
                                    [(-1.0, 1.0, 7), (-2.0, 2.0, 5)])
    g = legendre_nd(f, p_grid=[(-2.0, 2.0, 9), (-1.0, 1.0, 5)])
    g.save(tmp_path / "conj")
    h = SampledConvex.load(tmp_path / "conj")
    assert h.axes == g.axes
    assert np.array_equal(h.domain_mask, g.domain_mask)
    assert np.array_equal(h.values[h.domain_mask], g.values[g.domain_mask])
    assert np.array_equal(h.boundary_attained, g.boundary_attained)


def test_save_load_keeps_infinite_entries(tmp_path):
    vals = np.array([np.inf, 1.0, 0.0, 1.0, np.inf])
    f = SampledConvex([(-2.0, 2.0, 5)], vals, np.isfinite(vals))
    f.save(tmp_path / "f")
    h = SampledConvex.load(tmp_path / "f")
    assert np.array_equal(h.values, vals)


def test_interpolate_outside_is_inf():
    f = half_square_1d(41, 1.0)
    assert f.interpolate(np.array([[0.5]]))[0] == pytest.approx(0.125, abs=1e-3)
    assert f.interpolate(np.array([[2.0]]))[0] == np.inf


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=30, unique=True),
       st.floats(-3, 3))
def test_random_piecewise_linear_1d_matches_brute_force(slopes, c):
    s = np.sort(np.array(slopes))
    n = len(s) + 1
    v = np.linspace(-1.0, 1.0, n)
    f = np.concatenate([[c], c + np.cumsum(s * (v[1] - v[0]))])
    F = SampledConvex([(-1.0, 1.0, n)], f)
    g = legendre_1d(F)
    ref = brute_conjugate_1d(v, f, g.points()[:, 0])
    assert np.allclose(g.values, ref, rtol=0, atol=1e-12 * max(1.0, np.abs(ref).max()))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_random_2d_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2))
    Q = A @ A.T
    c = rng.normal(size=2)
    f = SampledConvex.from_function(
        lambda v: 0.5 * np.einsum("...i,ij,...j", v, Q, v) + np.abs(v - c).sum(-1), [(-2.0, 2.0, 17)] * 2)
    g = legendre_nd(f)
    ref = brute_conjugate_nd(f.points().reshape(-1, 2), f.values.reshape(-1), g.points().reshape(-1, 2))
    assert np.allclose(np.asarray(g.values).reshape(-1), ref, atol=1e-12 * max(1.0, np.abs(ref).max()))
    assert np.allclose(brute_force_conjugate(f, g.points().reshape(-1, 2)), ref)


def test_3d_matches_brute_force():
    f = SampledConvex.from_function(lambda v: (v ** 2).sum(-1) + np.abs(v[..., 0] - 0.2),
                                    [(-1.0, 1.0, 9)] * 3)
    g = legendre_nd(f, p_grid=[(-3.0, 3.0, 7)] * 3)
    ref = brute_conjugate_nd(f.points().reshape(-1, 3), f.values.reshape(-1), g.points().reshape(-1, 3))
    assert np.allclose(np.asarray(g.values).reshape(-1), ref, atol=1e-12)
