import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hjdecay.almost_periodic import BaseGenerators, FrequencyVector, TrigPolynomial, eval_trig
from hjdecay.convex import AbsLinear, Conjugate, MaxAffine, Quadratic, coercify
from hjdecay.errors import PreconditionError, UnresolvedMinimizerError
from hjdecay.solver import (BoxGrid, PeriodicGrid, SolutionField, finite_difference_evolve, grid_tolerance,
                            hopf_lax_field, hopf_lax_point, hopf_lax_torus, lift_problem, lifted_field,
                            lifted_solve, solve_concave, solve_periodic)

from oracles import hopf_lax_brute

HALF_SQ = Conjugate(Quadratic(np.eye(1)))


def wave(*modes):
    u = TrigPolynomial.zero(1)
    for k, amp in modes:
        u = u + TrigPolynomial.sin(FrequencyVector.integer([k]), amp)
    return u


def test_point_examples():
    f = lambda y: 0.5 * np.asarray(y)[..., 0] ** 2
    assert hopf_lax_point(f, HALF_SQ, 1.0, [1.0]) == pytest.approx(0.25, abs=1e-12)
    u0 = wave((1, 0.5), (3, 0.2))
    x = np.array([0.123])
    assert abs(hopf_lax_point(u0, HALF_SQ, 1e-6, x) - eval_trig(u0, x[None])[0]) <= 1e-5
    assert hopf_lax_point(u0, HALF_SQ, 0.0, x) == eval_trig(u0, x[None])[0]
    c = TrigPolynomial.constant(1.7)
    assert hopf_lax_point(c, HALF_SQ, 3.0, x) == pytest.approx(1.7, abs=1e-15)


def test_point_matches_brute_force():
    u0 = wave((1, 0.4), (2, -0.3))
    f = lambda y: eval_trig(u0, np.asarray(y)[:, None])
    for t in (0.2, 1.0, 4.0):
        for x in (0.0, 0.31, 0.77):
            got = hopf_lax_point(u0, HALF_SQ, t, np.array([x]), h=1 / 1024)
            ref = hopf_lax_brute(f, lambda p: 0.5 * p ** 2, t, x, x - 10, x + 10, 20 * 2048 + 1)
            assert abs(got - ref) <= 2 * grid_tolerance(u0.lipschitz(), 1 / 1024, 1)


def test_point_periodic_in_x():
    u0 = wave((1, 0.5), (2, 0.3))
    conj = Conjugate(coercify(AbsLinear(np.array([1.0])), u0.lipschitz()))
    for x in (0.05, 0.4, 0.9):
        a = hopf_lax_point(u0, conj, 2.0, np.array([x]))
        b = hopf_lax_point(u0, conj, 2.0, np.array([x + 1.0]))
        assert abs(a - b) <= 1e-12


def test_unresolved_minimiser():
    # -y^2 + (x - y)^2 / (2t) is unbounded below for t > 1/2
    with pytest.raises(UnresolvedMinimizerError):
        hopf_lax_point(lambda y: -np.asarray(y)[..., 0] ** 2, HALF_SQ, 1.0, [0.0], h=1 / 64)
    with pytest.raises(PreconditionError):
        hopf_lax_point(wave((1, 1.0)), HALF_SQ, -1.0, [0.0])


def test_barriers_and_constant_data():
    u0 = wave((1, 0.5), (2, 0.3))
    grid = PeriodicGrid(1, 512)
    v0 = eval_trig(u0, grid.points())
    for t in (0.5, 5.0):
        F = hopf_lax_field(u0, HALF_SQ, t, grid)
        assert F.values.min() >= v0.min() - 1e-12   # inf u0 is a barrier since H* >= 0
        assert np.all(F.values <= v0 + 1e-12)       # y = x is admissible and H*(0) = 0
    C = hopf_lax_field(TrigPolynomial.constant(-0.3), HALF_SQ, 7.0, grid)
    assert np.max(np.abs(C.values + 0.3)) <= 1e-15


@pytest.mark.parametrize("t,s", [(0.5, 0.5), (1.0, 2.0)])
def test_semigroup_on_torus(t, s):
    u0 = wave((1, 0.5), (3, -0.25))
    grid = PeriodicGrid(1, 512)
    v0 = eval_trig(u0, grid.points())
    whole, _ = hopf_lax_torus(v0, HALF_SQ, t + s)
    half, _ = hopf_lax_torus(v0, HALF_SQ, s)
    twice, _ = hopf_lax_torus(half, HALF_SQ, t)
    tol = grid_tolerance(u0.lipschitz(), grid.spacing, 1)
    assert np.max(np.abs(whole - twice)) <= 3 * tol


def test_torus_path_matches_direct_on_box():
    u0 = wave((1, 0.5), (2, 0.3))
    grid = PeriodicGrid(1, 256)
    F = hopf_lax_field(u0, HALF_SQ, 1.5, grid)
    xs = grid.points()[::32, 0]
    for i, x in zip(range(0, 256, 32), xs):
        ref = hopf_lax_point(u0, HALF_SQ, 1.5, np.array([x]), h=1 / 256)
        assert abs(F.values[i] - ref) <= 1e-12


def test_box_grid_field():
    u0 = wave((1, 0.5))
    grid = BoxGrid([-0.5], [0.5], 5)
    F = hopf_lax_field(u0, HALF_SQ, 1.0, grid, h=1 / 256)
    assert F.values.shape == (5,)
    assert F.values[0] == pytest.approx(F.values[-1], abs=1e-12)


def test_solution_field_save(tmp_path):
    F = solve_periodic(wave((1, 0.5)), Quadratic(np.eye(1)), 1.0, count=16)
    F.save(tmp_path / "f")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x0,value" and len(lines) == 17
    side = json.loads((tmp_path / "f.json").read_text())
    assert side["provenance"] == "hopf_lax" and side["grid"]["count"] == 16
    assert side["tolerances"]["grid"] == F.tolerance
    with pytest.raises(PreconditionError):
        SolutionField(1.0, F.grid, F.values, "guess")


# -- monotone scheme --------------------------------------------------------

def test_fd_constant_and_cfl():
    grid = PeriodicGrid(1, 64)
    F = finite_difference_evolve(np.full(64, 2.5), Quadratic(np.eye(1)), 1.0, grid)
    assert np.max(np.abs(F.values - 2.5)) <= 1e-14
    for cfl in (0.0, 1.5):
        with pytest.raises(PreconditionError):
            finite_difference_evolve(np.zeros(64), Quadratic(np.eye(1)), 1.0, grid, cfl=cfl)


def test_fd_converges_to_hopf_lax():
    u0 = wave((1, 0.3))
    errs = []
    for n in (128, 256, 512):
        grid = PeriodicGrid(1, n)
        v0 = eval_trig(u0, grid.points())
        fd = finite_difference_evolve(v0, Quadratic(np.eye(1)), 0.5, grid)
        hl = hopf_lax_field(u0, HALF_SQ, 0.5, grid)
        errs.append(np.max(np.abs(fd.values - hl.values)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 0.01


def test_fd_tracks_traveling_wave():
    # H(v) = v on |v| <= 1/2: the wave translates rigidly
    H = MaxAffine(np.array([[1.0], [2.0], [0.0]]), np.array([0.0, -0.5, -0.5]))
    amp = 0.5 / (2 * np.pi)
    u0 = wave((1, amp))
    errs = []
    for n in (128, 512):
        grid = PeriodicGrid(1, n)
        x = grid.points()[..., 0]
        fd = finite_difference_evolve(eval_trig(u0, grid.points()), H, 0.25, grid)
        errs.append(np.max(np.abs(fd.values - amp * np.sin(2 * np.pi * (x - 0.25)))))
    assert errs[1] < errs[0] and errs[1] <= 0.1 * amp


# -- lifted and concave paths -----------------------------------------------

def test_lifted_identity_lambda_matches_torus_field():
    u0 = wave((1, 0.5), (2, 0.3))
    prob = lift_problem(u0, Quadratic(np.eye(1)), count=256)
    assert np.array_equal(prob.lift.Lambda, [[1.0]])
    F = lifted_field(prob, 2.0)
    xs = np.arange(0, 256, 17) / 256
    vals = lifted_solve(u0, Quadratic(np.eye(1)), None, 2.0, xs, problem=prob)
    assert np.max(np.abs(vals - F.values[np.arange(0, 256, 17)])) <= 1e-12
    direct = hopf_lax_field(u0, HALF_SQ, 2.0, PeriodicGrid(1, 256))
    assert np.max(np.abs(direct.values - F.values)) <= 1e-12


def test_lifted_solution_constant_along_kernel():
    base = BaseGenerators(("1", "sqrt2"))
    lam = FrequencyVector.parse(base, ["1", "sqrt2"])
    u0 = TrigPolynomial.sin(lam, 0.5)
    H = Quadratic(np.eye(2))
    prob = lift_problem(u0, H, count=512)
    assert prob.m == 1
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, size=(10, 2))
    k = np.array([np.sqrt(2.0), -1.0])
    a = lifted_solve(u0, H, None, 1.0, x, problem=prob)
    b = lifted_solve(u0, H, None, 1.0, x + 3.7 * k, problem=prob)
    assert np.max(np.abs(a - b)) <= 1e-12


def test_concave_linear_transport():
    u0 = wave((1, 0.5))
    H = MaxAffine(np.array([[1.0]]), np.array([0.0]))   # affine, hence concave: u_t + u_x = 0
    grid = PeriodicGrid(1, 1024)
    F = solve_concave(u0, H, 0.25, grid)
    x = grid.points()[..., 0]
    assert np.max(np.abs(F.values - eval_trig(u0, (x - 0.25)[:, None]))) <= F.tolerance
    assert F.meta["transformed"]


@settings(max_examples=10, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.1, 3.0))
def test_adding_constant_commutes(c, t):
    u0 = wave((1, 0.5), (2, 0.2))
    grid = PeriodicGrid(1, 128)
    a = hopf_lax_field(u0, HALF_SQ, t, grid).values
    b = hopf_lax_field(u0 + TrigPolynomial.constant(c), HALF_SQ, t, grid).values
    assert np.max(np.abs(b - a - c)) <= 1e-12
