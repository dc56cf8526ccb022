from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hjdecay.almost_periodic import (BaseGenerators, FrequencyVector, TrigPolynomial, bohr_coefficient_numeric,
                                     bohr_convergence_report, build_lift, cube_infimum, eval_trig,
                                     lift_data, lifted_hamiltonian, mean_value, module_basis,
                                     standard_module, torus_maximum, torus_minimum)
from hjdecay.convex import AbsLinear, Hinge, MaxAffine, Quadratic
from hjdecay.errors import PreconditionError

from oracles import rational_gcd

QP = BaseGenerators(("1", "sqrt2"))
SQRT2 = np.sqrt(2.0)


def fv(*coords, base=QP):
    return FrequencyVector.parse(base, coords)


def test_eval_examples():
    u = TrigPolynomial.sin(FrequencyVector.integer([1]))
    assert eval_trig(u, np.array([[0.25]]))[0] == pytest.approx(1.0)
    w = TrigPolynomial.sin(fv("1")) + TrigPolynomial.sin(fv("sqrt2"))
    assert eval_trig(w, np.array([[0.0]]))[0] == pytest.approx(0.0, abs=1e-15)
    x = 0.3
    assert eval_trig(w, np.array([[x]]))[0] == pytest.approx(np.sin(2 * np.pi * x) + np.sin(2 * np.pi * SQRT2 * x))


def test_real_valued_and_gradient():
    u = TrigPolynomial.cos(FrequencyVector.integer([1, 2]), 0.7) + TrigPolynomial.sin(FrequencyVector.integer([0, 1]), -1.2)
    x = np.random.default_rng(0).uniform(-3, 3, size=(20, 2))
    val, imag = eval_trig(u, x, return_imag=True)
    assert np.max(np.abs(imag)) <= 1e-12
    h = 1e-6
    fd = np.stack([(eval_trig(u, x + h * e) - eval_trig(u, x - h * e)) / (2 * h) for e in np.eye(2)], -1)
    assert np.allclose(u.gradient(x), fd, atol=1e-6)
    assert np.max(np.abs(u.gradient(x))) <= u.lipschitz() + 1e-12


def test_mean_value_exact():
    u = TrigPolynomial.constant(0.3) + TrigPolynomial.sin(FrequencyVector.integer([1]))
    assert mean_value(u) == 0.3
    assert mean_value(TrigPolynomial.sin(fv("sqrt2"))) == 0.0


def test_bohr_coefficient_converges():
    lam = fv("sqrt2")
    u = TrigPolynomial.cos(lam, 2.0) + TrigPolynomial.sin(fv("1"))
    rows = bohr_convergence_report(u, lam, radii=(10, 100, 1000))
    errs = [r[2] for r in rows]
    assert errs[-1] <= 1e-2
    assert errs[-1] <= errs[0] + 1e-15
    # stored coefficient of cos: amplitude / 2 at +lam
    assert bohr_coefficient_numeric(u, lam, 1000).real == pytest.approx(1.0, abs=1e-2)
    assert abs(bohr_coefficient_numeric(u, fv("1/3"), 1000)) <= 1e-2


def test_frequency_parse_and_arithmetic():
    a = fv("1/2 + 3*sqrt2")
    assert a.coeffs == ((Fraction(1, 2), Fraction(3)),)
    b = fv("-sqrt2/4")
    s = a + b
    assert s.coeffs == ((Fraction(1, 2), Fraction(11, 4)),)
    assert (a - a).is_zero()
    assert (a * 2).coeffs == ((Fraction(1), Fraction(6)),)
    assert a.shadow()[0] == pytest.approx(0.5 + 3 * SQRT2)
    with pytest.raises(PreconditionError):
        fv("sqrt3")
    with pytest.raises(PreconditionError):
        fv("sqrt2*sqrt2")


def test_module_basis_examples():
    m = module_basis([fv("1"), fv("sqrt2")])
    assert m.rank == 2
    m = module_basis([fv("1/2"), fv("1/3")])
    assert m.rank == 1
    assert m.basis[0].coeffs[0][0] == Fraction(1, 6)
    m = module_basis([fv("2"), fv("4"), fv("1 + sqrt2"), fv("3 + sqrt2")])
    assert m.rank == 2
    for g in m.generators:
        assert m.combination(m.coordinates[g]) == g
    assert not m.contains(fv("1"))
    assert m.contains(fv("5 + sqrt2"))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-40, 40), st.integers(1, 12)), min_size=1, max_size=5))
def test_rank_one_module_matches_gcd_oracle(fracs):
    vals = [Fraction(a, b) for a, b in fracs if a != 0]
    if not vals:
        return
    base = BaseGenerators(("1",))
    m = module_basis([FrequencyVector(base, [[v]]) for v in vals])
    assert m.rank == 1
    assert abs(m.basis[0].coeffs[0][0]) == rational_gcd(vals)


def test_standard_module_is_identity():
    m = standard_module(3)
    assert np.array_equal(m.Lambda(), np.eye(3))


def test_build_lift_examples():
    u = TrigPolynomial.sin(fv("1")) + TrigPolynomial.sin(fv("sqrt2"))
    lift = lift_data(u)
    assert lift.m == 2 and lift.n == 1
    x = np.linspace(-50, 50, 301)[:, None]
    assert np.allclose(eval_trig(lift.v0, x @ lift.Lambda.T), eval_trig(u, x), atol=1e-10)
    assert lift.v0.is_integer()
    # one direction in two dimensions lifts to a circle
    u2 = TrigPolynomial.cos(FrequencyVector.integer([2, -1]), 0.5)
    lift2 = lift_data(u2)
    assert lift2.m == 1 and lift2.n == 2


def test_build_lift_rejects_outside_frequency():
    u = TrigPolynomial.sin(fv("1")) + TrigPolynomial.sin(fv("sqrt2"))
    with pytest.raises(PreconditionError, match="outside"):
        build_lift(u, module_basis([fv("1")]))


def test_projection_periodic():
    u = TrigPolynomial.sin(fv("1/2")) + TrigPolynomial.cos(fv("sqrt2"), 0.3)
    lift = lift_data(u)
    rng = np.random.default_rng(1)
    y = rng.uniform(0, 1, size=(30, lift.m))
    k = rng.integers(-5, 6, size=(30, lift.m))
    assert np.allclose(eval_trig(lift.v0, y), eval_trig(lift.v0, y + k), atol=1e-12)


def test_lifted_hamiltonian_examples():
    Lam = np.array([[1.0], [SQRT2]])
    H = lifted_hamiltonian(Quadratic(np.eye(1)), Lam)
    assert np.allclose(H.Q, [[1.0, SQRT2], [SQRT2, 2.0]])
    A = lifted_hamiltonian(AbsLinear(np.array([1.0, SQRT2])), np.eye(2))
    assert np.allclose(A.p, [1.0, SQRT2])
    M = lifted_hamiltonian(MaxAffine.from_pieces([([1.0], 0.0), ([-1.0], 0.0)]), Lam)
    w = np.array([[0.3, -0.4]])
    assert M.evaluate(w)[0] == pytest.approx(abs(0.3 - 0.4 * SQRT2))
    with pytest.raises(PreconditionError):
        lifted_hamiltonian(Hinge(np.array([1.0])), Lam)


def test_lifted_hamiltonian_composition_identity():
    rng = np.random.default_rng(2)
    Lam = rng.normal(size=(3, 2))
    for H in (Quadratic(np.array([[2.0, 0.3], [0.3, 1.0]])), AbsLinear(np.array([1.0, -2.0])),
              MaxAffine(rng.normal(size=(4, 2)), rng.normal(size=4))):
        Ht = lifted_hamiltonian(H, Lam)
        w = rng.normal(size=(10, 3))
        assert np.allclose(Ht.evaluate(w), H.evaluate(w @ Lam))


def test_json_round_trip():
    u = TrigPolynomial.sin(fv("1/2 + sqrt2"), 0.25) + TrigPolynomial.constant(1.5, base=QP)
    v = TrigPolynomial.from_json(u.to_json())
    assert v.terms == u.terms
    x = np.linspace(-2, 2, 11)[:, None]
    assert np.array_equal(eval_trig(u, x), eval_trig(v, x))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-3, 3), st.floats(-2, 2)), min_size=1, max_size=4),
       st.integers(0, 1000))
def test_lift_reconstructs_random_quasi_periodic(modes, seed):
    u = TrigPolynomial.zero(1, QP)
    for a, b, amp in modes:
        if a == 0 and b == 0:
            continue
        u = u + TrigPolynomial.sin(FrequencyVector(QP, [[a, b]]), amp)
    if not u.spectrum:
        return
    lift = lift_data(u, seed=seed)
    x = np.random.default_rng(seed).uniform(-100, 100, size=(50, 1))
    assert np.allclose(eval_trig(lift.v0, lift.project(x)), eval_trig(u, x), atol=1e-9)


def test_torus_extrema():
    v0 = TrigPolynomial.sin(FrequencyVector.integer([1]), 0.5) + TrigPolynomial.cos(FrequencyVector.integer([2]), 0.3)
    lo, y = torus_minimum(v0)
    hi, _ = torus_maximum(v0)
    x = np.linspace(0, 1, 100001)[:, None]
    vals = eval_trig(v0, x)
    assert lo == pytest.approx(vals.min(), abs=1e-9) and lo <= vals.min() + 1e-15
    assert hi == pytest.approx(vals.max(), abs=1e-9)
    assert eval_trig(v0, y[None])[0] == pytest.approx(lo, abs=1e-15)


def test_cube_infimum_approaches_torus_minimum():
    u = TrigPolynomial.sin(fv("1")) + TrigPolynomial.sin(fv("sqrt2"))
    lift = lift_data(u)
    c, _ = torus_minimum(lift.v0)
    small, _ = cube_infimum(u, 10)
    large, _ = cube_infimum(u, 1000)
    assert c <= large + 1e-9
    assert large <= small + 1e-12
    assert large - c <= 0.01
