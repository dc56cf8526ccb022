import json

import numpy as np
import pytest

from hjdecay.almost_periodic import (BaseGenerators, FrequencyVector, TrigPolynomial, lift_data,
                                     lifted_hamiltonian)
from hjdecay.certificate import DEFAULT_T_TABLE, decay_certificate
from hjdecay.convex import AbsLinear, Conjugate, MaxAffine, Quadratic
from hjdecay.errors import NetBudgetError, PreconditionError
from hjdecay.solver import PeriodicGrid, hopf_lax_field

HINGE_1D = MaxAffine(np.array([[0.0], [1.0], [-1.0]]), np.array([0.0, -0.5, -0.5]))


def periodic_data():
    return (TrigPolynomial.sin(FrequencyVector.integer([1]), 0.5)
            + TrigPolynomial.cos(FrequencyVector.integer([2]), 0.3))


@pytest.fixture(scope="module")
def quad_cert():
    return decay_certificate(Quadratic(np.eye(1)), periodic_data(), 0.1)


def test_half_square_certificate(quad_cert):
    cert = quad_cert
    assert cert.m == 1
    assert np.allclose(cert.p0, [0.0])
    assert np.allclose(cert.subdiff_polytope.vertices, [[0.0]])
    assert cert.delta_net == pytest.approx(0.1 / periodic_data().lipschitz())
    checks = cert.verify()
    assert all(checks[k] for k in ("net_in_polar", "net_covers_grid", "alpha_non_increasing"))
    assert checks["alpha_final_within_eps"]
    assert sorted(cert.alpha) == list(DEFAULT_T_TABLE)


def test_alpha_matches_definition(quad_cert):
    # H* = p^2/2 so alpha(t) = max |q|^2 / (2t)
    peak = np.max(quad_cert.net[:, 0] ** 2)
    for t in DEFAULT_T_TABLE:
        assert quad_cert.alpha_at(t) == pytest.approx(peak / (2 * t), rel=1e-12)
    assert quad_cert.bound(7.0) == pytest.approx(quad_cert.c + 0.1 + peak / 14)


def test_bound_dominates_solution(quad_cert):
    u0 = periodic_data()
    grid = PeriodicGrid(1, 1024)
    for t in (1.0, 10.0, 100.0):
        F = hopf_lax_field(u0, Conjugate(Quadratic(np.eye(1))), t, grid)
        assert F.values.max() <= quad_cert.bound(t) + F.tolerance


def test_json_output(quad_cert):
    data = json.loads(quad_cert.dumps())
    assert data["epsilon"] == 0.1
    assert [row["t"] for row in data["alpha"]] == list(DEFAULT_T_TABLE)
    assert len(data["net"]) == len(quad_cert.net)
    assert data["hamiltonian"]["variant"] == "quadratic"


def test_degenerate_hinge_exhausts_budget():
    u0 = TrigPolynomial.sin(FrequencyVector.integer([1]), 0.5 / (2 * np.pi))
    with pytest.raises(NetBudgetError) as info:
        decay_certificate(HINGE_1D, u0, 0.05, max_candidates=200_000)
    err = info.value
    assert err.covered_fraction < 1.0
    assert err.nd_report.verdict == "violated"


def test_quasi_periodic_lift_certificate():
    base = BaseGenerators(("1", "sqrt2"))
    u0 = (TrigPolynomial.sin(FrequencyVector.parse(base, ["1"]))
          + TrigPolynomial.sin(FrequencyVector.parse(base, ["sqrt2"])))
    lift = lift_data(u0)
    H = lifted_hamiltonian(Quadratic(np.eye(1)), lift.Lambda)
    cert = decay_certificate(H, lift.v0, 0.5)
    checks = cert.verify()
    assert checks["net_in_polar"] and checks["net_covers_grid"] and checks["alpha_non_increasing"]
    assert cert.meta["s_dim"] == 1


def test_constant_data_trivial_net():
    cert = decay_certificate(Quadratic(np.eye(1)), TrigPolynomial.constant(2.0), 0.1)
    assert cert.net.shape == (1, 1) and cert.c == 2.0
    assert all(a == 0.0 for a in cert.alpha.values())


def test_preconditions():
    with pytest.raises(PreconditionError):
        decay_certificate(Quadratic(np.eye(1)), periodic_data(), 0.0)
    base = BaseGenerators(("1", "sqrt2"))
    with pytest.raises(PreconditionError):
        decay_certificate(Quadratic(np.eye(1)), TrigPolynomial.sin(FrequencyVector.parse(base, ["sqrt2"])), 0.1)
    with pytest.raises(PreconditionError):
        decay_certificate(AbsLinear(np.array([1.0, 2.0])), periodic_data(), 0.1)
