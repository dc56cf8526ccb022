"""Constructive decay certificate on the torus.

For convex ``H`` with ``p0`` in ``dH(0)`` and ``G`` the polar of
``dH*(p0)`` at level ``eps``, any finite set ``q_k`` in ``G`` whose torus
projections form a ``delta``-net (``delta`` from the modulus of continuity
of ``v0`` at ``eps``) yields

    c <= v(t, y) < c + eps + alpha(t),   alpha(t) = max_k t H*(p0 + q_k/t),

with ``c = min v0``.  ``alpha`` decreases to at most ``eps``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .almost_periodic import standard_module, torus_minimum
from .convex import Conjugate, conjugate_subdifferential
from .errors import NetBudgetError, PreconditionError
from .polytope import PolarSetQuery
from .solver import default_torus_count, prepare_hamiltonian

DEFAULT_T_TABLE = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)


@dataclass
class DecayCertificate:
    epsilon: float
    p0: np.ndarray
    subdiff_polytope: object
    net: np.ndarray
    delta_net: float
    cover_spacing: float
    alpha: dict
    c: float
    lipschitz: float
    hamiltonian: object
    shells_searched: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.net.shape[1]

    def alpha_at(self, t):
        if float(t) in self.alpha:
            return self.alpha[float(t)]
        return _alpha(Conjugate(self.hamiltonian), self.p0, self.net, float(t))

    def bound(self, t):
        """``c + eps + alpha(t)``."""
        return self.c + self.epsilon + self.alpha_at(t)

    def verify(self, count=None, alpha_tol=1e-9):
        """Recheck the certificate's invariants; returns a dict of booleans."""
        base = self.subdiff_polytope
        query = PolarSetQuery(base, self.epsilon)
        in_polar = bool(np.all(query.contains(self.net)))
        count = count or default_torus_count(self.m)
        axes = [np.arange(count) / count] * self.m
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
        tree = cKDTree(np.mod(self.net, 1.0), boxsize=1.0)
        dist, _ = tree.query(grid)
        ts = sorted(self.alpha)
        vals = [self.alpha[t] for t in ts]
        monotone = all(b <= a + alpha_tol * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))
        return {
            "net_in_polar": in_polar,
            "net_covers_grid": bool(dist.max() <= self.delta_net),
            "max_cover_distance": float(dist.max()),
            "alpha_non_increasing": monotone,
            "alpha_final_within_eps": bool(vals[-1] <= self.epsilon + alpha_tol) if vals else False,
        }

    def to_json(self):
        ts = sorted(self.alpha)
        return {
            "epsilon": self.epsilon,
            "p0": self.p0.tolist(),
            "subdiff_vertices": self.subdiff_polytope.vertices.tolist(),
            "delta_net": self.delta_net,
            "cover_spacing": self.cover_spacing,
            "c": self.c,
            "lipschitz": self.lipschitz,
            "hamiltonian": self.hamiltonian.to_json(),
            "alpha": [{"t": t, "alpha": self.alpha[t], "bound": self.bound(t)} for t in ts],
            "net": self.net.tolist(),
            "shells_searched": self.shells_searched,
            "meta": self.meta,
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _alpha(conj, p0, net, t):
    vals = t * np.asarray(conj(p0 + net / t), dtype=float).reshape(len(net))
    return float(vals.max())


def _subspace(vertices, tol=1e-12):
    """Orthonormal bases of ``S = span(vertices)`` and its complement."""
    m = vertices.shape[1]
    if not np.any(vertices):
        return np.zeros((m, 0)), np.eye(m)
    _, s, vt = np.linalg.svd(vertices, full_matrices=True)
    k = int(np.sum(s > tol * max(1.0, s.max())))
    return vt[:k].T, vt[k:].T


def _s_part_box(V_S, eps, cap):
    """Bounding box of ``{b : V_S b <= eps}`` in S coordinates, capped at ``cap``."""
    k = V_S.shape[1]
    lo, hi = np.empty(k), np.empty(k)
    bounded = True
    for i in range(k):
        for sign, store in ((1.0, hi), (-1.0, lo)):
            c = np.zeros(k)
            c[i] = -sign
            res = linprog(c, A_ub=V_S, b_ub=np.full(len(V_S), eps),
                          bounds=[(-cap, cap)] * k, method="highs")
            val = sign * -res.fun if res.status == 0 else sign * cap
            if abs(abs(val) - cap) < 1e-9 * cap:
                bounded = False
            store[i] = val
    return lo, hi, bounded


def _shell(r, d):
    """Integer points with ``|j|_inf == r`` in ``Z^d``."""
    if d == 0:
        return np.zeros((1, 0), dtype=int) if r == 0 else np.zeros((0, 0), dtype=int)
    if r == 0:
        return np.zeros((1, d), dtype=int)
    rng = np.arange(-r, r + 1)
    pts = np.stack(np.meshgrid(*[rng] * d, indexing="ij"), axis=-1).reshape(-1, d)
    return pts[np.abs(pts).max(axis=1) == r]


def decay_certificate(H, v0, epsilon, t_table=DEFAULT_T_TABLE, max_shells=200000,
                      max_candidates=20_000_000, s_cap=1e3, nd_bound=10):
    """Build the certificate for convex ``H`` on ``R^m`` and torus data ``v0``.

    Steps: coercify ``H`` if needed, take ``p0`` of minimal norm in
    ``dH(0)``, compute ``dH*(p0)``, set ``delta = eps / Lip(v0)``, then scan
    ``G`` shell by shell (complement of ``span dH*(p0)`` on a lattice, the
    bounded remainder on a grid), keeping candidates whose projections
    reach uncovered nodes of a cover grid of spacing ``delta / (2 sqrt m)``.

    Raises
    ------
    NetBudgetError
        When the scan budget runs out; ``error.nd_report`` holds a fresh
        non-degeneracy search so callers can tell a degenerate hamiltonian
        from a budget that is merely too small.
    """
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    if not v0.is_integer():
        raise PreconditionError("certificate data must live on the torus (integer frequencies)")
    m = v0.dim
    if H.dim != m:
        raise PreconditionError("hamiltonian and data dimensions differ")
    Hc, _ = prepare_hamiltonian(H, v0.lipschitz_per_axis())
    conj = Conjugate(Hc)
    p0 = conj.p0
    P = conjugate_subdifferential(Hc, p0)
    c, _ = torus_minimum(v0)
    lip = v0.lipschitz()
    t_table = tuple(sorted(float(t) for t in t_table))
    if lip == 0:
        net = np.zeros((1, m))
        alpha = {t: _alpha(conj, p0, net, t) for t in t_table}
        return DecayCertificate(float(epsilon), p0, P, net, np.inf, np.inf, alpha, c, 0.0, Hc)
    delta = epsilon / lip
    h_c = delta / (2 * math.sqrt(m))
    nc = int(math.ceil(1.0 / h_c))
    h_c = 1.0 / nc
    rho = delta - h_c * math.sqrt(m) / 2
    cover = np.stack(np.meshgrid(*[np.arange(nc) / nc] * m, indexing="ij"), axis=-1).reshape(-1, m)
    tree = cKDTree(cover, boxsize=1.0)
    covered = np.zeros(len(cover), dtype=bool)
    query = PolarSetQuery(P, epsilon)

    U_S, U_perp = _subspace(P.vertices)
    k = U_S.shape[1]
    if k:
        V_S = P.vertices @ U_S
        lo, hi, _ = _s_part_box(V_S, epsilon, s_cap)
        axes = [np.arange(math.floor(a / h_c), math.ceil(b / h_c) + 1) * h_c for a, b in zip(lo, hi)]
        B = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        B = B[np.all(B @ V_S.T <= epsilon * (1 + 1e-12), axis=1)]
        s_points = B @ U_S.T
    else:
        s_points = np.zeros((1, m))
    d_perp = U_perp.shape[1]
    strides = nc ** np.arange(m - 1, -1, -1)
    net = []
    examined = 0
    shells = 0
    for r in range(max_shells):
        shells = r + 1
        a = _shell(r, d_perp)
        if len(a) == 0:
            break
        perp = (a * h_c) @ U_perp.T if d_perp else np.zeros((1, m))
        q = (perp[:, None, :] + s_points[None, :, :]).reshape(-1, m)
        examined += len(q)
        q = q[np.argsort(np.linalg.norm(q, axis=1), kind="stable")]
        q = q[query.contains(q)]
        proj = np.mod(q, 1.0)
        nearest = np.mod(np.rint(proj * nc).astype(int), nc) @ strides
        fresh = ~covered[nearest]
        if fresh.any():
            _, first = np.unique(nearest[fresh], return_index=True)
            pick = np.flatnonzero(fresh)[np.sort(first)]
            net.append(q[pick])
            hits = tree.query_ball_point(proj[pick], rho, return_sorted=False)
            idx = np.concatenate([np.asarray(h, dtype=int) for h in hits])
            covered[idx] = True
        if covered.all():
            break
        if d_perp == 0 or examined > max_candidates:
            break
    if not covered.all():
        from .nondegeneracy import check_nd
        report = check_nd(Hc, standard_module(m), K=nd_bound)
        err = NetBudgetError(
            f"no {delta:.3g}-net found in the polar set after {shells} shells "
            f"({covered.mean():.1%} of the torus covered; ND search: {report.verdict})",
            covered_fraction=float(covered.mean()), searched_radius=shells * h_c)
        err.nd_report = report
        raise err
    net = np.concatenate(net, axis=0)
    alpha = {t: _alpha(conj, p0, net, t) for t in t_table}
    return DecayCertificate(float(epsilon), p0, P, net, float(delta), float(h_c), alpha, float(c),
                            float(lip), Hc, shells,
                            {"cover_radius": rho, "candidates_examined": examined,
                             "s_dim": k})
