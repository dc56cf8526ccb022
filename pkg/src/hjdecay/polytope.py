"""Vertex-represented convex polytopes, support functions and polar sets.

Polytopes here are small (at most a few hundred vertices in dimension
three or less), so exact enumeration is preferred over iterative solvers
wherever it keeps the answers deterministic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull

from .errors import PreconditionError

RANK_TOL = 1e-12


def _affine_frame(points):
    """Return (origin, basis) of the affine hull of ``points``.

    ``basis`` has orthonormal columns; its width is the affine dimension.
    """
    origin = points.mean(axis=0)
    centred = points - origin
    scale = max(1.0, float(np.abs(points).max(initial=0.0)))
    if centred.shape[0] < 2:
        return origin, np.zeros((points.shape[1], 0))
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * scale * max(1, points.shape[0])))
    return origin, vt[:rank].T


def _hull_indices(points):
    """Indices of the extreme points of a finite point set."""
    if len(points) == 1:
        return np.array([0])
    origin, basis = _affine_frame(points)
    d = basis.shape[1]
    if d == 0:
        return np.array([0])
    coords = (points - origin) @ basis
    if d == 1:
        c = coords[:, 0]
        lo, hi = int(np.argmin(c)), int(np.argmax(c))
        return np.unique([lo, hi])
    return np.sort(ConvexHull(coords).vertices)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a finite, non-empty vertex list.

    The constructor prunes redundant points and sorts the remaining vertices
    lexicographically, so two polytopes built from the same point cloud
    compare equal vertex by vertex.

    Parameters
    ----------
    vertices : array_like, shape (k, n)
    approximate : bool
        Set when the polytope approximates a set known only through samples.
    """

    vertices: np.ndarray
    approximate: bool = False
    parts: tuple = field(default=(), repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None] if v.size else v.reshape(0, 1)
        if v.ndim != 2 or v.shape[0] == 0:
            raise PreconditionError("a polytope needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise PreconditionError("polytope vertices must be finite")
        v, first = np.unique(v, axis=0, return_index=True)
        parts = tuple(np.asarray(p, dtype=float)[first] for p in self.parts)
        keep = _hull_indices(v)
        v = v[keep]
        parts = tuple(p[keep] for p in parts)
        order = np.lexsort(v.T[::-1])
        object.__setattr__(self, "vertices", v[order])
        object.__setattr__(self, "parts", tuple(p[order] for p in parts))

    @property
    def dim(self):
        return self.vertices.shape[1]

    def __len__(self):
        return self.vertices.shape[0]

    def __repr__(self):
        tag = ", approximate" if self.approximate else ""
        return f"Polytope({self.vertices.tolist()}{tag})"

    @classmethod
    def point(cls, p):
        return cls(np.atleast_2d(np.asarray(p, dtype=float)))

    @classmethod
    def segment(cls, a, b):
        return cls(np.vstack([np.atleast_1d(a), np.atleast_1d(b)]).astype(float))

    @classmethod
    def box(cls, lo, hi):
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        corners = itertools.product(*zip(lo, hi))
        return cls(np.array(list(corners)))

    @classmethod
    def from_halfspaces(cls, A_ub, b_ub, A_eq=None, b_eq=None, tol=1e-10):
        """Vertex enumeration for ``{v : A_ub v <= b_ub, A_eq v = b_eq}``.

        Brute force over n-subsets of the constraint rows; fine for the
        handful of constraints that occur in dimension three or less.
        Raises ``PreconditionError`` when the set is empty or unbounded.
        """
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
        n = A_ub.shape[1]
        if A_eq is None or len(A_eq) == 0:
            A_eq, b_eq = np.zeros((0, n)), np.zeros(0)
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float)).reshape(-1, n)
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        for sign in (1.0, -1.0):
            for i in range(n):
                c = np.zeros(n)
                c[i] = -sign
                res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if len(A_eq) else None,
                              b_eq=b_eq if len(b_eq) else None, bounds=[(None, None)] * n,
                              method="highs")
                if res.status == 3:
                    raise PreconditionError("half-space system is unbounded")
                if res.status == 2:
                    raise PreconditionError("half-space system is infeasible")
        rows = np.vstack([A_eq, A_ub])
        rhs = np.concatenate([b_eq, b_ub])
        n_eq = len(A_eq)
        scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
        found = []
        for subset in itertools.combinations(range(len(rows)), n):
            if any(i >= n_eq for i in range(n_eq)) and not set(range(n_eq)) <= set(subset):
                continue
            M = rows[list(subset)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, rhs[list(subset)])
            if np.all(A_ub @ v <= b_ub + tol * scale) and np.all(
                    np.abs(A_eq @ v - b_eq) <= tol * scale):
                found.append(v)
        if not found:
            raise PreconditionError("half-space system has no vertices")
        return cls(np.array(found))

    def support(self, q):
        """``max_{v in P} q . v``; vectorised over leading axes of ``q``."""
        q = np.asarray(q, dtype=float)
        if self.dim == 1 and (q.ndim == 0 or q.shape[-1] != 1):
            q = q[..., None]
        return np.max(q @ self.vertices.T, axis=-1)

    def min_norm_point(self):
        """Point of minimal Euclidean norm, with its barycentric weights.

        Returns
        -------
        point : ndarray, shape (n,)
        weights : ndarray, shape (k,)
            Convex weights over ``self.vertices`` reproducing ``point``.
        """
        return _min_norm_combination(self.vertices)

    def distance(self, x):
        """Euclidean distance from ``x`` to the polytope."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p, _ = _min_norm_combination(self.vertices - x)
        return float(np.linalg.norm(p))

    def contains(self, x, tol=1e-9):
        return self.distance(x) <= tol * max(1.0, float(np.abs(self.vertices).max()))

    def scaled(self, factor):
        return Polytope(self.vertices * float(factor), approximate=self.approximate)


def _min_norm_combination(V):
    k, n = V.shape
    if k == 1:
        return V[0].copy(), np.ones(1)
    if k > 20:
        # augmented least squares: the row of ones enforces sum(weights) = 1
        rho = 1e6 * max(1.0, float(np.abs(V).max()))
        A = np.vstack([V.T, rho * np.ones((1, k))])
        b = np.concatenate([np.zeros(n), [rho]])
        w, _ = nnls(A, b, maxiter=50 * k)
        w = w / w.sum()
        return w @ V, w
    best, best_w = None, None
    for size in range(1, min(k, n + 1) + 1):
        for subset in itertools.combinations(range(k), size):
            S = V[list(subset)]
            # minimise |w S|^2 subject to sum w = 1 on the affine hull of S
            G = S @ S.T
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = G
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[size] = 1.0
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            w = sol[:size]
            if np.any(w < -1e-12):
                continue
            w = np.clip(w, 0.0, None)
            w = w / w.sum()
            p = w @ S
            if best is None or p @ p < best @ best - 1e-15:
                best = p
                best_w = np.zeros(k)
                best_w[list(subset)] = w
    return best, best_w


def support_function(P, q):
    """Support function of a polytope: ``max_{v in P} q . v``."""
    return float(P.support(q)) if np.ndim(q) <= 1 else P.support(q)


def minkowski_sum(*polytopes):
    """Minkowski sum by pairwise vertex sums followed by hull pruning.

    The summand vertices behind each surviving vertex are kept in
    ``parts`` so a point of the sum can be decomposed into its summands.
    """
    first = polytopes[0]
    verts = first.vertices
    parts = [first.vertices]
    for P in polytopes[1:]:
        idx_a, idx_b = np.meshgrid(np.arange(len(verts)), np.arange(len(P)), indexing="ij")
        idx_a, idx_b = idx_a.ravel(), idx_b.ravel()
        parts = [p[idx_a] for p in parts] + [P.vertices[idx_b]]
        verts = verts[idx_a] + P.vertices[idx_b]
        pruned = Polytope(verts, parts=tuple(parts))
        verts, parts = pruned.vertices, list(pruned.parts)
    approx = any(P.approximate for P in polytopes)
    return Polytope(verts, approximate=approx, parts=tuple(parts))


@dataclass(frozen=True)
class PolarSetQuery:
    """The polar set ``G = {p : p . v <= eps for all v in base}``."""

    base: Polytope
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise PreconditionError("epsilon must be positive")

    def contains(self, p):
        # relative slack keeps the test invariant under joint scaling
        return self.base.support(p) <= self.epsilon * (1.0 + 1e-12)


def polar_membership(query, p):
    """True iff ``p`` belongs to the polar set described by ``query``."""
    return bool(query.contains(np.asarray(p, dtype=float)))


@dataclass
class BipolarReport:
    """Outcome of a sampled bipolar check.

    ``max_inside_violation`` is ``max (p . v - eps)`` over base points and
    sampled polar points; it must be non-positive.  ``max_outside_distance``
    is the largest distance to ``base`` among probes that the sampled polar
    fails to exclude; it measures how finely the polar was sampled.
    """

    n_probes: int
    n_polar_samples: int
    n_mismatch: int
    max_inside_violation: float
    max_outside_distance: float
    tolerance: float

    @property
    def ok(self):
        return self.n_mismatch == 0 and self.max_inside_violation <= 1e-12


def bipolar_check(base, epsilon, probe_grid, polar_grid=None, tolerance=None):
    """Check ``base == {v : p . v <= eps for all sampled p in G}`` on probes.

    Parameters
    ----------
    base : Polytope
        Must contain the origin.
    epsilon : float
    probe_grid : array_like, shape (k, n)
        Points ``v`` at which the two descriptions are compared.
    polar_grid : array_like, shape (j, n), optional
        Candidate polar points; those inside ``G`` are kept.  Defaults to
        ``probe_grid`` scaled so that it reaches the extent of ``G``.
    tolerance : float, optional
        Probes within this distance of ``base`` count as agreeing.  Defaults
        to one probe-grid cell.
    """
    if not base.contains(np.zeros(base.dim)):
        raise PreconditionError("bipolar check needs 0 in the base set")
    probes = np.atleast_2d(np.asarray(probe_grid, dtype=float))
    if probes.shape[1] != base.dim:
        probes = probes.reshape(-1, base.dim)
    query = PolarSetQuery(base, epsilon)
    if polar_grid is None:
        polar_grid = _default_polar_samples(probes, base, epsilon)
    P = np.atleast_2d(np.asarray(polar_grid, dtype=float)).reshape(-1, base.dim)
    G = P[query.contains(P)]
    if tolerance is None:
        tolerance = _grid_cell(probes)
    recovered = np.all(probes @ G.T <= epsilon * (1.0 + 1e-12), axis=1)
    dist = np.array([base.distance(v) for v in probes])
    inside = dist <= 1e-9 * max(1.0, float(np.abs(base.vertices).max()))
    viol = probes[inside] @ G.T - epsilon if inside.any() and len(G) else np.zeros((1, 1))
    leaked = recovered & ~inside
    mismatch = (inside & ~recovered) | (leaked & (dist > tolerance))
    return BipolarReport(
        n_probes=len(probes),
        n_polar_samples=len(G),
        n_mismatch=int(mismatch.sum()),
        max_inside_violation=float(viol.max(initial=-np.inf)),
        max_outside_distance=float(dist[leaked].max(initial=0.0)),
        tolerance=float(tolerance),
    )


def _grid_cell(points):
    cells = []
    for axis in range(points.shape[1]):
        u = np.unique(points[:, axis])
        if len(u) > 1:
            cells.append(np.min(np.diff(u)))
    return float(np.sqrt(np.sum(np.square(cells)))) if cells else 0.0


def _default_polar_samples(probes, base, epsilon):
    n = base.dim
    # the polar of a set reaching out to radius r contains the ball eps/r;
    # sample a box wide enough to hit the polar boundary in every direction
    r_min = _grid_cell(probes) or 1.0
    extent = epsilon / r_min
    count = 401 if n == 1 else (81 if n == 2 else 25)
    axes = [np.linspace(-extent, extent, count)] * n
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
