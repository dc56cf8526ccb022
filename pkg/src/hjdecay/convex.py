"""Convex hamiltonians: evaluation, conjugates, subdifferentials, coercification.

A hamiltonian is one of a small set of symbolic variants (or a sampled
table).  Conjugates are exact for the variants that arise when solving
lifted problems, and fall back to discrete Legendre transforms otherwise.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError, NumericalFailure, PreconditionError
from .legendre import SampledConvex, discrete_conjugate, legendre_nd
from .polytope import Polytope, minkowski_sum

ACTIVE_TOL = 1e-12


def as_points(v, dim):
    """Return ``(points, squeeze)`` with points of shape ``(..., dim)``.

    For ``dim == 1`` a bare scalar or an array without a trailing unit axis
    is read as a collection of 1D points.
    """
    v = np.asarray(v, dtype=float)
    if dim == 1 and (v.ndim == 0 or v.shape[-1] != 1):
        return v[..., None], True
    if v.shape[-1] != dim:
        raise PreconditionError(f"expected points of dimension {dim}, got shape {v.shape}")
    return v, False


class HamiltonianSpec:
    """Common interface of all hamiltonian variants."""

    variant = "abstract"

    @property
    def dim(self):
        raise NotImplementedError

    def evaluate(self, points):
        """Values at ``points`` of shape ``(..., dim)``."""
        raise NotImplementedError

    def __call__(self, v):
        pts, _ = as_points(v, self.dim)
        if not np.all(np.isfinite(pts)):
            raise PreconditionError("hamiltonian arguments must be finite")
        out = self.evaluate(pts)
        return float(out) if np.ndim(out) == 0 else out

    def params(self):
        raise NotImplementedError

    def to_json(self):
        return {"variant": self.variant, "params": self.params(), "dim": self.dim}

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    def terms(self):
        return (self,)

    def __add__(self, other):
        return Sum(tuple(self.terms()) + tuple(other.terms()))


@dataclass(frozen=True, eq=False)
class Quadratic(HamiltonianSpec):
    """``H(v) = 1/2 v^T Q v`` with ``Q`` symmetric positive semidefinite."""

    Q: np.ndarray
    variant = "quadratic"

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise PreconditionError("Q must be square")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise PreconditionError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        eig, vec = np.linalg.eigh(Q)
        scale = max(1.0, float(np.abs(eig).max()))
        if eig.min() < -1e-12 * scale:
            raise PreconditionError(f"Q is indefinite (smallest eigenvalue {eig.min():.3g})")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "_eig", (np.clip(eig, 0.0, None), vec))

    @property
    def dim(self):
        return self.Q.shape[0]

    @property
    def rank(self):
        eig = self._eig[0]
        return int(np.sum(eig > 1e-12 * max(1.0, eig.max())))

    def evaluate(self, points):
        return 0.5 * np.einsum("...i,ij,...j->...", points, self.Q, points)

    def params(self):
        return {"Q": self.Q.tolist()}


@dataclass(frozen=True, eq=False)
class MaxAffine(HamiltonianSpec):
    """``H(v) = max_i (a_i . v + b_i)``."""

    slopes: np.ndarray
    offsets: np.ndarray
    variant = "max_affine"

    def __post_init__(self):
        a = np.asarray(self.slopes, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if a.shape[0] != b.shape[0] or a.shape[0] == 0:
            raise PreconditionError("max-affine needs matching, non-empty slopes and offsets")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "slopes", a)
        object.__setattr__(self, "offsets", b)

    @classmethod
    def from_pieces(cls, pieces):
        """Build from ``[(slope, offset), ...]``; scalar slopes mean ``n = 1``."""
        slopes = [np.atleast_1d(np.asarray(s, dtype=float)) for s, _ in pieces]
        return cls(np.array(slopes), np.array([float(b) for _, b in pieces]))

    @property
    def dim(self):
        return self.slopes.shape[1]

    def evaluate(self, points):
        return np.max(points @ self.slopes.T + self.offsets, axis=-1)

    def params(self):
        return {"slopes": self.slopes.tolist(), "offsets": self.offsets.tolist()}


@dataclass(frozen=True, eq=False)
class AbsLinear(HamiltonianSpec):
    """``H(v) = |p . v|``."""

    p: np.ndarray
    variant = "abs_linear"

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def dim(self):
        return self.p.shape[0]

    def evaluate(self, points):
        return np.abs(points @ self.p)

    def params(self):
        return {"p": self.p.tolist()}


@dataclass(frozen=True, eq=False)
class Hinge(HamiltonianSpec):
    """``H(v) = weight * sum_i max(0, |v_i| - L_i)^2``.

    Vanishes on the box ``|v_i| <= L_i`` and grows quadratically outside;
    adding it to a convex hamiltonian makes the sum coercive.
    """

    L: np.ndarray
    weight: float = 1.0
    variant = "hinge"

    def __post_init__(self):
        L = np.atleast_1d(np.asarray(self.L, dtype=float))
        if np.any(L <= 0) or not np.all(np.isfinite(L)):
            raise PreconditionError("hinge half-widths must be positive and finite")
        if not self.weight > 0:
            raise PreconditionError("hinge weight must be positive")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def dim(self):
        return self.L.shape[0]

    def evaluate(self, points):
        excess = np.clip(np.abs(points) - self.L, 0.0, None)
        return self.weight * np.sum(excess * excess, axis=-1)

    def gradient(self, points):
        excess = np.clip(np.abs(points) - self.L, 0.0, None)
        return 2.0 * self.weight * excess * np.sign(points)

    def conjugate(self, r):
        """``sum_i L_i |r_i| + r_i^2 / (4 weight)``."""
        r = np.asarray(r, dtype=float)
        return np.sum(self.L * np.abs(r) + r * r / (4.0 * self.weight), axis=-1)

    def params(self):
        return {"L": self.L.tolist(), "weight": self.weight}


@dataclass(frozen=True, eq=False)
class Sum(HamiltonianSpec):
    """Pointwise sum of hamiltonians of a common dimension."""

    parts: tuple
    variant = "sum"

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise PreconditionError("sum needs at least one term")
        flat = []
        for t in parts:
            flat.extend(t.terms())
        if len({t.dim for t in flat}) != 1:
            raise PreconditionError("sum terms must share a dimension")
        object.__setattr__(self, "parts", tuple(flat))

    @property
    def dim(self):
        return self.parts[0].dim

    def terms(self):
        return self.parts

    def evaluate(self, points):
        return sum(t.evaluate(points) for t in self.parts)

    def params(self):
        return {"terms": [t.to_json() for t in self.parts]}


@dataclass(frozen=True, eq=False)
class Sampled(HamiltonianSpec):
    """Multilinear interpolant of a convex table; undefined off the grid."""

    table: SampledConvex
    variant = "sampled"

    def __post_init__(self):
        self.table.check_convex()
        if not self.table.domain_mask.all():
            raise PreconditionError("a sampled hamiltonian must be finite on its grid")

    @property
    def dim(self):
        return self.table.dim

    def evaluate(self, points):
        lo = np.array([a[0] for a in self.table.axes])
        hi = np.array([a[1] for a in self.table.axes])
        if np.any(points < lo - 1e-12) or np.any(points > hi + 1e-12):
            raise DomainError("argument outside the sampled grid")
        return self.table.interpolate(np.clip(points, lo, hi))

    def params(self):
        vals = self.table.values
        return {"axes": [list(a) for a in self.table.axes], "values": vals.tolist()}


@dataclass(frozen=True, eq=False)
class Concave(HamiltonianSpec):
    """Concave hamiltonian ``H(v) = -C(-v)`` with ``C`` convex."""

    convex_part: HamiltonianSpec
    variant = "concave"

    @property
    def dim(self):
        return self.convex_part.dim

    def evaluate(self, points):
        return -self.convex_part.evaluate(-points)

    def params(self):
        return {"convex_part": self.convex_part.to_json()}


def from_json(obj):
    """Inverse of ``HamiltonianSpec.to_json``; accepts a dict or a JSON string."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind, prm = obj["variant"], obj.get("params", {})
    if kind == "quadratic":
        spec = Quadratic(np.array(prm["Q"], dtype=float))
    elif kind == "max_affine":
        spec = MaxAffine(np.array(prm["slopes"], dtype=float), np.array(prm["offsets"], dtype=float))
    elif kind == "abs_linear":
        spec = AbsLinear(np.array(prm["p"], dtype=float))
    elif kind == "hinge":
        spec = Hinge(np.array(prm["L"], dtype=float), prm.get("weight", 1.0))
    elif kind == "sum":
        spec = Sum(tuple(from_json(t) for t in prm["terms"]))
    elif kind == "sampled":
        vals = np.array(prm["values"], dtype=float)
        spec = Sampled(SampledConvex(prm["axes"], vals))
    elif kind == "concave":
        spec = Concave(from_json(prm["convex_part"]))
    else:
        raise PreconditionError(f"unknown hamiltonian variant {kind!r}")
    if "dim" in obj and int(obj["dim"]) != spec.dim:
        raise PreconditionError("declared dim does not match parameters")
    return spec


def eval_hamiltonian(spec, v):
    """``H(v)`` for a single point or an array of points."""
    return spec(v)


def is_normalized(spec, tol=1e-12):
    return abs(float(spec(np.zeros(spec.dim)))) <= tol


# ---------------------------------------------------------------------------
# closed-form conjugates

def _maxaffine_conjugate_lp(slopes, offsets, p):
    # H*(p) = min { -sum w_i b_i : w >= 0, sum w = 1, sum w_i a_i = p }
    k, n = slopes.shape
    A_eq = np.vstack([slopes.T, np.ones((1, k))])
    res = linprog(-offsets, A_eq=A_eq, b_eq=np.concatenate([p, [1.0]]),
                  bounds=[(0, None)] * k, method="highs")
    return float(res.fun) if res.status == 0 else np.inf


def _maxaffine_1d_hull(slopes, offsets):
    """Sorted (slope, conjugate value) pairs of the 1D max-affine conjugate."""
    a = slopes[:, 0]
    c = -offsets
    order = np.lexsort((c, a))
    a, c = a[order], c[order]
    keep = np.concatenate([[True], np.diff(a) > 0])
    a, c = a[keep], c[keep]
    if len(a) > 2:
        from .legendre import _lower_hull
        h = _lower_hull(a, c)
        a, c = a[h], c[h]
    return a, c


def conjugate_symbolic(spec, p):
    """Closed-form conjugate of a quadratic, abs-linear or max-affine spec.

    Returns ``inf`` outside the effective domain.  Quadratics may be
    singular: the conjugate is then finite on the range of ``Q`` only.
    """
    pts, _ = as_points(p, spec.dim)
    flat = pts.reshape(-1, spec.dim)
    if isinstance(spec, Quadratic):
        eig, vec = spec._eig
        coords = flat @ vec
        pos = eig > 1e-12 * max(1.0, eig.max())
        scale = np.maximum(1.0, np.abs(flat).max(axis=1))
        off_range = np.abs(coords[:, ~pos]).max(axis=1, initial=0.0) > 1e-12 * scale
        val = 0.5 * np.sum(coords[:, pos] ** 2 / eig[pos], axis=1)
        out = np.where(off_range, np.inf, val)
    elif isinstance(spec, AbsLinear):
        a = spec.p
        na2 = float(a @ a)
        if na2 == 0:
            out = np.where(np.abs(flat).max(axis=1) == 0, 0.0, np.inf)
        else:
            s = flat @ a / na2
            resid = np.abs(flat - s[:, None] * a).max(axis=1)
            scale = max(1.0, float(np.abs(a).max()))
            ok = (np.abs(s) <= 1 + 1e-12) & (resid <= 1e-12 * scale)
            out = np.where(ok, 0.0, np.inf)
    elif isinstance(spec, MaxAffine):
        if spec.dim == 1:
            a, c = _maxaffine_1d_hull(spec.slopes, spec.offsets)
            q = flat[:, 0]
            inside = (q >= a[0] - 1e-12) & (q <= a[-1] + 1e-12)
            val = np.interp(np.clip(q, a[0], a[-1]), a, c) if len(a) > 1 else np.full(q.shape, c[0])
            out = np.where(inside, val, np.inf)
        else:
            out = np.array([_maxaffine_conjugate_lp(spec.slopes, spec.offsets, q) for q in flat])
    else:
        raise PreconditionError(f"no closed-form conjugate for variant {spec.variant!r}")
    out = out.reshape(pts.shape[:-1])
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# conjugate evaluators

class _LineFamily:
    """``g*`` supported on ``{c + s d : s in [lo, hi]}`` with value ``phi(s)``.

    ``phi`` is convex and piecewise quadratic; ``breaks`` lists its kinks.
    """

    def __init__(self, base, direction, lo, hi, phi, dphi, ddphi, breaks=()):
        self.base = np.asarray(base, dtype=float)
        self.d = np.asarray(direction, dtype=float)
        self.lo, self.hi = float(lo), float(hi)
        self.phi, self.dphi, self.ddphi = phi, dphi, ddphi
        self.breaks = np.asarray(breaks, dtype=float)


def _line_family(g):
    n = g.dim
    if isinstance(g, Quadratic) and g.rank == 1:
        eig, vec = g._eig
        k = int(np.argmax(eig))
        sigma, u = float(eig[k]), vec[:, k]
        return _LineFamily(np.zeros(n), u, -np.inf, np.inf,
                           lambda s: s * s / (2 * sigma), lambda s: s / sigma,
                           lambda s: np.full_like(s, 1.0 / sigma))
    if isinstance(g, AbsLinear):
        zero = lambda s: np.zeros_like(s)
        if not np.any(g.p):
            return _LineFamily(np.zeros(n), np.zeros(n), 0.0, 0.0, zero, zero, zero)
        return _LineFamily(np.zeros(n), g.p, -1.0, 1.0, zero, zero, zero)
    if isinstance(g, MaxAffine) and len(g.slopes) == 1:
        b = float(g.offsets[0])
        const = lambda s: np.full_like(s, -b)
        zero = lambda s: np.zeros_like(s)
        return _LineFamily(g.slopes[0], np.zeros(n), 0.0, 0.0, const, zero, zero)
    if isinstance(g, MaxAffine) and n == 1:
        a, c = _maxaffine_1d_hull(g.slopes, g.offsets)
        if len(a) == 1:
            return _line_family(MaxAffine(a[:, None], -c))
        seg = np.diff(c) / np.diff(a)

        def dphi(s):
            k = np.clip(np.searchsorted(a, s, side="right") - 1, 0, len(seg) - 1)
            return seg[k]

        return _LineFamily(np.zeros(1), np.ones(1), a[0], a[-1],
                           lambda s: np.interp(s, a, c), dphi, lambda s: np.zeros_like(s),
                           breaks=a[1:-1])
    return None


def _inf_convolution_line(fam, hinge, p):
    """``min_{s in [lo, hi]} phi(s) + h*(p - base - s d)`` for rows of ``p``.

    The objective is convex and piecewise quadratic in ``s``; its kinks are
    the kinks of ``phi`` and the points where a coordinate of the residual
    changes sign.  On each piece the stationary point clipped to the piece
    is that piece's minimiser, so the smallest objective value among these
    candidates is the exact minimum.
    """
    c = p - fam.base
    d = fam.d
    L, w = hinge.L, hinge.weight
    P = c.shape[0]
    if fam.lo == fam.hi:
        s = np.full(P, fam.lo)
        return fam.phi(s) + hinge.conjugate(c - s[:, None] * d)
    nz = np.flatnonzero(d != 0)
    kinks = [c[:, nz] / d[nz]] if nz.size else []
    if fam.breaks.size:
        kinks.append(np.broadcast_to(fam.breaks, (P, fam.breaks.size)))
    B = np.concatenate(kinks, axis=1) if kinks else np.zeros((P, 0))
    if B.shape[1] > 1:
        B = np.sort(B, axis=1)
    B = np.clip(B, fam.lo, fam.hi)
    left = np.concatenate([np.full((P, 1), fam.lo), B], axis=1)
    right = np.concatenate([B, np.full((P, 1), fam.hi)], axis=1)
    # representative interior point of each piece, also for unbounded ends
    fl, fr = np.isfinite(left), np.isfinite(right)
    mid = np.where(fl & fr, 0.5 * (left + right),
                   np.where(fl, left + 1.0, np.where(fr, right - 1.0, 0.0)))
    dd = d[nz]
    grad = fam.dphi(mid)
    for j, i in enumerate(nz):
        r = c[:, i:i + 1] - mid * d[i]
        grad = grad - d[i] * (L[i] * np.sign(r) + r / (2 * w))
    curv = fam.ddphi(mid) + float(dd @ dd) / (2 * w)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(curv > 0, mid - grad / curv, np.where(grad > 0, -np.inf, np.inf))
    stat = np.clip(stat, left, right)
    val = fam.phi(stat)
    for i in range(c.shape[1]):
        r = c[:, i:i + 1] - stat * d[i]
        val = val + L[i] * np.abs(r) + r * r / (4 * w)
    return np.min(val, axis=1)


class Conjugate:
    """Evaluator for ``H*`` with ``+inf`` outside the effective domain.

    Attributes
    ----------
    spec : HamiltonianSpec
    exact : bool
        False when values come from a discrete transform.
    p0 : ndarray
        Minimal-norm element of the subdifferential at the origin.
    """

    def __init__(self, spec, sample_count=4097, sample_radius=None):
        if isinstance(spec, Concave):
            raise PreconditionError("conjugates are defined for convex hamiltonians only")
        self.spec = spec
        self.dim = spec.dim
        self._route = None
        self._sample_count = sample_count
        self._sample_radius = sample_radius
        terms = spec.terms()
        hinges = [t for t in terms if isinstance(t, Hinge)]
        others = [t for t in terms if not isinstance(t, Hinge)]
        self.hinge = hinges[0] if len(hinges) == 1 else None
        self.exact = True
        if len(hinges) > 1:
            self._route = "sampled"
        elif not hinges and len(others) == 1 and isinstance(
                others[0], (Quadratic, AbsLinear, MaxAffine)):
            self._route = "symbolic"
            g = others[0]
            if isinstance(g, MaxAffine) and g.dim > 1 and len(g.slopes) > 1:
                self._route = "lp"
        elif hinges and not others:
            self._route = "hinge"
        elif hinges and len(others) == 1 and _line_family(others[0]) is not None:
            self._route = "line"
            self._family = _line_family(others[0])
        else:
            self._route = "sampled"
        if self._route in ("symbolic", "lp"):
            self._g = others[0]
        if self._route == "sampled":
            self.exact = False
        self._table_cache = {}
        self.p0 = minimal_norm_subgradient(spec, np.zeros(self.dim))

    @property
    def route(self):
        return self._route

    def __call__(self, p):
        pts, _ = as_points(p, self.dim)
        flat = pts.reshape(-1, self.dim)
        if self._route in ("symbolic", "lp"):
            out = np.asarray(conjugate_symbolic(self._g, flat if self.dim > 1 else flat[:, 0]))
        elif self._route == "hinge":
            out = self.hinge.conjugate(flat)
        elif self._route == "line":
            out = np.empty(len(flat))
            step = 20000
            for i in range(0, len(flat), step):
                out[i:i + step] = _inf_convolution_line(self._family, self.hinge, flat[i:i + step])
        else:
            out = self._sampled(flat)
        out = np.asarray(out, dtype=float).reshape(pts.shape[:-1])
        return float(out) if out.ndim == 0 else out

    # discrete fallback ---------------------------------------------------
    def _kinks_1d(self):
        ks = []
        for t in self.spec.terms():
            if isinstance(t, Hinge):
                ks.extend([-t.L[0], t.L[0]])
            elif isinstance(t, MaxAffine):
                a, b = t.slopes[:, 0], t.offsets
                for i, j in itertools.combinations(range(len(a)), 2):
                    if a[i] != a[j]:
                        ks.append((b[j] - b[i]) / (a[i] - a[j]))
            elif isinstance(t, AbsLinear):
                ks.append(0.0)
        return np.array(ks)

    def _sampled(self, flat):
        if isinstance(self.spec, Sampled):
            tab = self.spec.table
            return self._table_lookup(tab, flat)
        if self.dim == 1:
            return self._sampled_1d(flat[:, 0])
        return self._sampled_nd(flat)

    def _sampled_1d(self, p):
        radius = self._sample_radius or 8.0
        radius = max(radius, 2.0 * float(np.abs(p).max(initial=0.0)))
        h = 2.0 * radius / (self._sample_count - 1)
        kinks = self._kinks_1d()
        for _ in range(12):
            n = int(round(2 * radius / h)) + 1
            v = np.linspace(-radius, radius, n)
            v = np.union1d(v, kinks[np.abs(kinks) < radius])
            f = self.spec.evaluate(v[:, None])
            vals, arg = discrete_conjugate(v, f, p)
            at_edge = (arg == 0) | (arg == len(v) - 1)
            if not at_edge.any():
                return vals
            radius *= 2.0
        raise NumericalFailure("discrete conjugate not resolved; hamiltonian may not be coercive")

    def _sampled_nd(self, flat):
        radius = self._sample_radius or 8.0
        count = 257 if self.dim == 2 else 33
        # the p-grid hugs the queries: interpolation error scales with its spacing
        pmax = max(float(np.abs(flat).max(initial=0.0)), 1e-12)
        for _ in range(8):
            axes = [(-radius, radius, count)] * self.dim
            tab = SampledConvex.from_function(self.spec.evaluate, axes)
            conj = legendre_nd(tab, [(-1.05 * pmax, 1.05 * pmax, 2 * count + 1)] * self.dim)
            if not conj.boundary_attained.any():
                break
            radius *= 2.0
        else:
            raise NumericalFailure("discrete conjugate not resolved; hamiltonian may not be coercive")
        return conj.interpolate(flat)

    def _table_lookup(self, tab, flat):
        lo = flat.min(axis=0)
        hi = flat.max(axis=0)
        span = np.maximum(hi - lo, 1e-6)
        count = 2 * max(a[2] for a in tab.axes) + 1
        axes = [(lo[i] - 0.05 * span[i], hi[i] + 0.05 * span[i], count) for i in range(tab.dim)]
        conj = legendre_nd(tab, axes)
        return conj.interpolate(flat)

    def sublevel_radius(self, level):
        """Approximate ``max |p - p0|_inf`` over ``{H* <= level}``.

        Probes the axis and diagonal directions and bisects the convex 1D
        restriction; the solver validates the resulting search radius.
        """
        dirs = [d for d in itertools.product((-1, 0, 1), repeat=self.dim) if any(d)]
        if self._route == "line" and np.any(self._family.d):
            # elongated sublevel sets: probe along the line family as well
            u = self._family.d / np.abs(self._family.d).max()
            dirs.extend([u, -u])
        dirs = np.array(dirs, dtype=float)
        best = 0.0
        for d in dirs:
            lo, hi = 0.0, 1.0
            while hi < 1e8 and self(self.p0 + hi * d) <= level:
                lo, hi = hi, 2.0 * hi
            if hi >= 1e8:
                raise NumericalFailure("conjugate sublevel set appears unbounded")
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                if self(self.p0 + mid * d) <= level:
                    lo = mid
                else:
                    hi = mid
            best = max(best, hi)
        return best


def conjugate(spec, **kwargs):
    """Conjugate evaluator for ``spec`` (see :class:`Conjugate`)."""
    return Conjugate(spec, **kwargs)


# ---------------------------------------------------------------------------
# subdifferentials

def subdifferential_at(spec, v0):
    """``dH(v0)`` as a polytope.

    A ``Sum`` returns the Minkowski sum of its terms, keeping in ``parts``
    the term subgradients behind every vertex.
    """
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    if isinstance(spec, Quadratic):
        return Polytope.point(spec.Q @ v0)
    if isinstance(spec, MaxAffine):
        vals = spec.slopes @ v0 + spec.offsets
        active = vals >= vals.max() - ACTIVE_TOL
        return Polytope(spec.slopes[active])
    if isinstance(spec, AbsLinear):
        s = float(spec.p @ v0)
        if abs(s) <= ACTIVE_TOL:
            return Polytope.segment(-spec.p, spec.p)
        return Polytope.point(np.sign(s) * spec.p)
    if isinstance(spec, Hinge):
        return Polytope.point(spec.gradient(v0))
    if isinstance(spec, Sum):
        polys = [subdifferential_at(t, v0) for t in spec.parts]
        return minkowski_sum(*polys)
    if isinstance(spec, Sampled):
        tab = spec.table
        lo_slopes, hi_slopes = [], []
        hs = tab.spacing
        for i in range(tab.dim):
            e = np.zeros(tab.dim)
            e[i] = hs[i]
            lo_b = np.array([a[0] for a in tab.axes])
            hi_b = np.array([a[1] for a in tab.axes])
            f0 = spec.evaluate(v0)
            left = (f0 - spec.evaluate(np.clip(v0 - e, lo_b, hi_b))) / hs[i]
            right = (spec.evaluate(np.clip(v0 + e, lo_b, hi_b)) - f0) / hs[i]
            lo_slopes.append(min(left, right))
            hi_slopes.append(max(left, right))
        box = Polytope.box(lo_slopes, hi_slopes)
        return Polytope(box.vertices, approximate=True)
    raise PreconditionError(f"no subdifferential for variant {spec.variant!r}")


def minimal_norm_subgradient(spec, v0):
    """Minimal-Euclidean-norm element of ``dH(v0)``."""
    P = subdifferential_at(spec, v0)
    p, _ = P.min_norm_point()
    return p


def _term_subgradients(spec, v0, point):
    """Split ``point`` in ``dH(v0)`` of a sum into per-term subgradients."""
    terms = spec.terms()
    if len(terms) == 1:
        return [np.asarray(point, dtype=float)]
    P = subdifferential_at(spec, v0)
    # barycentric weights of point over the sum's vertices carry over to the parts
    _, w = _barycentric(P.vertices, point)
    return [w @ part for part in P.parts]


def _barycentric(V, x):
    from .polytope import _min_norm_combination
    p, w = _min_norm_combination(V - x)
    if np.linalg.norm(p) > 1e-9 * max(1.0, float(np.abs(V).max())):
        raise PreconditionError("point does not lie in the polytope")
    return p, w


def conjugate_subdifferential(spec, p0):
    """``dH*(p0)`` for ``p0`` in ``dH(0)``, as a polytope.

    Uses ``dH*(p0) = {v : H(v) - H(0) = p0 . v}``; for a sum this is the
    intersection of the analogous zero sets of the terms, with ``p0`` split
    into term subgradients at the origin.
    """
    n = spec.dim
    zero = np.zeros(n)
    parts = _term_subgradients(spec, zero, p0)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for term, q in zip(spec.terms(), parts):
        if isinstance(term, Quadratic):
            eig, vec = term._eig
            pos = eig > 1e-12 * max(1.0, eig.max())
            A_eq.extend(vec[:, pos].T)
            b_eq.extend([0.0] * int(pos.sum()))
        elif isinstance(term, AbsLinear):
            a = term.p
            na2 = float(a @ a)
            s = float(q @ a) / na2 if na2 else 0.0
            if na2 == 0:
                continue
            if s >= 1 - 1e-9:
                A_ub.append(-a)
                b_ub.append(0.0)
            elif s <= -1 + 1e-9:
                A_ub.append(a)
                b_ub.append(0.0)
            else:
                A_eq.append(a)
                b_eq.append(0.0)
        elif isinstance(term, MaxAffine):
            h0 = float(term.offsets.max())
            for a, b in zip(term.slopes, term.offsets):
                A_ub.append(a - q)
                b_ub.append(h0 - b)
        elif isinstance(term, Hinge):
            for i in range(n):
                e = np.zeros(n)
                e[i] = 1.0
                A_ub.extend([e, -e])
                b_ub.extend([term.L[i], term.L[i]])
        else:
            raise PreconditionError(
                f"zero set not available for variant {term.variant!r}")
    if not A_ub:
        # only equalities: the set is a subspace, bounded only if it is {0}
        A_ub, b_ub = [np.zeros(n)], [0.0]
    return Polytope.from_halfspaces(np.array(A_ub), np.array(b_ub),
                                    np.array(A_eq).reshape(-1, n), np.array(b_eq))


def directional_limit_check(Hstar, p0, q, t_list):
    """``t * H*(p0 + q/t)`` for each ``t``; ``inf`` marks points off the domain.

    The values are non-increasing in ``t`` for convex ``H*`` with
    ``H*(p0) = 0`` and tend to the support function of ``dH*(p0)`` at ``q``.
    """
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    base = float(Hstar(p0))
    if abs(base) > 1e-9:
        raise PreconditionError(f"H*(p0) = {base:.3g}, expected 0")
    out = []
    for t in t_list:
        val = float(Hstar(p0 + q / float(t)))
        out.append(float(t) * val if np.isfinite(val) else np.inf)
    return out


# ---------------------------------------------------------------------------
# coercivity

def coercify(spec, L, weight=1.0):
    """``spec`` plus a squared hinge vanishing on ``|v|_inf <= L``.

    The result agrees with ``spec`` on the box and grows quadratically
    outside it.  ``L`` may be a scalar or one half-width per axis.
    """
    L = np.broadcast_to(np.asarray(L, dtype=float), (spec.dim,)).copy()
    return Sum((spec, Hinge(L, weight)))


def is_coercive(spec):
    """Structural test for ``H(v)/|v| -> inf``."""
    terms = spec.terms()
    if any(isinstance(t, (Hinge, Sampled)) for t in terms):
        return True
    Qs = [t.Q for t in terms if isinstance(t, Quadratic)]
    if not Qs:
        return False
    eig = np.linalg.eigvalsh(sum(Qs))
    return bool(eig.min() > 1e-12 * max(1.0, eig.max()))


def coercivity_ratio_check(spec, L, V, factor=2.0):
    """Check ``H(Vd)/V >= factor * |H(Ld)|/L`` along axis and diagonal directions.

    ``V`` is the working-grid half-width, ``L`` the box where the original
    hamiltonian is kept.  Returns ``(ok, worst_ratio)``.
    """
    dirs = np.array([d for d in itertools.product((-1, 0, 1), repeat=spec.dim) if any(d)],
                    dtype=float)
    dirs /= np.abs(dirs).max(axis=1, keepdims=True)
    at_L = np.abs(spec.evaluate(L * dirs)) / L
    at_V = spec.evaluate(V * dirs) / V
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(at_L > 0, at_V / at_L, np.where(at_V > 0, np.inf, 0.0))
    worst = float(ratio.min())
    return worst >= factor, worst


def lipschitz_box(spec, L, eta=None, count=33):
    """Per-axis bound on ``|dH/dv_i|`` over the box ``|v|_inf <= L``.

    Convexity makes forward and backward secants of step ``eta`` bracket
    the partial derivatives, so the bound is taken over secants on a grid
    covering the box extended by ``eta``.
    """
    L = np.broadcast_to(np.asarray(L, dtype=float), (spec.dim,))
    if eta is None:
        eta = float(L.max()) / (count - 1)
    axes = [np.linspace(-l - eta, l + eta, count) for l in L]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)
    f0 = spec.evaluate(pts)
    out = np.zeros(spec.dim)
    for i in range(spec.dim):
        e = np.zeros(spec.dim)
        e[i] = eta
        fwd = (spec.evaluate(pts + e) - f0) / eta
        bwd = (f0 - spec.evaluate(pts - e)) / eta
        out[i] = max(np.abs(fwd).max(), np.abs(bwd).max())
    return out
