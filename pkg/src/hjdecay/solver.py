"""Viscosity solutions by the Hopf-Lax formula, plus a monotone scheme.

Three solution paths are provided:

* ``hopf_lax_point`` / ``hopf_lax_field`` on a box grid: direct minimisation
  of ``u0(y) + t H*((x - y)/t)`` over a y-grid with a validated radius;
* the periodic path: for data periodic on the unit lattice the minimisation
  over ``R^m`` folds into a min-plus convolution on the torus grid against
  the kernel ``K(z) = min_n t H*((z + n)/t)``, which is exact for the grid
  restriction of the minimisation;
* ``finite_difference_evolve``: Lax-Friedrichs, used as an independent
  oracle.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .almost_periodic import TrigPolynomial, eval_trig, lift_data, lifted_hamiltonian
from .convex import (Concave, Conjugate, HamiltonianSpec, MaxAffine, coercify, is_coercive,
                     lipschitz_box)
from .errors import PreconditionError, UnresolvedMinimizerError

DEFAULT_H = 1.0 / 1024
MAX_DOUBLINGS = 6


# ---------------------------------------------------------------------------
# grids and fields

@dataclass(frozen=True)
class PeriodicGrid:
    """``count`` points per axis on the unit torus ``[0, 1)^m``."""

    m: int
    count: int

    def __post_init__(self):
        if self.m < 1 or self.count < 3:
            raise PreconditionError("periodic grid needs m >= 1 and count >= 3")

    @property
    def spacing(self):
        return 1.0 / self.count

    @property
    def shape(self):
        return (self.count,) * self.m

    def axes(self):
        return [np.arange(self.count) / self.count] * self.m

    def points(self):
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def to_json(self):
        return {"kind": "periodic", "m": self.m, "count": self.count}


@dataclass(frozen=True)
class BoxGrid:
    """Uniform grid on the box ``[lo, hi]`` with ``count`` points per axis."""

    lo: tuple
    hi: tuple
    count: int

    def __post_init__(self):
        lo, hi = tuple(map(float, np.atleast_1d(self.lo))), tuple(map(float, np.atleast_1d(self.hi)))
        if len(lo) != len(hi) or any(b <= a for a, b in zip(lo, hi)) or self.count < 2:
            raise PreconditionError("box grid needs lo < hi per axis and count >= 2")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def m(self):
        return len(self.lo)

    @property
    def spacing(self):
        return max((b - a) / (self.count - 1) for a, b in zip(self.lo, self.hi))

    @property
    def shape(self):
        return (self.count,) * self.m

    def axes(self):
        return [np.linspace(a, b, self.count) for a, b in zip(self.lo, self.hi)]

    def points(self):
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def to_json(self):
        return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi), "count": self.count}


PROVENANCES = ("hopf_lax", "finite_difference", "lifted", "closed_form")


@dataclass
class SolutionField:
    """Solution values at time ``t`` on a grid."""

    t: float
    grid: object
    values: np.ndarray
    provenance: str
    tolerance: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise PreconditionError(f"unknown provenance {self.provenance!r}")
        if self.t < 0:
            raise PreconditionError("time must be non-negative")

    def sidecar(self):
        return {"t": self.t, "provenance": self.provenance, "grid": self.grid.to_json(),
                "tolerances": {"grid": self.tolerance}, "meta": self.meta}

    def save(self, stem):
        """Write ``<stem>.csv`` (coordinates then value) and ``<stem>.json``."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        pts = self.grid.points().reshape(-1, self.grid.m)
        vals = np.asarray(self.values).reshape(-1)
        with open(stem.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i}" for i in range(self.grid.m)] + ["value"])
            for p, v in zip(pts, vals):
                w.writerow([f"{c:.12g}" for c in p] + [f"{v:.12g}"])
        stem.with_suffix(".json").write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")


def grid_tolerance(lip_u0, h, m, L=None):
    """Discretisation bound for a grid-restricted Hopf-Lax minimum.

    Restricting the minimiser to a grid of spacing ``h`` costs at most the
    Lipschitz constant of the objective times ``h sqrt(m)/2``.  The objective
    combines ``u0`` with the kernel, whose relevant slopes are bounded by
    the solution gradients, that is by ``lip_u0`` or the coercification box.
    """
    kernel = lip_u0 if L is None else max(lip_u0, float(np.linalg.norm(np.atleast_1d(L))))
    return (lip_u0 + kernel) * h * math.sqrt(m) / 2


# ---------------------------------------------------------------------------
# helpers

def _as_conjugate(H):
    if isinstance(H, Conjugate):
        return H
    if isinstance(H, HamiltonianSpec):
        return Conjugate(H)
    raise PreconditionError("expected a hamiltonian spec or its conjugate")


def _evaluator(u0, dim):
    if isinstance(u0, TrigPolynomial):
        return lambda y: eval_trig(u0, y)
    if callable(u0):
        return u0
    raise PreconditionError("initial data must be a trigonometric polynomial or a callable")


def _oscillation_bound(u0):
    if isinstance(u0, TrigPolynomial):
        from .almost_periodic import mean_value
        return 2.0 * (u0.sup_bound() - abs(mean_value(u0)))
    return None


def prepare_hamiltonian(H, lipschitz_per_axis):
    """Coercify a non-coercive convex ``H`` on the gradient box of the data."""
    if is_coercive(H):
        return H, None
    L = np.maximum(np.asarray(lipschitz_per_axis, dtype=float), 1e-6)
    return coercify(H, L), L


# ---------------------------------------------------------------------------
# direct Hopf-Lax on R^n

def hopf_lax_point(u0, Hstar, t, x, R=None, h=DEFAULT_H, osc=None, return_argmin=False):
    """Grid minimum of ``u0(y) + t H*((x - y)/t)`` over ``|y - c|_inf <= R``.

    The grid is centred at ``c = x - t p0`` where the kernel vanishes.  If
    the minimiser lands on the outermost ring the radius is doubled, up to
    six times.  Ties go to the lexicographically smallest ``y``.
    """
    conj = _as_conjugate(Hstar)
    n = conj.dim
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f = _evaluator(u0, n)
    if t < 0:
        raise PreconditionError("t must be non-negative")
    if t == 0:
        val = float(np.asarray(f(x[None, :] if n > 1 else x)).reshape(-1)[0])
        return (val, x) if return_argmin else val
    if osc is None:
        osc = _oscillation_bound(u0)
    if R is None:
        if osc is None:
            R = 1.0 + t
        else:
            R = t * conj.sublevel_radius(osc / t) + 1.0
    center = x - t * conj.p0
    for _ in range(MAX_DOUBLINGS + 1):
        J = int(math.ceil(R / h))
        offs = np.arange(-J, J + 1) * h
        grids = np.meshgrid(*[center[i] + offs for i in range(n)], indexing="ij")
        ys = np.stack(grids, axis=-1).reshape(-1, n)
        best, best_i = np.inf, -1
        step = 1 << 20
        for s in range(0, len(ys), step):
            y = ys[s:s + step]
            kern = t * np.asarray(conj((x - y) / t)).reshape(len(y))
            vals = np.asarray(f(y)).reshape(len(y)) + kern
            i = int(np.argmin(vals))
            if vals[i] < best:
                best, best_i = float(vals[i]), s + i
        idx = np.unravel_index(best_i, (2 * J + 1,) * n)
        if all(0 < k < 2 * J for k in idx):
            return (best, ys[best_i]) if return_argmin else best
        R *= 2.0
    raise UnresolvedMinimizerError(
        f"minimiser stays on the search boundary after {MAX_DOUBLINGS} doublings (R={R / 2:g})")


def hopf_lax_field(u0, Hstar, t, grid, R=None, h=DEFAULT_H):
    """Hopf-Lax solution on a grid.

    A :class:`PeriodicGrid` requires data periodic on the unit lattice and
    uses the torus path at the grid's own resolution; a :class:`BoxGrid`
    evaluates :func:`hopf_lax_point` at every node.
    """
    conj = _as_conjugate(Hstar)
    if isinstance(grid, PeriodicGrid):
        f = _evaluator(u0, grid.m)
        pts = grid.points()
        v0 = np.asarray(f(pts if grid.m > 1 else pts[..., 0]), dtype=float).reshape(grid.shape)
        vals, info = hopf_lax_torus(v0, conj, t)
        lip = _lipschitz(u0, v0, grid)
        L = conj.hinge.L if conj.hinge is not None else None
        tol = grid_tolerance(lip, grid.spacing, grid.m, L)
        return SolutionField(float(t), grid, vals, "hopf_lax", tol, info)
    pts = grid.points().reshape(-1, grid.m)
    osc = _oscillation_bound(u0)
    vals = np.array([hopf_lax_point(u0, conj, t, p, R=R, h=h, osc=osc) for p in pts])
    lip = _lipschitz(u0, None, grid)
    L = conj.hinge.L if conj.hinge is not None else None
    return SolutionField(float(t), grid, vals.reshape(grid.shape), "hopf_lax",
                         grid_tolerance(lip, h, grid.m, L))


def _lipschitz(u0, samples, grid):
    if isinstance(u0, TrigPolynomial):
        return u0.lipschitz()
    if samples is None:
        return 0.0
    h = grid.spacing
    slopes = [np.abs(np.diff(samples, axis=i, append=np.take(samples, [0], axis=i))).max() / h
              for i in range(samples.ndim)]
    return float(np.linalg.norm(slopes))


# ---------------------------------------------------------------------------
# torus path

@dataclass
class FoldedKernel:
    """``K(z) = min_n t H*((z + n)/t)`` on the torus grid, restricted to
    lifts whose values can matter for data of oscillation ``osc``."""

    values: np.ndarray
    t: float
    level: float
    lift_radius: int
    evaluations: int
    count: int

    @property
    def m(self):
        return self.values.ndim


def _cell_lower_bounds(phi, origins, size):
    """Lower bound of a convex ``phi`` on boxes ``origin + [0, size]^m``.

    For ``z`` in a box with centre ``c``, ``2c - z`` is in the box too, so
    convexity gives ``phi(z) >= 2 phi(c) - max_corners phi``.
    """
    m = origins.shape[1]
    corners = np.array(np.meshgrid(*[[0.0, size]] * m, indexing="ij")).reshape(m, -1).T
    cmax = np.full(len(origins), -np.inf)
    for c in corners:
        cmax = np.maximum(cmax, phi(origins + c))
    centre = phi(origins + 0.5 * size)
    with np.errstate(invalid="ignore"):
        lb = 2.0 * centre - cmax
    return np.where(np.isnan(lb), -np.inf, lb)


def folded_kernel(Hstar, t, count, m, osc, max_doublings=MAX_DOUBLINGS, sub=16):
    """Tabulate the folded kernel on ``count^m`` torus nodes.

    Only lifts ``z`` with ``t H*(z/t) <= osc + t H*(z0/t)`` can be minimisers
    (``z0`` the node nearest ``t p0``).  Unit cells, then sub-cells of
    ``sub`` nodes, are discarded when a convexity lower bound exceeds that
    level.  The lift box is doubled until every cell on its boundary ring
    is discarded, which by convexity rules out everything outside.
    """
    conj = _as_conjugate(Hstar)
    if conj.dim != m:
        raise PreconditionError("conjugate dimension does not match the torus")

    def phi(z):
        return t * np.asarray(conj(z / t), dtype=float).reshape(len(z))

    tp0 = t * conj.p0
    z0 = np.round(tp0 * count) / count
    level = osc + float(phi(z0[None, :])[0])
    base = np.floor(tp0).astype(int)
    try:
        r = t * conj.sublevel_radius(level / t)
    except Exception:
        r = t
    rc = int(math.ceil(r)) + 1
    for _ in range(max_doublings + 1):
        rng = np.arange(-rc, rc + 1)
        cells = np.stack(np.meshgrid(*[rng] * m, indexing="ij"), axis=-1).reshape(-1, m) + base
        lb = _cell_lower_bounds(phi, cells.astype(float), 1.0)
        keep = lb <= level
        ring = np.any(np.abs(cells - base) == rc, axis=1)
        if not np.any(keep & ring):
            break
        rc *= 2
    else:
        raise UnresolvedMinimizerError("kernel support not bounded within the lift budget")
    cells = cells[keep]
    h = 1.0 / count
    K = np.full((count,) * m, np.inf)
    flatK = K.reshape(-1)
    evals = 0
    if count % sub == 0 and sub > 1:
        nsub = count // sub
        sub_off = np.stack(np.meshgrid(*[np.arange(nsub)] * m, indexing="ij"), axis=-1).reshape(-1, m)
        fine_off = np.stack(np.meshgrid(*[np.arange(sub)] * m, indexing="ij"), axis=-1).reshape(-1, m)
    else:
        nsub, sub = 1, count
        sub_off = np.zeros((1, m), dtype=int)
        fine_off = np.stack(np.meshgrid(*[np.arange(count)] * m, indexing="ij"), axis=-1).reshape(-1, m)
    strides = count ** np.arange(m - 1, -1, -1)
    batch = max(1, 400_000 // len(fine_off))
    for start in range(0, len(cells), max(1, 4096 // len(sub_off))):
        chunk = cells[start:start + max(1, 4096 // len(sub_off))]
        origins_idx = (chunk[:, None, :] * count + sub_off[None, :, :] * sub).reshape(-1, m)
        if nsub > 1:
            lb = _cell_lower_bounds(phi, origins_idx * h, sub * h)
            origins_idx = origins_idx[lb <= level]
        for b in range(0, len(origins_idx), batch):
            o = origins_idx[b:b + batch]
            idx = (o[:, None, :] + fine_off[None, :, :]).reshape(-1, m)
            vals = phi(idx * h)
            evals += len(vals)
            tor = np.mod(idx, count) @ strides
            # keep the smallest value per torus node
            order = np.lexsort((vals, tor))
            tor_s, vals_s = tor[order], vals[order]
            first = np.concatenate([[True], tor_s[1:] != tor_s[:-1]])
            np.minimum.at(flatK, tor_s[first], vals_s[first])
    return FoldedKernel(K, float(t), level, rc, evals, count)


def minplus_torus(v0, K, osc=None):
    """``v[y] = min_j v0[y - j] + K[j]`` with cyclic indices.

    Offsets are visited in increasing ``K``; once ``K[j] + min v0`` reaches
    the current ``max v`` no remaining offset can lower any node.
    """
    m = v0.ndim
    M = v0.shape[0]
    if osc is None:
        osc = float(v0.max() - v0.min())
    kmin = float(np.min(K))
    vmin = float(v0.min())
    offs = np.argwhere(K <= kmin + osc + 1e-12 * max(1.0, abs(kmin)))
    kv = K[tuple(offs.T)]
    order = np.argsort(kv, kind="stable")
    offs, kv = offs[order], kv[order]
    out = np.full(v0.shape, np.inf)
    if m == 1:
        y = np.arange(M)
        for s in range(0, len(offs), 256):
            if kv[s] + vmin >= out.max():
                break
            j = offs[s:s + 256, 0]
            cand = v0[(y[:, None] - j[None, :]) % M] + kv[s:s + 256][None, :]
            out = np.minimum(out, cand.min(axis=1))
        return out
    ext = np.tile(v0, (2,) * m)
    for i, (j, k) in enumerate(zip(offs, kv)):
        if i % 64 == 0 and k + vmin >= out.max():
            break
        sl = tuple(slice(M - int(ji), 2 * M - int(ji)) for ji in j)
        np.minimum(out, ext[sl] + k, out=out)
    return out


def hopf_lax_torus(v0, Hstar, t, osc=None):
    """Hopf-Lax values on the torus grid for periodic samples ``v0``.

    Returns ``(values, info)``.
    """
    v0 = np.asarray(v0, dtype=float)
    if t == 0:
        return v0.copy(), {"kernel_evaluations": 0}
    osc = float(v0.max() - v0.min()) if osc is None else osc
    ker = folded_kernel(Hstar, t, v0.shape[0], v0.ndim, osc)
    vals = minplus_torus(v0, ker.values, osc)
    return vals, {"kernel_evaluations": ker.evaluations, "lift_radius": ker.lift_radius}


def torus_probe_values(v0, kernel, y):
    """Hopf-Lax values at arbitrary torus points ``y`` (shape ``(k, m)``).

    The minimisation runs over the same kernel nodes as the grid solve but
    evaluates the trigonometric polynomial exactly at ``y - z``.
    """
    K = kernel.values
    M = K.shape[0]
    kmin = float(K.min())
    osc = 2.0 * v0.sup_bound()
    offs = np.argwhere(K <= kmin + osc)
    z = offs / M
    kv = K[tuple(offs.T)]
    y = np.atleast_2d(np.asarray(y, dtype=float))
    out = np.empty(len(y))
    for i, yi in enumerate(y):
        pts = yi[None, :] - z
        out[i] = float(np.min(eval_trig(v0, pts if v0.dim > 1 else pts[:, 0]) + kv))
    return out


# ---------------------------------------------------------------------------
# lifted solves

def default_torus_count(m):
    return {1: 1024, 2: 256}.get(m, 32)


@dataclass
class LiftedProblem:
    """Lift of ``(u0, H)`` to the torus with a coercified hamiltonian."""

    lift: object
    H_lifted: HamiltonianSpec
    H_torus: HamiltonianSpec
    L: np.ndarray
    conj: Conjugate
    count: int
    _kernels: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.lift.m

    def kernel(self, t):
        key = float(t)
        if key not in self._kernels:
            v0 = self.samples()
            osc = float(v0.max() - v0.min())
            self._kernels[key] = folded_kernel(self.conj, key, self.count, self.m, osc)
        return self._kernels[key]

    def samples(self):
        if not hasattr(self, "_samples"):
            grid = PeriodicGrid(self.m, self.count)
            pts = grid.points()
            self._samples = np.asarray(eval_trig(self.lift.v0, pts if self.m > 1 else pts[..., 0]))
        return self._samples

    def tolerance(self):
        lip = self.lift.v0.lipschitz()
        return grid_tolerance(lip, 1.0 / self.count, self.m, self.L)


def lift_problem(u0, H, module=None, count=None, seed=0):
    """Build the torus problem for ``u0`` and convex ``H``.

    ``H~(w) = H(Lambda^T w)`` is coercified when needed with per-axis
    half-widths ``2 pi sum_k |k_j| |a_k|``, the Lipschitz bounds of ``v0``.
    """
    from .almost_periodic import build_lift
    lift = build_lift(u0, module, seed=seed) if module is not None else lift_data(u0, seed=seed)
    Ht = lifted_hamiltonian(H, lift.Lambda)
    H_torus, L = prepare_hamiltonian(Ht, lift.v0.lipschitz_per_axis())
    count = count or default_torus_count(lift.m)
    return LiftedProblem(lift, Ht, H_torus, L, Conjugate(H_torus), count)


def lifted_field(problem, t):
    """Torus field ``v(t, .)`` on the problem's grid."""
    v0 = problem.samples()
    grid = PeriodicGrid(problem.m, problem.count)
    if t == 0:
        return SolutionField(0.0, grid, v0.copy(), "lifted", 0.0)
    ker = problem.kernel(t)
    vals = minplus_torus(v0, ker.values, float(v0.max() - v0.min()))
    return SolutionField(float(t), grid, vals, "lifted", problem.tolerance(),
                         {"kernel_evaluations": ker.evaluations, "m": problem.m})


def lifted_solve(u0, H, module, t, x_probes, count=None, problem=None):
    """``u(t, x) = v(t, Lambda x mod 1)`` at the given probes."""
    problem = problem or lift_problem(u0, H, module, count)
    x = np.asarray(x_probes, dtype=float)
    if u0.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    y = problem.lift.project(x.reshape(-1, u0.dim))
    if t == 0:
        return eval_trig(problem.lift.v0, y if problem.m > 1 else y[:, 0])
    return torus_probe_values(problem.lift.v0, problem.kernel(t), y)


# ---------------------------------------------------------------------------
# monotone scheme

def finite_difference_evolve(u0_samples, H, t_final, grid, cfl=0.9, L=None, eta=None):
    """Lax-Friedrichs on a periodic grid.

    The viscosity coefficient of axis ``i`` bounds ``|dH/dv_i|`` over the
    gradient box ``|v|_inf <= L`` (default: the largest one-sided
    difference of the samples) extended by ``eta``.  The time step is
    ``cfl * h / sum_i alpha_i``.
    """
    if not (0 < cfl <= 1):
        raise PreconditionError("cfl must lie in (0, 1]")
    if not isinstance(grid, PeriodicGrid):
        raise PreconditionError("the monotone scheme runs on a periodic grid")
    u = np.array(u0_samples, dtype=float).reshape(grid.shape)
    h = grid.spacing
    m = grid.m
    if L is None:
        L = np.array([np.abs(np.roll(u, -1, axis=i) - u).max() / h for i in range(m)])
    L = np.maximum(np.broadcast_to(np.asarray(L, dtype=float), (m,)), 1e-12)
    eta = float(L.max()) * 0.05 + h if eta is None else eta
    alpha = np.maximum(lipschitz_box(H, L + eta, eta=eta / 4), 1e-12)
    dt = cfl * h / float(alpha.sum())
    steps = max(1, int(math.ceil(t_final / dt)))
    dt = t_final / steps
    for _ in range(steps):
        fwd = [np.roll(u, -1, axis=i) for i in range(m)]
        bwd = [np.roll(u, 1, axis=i) for i in range(m)]
        grad = np.stack([(f - b) / (2 * h) for f, b in zip(fwd, bwd)], axis=-1)
        visc = sum(alpha[i] / 2 * (fwd[i] - 2 * u + bwd[i]) / h for i in range(m))
        u = u - dt * H.evaluate(grad) + dt * visc
    return SolutionField(float(t_final), grid, u, "finite_difference", 0.0,
                         {"steps": steps, "dt": dt, "alpha": alpha.tolist()})


# ---------------------------------------------------------------------------
# concave hamiltonians

def concave_to_convex(H):
    """``C(v) = -H(-v)`` for a concave ``H``."""
    if isinstance(H, Concave):
        return H.convex_part
    if isinstance(H, MaxAffine) and len(H.slopes) == 1:
        return MaxAffine(H.slopes, -H.offsets)
    raise PreconditionError("expected a concave hamiltonian (Concave wrapper or affine)")


def solve_concave(u0, H_concave, t, grid):
    """Solve with concave ``H`` as ``u = -w``.

    ``w`` solves the problem with convex hamiltonian ``-H(-v)`` and data
    ``-u0``.
    """
    C = concave_to_convex(H_concave)
    neg = u0.scaled(-1.0) if isinstance(u0, TrigPolynomial) else (lambda y: -np.asarray(u0(y)))
    lip = u0.lipschitz_per_axis() if isinstance(u0, TrigPolynomial) else None
    if lip is None:
        C_used = C
    else:
        C_used, _ = prepare_hamiltonian(C, lip)
    w = hopf_lax_field(neg, Conjugate(C_used), t, grid)
    return SolutionField(w.t, grid, -w.values, w.provenance, w.tolerance,
                         dict(w.meta, transformed=True))


def solve_periodic(u0, H, t, count=1024):
    """Hopf-Lax field for periodic trigonometric data on ``count^n`` nodes.

    Non-coercive ``H`` is coercified on the data's gradient box first.
    """
    if not u0.is_integer():
        raise PreconditionError("periodic solve needs integer frequencies")
    Hc, _ = prepare_hamiltonian(H, u0.lipschitz_per_axis())
    return hopf_lax_field(u0, Conjugate(Hc), t, PeriodicGrid(u0.dim, count))
