"""Discrete Legendre-Fenchel transforms of sampled convex functions.

The 1D transform uses the monotone-slope structure of convex samples: the
supremum of ``p*v_i - f_i`` over a convex sequence is attained at the index
where the forward slopes cross ``p``, which ``searchsorted`` finds after a
single pass.  The nD transform factorizes the joint supremum over a product
grid into successive 1D passes.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonConvexInputError, PreconditionError

CONVEX_TOL = 1e-9


def _axis_points(axis):
    lo, hi, count = axis
    return np.linspace(lo, hi, int(count))


def _normalize_axes(axes):
    out = []
    for ax in axes:
        lo, hi, count = float(ax[0]), float(ax[1]), int(ax[2])
        if count < 3:
            raise PreconditionError(f"grid axis needs at least 3 points, got {count}")
        if not hi > lo:
            raise PreconditionError(f"grid axis has non-positive spacing: lo={lo}, hi={hi}")
        out.append((lo, hi, count))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class SampledConvex:
    """A function sampled on a uniform product grid.

    Parameters
    ----------
    axes : sequence of (lo, hi, count)
        One triple per dimension.
    values : ndarray
        Shape ``tuple(count for each axis)``.  Entries outside the domain
        are ignored.
    domain_mask : ndarray of bool, optional
        True where the function is finite.  Defaults to ``isfinite(values)``.
    boundary_attained : ndarray of bool, optional
        Set on transform outputs: True where the supremum was attained on
        the edge of the input grid, so the value may be under-resolved.
    """

    axes: tuple
    values: np.ndarray
    domain_mask: np.ndarray = None
    boundary_attained: np.ndarray = None

    def __post_init__(self):
        axes = _normalize_axes(self.axes)
        shape = tuple(a[2] for a in axes)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != shape:
            raise PreconditionError(f"values shape {vals.shape} does not match grid {shape}")
        mask = np.isfinite(vals) if self.domain_mask is None else np.asarray(self.domain_mask, bool)
        if mask.shape != shape:
            raise PreconditionError("domain_mask shape does not match grid")
        if not mask.any():
            raise PreconditionError("domain_mask is empty")
        if np.any(~np.isfinite(vals[mask])):
            raise PreconditionError("finite entries expected wherever domain_mask is set")
        vals = np.where(mask, vals, np.inf)
        vals.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "domain_mask", mask)
        if self.boundary_attained is not None:
            b = np.asarray(self.boundary_attained, bool).copy()
            b.setflags(write=False)
            object.__setattr__(self, "boundary_attained", b)

    @classmethod
    def from_function(cls, func, axes):
        """Sample a vectorised ``func(points) -> values`` on a grid.

        ``points`` has shape ``(..., n)``.
        """
        axes = _normalize_axes(axes)
        pts = np.stack(np.meshgrid(*[_axis_points(a) for a in axes], indexing="ij"), axis=-1)
        return cls(axes, np.asarray(func(pts), dtype=float))

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(a[2] for a in self.axes)

    @property
    def spacing(self):
        return tuple((hi - lo) / (n - 1) for lo, hi, n in self.axes)

    def grid_points(self):
        """Coordinates per axis."""
        return [_axis_points(a) for a in self.axes]

    def points(self):
        """All grid points, shape ``shape + (n,)``."""
        return np.stack(np.meshgrid(*self.grid_points(), indexing="ij"), axis=-1)

    def check_convex(self, tol=CONVEX_TOL):
        """Raise ``NonConvexInputError`` unless convex along every axis line.

        The tolerance is relative to the largest finite magnitude.
        """
        finite = self.values[self.domain_mask]
        scale = float(np.abs(finite).max())
        thresh = tol * scale
        for axis in range(self.dim):
            m = np.moveaxis(self.domain_mask, axis, -1)
            # the effective domain of a convex function meets each line in an interval
            starts = np.diff(m.astype(np.int8), axis=-1) == 1
            n_starts = starts.sum(axis=-1) + m[..., 0]
            if np.any(n_starts > 1):
                idx = np.argwhere(n_starts > 1)[0]
                line = m[tuple(idx)]
                first = int(np.argmax(line))
                hole = first + int(np.argmin(line[first:]))
                full = tuple(np.insert(idx, axis, hole).tolist())
                raise NonConvexInputError(full, axis, float("nan"))
            v = np.moveaxis(self.values, axis, -1)
            with np.errstate(invalid="ignore"):
                d2 = v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]
            ok = m[..., 2:] & m[..., 1:-1] & m[..., :-2]
            bad = ok & (d2 < -thresh)
            if bad.any():
                idx = np.argwhere(bad)[0]
                line_pos = int(idx[-1]) + 1
                full = tuple(list(idx[:-1][:axis]) + [line_pos] + list(idx[:-1][axis:]))
                raise NonConvexInputError(tuple(int(i) for i in full), axis,
                                          float(d2[tuple(idx)]))

    def interpolate(self, v):
        """Multilinear interpolation; +inf outside the domain or the grid."""
        from scipy.interpolate import RegularGridInterpolator
        vals = np.where(self.domain_mask, self.values, np.nan)
        interp = RegularGridInterpolator(self.grid_points(), vals, bounds_error=False,
                                         fill_value=np.nan)
        v = np.asarray(v, dtype=float)
        if self.dim == 1 and (v.ndim == 0 or v.shape[-1] != 1):
            v = v[..., None]
        out = interp(v.reshape(-1, self.dim)).reshape(v.shape[:-1])
        return np.where(np.isnan(out), np.inf, out)

    # ---- serialization -------------------------------------------------
    def header(self):
        return {
            "dim": self.dim,
            "axes": [list(a) for a in self.axes],
            "payload": "csv",
            "has_boundary_flags": self.boundary_attained is not None,
        }

    def save(self, stem):
        """Write ``<stem>.json`` (header) and ``<stem>.csv`` (values, row-major)."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        stem.with_suffix(".json").write_text(json.dumps(self.header(), indent=2) + "\n")
        with open(stem.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = [f"i{k}" for k in range(self.dim)] + ["value"]
            if self.boundary_attained is not None:
                cols.append("boundary")
            w.writerow(cols)
            for idx in np.ndindex(*self.shape):
                val = self.values[idx]
                row = list(idx) + ["inf" if not self.domain_mask[idx] else f"{val:.17g}"]
                if self.boundary_attained is not None:
                    row.append(int(self.boundary_attained[idx]))
                w.writerow(row)

    @classmethod
    def load(cls, stem):
        stem = Path(stem)
        head = json.loads(stem.with_suffix(".json").read_text())
        axes = _normalize_axes(head["axes"])
        shape = tuple(a[2] for a in axes)
        vals = np.full(shape, np.inf)
        flags = np.zeros(shape, bool) if head.get("has_boundary_flags") else None
        with open(stem.with_suffix(".csv"), newline="") as fh:
            r = csv.reader(fh)
            next(r)
            n = len(shape)
            for row in r:
                idx = tuple(int(c) for c in row[:n])
                vals[idx] = float(row[n])
                if flags is not None:
                    flags[idx] = bool(int(row[n + 1]))
        return cls(axes, vals, np.isfinite(vals), flags)


# ---- 1D kernels ----------------------------------------------------------

def _lower_hull(v, f):
    """Indices of the lower convex hull of points (v_i, f_i), v increasing."""
    hull = []
    for i in range(len(v)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or above the chord a->i
            if (f[b] - f[a]) * (v[i] - v[a]) >= (f[i] - f[a]) * (v[b] - v[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull, dtype=np.intp)


def _conjugate_with_range(v, f, p):
    if len(v) == 1:
        return p * v[0] - f[0], np.zeros(p.shape, dtype=np.intp), np.inf, -np.inf
    slopes = np.diff(f) / np.diff(v)
    if np.all(slopes[1:] >= slopes[:-1]):
        idx = np.arange(len(v))
    else:
        idx = _lower_hull(v, f)
        slopes = np.diff(f[idx]) / np.diff(v[idx])
    # the maximiser is the first hull vertex whose outgoing slope reaches p
    k = np.searchsorted(slopes, p, side="left")
    arg = idx[k]
    return p * v[arg] - f[arg], arg, slopes[0], slopes[-1]


def discrete_conjugate(v, f, p):
    """Exact ``max_i (p*v_i - f_i)`` for sorted ``v`` and any ``p``.

    Parameters
    ----------
    v : ndarray, shape (N,)
        Strictly increasing sample positions.
    f : ndarray, shape (N,)
        Finite sample values; need not be convex.
    p : ndarray
        Query slopes.

    Returns
    -------
    values : ndarray
    argmax : ndarray of int
        Grid index attaining the maximum, as an index into ``v``.
    """
    v = np.asarray(v, dtype=float)
    f = np.asarray(f, dtype=float)
    p = np.asarray(p, dtype=float)
    vals, arg, _, _ = _conjugate_with_range(v, f, p)
    return vals, arg


def _conjugate_axis(v, F, flags, p):
    """Transform along the last axis of ``F`` for every leading index.

    Returns the stacked values, the combined boundary flags and whether any
    line in this pass was non-convex.
    """
    lead = F.shape[:-1]
    out = np.full(lead + (len(p),), -np.inf)
    out_flags = np.zeros(lead + (len(p),), dtype=bool)
    n = len(v)
    for idx in np.ndindex(*lead):
        line = F[idx]
        fin = np.isfinite(line)
        if not fin.any():
            continue
        sel = np.flatnonzero(fin)
        lo_i, hi_i = sel[0], sel[-1]
        vals, arg, s_lo, s_hi = _conjugate_with_range(v[sel], line[sel], p)
        arg_full = sel[arg]
        out[idx] = vals
        edge = np.zeros(len(p), dtype=bool)
        # only the edges of the sampling box count; a masked edge is a true bound
        if lo_i == 0:
            edge |= (arg_full == 0) & (p < s_lo)
        if hi_i == n - 1:
            edge |= (arg_full == n - 1) & (p > s_hi)
        if flags is not None:
            edge |= flags[idx][arg_full]
        out_flags[idx] = edge
    return out, out_flags


def _fast_first_pass(v, F, p):
    """Vectorised pass for fully finite, convex lines (the common case)."""
    h = v[1] - v[0]
    slopes = np.diff(F, axis=-1) / h
    if not np.all(slopes[..., 1:] >= slopes[..., :-1]):
        return None
    lead = F.shape[:-1]
    flat = slopes.reshape(-1, slopes.shape[-1])
    Ff = F.reshape(-1, F.shape[-1])
    out = np.empty((flat.shape[0], len(p)))
    flags = np.empty((flat.shape[0], len(p)), dtype=bool)
    n = len(v)
    for r in range(flat.shape[0]):
        k = np.searchsorted(flat[r], p, side="left")
        out[r] = p * v[k] - Ff[r, k]
        flags[r] = ((k == 0) & (p < flat[r, 0])) | ((k == n - 1) & (p > flat[r, -1]))
    return out.reshape(lead + (len(p),)), flags.reshape(lead + (len(p),))


def default_p_axes(f, pad=0.1):
    """Per-axis p-grid spanning the discrete slope range, padded by ``pad``."""
    axes = []
    for axis, (lo, hi, n) in enumerate(f.axes):
        vals = np.moveaxis(f.values, axis, -1)
        h = (hi - lo) / (n - 1)
        with np.errstate(invalid="ignore"):
            s = np.diff(vals, axis=-1) / h
        s = s[np.isfinite(s)]
        if s.size == 0:
            smin, smax = -1.0, 1.0
        else:
            smin, smax = float(s.min()), float(s.max())
        width = smax - smin
        if width <= 0:
            width = max(1.0, abs(smax))
        axes.append((smin - pad * width, smax + pad * width, n))
    return tuple(axes)


def _as_axes(p_grid, dim):
    if p_grid is None:
        return None
    if isinstance(p_grid, SampledConvex):
        return p_grid.axes
    if dim == 1 and len(p_grid) == 3 and np.isscalar(p_grid[0]):
        return _normalize_axes([p_grid])
    return _normalize_axes(p_grid)


def legendre_1d(f, p_grid=None, check=True):
    """Discrete conjugate of a 1D sampled convex function.

    Parameters
    ----------
    f : SampledConvex
        One-dimensional input.
    p_grid : (lo, hi, count), optional
        Output grid; defaults to the padded discrete slope range.
    check : bool
        Reject non-convex input (default).  With ``check=False`` the result
        is the conjugate of the lower convex envelope of the samples.

    Returns
    -------
    SampledConvex
        With ``boundary_attained`` set where the argmax sits on the first or
        last grid point and ``p`` lies strictly outside the slope range.
    """
    if f.dim != 1:
        raise PreconditionError("legendre_1d expects a one-dimensional sample")
    return legendre_nd(f, p_grid, check=check)


def legendre_nd(f, p_grid=None, check=True):
    """Factorized discrete conjugate for ``f.dim <= 3``.

    Axis ``k`` is transformed in pass ``k``.  The joint supremum over the
    product grid splits into nested 1D suprema because the pairing
    ``p . v`` is a sum over coordinates.  Passes after the first act on
    partial conjugates that may lose discrete convexity, so they go through
    the lower-hull route of :func:`discrete_conjugate`.
    """
    if f.dim > 3:
        raise PreconditionError("transforms are limited to dimension 3")
    if check:
        f.check_convex()
    p_axes = _as_axes(p_grid, f.dim) or default_p_axes(f)
    if len(p_axes) != f.dim:
        raise PreconditionError("p_grid dimension does not match the input")
    F = np.asarray(f.values)
    flags = None
    for axis in range(f.dim):
        v = _axis_points(f.axes[axis])
        p = _axis_points(p_axes[axis])
        # bring the axis being transformed to the end; earlier outputs stay in place
        Fm = np.moveaxis(F, axis, -1)
        Gm = None if flags is None else np.moveaxis(flags, axis, -1)
        res = None
        if axis == 0 and np.all(np.isfinite(Fm)):
            res = _fast_first_pass(v, Fm, p)
        if res is None:
            res = _conjugate_axis(v, Fm, Gm, p)
        vals, fl = res
        F = np.moveaxis(vals, -1, axis)
        flags = np.moveaxis(fl, -1, axis)
        # the next pass maximises p_k v_k + partial sup, i.e. conjugates its negative
        if axis < f.dim - 1:
            F = -F
    return SampledConvex(p_axes, F, np.isfinite(F), flags)


def brute_force_conjugate(f, p_points):
    """``max`` over all finite grid points of ``p . v - f(v)`` (reference)."""
    pts = f.points()[f.domain_mask]
    vals = f.values[f.domain_mask]
    P = np.atleast_2d(np.asarray(p_points, dtype=float)).reshape(-1, f.dim)
    return np.max(P @ pts.T - vals[None, :], axis=1)


def convexify(f):
    """Lower convex envelope on the same grid.

    1D uses the exact lower hull.  For higher dimensions the envelope is the
    discrete biconjugate over a p-grid spanning the slope range, which is
    exact at grid points up to the p-grid resolution.
    """
    if f.dim == 1:
        v = _axis_points(f.axes[0])
        m = f.domain_mask
        sel = np.flatnonzero(m)
        lo, hi = sel[0], sel[-1]
        vs, fs = v[lo:hi + 1], f.values[lo:hi + 1]
        fin = np.isfinite(fs)
        hull = _lower_hull(vs[fin], fs[fin])
        env = np.full(f.shape, np.inf)
        env[lo:hi + 1] = np.interp(vs, vs[fin][hull], fs[fin][hull])
        return SampledConvex(f.axes, env)
    p_axes = default_p_axes(f, pad=0.0)
    p_axes = tuple((a, b, 4 * n) for a, b, n in p_axes)
    g = legendre_nd(f, p_axes, check=False)
    back = legendre_nd(g, f.axes, check=False)
    vals = np.where(f.domain_mask, back.values, np.inf)
    return SampledConvex(f.axes, np.minimum(vals, np.where(f.domain_mask, f.values, np.inf)))
