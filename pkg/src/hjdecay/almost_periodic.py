"""Trigonometric polynomials with exact frequencies, frequency modules and lifts.

Frequencies are vectors whose coordinates are rational combinations of a
declared list of base generators ``1, g_2, ..., g_r`` (for instance ``1`` and
``sqrt2``).  The generators are assumed rationally independent; that is a
user contract and is not verified.  All group operations on frequencies
are exact, and each generator carries a float shadow for evaluation.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .convex import AbsLinear, Concave, Hinge, MaxAffine, Quadratic, Sampled, Sum
from .errors import NumericalFailure, PreconditionError


def _shadow_of(name):
    if name == "1":
        return 1.0
    m = re.fullmatch(r"sqrt\(?(\d+)\)?", name)
    if m:
        return math.sqrt(int(m.group(1)))
    if name == "pi":
        return math.pi
    if name == "e":
        return math.e
    raise PreconditionError(f"no float shadow known for generator {name!r}; pass one explicitly")


@dataclass(frozen=True)
class BaseGenerators:
    """Ordered symbolic generators; the first is always ``"1"``."""

    names: tuple = ("1",)
    shadows: tuple = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if not names or names[0] != "1":
            raise PreconditionError('the first base generator must be "1"')
        if len(set(names)) != len(names):
            raise PreconditionError("base generator names must be distinct")
        shadows = self.shadows
        if shadows is None:
            shadows = tuple(_shadow_of(n) for n in names)
        shadows = tuple(float(s) for s in shadows)
        if len(shadows) != len(names) or shadows[0] != 1.0:
            raise PreconditionError("one float shadow per generator, with 1.0 first")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "shadows", shadows)

    @property
    def rank(self):
        return len(self.names)

    def shadow_vector(self):
        return np.array(self.shadows)

    def parse(self, text):
        """Parse ``"1/2 + 3*sqrt2 - sqrt3/4"`` into rational coefficients."""
        coeffs = [Fraction(0)] * self.rank
        s = str(text).replace(" ", "")
        if not s:
            raise PreconditionError("empty frequency expression")
        for sign, body in re.findall(r"([+-]?)([^+-]+)", s):
            factor = Fraction(-1 if sign == "-" else 1)
            name = "1"
            for piece in re.split(r"(?=[*/])", body):
                op, tok = ("*", piece) if piece[0] not in "*/" else (piece[0], piece[1:])
                if re.fullmatch(r"\d+(\.\d+)?", tok):
                    val = Fraction(tok)
                elif tok in self.names:
                    if name != "1" or op == "/":
                        raise PreconditionError(f"non-linear frequency term {body!r}")
                    name, val = tok, Fraction(1)
                else:
                    raise PreconditionError(f"unknown token {tok!r} in frequency {text!r}")
                factor = factor * val if op == "*" else factor / val
            coeffs[self.names.index(name)] += factor
        return tuple(coeffs)


SCALAR = BaseGenerators(("1",))


class FrequencyVector:
    """Exact frequency vector: an ``n x r`` matrix of rationals.

    Row ``i`` holds the coefficients of coordinate ``i`` over the base
    generators.
    """

    __slots__ = ("base", "coeffs", "_hash")

    def __init__(self, base, coeffs):
        rows = []
        for row in coeffs:
            row = tuple(Fraction(c) for c in (row if isinstance(row, (list, tuple)) else [row]))
            if len(row) < base.rank:
                row = row + (Fraction(0),) * (base.rank - len(row))
            if len(row) != base.rank:
                raise PreconditionError("frequency coordinate has too many generator coefficients")
            rows.append(row)
        if not rows:
            raise PreconditionError("frequency vectors need at least one coordinate")
        self.base = base
        self.coeffs = tuple(rows)
        self._hash = hash((base.names, self.coeffs))

    @classmethod
    def integer(cls, k, base=SCALAR):
        return cls(base, [[int(c)] for c in k])

    @classmethod
    def parse(cls, base, coords):
        """One expression string (or number) per coordinate."""
        return cls(base, [base.parse(c) for c in coords])

    @property
    def dim(self):
        return len(self.coeffs)

    def is_zero(self):
        return all(c == 0 for row in self.coeffs for c in row)

    def __eq__(self, other):
        return (isinstance(other, FrequencyVector) and self.base.names == other.base.names
                and self.coeffs == other.coeffs)

    def __hash__(self):
        return self._hash

    def _check(self, other):
        if self.base.names != other.base.names or self.dim != other.dim:
            raise PreconditionError("frequency vectors over different bases or dimensions")

    def __add__(self, other):
        self._check(other)
        return FrequencyVector(self.base, [[a + b for a, b in zip(r, s)]
                                           for r, s in zip(self.coeffs, other.coeffs)])

    def __neg__(self):
        return FrequencyVector(self.base, [[-a for a in r] for r in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, k):
        if not isinstance(k, (int, Fraction)):
            raise PreconditionError("frequency vectors scale by exact numbers only")
        return FrequencyVector(self.base, [[a * k for a in r] for r in self.coeffs])

    __rmul__ = __mul__

    def shadow(self):
        g = self.base.shadow_vector()
        return np.array([float(sum(float(c) * gi for c, gi in zip(row, g))) for row in self.coeffs])

    def flat(self):
        return [c for row in self.coeffs for c in row]

    def sort_key(self):
        return tuple(self.shadow()) + tuple(self.flat())

    def to_json(self):
        return [[[c.numerator, c.denominator] for c in row] for row in self.coeffs]

    @classmethod
    def from_json(cls, base, data):
        return cls(base, [[Fraction(int(n), int(d)) for n, d in row] for row in data])

    def __repr__(self):
        parts = []
        for row in self.coeffs:
            items = [f"{c}" + ("" if name == "1" else f"*{name}")
                     for c, name in zip(row, self.base.names) if c != 0]
            parts.append(" + ".join(items) if items else "0")
        return "Freq(" + ", ".join(parts) + ")"


class TrigPolynomial:
    """Real trigonometric polynomial ``sum_l a_l exp(2 pi i l . x)``.

    Construction checks conjugate symmetry ``a_{-l} = conj(a_l)`` and drops
    zero coefficients, so the stored keys are exactly the spectrum.
    """

    def __init__(self, dim, terms, base=None, sym_tol=1e-12):
        self.dim = int(dim)
        items = dict(terms)
        if base is None:
            base = next(iter(items)).base if items else SCALAR
        self.base = base
        clean = {}
        for lam, a in items.items():
            if lam.dim != self.dim or lam.base.names != base.names:
                raise PreconditionError("term frequency does not match the polynomial's space")
            a = complex(a)
            if a != 0:
                clean[lam] = clean.get(lam, 0) + a
        clean = {k: v for k, v in clean.items() if abs(v) > 0}
        scale = max([abs(a) for a in clean.values()], default=1.0)
        for lam, a in clean.items():
            partner = clean.get(-lam, 0)
            if abs(partner - a.conjugate()) > sym_tol * max(1.0, scale):
                raise PreconditionError(f"coefficients at {lam} and its negative are not conjugate")
        self.terms = dict(sorted(clean.items(), key=lambda kv: kv[0].sort_key()))

    # builders --------------------------------------------------------------
    @classmethod
    def zero(cls, dim, base=SCALAR):
        return cls(dim, {}, base)

    @classmethod
    def constant(cls, value, dim=1, base=SCALAR):
        lam = FrequencyVector(base, [[0]] * dim)
        return cls(dim, {lam: complex(value)}, base)

    @classmethod
    def sin(cls, lam, amplitude=1.0):
        """``amplitude * sin(2 pi lam . x)``."""
        a = 0.5j * float(amplitude)
        return cls(lam.dim, {lam: -a, -lam: a}, lam.base)

    @classmethod
    def cos(cls, lam, amplitude=1.0):
        """``amplitude * cos(2 pi lam . x)``."""
        a = 0.5 * float(amplitude)
        if lam.is_zero():
            return cls(lam.dim, {lam: 2 * a}, lam.base)
        return cls(lam.dim, {lam: a, -lam: a}, lam.base)

    def __add__(self, other):
        if other.dim != self.dim:
            raise PreconditionError("cannot add polynomials of different dimension")
        if not self.terms:
            return other
        if not other.terms:
            return self
        merged = dict(self.terms)
        for k, v in other.terms.items():
            merged[k] = merged.get(k, 0) + v
        merged = {k: v for k, v in merged.items() if abs(v) > 1e-15}
        return TrigPolynomial(self.dim, merged, self.base)

    def scaled(self, c):
        c = float(c)
        return TrigPolynomial(self.dim, {k: c * v for k, v in self.terms.items()}, self.base)

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)

    # numerics ---------------------------------------------------------------
    @property
    def spectrum(self):
        return list(self.terms)

    @cached_property
    def _arrays(self):
        if not self.terms:
            return np.zeros((0, self.dim)), np.zeros(0, dtype=complex)
        F = np.array([k.shadow() for k in self.terms])
        a = np.array(list(self.terms.values()), dtype=complex)
        return F, a

    def frequency_matrix(self):
        return self._arrays[0]

    def coefficients(self):
        return self._arrays[1]

    def __call__(self, x):
        return eval_trig(self, x)

    def gradient(self, x):
        x = _points(x, self.dim)
        F, a = self._arrays
        if not len(a):
            return np.zeros(x.shape)
        phase = np.exp(2j * np.pi * (x @ F.T))
        return np.real((phase * a) @ (2j * np.pi * F))

    def lipschitz_per_axis(self):
        """``2 pi sum_l |l_i| |a_l|`` for each coordinate ``i``."""
        F, a = self._arrays
        return 2 * np.pi * (np.abs(F).T @ np.abs(a)) if len(a) else np.zeros(self.dim)

    def lipschitz(self):
        """Euclidean Lipschitz bound ``2 pi sum_l |l| |a_l|``."""
        F, a = self._arrays
        return float(2 * np.pi * np.sum(np.linalg.norm(F, axis=1) * np.abs(a))) if len(a) else 0.0

    def sup_bound(self):
        return float(np.sum(np.abs(self._arrays[1])))

    def is_integer(self):
        """True when every frequency lies in ``Z^n``."""
        return all(row[0].denominator == 1 and not any(row[1:])
                   for lam in self.terms for row in lam.coeffs)

    # serialization ----------------------------------------------------------
    def to_json(self):
        out = {"dim": self.dim, "base_generators": list(self.base.names), "terms": []}
        if any(_shadow_safe(n) is None for n in self.base.names):
            out["shadows"] = list(self.base.shadows)
        for lam, a in self.terms.items():
            out["terms"].append({"freq": lam.to_json(), "re": a.real, "im": a.imag})
        return out

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        base = BaseGenerators(tuple(obj["base_generators"]), obj.get("shadows"))
        terms = {}
        for t in obj["terms"]:
            lam = FrequencyVector.from_json(base, t["freq"])
            terms[lam] = complex(t["re"], t["im"])
        return cls(obj["dim"], terms, base)

    def __repr__(self):
        return f"TrigPolynomial(dim={self.dim}, terms={len(self.terms)})"


def _shadow_safe(name):
    try:
        return _shadow_of(name)
    except PreconditionError:
        return None


def _points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def eval_trig(u0, x, return_imag=False):
    """Real part of the exponential sum at ``x`` (shape ``(..., n)``)."""
    pts = _points(x, u0.dim)
    F, a = u0._arrays
    if not len(a):
        val = np.zeros(pts.shape[:-1])
        imag = np.zeros_like(val)
    else:
        z = np.exp(2j * np.pi * (pts @ F.T)) @ a
        val, imag = z.real, z.imag
    val = float(val) if np.ndim(val) == 0 else val
    if return_imag:
        return val, imag
    return val


def mean_value(u0):
    """The zero-frequency coefficient, taken exactly from storage."""
    zero = FrequencyVector(u0.base, [[0]] * u0.dim)
    return float(u0.terms.get(zero, 0j).real)


def bohr_coefficient_numeric(u0, lam, R, points_per_unit=64):
    """Cube average of ``u0(x) exp(-2 pi i lam . x)`` over ``|x|_inf <= R/2``.

    Tensor midpoint rule with ``points_per_unit`` nodes per unit length.
    Each exponential term factorizes over the axes, so the cost is linear
    in the number of nodes per axis.
    """
    if not R > 0:
        raise PreconditionError("cube side R must be positive")
    count = max(1, int(round(points_per_unit * R)))
    nodes = -R / 2 + (np.arange(count) + 0.5) * (R / count)
    F, a = u0._arrays
    if not len(a):
        return 0j
    target = lam.shadow() if isinstance(lam, FrequencyVector) else np.atleast_1d(lam)
    total = 0j
    for f, coef in zip(F, a):
        diff = f - target
        factor = 1.0 + 0j
        for d in diff:
            if d == 0:
                continue
            factor *= np.mean(np.exp(2j * np.pi * d * nodes))
        total += coef * factor
    return complex(total)


def bohr_convergence_report(u0, lam, radii=(10, 100, 1000), points_per_unit=64):
    """Rows ``(R, numeric, |numeric - stored|)`` for the listed cube sides."""
    exact = u0.terms.get(lam, 0j) if isinstance(lam, FrequencyVector) else None
    rows = []
    for R in radii:
        val = bohr_coefficient_numeric(u0, lam, R, points_per_unit)
        err = abs(val - exact) if exact is not None else None
        rows.append((float(R), val, err))
    return rows


# ---------------------------------------------------------------------------
# frequency modules

def hermite_normal_form(rows):
    """Row-style Hermite normal form over the integers.

    Returns ``(H, pivots)`` where ``H`` holds the non-zero rows in echelon
    form, every pivot positive and entries above a pivot reduced into
    ``[0, pivot)``.
    """
    A = [list(map(int, r)) for r in rows]
    m = len(A)
    ncols = len(A[0]) if A else 0
    r = 0
    pivots = []
    for col in range(ncols):
        if r >= m:
            break
        while True:
            nz = [i for i in range(r, m) if A[i][col] != 0]
            if not nz:
                break
            i_min = min(nz, key=lambda i: (abs(A[i][col]), i))
            A[r], A[i_min] = A[i_min], A[r]
            clean = True
            for i in range(r + 1, m):
                if A[i][col]:
                    q = A[i][col] // A[r][col]
                    A[i] = [x - q * y for x, y in zip(A[i], A[r])]
                    if A[i][col]:
                        clean = False
            if clean:
                break
        if not any(A[i][col] for i in range(r, m)):
            continue
        if A[r][col] < 0:
            A[r] = [-x for x in A[r]]
        for i in range(r):
            q = A[i][col] // A[r][col]
            if q:
                A[i] = [x - q * y for x, y in zip(A[i], A[r])]
        pivots.append(col)
        r += 1
    return [row for row in A[:r]], pivots


class FrequencyModule:
    """Free abelian group with an exact basis and generator coordinates."""

    def __init__(self, generators, basis, coordinates, _scaled=None):
        self.generators = tuple(generators)
        self.basis = tuple(basis)
        self.coordinates = dict(coordinates)
        self.base = self.basis[0].base
        self.n = self.basis[0].dim
        self._scaled = _scaled

    @property
    def rank(self):
        return len(self.basis)

    def Lambda(self):
        """Float matrix with rows ``lambda_j`` (shape ``m x n``)."""
        return np.array([b.shadow() for b in self.basis])

    def combination(self, k):
        """Exact ``sum_j k_j lambda_j``."""
        out = self.basis[0] * 0
        for kj, b in zip(k, self.basis):
            out = out + b * int(kj)
        return out

    def coordinates_of(self, lam):
        """Integer coordinates of ``lam`` in the basis, or ``None`` if outside."""
        if lam in self.coordinates:
            return self.coordinates[lam]
        denom, H, pivots = self._scaled
        flat = lam.flat()
        scaled = [c * denom for c in flat]
        if any(c.denominator != 1 for c in scaled):
            return None
        target = [int(c) for c in scaled]
        k = []
        resid = list(target)
        for row, col in zip(H, pivots):
            q, rem = divmod(resid[col], row[col])
            if rem:
                return None
            k.append(q)
            resid = [x - q * y for x, y in zip(resid, row)]
        if any(resid):
            return None
        return tuple(k)

    def contains(self, lam):
        return self.coordinates_of(lam) is not None

    def __repr__(self):
        return f"FrequencyModule(rank={self.rank}, basis={list(self.basis)})"


def module_basis(spectrum):
    """Basis of the subgroup generated by ``spectrum`` via integer HNF.

    Parameters
    ----------
    spectrum : sequence of FrequencyVector
        Non-zero frequencies over a common base.
    """
    gens = [g for g in spectrum]
    if not gens:
        raise PreconditionError("spectrum must be non-empty")
    if any(g.is_zero() for g in gens):
        raise PreconditionError("the zero frequency is excluded from the spectrum")
    base, n = gens[0].base, gens[0].dim
    flats = [g.flat() for g in gens]
    denom = 1
    for row in flats:
        for c in row:
            denom = denom * c.denominator // math.gcd(denom, c.denominator)
    int_rows = [[int(c * denom) for c in row] for row in flats]
    H, pivots = hermite_normal_form(int_rows)
    r = base.rank
    basis = []
    for row in H:
        coeffs = [[Fraction(row[i * r + j], denom) for j in range(r)] for i in range(n)]
        basis.append(FrequencyVector(base, coeffs))
    module = FrequencyModule(gens, basis, {}, _scaled=(denom, H, pivots))
    coords = {}
    for g in gens:
        k = module.coordinates_of(g)
        if k is None or module.combination(k) != g:
            raise NumericalFailure(f"basis reconstruction failed for {g}")
        coords[g] = k
    module.coordinates = coords
    return module


def standard_module(n, base=SCALAR):
    """``Z^n`` with its standard basis."""
    eye = [FrequencyVector(base, [[1 if i == j else 0] for i in range(n)]) for j in range(n)]
    return module_basis(eye)


@dataclass(frozen=True, eq=False)
class LiftMap:
    """``u0(x) = v0(Lambda x)`` with ``v0`` periodic on the unit lattice."""

    Lambda: np.ndarray
    v0: TrigPolynomial
    module: FrequencyModule

    @property
    def m(self):
        return self.Lambda.shape[0]

    @property
    def n(self):
        return self.Lambda.shape[1]

    def project(self, x):
        """Torus coordinates ``Lambda x mod 1``."""
        x = _points(x, self.n)
        return np.mod(x @ self.Lambda.T, 1.0)


def build_lift(u0, module, probes=100, seed=0, tol=1e-10):
    """Rewrite ``u0`` as ``v0(Lambda x)`` with integer frequencies on the torus.

    Raises ``PreconditionError`` naming the first frequency of ``u0`` that
    is not in ``module``.
    """
    terms = {}
    zero_k = (0,) * module.rank
    for lam, a in u0.terms.items():
        if lam.is_zero():
            k = zero_k
        else:
            k = module.coordinates_of(lam)
        if k is None:
            raise PreconditionError(f"frequency {lam} lies outside the module")
        terms[FrequencyVector.integer(k)] = a
    v0 = TrigPolynomial(module.rank, terms, SCALAR)
    Lam = module.Lambda()
    rng = np.random.default_rng(seed)
    x = rng.uniform(-10.0, 10.0, size=(probes, u0.dim))
    diff = np.abs(eval_trig(u0, x) - eval_trig(v0, x @ Lam.T))
    scale = max(1.0, u0.sup_bound())
    if diff.max(initial=0.0) > tol * scale:
        raise NumericalFailure(f"lift identity violated by {diff.max():.3g}")
    return LiftMap(Lam, v0, module)


def lift_data(u0, seed=0):
    """Module of ``Sp(u0)`` and the lift built from it."""
    spec = [lam for lam in u0.spectrum if not lam.is_zero()]
    if not spec:
        module = standard_module(u0.dim, u0.base)
    else:
        module = module_basis(spec)
    return build_lift(u0, module, seed=seed)


def lifted_hamiltonian(H, Lambda):
    """``H~(w) = H(Lambda^T w)`` for symbolic ``H``."""
    Lam = np.atleast_2d(np.asarray(Lambda, dtype=float))
    if Lam.shape[1] != H.dim:
        raise PreconditionError("Lambda columns must match the hamiltonian dimension")
    if isinstance(H, Quadratic):
        Q = Lam @ H.Q @ Lam.T
        return Quadratic(0.5 * (Q + Q.T))
    if isinstance(H, AbsLinear):
        return AbsLinear(Lam @ H.p)
    if isinstance(H, MaxAffine):
        return MaxAffine(H.slopes @ Lam.T, H.offsets)
    if isinstance(H, Sum):
        return Sum(tuple(lifted_hamiltonian(t, Lam) for t in H.parts))
    if isinstance(H, Concave):
        return Concave(lifted_hamiltonian(H.convex_part, Lam))
    if isinstance(H, (Sampled, Hinge)):
        raise PreconditionError(f"variant {H.variant!r} cannot be lifted symbolically")
    raise PreconditionError(f"unknown variant {H.variant!r}")


# ---------------------------------------------------------------------------
# extrema

def _refine_min(f, starts, bounds=None):
    from scipy.optimize import minimize
    best = None
    for s in starts:
        res = minimize(lambda z: float(f(z)), s, method="L-BFGS-B", bounds=bounds,
                       options={"ftol": 1e-15, "gtol": 1e-12})
        if best is None or res.fun < best[0]:
            best = (float(res.fun), np.asarray(res.x))
    return best


def torus_minimum(v0, count=None, refine=True):
    """Minimum of a periodic polynomial over the unit torus.

    Grid search followed by local refinement from the best grid nodes.
    Returns ``(value, argmin)``.
    """
    m = v0.dim
    if not v0.terms:
        return 0.0, np.zeros(m)
    if count is None:
        count = 1024 if m == 1 else (256 if m == 2 else 64)
    axes = [np.arange(count) / count] * m
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    vals = np.concatenate([eval_trig(v0, grid[i:i + 65536]) for i in range(0, len(grid), 65536)])
    order = np.argsort(vals, kind="stable")[:4]
    best_val, best_y = float(vals[order[0]]), grid[order[0]]
    if refine:
        val, y = _refine_min(lambda z: eval_trig(v0, z), grid[order])
        if val < best_val:
            best_val, best_y = val, np.mod(y, 1.0)
    return best_val, best_y


def torus_maximum(v0, count=None):
    val, y = torus_minimum(v0.scaled(-1.0), count)
    return -val, y


def cube_infimum(u0, R, points_per_unit=64, refine=True):
    """Minimum of ``u0`` over the cube ``|x|_inf <= R/2`` (grid + refinement)."""
    n = u0.dim
    count = max(2, int(round(points_per_unit * R)) + 1)
    if count ** n > 4_000_000:
        raise PreconditionError("cube grid too large; lower points_per_unit or R")
    axis = np.linspace(-R / 2, R / 2, count)
    grid = np.stack(np.meshgrid(*[axis] * n, indexing="ij"), axis=-1).reshape(-1, n)
    vals = np.concatenate([eval_trig(u0, grid[i:i + 65536]) for i in range(0, len(grid), 65536)])
    order = np.argsort(vals, kind="stable")[:8]
    best_val, best_x = float(vals[order[0]]), grid[order[0]]
    if refine:
        val, x = _refine_min(lambda z: eval_trig(u0, z), grid[order],
                             bounds=[(-R / 2, R / 2)] * n)
        if val < best_val:
            best_val, best_x = val, x
    return best_val, best_x
