"""Configuration-driven experiments and deterministic report files."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .almost_periodic import (BaseGenerators, FrequencyVector, TrigPolynomial, eval_trig,
                              torus_maximum, torus_minimum)
from .certificate import decay_certificate
from .convex import Concave, Conjugate, HamiltonianSpec, from_json, is_normalized
from .errors import ConfigError, HJDecayError, NDViolation, NetBudgetError, PreconditionError
from .nondegeneracy import check_nd, counterexample_solution
from .solver import (PeriodicGrid, concave_to_convex, finite_difference_evolve, grid_tolerance,
                     hopf_lax_field, hopf_lax_point, lift_problem, lifted_field, lifted_solve,
                     prepare_hamiltonian)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FORMATS = ("csv", "json", "svg")
ND_POLICIES = ("warn", "error")


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class GridConfig:
    torus: int | None = None          # nodes per torus axis; None picks the per-rank default
    fd: tuple = (256, 512, 1024)      # refinement ladder for the monotone scheme
    box_h: float = 1.0 / 1024         # y-spacing of direct Hopf-Lax minimisation
    probes: int = 100                 # random (t, x) probes for lift-vs-direct
    probe_radius: float = 20.0


@dataclass(frozen=True)
class NDConfig:
    K: int = 10
    delta: float = 0.25
    grid_count: int = 65
    policy: str = "warn"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    hamiltonian: HamiltonianSpec
    initial_data: TrigPolynomial
    times: tuple
    grids: GridConfig = GridConfig()
    epsilon: float | None = None
    nd: NDConfig = NDConfig()
    out: Path = Path("out")
    seed: int = 0
    closed_form: dict | None = None
    thresholds: dict = field(default_factory=dict)
    compare_times: tuple | None = None

    @property
    def concave(self):
        return isinstance(self.hamiltonian, Concave)

    def convex_hamiltonian(self):
        """The hamiltonian the solver actually sees (``-H(-v)`` when concave)."""
        return concave_to_convex(self.hamiltonian) if self.concave else self.hamiltonian

    def solver_data(self):
        return self.initial_data.scaled(-1.0) if self.concave else self.initial_data

    def to_json(self):
        return {
            "name": self.name,
            "hamiltonian": self.hamiltonian.to_json(),
            "initial_data": self.initial_data.to_json(),
            "times": list(self.times),
            "grids": {"torus": self.grids.torus, "fd": list(self.grids.fd), "box_h": self.grids.box_h,
                      "probes": self.grids.probes, "probe_radius": self.grids.probe_radius},
            "epsilon": self.epsilon,
            "nd": {"K": self.nd.K, "delta": self.nd.delta, "grid_count": self.nd.grid_count,
                   "policy": self.nd.policy},
            "seed": self.seed,
            "closed_form": self.closed_form,
            "thresholds": self.thresholds,
            "compare_times": None if self.compare_times is None else list(self.compare_times),
        }

    def comparison_times(self):
        return self.compare_times if self.compare_times is not None else self.times[:1]


def _modes_to_trig(obj):
    dim = int(obj.get("dim", 1))
    base = BaseGenerators(tuple(obj.get("base_generators", ["1"])), obj.get("shadows"))
    poly = TrigPolynomial.zero(dim, base)
    for mode in obj["modes"]:
        kind = mode.get("kind", "sin")
        amp = float(mode.get("amp", 1.0))
        if kind == "const":
            poly = poly + TrigPolynomial.constant(amp, dim, base)
            continue
        freq = mode["freq"]
        freq = [freq] if isinstance(freq, str) else list(freq)
        lam = FrequencyVector.parse(base, [str(f) for f in freq])
        if kind == "sin":
            poly = poly + TrigPolynomial.sin(lam, amp)
        elif kind == "cos":
            poly = poly + TrigPolynomial.cos(lam, amp)
        else:
            raise ConfigError(f"unknown mode kind {kind!r}")
    return poly


def parse_initial_data(obj):
    """Trigonometric data from either a ``modes`` list or serialized ``terms``."""
    if "modes" in obj:
        return _modes_to_trig(obj)
    if "terms" in obj:
        return TrigPolynomial.from_json(obj)
    raise ConfigError("initial_data needs 'modes' or 'terms'")


def _fail(msg):
    raise ConfigError(msg)


def config_from_dict(d, base_dir=None):
    """Build and validate an :class:`ExperimentConfig` from plain data."""
    if not isinstance(d, dict):
        _fail("configuration must be a table")
    for key in ("hamiltonian", "initial_data", "times"):
        if key not in d:
            _fail(f"missing required key {key!r}")
    try:
        H = from_json(d["hamiltonian"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid hamiltonian: {exc}") from exc
    try:
        u0 = parse_initial_data(d["initial_data"])
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid initial_data: {exc}") from exc
    try:
        times = tuple(float(t) for t in d["times"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"times must be numbers: {exc}") from exc
    g = dict(d.get("grids", {}))
    try:
        grids = GridConfig(
            torus=None if g.get("torus") is None else int(g["torus"]),
            fd=tuple(int(v) for v in g.get("fd", GridConfig.fd)),
            box_h=float(g.get("box_h", GridConfig.box_h)),
            probes=int(g.get("probes", GridConfig.probes)),
            probe_radius=float(g.get("probe_radius", GridConfig.probe_radius)),
        )
        n = dict(d.get("nd", {}))
        nd = NDConfig(K=int(n.get("K", 10)), delta=float(n.get("delta", 0.25)),
                      grid_count=int(n.get("grid_count", 65)), policy=str(n.get("policy", "warn")))
        eps = d.get("epsilon")
        eps = None if eps is None else float(eps)
        ct = d.get("compare_times")
        ct = None if ct is None else tuple(float(t) for t in ct)
        seed = int(d.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameter: {exc}") from exc
    out = Path(d.get("out", "out"))
    if base_dir is not None and not out.is_absolute():
        out = Path(base_dir) / out
    cfg = ExperimentConfig(
        name=str(d.get("name", "experiment")), hamiltonian=H, initial_data=u0, times=times,
        grids=grids, epsilon=eps, nd=nd, out=out, seed=seed,
        closed_form=d.get("closed_form"), thresholds=dict(d.get("thresholds", {})),
        compare_times=ct)
    validate(cfg)
    return cfg


def validate(cfg):
    """Reject every downstream precondition violation before any computation."""
    t = np.asarray(cfg.times, dtype=float)
    if t.size == 0:
        _fail("times must be non-empty")
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        _fail("times must be positive and finite")
    if np.any(np.diff(t) <= 0):
        _fail("times must be strictly increasing")
    if cfg.compare_times is not None:
        ct = np.asarray(cfg.compare_times, dtype=float)
        if ct.size == 0 or np.any(ct <= 0) or np.any(np.diff(ct) <= 0) or not np.all(np.isfinite(ct)):
            _fail("compare_times must be positive and strictly increasing")
    H, u0 = cfg.hamiltonian, cfg.initial_data
    if H.dim != u0.dim:
        _fail(f"hamiltonian acts on R^{H.dim} but the data live on R^{u0.dim}")
    if H.variant == "sampled":
        _fail("sampled hamiltonians cannot be lifted; use a symbolic variant")
    if not is_normalized(H):
        _fail("hamiltonian must satisfy H(0) = 0")
    if cfg.epsilon is not None and not (cfg.epsilon > 0 and math.isfinite(cfg.epsilon)):
        _fail("epsilon must be positive")
    if cfg.nd.K < 1:
        _fail("nd.K must be at least 1")
    if not cfg.nd.delta > 0:
        _fail("nd.delta must be positive")
    if cfg.nd.grid_count < 9 or cfg.nd.grid_count % 2 == 0:
        _fail("nd.grid_count must be odd and at least 9")
    if cfg.nd.policy not in ND_POLICIES:
        _fail(f"nd.policy must be one of {ND_POLICIES}")
    if cfg.grids.torus is not None and cfg.grids.torus < 8:
        _fail("grids.torus must be at least 8")
    fd = cfg.grids.fd
    if any(v < 8 for v in fd) or any(b <= a for a, b in zip(fd, fd[1:])):
        _fail("grids.fd must be an increasing list of counts >= 8")
    if not cfg.grids.box_h > 0:
        _fail("grids.box_h must be positive")
    if cfg.grids.probes < 0:
        _fail("grids.probes must be non-negative")
    for k, v in cfg.thresholds.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            _fail(f"threshold {k!r} must be a number")
    cf = cfg.closed_form
    if cf is not None:
        kind = cf.get("kind")
        if kind == "traveling_wave":
            for key in ("xi", "alpha", "delta"):
                if key not in cf:
                    _fail(f"closed_form.{key} is required for a traveling wave")
            if not float(cf["delta"]) > 0:
                _fail("closed_form.delta must be positive")
        elif kind != "constant":
            _fail("closed_form.kind must be 'traveling_wave' or 'constant'")
    try:
        cfg.convex_hamiltonian()
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides=None):
    """Read a TOML or JSON config; ``overrides`` replaces top-level keys."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            d = json.loads(raw)
        else:
            d = tomllib.loads(raw.decode())
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if "." in k:
            head, tail = k.split(".", 1)
            d.setdefault(head, {})[tail] = v
        else:
            d[k] = v
    return config_from_dict(d, base_dir=None)


# ---------------------------------------------------------------------------
# decay runs

@dataclass
class DecayCurve:
    """Rows ``(t, sup_deviation, certified_bound - c, method)``."""

    rows: list = field(default_factory=list)
    error: str | None = None

    HEADER = ("t", "sup_deviation", "certified_bound_minus_c", "method")

    def add(self, t, dev, bound, method):
        self.rows.append((float(t), float(dev), None if bound is None else float(bound), method))

    def deviation_at(self, t):
        for r in self.rows:
            if math.isclose(r[0], t):
                return r[1]
        raise KeyError(t)

    def table(self):
        out = [list(r) for r in self.rows]
        if self.error is not None:
            out.append(["nan", "nan", "nan", "error: " + self.error])
        return out

    def to_json(self):
        return {"columns": list(self.HEADER),
                "rows": [list(r) for r in self.rows], "error": self.error}


@dataclass
class DecayRun:
    config: ExperimentConfig
    c: float
    curve: DecayCurve
    nd_report: object = None
    certificate: object = None
    certificate_error: str | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self):
        cert = self.certificate
        return {
            "name": self.config.name,
            "c": self.c,
            "limit_kind": "sup" if self.config.concave else "inf",
            "curve": self.curve.to_json(),
            "nd_report": None if self.nd_report is None else self.nd_report.to_json(),
            "certificate": None if cert is None else cert.to_json(),
            "certificate_check": None if cert is None else cert.verify(),
            "certificate_error": self.certificate_error,
            "meta": self.meta,
        }


def limit_constant(cfg, lift=None):
    """``inf u0`` (``sup u0`` when concave) as an extremum of ``v0`` on the torus."""
    if lift is None:
        from .almost_periodic import lift_data
        lift = lift_data(cfg.initial_data, seed=cfg.seed)
    if cfg.concave:
        return torus_maximum(lift.v0)[0]
    return torus_minimum(lift.v0)[0]


def run_decay(cfg, write=False, formats=("csv", "json")):
    """Lifted Hopf-Lax decay curve, ND report and (optionally) the certificate.

    In concave mode the solver works on ``w = -u`` with hamiltonian
    ``-H(-v)``; the reported deviation is measured from ``sup u0``.  On an
    error the rows computed so far are kept, an error row is appended and,
    with ``write``, the partial report is flushed before re-raising.
    """
    Hc = cfg.convex_hamiltonian()
    data = cfg.solver_data()
    problem = lift_problem(data, Hc, count=cfg.grids.torus, seed=cfg.seed)
    c_w = torus_minimum(problem.lift.v0)[0]
    c = -c_w if cfg.concave else c_w
    report = check_nd(Hc, problem.lift.module, K=cfg.nd.K, delta=cfg.nd.delta,
                      grid_count=cfg.nd.grid_count)
    run = DecayRun(cfg, float(c), DecayCurve(), report,
                   meta={"torus_count": problem.count, "m": problem.m,
                         "grid_tolerance": problem.tolerance(),
                         "torus_hamiltonian": problem.H_torus.to_json()})
    if not report.satisfied and cfg.nd.policy == "error":
        run.curve.error = "non-degeneracy violated"
        if write:
            emit_report(run, cfg.out, formats)
        raise NDViolation(report)
    try:
        if cfg.epsilon is not None:
            try:
                run.certificate = decay_certificate(problem.H_lifted, problem.lift.v0, cfg.epsilon,
                                                    cfg.times, nd_bound=cfg.nd.K)
            except NetBudgetError as exc:
                run.certificate_error = str(exc)
        for t in cfg.times:
            F = lifted_field(problem, t)
            dev = float(np.max(np.abs(F.values - c_w)))
            bound = None
            if run.certificate is not None:
                bound = run.certificate.bound(t) - run.certificate.c
            run.curve.add(t, dev, bound, "lifted_hopf_lax")
    except HJDecayError as exc:
        run.curve.error = f"{type(exc).__name__}: {exc}"
        if write:
            emit_report(run, cfg.out, formats)
        raise
    if write:
        emit_report(run, cfg.out, formats)
    return run


# ---------------------------------------------------------------------------
# cross-validation

@dataclass
class CompareTable:
    rows: list = field(default_factory=list)

    HEADER = ("check", "t", "count", "method_a", "method_b", "max_deviation", "tolerance",
              "observed_order")

    def add(self, check, t, count, a, b, dev, tol=None, order=None):
        self.rows.append((check, float(t), None if count is None else int(count), a, b, float(dev),
                          None if tol is None else float(tol), None if order is None else float(order)))

    def select(self, check):
        return [r for r in self.rows if r[0] == check]

    def orders(self, t=None):
        return [r[7] for r in self.select("refinement") if r[7] is not None
                and (t is None or math.isclose(r[1], t))]

    def table(self):
        return [list(r) for r in self.rows]

    def to_json(self):
        return {"columns": list(self.HEADER), "rows": self.table()}


def closed_form_values(cfg, t, points):
    cf = cfg.closed_form
    if cf["kind"] == "constant":
        return np.full(len(points), float(cfg.initial_data(np.zeros((1, cfg.initial_data.dim)))[0]))
    wave = counterexample_solution(np.asarray(cf["xi"], dtype=float), float(cf["alpha"]),
                                   float(cf["delta"]))
    return wave(t, points)


def run_compare(cfg):
    """Hopf-Lax against the monotone scheme, closed forms and the lift.

    Periodic data: for every comparison time and every count in ``grids.fd`` the
    Lax-Friedrichs field is compared with the Hopf-Lax field on the same
    grid, and successive error ratios give the observed order.  A
    ``closed_form`` section adds Hopf-Lax versus the exact solution at all
    configured times.
    Quasi-periodic data: random ``(t, x)`` probes compare the lifted torus
    solve with direct minimisation on the line.
    """
    u0 = cfg.solver_data()
    H = cfg.convex_hamiltonian()
    table = CompareTable()
    if u0.is_integer():
        Hc, L = prepare_hamiltonian(H, u0.lipschitz_per_axis())
        conj = Conjugate(Hc)
        m = u0.dim
        for t in cfg.comparison_times():
            errs = []
            for M in cfg.grids.fd:
                grid = PeriodicGrid(m, M)
                hl = hopf_lax_field(u0, conj, t, grid)
                pts = grid.points()
                samples = eval_trig(u0, pts if m > 1 else pts[..., 0])
                fd = finite_difference_evolve(samples, H, t, grid,
                                              L=np.asarray(u0.lipschitz_per_axis()))
                err = float(np.max(np.abs(fd.values - hl.values)))
                order = math.log2(errs[-1] / err) if errs and err > 0 else None
                errs.append(err)
                table.add("refinement", t, M, "finite_difference", "hopf_lax", err, hl.tolerance, order)
        if cfg.closed_form is not None:
            M = cfg.grids.torus or cfg.grids.fd[-1]
            grid = PeriodicGrid(m, M)
            pts = grid.points().reshape(-1, m)
            sign = -1.0 if cfg.concave else 1.0
            for t in cfg.times:
                hl = hopf_lax_field(u0, conj, t, grid)
                exact = closed_form_values(cfg, t, pts).reshape(grid.shape)
                dev = float(np.max(np.abs(sign * hl.values - exact)))
                table.add("closed_form", t, M, "hopf_lax", "closed_form", dev, hl.tolerance)
    elif cfg.grids.probes > 0:
        problem = lift_problem(u0, H, count=cfg.grids.torus, seed=cfg.seed)
        conj = Conjugate(prepare_hamiltonian(H, [problem.lift.v0.lipschitz()] * H.dim)[0])
        rng = np.random.default_rng(cfg.seed)
        ts = rng.choice(np.asarray(cfg.comparison_times()), size=cfg.grids.probes)
        xs = rng.uniform(-cfg.grids.probe_radius, cfg.grids.probe_radius,
                         size=(cfg.grids.probes, u0.dim))
        lip = u0.lipschitz()
        tol = problem.tolerance() + grid_tolerance(lip, cfg.grids.box_h, u0.dim)
        for t in sorted(set(ts.tolist())):
            sel = ts == t
            lifted = lifted_solve(u0, H, None, t, xs[sel], problem=problem)
            direct = np.array([hopf_lax_point(u0, conj, t, x, h=cfg.grids.box_h) for x in xs[sel]])
            dev = float(np.max(np.abs(lifted - direct)))
            table.add("lift_vs_direct", t, int(sel.sum()), "lifted", "direct", dev, tol)
    return table


# ---------------------------------------------------------------------------
# counterexample

def run_counterexample(cfg, count=None):
    """Hopf-Lax against the traveling wave along the first ND witness.

    Rows: ``(t, amplitude, sup deviation from min u0, max |HL - wave|)``.
    If the config carries a ``closed_form`` traveling wave that one is
    used; otherwise the first witness of the ND search.
    """
    H = cfg.convex_hamiltonian()
    cf = cfg.closed_form
    if cf is not None and cf.get("kind") == "traveling_wave":
        xi = np.asarray(cf["xi"], dtype=float)
        wave = counterexample_solution(xi, float(cf["alpha"]), float(cf["delta"]), H=H)
    else:
        from .almost_periodic import standard_module
        report = check_nd(H, standard_module(H.dim), K=cfg.nd.K, delta=cfg.nd.delta)
        if report.satisfied:
            raise PreconditionError("no linear direction found; nothing to build")
        w = report.witnesses[0]
        wave = counterexample_solution(w.xi, w.alpha, w.delta, H=H)
    u0 = wave.initial_data()
    Hc, _ = prepare_hamiltonian(H, u0.lipschitz_per_axis())
    conj = Conjugate(Hc)
    grid = PeriodicGrid(H.dim, count or cfg.grids.torus or 1024)
    pts = grid.points().reshape(-1, H.dim)
    c = torus_minimum(u0)[0]
    rows = []
    for t in cfg.times:
        F = hopf_lax_field(u0, conj, t, grid)
        exact = wave(t, pts).reshape(grid.shape)
        rows.append((float(t), wave.amplitude, float(np.max(np.abs(F.values - c))),
                     float(np.max(np.abs(F.values - exact))), F.tolerance))
    return {"xi": wave.xi.tolist(), "alpha": wave.alpha, "delta": wave.delta, "c": float(c),
            "columns": ["t", "amplitude", "sup_deviation", "max_error_vs_wave", "grid_tolerance"],
            "rows": rows}


# ---------------------------------------------------------------------------
# report files

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _round(obj):
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.12g}") if math.isfinite(x) else None
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def to_json_text(obj):
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def curve_svg(curve, title=""):
    """Log-y plot of sup deviation and certified bound against t."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "hjdecay", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        t = np.array([r[0] for r in curve.rows], dtype=float)
        dev = np.array([r[1] for r in curve.rows], dtype=float)
        bnd = np.array([np.nan if r[2] is None else r[2] for r in curve.rows], dtype=float)
        pos = dev > 0
        ax.plot(t[pos], dev[pos], "o-", label="sup deviation", gid="sup_deviation")
        if np.any(np.isfinite(bnd)):
            ax.plot(t, bnd, "s--", label="certified bound - c", gid="certified_bound")
        ax.set_yscale("log")
        if len(t) and t.min() > 0:
            ax.set_xscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("deviation from limit")
        if title:
            ax.set_title(title)
        if len(t):
            ax.legend()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def emit_report(artifact, out_dir, formats=("csv", "json"), stem=None):
    """Write ``artifact`` (decay run, decay curve or compare table) to ``out_dir``.

    Output is deterministic: values go through 12-significant-digit
    formatting, JSON keys are sorted and the SVG carries no timestamp.
    Returns the list of written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    for f in formats:
        if f not in FORMATS:
            raise ConfigError(f"unknown format {f!r}")
    if isinstance(artifact, DecayRun):
        stem = stem or artifact.config.name
        header, rows, js, curve = DecayCurve.HEADER, artifact.curve.table(), artifact.to_json(), artifact.curve
    elif isinstance(artifact, DecayCurve):
        stem = stem or "decay"
        header, rows, js, curve = DecayCurve.HEADER, artifact.table(), artifact.to_json(), artifact
    elif isinstance(artifact, CompareTable):
        stem = stem or "compare"
        header, rows, js, curve = CompareTable.HEADER, artifact.table(), artifact.to_json(), None
    elif isinstance(artifact, dict) and "columns" in artifact:
        stem = stem or "table"
        header, rows, js, curve = artifact["columns"], artifact["rows"], artifact, None
    else:
        raise PreconditionError(f"cannot emit {type(artifact).__name__}")
    written = []
    try:
        if "csv" in formats:
            p = out / f"{stem}.csv"
            p.write_text(to_csv(header, rows))
            written.append(p)
        if "json" in formats:
            p = out / f"{stem}.json"
            p.write_text(to_json_text(js))
            written.append(p)
        if "svg" in formats and curve is not None:
            p = out / f"{stem}.svg"
            p.write_text(curve_svg(curve, stem))
            written.append(p)
    except OSError as exc:
        raise ConfigError(f"cannot write to {out}: {exc}") from exc
    return written


def with_overrides(cfg, **kw):
    """Copy of ``cfg`` with top-level fields replaced, re-validated."""
    new = replace(cfg, **{k: v for k, v in kw.items() if v is not None})
    validate(new)
    return new
