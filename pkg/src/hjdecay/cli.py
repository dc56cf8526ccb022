"""Command line entry point ``hjdecay``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(unresolved minimiser or exhausted net budget), 4 non-degeneracy violated
while decay was requested with ``nd.policy = "error"``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, NDViolation, NumericalFailure, PreconditionError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ND = 0, 2, 3, 4


def _t_list(text):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad time list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty time list")
    return vals


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML or JSON experiment file")
    common.add_argument("--grid", type=int, help="nodes per torus axis")
    common.add_argument("--t-list", type=_t_list, help="times, comma or space separated")
    common.add_argument("--epsilon", type=float, help="certificate epsilon")
    common.add_argument("--K", type=int, help="bound on |k|_inf for the ND search")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--format", action="append", choices=["csv", "json", "svg"],
                        help="report format (repeatable; default csv and json)")
    common.add_argument("--seed", type=int, help="seed for randomised probes")

    p = argparse.ArgumentParser(prog="hjdecay", description="Hopf-Lax solutions and decay experiments")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("transform", parents=[common], help="Legendre transform of a hamiltonian or sample")
    t.add_argument("--spec", type=Path, help="hamiltonian JSON (defaults to the config's)")
    t.add_argument("--sample", type=Path, help="SampledConvex stem (header .json + .csv)")
    t.add_argument("--radius", type=float, default=4.0, help="sampling box half-width")
    sub.add_parser("check-nd", parents=[common], help="bounded non-degeneracy search")
    sub.add_parser("solve", parents=[common], help="Hopf-Lax field at each time")
    sub.add_parser("decay", parents=[common], help="decay curve with ND report")
    sub.add_parser("certify", parents=[common], help="decay certificate")
    sub.add_parser("compare", parents=[common], help="cross-validation table")
    sub.add_parser("counterexample", parents=[common], help="traveling wave along a linear direction")
    return p


def _load(args):
    from .experiments import load_config
    if args.config is None:
        raise ConfigError("--config is required for this command")
    over = {"times": args.t_list, "epsilon": args.epsilon, "nd.K": args.K, "seed": args.seed,
            "grids.torus": args.grid}
    cfg = load_config(args.config, over)
    if args.out is not None:
        from dataclasses import replace
        cfg = replace(cfg, out=args.out)
    return cfg


def _formats(args):
    return tuple(args.format) if args.format else ("csv", "json")


def _transform(args):
    from .convex import from_json
    from .experiments import emit_report
    from .legendre import SampledConvex, legendre_nd
    if args.sample is not None:
        f = SampledConvex.load(args.sample)
    else:
        if args.spec is not None:
            H = from_json(Path(args.spec).read_text())
        else:
            H = _load(args).hamiltonian
        n = args.grid or (513 if H.dim == 1 else 129 if H.dim == 2 else 33)
        axes = [(-args.radius, args.radius, n)] * H.dim
        f = SampledConvex.from_function(H.evaluate, axes)
    g = legendre_nd(f)
    pts = g.points()
    vals = np.asarray(g.values).reshape(-1)
    flags = (np.zeros(len(vals), bool) if g.boundary_attained is None
             else np.asarray(g.boundary_attained).reshape(-1))
    table = {"columns": [f"p{i}" for i in range(g.dim)] + ["value", "boundary_attained"],
             "rows": [list(p) + [v, bool(b)] for p, v, b in zip(pts, vals, flags)]}
    out = args.out or Path("out")
    emit_report(table, out, tuple(f for f in _formats(args) if f != "svg"), stem="conjugate")
    print(f"conjugate on {len(vals)} points written to {out}")
    return EXIT_OK


def _check_nd(args):
    from .almost_periodic import lift_data
    from .nondegeneracy import check_nd
    cfg = _load(args)
    lift = lift_data(cfg.solver_data(), seed=cfg.seed)
    rep = check_nd(cfg.convex_hamiltonian(), lift.module, K=cfg.nd.K, delta=cfg.nd.delta,
                   grid_count=cfg.nd.grid_count)
    cfg.out.mkdir(parents=True, exist_ok=True)
    from .experiments import to_json_text
    (cfg.out / "nd_report.json").write_text(to_json_text(rep.to_json()))
    print(rep.dumps())
    return EXIT_OK


def _solve(args):
    from .solver import lift_problem, lifted_field
    cfg = _load(args)
    problem = lift_problem(cfg.solver_data(), cfg.convex_hamiltonian(), count=cfg.grids.torus,
                           seed=cfg.seed)
    sign = -1.0 if cfg.concave else 1.0
    for t in cfg.times:
        F = lifted_field(problem, t)
        F.values = sign * F.values
        F.save(cfg.out / f"field_t{t:g}")
        print(f"t={t:g}: min {F.values.min():.6g} max {F.values.max():.6g}")
    return EXIT_OK


def _decay(args):
    from .experiments import run_decay
    cfg = _load(args)
    run = run_decay(cfg, write=True, formats=_formats(args))
    if not run.nd_report.satisfied:
        print("warning: non-degeneracy violated; witnesses recorded in the report", file=sys.stderr)
    for r in run.curve.rows:
        bound = "" if r[2] is None else f"  bound-c {r[2]:.6g}"
        print(f"t={r[0]:g}  sup|u-c| {r[1]:.6g}{bound}")
    return EXIT_OK


def _certify(args):
    from .certificate import decay_certificate
    from .experiments import to_json_text
    from .solver import lift_problem
    cfg = _load(args)
    if cfg.epsilon is None:
        raise ConfigError("certify needs epsilon (config key or --epsilon)")
    problem = lift_problem(cfg.solver_data(), cfg.convex_hamiltonian(), count=cfg.grids.torus,
                           seed=cfg.seed)
    cert = decay_certificate(problem.H_lifted, problem.lift.v0, cfg.epsilon, cfg.times,
                             nd_bound=cfg.nd.K)
    cfg.out.mkdir(parents=True, exist_ok=True)
    body = cert.to_json()
    body["verify"] = cert.verify()
    (cfg.out / "certificate.json").write_text(to_json_text(body))
    print(json.dumps(body["verify"], sort_keys=True))
    for row in body["alpha"]:
        print(f"t={row['t']:g}  alpha {row['alpha']:.6g}  bound {row['bound']:.6g}")
    return EXIT_OK


def _compare(args):
    from .experiments import emit_report, run_compare
    cfg = _load(args)
    table = run_compare(cfg)
    emit_report(table, cfg.out, tuple(f for f in _formats(args) if f != "svg"), stem="compare")
    for r in table.rows:
        print("  ".join("" if v is None else (f"{v:.6g}" if isinstance(v, float) else str(v)) for v in r))
    return EXIT_OK


def _counterexample(args):
    from .experiments import emit_report, run_counterexample
    cfg = _load(args)
    res = run_counterexample(cfg, count=args.grid)
    emit_report(res, cfg.out, tuple(f for f in _formats(args) if f != "svg"), stem="counterexample")
    print(f"xi={res['xi']} alpha={res['alpha']:g} delta={res['delta']:g}")
    for r in res["rows"]:
        print(f"t={r[0]:g}  amplitude {r[1]:.6g}  sup|u-c| {r[2]:.6g}  |HL-wave| {r[3]:.3g}")
    return EXIT_OK


COMMANDS = {"transform": _transform, "check-nd": _check_nd, "solve": _solve, "decay": _decay,
            "certify": _certify, "compare": _compare, "counterexample": _counterexample}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, PreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NDViolation as exc:
        print(f"{exc}", file=sys.stderr)
        print(exc.report.dumps(), file=sys.stderr)
        return EXIT_ND


if __name__ == "__main__":
    sys.exit(main())
