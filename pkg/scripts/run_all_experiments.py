"""Run every shipped config and write decay curves and comparison tables.

    python scripts/run_all_experiments.py [--out out] [--skip-compare]
"""
import argparse
import time
from dataclasses import replace
from pathlib import Path

from hjdecay.errors import HJDecayError
from hjdecay.experiments import emit_report, load_config, run_compare, run_decay

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--skip-compare", action="store_true")
    args = ap.parse_args()
    for path in sorted(CONFIGS.glob("*.toml")):
        cfg = load_config(path)
        cfg = replace(cfg, out=args.out / cfg.name)
        start = time.perf_counter()
        try:
            run = run_decay(cfg, write=True, formats=("csv", "json", "svg"))
        except HJDecayError as exc:
            print(f"{cfg.name}: {type(exc).__name__}: {exc}")
            continue
        last = run.curve.rows[-1]
        print(f"{cfg.name}: c={run.c:.6g} nd={run.nd_report.verdict} "
              f"sup|u-c|(t={last[0]:g})={last[1]:.3g} [{time.perf_counter() - start:.1f}s]")
        if run.certificate_error:
            print(f"  certificate: {run.certificate_error}")
        if not args.skip_compare:
            table = run_compare(cfg)
            emit_report(table, cfg.out, ("csv", "json"), stem="compare")
            for order in table.orders():
                print(f"  observed order {order:.3f}")


if __name__ == "__main__":
    main()
