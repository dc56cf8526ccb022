"""Lax-Friedrichs against the Hopf-Lax oracle under grid refinement.

    python scripts/refinement_study.py [--config configs/decay_periodic.toml] [--t 1]
"""
import argparse
from pathlib import Path

import numpy as np

from hjdecay.almost_periodic import eval_trig
from hjdecay.convex import Conjugate
from hjdecay.experiments import load_config
from hjdecay.solver import PeriodicGrid, finite_difference_evolve, hopf_lax_field, prepare_hamiltonian

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "decay_periodic.toml")
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--counts", type=int, nargs="+", default=[128, 256, 512, 1024])
    args = ap.parse_args()
    cfg = load_config(args.config)
    u0 = cfg.solver_data()
    if not u0.is_integer():
        raise SystemExit("refinement study needs periodic (integer-frequency) data")
    H = cfg.convex_hamiltonian()
    Hc, _ = prepare_hamiltonian(H, u0.lipschitz_per_axis())
    conj = Conjugate(Hc)
    prev = None
    print("count  max|FD - HL|  order")
    for n in args.counts:
        grid = PeriodicGrid(u0.dim, n)
        pts = grid.points()
        v0 = eval_trig(u0, pts if u0.dim > 1 else pts[..., 0])
        fd = finite_difference_evolve(v0, H, args.t, grid, L=u0.lipschitz_per_axis())
        hl = hopf_lax_field(u0, conj, args.t, grid)
        err = float(np.max(np.abs(fd.values - hl.values)))
        order = "" if prev is None else f"{np.log2(prev / err):.3f}"
        print(f"{n:>5}  {err:.4e}    {order}")
        prev = err


if __name__ == "__main__":
    main()
