"""Time the factorized transform against grid size and check it against brute force.

    python scripts/legendre_benchmark.py
"""
import time

import numpy as np

from hjdecay.legendre import SampledConvex, brute_force_conjugate, legendre_nd


def timed(f):
    f()
    start = time.perf_counter()
    out = f()
    return out, time.perf_counter() - start


def main():
    print("dim  nodes      seconds   max|fast - brute| (on 200 p-nodes)")
    rng = np.random.default_rng(0)
    for dim, counts in ((1, (10_000, 100_000, 1_000_000)), (2, (129, 257, 513)), (3, (33, 65))):
        for n in counts:
            f = SampledConvex.from_function(
                lambda v: 0.5 * (v ** 2).sum(-1) + np.abs(v[..., 0] - 0.3), [(-4.0, 4.0, n)] * dim)
            g, dt = timed(lambda: legendre_nd(f))
            pts = g.points().reshape(-1, dim)
            pick = rng.choice(len(pts), size=min(200, len(pts)), replace=False)
            err = np.nan
            if f.values.size <= 300_000:
                ref = brute_force_conjugate(f, pts[pick])
                err = float(np.max(np.abs(np.asarray(g.values).reshape(-1)[pick] - ref)))
            print(f"{dim:>3}  {f.values.size:>9}  {dt:8.3f}   {err:.2e}")


if __name__ == "__main__":
    main()
