"""Time the compiled and numpy kernels on the harness workload.

Usage: python benchmarks/bench_kernels.py [--paths N] [--points M] [--repeat R]
"""
import argparse
import time

import numpy as np

from chisup import kernels
from chisup.harness import _brownian_layout, _segments
from chisup.paths import Grid, bridge_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--points", type=int, default=2 ** 12)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    model = bridge_model()
    grid = Grid.unit_interval(args.points, 1.0 / args.points, model.closed_right)
    sd, bt, var = _brownian_layout(model, grid)
    segs = _segments(grid, None)
    w = np.tile(1.0 / var, (1, 1))
    b2 = np.array([1.0, 0.5])

    print(f"{args.paths} paths x {args.points} points x {b2.size} components")
    ref = None
    for name in kernels.available_backends():
        best = np.inf
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            out = kernels.bm_chi_stats(np.random.default_rng(0), args.paths, sd, bt, b2, w, segs, backend=name)
            best = min(best, time.perf_counter() - t0)
        same = "" if ref is None else f"  identical={out.tobytes() == ref.tobytes()}"
        ref = out if ref is None else ref
        per = best / (args.paths * args.points * b2.size)
        print(f"{name:7s} {best:8.3f} s  {per * 1e9:6.2f} ns/point{same}")


if __name__ == "__main__":
    main()
