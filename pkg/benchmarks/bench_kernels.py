"""Timing of the scattered trigonometric evaluation: compiled core against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--points 4096]
"""
import argparse
import time

import numpy as np

from korteweg_lab import _kernels_py, kernels
from korteweg_lab.kernels import centered_coeffs
from korteweg_lab.lagrangian import AdvectingVelocity, compose, integrate_flow
from korteweg_lab.spectral import PeriodicGrid, random_band_limited

try:
    from korteweg_lab import _kernels as _compiled
except ImportError:
    _compiled = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_eval(dim, n, npts, repeat, rng):
    grid = PeriodicGrid(dim, n)
    f = random_band_limited(grid, rng, components=2)
    c, kmin = centered_coeffs(f.coeffs, dim)
    pts = np.ascontiguousarray(rng.uniform(0, grid.L, (dim, npts)))
    rows = []
    impls = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled is not None else [])
    for name, mod in impls:
        if dim == 1:
            call = lambda: mod.trig_eval_1d(c, kmin, pts[0], grid.k1, 1.0)
        else:
            call = lambda: mod.trig_eval_2d(c, kmin, kmin, pts[0], pts[1], grid.k1, 1.0)
        rows.append((f"trig_eval {dim}D n={n} pts={npts}", name, best_of(call, repeat)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=4096)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    rows = []
    rows += bench_eval(1, 64, args.points, args.repeat, rng)
    rows += bench_eval(1, 256, args.points, args.repeat, rng)
    rows += bench_eval(2, 32, args.points, args.repeat, rng)
    grid = PeriodicGrid(2, 32)
    f = random_band_limited(grid, rng)
    fl = integrate_flow(AdvectingVelocity.random(grid, 1, kmax=4.0, amplitude=0.2), 0.5, 32)
    rows.append(("compose 2D n=32 (active backend)", kernels.BACKEND, best_of(lambda: compose(f, fl), args.repeat)))
    print(f"{'case':40s} {'backend':8s} {'seconds':>10s}")
    for case, name, t in rows:
        print(f"{case:40s} {name:8s} {t:10.5f}")


if __name__ == "__main__":
    main()
