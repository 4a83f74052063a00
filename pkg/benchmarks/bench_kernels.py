"""Benchmark the compiled kernels against the pure-numpy reference.

Both backends are imported directly so a single process can time them
side by side regardless of the TAPLAB_BACKEND setting.

Usage: python benchmarks/bench_kernels.py [--p 100000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from taplab import kernels
from taplab.priors import three_point


def timeit(fn, *args, repeats=5):
    fn(*args)  # warm up (triggers jit compilation for the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=100_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    prior = three_point()
    locs, logw = prior.locations, prior.log_weights
    rng = np.random.default_rng(0)
    lam = rng.normal(0.0, 3.0, args.p)
    gam = np.abs(rng.normal(2.0, 1.0, args.p)) + 0.1

    stats_nb = getattr(kernels, "_tilted_stats_nb", None)
    newton_nb = getattr(kernels, "_dual_newton_nb", None)
    if stats_nb is None:
        print("numba backend unavailable (TAPLAB_BACKEND=numpy or numba "
              "not installed); timing numpy only")

    pairs = [("tilted_stats", kernels.tilted_stats_np, stats_nb,
              (locs, logw, lam, gam))]

    # the numpy dual solve loops over rows in Python; subsample to keep the
    # benchmark quick
    k = min(args.p, 2000)
    m, s, *_ = kernels.tilted_stats_np(locs, logw, lam[:k], gam[:k])
    pairs.append((f"dual_newton({k})", kernels.dual_newton_np, newton_nb,
                  (locs, logw, m, s, lam[:k] * 0.9, gam[:k] * 1.1,
                   1e-10, 200, 1e6)))

    print(f"p = {args.p}, best of {args.repeats}")
    print(f"{'kernel':<14}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, ref, jit, a in pairs:
        t_np = timeit(ref, *a, repeats=args.repeats)
        if jit is None:
            print(f"{name:<14}{t_np*1e3:>10.2f}ms{'n/a':>12}{'':>10}")
            continue
        t_nb = timeit(jit, *a, repeats=args.repeats)
        print(f"{name:<14}{t_np*1e3:>10.2f}ms{t_nb*1e3:>10.2f}ms"
              f"{t_np/t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
