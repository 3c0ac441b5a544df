"""Benchmark the hot kernels: numba versus the numpy fallback.

Runs both implementations in-process (the numba kernels are imported directly
when available, regardless of the STOPSUM_NO_NUMBA flag): the lattice
convolution (numpy's C convolve versus the Kahan-compensated numba loop) and
the random-walk supremum walker (vectorized numpy versus the per-path numba
loop), plus an end-to-end stopped-sum timing under the active backend.

Usage: python benchmarks/bench_convolution.py [--sizes 1024,4096] [--repeats 5]
"""

import argparse
import time

import numpy as np

from stopsum._backend import NUMBA_ENABLED
from stopsum._kernels import WALK_PARETO, _conv_linear_py, _walker_numpy
from stopsum.convolve import stopped_sum
from stopsum.dists import CountingDist, ParametricDist
from stopsum.lattice import discretize


def time_call(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1024,4096,8192")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    numba_kernel = None
    if NUMBA_ENABLED:
        from stopsum._kernels import _conv_linear_nb

        numba_kernel = _conv_linear_nb
        # trigger compilation outside the timed region
        numba_kernel(np.array([1.0]), np.array([1.0]), 1)
    else:
        print("numba disabled (STOPSUM_NO_NUMBA or not installed); numpy only\n")

    rng = np.random.default_rng(0)
    print("convolution kernel (numpy C convolve vs compensated numba loop)")
    print(f"{'n':>8} {'numpy (ms)':>12} {'numba (ms)':>12} {'numpy/numba':>12}")
    for n in sizes:
        p = rng.random(n)
        p /= p.sum()
        t_np = time_call(_conv_linear_py, p, p, 2 * n - 1, repeats=args.repeats)
        if numba_kernel is not None:
            t_nb = time_call(numba_kernel, p, p, 2 * n - 1, repeats=args.repeats)
            print(f"{n:>8} {1e3 * t_np:>12.2f} {1e3 * t_nb:>12.2f} {t_np / t_nb:>11.2f}x")
        else:
            print(f"{n:>8} {1e3 * t_np:>12.2f} {'-':>12} {'-':>12}")

    print("\nsupremum walker (10k paths, drift -1, stop gap 1000)")
    walk_args = (WALK_PARETO, 2.0, 1.0, -3.0, 1000.0, 10_000, 42, 10_000_000)
    t_np = time_call(_walker_numpy, *walk_args, repeats=1)
    line = f"{'numpy':>8} {1e3 * t_np:>12.0f} ms"
    if NUMBA_ENABLED:
        from stopsum._kernels import walker

        walker(WALK_PARETO, 2.0, 1.0, -3.0, 10.0, 10, 1, 1000)  # compile
        t_nb = time_call(walker, *walk_args, repeats=1)
        line += f"   {'numba':>8} {1e3 * t_nb:>8.0f} ms   numpy/numba {t_np / t_nb:.1f}x"
    print(line)

    backend = "numba" if NUMBA_ENABLED else "numpy"
    f = discretize(ParametricDist.pareto(2.0), 0.5, 2048.0, "up")
    tau = CountingDist.geometric(0.5)
    stopped_sum(f, tau, x_max=2048.0)  # warm any compilation
    t = time_call(stopped_sum, f, tau, repeats=max(2, args.repeats // 2))
    print(f"\nend-to-end stopped_sum (N={len(f)}, ~40 terms) under {backend}: {t:.2f}s")


if __name__ == "__main__":
    main()
