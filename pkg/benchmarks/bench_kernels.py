#!/usr/bin/env python3
"""Benchmark the per-scale reduction kernels: numba vs pure NumPy.

The two paths produce bit-identical results; this script measures the speed
gap on the configurations that dominate calibration and scanning, plus one
end-to-end null-statistic draw.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from mscan import RegionSystem, enumerate_scales
from mscan import _kernels
from mscan.calibrate import sample_null_statistics
from mscan.scan import prefix_sums


def time_call(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel(d, n, policy, repeats):
    system = RegionSystem("cubes", d, n, min_size=2**d, scale_policy=policy)
    ext = np.asarray(enumerate_scales(system), dtype=np.int64)
    rng = np.random.default_rng(0)
    P = prefix_sums(rng.standard_normal((n,) * d))

    _kernels.scale_minmax(P, ext, use_numba=False)
    t_numpy = time_call(lambda: _kernels.scale_minmax(P, ext, use_numba=False), repeats)
    if _kernels.NUMBA_ENABLED:
        _kernels.scale_minmax(P, ext, use_numba=True)  # compile outside timing
        t_numba = time_call(lambda: _kernels.scale_minmax(P, ext, use_numba=True), repeats)
        a = _kernels.scale_minmax(P, ext, use_numba=True)
        b = _kernels.scale_minmax(P, ext, use_numba=False)
        identical = all(np.array_equal(x, y) for x, y in zip(a, b))
    else:
        t_numba, identical = float("nan"), True
    label = policy if isinstance(policy, str) else f"explicit({len(ext)})"
    print(
        f"d={d} n={n:6d} scales={len(ext):5d} [{label:>12s}]  "
        f"numpy {1e3 * t_numpy:9.2f} ms   numba {1e3 * t_numba:9.2f} ms   "
        f"speedup {t_numpy / t_numba:5.1f}x   bit-identical={identical}"
    )


def bench_null_draws(n, d, reps):
    system = RegionSystem("cubes", d, n)
    t0 = time.perf_counter()
    sample_null_statistics(system, reps, seed=0)
    dt = time.perf_counter() - t0
    path = "numba" if _kernels.NUMBA_ENABLED else "numpy"
    print(f"null statistic draws ({path} path): n={n} d={d} x{reps} -> {dt:.2f} s "
          f"({1e3 * dt / reps:.1f} ms/draw)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="small sizes only")
    args = parser.parse_args()

    print(f"numba available: {_kernels.NUMBA_ENABLED} "
          "(set MSCAN_DISABLE_NUMBA=1 to force the NumPy path)\n")
    cases = [
        (1, 4096, "all"),
        (2, 128, "all"),
        (2, 256, "all"),
        (3, 24, "all"),
    ]
    if not args.quick:
        cases += [(1, 16384, "all"), (2, 512, "all"), (2, 512, "dyadic")]
    for d, n, policy in cases:
        bench_kernel(d, n, policy, repeats=3 if n >= 512 else 5)
    print()
    bench_null_draws(64, 2, 200 if args.quick else 1000)


if __name__ == "__main__":
    main()
