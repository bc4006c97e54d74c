#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

The package selects the numba path automatically when numba imports (set
SWIMBLADDER_NO_NUMBA=1 to force the fallback at run time); this script times
both versions side by side on realistic workloads and checks they agree.

Usage: python benchmarks/bench_kernels.py [--size 192] [--repeats 20]
"""

import argparse
import time

import numpy as np

from swimbladder._accel import HAVE_NUMBA
from swimbladder.kernels import (
    _csp_sweep_nb,
    _csp_sweep_np,
    _joint_hist_nb,
    _joint_hist_np,
    _warp_bilinear_nb,
    _warp_bilinear_np,
)


def timeit(fn, args, repeats):
    fn(*args)  # warm up (jit compile on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeats):
        out = fn(*args)
    return (time.perf_counter() - t0) / repeats, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=192, help="image side length")
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n = args.size
    img = rng.integers(0, 256, size=(n, n)).astype(np.float64)
    mov = rng.integers(0, 256, size=(n, n)).astype(np.float64)
    coeffs = (0.98, 0.05, -0.04, 1.01, 3.0, -2.0)
    polar = rng.integers(0, 256, size=(20, 361)).astype(np.float64)
    polar[:, -1] = polar[:, 0]

    cases = [
        ("warp_bilinear", _warp_bilinear_nb, _warp_bilinear_np,
         (img, *coeffs, n, n, 0.0)),
        ("joint_hist", _joint_hist_nb, _joint_hist_np, (img, mov, *coeffs, 32)),
        ("csp_sweep", _csp_sweep_nb, _csp_sweep_np, (polar, 12, 10)),
    ]

    if not HAVE_NUMBA:
        print("numba unavailable or disabled: both columns run the same python path")
    print(f"{'kernel':<16} {'numba (ms)':>12} {'numpy (ms)':>12} {'speedup':>9}  agree")
    for name, fn_nb, fn_np, fn_args in cases:
        t_nb, out_nb = timeit(fn_nb, fn_args, args.repeats)
        t_np, out_np = timeit(fn_np, fn_args, args.repeats)
        if isinstance(out_nb, tuple):
            agree = all(np.array_equal(a, b) for a, b in zip(out_nb, out_np))
        else:
            agree = np.array_equal(out_nb, out_np)
        print(f"{name:<16} {t_nb * 1e3:>12.3f} {t_np * 1e3:>12.3f} "
              f"{t_np / t_nb:>8.1f}x  {agree}")


if __name__ == "__main__":
    main()
