"""Compare the numba and numpy versions of the hot kernels.

Usage: python benchmarks/bench_accel.py [--repeat N]

Each kernel is warmed up once (this triggers numba compilation, or a cache
load) and then timed with ``timeit``; the best of ``repeat`` runs is reported.
"""
import argparse
import timeit

import numpy as np

from hifloc import _accel, _kernels


def cases(rng):
    n = 20_000
    drive = 10_000.0 * np.sin(np.linspace(0, 40 * np.pi, n))
    r_p = 200.0 * (1 + 0.05 * rng.normal(size=n))
    r_n = 200.0 * (1 + 0.05 * rng.normal(size=n))
    yield "arc_steps (20k steps)", (drive, 4000.0, -4000.0, r_p, r_n, 35.0, 7.0), "_arc_steps"

    X = rng.normal(size=(400, 6))
    yield "gram gaussian (400x400x6)", (X, X, _kernels.KERNEL_GAUSSIAN, 0.2, 3.0, 1.0), "_gram"
    yield "gram poly (400x400x6)", (X, X, _kernels.KERNEL_POLY, 1.0, 3.0, 1.0), "_gram"

    X = rng.normal(size=(300, 3))
    y = np.where(X[:, 0] + 0.5 * rng.normal(size=300) > 0, 1.0, -1.0)
    K = _kernels._gram_np(X, X, _kernels.KERNEL_GAUSSIAN, 0.5, 3.0, 1.0)
    yield "smo (300 samples)", (K, y, 10.0, 1e-3, 60_000), "_smo"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if not _accel.HAS_NUMBA:
        print("numba is not installed; only the numpy versions exist")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, call_args, stem in cases(rng):
        times = {}
        for suffix in ("_np", "_nb"):
            fn = getattr(_kernels, stem + suffix)
            fn(*call_args)
            timer = timeit.Timer(lambda: fn(*call_args))
            number, _ = timer.autorange()
            times[suffix] = min(timer.repeat(args.repeat, number)) / number * 1e3
        print(f"{name:<28}{times['_np']:>12.3f}{times['_nb']:>12.3f}{times['_np'] / times['_nb']:>9.1f}x")


if __name__ == "__main__":
    main()
