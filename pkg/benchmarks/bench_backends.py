"""Benchmark the numba kernels against the pure-numpy fallbacks.

Toggles DUALSE_BACKEND in-process and times the two hot kernels: the
Jacobi eigensolver behind sym_eig and the nearest-centroid assignment
behind kmeans. Results are checked for agreement before timings are
reported.

    python3 benchmarks/bench_backends.py [--eig-size 400] [--points 200000]
"""

import argparse
import os
import time

import numpy as np


def time_call(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def bench_eig(n, rng):
    from dualse import backend

    base = rng.standard_normal((n, n))
    base = (base + base.T) / 2
    results = {}
    timings = {}
    for mode in ("numba", "numpy"):
        os.environ["DUALSE_BACKEND"] = mode
        if mode == "numba":
            backend.jacobi_diagonalize(base[:40, :40].copy(), 100, 1e-12)  # compile
        def run():
            work = base.copy()
            v, sweeps, ok = backend.jacobi_diagonalize(work, 100, 1e-12)
            assert ok
            return np.sort(np.diag(work))
        timings[mode], results[mode] = time_call(run, repeat=2)
    agree = np.abs(results["numba"] - results["numpy"]).max()
    return timings, agree


def bench_assign(n_points, dim, k, rng):
    from dualse import backend

    pts = rng.standard_normal((n_points, dim))
    cents = rng.standard_normal((k, dim))
    results = {}
    timings = {}
    for mode in ("numba", "numpy"):
        os.environ["DUALSE_BACKEND"] = mode
        if mode == "numba":
            backend.assign_nearest(pts[:64], cents)  # compile
        timings[mode], results[mode] = time_call(backend.assign_nearest, pts, cents)
    same = np.array_equal(results["numba"][0], results["numpy"][0])
    return timings, same


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eig-size", type=int, default=400)
    parser.add_argument("--points", type=int, default=200_000)
    parser.add_argument("--dim", type=int, default=16)
    parser.add_argument("--clusters", type=int, default=12)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'kernel':<28} {'numba':>10} {'numpy':>10} {'speedup':>9}  agreement")

    timings, agree = bench_eig(args.eig_size, rng)
    print(
        f"{'jacobi eig n=%d' % args.eig_size:<28} "
        f"{timings['numba']:>9.3f}s {timings['numpy']:>9.3f}s "
        f"{timings['numpy'] / timings['numba']:>8.1f}x  max |dλ| = {agree:.2e}"
    )

    timings, same = bench_assign(args.points, args.dim, args.clusters, rng)
    print(
        f"{'kmeans assign %.0e pts' % args.points:<28} "
        f"{timings['numba']:>9.3f}s {timings['numpy']:>9.3f}s "
        f"{timings['numpy'] / timings['numba']:>8.1f}x  labels equal: {same}"
    )


if __name__ == "__main__":
    main()
