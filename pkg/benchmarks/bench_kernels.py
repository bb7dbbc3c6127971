"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--quick]

Times the four hot paths on representative workloads and prints a table
with the speedup of the jit build over the reference build.  The jit
numbers exclude compilation (one warm-up call per kernel).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mpsts.kernels import jit, reference
from mpsts.kernels._shared import geometric_cdf_table, subtraction_accept_table
from mpsts.rng import derive_key


def timeit(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_pmf_scan(backend, nodes: int):
    rng = np.random.default_rng(1)
    mu0s = rng.uniform(0.2, 0.4, nodes)
    ms = rng.uniform(1.5, 2.5, nodes)
    Ms = ms + rng.uniform(0.5, 1.5, nodes)
    data_n = np.arange(0, 16, dtype=np.int64)
    data_d = rng.integers(1, 5000, data_n.size).astype(np.float64)
    return lambda: backend.loglike_photocount_scan(
        mu0s, ms, Ms, 3, data_n, data_d, 0.0015
    )


def bench_pmf_table(backend, reps: int):
    def run():
        for _ in range(reps):
            backend.pmf_table(0.264, 2.0, 3.0, 3, 200)

    return run


def bench_hermite(backend, points: int):
    q = np.linspace(-40, 40, points)
    return lambda: backend.hermite_table(512, q)


def bench_sampler(backend, n: int):
    cdf = np.cumsum(reference.pmf_table(0.264, 2.0, 3.0, 3, 30))
    key = derive_key(1, 2)
    return lambda: backend.sample_counts(cdf, key, 0, n)


def bench_oracle(backend, n: int):
    geom = geometric_cdf_table(0.264)
    accept = subtraction_accept_table(22, 3)
    return lambda: backend.subtraction_oracle(7, 1, n, 2, 3, 3, geom, accept)


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    scale = 0.1 if args.quick else 1.0
    workloads = [
        ("likelihood scan (grid nodes)", bench_pmf_scan, int(200_000 * scale)),
        ("pmf table x reps (N<=200)", bench_pmf_table, int(2_000 * scale)),
        ("hermite table 512 x points", bench_hermite, int(20_000 * scale)),
        ("inverse-CDF draws", bench_sampler, int(2_000_000 * scale)),
        ("subtraction oracle trials", bench_oracle, int(2_000 * scale)),
    ]

    print(f"{'kernel':<34} {'workload':>10} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}")
    for name, factory, size in workloads:
        fn_ref = factory(reference, size)
        fn_jit = factory(jit, size)
        fn_jit()  # compile outside the timed region
        t_ref = timeit(fn_ref)
        t_jit = timeit(fn_jit)
        print(
            f"{name:<34} {size:>10} {t_ref:>10.4f} {t_jit:>10.4f} "
            f"{t_ref / t_jit:>7.1f}x"
        )


if __name__ == "__main__":
    main()
