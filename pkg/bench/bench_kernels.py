#!/usr/bin/env python3
"""Benchmark the hot quadrature kernel: numba JIT vs pure-numpy fallback.

The screened-profile kernel dominates operator assembly and the potential
integrals (axial points x section nodes).  Run directly:

    python bench/bench_kernels.py

To benchmark only the fallback (for example on a machine without a working
JIT), set COULOMBTUBE_DISABLE_NUMBA=1; the table then carries one column.
"""

import time

import numpy as np

from coulombtube import kernels


def time_call(fn, *args, repeats=5):
    fn(*args)      # warm-up (JIT compilation, cache effects)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(7)
    cases = [
        (1_000, 2_000),
        (10_000, 2_000),
        (40_000, 3_000),
    ]
    print(f"default backend: {kernels.backend_name()}")
    header = f"{'nx':>8} {'nodes':>7} {'numpy [ms]':>12}"
    has_jit = not kernels.NUMBA_DISABLED
    if has_jit:
        header += f" {'numba [ms]':>12} {'speedup':>8} {'max rel diff':>14}"
    print(header)
    for nx, nm in cases:
        xs = np.linspace(-20, 20, nx)
        ynorm2 = rng.uniform(0.0, 1.0, nm)
        u0w = rng.uniform(0.0, 1.0, nm)
        u0w /= u0w.sum()
        t_np = time_call(kernels.coulomb_profile_numpy, xs, ynorm2, u0w, 0.05, 0.3)
        row = f"{nx:>8} {nm:>7} {1e3 * t_np:>12.2f}"
        if has_jit:
            t_nb = time_call(kernels.coulomb_profile, xs, ynorm2, u0w, 0.05, 0.3)
            a = kernels.coulomb_profile_numpy(xs, ynorm2, u0w, 0.05, 0.3)
            b = kernels.coulomb_profile(xs, ynorm2, u0w, 0.05, 0.3)
            rel = float(np.max(np.abs(a - b) / np.abs(a)))
            row += f" {1e3 * t_nb:>12.2f} {t_np / t_nb:>8.1f} {rel:>14.2e}"
        print(row)


if __name__ == "__main__":
    main()
