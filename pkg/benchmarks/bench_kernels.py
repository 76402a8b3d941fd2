#!/usr/bin/env python3
"""Benchmark the numba hot kernels against the pure-numpy fallbacks.

Run as a script:  python benchmarks/bench_kernels.py [--sizes 4096,65536]

Both implementations are imported directly (no env flag juggling), timed on
identical inputs, and checked to agree before the table is printed.
"""

import argparse
import time

import numpy as np

from critex import kernels


def _time(fn, *args, repeat=5, **kw):
    fn(*args, **kw)  # warm-up (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args, **kw)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_reaction(size, rng):
    v = rng.standard_normal(size)
    c = rng.standard_normal(size)
    args = (v, c, 0.3, 1e-3, 2.5, -0.5)
    t_np = _time(kernels.reaction_rk4_forced_numpy, *args)
    if not kernels.NUMBA_ENABLED:
        return t_np, None
    out_nb = kernels.reaction_rk4_forced(*args)
    out_np = kernels.reaction_rk4_forced_numpy(*args)
    assert np.max(np.abs(out_nb - out_np)) < 1e-14
    t_nb = _time(kernels.reaction_rk4_forced, *args)
    return t_np, t_nb


def bench_convolution(n, rng):
    f = rng.standard_normal((n, n))
    k = np.exp(-np.linspace(0.0, 4.0, n))
    vol = 1.0 / n**2
    t_np = _time(kernels.convolve_periodic_numpy, f, [k, k], vol, repeat=3)
    if not kernels.NUMBA_ENABLED:
        return t_np, None
    out_nb = kernels.convolve_periodic(f, [k, k], vol)
    out_np = kernels.convolve_periodic_numpy(f, [k, k], vol)
    assert np.max(np.abs(out_nb - out_np)) < 1e-12
    t_nb = _time(kernels.convolve_periodic, f, [k, k], vol, repeat=3)
    return t_np, t_nb


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="4096,65536,262144",
                        help="comma-separated reaction sizes")
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    print(f"backend available: numba={'yes' if kernels.NUMBA_ENABLED else 'no'}")
    header = f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))

    for size in (int(s) for s in args.sizes.split(",")):
        t_np, t_nb = bench_reaction(size, rng)
        label = f"reaction_rk4 n={size}"
        if t_nb is None:
            print(f"{label:<28}{t_np * 1e3:>12.3f}{'-':>12}{'-':>9}")
        else:
            print(f"{label:<28}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}"
                  f"{t_np / t_nb:>9.2f}")

    for n in (32, 64):
        t_np, t_nb = bench_convolution(n, rng)
        label = f"convolve_periodic {n}x{n}"
        if t_nb is None:
            print(f"{label:<28}{t_np * 1e3:>12.3f}{'-':>12}{'-':>9}")
        else:
            print(f"{label:<28}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}"
                  f"{t_np / t_nb:>9.2f}")


if __name__ == "__main__":
    main()
