"""Compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--n 4001] [--repeat 200]
"""

import argparse
import timeit

import numpy as np

from tmhomog import backend
from tmhomog.effective import run_leading, run_second_order
from tmhomog.micro import run_micro
from tmhomog.presets import fig1_config, fig45_config


def _kernel_cases(n, rng):
    u, up, out, work = rng.standard_normal(n), rng.standard_normal(n), np.empty(n), np.empty(n)
    m = n - 200
    idx = np.clip(np.arange(m)[:, None] + np.arange(4)[None, :], 0, n - 1).astype(np.int64)
    w = rng.standard_normal((m, 4))
    g = np.empty(m)
    return {
        "leading_step": lambda k: k.leading_step(u, up, out, 1.1, 0.9, 0.5),
        "second_order_rhs": lambda k: k.second_order_rhs(u, up, out, 0.8, 0.3, 0.05),
        "thomas_const": lambda k: k.thomas_const(1.6, -0.3, u, out, work),
        "gather4": lambda k: k.gather4(u, idx, w, g),
    }


def _runs():
    short = dict(T_end=0.05, receivers=(), snapshot_times=())
    return {
        "leading fig1": lambda b: run_leading(fig1_config(), backend=b, **short),
        "second_order fig5": lambda b: run_second_order(fig45_config(20.0, 10.0), backend=b, **short),
        "micro fig1": lambda b: run_micro(fig1_config(), backend=b, **short),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4001)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if not backend.HAS_NATIVE:
        raise SystemExit("compiled kernels not built; nothing to compare")
    kernels = {"numpy": backend.get_kernels("numpy"), "cython": backend.get_kernels("cython")}
    rng = np.random.default_rng(0)
    print(f"{'case':22s} {'numpy [us]':>12s} {'cython [us]':>12s} {'speed-up':>9s}")
    for name, fn in _kernel_cases(args.n, rng).items():
        t = {b: min(timeit.repeat(lambda: fn(k), number=args.repeat, repeat=3)) / args.repeat * 1e6
             for b, k in kernels.items()}
        print(f"{name:22s} {t['numpy']:12.1f} {t['cython']:12.1f} {t['numpy'] / t['cython']:9.2f}")
    print(f"\n{'run (T_end=0.05 s)':22s} {'numpy [s]':>12s} {'cython [s]':>12s} {'speed-up':>9s}")
    for name, fn in _runs().items():
        t = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=2)) for b in kernels}
        print(f"{name:22s} {t['numpy']:12.3f} {t['cython']:12.3f} {t['numpy'] / t['cython']:9.2f}")


if __name__ == "__main__":
    main()
