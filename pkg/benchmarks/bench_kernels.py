#!/usr/bin/env python3
"""Time the numba and numpy kernel back-ends side by side.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs once untimed (numba compilation) and then ``--repeat``
times; the best wall time is reported together with the speed-up.
"""
import argparse
import time

import numpy as np

from qdemu import _accel, kernels
from qdemu.rollout import reassembly_weights


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    n = 1024
    psi = (rng.normal(size=(8, n)) + 1j * rng.normal(size=(8, n)))
    vh = np.exp(-0.5j * 5e-4 * rng.random((8, n)))
    coeff = kernels.pair_coefficients(0.013) + kernels.pair_coefficients(0.026)

    def split(impl):
        return lambda: impl(psi.copy(), vh, vh * vh, 200, *coeff)

    re = rng.normal(size=(4, n)).astype(np.float32)
    im = rng.normal(size=(4, n)).astype(np.float32)
    v = rng.random(n).astype(np.float32)
    centers = np.arange(n, dtype=np.int64)
    out = np.empty((n, 4, 23, 3), np.float32)

    def gather(impl):
        return lambda: impl(re, im, v, centers, 23, out)

    pred = rng.normal(size=(n, 23, 2))
    w = reassembly_weights(23, 4.0)

    def overlap(impl):
        return lambda: impl(pred, centers, w, n, np.zeros(n), np.zeros(n), np.zeros(n))

    return {
        "space_split_steps (8 x 1024, 200 steps)": (split, "space_split_steps"),
        "gather_windows (1024 windows)": (gather, "gather_windows"),
        "overlap_add (1024 windows)": (overlap, "overlap_add"),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<42} {'numba ms':>10} {'numpy ms':>10} {'speed-up':>9}")
    for label, (make, name) in cases(rng).items():
        t_nb = best_of(make(getattr(kernels, f"{name}_numba")), args.repeat)
        t_np = best_of(make(getattr(kernels, f"{name}_numpy")), args.repeat)
        print(f"{label:<42} {t_nb * 1e3:>10.2f} {t_np * 1e3:>10.2f} {t_np / t_nb:>8.1f}x")
    print(f"active back-end in this process: {_accel.backend()}")


if __name__ == "__main__":
    main()
