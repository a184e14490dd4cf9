#!/usr/bin/env python3
"""Compare the jitted and pure-numpy kernel backends.

Times the training kernel (loss_and_grads) and the inference kernel
(forward_batch) at representative problem sizes and prints a speedup
table.  The first jitted call includes compilation, so each case is
warmed up before timing.

Usage:  python3 benchmarks/benchmark_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from csiloc.kernels import _numba as nb
from csiloc.kernels import _numpy as npk
from csiloc.model import init_model

CASES = [
    # (label, dims, n_labels, batch)
    ("single packet", (50, 30, 20, 5), 40, 1),
    ("mini-batch 16", (50, 30, 20, 5), 40, 16),
    ("mini-batch 64", (50, 30, 20, 5), 40, 64),
    ("wide batch 256", (50, 30, 10, 5), 33, 256),
]


def make_inputs(dims, n_labels, b, seed=0):
    m = init_model(dims, n_labels, seed=seed)
    enc_w, enc_b = m.enc_arrays()
    dec_w, dec_b = m.dec_arrays()
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (b, 90))
    onehot = np.zeros((b, n_labels))
    onehot[np.arange(b), rng.integers(0, n_labels, b)] = 1.0
    return enc_w, enc_b, dec_w, dec_b, x, onehot


def time_fn(fn, args, repeats):
    fn(*args)  # warm-up (and JIT compilation for the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20,
                    help="timing repetitions per case (best-of)")
    args = ap.parse_args()

    header = (f"{'case':<16} {'kernel':<16} {'numpy (ms)':>11} "
              f"{'numba (ms)':>11} {'speedup':>8}")
    print(header)
    print("-" * len(header))
    for label, dims, n_labels, b in CASES:
        inputs = make_inputs(dims, n_labels, b)
        for kname, f_np, f_nb in (
                ("loss_and_grads", npk.loss_and_grads, nb.loss_and_grads),
                ("forward_batch", npk.forward_batch, nb.forward_batch)):
            t_np = time_fn(f_np, inputs, args.repeats)
            t_nb = time_fn(f_nb, inputs, args.repeats)
            print(f"{label:<16} {kname:<16} {t_np * 1e3:>11.3f} "
                  f"{t_nb * 1e3:>11.3f} {t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
