#!/usr/bin/env python3
"""Benchmark every hot kernel on both backends (jitted loops vs numpy).

Run:  python benchmarks/bench_backends.py [--quick]

Shapes mirror production use: batch-128 training steps over 101-base
sequences for the one-hot and embedding input paths, a realistic skip-gram
epoch slice, and exact signed-rank counting at the enumeration limit.
"""

import argparse
import time

import numpy as np

from seqbind import kernels


def timeit(fn, repeats):
    fn()  # warm (JIT + caches)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def cases(rng, quick):
    reps = 3 if quick else 8

    x1 = rng.random((128, 4, 147))
    w1 = rng.random((16, 24, 4))
    x2 = rng.random((128, 50, 117))
    w2 = rng.random((16, 10, 50))
    pool_in = rng.random((128, 16, 124))

    t_steps, batch, hid = 106, 128, 50
    xproj = rng.random((t_steps, batch, 4 * hid))
    u = rng.random((hid, 4 * hid)) * 0.2
    x_zr = rng.random((t_steps, batch, 2 * hid))
    x_c = rng.random((t_steps, batch, hid))
    u_zr = rng.random((hid, 2 * hid)) * 0.2
    u_c = rng.random((hid, hid)) * 0.2
    dh = rng.random((batch, hid))

    vocab, dim = 65, 50
    n_tok = 20 if quick else 200
    sents = rng.integers(vocab, size=99 * n_tok).astype(np.int64)
    offsets = np.arange(0, 99 * n_tok + 1, 99, dtype=np.int64)
    draws = rng.integers(1, 6, size=len(sents)).astype(np.int64)
    uniforms = rng.random(len(sents) * 10 * 5)
    cum = np.cumsum(np.full(vocab, 1.0 / vocab))
    cum[-1] = 1.0

    n_rank = 18 if quick else 24
    ranks2 = (2 * (np.arange(n_rank) + 1)).astype(np.int64)
    limit = int(ranks2.sum() // 3)

    def make(kern):
        y1, patches1 = kern.conv1d_forward(x1, w1, 1)
        dy1 = rng.random(y1.shape)
        y2, patches2 = kern.conv1d_forward(x2, w2, 1)
        dy2 = rng.random(y2.shape)
        _, arg = kern.maxpool_forward(pool_in, 3, 1)
        dpool = rng.random(arg.shape)
        lstm_state = kern.lstm_forward(xproj, u)
        gru_state = kern.gru_forward(x_zr, x_c, u_zr, u_c)
        return {
            "conv1d fwd (one-hot)": lambda: kern.conv1d_forward(x1, w1, 1),
            "conv1d bwd-w (one-hot)": lambda: kern.conv1d_backward_weights(dy1, patches1, 4, 24),
            "conv1d bwd-x (one-hot)": lambda: kern.conv1d_backward_input(dy1, w1, 1, 147),
            "conv1d fwd (embedding)": lambda: kern.conv1d_forward(x2, w2, 1),
            "conv1d bwd-w (embedding)": lambda: kern.conv1d_backward_weights(dy2, patches2, 50, 10),
            "maxpool fwd": lambda: kern.maxpool_forward(pool_in, 3, 1),
            "maxpool bwd": lambda: kern.maxpool_backward(dpool, arg, 124),
            "lstm scan fwd": lambda: kern.lstm_forward(xproj, u),
            "lstm scan bwd": lambda: kern.lstm_backward(
                dh, *lstm_state, np.ascontiguousarray(u.T)),
            "gru scan fwd": lambda: kern.gru_forward(x_zr, x_c, u_zr, u_c),
            "gru scan bwd": lambda: kern.gru_backward(
                dh, *gru_state, np.ascontiguousarray(u_zr.T), np.ascontiguousarray(u_c.T)),
            "skip-gram epoch": lambda: kern.sgns_epoch(
                rng.random((vocab, dim)) * 0.1, np.zeros((vocab, dim)), sents,
                offsets, draws, uniforms, cum, 5, 0.025),
            f"signed-rank count n={n_rank}": lambda: kern.count_signed_rank_le(
                ranks2, np.int64(limit)),
        }

    return make, reps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller shapes, fewer reps")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    make, reps = cases(rng, args.quick)
    results = {}
    for name in kernels.available_backends():
        kern = kernels._BACKENDS[name]
        for label, fn in make(kern).items():
            results.setdefault(label, {})[name] = timeit(fn, reps)

    width = max(len(label) for label in results)
    print(f"{'kernel':<{width}}  {'numba (ms)':>11}  {'numpy (ms)':>11}  {'numba speedup':>13}")
    for label, got in results.items():
        ratio = got["numpy"] / got["numba"]
        print(f"{label:<{width}}  {got['numba']:>11.2f}  {got['numpy']:>11.2f}  {ratio:>12.2f}x")


if __name__ == "__main__":
    main()
