#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy twins on pipeline-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]

Each row also reports whether the two outputs agree.
"""
import argparse
import math
import time

import numpy as np

from uvsd.cnn import layers
from uvsd.embed import skipgram, tsne, walks


def best_of(fn, repeat):
    fn()  # warm-up (numba compiles or loads its cache here)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def close(a, b, tol):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, rtol=0, atol=tol) for x, y in zip(a, b))


def case_walks(scale):
    rng = np.random.default_rng(0)
    n = 400 * scale
    W = np.triu(rng.random((n, n)) < 8.0 / n, 1)
    W = (W | W.T) * rng.uniform(0.5, 1.5, (n, n))
    W = np.triu(W) + np.triu(W).T
    indptr = np.concatenate([[0], np.cumsum((W > 0).sum(1))]).astype(np.int64)
    indices = np.nonzero(W)[1].astype(np.int64)
    weights = W[W > 0]
    starts = np.repeat(np.arange(n, dtype=np.int64), 10)
    uniforms = rng.random((starts.shape[0], 19))
    args = (indptr, indices, weights, starts, uniforms, 2.0, 2.0, 20)
    return "node2vec walks", lambda k: k(*args), walks._walks_numba, walks._walks_numpy, 0


def case_sgns(scale):
    rng = np.random.default_rng(1)
    n, dim, pairs = 400 * scale, 32, 40_000 * scale
    w_in, w_out = rng.normal(0, 0.1, (n, dim)), rng.normal(0, 0.1, (n, dim))
    centers, contexts = rng.integers(0, n, pairs), rng.integers(0, n, pairs)
    negs = rng.integers(0, n, (pairs, 5))

    def run(k):
        a, b = w_in.copy(), w_out.copy()
        k(a, b, centers, contexts, negs, 0.025, 0, pairs)
        return a, b

    return "skip-gram epoch", run, skipgram._sgns_epoch_numba, skipgram._sgns_epoch_numpy, 1e-9


def case_calibrate(scale):
    X = np.random.default_rng(2).normal(size=(300 * scale, 32))
    D = tsne.squared_distances(X)
    return ("t-SNE calibration", lambda k: k(D, math.log(30.0), 1e-5, 200),
            tsne._calibrate_numba, tsne._calibrate_numpy, 1e-10)


def case_tsne_grad(scale):
    rng = np.random.default_rng(3)
    n = 300 * scale
    Y = rng.normal(size=(n, 2))
    P = rng.random((n, n))
    P = (P + P.T) / (2 * P.sum())

    def run(k):
        grad = np.zeros_like(Y)
        k(Y, P, grad)
        return grad

    return "t-SNE gradient", run, tsne._gradient_numba, tsne._gradient_numpy, 1e-12


def _conv_inputs(scale):
    rng = np.random.default_rng(4)
    x = rng.random((4 * scale, 8, 32, 32, 3))
    w = rng.normal(size=(3, 3, 3, 3, 8))
    return x, w, rng.normal(size=8), rng.normal(size=x.shape[:4] + (8,))


def case_conv_fwd(scale):
    x, w, b, _ = _conv_inputs(scale)
    nb, npy = layers.KERNELS["numba"][0], layers.KERNELS["numpy"][0]
    return "conv3d forward", lambda k: k(x, w, b), nb, npy, 1e-9


def case_conv_bwd(scale):
    x, w, _, dy = _conv_inputs(scale)
    nb, npy = layers.KERNELS["numba"][1], layers.KERNELS["numpy"][1]
    return "conv3d backward", lambda k: k(x, w, dy), nb, npy, 1e-8


def case_pool(scale):
    x = np.random.default_rng(5).random((4 * scale, 8, 32, 32, 8))
    nb, npy = layers.KERNELS["numba"][2], layers.KERNELS["numpy"][2]
    return "max-pool forward", lambda k: k(x)[0], nb, npy, 0


CASES = [case_walks, case_sgns, case_calibrate, case_tsne_grad, case_conv_fwd, case_conv_bwd, case_pool]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller inputs, 2 repeats")
    args = ap.parse_args()
    scale, repeat = (1, 2) if args.quick else (2, args.repeat)

    print(f"{'kernel':<20}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  agree")
    for make in CASES:
        name, run, k_nb, k_np, tol = make(scale)
        t_nb = best_of(lambda: run(k_nb), repeat)
        t_np = best_of(lambda: run(k_np), repeat)
        ok = close(run(k_nb), run(k_np), tol)
        print(f"{name:<20}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x  {ok}")


if __name__ == "__main__":
    main()
