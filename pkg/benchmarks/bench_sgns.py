"""Compare the compiled SGNS kernel with the pure-Python fallback.

Both kernels get the same parameters, pairs and negative draws, so the
benchmark also checks that they produce the same vectors.

    python benchmarks/bench_sgns.py --pairs 20000 --dim 32 --negatives 5
"""
import argparse
import time

import numpy as np

from reccheck.embedding import _sgns_py

try:
    from reccheck.embedding import _sgns_ext
except ImportError:
    _sgns_ext = None


def workload(n_tokens, n_pairs, dim, negatives, seed):
    rng = np.random.default_rng(seed)
    w_in = (rng.random((n_tokens, dim)) - 0.5) / dim
    w_out = np.zeros((n_tokens, dim))
    centers = rng.integers(n_tokens, size=n_pairs, dtype=np.int32)
    contexts = rng.integers(n_tokens, size=n_pairs, dtype=np.int32)
    negs = rng.integers(n_tokens, size=(n_pairs, negatives), dtype=np.int32)
    return w_in, w_out, centers, contexts, negs


def bench(kernel, args, repeats):
    w_in, w_out, centers, contexts, negs = args
    best = float("inf")
    for _ in range(repeats):
        a_in, a_out = w_in.copy(), w_out.copy()
        t0 = time.perf_counter()
        kernel(a_in, a_out, centers, contexts, negs, 0.025, 1e-4, 0, len(centers))
        best = min(best, time.perf_counter() - t0)
    return best, a_in


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tokens", type=int, default=1000)
    p.add_argument("--pairs", type=int, default=20000)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    data = workload(args.tokens, args.pairs, args.dim, args.negatives, args.seed)
    t_py, v_py = bench(_sgns_py.train_pairs, data, args.repeats)
    print(f"python  {t_py:8.4f} s  {args.pairs / t_py:12,.0f} pairs/s")
    if _sgns_ext is None:
        print("cython  not built (pip install -e . --no-build-isolation to compile)")
        return
    t_cy, v_cy = bench(_sgns_ext.train_pairs, data, args.repeats)
    print(f"cython  {t_cy:8.4f} s  {args.pairs / t_cy:12,.0f} pairs/s")
    print(f"speedup {t_py / t_cy:8.1f}x   max |diff| {np.abs(v_py - v_cy).max():.2e}")


if __name__ == "__main__":
    main()
