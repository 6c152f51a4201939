"""Numba vs numpy timings for the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 64 128 256]

Times pairwise lca depth, HC loss+gradient (dense pair-cache path with all
triplets, and sparse per-triplet path with the default sampled budget) and
decode. Numba kernels are called once before timing so compilation is
excluded. Both backends are checked to agree before anything is timed.
"""

import argparse
import time

import numpy as np

from hyphc._backend import HAVE_NUMBA
from hyphc.geometry import pairwise_lca_depth
from hyphc.hyp_hc import HcLossConfig, hc_loss_and_grad
from hyphc.similarity import SimilarityGraph, default_triplet_budget, sample_triplets
from hyphc.tree import decode


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def make_case(n, seed=0):
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = rng.uniform(0.05, 0.95, n)
    emb = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    w = np.triu(rng.uniform(0, 1, (n, n)), 1)
    return emb, SimilarityGraph(w + w.T), rng


def kernels(n):
    emb, graph, rng = make_case(n)
    cfg = HcLossConfig()
    cases = {"pairwise_lca": lambda b: pairwise_lca_depth(emb, backend=b),
             "decode": lambda b: decode(emb, backend=b)}
    if n <= 256:
        dense = sample_triplets(n)
        cases["hc_dense(all)"] = lambda b: hc_loss_and_grad(emb, graph, dense, cfg, backend=b)
    m = default_triplet_budget(max(n, 129))
    sparse = sample_triplets(n, "uniform", m=min(m, n * (n - 1) // 2 - 1), rng=rng)
    cases[f"hc_sparse({len(sparse)})"] = lambda b: hc_loss_and_grad(emb, graph, sparse, cfg, backend=b)
    return cases


def check_agreement(cases):
    for name, fn in cases.items():
        a, b = fn("numba"), fn("numpy")
        if name.startswith("hc"):
            assert abs(a[0] - b[0]) <= 1e-9 * max(1.0, abs(a[0])), name
            assert np.allclose(a[1], b[1], rtol=1e-8, atol=1e-10), name
        elif name == "decode":
            assert a == b, name
        else:
            assert np.allclose(a, b, rtol=0, atol=1e-12), name


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<22}{'n':>6}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for n in args.sizes:
        cases = kernels(n)
        check_agreement(cases)  # also triggers compilation
        for name, fn in cases.items():
            t_nb = best_of(lambda: fn("numba"), args.repeat)
            t_np = best_of(lambda: fn("numpy"), args.repeat)
            print(f"{name:<22}{n:>6}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
