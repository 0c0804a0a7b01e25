"""Time the numba kernels against their pure-numpy counterparts.

Usage::

    python benchmarks/bench_kernels.py [--sizes 30,90,200] [--repeat 5]

Each kernel is called once per backend before timing so JIT compilation is
excluded.  The last column is the largest absolute difference between backends.
"""

import argparse
import time

import numpy as np

from brainhgt import graph as G
from brainhgt import kernels as K


def _corr(n, rng):
    x = rng.normal(size=(n, 4 * n))
    x[1:] += 0.5 * x[:-1]
    return G.pearson_correlation(x)


def _cases(n, rng):
    r = _corr(n, rng)
    g = G.inverse_distance_graph(r)
    order = np.lexsort((g.ej, g.ei, g.weight))
    active = np.ones(g.n_edges, dtype=bool)
    trees = G.orthogonal_msts(g)
    edges = np.concatenate(trees)
    ei, ej = g.ei[edges], g.ej[edges]
    absr = np.abs(r[ei, ej])
    total = float(np.abs(r[np.triu_indices(n, 1)]).sum())
    adj = G.omst_sparsify(r).adjacency
    logits = rng.normal(size=(256, 8)) * 2
    x = logits / 2 - logits.max(axis=1, keepdims=True) / 2
    return {
        "bfs_hops": lambda: K.bfs_hops(adj),
        "kruskal_forest": lambda: K.kruskal_forest(n, g.ei, g.ej, order, active),
        "prefix_scan": lambda: K.prefix_scan(n, ei, ej, absr, total),
        "entmax15_threshold": lambda: K.entmax15_threshold(x),
    }


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="30,90,200")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend can run")
    print(f"{'kernel':<20}{'N':>6}{'numpy [ms]':>14}{'numba [ms]':>14}{'speedup':>10}  max|diff|")
    for n in [int(s) for s in args.sizes.split(",")]:
        cases = _cases(n, np.random.default_rng(n))
        for name, fn in cases.items():
            with K.backend("numpy"):
                ref = fn()
                t_np = _time(fn, args.repeat)
            if K.HAVE_NUMBA:
                with K.backend("numba"):
                    out = fn()
                    t_nb = _time(fn, args.repeat)
                pairs = zip(ref if isinstance(ref, tuple) else (ref,),
                            out if isinstance(out, tuple) else (out,))
                diff = max(float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))
                           for a, b in pairs)
                print(f"{name:<20}{n:>6}{1e3 * t_np:>14.3f}{1e3 * t_nb:>14.3f}"
                      f"{t_np / t_nb:>10.1f}  {diff:.1e}")
            else:
                print(f"{name:<20}{n:>6}{1e3 * t_np:>14.3f}{'-':>14}{'-':>10}  -")


if __name__ == "__main__":
    main()
