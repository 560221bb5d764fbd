"""Timing comparison of the two kernel backends.

Runs the ADP dissimilarity matrix and the all-pairs geodesic solver on a
synthetic hall dataset once per backend and reports best-of-N wall times.
The numba path JIT-compiles on first use, so each timed section is preceded
by an untimed warmup call.

Usage: python3 benchmarks/bench_kernels.py [--count 400] [--repeats 3]
"""

import argparse
import time

import numpy as np

from chartloc import backend, dissim, presets, scenesim


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=400,
                    help="records in the synthetic dataset")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--k", type=int, default=20)
    args = ap.parse_args()

    print("building %d-record dataset ..." % args.count, flush=True)
    ds = scenesim.generate_dataset(presets.convex_hall(count=args.count))

    rows = []
    results = {}
    for name in ("numpy", "numba"):
        try:
            backend.use_backend(name)
        except RuntimeError as e:
            print("skipping %s backend: %s" % (name, e))
            continue
        dm = dissim.dissimilarity_matrix(ds)  # warmup (JIT + cache effects)
        t_adp, dm = best_of(lambda: dissim.dissimilarity_matrix(ds),
                            args.repeats)
        graph = dissim.knn_graph(dm, k=args.k)
        dissim.geodesic_matrix(graph)  # warmup
        t_geo, geo = best_of(lambda: dissim.geodesic_matrix(graph),
                             args.repeats)
        rows.append((name, t_adp, t_geo))
        results[name] = (dm, geo)
    backend.use_backend(None)

    print()
    print("%-8s %14s %14s" % ("backend", "adp_matrix [s]", "geodesics [s]"))
    print("-" * 40)
    for name, t_adp, t_geo in rows:
        print("%-8s %14.3f %14.3f" % (name, t_adp, t_geo))
    if len(rows) == 2:
        print("-" * 40)
        print("speedup  %14.2fx %13.2fx"
              % (rows[0][1] / rows[1][1], rows[0][2] / rows[1][2]))
        d_adp = float(np.max(np.abs(results["numpy"][0] - results["numba"][0])))
        d_geo = float(np.max(np.abs(results["numpy"][1] - results["numba"][1])))
        print("max |numpy - numba|: adp %.3g, geodesics %.3g" % (d_adp, d_geo))


if __name__ == "__main__":
    main()
