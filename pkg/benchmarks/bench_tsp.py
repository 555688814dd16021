"""Compare the compiled and pure-Python tour kernels.

    python benchmarks/bench_tsp.py [--reps 50] [--sizes 10 20 50 100]

Both backends run the same heuristic (nearest neighbour + 2-opt + restarts)
on identical instances; the script reports mean time per tour, the speedup,
and whether the tours agree exactly.
"""

import argparse
import time

import numpy as np

from microhub.geometry import distance_matrix
from microhub.tsp import get_kernels, heuristic_tour


def instances(n, reps, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(reps):
        pts = np.vstack([[0.5, 0.5], rng.random((n, 2))])
        out.append(np.ascontiguousarray(distance_matrix(pts)))
    return out


def time_backend(kernels, dists, seed):
    tours = []
    t0 = time.perf_counter()
    for i, d in enumerate(dists):
        tour, length = heuristic_tour(d, np.random.default_rng([seed, i]), kernels=kernels)
        tours.append((tour.tolist(), length))
    return (time.perf_counter() - t0) / len(dists), tours


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 50, 100])
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    try:
        ck = get_kernels("cython")
    except Exception:
        print("compiled kernels unavailable; build with `pip install -e . --no-build-isolation`")
        return 1
    pk = get_kernels("python")
    print(f"{'N':>5} {'cython ms':>10} {'python ms':>10} {'speedup':>8} {'identical':>9}")
    for n in args.sizes:
        dists = instances(n, args.reps, args.seed)
        tc, rc = time_backend(ck, dists, args.seed)
        tp, rp = time_backend(pk, dists, args.seed)
        print(f"{n:>5} {tc * 1e3:>10.3f} {tp * 1e3:>10.3f} {tp / tc:>8.1f} {str(rc == rp):>9}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
