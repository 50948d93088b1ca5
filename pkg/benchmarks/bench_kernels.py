"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 100 300 1000] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from sqroute import _fallback
from sqroute.tsp import NEIGHBOR_K, _neighbor_lists

try:
    from sqroute import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(N: int, gen: np.random.Generator):
    xs, ys = np.ascontiguousarray(gen.random(N)), np.ascontiguousarray(gen.random(N))
    nbr = _neighbor_lists(np.column_stack([xs, ys]), NEIGHBOR_K)
    start = _fallback.nearest_neighbor_order(xs, ys, 0.0, 0.0)
    m = 6
    A = np.ascontiguousarray(np.diag(np.linspace(0.5, 0.9, m)) + 0.01 * gen.random((m, m)))
    B = np.ascontiguousarray(0.2 * gen.random((m, m)))
    return {
        "tour_length": lambda k: k.tour_length(xs, ys, start),
        "nearest_neighbor": lambda k: k.nearest_neighbor_order(xs, ys, 0.0, 0.0),
        "two_opt_scan": lambda k: k.two_opt_scan(xs, ys, start.copy(), 30),
        "two_opt_or_opt": lambda k: k.two_opt_neighbors(xs, ys, start.copy(), nbr, 30 * N, True),
        "iterate_y": lambda k: k.iterate_y(A, B, np.ones(m), 10 ** 5, 1e-12),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'kernel':<18}{'N':>6}{'python [s]':>13}{'cython [s]':>13}{'speedup':>10}")
    for N in args.sizes:
        for name, fn in cases(N, np.random.default_rng(N)).items():
            if name == "two_opt_scan" and N > 600:
                continue
            tp = best_of(lambda: fn(_fallback), args.repeat)
            tc = best_of(lambda: fn(_kernels), args.repeat)
            print(f"{name:<18}{N:>6}{tp:>13.5f}{tc:>13.5f}{tp / max(tc, 1e-9):>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
