"""Compare the compiled and pure-Python SMO solvers on identical Gram matrices.

Usage: ``python benchmarks/bench_smo.py [--sizes 100 200 400] [--repeat 3]``
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from landensemble import svm


def _problem(n: int, seed: int = 0):
    r = np.random.default_rng(seed)
    X = np.vstack([r.normal(0.0, 1.0, (n // 2, 4)), r.normal(0.8, 1.0, (n - n // 2, 4))])
    y = np.r_[np.ones(n // 2), -np.ones(n - n // 2)]
    return svm.rbf_gram(X, X, 0.25), y


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--C", type=float, default=10.0)
    ns = ap.parse_args(argv)

    backends = svm.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'n':>6}" + "".join(f"{b + ' [s]':>16}" for b in backends) + f"{'speedup':>10}{'identical':>11}")
    for n in ns.sizes:
        K, y = _problem(n)
        times, results = {}, {}
        for b in backends:
            solve = svm.get_solver(b)
            best = float("inf")
            for _ in range(ns.repeat):
                t0 = time.perf_counter()
                results[b] = solve(K, y, ns.C, 1e-3, 100_000)
                best = min(best, time.perf_counter() - t0)
            times[b] = best
        row = f"{n:>6}" + "".join(f"{times[b]:>16.4f}" for b in backends)
        if len(backends) == 2:
            a, c = results["python"], results["cython"]
            same = np.array_equal(a[0], c[0]) and a[1:] == c[1:]
            row += f"{times['python'] / times['cython']:>9.1f}x{str(same):>11}"
        print(row)


if __name__ == "__main__":
    main()
