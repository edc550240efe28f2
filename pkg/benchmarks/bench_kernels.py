"""Benchmark the compiled traversal kernels against the pure-Python twin.

Usage: python benchmarks/bench_kernels.py [--nodes 3000] [--degree 6]
"""

import argparse
import random
import time

import numpy as np

from graphforge.kernels import _pure

try:
    from graphforge.kernels import _fast
except ImportError:
    _fast = None


def build_csr(n, degree, seed=0, types=4):
    rng = random.Random(seed)
    m = n * degree
    rows = sorted(
        ((rng.randrange(n), rng.randrange(n), eid, rng.randrange(types)) for eid in range(m)),
        key=lambda r: (r[0], r[2]),
    )
    indptr = np.zeros(n + 1, dtype=np.int64)
    targets = np.empty(m, dtype=np.int64)
    eids = np.empty(m, dtype=np.int64)
    codes = np.empty(m, dtype=np.int64)
    for i, (src, dst, eid, code) in enumerate(rows):
        indptr[src + 1] += 1
        targets[i] = dst
        eids[i] = eid
        codes[i] = code
    np.cumsum(indptr, out=indptr)
    return indptr, targets, eids, codes, np.ones(types, dtype=np.uint8)


def timed(fn, repeat=3):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--nodes", type=int, default=3000)
    parser.add_argument("--degree", type=int, default=6)
    args = parser.parse_args()

    indptr, targets, eids, codes, allowed = build_csr(args.nodes, args.degree)
    n = args.nodes
    seeds = list(range(0, n, max(1, n // 50)))

    cases = {
        "khop(h=3)": lambda mod: mod.khop_mask(indptr, targets, seeds, 3, n),
        "varlen(1..3)x25": lambda mod: [
            mod.varlen_walks(indptr, targets, eids, codes, allowed, s, 1, 3) for s in seeds[:25]
        ],
        "shortest(<=6)x40": lambda mod: [
            mod.shortest_walk(indptr, targets, eids, codes, allowed, s, (s * 7 + 13) % n, 6)
            for s in seeds[:40]
        ],
    }

    print(f"graph: |V|={n} |E|={n * args.degree}")
    print(f"{'kernel':<20} {'pure':>10} {'compiled':>10} {'speedup':>9}")
    for name, case in cases.items():
        pure_t, pure_result = timed(lambda: case(_pure))
        if _fast is None:
            print(f"{name:<20} {pure_t * 1000:>9.1f}ms {'-':>10} {'-':>9}")
            continue
        fast_t, fast_result = timed(lambda: case(_fast))
        assert pure_result == fast_result, f"parity violation in {name}"
        print(f"{name:<20} {pure_t * 1000:>9.1f}ms {fast_t * 1000:>9.1f}ms {pure_t / fast_t:>8.1f}x")
    if _fast is None:
        print("compiled kernels not built; run `python setup.py build_ext --inplace`")


if __name__ == "__main__":
    main()
