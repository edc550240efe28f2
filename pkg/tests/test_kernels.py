"""Parity between the compiled and pure traversal kernels."""

import random
import subprocess
import sys

import numpy as np
import pytest

from graphforge import kernels
from graphforge.kernels import _pure

try:
    from graphforge.kernels import _fast
except ImportError:  # pragma: no cover - build-env dependent
    _fast = None

needs_fast = pytest.mark.skipif(_fast is None, reason="compiled kernels not built")


def random_csr(seed, n=25, m=60, types=3):
    rng = random.Random(seed)
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
    allowed = np.ones(types, dtype=np.uint8)
    return indptr, targets, eids, codes, allowed, n


@needs_fast
@pytest.mark.parametrize("seed", range(6))
def test_khop_parity(seed):
    indptr, targets, eids, codes, allowed, n = random_csr(seed)
    seeds = [seed % n, (seed * 7) % n]
    for hops in (0, 1, 2, 4):
        assert _pure.khop_mask(indptr, targets, seeds, hops, n) == _fast.khop_mask(
            indptr, targets, seeds, hops, n
        )


@needs_fast
@pytest.mark.parametrize("seed", range(6))
def test_varlen_parity(seed):
    indptr, targets, eids, codes, allowed, n = random_csr(seed)
    for start in range(0, n, 5):
        for lo, hi in ((0, 2), (1, 3), (2, 2)):
            assert _pure.varlen_walks(indptr, targets, eids, codes, allowed, start, lo, hi) == _fast.varlen_walks(
                indptr, targets, eids, codes, allowed, start, lo, hi
            )


@needs_fast
@pytest.mark.parametrize("seed", range(6))
def test_shortest_parity(seed):
    indptr, targets, eids, codes, allowed, n = random_csr(seed)
    for src in range(0, n, 4):
        for dst in range(0, n, 3):
            assert _pure.shortest_walk(indptr, targets, eids, codes, allowed, src, dst, 6) == _fast.shortest_walk(
                indptr, targets, eids, codes, allowed, src, dst, 6
            )


def test_khop_hop_zero_is_seeds():
    indptr, targets, eids, codes, allowed, n = random_csr(1)
    mask = _pure.khop_mask(indptr, targets, [3], 0, n)
    assert [i for i, hit in enumerate(mask) if hit] == [3]


def test_varlen_edge_uniqueness():
    # two-node graph with a parallel edge pair: walks may alternate edges but
    # never reuse one
    indptr = np.array([0, 2, 4], dtype=np.int64)
    targets = np.array([1, 1, 0, 0], dtype=np.int64)
    eids = np.array([10, 11, 20, 21], dtype=np.int64)
    codes = np.zeros(4, dtype=np.int64)
    allowed = np.ones(1, dtype=np.uint8)
    walks = _pure.varlen_walks(indptr, targets, eids, codes, allowed, 0, 1, 4)
    for _end, walk_eids, _nodes in walks:
        assert len(set(walk_eids)) == len(walk_eids)


def test_pure_fallback_env(tmp_path):
    code = (
        "import os; os.environ['GRAPHFORGE_PURE'] = '1'; "
        "from graphforge import kernels; print(kernels.IMPLEMENTATION)"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "pure"


def test_active_implementation_reported():
    assert kernels.IMPLEMENTATION in ("pure", "compiled")
