# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled traversal kernels; result-identical twin of ``_pure``."""

from libc.stdlib cimport free, malloc

IMPLEMENTATION = "compiled"


def khop_mask(long[:] indptr, long[:] targets, seeds, long hops, long n):
    if n == 0:
        return b""
    cdef unsigned char* mask = <unsigned char*> malloc(n)
    cdef long* frontier = <long*> malloc(n * sizeof(long))
    cdef long* nxt = <long*> malloc(n * sizeof(long))
    cdef long i, j, u, v, h, flen, nlen
    if mask == NULL or frontier == NULL or nxt == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            mask[i] = 0
        flen = 0
        for s in seeds:
            u = <long> s
            if not mask[u]:
                mask[u] = 1
                frontier[flen] = u
                flen += 1
        for h in range(hops):
            if flen == 0:
                break
            nlen = 0
            for i in range(flen):
                u = frontier[i]
                for j in range(indptr[u], indptr[u + 1]):
                    v = targets[j]
                    if not mask[v]:
                        mask[v] = 1
                        nxt[nlen] = v
                        nlen += 1
            frontier, nxt = nxt, frontier
            flen = nlen
        return bytes(<unsigned char[:n]> mask)
    finally:
        free(mask)
        free(frontier)
        free(nxt)


cdef void _expand(long u, long depth, long min_len, long max_len,
                  long[:] indptr, long[:] targets, long[:] eids,
                  long[:] codes, const unsigned char[:] allowed,
                  long* path_eids, long* path_nodes, list out):
    cdef long i, v, eid, k
    cdef bint dup
    if depth >= min_len:
        out.append((u,
                    tuple(path_eids[k] for k in range(depth)),
                    tuple(path_nodes[k] for k in range(depth + 1))))
    if depth >= max_len:
        return
    for i in range(indptr[u], indptr[u + 1]):
        if not allowed[codes[i]]:
            continue
        eid = eids[i]
        dup = False
        for k in range(depth):
            if path_eids[k] == eid:
                dup = True
                break
        if dup:
            continue
        v = targets[i]
        path_eids[depth] = eid
        path_nodes[depth + 1] = v
        _expand(v, depth + 1, min_len, max_len, indptr, targets, eids,
                codes, allowed, path_eids, path_nodes, out)


def varlen_walks(long[:] indptr, long[:] targets, long[:] eids, long[:] codes,
                 const unsigned char[:] allowed, long start, long min_len, long max_len):
    cdef long* path_eids = <long*> malloc((max_len + 1) * sizeof(long))
    cdef long* path_nodes = <long*> malloc((max_len + 2) * sizeof(long))
    if path_eids == NULL or path_nodes == NULL:
        raise MemoryError()
    out: list = []
    try:
        path_nodes[0] = start
        _expand(start, 0, min_len, max_len, indptr, targets, eids, codes,
                allowed, path_eids, path_nodes, out)
        return out
    finally:
        free(path_eids)
        free(path_nodes)


def shortest_walk(long[:] indptr, long[:] targets, long[:] eids, long[:] codes,
                  const unsigned char[:] allowed, long start, long goal, long max_len):
    # BFS layer by layer keeping the lexicographically smallest edge-id
    # sequence per newly reached node; Python dicts keep this readable and
    # the layer fan-out small.
    cdef long u, v, i, depth
    if start == goal:
        return (), (start,)
    best = {start: ((), (start,))}
    frontier = {start: ((), (start,))}
    for depth in range(max_len):
        nxt = {}
        for u in sorted(frontier):
            seq_u, nodes_u = frontier[u]
            for i in range(indptr[u], indptr[u + 1]):
                if not allowed[codes[i]]:
                    continue
                v = targets[i]
                if v in best:
                    continue
                cand = (seq_u + (eids[i],), nodes_u + (v,))
                cur = nxt.get(v)
                if cur is None or cand[0] < cur[0]:
                    nxt[v] = cand
        if not nxt:
            return None
        if goal in nxt:
            return nxt[goal]
        best.update(nxt)
        frontier = nxt
    return None
