"""Pure-Python traversal kernels; the fallback twin of ``_fast``.

All functions operate on the flat CSR arrays produced by
:class:`graphforge.graph.CSRBundle` and must stay result-identical to the
compiled implementation (enforced by parity tests).
"""

IMPLEMENTATION = "pure"


def khop_mask(indptr, targets, seeds, hops, n):
    """Byte mask of node indices reachable from ``seeds`` within ``hops``."""
    mask = bytearray(n)
    frontier = []
    for s in seeds:
        s = int(s)
        if not mask[s]:
            mask[s] = 1
            frontier.append(s)
    for _ in range(hops):
        if not frontier:
            break
        nxt = []
        for u in frontier:
            for i in range(int(indptr[u]), int(indptr[u + 1])):
                v = int(targets[i])
                if not mask[v]:
                    mask[v] = 1
                    nxt.append(v)
        frontier = nxt
    return bytes(mask)


def varlen_walks(indptr, targets, eids, codes, allowed, start, min_len, max_len):
    """Enumerate edge-unique walks from ``start`` with length in [min, max].

    Returns a list of ``(endpoint, edge_ids, node_indices)`` tuples in
    deterministic DFS order (neighbors visited by ascending edge id). Nodes
    may repeat along a walk; edges may not.
    """
    out = []
    path_eids: list = []
    path_nodes = [int(start)]
    used = set()

    def expand(u, depth):
        if depth >= min_len:
            out.append((u, tuple(path_eids), tuple(path_nodes)))
        if depth >= max_len:
            return
        for i in range(int(indptr[u]), int(indptr[u + 1])):
            eid = int(eids[i])
            if eid in used or not allowed[int(codes[i])]:
                continue
            v = int(targets[i])
            used.add(eid)
            path_eids.append(eid)
            path_nodes.append(v)
            expand(v, depth + 1)
            used.discard(eid)
            path_eids.pop()
            path_nodes.pop()

    expand(int(start), 0)
    return out


def shortest_walk(indptr, targets, eids, codes, allowed, start, goal, max_len):
    """Shortest walk start->goal within ``max_len`` hops, or None.

    Ties broken by the lexicographically smallest edge-id sequence, which is
    well defined because all candidates share one length.
    """
    start = int(start)
    goal = int(goal)
    if start == goal:
        return (), (start,)
    best = {start: ((), (start,))}
    frontier = {start: ((), (start,))}
    for _ in range(max_len):
        nxt: dict = {}
        for u in sorted(frontier):
            seq_u, nodes_u = frontier[u]
            for i in range(int(indptr[u]), int(indptr[u + 1])):
                if not allowed[int(codes[i])]:
                    continue
                v = int(targets[i])
                if v in best:
                    continue
                cand = (seq_u + (int(eids[i]),), nodes_u + (v,))
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
