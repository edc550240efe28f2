"""In-memory labeled property graph: snapshots, builders, mutation sessions.

A sealed :class:`GraphSnapshot` is immutable and index-consistent; all
mutation goes through a :class:`MutationSession` whose commit produces a new
snapshot. Node/edge ids are dense integers assigned at ingest; external
string ids live in an ordinary property.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import (
    ConstraintError,
    DanglingEdge,
    DuplicateId,
    GraphError,
    NonFiniteValue,
    UnknownEdge,
    UnknownNode,
)
from .values import canonical_dumps, sha256_hex, to_jsonable, validate_props, validate_value


@dataclass(frozen=True)
class Node:
    id: int
    labels: tuple
    props: dict

    @property
    def primary_label(self) -> str:
        return self.labels[0]


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    dst: int
    rel_type: str
    props: dict


@dataclass(frozen=True)
class SchemaSummary:
    """Deterministic digest of labels, relation types, and property shapes."""

    node_labels: tuple
    rel_types: tuple
    # label -> prop name -> tag -> count (over every label a node carries)
    label_props: dict
    # rel_type -> (src primary label, dst primary label) -> count
    rel_endpoints: dict

    def props_for(self, label: str) -> dict:
        return self.label_props.get(label, {})

    def is_empty(self) -> bool:
        return not self.node_labels


def _build_schema(nodes: dict, edges: dict) -> SchemaSummary:
    label_props: dict = {}
    labels = set()
    for node in nodes.values():
        for label in node.labels:
            labels.add(label)
            per = label_props.setdefault(label, {})
            for name, value in node.props.items():
                from .values import tag_of

                per.setdefault(name, {}).setdefault(tag_of(value), 0)
                per[name][tag_of(value)] += 1
    rel_endpoints: dict = {}
    rel_types = set()
    for edge in edges.values():
        rel_types.add(edge.rel_type)
        pair = (nodes[edge.src].primary_label, nodes[edge.dst].primary_label)
        per = rel_endpoints.setdefault(edge.rel_type, {})
        per[pair] = per.get(pair, 0) + 1
    return SchemaSummary(
        node_labels=tuple(sorted(labels)),
        rel_types=tuple(sorted(rel_types)),
        label_props=label_props,
        rel_endpoints=rel_endpoints,
    )


class CSRBundle:
    """Flat adjacency arrays feeding the traversal kernels.

    Node ids map to dense indices through ``node_ids`` (sorted) / ``index_of``.
    Neighbor lists are ordered by ascending edge id for determinism.
    """

    def __init__(self, snapshot: "GraphSnapshot"):
        self.node_ids = np.array(sorted(snapshot.nodes), dtype=np.int64)
        self.index_of = {int(nid): i for i, nid in enumerate(self.node_ids)}
        n = len(self.node_ids)

        rel_types = sorted({e.rel_type for e in snapshot.edges.values()})
        self.type_code = {t: i for i, t in enumerate(rel_types)}
        self.type_names = rel_types

        eids = sorted(snapshot.edges)
        out_rows, in_rows, und_rows = [], [], []
        for eid in eids:
            e = snapshot.edges[eid]
            s, d = self.index_of[e.src], self.index_of[e.dst]
            code = self.type_code[e.rel_type]
            out_rows.append((s, d, eid, code))
            in_rows.append((d, s, eid, code))
            und_rows.append((s, d, eid, code))
            if s != d:  # self-loops appear once in the undirected view
                und_rows.append((d, s, eid, code))

        self.out = self._pack(out_rows, n)
        self.inc = self._pack(in_rows, n)
        self.und = self._pack(und_rows, n)

    @staticmethod
    def _pack(rows, n):
        rows.sort(key=lambda r: (r[0], r[2]))
        indptr = np.zeros(n + 1, dtype=np.int64)
        targets = np.empty(len(rows), dtype=np.int64)
        eids = np.empty(len(rows), dtype=np.int64)
        codes = np.empty(len(rows), dtype=np.int64)
        for i, (src, dst, eid, code) in enumerate(rows):
            indptr[src + 1] += 1
            targets[i] = dst
            eids[i] = eid
            codes[i] = code
        np.cumsum(indptr, out=indptr)
        return indptr, targets, eids, codes

    def arrays(self, direction: str):
        if direction == "out":
            return self.out
        if direction == "in":
            return self.inc
        if direction == "both":
            return self.und
        raise ValueError(f"bad direction {direction!r}")

    def allowed_mask(self, rel_types: Optional[Iterable[str]]):
        mask = np.zeros(max(len(self.type_names), 1), dtype=np.uint8)
        if rel_types is None:
            mask[:] = 1
        else:
            for t in rel_types:
                code = self.type_code.get(t)
                if code is not None:
                    mask[code] = 1
        return mask


class GraphSnapshot:
    """Immutable LPG with adjacency, label, and (lazy) property indices."""

    def __init__(self, nodes: dict, edges: dict):
        self.nodes = nodes
        self.edges = edges
        self.out_adj: dict = {nid: [] for nid in nodes}
        self.in_adj: dict = {nid: [] for nid in nodes}
        for eid in sorted(edges):
            e = edges[eid]
            if e.src not in nodes:
                raise DanglingEdge(eid, e.src)
            if e.dst not in nodes:
                raise DanglingEdge(eid, e.dst)
            self.out_adj[e.src].append(eid)
            self.in_adj[e.dst].append(eid)
        for adj in (self.out_adj, self.in_adj):
            for nid in adj:
                adj[nid] = tuple(adj[nid])
        label_index: dict = {}
        for nid in sorted(nodes):
            for label in nodes[nid].labels:
                label_index.setdefault(label, []).append(nid)
        self.label_index = {lb: frozenset(ids) for lb, ids in label_index.items()}
        self._schema: Optional[SchemaSummary] = None
        self._prop_index: dict = {}
        self._digest: Optional[str] = None
        self._csr: Optional[CSRBundle] = None

    @property
    def schema(self) -> SchemaSummary:
        if self._schema is None:
            self._schema = _build_schema(self.nodes, self.edges)
        return self._schema

    # -- core accessors ----------------------------------------------------

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def edge(self, edge_id: int) -> Edge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise UnknownEdge(edge_id) from None

    def node_count(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return len(self.edges)

    def nodes_with_label(self, label: str) -> frozenset:
        return self.label_index.get(label, frozenset())

    def degree(self, node_id: int, direction: str = "both", rel_type: Optional[str] = None) -> int:
        """Incident-edge count respecting multiplicity; direction in out/in/both."""
        if node_id not in self.nodes:
            raise UnknownNode(node_id)
        eids: list = []
        if direction in ("out", "both"):
            eids.extend(self.out_adj[node_id])
        if direction in ("in", "both"):
            eids.extend(self.in_adj[node_id])
        if direction not in ("out", "in", "both"):
            raise ValueError(f"bad direction {direction!r}")
        if rel_type is None:
            return len(eids)
        return sum(1 for eid in eids if self.edges[eid].rel_type == rel_type)

    # -- indices -----------------------------------------------------------

    def seek(self, label: str, prop: str, value) -> frozenset:
        """Equality lookup via the (label, property) index, built on first use."""
        key = (label, prop)
        index = self._prop_index.get(key)
        if index is None:
            index = {}
            for nid in sorted(self.nodes_with_label(label)):
                v = self.nodes[nid].props.get(prop)
                if v is None or isinstance(v, list):
                    continue
                index.setdefault(v, []).append(nid)
            index = {v: frozenset(ids) for v, ids in index.items()}
            self._prop_index[key] = index
        return index.get(value, frozenset())

    def csr(self) -> CSRBundle:
        if self._csr is None:
            self._csr = CSRBundle(self)
        return self._csr

    # -- serialization -----------------------------------------------------

    def nodes_jsonl(self) -> bytes:
        lines = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            obj = {
                "id": nid,
                "labels": list(n.labels),
                "props": {k: to_jsonable(v) for k, v in sorted(n.props.items())},
            }
            lines.append(canonical_dumps(obj))
        return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")

    def edges_jsonl(self) -> bytes:
        lines = []
        for eid in sorted(self.edges):
            e = self.edges[eid]
            obj = {
                "id": eid,
                "src": e.src,
                "dst": e.dst,
                "type": e.rel_type,
                "props": {k: to_jsonable(v) for k, v in sorted(e.props.items())},
            }
            lines.append(canonical_dumps(obj))
        return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")

    def digest(self) -> str:
        if self._digest is None:
            self._digest = sha256_hex(self.nodes_jsonl() + self.edges_jsonl())
        return self._digest

    def __repr__(self):
        return f"GraphSnapshot(|V|={len(self.nodes)}, |E|={len(self.edges)})"


class GraphBuilder:
    """Accumulates nodes and edges, then seals into an immutable snapshot."""

    def __init__(self):
        self._nodes: dict = {}
        self._edges: dict = {}
        self._next_node = 0
        self._next_edge = 0

    def add_node(self, labels, props=None, node_id: Optional[int] = None) -> int:
        labels = tuple(dict.fromkeys(labels))
        if not labels:
            raise GraphError("node requires at least one label")
        if node_id is None:
            node_id = self._next_node
        elif node_id in self._nodes:
            raise DuplicateId("node", node_id)
        clean = {}
        for name, value in (props or {}).items():
            try:
                clean[name] = validate_value(value)
            except NonFiniteValue:
                warnings.warn(f"dropping non-finite property {name!r} on node {node_id}")
        self._nodes[node_id] = Node(node_id, labels, clean)
        self._next_node = max(self._next_node, node_id + 1)
        return node_id

    def add_edge(self, src, dst, rel_type, props=None, edge_id: Optional[int] = None) -> int:
        if edge_id is None:
            edge_id = self._next_edge
        elif edge_id in self._edges:
            raise DuplicateId("edge", edge_id)
        clean = {}
        for name, value in (props or {}).items():
            try:
                clean[name] = validate_value(value)
            except NonFiniteValue:
                warnings.warn(f"dropping non-finite property {name!r} on edge {edge_id}")
        self._edges[edge_id] = Edge(edge_id, src, dst, rel_type, clean)
        self._next_edge = max(self._next_edge, edge_id + 1)
        return edge_id

    def seal(self) -> GraphSnapshot:
        for eid in sorted(self._edges):
            e = self._edges[eid]
            if e.src not in self._nodes:
                raise DanglingEdge(eid, e.src)
            if e.dst not in self._nodes:
                raise DanglingEdge(eid, e.dst)
        return GraphSnapshot(dict(self._nodes), dict(self._edges))


def seal(builder: GraphBuilder) -> GraphSnapshot:
    return builder.seal()


# -- mutation --------------------------------------------------------------


@dataclass
class _Op:
    kind: str
    args: tuple


@dataclass
class MutationSummary:
    nodes_created: int = 0
    nodes_deleted: int = 0
    edges_created: int = 0
    edges_deleted: int = 0
    props_set: int = 0
    labels_set: int = 0

    def merge(self, other: "MutationSummary") -> "MutationSummary":
        return MutationSummary(
            self.nodes_created + other.nodes_created,
            self.nodes_deleted + other.nodes_deleted,
            self.edges_created + other.edges_created,
            self.edges_deleted + other.edges_deleted,
            self.props_set + other.props_set,
            self.labels_set + other.labels_set,
        )


class MutationSession:
    """Single-owner change buffer over a base snapshot.

    Operations accumulate in order; :meth:`commit` replays them onto a copy
    of the base and seals the result. Replaying the same list on the same
    base is deterministic by construction.
    """

    def __init__(self, base: GraphSnapshot):
        self.base = base
        self.ops: list = []
        self._next_node = (max(base.nodes) + 1) if base.nodes else 0
        self._next_edge = (max(base.edges) + 1) if base.edges else 0
        self._view: Optional[GraphSnapshot] = None
        self.last_summary = MutationSummary()

    def _stale(self):
        self._view = None

    def create_node(self, labels, props=None, node_id: Optional[int] = None) -> int:
        if node_id is None:
            node_id = self._next_node
        self._next_node = max(self._next_node, node_id + 1)
        self.ops.append(_Op("create_node", (node_id, tuple(dict.fromkeys(labels)), dict(props or {}))))
        self._stale()
        return node_id

    def create_edge(self, src, dst, rel_type, props=None, edge_id: Optional[int] = None) -> int:
        if edge_id is None:
            edge_id = self._next_edge
        self._next_edge = max(self._next_edge, edge_id + 1)
        self.ops.append(_Op("create_edge", (edge_id, src, dst, rel_type, dict(props or {}))))
        self._stale()
        return edge_id

    def delete_node(self, node_id: int, detach: bool = False):
        self.ops.append(_Op("delete_node", (node_id, detach)))
        self._stale()

    def delete_edge(self, edge_id: int):
        self.ops.append(_Op("delete_edge", (edge_id,)))
        self._stale()

    def set_node_prop(self, node_id: int, name: str, value):
        """value=None removes the property."""
        self.ops.append(_Op("set_node_prop", (node_id, name, value)))
        self._stale()

    def set_edge_prop(self, edge_id: int, name: str, value):
        self.ops.append(_Op("set_edge_prop", (edge_id, name, value)))
        self._stale()

    def set_node_labels(self, node_id: int, labels):
        labels = tuple(dict.fromkeys(labels))
        if not labels:
            raise GraphError("node requires at least one label")
        self.ops.append(_Op("set_node_labels", (node_id, labels)))
        self._stale()

    def set_edge_type(self, edge_id: int, rel_type: str):
        self.ops.append(_Op("set_edge_type", (edge_id, rel_type)))
        self._stale()

    def commit(self) -> GraphSnapshot:
        nodes = dict(self.base.nodes)
        edges = dict(self.base.edges)
        summary = MutationSummary()
        for op in self.ops:
            self._apply(op, nodes, edges, summary)
        self.last_summary = summary
        return GraphSnapshot(nodes, edges)

    def view(self) -> GraphSnapshot:
        """Base plus pending ops, sealed; cached until the next op."""
        if not self.ops:
            return self.base
        if self._view is None:
            self._view = self.commit()
        return self._view

    @staticmethod
    def _apply(op: _Op, nodes: dict, edges: dict, summary: MutationSummary):
        kind = op.kind
        if kind == "create_node":
            node_id, labels, props = op.args
            if node_id in nodes:
                raise DuplicateId("node", node_id)
            nodes[node_id] = Node(node_id, labels, validate_props(props))
            summary.nodes_created += 1
        elif kind == "create_edge":
            edge_id, src, dst, rel_type, props = op.args
            if edge_id in edges:
                raise DuplicateId("edge", edge_id)
            if src not in nodes:
                raise DanglingEdge(edge_id, src)
            if dst not in nodes:
                raise DanglingEdge(edge_id, dst)
            edges[edge_id] = Edge(edge_id, src, dst, rel_type, validate_props(props))
            summary.edges_created += 1
        elif kind == "delete_node":
            node_id, detach = op.args
            if node_id not in nodes:
                raise UnknownNode(node_id)
            incident = [eid for eid, e in edges.items() if e.src == node_id or e.dst == node_id]
            if incident and not detach:
                raise ConstraintError(
                    f"node {node_id} still has {len(incident)} incident edge(s); use detach delete"
                )
            for eid in incident:
                del edges[eid]
                summary.edges_deleted += 1
            del nodes[node_id]
            summary.nodes_deleted += 1
        elif kind == "delete_edge":
            (edge_id,) = op.args
            if edge_id not in edges:
                raise UnknownEdge(edge_id)
            del edges[edge_id]
            summary.edges_deleted += 1
        elif kind == "set_node_prop":
            node_id, name, value = op.args
            if node_id not in nodes:
                raise UnknownNode(node_id)
            n = nodes[node_id]
            props = dict(n.props)
            if value is None:
                props.pop(name, None)
            else:
                props[name] = validate_value(value)
            nodes[node_id] = Node(n.id, n.labels, props)
            summary.props_set += 1
        elif kind == "set_edge_prop":
            edge_id, name, value = op.args
            if edge_id not in edges:
                raise UnknownEdge(edge_id)
            e = edges[edge_id]
            props = dict(e.props)
            if value is None:
                props.pop(name, None)
            else:
                props[name] = validate_value(value)
            edges[edge_id] = Edge(e.id, e.src, e.dst, e.rel_type, props)
            summary.props_set += 1
        elif kind == "set_node_labels":
            node_id, labels = op.args
            if node_id not in nodes:
                raise UnknownNode(node_id)
            n = nodes[node_id]
            nodes[node_id] = Node(n.id, labels, n.props)
            summary.labels_set += 1
        elif kind == "set_edge_type":
            edge_id, rel_type = op.args
            if edge_id not in edges:
                raise UnknownEdge(edge_id)
            e = edges[edge_id]
            edges[edge_id] = Edge(e.id, e.src, e.dst, rel_type, e.props)
            summary.labels_set += 1
        else:  # pragma: no cover
            raise ValueError(f"unknown op {kind}")


def open_mutation_session(base: GraphSnapshot) -> MutationSession:
    return MutationSession(base)
