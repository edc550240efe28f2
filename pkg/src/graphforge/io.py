"""Canonical graph file format: nodes.jsonl / edges.jsonl plus a manifest.

One JSON object per line, keys sorted, UTF-8. The digest of a graph is the
SHA-256 of its canonical serialization, so byte-stable round-trips double
as equality checks.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from . import __version__
from .errors import ParseError
from .graph import GraphBuilder, GraphSnapshot
from .values import canonical_dumps, from_jsonable

NODES_FILE = "nodes.jsonl"
EDGES_FILE = "edges.jsonl"
MANIFEST_FILE = "manifest.json"


def load_graph(nodes_path, edges_path) -> GraphSnapshot:
    """Load a snapshot from canonical files; errors carry the line number."""
    builder = GraphBuilder()
    for line_no, obj in _read_jsonl(nodes_path):
        try:
            props = {k: from_jsonable(v) for k, v in obj["props"].items()}
            builder.add_node(obj["labels"], props, node_id=obj["id"])
        except (KeyError, TypeError) as exc:
            raise ParseError(str(nodes_path), line_no, f"bad node record: {exc}") from None
    for line_no, obj in _read_jsonl(edges_path):
        try:
            props = {k: from_jsonable(v) for k, v in obj["props"].items()}
            builder.add_edge(obj["src"], obj["dst"], obj["type"], props, edge_id=obj["id"])
        except (KeyError, TypeError) as exc:
            raise ParseError(str(edges_path), line_no, f"bad edge record: {exc}") from None
    return builder.seal()


def load_graph_dir(directory) -> GraphSnapshot:
    directory = Path(directory)
    return load_graph(directory / NODES_FILE, directory / EDGES_FILE)


def _read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(path), line_no, exc.msg) from None


def export_graph(snapshot: GraphSnapshot, directory, seed_lineage=None) -> dict:
    """Write nodes/edges plus a manifest; returns the manifest record."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    (directory / NODES_FILE).write_bytes(snapshot.nodes_jsonl())
    (directory / EDGES_FILE).write_bytes(snapshot.edges_jsonl())
    manifest = {
        "node_count": snapshot.node_count(),
        "edge_count": snapshot.edge_count(),
        "digest": snapshot.digest(),
        "seed_lineage": seed_lineage or [],
        "tool_version": __version__,
    }
    (directory / MANIFEST_FILE).write_text(canonical_dumps(manifest) + "\n", encoding="utf-8")
    return manifest
