"""Result tables, entity references, and canonical comparison forms."""

from __future__ import annotations

from dataclasses import dataclass

from ..values import Timestamp, canonical_dumps, sort_key, to_jsonable


@dataclass(frozen=True)
class NodeRef:
    id: int
    sort_kind = "node"

    def sort_token(self):
        return (self.id,)


@dataclass(frozen=True)
class EdgeRef:
    id: int
    sort_kind = "edge"

    def sort_token(self):
        return (self.id,)


@dataclass(frozen=True)
class PathVal:
    nodes: tuple  # node ids
    edges: tuple  # edge ids
    sort_kind = "path"

    def sort_token(self):
        return (self.nodes, self.edges)

    def length(self) -> int:
        return len(self.edges)


def cell_to_jsonable(cell):
    if isinstance(cell, NodeRef):
        return {"$node": cell.id}
    if isinstance(cell, EdgeRef):
        return {"$edge": cell.id}
    if isinstance(cell, PathVal):
        return {"$path": {"nodes": list(cell.nodes), "edges": list(cell.edges)}}
    if isinstance(cell, Timestamp):
        return {"$ts": int(cell)}
    if isinstance(cell, list):
        return [cell_to_jsonable(v) for v in cell]
    return cell


def cell_compare_form(cell):
    """Comparison form: floats squashed to 12 significant digits so that
    summation-order noise does not break bag equality."""
    if isinstance(cell, bool):
        return ("b", cell)
    if isinstance(cell, Timestamp):
        return ("t", int(cell))
    if isinstance(cell, int):
        return ("i", cell)
    if isinstance(cell, float):
        return ("f", f"{cell:.12e}")
    if isinstance(cell, str):
        return ("s", cell)
    if cell is None:
        return ("z",)
    if isinstance(cell, list):
        return ("l", tuple(cell_compare_form(v) for v in cell))
    if isinstance(cell, NodeRef):
        return ("n", cell.id)
    if isinstance(cell, EdgeRef):
        return ("e", cell.id)
    if isinstance(cell, PathVal):
        return ("p", cell.nodes, cell.edges)
    raise TypeError(f"unexpected cell {cell!r}")


class ResultTable:
    """Bag-semantics result: column names plus rows of cells."""

    def __init__(self, columns, rows):
        self.columns = tuple(columns)
        self.rows = [tuple(r) for r in rows]

    def __len__(self):
        return len(self.rows)

    def canonical_rows(self):
        return sorted(self.rows, key=lambda r: tuple(sort_key(c) for c in r))

    def canonicalized(self) -> "ResultTable":
        return ResultTable(self.columns, self.canonical_rows())

    def compare_key(self):
        return (
            self.columns,
            sorted(tuple(cell_compare_form(c) for c in row) for row in self.rows),
        )

    def bag_equal(self, other: "ResultTable") -> bool:
        return self.compare_key() == other.compare_key()

    def to_jsonable(self):
        return {
            "columns": list(self.columns),
            "rows": [[cell_to_jsonable(c) for c in row] for row in self.canonical_rows()],
        }

    def serialize(self) -> str:
        obj = self.to_jsonable()
        lines = [canonical_dumps({"columns": obj["columns"]})]
        lines.extend(canonical_dumps({"row": row}) for row in obj["rows"])
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"ResultTable(columns={self.columns}, rows={len(self.rows)})"
