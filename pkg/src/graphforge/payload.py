"""Answer payloads: the tagged union carried by ground truth and answerers.

Wire form is a plain dict — {"kind": ..., "value": ...} — with kinds
entity_set, rows, scalar, and boolean_labels. Equality predicates here are
the single source of truth for stratification and step scoring.
"""

from __future__ import annotations

from .values import canonicalize_key

ENTITY_SET = "entity_set"
ROWS = "rows"
SCALAR = "scalar"
BOOLEAN_LABELS = "boolean_labels"

KINDS = (ENTITY_SET, ROWS, SCALAR, BOOLEAN_LABELS)

SCALAR_TOL = 1e-9


def entity_set(keys) -> dict:
    return {"kind": ENTITY_SET, "value": sorted({canonicalize_key(str(k)) for k in keys})}


def rows(row_list) -> dict:
    return {"kind": ROWS, "value": sorted(row_list, key=_row_key)}


def scalar(value) -> dict:
    return {"kind": SCALAR, "value": value}


def boolean_labels(labels: dict) -> dict:
    return {"kind": BOOLEAN_LABELS, "value": {str(k): bool(v) for k, v in sorted(labels.items())}}


def _row_key(row):
    return tuple((repr(type(c).__name__), repr(c)) for c in row)


def normalize(payload: dict) -> dict:
    """Re-canonicalize a payload coming off the wire."""
    kind = payload.get("kind")
    value = payload.get("value")
    if kind == ENTITY_SET:
        return entity_set(value or [])
    if kind == ROWS:
        return rows([list(r) for r in (value or [])])
    if kind == SCALAR:
        return scalar(value)
    if kind == BOOLEAN_LABELS:
        return boolean_labels(value or {})
    raise ValueError(f"unknown payload kind {kind!r}")


def scalars_close(a, b, tol: float = SCALAR_TOL) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
        return a == b
    # absolute or relative, whichever is looser
    return abs(a - b) <= max(tol, tol * max(abs(a), abs(b)))


def payload_equal(a: dict, b: dict, tol: float = SCALAR_TOL) -> bool:
    if a["kind"] != b["kind"]:
        return False
    kind = a["kind"]
    if kind == ENTITY_SET:
        return set(a["value"]) == set(b["value"])
    if kind == ROWS:
        return sorted(map(_row_key, a["value"])) == sorted(map(_row_key, b["value"]))
    if kind == SCALAR:
        return scalars_close(a["value"], b["value"], tol)
    if kind == BOOLEAN_LABELS:
        return a["value"] == b["value"]
    raise ValueError(f"unknown payload kind {kind!r}")
