"""Property value type system and canonical serialization.

Property values are plain Python objects restricted to a tagged union:
64-bit signed int, finite float, str, bool, Timestamp (epoch milliseconds),
and homogeneous lists thereof. Canonical JSON keeps round-trips byte-stable;
timestamps survive as ``{"$ts": ms}`` envelopes.
"""

from __future__ import annotations

import hashlib
import json
import math
import unicodedata

from .errors import InvalidProperty, NonFiniteValue

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class Timestamp(int):
    """Epoch-millisecond instant; compares and sorts like its integer value."""

    __slots__ = ()

    def __repr__(self):
        return f"Timestamp({int(self)})"


TAG_INT = "int"
TAG_FLOAT = "float"
TAG_TEXT = "text"
TAG_BOOL = "bool"
TAG_TIMESTAMP = "timestamp"
TAG_LIST = "list"

NUMERIC_TAGS = frozenset({TAG_INT, TAG_FLOAT})


def tag_of(value):
    """Return the union tag for ``value`` or raise InvalidProperty."""
    if isinstance(value, bool):
        return TAG_BOOL
    if isinstance(value, Timestamp):
        return TAG_TIMESTAMP
    if isinstance(value, int):
        return TAG_INT
    if isinstance(value, float):
        return TAG_FLOAT
    if isinstance(value, str):
        return TAG_TEXT
    if isinstance(value, list):
        return TAG_LIST
    raise InvalidProperty(f"unsupported property type {type(value).__name__}")


def validate_value(value):
    """Validate one property value; returns it unchanged.

    Raises NonFiniteValue for NaN/Inf floats, InvalidProperty for out-of-range
    integers, unsupported types, or tag-heterogeneous lists.
    """
    tag = tag_of(value)
    if tag == TAG_FLOAT and not math.isfinite(value):
        raise NonFiniteValue(f"non-finite float {value!r}")
    if tag in (TAG_INT, TAG_TIMESTAMP) and not INT64_MIN <= int(value) <= INT64_MAX:
        raise InvalidProperty(f"integer {value!r} outside 64-bit signed range")
    if tag == TAG_LIST:
        elem_tags = set()
        for elem in value:
            validate_value(elem)
            elem_tags.add(tag_of(elem))
        if len(elem_tags) > 1:
            raise InvalidProperty(f"heterogeneous list tags {sorted(elem_tags)}")
    return value


def validate_props(props):
    """Validate a property map; returns a fresh dict with validated values."""
    out = {}
    for name, value in props.items():
        if not isinstance(name, str):
            raise InvalidProperty(f"property name {name!r} is not a string")
        out[name] = validate_value(value)
    return out


def to_jsonable(value):
    """Lower a property value into plain JSON types (timestamps enveloped)."""
    if isinstance(value, Timestamp):
        return {"$ts": int(value)}
    if isinstance(value, list):
        return [to_jsonable(v) for v in value]
    return value


def from_jsonable(obj):
    """Inverse of :func:`to_jsonable`."""
    if isinstance(obj, dict):
        if set(obj.keys()) == {"$ts"}:
            return Timestamp(obj["$ts"])
        raise InvalidProperty(f"unexpected object value {obj!r}")
    if isinstance(obj, list):
        return [from_jsonable(v) for v in obj]
    return obj


def canonical_dumps(obj) -> str:
    """Deterministic JSON: sorted keys, minimal separators, raw UTF-8."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def derive_seed(*parts) -> int:
    """Fold parts into a 64-bit seed via SHA-256; stable across processes."""
    h = hashlib.sha256()
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "big")


def canonicalize_key(text: str) -> str:
    """Entity-key normalization for set metrics: trim, casefold, NFC."""
    return unicodedata.normalize("NFC", text.strip()).casefold()


_SORT_RANK = {
    "null": 9,
    "bool": 1,
    "number": 2,
    "text": 3,
    "list": 4,
    "node": 5,
    "edge": 6,
    "path": 7,
    "map": 8,
}


def sort_key(value):
    """Total order over result cells; used for canonical row ordering.

    Package-defined order (not openCypher orderability): bools, numbers,
    text, lists, entities, nulls last.
    """
    if value is None:
        return (9, 0)
    if isinstance(value, bool):
        return (1, int(value))
    if isinstance(value, (int, float)):
        return (2, float(value), 0 if isinstance(value, float) else 1)
    if isinstance(value, str):
        return (3, value)
    if isinstance(value, (list, tuple)):
        return (4, tuple(sort_key(v) for v in value))
    kind = getattr(value, "sort_kind", None)
    if kind is not None:
        return (_SORT_RANK[kind],) + value.sort_token()
    return (8, repr(value))
