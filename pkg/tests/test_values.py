import math

import pytest

from graphforge.errors import InvalidProperty, NonFiniteValue
from graphforge.values import (
    Timestamp,
    canonical_dumps,
    canonicalize_key,
    derive_seed,
    from_jsonable,
    sort_key,
    tag_of,
    to_jsonable,
    validate_value,
)


def test_tags():
    assert tag_of(True) == "bool"
    assert tag_of(3) == "int"
    assert tag_of(3.5) == "float"
    assert tag_of("x") == "text"
    assert tag_of(Timestamp(12)) == "timestamp"
    assert tag_of([1, 2]) == "list"


def test_bool_is_not_int_tag():
    # bool subclasses int in Python; the tag system must keep them apart
    assert tag_of(True) != tag_of(1)


def test_nan_rejected():
    with pytest.raises(NonFiniteValue):
        validate_value(float("nan"))
    with pytest.raises(NonFiniteValue):
        validate_value(float("inf"))


def test_int64_range():
    validate_value(2**63 - 1)
    with pytest.raises(InvalidProperty):
        validate_value(2**63)


def test_list_homogeneity():
    validate_value([1, 2, 3])
    validate_value(["a", "b"])
    with pytest.raises(InvalidProperty):
        validate_value([1, "a"])
    with pytest.raises(InvalidProperty):
        validate_value([1, 2.0])


def test_timestamp_roundtrip():
    ts = Timestamp(1577836800000)
    encoded = to_jsonable(ts)
    assert encoded == {"$ts": 1577836800000}
    back = from_jsonable(encoded)
    assert isinstance(back, Timestamp) and back == ts


def test_canonical_dumps_sorted_keys():
    assert canonical_dumps({"b": 1, "a": 2}) == '{"a":2,"b":1}'


def test_derive_seed_stable():
    assert derive_seed(1, "x") == derive_seed(1, "x")
    assert derive_seed(1, "x") != derive_seed(1, "y")


def test_canonicalize_key():
    assert canonicalize_key("  Foo ") == "foo"
    assert canonicalize_key("STRASSE") == canonicalize_key("strasse")


def test_sort_key_total_order():
    cells = [None, True, False, 3, 2.5, "abc", [1, 2], [1]]
    ordered = sorted(cells, key=sort_key)
    assert ordered.index(None) == len(cells) - 1  # nulls last
    assert ordered.index(False) < ordered.index(True)
    for a in cells:
        for b in cells:
            assert (sort_key(a) < sort_key(b)) or (sort_key(a) >= sort_key(b))


def test_sort_key_numeric_cross_type():
    assert sort_key(2) < sort_key(2.5) < sort_key(3)
    assert not math.isnan(sort_key(1.5)[1])
