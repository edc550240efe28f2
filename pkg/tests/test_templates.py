import pytest

from graphforge.cypher import execute, parse
from graphforge.cypher.ops import ALL_OPERATORS, MANAGEMENT_OPERATORS
from graphforge.errors import EmptySchema
from graphforge.graph import GraphBuilder
from graphforge.synth import spec_from_preset, synthesize
from graphforge.templates import (
    TemplateLibrary,
    _probe,
    build_basic_templates,
    build_library,
    build_management_batches,
    derive_boolean_pairs,
)

NOAGG_REQUIRED_TAGS = {
    "Anti",
    "Union",
    "Distinct",
    "Unwind",
    "Apply",
    "CartesianProduct",
    "HashJoin",
    "VarLengthExpand",
    "Repeat",
    "Triadic",
    "Optional",
    "ShortestPath",
    "Sort",
    "Limit",
    "Skip",
    "Top",
    "Argument",
}


@pytest.fixture(scope="module")
def schema():
    return synthesize(spec_from_preset("bi-mini", 300, seed=7)).schema


@pytest.fixture(scope="module")
def library(schema):
    return build_library(schema)


def test_empty_schema_rejected():
    empty = GraphBuilder().seal().schema
    with pytest.raises(EmptySchema):
        build_basic_templates(empty)
    with pytest.raises(EmptySchema):
        build_management_batches(empty)


def test_basic_contains_node_lookup(library):
    skeletons = [t.skeleton for t in library.basic]
    assert any("WHERE n." in s and "= $VALUE RETURN" in s and s.startswith("MATCH (n:") for s in skeletons)


def test_basic_tags_restricted(library):
    allowed = {"Scan", "Seek", "Expand", "Filter", "Project"}
    for template in library.basic:
        assert template.tags <= allowed, (template.id, template.tags)


def test_single_label_schema_has_no_expand_templates():
    b = GraphBuilder()
    b.add_node(["Solo"], {"uid": "s0", "x": 1})
    b.add_node(["Solo"], {"uid": "s1", "x": 2})
    schema = b.seal().schema
    basic = build_basic_templates(schema)
    assert basic
    for template in basic:
        assert "Expand" not in template.tags


def test_every_template_parses(library):
    for template in library.analytical():
        plan = parse(_probe(template.skeleton, template.signature))
        assert plan.read_only
        assert plan.tags() == template.tags


def test_noagg_tag_coverage(library):
    union = set()
    for template in library.noagg:
        union |= template.tags
    assert NOAGG_REQUIRED_TAGS <= union, NOAGG_REQUIRED_TAGS - union


def test_varlen_template_bounds(library):
    assert any("*1..3" in t.skeleton for t in library.noagg)


def test_union_template_joins_two_scans(library):
    assert any(" UNION " in t.skeleton for t in library.noagg)


def test_agg_is_five_per_aggregable(library):
    aggregable = [
        t
        for t in library.basic + library.noagg
        if t.match_fragment and t.agg_var and any(a.parent_id == t.id for a in library.agg)
    ]
    derived = [t for t in library.agg if t.parent_id]
    assert len(derived) == 5 * len(aggregable)
    for parent in aggregable:
        children = [t for t in derived if t.parent_id == parent.id]
        funcs = sorted(t.id.split("/")[1] for t in children)
        assert funcs == ["avg", "count", "max", "min", "sum"]


def test_agg_skeleton_extends_parent(library):
    by_id = {t.id: t for t in library.analytical()}
    for template in library.agg:
        if template.parent_id:
            parent = by_id[template.parent_id]
            assert template.skeleton.startswith(parent.match_fragment)


def test_degree_count_template_exists(library):
    assert any("count(m) AS degree" in t.skeleton for t in library.agg)


def test_avg_over_filtered_scan_exists(library):
    assert any(
        t.skeleton.startswith("MATCH (n:") and "> $BOUND RETURN avg(" in t.skeleton for t in library.agg
    )


def test_boolean_pairs_only_from_collect_or_cartesian(library):
    for pair in library.boolean_pairs:
        assert {"Collect", "CartesianProduct"} & pair.positive.tags
    without = [t for t in library.noagg if not ({"Collect", "CartesianProduct"} & t.tags)]
    assert derive_boolean_pairs(without) == []


def test_boolean_pair_inverse_negates(library):
    for pair in library.boolean_pairs:
        assert " = " in pair.positive.skeleton
        assert " <> " in pair.inverse.skeleton
        assert pair.positive.signature == pair.inverse.signature


def test_boolean_pair_disjoint_on_toy_graph(library):
    b = GraphBuilder()
    for i, ip in enumerate(["1.1.1.1", "1.1.1.1", "2.2.2.2"]):
        b.add_node(["Person"], {"uid": f"p{i}", "locationIP": ip, "birthday": 100 + i})
    g = b.seal()
    lib = build_library(g.schema)
    assert lib.boolean_pairs
    pair = lib.boolean_pairs[0]
    positive = execute(parse(_strip_to_domain(pair.positive.skeleton)), g)
    inverse = execute(parse(_strip_to_domain(pair.inverse.skeleton)), g)
    domain = execute(parse(_strip_to_domain(pair.domain_skeleton)), g)
    pos_rows = set(positive.rows)
    inv_rows = set(inverse.rows)
    assert not pos_rows & inv_rows
    assert pos_rows | inv_rows == set(domain.rows)


def _strip_to_domain(skeleton: str) -> str:
    # compare pairs on the raw match domain: project the two endpoint ids
    head = skeleton.split(" RETURN ")[0]
    return head + " RETURN id(a) AS left, id(b) AS right"


def test_management_batches_k5(library):
    assert library.management
    for batch in library.management:
        assert batch.k == 5
        for op, val in batch.steps:
            op_plan = parse(_probe(op, batch.signature))
            val_plan = parse(_probe(val, batch.signature))
            assert not op_plan.read_only
            assert val_plan.read_only


def test_management_kinds(library):
    kinds = {b.kind for b in library.management}
    assert kinds == {"Uniform", "Mixed"}
    mutation_tags = set()
    for batch in library.management:
        for op, _ in batch.steps:
            mutation_tags |= parse(_probe(op, batch.signature)).tags() & MANAGEMENT_OPERATORS
    assert mutation_tags == MANAGEMENT_OPERATORS


def test_management_k_override(schema):
    batches = build_management_batches(schema, k=3)
    assert all(b.k == 3 for b in batches)
    with pytest.raises(ValueError):
        build_management_batches(schema, k=0)


def test_operator_completeness(library):
    assert library.all_tags() == ALL_OPERATORS


def test_library_deterministic(schema):
    a = build_library(schema)
    b = build_library(schema)
    assert a.to_jsonl() == b.to_jsonl()
    assert [t.id for t in a.analytical()] == [t.id for t in b.analytical()]


def test_serialization_roundtrip(library):
    text = library.to_jsonl()
    back = TemplateLibrary.from_jsonl(text)
    assert back.to_jsonl() == text
    assert len(back.analytical()) == len(library.analytical())
