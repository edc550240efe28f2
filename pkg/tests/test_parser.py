import pytest

from graphforge.cypher import parse, parse_ast
from graphforge.cypher import ast
from graphforge.errors import CypherSyntaxError, UnsupportedFeature


def tags(source):
    return parse(source).tags()


def test_canonical_pipeline_plan():
    plan = parse("MATCH (n:Person) WHERE n.age > 30 RETURN n.name")
    assert tags("MATCH (n:Person) WHERE n.age > 30 RETURN n.name") == {"Scan", "Filter", "Project"}
    assert plan.read_only
    assert plan.columns == ("n.name",)


def test_varlength_plan():
    plan = parse("MATCH p=(a)-[:KNOWS*1..3]->(b) RETURN b")
    assert "VarLengthExpand" in plan.tags()


def test_call_unsupported():
    with pytest.raises(UnsupportedFeature):
        parse("CALL db.labels()")


def test_syntax_error_position():
    with pytest.raises(CypherSyntaxError) as err:
        parse("MATCH (n:Person RETURN n")
    assert err.value.line == 1
    assert err.value.column > 1
    assert err.value.expected


def test_syntax_error_expected_set():
    with pytest.raises(CypherSyntaxError) as err:
        parse("FROB (n) RETURN n")
    assert any("MATCH" in e for e in err.value.expected)


def test_read_requires_return():
    with pytest.raises(CypherSyntaxError):
        parse("MATCH (n:Person)")


def test_return_must_be_last():
    with pytest.raises(CypherSyntaxError):
        parse("MATCH (n) RETURN n MATCH (m) RETURN m")


def test_seek_tag_on_equality():
    assert "Seek" in tags("MATCH (n:Person) WHERE n.name = 'A' RETURN n")
    assert "Seek" in tags("MATCH (n:Person {name: 'A'}) RETURN n")
    # inequality cannot seek
    assert "Seek" not in tags("MATCH (n:Person) WHERE n.age > 30 RETURN n")
    # no label, no index
    assert "Seek" not in tags("MATCH (n) WHERE n.name = 'A' RETURN n")


def test_direction_parsing():
    stmt = parse_ast("MATCH (a)-[:R]->(b), (c)<-[:R]-(d), (e)-[:R]-(f) RETURN a, c, e")
    rels = [p.rel_pats()[0] for p in stmt.queries[0].clauses[0].parts]
    assert [r.direction for r in rels] == ["out", "in", "both"]


def test_hop_specs():
    def hops(src):
        stmt = parse_ast(src)
        return stmt.queries[0].clauses[0].parts[0].rel_pats()[0].hops

    assert hops("MATCH (a)-[:R]->(b) RETURN a") is None
    assert hops("MATCH (a)-[:R*]->(b) RETURN a") == (1, 8, False)
    assert hops("MATCH (a)-[:R*2]->(b) RETURN a") == (2, 2, True)
    assert hops("MATCH (a)-[:R*1..3]->(b) RETURN a") == (1, 3, False)
    assert hops("MATCH (a)-[:R*..4]->(b) RETURN a") == (1, 4, False)


def test_repeat_vs_varlength_tags():
    assert "Repeat" in tags("MATCH (a)-[:R*2]->(b) RETURN b")
    assert "VarLengthExpand" in tags("MATCH (a)-[:R*1..3]->(b) RETURN b")


def test_union_tags_and_columns():
    plan = parse("MATCH (a:X) RETURN a.p AS v UNION MATCH (b:Y) RETURN b.q AS v")
    assert "Union" in plan.tags()
    with pytest.raises(UnsupportedFeature):
        parse("MATCH (a:X) RETURN a.p AS v UNION MATCH (b:Y) RETURN b.q AS other")


def test_top_vs_sort_limit_skip():
    assert "Top" in tags("MATCH (n:X) RETURN n.p AS v ORDER BY v LIMIT 3")
    assert "Sort" in tags("MATCH (n:X) RETURN n.p AS v ORDER BY v")
    assert "Limit" in tags("MATCH (n:X) RETURN n.p AS v LIMIT 3")
    assert "Skip" in tags("MATCH (n:X) RETURN n.p AS v SKIP 2")
    t = tags("MATCH (n:X) RETURN n.p AS v ORDER BY v SKIP 1")
    assert {"Sort", "Skip"} <= t


def test_pattern_predicate_tags():
    t = tags("MATCH (n:X) WHERE (n)-[:R]->() RETURN n")
    assert {"Apply", "Argument", "Filter"} <= t
    assert "Anti" not in t
    t2 = tags("MATCH (n:X) WHERE NOT (n)-[:R]->() RETURN n")
    assert "Anti" in t2
    t3 = tags("MATCH (a:X)-[:R]->(b)-[:R]->(c) WHERE (a)-[:R]->(c) RETURN a")
    assert "Triadic" in t3


def test_mutating_statements_parse():
    assert not parse("CREATE (n:X {p: 1})").read_only
    assert not parse("MERGE (n:X {uid: 'u'})").read_only
    assert not parse("MATCH (n:X) DETACH DELETE n").read_only
    assert not parse("MATCH (n:X) SET n.p = 2").read_only
    assert not parse("MATCH (n:X) REMOVE n.p").read_only
    assert not parse("FOREACH (x IN [1,2] | CREATE (:X {p: x}))").read_only


def test_mutation_tags():
    assert "Create" in tags("CREATE (n:X)")
    assert "Merge" in tags("MERGE (n:X {uid: 'u'})")
    assert "Delete" in tags("MATCH (n:X) DELETE n")
    assert "Set" in tags("MATCH (n:X) SET n.p = 1")
    assert "Set" in tags("MATCH (n:X) REMOVE n.p")  # Remove folds into Set
    t = tags("FOREACH (x IN [1] | CREATE (:X {p: x}))")
    assert {"Foreach", "Create"} <= t


def test_unsupported_features():
    for src in (
        "MATCH (n) RETURN *",
        "MATCH (n) RETURN CASE WHEN n.x THEN 1 ELSE 2 END",
        "MERGE (n:X) ON CREATE SET n.p = 1",
        "MATCH (n) SET n:Label",
        "LOAD CSV FROM 'x' AS row RETURN row",
        "MATCH (a), (b) MATCH p = allShortestPaths((a)-[*..3]->(b)) RETURN p",
        "MATCH (a:X) CREATE (b:Y) RETURN b UNION MATCH (c:Z) RETURN c",
    ):
        with pytest.raises(UnsupportedFeature):
            parse(src)


def test_string_escapes_and_comments():
    stmt = parse_ast("// header\nMATCH (n:X {name: 'it\\'s'}) RETURN n // done")
    node = stmt.queries[0].clauses[0].parts[0].node_pats()[0]
    assert node.props["name"].value == "it's"


def test_count_star_and_distinct_args():
    plan = parse("MATCH (n:X) RETURN count(*) AS c, count(DISTINCT n.p) AS d")
    assert "Aggregate" in plan.tags()


def test_collect_tag():
    plan = parse("MATCH (n:X) RETURN collect(n.p) AS vals")
    assert "Collect" in plan.tags()
    assert "Aggregate" in plan.tags()


def test_leaves_are_scan_seek_argument():
    from graphforge.cypher.plan import ArgumentNode, ScanNode, SeekNode, SingleRowNode

    def leaves(node, acc):
        if not node.children:
            acc.append(node)
        for child in node.children:
            leaves(child, acc)
        return acc

    for src in (
        "MATCH (n:X) RETURN n",
        "MATCH (n:X {p: 1}) RETURN n",
        "MATCH (n:X) OPTIONAL MATCH (n)-[:R]->(m) RETURN m",
        "RETURN 1 AS one",
    ):
        plan = parse(src)
        found = leaves(plan.root, [])
        for leaf in found:
            assert isinstance(leaf, (ScanNode, SeekNode, ArgumentNode, SingleRowNode))


def test_every_plan_tag_is_core():
    from graphforge.cypher.ops import ALL_OPERATORS

    sources = [
        "MATCH (n:X)-[:R]->(m) WHERE n.p = 1 AND NOT (m)-[:R]->() RETURN DISTINCT m.q AS v ORDER BY v DESC SKIP 1 LIMIT 2",
        "UNWIND [1,2] AS x MATCH (n:X) WHERE n.p = x RETURN n, count(*) AS c",
        "MATCH p = shortestPath((a:X)-[:R*..3]->(b:Y)) RETURN length(p)",
    ]
    for src in sources:
        assert parse(src).tags() <= ALL_OPERATORS
