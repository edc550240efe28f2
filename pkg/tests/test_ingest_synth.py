import json

import pytest

from graphforge.errors import InvalidSpec, ParseError
from graphforge.graph import GraphBuilder
from graphforge.io import export_graph, load_graph, load_graph_dir
from graphforge.synth import PRESET_NAMES, SynthSpec, spec_from_preset, synthesize


def test_load_counts(tmp_path):
    nodes = tmp_path / "nodes.jsonl"
    edges = tmp_path / "edges.jsonl"
    nodes.write_text(
        '{"id":0,"labels":["A"],"props":{}}\n'
        '{"id":1,"labels":["A"],"props":{"x":1}}\n'
        '{"id":2,"labels":["B"],"props":{"t":{"$ts":5}}}\n'
    )
    edges.write_text(
        '{"id":0,"src":0,"dst":1,"type":"R","props":{}}\n'
        '{"id":1,"src":1,"dst":2,"type":"R","props":{"w":2.5}}\n'
    )
    g = load_graph(nodes, edges)
    assert g.node_count() == 3 and g.edge_count() == 2
    from graphforge.values import Timestamp

    assert isinstance(g.nodes[2].props["t"], Timestamp)


def test_parse_error_line_number(tmp_path):
    nodes = tmp_path / "nodes.jsonl"
    lines = ['{"id":%d,"labels":["A"],"props":{}}' % i for i in range(6)]
    lines.append("{oops")
    nodes.write_text("\n".join(lines) + "\n")
    (tmp_path / "edges.jsonl").write_text("")
    with pytest.raises(ParseError) as err:
        load_graph(nodes, tmp_path / "edges.jsonl")
    assert err.value.line_no == 7


def test_round_trip_byte_equal(tmp_path):
    b = GraphBuilder()
    a = b.add_node(["P"], {"name": "weird 'quote' café Straße", "n": 3, "f": 2.25})
    c = b.add_node(["Q"], {"tags": ["x", "y"]})
    b.add_edge(a, c, "R", {"w": 1})
    g = b.seal()
    export_graph(g, tmp_path / "one")
    g2 = load_graph_dir(tmp_path / "one")
    export_graph(g2, tmp_path / "two")
    assert (tmp_path / "one/nodes.jsonl").read_bytes() == (tmp_path / "two/nodes.jsonl").read_bytes()
    assert (tmp_path / "one/edges.jsonl").read_bytes() == (tmp_path / "two/edges.jsonl").read_bytes()
    assert g2.digest() == g.digest()


def test_export_manifest(tmp_path):
    b = GraphBuilder()
    for _ in range(3):
        b.add_node(["A"])
    g = b.seal()
    manifest = export_graph(g, tmp_path)
    assert manifest["node_count"] == 3
    stored = json.loads((tmp_path / "manifest.json").read_text())
    assert stored["digest"] == g.digest()


def test_digest_changes_iff_graph_changes():
    b = GraphBuilder()
    nid = b.add_node(["A"], {"x": 1})
    g1 = b.seal()
    from graphforge.graph import open_mutation_session

    s = open_mutation_session(g1)
    s.set_node_prop(nid, "x", 2)
    g2 = s.commit()
    assert g1.digest() != g2.digest()
    s2 = open_mutation_session(g2)
    s2.set_node_prop(nid, "x", 1)
    g3 = s2.commit()
    assert g3.digest() == g1.digest()


def test_synthesize_deterministic():
    spec = spec_from_preset("fin-mini", 300, seed=5)
    assert synthesize(spec).digest() == synthesize(spec).digest()
    other = synthesize(spec_from_preset("fin-mini", 300, seed=6))
    assert other.digest() != synthesize(spec).digest()


def test_synthesize_zero_nodes():
    spec = spec_from_preset("fin-mini", 0, seed=1)
    g = synthesize(spec)
    assert g.node_count() == 0 and g.edge_count() == 0


def test_node_counts_exact():
    spec = spec_from_preset("bi-mini", 777, seed=2)
    g = synthesize(spec)
    assert g.node_count() == 777


@pytest.mark.parametrize("preset", PRESET_NAMES)
def test_ratio_fidelity(preset):
    # shipped presets track their ratio targets within +-10%
    nodes = 600 if preset == "prime-mini" else 1000
    spec = spec_from_preset(preset, nodes, seed=7)
    g = synthesize(spec)
    ratio = g.edge_count() / g.node_count()
    assert abs(ratio / spec.ratio_target - 1) < 0.10


def test_fin_mini_matches_source_scale_ratio():
    # source-domain scale: 57,818 edges over 10,865 nodes -> ratio 5.3215
    spec = spec_from_preset("fin-mini", 1000, seed=3)
    g = synthesize(spec)
    source_ratio = 57818 / 10865
    ratio = g.edge_count() / g.node_count()
    assert abs(ratio / source_ratio - 1) < 0.10


def test_invalid_spec():
    with pytest.raises(InvalidSpec):
        SynthSpec(node_counts={"A": -1}, relations=[], node_props={}, seed=0).validate()
    with pytest.raises(InvalidSpec):
        spec_from_preset("nope", 10, 0)


def test_generated_props_valid():
    from graphforge.values import validate_value

    g = synthesize(spec_from_preset("prime-mini", 200, seed=9))
    for node in g.nodes.values():
        for value in node.props.values():
            validate_value(value)
    for edge in g.edges.values():
        for value in edge.props.values():
            validate_value(value)
