import math
import random

import pytest

from graphforge.errors import DigestMismatch, InvalidProfile
from graphforge.graph import GraphBuilder
from graphforge.perturb import (
    NoiseProfile,
    PerturbationLog,
    apply_log,
    levenshtein,
    perturb,
    touched_neighborhood,
)

from conftest import random_graph


def zero_profile(seed=1):
    return NoiseProfile(
        edge_add_ratio=0,
        edge_remove_ratio=0,
        relation_swap_ratio=0,
        node_mislabel_ratio=0,
        text_typo_ratio=0,
        numeric_deviation_ratio=0,
        seed=seed,
    )


def reference_levenshtein(a, b):
    # independent DP oracle for the typo-distance property
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        table[i][0] = i
    for j in range(n + 1):
        table[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return table[m][n]


def test_profile_validation():
    with pytest.raises(InvalidProfile):
        NoiseProfile(edge_add_ratio=1.5).validate()
    with pytest.raises(InvalidProfile):
        NoiseProfile(numeric_deviation_sigma=0).validate()
    with pytest.raises(InvalidProfile):
        NoiseProfile(typo_ops_per_hit=0).validate()
    NoiseProfile().validate()


def test_profile_json_lossless():
    p = NoiseProfile(edge_add_ratio=0.03, seed=17)
    assert NoiseProfile.from_json(p.to_json()) == p
    with pytest.raises(InvalidProfile):
        NoiseProfile.from_json('{"edge_add_ratio": 0.1, "bogus": 1}')


def test_zero_profile_identity(fin_pair):
    clean, _, _ = fin_pair
    noisy, log = perturb(clean, zero_profile())
    assert noisy.digest() == clean.digest()
    assert log.records == []


def test_node_set_preserved(fin_pair):
    clean, noisy, _ = fin_pair
    assert set(noisy.nodes) == set(clean.nodes)


def test_edge_delta_binomial_window():
    # add=0.045 on a 10,000-edge graph; 3-sigma binomial window around the
    # expected count, computed here independently
    b = GraphBuilder()
    ids = [b.add_node(["N"], {"uid": f"n{i}", "w": i}) for i in range(400)]
    rng = random.Random(0)
    for _ in range(10000):
        b.add_edge(ids[rng.randrange(400)], ids[rng.randrange(400)], "R")
    clean = b.seal()
    assert clean.edge_count() == 10000
    profile = NoiseProfile(
        edge_add_ratio=0.045,
        edge_remove_ratio=0,
        relation_swap_ratio=0,
        node_mislabel_ratio=0,
        text_typo_ratio=0,
        numeric_deviation_ratio=0,
        seed=3,
    )
    noisy, _ = perturb(clean, profile)
    expected = 10000 * 1.045
    sigma = math.sqrt(10000 * 0.045 * 0.955)
    assert abs(noisy.edge_count() - expected) <= 3 * sigma


def test_replay_byte_equal(fin_pair):
    clean, noisy, log = fin_pair
    replay = apply_log(clean, log)
    assert replay.nodes_jsonl() == noisy.nodes_jsonl()
    assert replay.edges_jsonl() == noisy.edges_jsonl()


def test_replay_wrong_base(fin_pair):
    clean, _, log = fin_pair
    from graphforge.graph import open_mutation_session

    s = open_mutation_session(clean)
    s.create_node(["Person"], {"uid": "intruder"})
    other = s.commit()
    with pytest.raises(DigestMismatch):
        apply_log(other, log)


def test_empty_log_is_identity(fin_pair):
    clean, _, _ = fin_pair
    log = PerturbationLog(zero_profile(), clean.digest(), [])
    assert apply_log(clean, log).digest() == clean.digest()


def test_log_serialization_roundtrip(fin_pair):
    clean, noisy, log = fin_pair
    back = PerturbationLog.from_jsonl(log.to_jsonl())
    assert apply_log(clean, back).digest() == noisy.digest()


def test_seed_sensitivity(fin_pair):
    clean, _, _ = fin_pair
    n1, l1 = perturb(clean, NoiseProfile(seed=1))
    n2, l2 = perturb(clean, NoiseProfile(seed=2))
    n1b, l1b = perturb(clean, NoiseProfile(seed=1))
    assert n1.digest() == n1b.digest()
    assert [r.to_jsonable() for r in l1.records] == [r.to_jsonable() for r in l1b.records]
    assert n1.digest() != n2.digest()


def test_edge_add_schema_plausible(fin_pair):
    clean, _, log = fin_pair
    triples = set()
    for e in clean.edges.values():
        triples.add(
            (clean.nodes[e.src].primary_label, e.rel_type, clean.nodes[e.dst].primary_label)
        )
    adds = [r for r in log.records if r.kind == "EdgeAdd"]
    assert adds, "expected some EdgeAdd records at the default ratio"
    for record in adds:
        p = record.payload
        triple = (
            clean.nodes[p["src"]].primary_label,
            p["rel_type"],
            clean.nodes[p["dst"]].primary_label,
        )
        assert triple in triples


def test_typo_edit_distance(fin_pair):
    clean, _, _ = fin_pair
    profile = NoiseProfile(
        edge_add_ratio=0,
        edge_remove_ratio=0,
        relation_swap_ratio=0,
        node_mislabel_ratio=0,
        text_typo_ratio=0.2,
        typo_ops_per_hit=2,
        numeric_deviation_ratio=0,
        seed=8,
    )
    _, log = perturb(clean, profile)
    typos = [r for r in log.records if r.kind == "TextTypo"]
    assert typos
    for record in typos:
        before, after = record.payload["before"], record.payload["after"]
        assert reference_levenshtein(before, after) == 2
        assert levenshtein(before, after) == 2


def test_numeric_drift_positive_factor(fin_pair):
    clean, _, _ = fin_pair
    profile = NoiseProfile(
        edge_add_ratio=0,
        edge_remove_ratio=0,
        relation_swap_ratio=0,
        node_mislabel_ratio=0,
        text_typo_ratio=0,
        numeric_deviation_ratio=0.3,
        numeric_deviation_sigma=0.2,
        seed=8,
    )
    _, log = perturb(clean, profile)
    drifts = [r for r in log.records if r.kind == "NumericDrift"]
    assert drifts
    for record in drifts:
        assert record.payload["factor"] > 0
        before = record.payload["before"]
        after = record.payload["after"]
        assert type(after) is type(before)


def test_mislabel_never_empties(fin_pair):
    clean, noisy, log = fin_pair
    for record in log.records:
        if record.kind == "NodeMislabel":
            assert record.payload["after"]
            assert record.payload["after"] != record.payload["before"]
    for node in noisy.nodes.values():
        assert node.labels


def test_touched_neighborhood_hops0(fin_pair):
    clean, _, log = fin_pair
    assert touched_neighborhood(log, 0, clean) == log.touched_entities()


def test_touched_neighborhood_star():
    b = GraphBuilder()
    center = b.add_node(["Hub"], {"name": "hub"})
    leaves = [b.add_node(["Leaf"], {"name": f"l{i}"}) for i in range(6)]
    for leaf in leaves:
        b.add_edge(center, leaf, "SPOKE")
    g = b.seal()
    log = PerturbationLog(zero_profile(), g.digest(), [])
    from graphforge.perturb import PerturbationRecord

    log.records.append(
        PerturbationRecord("TextTypo", {"target": "node", "id": center, "prop": "name", "before": "hub", "after": "hubb"})
    )
    assert touched_neighborhood(log, 1, g) == set(g.nodes)


def test_touched_neighborhood_monotone():
    for seed in range(3):
        g = random_graph(seed, n_nodes=50)
        noisy, log = perturb(g, NoiseProfile(seed=seed))
        prev = None
        for hops in range(4):
            cur = touched_neighborhood(log, hops, g)
            if prev is not None:
                assert prev <= cur
            prev = cur


def test_touched_index_covers_records(fin_pair):
    _, _, log = fin_pair
    index = log.touched_index()
    touched = set()
    for record in log.records:
        touched.update(record.touched_nodes())
    assert set(index) == touched
