import random

import pytest

from graphforge.graph import GraphBuilder
from graphforge.perturb import NoiseProfile, perturb
from graphforge.synth import spec_from_preset, synthesize


@pytest.fixture
def toy_graph():
    """Person A (age 30), Person B (age 40), City X; A-KNOWS->B; both LIVES_IN X."""
    b = GraphBuilder()
    a = b.add_node(["Person"], {"name": "A", "age": 30, "uid": "a"})
    bb = b.add_node(["Person"], {"name": "B", "age": 40, "uid": "b"})
    x = b.add_node(["City"], {"name": "X", "uid": "x"})
    b.add_edge(a, bb, "KNOWS")
    b.add_edge(a, x, "LIVES_IN")
    b.add_edge(bb, x, "LIVES_IN")
    return b.seal()


@pytest.fixture
def salary_graph():
    b = GraphBuilder()
    for i, salary in enumerate((10, 20, 30)):
        b.add_node(["Employee"], {"salary": salary, "created_year": 2001 + i, "uid": f"e{i}"})
    return b.seal()


@pytest.fixture
def cycle5_graph():
    b = GraphBuilder()
    ids = [b.add_node(["N"], {"uid": f"n{i}"}) for i in range(5)]
    for i in range(5):
        b.add_edge(ids[i], ids[(i + 1) % 5], "R")
    return b.seal()


def random_graph(seed: int, n_nodes: int = 40, density: float = 1.8):
    """Small random multi-label graph for differential testing."""
    rng = random.Random(seed)
    b = GraphBuilder()
    labels = ["Alpha", "Beta", "Gamma"]
    rels = ["LINK", "FLOW", "TIE"]
    cities = ["north", "south", "east", "west"]
    ids = []
    for i in range(n_nodes):
        label = labels[rng.randrange(len(labels))]
        props = {"uid": f"u{i}", "rank": rng.randint(0, 9)}
        if rng.random() < 0.8:
            props["zone"] = cities[rng.randrange(len(cities))]
        if rng.random() < 0.5:
            props["score"] = round(rng.uniform(0, 5), 3)
        ids.append(b.add_node([label], props))
    n_edges = int(n_nodes * density)
    for _ in range(n_edges):
        src = ids[rng.randrange(len(ids))]
        dst = ids[rng.randrange(len(ids))]
        props = {}
        if rng.random() < 0.4:
            props["weight"] = rng.randint(1, 100)
        b.add_edge(src, dst, rels[rng.randrange(len(rels))], props)
    return b.seal()


@pytest.fixture
def fin_pair():
    clean = synthesize(spec_from_preset("fin-mini", 300, seed=11))
    noisy, log = perturb(clean, NoiseProfile(seed=4))
    return clean, noisy, log


@pytest.fixture
def fin_pair_light():
    """Low injection ratios: the untouched region stays well populated."""
    clean = synthesize(spec_from_preset("fin-mini", 300, seed=11))
    profile = NoiseProfile(
        edge_add_ratio=0.004,
        edge_remove_ratio=0.001,
        relation_swap_ratio=0.002,
        node_mislabel_ratio=0.002,
        text_typo_ratio=0.005,
        numeric_deviation_ratio=0.005,
        seed=4,
    )
    noisy, log = perturb(clean, profile)
    return clean, noisy, log
