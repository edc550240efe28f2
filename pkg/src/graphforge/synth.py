"""Deterministic desk-scale graph synthesis from declarative specs.

Presets mirror the schema character of the three structured benchmark
domains at reduced vocabulary; node counts are exact, per-relation edge
totals are hit exactly by trimming geometric degree draws, so the
edge/node ratio tracks the preset target closely at any scale.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import InvalidSpec
from .graph import GraphBuilder, GraphSnapshot
from .values import Timestamp, derive_seed

PRESET_NAMES = ("fin-mini", "bi-mini", "prime-mini")


@dataclass
class RelationPlan:
    rel_type: str
    src_label: str
    dst_label: str
    mean_out_degree: float
    multiplicity: bool = False
    props: list = field(default_factory=list)
    homophily: dict | None = None  # {"property": ..., "strength": q}


@dataclass
class PropertyPlan:
    name: str
    dist: dict


@dataclass
class SynthSpec:
    node_counts: dict  # label -> exact count
    relations: list  # of RelationPlan
    node_props: dict  # label -> [PropertyPlan]
    seed: int
    name: str = "custom"
    ratio_target: float | None = None

    def validate(self):
        if not isinstance(self.seed, int):
            raise InvalidSpec("seed must be an integer")
        for label, count in self.node_counts.items():
            if not isinstance(count, int) or count < 0:
                raise InvalidSpec(f"bad node count for {label!r}")
        labels = set(self.node_counts)
        for rel in self.relations:
            if rel.src_label not in labels or rel.dst_label not in labels:
                raise InvalidSpec(f"relation {rel.rel_type} references unknown label")
            if rel.mean_out_degree < 0 or not math.isfinite(rel.mean_out_degree):
                raise InvalidSpec(f"bad mean degree for {rel.rel_type}")
        for label, plans in self.node_props.items():
            if label not in labels:
                raise InvalidSpec(f"property plan for unknown label {label!r}")
            for plan in plans:
                _check_dist(plan.dist)
        for rel in self.relations:
            for plan in rel.props:
                _check_dist(plan.dist)


_DIST_KINDS = {"uid", "uniform_int", "uniform_float", "lognormal", "categorical", "timestamp", "words"}


def _check_dist(dist: dict):
    kind = dist.get("kind")
    if kind not in _DIST_KINDS:
        raise InvalidSpec(f"unknown distribution kind {kind!r}")
    if kind == "uniform_int" and dist["lo"] > dist["hi"]:
        raise InvalidSpec("uniform_int lo > hi")
    if kind == "uniform_float" and dist["lo"] > dist["hi"]:
        raise InvalidSpec("uniform_float lo > hi")
    if kind == "lognormal" and dist.get("sigma", 1.0) <= 0:
        raise InvalidSpec("lognormal sigma must be positive")
    if kind == "categorical" and not dist.get("values"):
        raise InvalidSpec("categorical needs values")
    if kind == "timestamp" and dist["start"] > dist["end"]:
        raise InvalidSpec("timestamp window start > end")
    if kind == "words" and not dist.get("pool"):
        raise InvalidSpec("words needs a pool")


def _sample(dist: dict, rng: random.Random, uid: str | None = None):
    kind = dist["kind"]
    if kind == "uid":
        return uid
    if kind == "uniform_int":
        return rng.randint(dist["lo"], dist["hi"])
    if kind == "uniform_float":
        return round(rng.uniform(dist["lo"], dist["hi"]), dist.get("digits", 4))
    if kind == "lognormal":
        value = rng.lognormvariate(dist.get("mu", 0.0), dist.get("sigma", 1.0)) * dist.get("scale", 1.0)
        return round(value, dist.get("digits", 4))
    if kind == "categorical":
        values = dist["values"]
        weights = dist.get("weights")
        if weights:
            return rng.choices(values, weights=weights, k=1)[0]
        return values[rng.randrange(len(values))]
    if kind == "timestamp":
        return Timestamp(rng.randint(dist["start"], dist["end"]))
    if kind == "words":
        pool = dist["pool"]
        n = dist.get("count", 2)
        return " ".join(pool[rng.randrange(len(pool))] for _ in range(n))
    raise InvalidSpec(f"unknown distribution kind {kind!r}")


def synthesize(spec: SynthSpec) -> GraphSnapshot:
    """Pure function of the spec (seed included): same spec, same bytes."""
    spec.validate()
    rng = random.Random(derive_seed(spec.seed, "synth", spec.name))
    builder = GraphBuilder()
    ids_by_label: dict = {}
    uid_seq = 0
    for label in sorted(spec.node_counts):
        count = spec.node_counts[label]
        plans = spec.node_props.get(label, [])
        ids = []
        for _ in range(count):
            uid = f"{label.lower()}{uid_seq}"
            uid_seq += 1
            props = {plan.name: _sample(plan.dist, rng, uid) for plan in plans}
            ids.append(builder.add_node([label], props))
        ids_by_label[label] = ids

    for rel in spec.relations:
        sources = ids_by_label[rel.src_label]
        targets = ids_by_label[rel.dst_label]
        if not sources or not targets:
            continue
        degrees = _degree_plan(len(sources), rel.mean_out_degree, rng)
        homophily_pools = None
        if rel.homophily:
            prop = rel.homophily["property"]
            homophily_pools = {}
            for nid in targets:
                value = builder._nodes[nid].props.get(prop)
                homophily_pools.setdefault(value, []).append(nid)
        for src, degree in zip(sources, degrees):
            seen: set = set()
            for _ in range(degree):
                dst = _pick_target(builder, rng, src, targets, rel, homophily_pools, seen)
                if dst is None:
                    continue
                if not rel.multiplicity:
                    seen.add(dst)
                props = {plan.name: _sample(plan.dist, rng) for plan in rel.props}
                builder.add_edge(src, dst, rel.rel_type, props)
    return builder.seal()


def _pick_target(builder, rng, src, targets, rel, homophily_pools, seen, attempts: int = 24):
    for _ in range(attempts):
        if homophily_pools is not None and rng.random() < rel.homophily.get("strength", 0.5):
            value = builder._nodes[src].props.get(rel.homophily["property"])
            pool = homophily_pools.get(value) or targets
        else:
            pool = targets
        dst = pool[rng.randrange(len(pool))]
        if dst == src:
            continue
        if not rel.multiplicity and dst in seen:
            continue
        return dst
    return None


def _degree_plan(n_sources: int, mean: float, rng: random.Random) -> list:
    """Truncated geometric degrees trimmed/padded to hit the exact total."""
    target_total = round(n_sources * mean)
    if n_sources == 0 or target_total <= 0:
        return [0] * n_sources
    p = 1.0 / (mean + 1.0)
    cap = max(1, int(mean * 6) + 1)
    degrees = []
    for _ in range(n_sources):
        # geometric: failures before first success
        d = min(int(math.log(max(rng.random(), 1e-12)) / math.log(1.0 - p)), cap) if p < 1.0 else 0
        degrees.append(d)
    total = sum(degrees)
    i = 0
    while total < target_total:
        degrees[i % n_sources] += 1
        total += 1
        i += 1
    i = 0
    while total > target_total:
        if degrees[i % n_sources] > 0:
            degrees[i % n_sources] -= 1
            total -= 1
        i += 1
    return degrees


# -- presets -----------------------------------------------------------------


def load_preset(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise InvalidSpec(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    text = resources.files("graphforge").joinpath(f"presets/{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def spec_from_preset(preset, total_nodes: int, seed: int) -> SynthSpec:
    """Scale a preset's label weights to an exact total node count."""
    if isinstance(preset, str):
        preset = load_preset(preset)
    if total_nodes < 0:
        raise InvalidSpec("total_nodes must be non-negative")
    weights = preset["labels"]
    counts = _largest_remainder(weights, total_nodes)
    relations = [
        RelationPlan(
            rel_type=r["type"],
            src_label=r["src"],
            dst_label=r["dst"],
            mean_out_degree=r["mean_out_degree"],
            multiplicity=r.get("multiplicity", False),
            props=[PropertyPlan(p["name"], p["dist"]) for p in r.get("props", [])],
            homophily=r.get("homophily"),
        )
        for r in preset["relations"]
    ]
    node_props = {
        label: [PropertyPlan(p["name"], p["dist"]) for p in plans]
        for label, plans in preset["properties"].items()
    }
    return SynthSpec(
        node_counts=counts,
        relations=relations,
        node_props=node_props,
        seed=seed,
        name=preset["name"],
        ratio_target=preset.get("ratio_target"),
    )


def spec_from_file(path, seed: int | None = None) -> SynthSpec:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if "labels" in obj:  # preset-shaped file
        return spec_from_preset(obj, obj.get("default_nodes", 1000), seed if seed is not None else obj.get("seed", 0))
    relations = [
        RelationPlan(
            rel_type=r["type"],
            src_label=r["src"],
            dst_label=r["dst"],
            mean_out_degree=r["mean_out_degree"],
            multiplicity=r.get("multiplicity", False),
            props=[PropertyPlan(p["name"], p["dist"]) for p in r.get("props", [])],
            homophily=r.get("homophily"),
        )
        for r in obj["relations"]
    ]
    node_props = {
        label: [PropertyPlan(p["name"], p["dist"]) for p in plans]
        for label, plans in obj.get("properties", {}).items()
    }
    return SynthSpec(
        node_counts=obj["node_counts"],
        relations=relations,
        node_props=node_props,
        seed=seed if seed is not None else obj.get("seed", 0),
        name=obj.get("name", "custom"),
        ratio_target=obj.get("ratio_target"),
    )


def _largest_remainder(weights: dict, total: int) -> dict:
    labels = sorted(weights)
    weight_sum = sum(weights[lb] for lb in labels)
    if weight_sum <= 0:
        raise InvalidSpec("label weights must sum to a positive value")
    raw = {lb: total * weights[lb] / weight_sum for lb in labels}
    counts = {lb: int(raw[lb]) for lb in labels}
    remainder = total - sum(counts.values())
    by_frac = sorted(labels, key=lambda lb: (-(raw[lb] - counts[lb]), lb))
    for lb in by_frac[:remainder]:
        counts[lb] += 1
    return counts
