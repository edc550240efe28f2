"""Seeded, fully logged graph perturbation at three levels.

Topological (edge add/remove), schema (relation swap, node mislabel), and
attribute (text typos, numeric drift) changes are planned as independent
Bernoulli draws per element, recorded, and then applied through the same
replay path that ``apply_log`` uses — so a log always reconstructs the
noisy graph byte for byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import kernels
from .errors import DigestMismatch, InvalidProfile
from .graph import GraphSnapshot, open_mutation_session
from .values import Timestamp, canonical_dumps, derive_seed, from_jsonable, to_jsonable

_TYPO_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class NoiseProfile:
    edge_add_ratio: float = 0.046
    edge_remove_ratio: float = 0.001
    relation_swap_ratio: float = 0.005
    node_mislabel_ratio: float = 0.002
    text_typo_ratio: float = 0.01
    typo_ops_per_hit: int = 1
    numeric_deviation_ratio: float = 0.01
    numeric_deviation_sigma: float = 0.1
    seed: int = 0

    def validate(self):
        ratios = {
            "edge_add_ratio": self.edge_add_ratio,
            "edge_remove_ratio": self.edge_remove_ratio,
            "relation_swap_ratio": self.relation_swap_ratio,
            "node_mislabel_ratio": self.node_mislabel_ratio,
            "text_typo_ratio": self.text_typo_ratio,
            "numeric_deviation_ratio": self.numeric_deviation_ratio,
        }
        for name, value in ratios.items():
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise InvalidProfile(f"{name} must lie in [0, 1], got {value!r}")
        if self.numeric_deviation_sigma <= 0:
            raise InvalidProfile("numeric_deviation_sigma must be positive")
        if not isinstance(self.typo_ops_per_hit, int) or self.typo_ops_per_hit < 1:
            raise InvalidProfile("typo_ops_per_hit must be a positive integer")
        if not isinstance(self.seed, int):
            raise InvalidProfile("seed must be an integer")
        return self

    def to_json(self) -> str:
        return canonical_dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "NoiseProfile":
        obj = json.loads(text)
        extra = set(obj) - set(cls.__dataclass_fields__)
        if extra:
            raise InvalidProfile(f"unknown profile fields: {sorted(extra)}")
        return cls(**obj).validate()

    @classmethod
    def from_file(cls, path) -> "NoiseProfile":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def is_zero(self) -> bool:
        return (
            self.edge_add_ratio == 0
            and self.edge_remove_ratio == 0
            and self.relation_swap_ratio == 0
            and self.node_mislabel_ratio == 0
            and self.text_typo_ratio == 0
            and self.numeric_deviation_ratio == 0
        )


@dataclass(frozen=True)
class PerturbationRecord:
    kind: str  # EdgeAdd | EdgeRemove | RelSwap | NodeMislabel | TextTypo | NumericDrift
    payload: dict

    def to_jsonable(self):
        return {"kind": self.kind, "payload": _payload_to_jsonable(self.payload)}

    @classmethod
    def from_jsonable(cls, obj):
        return cls(obj["kind"], _payload_from_jsonable(obj["payload"]))

    def touched_nodes(self):
        p = self.payload
        if self.kind in ("EdgeAdd", "EdgeRemove", "RelSwap"):
            return (p["src"], p["dst"])
        if self.kind == "NodeMislabel":
            return (p["node_id"],)
        if p["target"] == "node":
            return (p["id"],)
        return (p["src"], p["dst"])


def _payload_to_jsonable(payload):
    out = {}
    for key, value in payload.items():
        if key == "props":
            out[key] = {k: to_jsonable(v) for k, v in sorted(value.items())}
        elif key in ("before", "after") and not isinstance(value, (str, int, float, list, type(None))):
            out[key] = to_jsonable(value)
        elif isinstance(value, Timestamp):
            out[key] = to_jsonable(value)
        else:
            out[key] = value
    return out


def _payload_from_jsonable(payload):
    out = {}
    for key, value in payload.items():
        if key == "props":
            out[key] = {k: from_jsonable(v) for k, v in value.items()}
        elif isinstance(value, dict):
            out[key] = from_jsonable(value)
        else:
            out[key] = value
    return out


@dataclass
class PerturbationLog:
    profile: NoiseProfile
    base_digest: str
    records: list = field(default_factory=list)

    def touched_entities(self) -> set:
        out = set()
        for record in self.records:
            out.update(record.touched_nodes())
        return out

    def touched_index(self) -> dict:
        index: dict = {}
        for i, record in enumerate(self.records):
            for nid in record.touched_nodes():
                index.setdefault(nid, []).append(i)
        return index

    def counts(self) -> dict:
        out: dict = {}
        for record in self.records:
            out[record.kind] = out.get(record.kind, 0) + 1
        return out

    def to_jsonl(self) -> str:
        lines = [canonical_dumps({"profile": json.loads(self.profile.to_json()), "base_digest": self.base_digest})]
        lines.extend(canonical_dumps(r.to_jsonable()) for r in self.records)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "PerturbationLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(lines[0])
        profile = NoiseProfile(**header["profile"]).validate()
        records = [PerturbationRecord.from_jsonable(json.loads(ln)) for ln in lines[1:]]
        return cls(profile, header["base_digest"], records)


# -- planning ----------------------------------------------------------------


def perturb(clean: GraphSnapshot, profile: NoiseProfile) -> tuple:
    """Plan and apply noise; returns (noisy snapshot, replayable log)."""
    profile.validate()
    rng = random.Random(derive_seed(clean.digest(), profile.to_json()))
    records: list = []
    removed: set = set()
    next_edge_id = (max(clean.edges) + 1) if clean.edges else 0

    sorted_edges = sorted(clean.edges)
    sorted_nodes = sorted(clean.nodes)

    # topological: removals
    for eid in sorted_edges:
        if rng.random() < profile.edge_remove_ratio:
            e = clean.edges[eid]
            removed.add(eid)
            records.append(
                PerturbationRecord(
                    "EdgeRemove",
                    {"edge_id": eid, "src": e.src, "dst": e.dst, "rel_type": e.rel_type, "props": dict(e.props)},
                )
            )

    # schema: relation swaps on surviving edges
    pair_types = _types_by_endpoint_pair(clean)
    all_types = set(clean.schema.rel_types)
    for eid in sorted_edges:
        if eid in removed or rng.random() >= profile.relation_swap_ratio:
            continue
        e = clean.edges[eid]
        pair = (clean.nodes[e.src].primary_label, clean.nodes[e.dst].primary_label)
        candidates = sorted(pair_types.get(pair, set()) - {e.rel_type}) or sorted(all_types - {e.rel_type})
        if not candidates:
            continue
        new_type = candidates[rng.randrange(len(candidates))]
        records.append(
            PerturbationRecord(
                "RelSwap",
                {"edge_id": eid, "src": e.src, "dst": e.dst, "before": e.rel_type, "after": new_type},
            )
        )

    # topological: additions, one Bernoulli draw per existing edge; the
    # trigger edge donates its schema triple so added noise stays plausible
    for eid in sorted_edges:
        if rng.random() >= profile.edge_add_ratio:
            continue
        e = clean.edges[eid]
        src_label = clean.nodes[e.src].primary_label
        dst_label = clean.nodes[e.dst].primary_label
        src_pool = sorted(clean.nodes_with_label(src_label))
        dst_pool = sorted(clean.nodes_with_label(dst_label))
        src = src_pool[rng.randrange(len(src_pool))]
        dst = dst_pool[rng.randrange(len(dst_pool))]
        records.append(
            PerturbationRecord(
                "EdgeAdd",
                {
                    "edge_id": next_edge_id,
                    "src": src,
                    "dst": dst,
                    "rel_type": e.rel_type,
                    "props": dict(e.props),
                },
            )
        )
        next_edge_id += 1

    # schema: node mislabeling
    label_pool = set(clean.schema.node_labels)
    for nid in sorted_nodes:
        if rng.random() >= profile.node_mislabel_ratio:
            continue
        node = clean.nodes[nid]
        candidates = sorted(label_pool - set(node.labels))
        if not candidates:
            continue
        new_label = candidates[rng.randrange(len(candidates))]
        position = rng.randrange(len(node.labels))
        after = tuple(new_label if i == position else lb for i, lb in enumerate(node.labels))
        records.append(
            PerturbationRecord(
                "NodeMislabel", {"node_id": nid, "before": list(node.labels), "after": list(after)}
            )
        )

    # attribute: text typos
    def typo_targets():
        for nid in sorted_nodes:
            for name in sorted(clean.nodes[nid].props):
                value = clean.nodes[nid].props[name]
                if isinstance(value, str) and value:
                    yield ("node", nid, None, None, name, value)
        for eid in sorted_edges:
            if eid in removed:
                continue
            e = clean.edges[eid]
            for name in sorted(e.props):
                value = e.props[name]
                if isinstance(value, str) and value:
                    yield ("edge", eid, e.src, e.dst, name, value)

    for target, tid, src, dst, name, value in typo_targets():
        if rng.random() >= profile.text_typo_ratio:
            continue
        mutated = _apply_typos(value, profile.typo_ops_per_hit, rng)
        if mutated is None:
            continue
        payload = {"target": target, "id": tid, "prop": name, "before": value, "after": mutated}
        if target == "edge":
            payload["src"] = src
            payload["dst"] = dst
        records.append(PerturbationRecord("TextTypo", payload))

    # attribute: numeric drift (ints and floats; timestamps left alone)
    def numeric_targets():
        for nid in sorted_nodes:
            for name in sorted(clean.nodes[nid].props):
                value = clean.nodes[nid].props[name]
                if _is_driftable(value):
                    yield ("node", nid, None, None, name, value)
        for eid in sorted_edges:
            if eid in removed:
                continue
            e = clean.edges[eid]
            for name in sorted(e.props):
                value = e.props[name]
                if _is_driftable(value):
                    yield ("edge", eid, e.src, e.dst, name, value)

    for target, tid, src, dst, name, value in numeric_targets():
        if rng.random() >= profile.numeric_deviation_ratio:
            continue
        factor = rng.lognormvariate(0.0, profile.numeric_deviation_sigma)
        drifted = round(value * factor) if isinstance(value, int) else value * factor
        payload = {
            "target": target,
            "id": tid,
            "prop": name,
            "before": value,
            "after": drifted,
            "factor": factor,
        }
        if target == "edge":
            payload["src"] = src
            payload["dst"] = dst
        records.append(PerturbationRecord("NumericDrift", payload))

    log = PerturbationLog(profile, clean.digest(), records)
    noisy = _apply_records(clean, log.records)
    return noisy, log


def _is_driftable(value) -> bool:
    if isinstance(value, (bool, Timestamp)):
        return False
    return isinstance(value, (int, float))


def _types_by_endpoint_pair(snapshot: GraphSnapshot) -> dict:
    out: dict = {}
    for rel_type, pairs in snapshot.schema.rel_endpoints.items():
        for pair in pairs:
            out.setdefault(pair, set()).add(rel_type)
    return out


def _apply_typos(text: str, ops: int, rng: random.Random, retries: int = 20):
    """Mutate with exactly ``ops`` single-char edits (verified by distance)."""
    for _ in range(retries):
        current = text
        for _ in range(ops):
            if not current:
                break
            kind = rng.choice(("substitute", "transpose", "delete"))
            i = rng.randrange(len(current))
            if kind == "transpose" and len(current) >= 2:
                j = i if i + 1 < len(current) else i - 1
                chars = list(current)
                chars[j], chars[j + 1] = chars[j + 1], chars[j]
                current = "".join(chars)
            elif kind == "delete":
                current = current[:i] + current[i + 1 :]
            else:
                replacement = rng.choice(_TYPO_ALPHABET)
                while replacement == current[i]:
                    replacement = rng.choice(_TYPO_ALPHABET)
                current = current[:i] + replacement + current[i + 1 :]
        if current != text and levenshtein(text, current) == ops:
            return current
    return None


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


# -- replay -------------------------------------------------------------------


def _apply_records(base: GraphSnapshot, records) -> GraphSnapshot:
    session = open_mutation_session(base)
    for record in records:
        p = record.payload
        if record.kind == "EdgeAdd":
            session.create_edge(p["src"], p["dst"], p["rel_type"], p["props"], edge_id=p["edge_id"])
        elif record.kind == "EdgeRemove":
            session.delete_edge(p["edge_id"])
        elif record.kind == "RelSwap":
            session.set_edge_type(p["edge_id"], p["after"])
        elif record.kind == "NodeMislabel":
            session.set_node_labels(p["node_id"], p["after"])
        elif record.kind in ("TextTypo", "NumericDrift"):
            if p["target"] == "node":
                session.set_node_prop(p["id"], p["prop"], p["after"])
            else:
                session.set_edge_prop(p["id"], p["prop"], p["after"])
        else:
            raise InvalidProfile(f"unknown record kind {record.kind}")
    return session.commit()


def apply_log(clean: GraphSnapshot, log: PerturbationLog) -> GraphSnapshot:
    """Replay a log onto its original base; byte-equal to the perturb output."""
    if clean.digest() != log.base_digest:
        raise DigestMismatch(
            f"log was recorded against {log.base_digest[:12]}..., got {clean.digest()[:12]}..."
        )
    return _apply_records(clean, log.records)


def touched_neighborhood(log: PerturbationLog, hops: int, snapshot: GraphSnapshot) -> set:
    """Union of undirected h-hop balls around every touched entity."""
    if hops < 0:
        raise ValueError("hops must be non-negative")
    seeds = {nid for nid in log.touched_entities() if nid in snapshot.nodes}
    if not seeds or not snapshot.nodes:
        return set(seeds)
    csr = snapshot.csr()
    indptr, targets, _eids, _codes = csr.und
    seed_idx = [csr.index_of[nid] for nid in sorted(seeds)]
    mask = kernels.khop_mask(indptr, targets, seed_idx, hops, len(csr.node_ids))
    return {int(csr.node_ids[i]) for i, hit in enumerate(mask) if hit}
