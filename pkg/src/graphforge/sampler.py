"""Perturbation-aware template instantiation and workload assembly.

Instances bind template placeholders to concrete graph values, favoring the
perturbed neighborhood or avoiding it depending on targeting; ground truth
always comes from executing on the clean graph. Large-answer retrieval
instances are gated into boolean verification tasks.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import payload as payload_mod
from .cypher import execute, parse
from .errors import MissingPattern, Unsatisfiable
from .graph import GraphSnapshot
from .perturb import PerturbationLog, touched_neighborhood
from .templates import ManagementBatchTemplate, QueryTemplate, TemplateLibrary
from .values import Timestamp, canonical_dumps, derive_seed, sha256_hex, to_jsonable

GATE_THRESHOLD = 32
DEFAULT_CANDIDATES = 16  # 8 positives + 8 negatives
NEIGHBORHOOD_HOPS = 1

PERTURBED = "PerturbedRegion"
CLEAN = "CleanRegion"

CATEGORIES = ("NoAggRetrieval", "NoAggBoolean", "Agg", "Management")


@dataclass
class QueryInstance:
    id: str
    template_id: str
    binding: dict
    cypher: str
    nl: str
    category: str
    targeting: str
    ground_truth: dict
    bound_entities: list = field(default_factory=list)
    candidates: list = field(default_factory=list)  # boolean tasks: [key, ...]
    steps: list = field(default_factory=list)  # management: [{op, validation, expected}]
    empty_truth: bool = False
    stratum: str | None = None

    def to_jsonable(self):
        obj = asdict(self)
        obj["binding"] = {k: to_jsonable(v) for k, v in sorted(self.binding.items())}
        return obj

    @classmethod
    def from_jsonable(cls, obj):
        return cls(**obj)


def _render_literal(value) -> str:
    if isinstance(value, Timestamp):
        return str(int(value))
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _display(value) -> str:
    if isinstance(value, Timestamp):
        return str(int(value))
    if isinstance(value, str):
        return f"'{value}'"
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def substitute(skeleton: str, binding: dict) -> str:
    text = skeleton
    for name in sorted(binding, key=len, reverse=True):
        text = text.replace(f"${name}", _render_literal(binding[name]))
    return text


class Sampler:
    """Binds templates against one clean graph + perturbation log."""

    def __init__(
        self,
        clean: GraphSnapshot,
        log: PerturbationLog | None = None,
        hops: int = NEIGHBORHOOD_HOPS,
    ):
        self.clean = clean
        self.log = log
        self.neighborhood = (
            touched_neighborhood(log, hops, clean) if log is not None else set()
        )
        self._uid_map = None

    def uid_map(self) -> dict:
        if self._uid_map is None:
            self._uid_map = {}
            for nid in sorted(self.clean.nodes):
                uid = self.clean.nodes[nid].props.get("uid")
                if isinstance(uid, str):
                    self._uid_map[uid] = nid
        return self._uid_map

    # -- binding -----------------------------------------------------------

    def _pool(self, label: str, targeting: str) -> list:
        ids = self.clean.nodes_with_label(label)
        if targeting == PERTURBED:
            pool = ids & self.neighborhood
        elif targeting == CLEAN:
            pool = ids - self.neighborhood
        else:  # unrestricted (management workloads)
            pool = ids
        return sorted(pool)

    def _bind_one(self, desc: dict, targeting: str, rng: random.Random, bound_entities: list):
        kind = desc["kind"]
        if kind == "prop_value":
            label, prop = desc["label"], desc["prop"]
            pool = [nid for nid in self._pool(label, targeting) if prop in self.clean.nodes[nid].props]
            if not pool:
                raise Unsatisfiable(desc.get("template", ""), f"no {label}.{prop} source in {targeting}")
            nid = pool[rng.randrange(len(pool))]
            bound_entities.append(nid)
            return self.clean.nodes[nid].props[prop]
        if kind == "numeric_bound":
            label, prop = desc["label"], desc["prop"]
            pool = [nid for nid in self._pool(label, targeting) if prop in self.clean.nodes[nid].props]
            if not pool:
                raise Unsatisfiable(desc.get("template", ""), f"no {label}.{prop} source in {targeting}")
            values = sorted((self.clean.nodes[nid].props[prop], nid) for nid in pool)
            index = min(len(values) - 1, max(0, round((desc.get("percentile", 50) / 100) * (len(values) - 1))))
            value, nid = values[index]
            bound_entities.append(nid)
            return value
        if kind == "node_uid":
            label = desc["label"]
            pool = self._pool(label, targeting)
            if not pool:
                raise Unsatisfiable(desc.get("template", ""), f"no {label} node in {targeting}")
            nid = pool[rng.randrange(len(pool))]
            bound_entities.append(nid)
            if desc.get("tag") == "int":  # template keys entities by id(n)
                return nid
            uid = self.clean.nodes[nid].props.get("uid")
            return uid if isinstance(uid, str) else nid
        if kind == "fresh_uid":
            return f"new-{desc['label'].lower()}-{rng.randrange(16**8):08x}"
        if kind == "small_int":
            return rng.randint(desc.get("lo", 1), desc.get("hi", 10))
        raise Unsatisfiable(desc.get("template", ""), f"unknown placeholder kind {kind!r}")

    def bind(self, template, targeting: str, rng: random.Random) -> tuple:
        binding: dict = {}
        bound_entities: list = []
        for name in sorted(template.signature):
            desc = dict(template.signature[name])
            desc["template"] = template.id
            binding[name] = self._bind_one(desc, targeting, rng, bound_entities)
        if targeting == PERTURBED and not bound_entities:
            raise Unsatisfiable(template.id, "template binds no entities; cannot target the perturbed region")
        return binding, bound_entities

    # -- analytical instances -----------------------------------------------

    def instantiate(
        self,
        template: QueryTemplate,
        targeting: str,
        seed: int,
        instance_id: str | None = None,
        prefer_nonempty: int = 6,
    ) -> QueryInstance:
        rng = random.Random(derive_seed(seed, template.id, targeting))
        last = None
        for _attempt in range(max(1, prefer_nonempty)):
            binding, bound_entities = self.bind(template, targeting, rng)
            cypher = substitute(template.skeleton, binding)
            truth, empty = self._ground_truth(template, cypher)
            instance = QueryInstance(
                id=instance_id or f"{template.id}@{seed}",
                template_id=template.id,
                binding=binding,
                cypher=cypher,
                nl=verbalize_template(template, binding),
                category="Agg" if template.phase == "Agg" else "NoAggRetrieval",
                targeting=targeting,
                ground_truth=truth,
                bound_entities=sorted(set(bound_entities)),
                empty_truth=empty,
            )
            last = instance
            if not empty:
                return instance
            if not template.signature:
                break  # rebinding cannot change anything
        return last

    def _ground_truth(self, template, cypher: str) -> tuple:
        table = execute(parse(cypher), self.clean)
        if template.arity == "scalar":
            value = table.rows[0][0] if table.rows else None
            return payload_mod.scalar(value), value is None
        if template.arity == "entity-set":
            keys = {str(row[0]) for row in table.rows if row[0] is not None}
            return payload_mod.entity_set(keys), not keys
        rows = [[_cell_wire(c) for c in row] for row in table.rows]
        return payload_mod.rows(rows), not rows

    # -- boolean gating -------------------------------------------------------

    def gate_and_convert(
        self,
        instance: QueryInstance,
        seed: int,
        threshold: int = GATE_THRESHOLD,
        positives: int = DEFAULT_CANDIDATES // 2,
        negatives: int = DEFAULT_CANDIDATES // 2,
    ):
        """< threshold: unchanged; >= threshold: balanced BooleanTask or None."""
        if instance.category != "NoAggRetrieval" or instance.ground_truth["kind"] != payload_mod.ENTITY_SET:
            return instance
        answers = list(instance.ground_truth["value"])
        if len(answers) < threshold:
            return instance
        rng = random.Random(derive_seed(seed, instance.id, "gate"))
        positive_keys = sorted(rng.sample(sorted(answers), positives))
        negative_pool = self._negative_pool(answers)
        if len(negative_pool) < negatives:
            return None  # cannot balance: drop, never mislabel
        negative_keys = sorted(rng.sample(negative_pool, negatives))
        candidates = sorted(positive_keys + negative_keys)
        labels = {key: key in set(positive_keys) for key in candidates}
        return QueryInstance(
            id=instance.id + "/bool",
            template_id=instance.template_id,
            binding=instance.binding,
            cypher=instance.cypher,
            nl=instance.nl + " For each candidate, answer true if it belongs to the result and false otherwise.",
            category="NoAggBoolean",
            targeting=instance.targeting,
            ground_truth=payload_mod.boolean_labels(labels),
            bound_entities=instance.bound_entities,
            candidates=candidates,
        )

    def _negative_pool(self, answers) -> list:
        """Type-compatible non-answers: same primary label as the positives."""
        answer_set = {a.casefold() for a in answers}
        uid_map = self.uid_map()
        labels = set()
        for key in answers[: 32]:
            nid = uid_map.get(key)
            if nid is None and key.isdigit() and int(key) in self.clean.nodes:
                nid = int(key)
            if nid is not None:
                labels.add(self.clean.nodes[nid].primary_label)
        pool = []
        for label in sorted(labels):
            for nid in sorted(self.clean.nodes_with_label(label)):
                uid = self.clean.nodes[nid].props.get("uid")
                key = uid if isinstance(uid, str) else str(nid)
                if key.casefold() not in answer_set:
                    pool.append(key)
        return sorted(set(pool))

    # -- management instances ----------------------------------------------------

    def instantiate_management(
        self, batch: ManagementBatchTemplate, seed: int, instance_id: str | None = None
    ) -> QueryInstance:
        from .graph import open_mutation_session
        from .cypher import execute_mutation

        rng = random.Random(derive_seed(seed, batch.id, "mgmt"))
        binding: dict = {}
        bound_entities: list = []
        used_uids: set = set()
        for name in sorted(batch.signature):
            desc = dict(batch.signature[name])
            desc["template"] = batch.id
            for _ in range(12):
                value = self._bind_one(desc, "Any", rng, bound_entities)
                if desc["kind"] in ("node_uid", "fresh_uid") and value in used_uids:
                    continue
                break
            if desc["kind"] in ("node_uid", "fresh_uid"):
                used_uids.add(value)
            binding[name] = value

        steps = []
        state = self.clean
        expected = []
        for op_skeleton, val_skeleton in batch.steps:
            op_text = substitute(op_skeleton, binding)
            val_text = substitute(val_skeleton, binding)
            session = open_mutation_session(state)
            execute_mutation(parse(op_text), session)
            state = session.commit()
            table = execute(parse(val_text), state)
            value = table.rows[0][0] if table.rows else None
            step_truth = payload_mod.scalar(value if isinstance(value, (int, float)) else None)
            steps.append({"op": op_text, "validation": val_text, "expected": step_truth})
            expected.append(step_truth)

        script = "\n".join(
            f"// step {i + 1}\n{s['op']}\n// validate\n{s['validation']}" for i, s in enumerate(steps)
        )
        return QueryInstance(
            id=instance_id or f"{batch.id}@{seed}",
            template_id=batch.id,
            binding=binding,
            cypher=script,
            nl=batch.nl_pattern or f"Apply {len(steps)} graph updates, answering the check after each.",
            category="Management",
            targeting=CLEAN,
            ground_truth={"kind": "steps", "value": expected},
            bound_entities=sorted(set(bound_entities)),
            steps=steps,
        )


def _cell_wire(cell):
    from .cypher.table import cell_to_jsonable

    return cell_to_jsonable(cell)


def verbalize_template(template, binding: dict) -> str:
    """Deterministic English rendering of a bound template."""
    pattern = getattr(template, "nl_pattern", "")
    if not pattern:
        raise MissingPattern(template.id)
    display = {name: _display(value) for name, value in binding.items()}
    try:
        return pattern.format(**display)
    except (KeyError, IndexError):
        return pattern


def verbalize(instance: QueryInstance, library: TemplateLibrary) -> str:
    template = library.by_id(instance.template_id)
    return verbalize_template(template, instance.binding)


# -- workload assembly ------------------------------------------------------------


@dataclass
class WorkloadConfig:
    noagg: int = 400
    agg: int = 300
    management: int = 40
    perturbed_share: float = 0.5
    gate_threshold: int = GATE_THRESHOLD
    candidates: int = DEFAULT_CANDIDATES
    seed: int = 0
    max_row_answers: int = GATE_THRESHOLD  # row-set instances above this are dropped


def build_workload(
    clean: GraphSnapshot,
    log: PerturbationLog | None,
    library: TemplateLibrary,
    config: WorkloadConfig,
) -> list:
    """Deterministic instance list; boolean tasks emerge from gating."""
    sampler = Sampler(clean, log)
    instances: list = []
    seq = 0

    def next_id(category: str) -> str:
        nonlocal seq
        seq += 1
        return f"q{seq:05d}-{category.lower()}"

    half = config.candidates // 2

    for category, templates, want in (
        ("noagg", [t for t in library.basic + library.noagg if t.samplable], config.noagg),
        ("agg", [t for t in library.agg if t.samplable and t.arity == "scalar"], config.agg),
    ):
        if not templates or want <= 0:
            continue
        produced = 0
        attempt = 0
        max_attempts = want * 12
        while produced < want and attempt < max_attempts:
            template = templates[attempt % len(templates)]
            targeting = (
                PERTURBED
                if (attempt % 100) < config.perturbed_share * 100 and template.signature
                else CLEAN
            )
            attempt += 1
            inst_seed = derive_seed(config.seed, "workload", category, attempt)
            try:
                instance = sampler.instantiate(
                    template, targeting, inst_seed, instance_id=next_id(category)
                )
            except Unsatisfiable:
                if targeting == PERTURBED:
                    try:
                        instance = sampler.instantiate(
                            template, CLEAN, inst_seed, instance_id=next_id(category)
                        )
                    except Unsatisfiable:
                        continue
                else:
                    continue
            if instance.category == "Agg" and instance.ground_truth["value"] is None:
                continue
            if instance.category == "NoAggRetrieval":
                if instance.ground_truth["kind"] == payload_mod.ROWS:
                    if len(instance.ground_truth["value"]) >= config.max_row_answers:
                        continue
                else:
                    instance = sampler.gate_and_convert(
                        instance,
                        derive_seed(config.seed, "gate", attempt),
                        threshold=config.gate_threshold,
                        positives=half,
                        negatives=half,
                    )
                    if instance is None:
                        continue
            instances.append(instance)
            produced += 1

    for i in range(config.management):
        if not library.management:
            break
        batch = library.management[i % len(library.management)]
        instances.append(
            sampler.instantiate_management(
                batch,
                derive_seed(config.seed, "workload", "mgmt", i),
                instance_id=next_id("management"),
            )
        )
    return instances


# -- bundle emission ---------------------------------------------------------------

_CATEGORY_DIRS = {
    "NoAggRetrieval": "noagg",
    "Agg": "agg",
    "NoAggBoolean": "boolean",
    "Management": "management",
}


def emit_workload(instances, directory) -> dict:
    """Write queries/<category>/instances.jsonl files plus a digest manifest."""
    directory = Path(directory)
    buckets: dict = {}
    for instance in instances:
        buckets.setdefault(_CATEGORY_DIRS[instance.category], []).append(instance)
    files = {}
    for bucket in sorted(buckets):
        rows = buckets[bucket]
        rows.sort(key=lambda i: i.id)
        rel = f"queries/{bucket}/instances.jsonl"
        path = directory / rel
        os.makedirs(path.parent, exist_ok=True)
        text = "".join(canonical_dumps(i.to_jsonable()) + "\n" for i in rows)
        path.write_text(text, encoding="utf-8")
        files[rel] = {"count": len(rows), "sha256": sha256_hex(text.encode("utf-8"))}
    manifest = {
        "query_count": len(instances),
        "files": files,
        "digest": sha256_hex(canonical_dumps(files).encode("utf-8")),
    }
    os.makedirs(directory, exist_ok=True)
    (directory / "manifest.json").write_text(canonical_dumps(manifest) + "\n", encoding="utf-8")
    return manifest


def load_workload(directory) -> list:
    directory = Path(directory)
    instances = []
    for bucket in sorted(_CATEGORY_DIRS.values()):
        path = directory / "queries" / bucket / "instances.jsonl"
        if not path.exists():
            continue
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                instances.append(QueryInstance.from_jsonable(json.loads(line)))
    return instances
