"""Query template library: staged construction from a schema summary.

Basic skeletons (lookup, one-hop) are augmented into a no-aggregation set
covering the traversal/join/control operators, then extended with the five
aggregation functions. Cartesian/collect templates additionally yield
positive-inverse boolean pairs, and management batches pair each mutation
with an immediate read-back validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import EmptySchema
from .graph import SchemaSummary
from .cypher import parse
from .values import canonical_dumps

AGG_FUNCS = ("count", "sum", "min", "max", "avg")
DEFAULT_VARLEN = (1, 3)
STANDARD_K = 5


@dataclass
class QueryTemplate:
    id: str
    phase: str  # Basic | NoAgg | Agg
    skeleton: str
    tags: frozenset
    signature: dict  # placeholder -> descriptor
    arity: str  # entity-set | row-set | scalar
    nl_pattern: str
    samplable: bool = True
    match_fragment: str = ""  # skeleton minus RETURN, for aggregation extension
    agg_var: str = ""
    agg_prop: str = ""
    pair_predicate: dict | None = None  # {"lhs","op","rhs","shared"} join condition
    parent_id: str | None = None

    def to_jsonable(self):
        obj = asdict(self)
        obj["tags"] = sorted(self.tags)
        return obj


@dataclass
class BooleanPairTemplate:
    id: str
    positive: QueryTemplate
    inverse: QueryTemplate
    domain_skeleton: str
    key_columns: tuple
    signature: dict

    def to_jsonable(self):
        return {
            "id": self.id,
            "positive": self.positive.to_jsonable(),
            "inverse": self.inverse.to_jsonable(),
            "domain_skeleton": self.domain_skeleton,
            "key_columns": list(self.key_columns),
            "signature": self.signature,
        }


@dataclass
class ManagementBatchTemplate:
    id: str
    kind: str  # Uniform | Mixed
    steps: list  # of (operation skeleton, validation skeleton)
    signature: dict
    nl_pattern: str = ""

    @property
    def k(self) -> int:
        return len(self.steps)

    def to_jsonable(self):
        return {
            "id": self.id,
            "kind": self.kind,
            "steps": [list(s) for s in self.steps],
            "signature": self.signature,
            "nl_pattern": self.nl_pattern,
        }


@dataclass
class TemplateLibrary:
    basic: list = field(default_factory=list)
    noagg: list = field(default_factory=list)
    agg: list = field(default_factory=list)
    boolean_pairs: list = field(default_factory=list)
    management: list = field(default_factory=list)

    def analytical(self):
        return self.basic + self.noagg + self.agg

    def all_tags(self) -> set:
        tags: set = set()
        for t in self.analytical():
            tags |= t.tags
        for pair in self.boolean_pairs:
            tags |= pair.positive.tags | pair.inverse.tags
        for batch in self.management:
            for op, val in batch.steps:
                tags |= parse(_probe(op, batch.signature)).tags()
                tags |= parse(_probe(val, batch.signature)).tags()
        return tags

    def by_id(self, template_id: str):
        for t in self.analytical():
            if t.id == template_id:
                return t
        for pair in self.boolean_pairs:
            if pair.id == template_id:
                return pair
        for batch in self.management:
            if batch.id == template_id:
                return batch
        raise KeyError(template_id)

    def to_jsonl(self) -> str:
        lines = []
        for t in self.analytical():
            lines.append(canonical_dumps({"record": "template", **t.to_jsonable()}))
        for pair in self.boolean_pairs:
            lines.append(canonical_dumps({"record": "boolean_pair", **pair.to_jsonable()}))
        for batch in self.management:
            lines.append(canonical_dumps({"record": "management", **batch.to_jsonable()}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "TemplateLibrary":
        lib = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.pop("record")
            if kind == "template":
                t = _template_from_jsonable(obj)
                {"Basic": lib.basic, "NoAgg": lib.noagg, "Agg": lib.agg}[t.phase].append(t)
            elif kind == "boolean_pair":
                lib.boolean_pairs.append(
                    BooleanPairTemplate(
                        id=obj["id"],
                        positive=_template_from_jsonable(obj["positive"]),
                        inverse=_template_from_jsonable(obj["inverse"]),
                        domain_skeleton=obj["domain_skeleton"],
                        key_columns=tuple(obj["key_columns"]),
                        signature=obj["signature"],
                    )
                )
            else:
                lib.management.append(
                    ManagementBatchTemplate(
                        id=obj["id"],
                        kind=obj["kind"],
                        steps=[tuple(s) for s in obj["steps"]],
                        signature=obj["signature"],
                        nl_pattern=obj.get("nl_pattern", ""),
                    )
                )
        return lib


def _template_from_jsonable(obj) -> QueryTemplate:
    obj = dict(obj)
    obj["tags"] = frozenset(obj["tags"])
    return QueryTemplate(**obj)


# -- schema introspection ------------------------------------------------------


def _label_props(schema: SchemaSummary, label: str, tag_filter) -> list:
    """Deterministic choice of props for a label, by name, matching tags."""
    out = []
    for name in sorted(schema.props_for(label)):
        tags = schema.props_for(label)[name]
        if name == "uid":
            continue
        if any(t in tag_filter for t in tags):
            out.append(name)
    return out


def _has_uid(schema: SchemaSummary, label: str) -> bool:
    return "uid" in schema.props_for(label)


def _key_expr(schema: SchemaSummary, var: str, label: str) -> str:
    return f"{var}.uid" if _has_uid(schema, label) else f"id({var})"


def _relations(schema: SchemaSummary) -> list:
    """(rel_type, src_label, dst_label) by dominant endpoint pair."""
    out = []
    for rel_type in schema.rel_types:
        pairs = schema.rel_endpoints.get(rel_type, {})
        if not pairs:
            continue
        best = max(sorted(pairs), key=lambda p: pairs[p])
        out.append((rel_type, best[0], best[1]))
    return sorted(out)


def _value_tag(schema: SchemaSummary, label: str, prop: str) -> str:
    tags = schema.props_for(label).get(prop, {})
    return max(sorted(tags), key=lambda t: tags[t]) if tags else "text"


def _probe(skeleton: str, signature: dict) -> str:
    """Fill placeholders with type-correct dummies, for parse/tag checks."""
    text = skeleton
    for name in sorted(signature, key=len, reverse=True):
        desc = signature[name]
        kind = desc["kind"]
        if kind in ("prop_value", "node_uid", "fresh_uid"):
            value = "0" if desc.get("tag") in ("int", "float", "timestamp") else "'probe'"
        elif kind == "numeric_bound":
            value = "0"
        else:  # small_int
            value = "1"
        text = text.replace(f"${name}", value)
    return text


def _mk(
    template_id,
    phase,
    skeleton,
    signature,
    arity,
    nl_pattern,
    samplable=True,
    match_fragment="",
    agg_var="",
    agg_prop="",
    pair_predicate=None,
    parent_id=None,
) -> QueryTemplate:
    tags = parse(_probe(skeleton, signature)).tags()
    return QueryTemplate(
        id=template_id,
        phase=phase,
        skeleton=skeleton,
        tags=frozenset(tags),
        signature=signature,
        arity=arity,
        nl_pattern=nl_pattern,
        samplable=samplable,
        match_fragment=match_fragment,
        agg_var=agg_var,
        agg_prop=agg_prop,
        pair_predicate=pair_predicate,
        parent_id=parent_id,
    )


# -- phase 1: basic ------------------------------------------------------------


def build_basic_templates(schema: SchemaSummary) -> list:
    if schema.is_empty():
        raise EmptySchema("schema has no node labels")
    out = []
    for label in schema.node_labels:
        key = _key_expr(schema, "n", label)
        scalar_props = _label_props(schema, label, ("text", "int", "float", "timestamp"))
        if scalar_props:
            prop = scalar_props[0]
            out.append(
                _mk(
                    f"basic/lookup_eq/{label}.{prop}",
                    "Basic",
                    f"MATCH (n:{label}) WHERE n.{prop} = $VALUE RETURN {key} AS answer",
                    {"VALUE": {"kind": "prop_value", "label": label, "prop": prop, "tag": _value_tag(schema, label, prop)}},
                    "entity-set",
                    f"Which {label} nodes have {prop} equal to {{VALUE}}?",
                    match_fragment=f"MATCH (n:{label}) WHERE n.{prop} = $VALUE",
                    agg_var="n",
                )
            )
        out.append(
            _mk(
                f"basic/scan/{label}",
                "Basic",
                f"MATCH (n:{label}) RETURN {key} AS answer",
                {},
                "entity-set",
                f"List every {label} node.",
                match_fragment=f"MATCH (n:{label})",
                agg_var="n",
            )
        )
        numeric_props = _label_props(schema, label, ("int", "float"))
        if numeric_props:
            prop = numeric_props[0]
            out.append(
                _mk(
                    f"basic/lookup_range/{label}.{prop}",
                    "Basic",
                    f"MATCH (n:{label}) WHERE n.{prop} > $BOUND RETURN {key} AS answer",
                    {"BOUND": {"kind": "numeric_bound", "label": label, "prop": prop, "percentile": 75}},
                    "entity-set",
                    f"Which {label} nodes have {prop} greater than {{BOUND}}?",
                    match_fragment=f"MATCH (n:{label}) WHERE n.{prop} > $BOUND",
                    agg_var="n",
                    agg_prop=prop,
                )
            )
    for rel_type, src, dst in _relations(schema):
        mkey = _key_expr(schema, "m", dst)
        out.append(
            _mk(
                f"basic/hop/{rel_type}",
                "Basic",
                f"MATCH (n:{src})-[:{rel_type}]->(m) RETURN {mkey} AS answer",
                {},
                "entity-set",
                f"Which nodes does any {src} point to through {rel_type}?",
                match_fragment=f"MATCH (n:{src})-[:{rel_type}]->(m)",
                agg_var="m",
            )
        )
        src_props = _label_props(schema, src, ("text", "int", "float", "timestamp"))
        if src_props:
            prop = src_props[0]
            out.append(
                _mk(
                    f"basic/hop_filtered/{rel_type}",
                    "Basic",
                    f"MATCH (n:{src})-[:{rel_type}]->(m) WHERE n.{prop} = $VALUE RETURN {mkey} AS answer",
                    {"VALUE": {"kind": "prop_value", "label": src, "prop": prop, "tag": _value_tag(schema, src, prop)}},
                    "entity-set",
                    f"Which nodes are reached through {rel_type} from {src} nodes whose {prop} equals {{VALUE}}?",
                    match_fragment=f"MATCH (n:{src})-[:{rel_type}]->(m) WHERE n.{prop} = $VALUE",
                    agg_var="m",
                )
            )
    return out


# -- phase 2: complexity augmentation -------------------------------------------


def augment_noagg(basic: list, schema: SchemaSummary, varlen=DEFAULT_VARLEN) -> list:
    out = []
    relations = _relations(schema)
    self_rels = [(r, s, d) for r, s, d in relations if s == d]
    lo, hi = varlen

    for rel_type, src, dst in relations[:6]:
        mkey = _key_expr(schema, "m", dst)
        numeric = _label_props(schema, src, ("int", "float"))
        bound_clause = f" WHERE n.{numeric[0]} > $BOUND" if numeric else ""
        signature = (
            {"BOUND": {"kind": "numeric_bound", "label": src, "prop": numeric[0], "percentile": 25}}
            if numeric
            else {}
        )
        out.append(
            _mk(
                f"noagg/varlen/{rel_type}",
                "NoAgg",
                f"MATCH p = (n:{src})-[:{rel_type}*{lo}..{hi}]->(m){bound_clause} RETURN DISTINCT {mkey} AS answer",
                signature,
                "entity-set",
                f"Which nodes can be reached from a {src} over one to three {rel_type} steps"
                + (f" when the source {numeric[0]} exceeds {{BOUND}}" if numeric else "")
                + "?",
                match_fragment=f"MATCH p = (n:{src})-[:{rel_type}*{lo}..{hi}]->(m){bound_clause}",
                agg_var="m",
            )
        )
        out.append(
            _mk(
                f"noagg/distinct/{rel_type}",
                "NoAgg",
                f"MATCH (n:{src})-[:{rel_type}]->(m) RETURN DISTINCT {mkey} AS answer",
                {},
                "entity-set",
                f"Which distinct nodes receive a {rel_type} edge from any {src}?",
                match_fragment=f"MATCH (n:{src})-[:{rel_type}]->(m)",
                agg_var="m",
            )
        )

    for rel_type, src, dst in relations[:4]:
        nkey = _key_expr(schema, "n", src)
        out.append(
            _mk(
                f"noagg/exists/{rel_type}",
                "NoAgg",
                f"MATCH (n:{src}) WHERE (n)-[:{rel_type}]->() RETURN {nkey} AS answer",
                {},
                "entity-set",
                f"Which {src} nodes have at least one outgoing {rel_type} edge?",
                match_fragment=f"MATCH (n:{src}) WHERE (n)-[:{rel_type}]->()",
                agg_var="n",
            )
        )
        out.append(
            _mk(
                f"noagg/anti/{rel_type}",
                "NoAgg",
                f"MATCH (n:{src}) WHERE NOT (n)-[:{rel_type}]->() RETURN {nkey} AS answer",
                {},
                "entity-set",
                f"Which {src} nodes have no outgoing {rel_type} edge?",
                match_fragment=f"MATCH (n:{src}) WHERE NOT (n)-[:{rel_type}]->()",
                agg_var="n",
            )
        )

    if len(schema.node_labels) >= 2:
        la, lb = schema.node_labels[0], schema.node_labels[1]
        pa = (_label_props(schema, la, ("text", "int", "float", "timestamp")) or ["uid"])[0]
        pb = (_label_props(schema, lb, ("text", "int", "float", "timestamp")) or ["uid"])[0]
        akey = _key_expr(schema, "a", la)
        bkey = _key_expr(schema, "b", lb)
        out.append(
            _mk(
                f"noagg/union/{la}+{lb}",
                "NoAgg",
                f"MATCH (a:{la}) WHERE a.{pa} = $VALUE_A RETURN {akey} AS answer"
                f" UNION MATCH (b:{lb}) WHERE b.{pb} = $VALUE_B RETURN {bkey} AS answer",
                {
                    "VALUE_A": {"kind": "prop_value", "label": la, "prop": pa, "tag": _value_tag(schema, la, pa)},
                    "VALUE_B": {"kind": "prop_value", "label": lb, "prop": pb, "tag": _value_tag(schema, lb, pb)},
                },
                "entity-set",
                f"Which {la} nodes have {pa} equal to {{VALUE_A}}, together with {lb} nodes whose {pb} equals {{VALUE_B}}?",
            )
        )

    for label in schema.node_labels[:2]:
        key = _key_expr(schema, "n", label)
        scalar_props = _label_props(schema, label, ("text", "int", "float", "timestamp"))
        if scalar_props:
            prop = scalar_props[0]
            out.append(
                _mk(
                    f"noagg/unwind/{label}.{prop}",
                    "NoAgg",
                    f"UNWIND [$VALUE_A, $VALUE_B] AS v MATCH (n:{label}) WHERE n.{prop} = v"
                    f" RETURN DISTINCT {key} AS answer",
                    {
                        "VALUE_A": {"kind": "prop_value", "label": label, "prop": prop, "tag": _value_tag(schema, label, prop)},
                        "VALUE_B": {"kind": "prop_value", "label": label, "prop": prop, "tag": _value_tag(schema, label, prop)},
                    },
                    "entity-set",
                    f"Which {label} nodes have {prop} equal to {{VALUE_A}} or {{VALUE_B}}?",
                    match_fragment=f"UNWIND [$VALUE_A, $VALUE_B] AS v MATCH (n:{label}) WHERE n.{prop} = v",
                    agg_var="n",
                )
            )

    for rel_type, src, dst in self_rels[:2]:
        akey = _key_expr(schema, "a", src)
        out.append(
            _mk(
                f"noagg/triadic/{rel_type}",
                "NoAgg",
                f"MATCH (a:{src})-[:{rel_type}]->(b)-[:{rel_type}]->(c)"
                f" WHERE a <> c AND (a)-[:{rel_type}]->(c) RETURN DISTINCT {akey} AS answer",
                {},
                "entity-set",
                f"Which {src} nodes have a two-step {rel_type} contact that is also a direct {rel_type} contact?",
            )
        )
        out.append(
            _mk(
                f"noagg/repeat/{rel_type}",
                "NoAgg",
                f"MATCH (n:{src})-[:{rel_type}*2]->(m) RETURN DISTINCT {_key_expr(schema, 'm', dst)} AS answer",
                {},
                "entity-set",
                f"Which nodes sit exactly two {rel_type} steps away from any {src}?",
                match_fragment=f"MATCH (n:{src})-[:{rel_type}*2]->(m)",
                agg_var="m",
            )
        )
        key_by_uid = _has_uid(schema, src) and _has_uid(schema, dst)
        endpoint = "{v}.uid = $UID_{s}" if key_by_uid else "id({v}) = $UID_{s}"
        out.append(
            _mk(
                f"noagg/shortest/{rel_type}",
                "NoAgg",
                f"MATCH p = shortestPath((a:{src})-[:{rel_type}*..4]->(b:{dst}))"
                f" WHERE {endpoint.format(v='a', s='A')} AND {endpoint.format(v='b', s='B')}"
                f" RETURN length(p) AS answer",
                {
                    "UID_A": {"kind": "node_uid", "label": src, "tag": "text" if key_by_uid else "int"},
                    "UID_B": {"kind": "node_uid", "label": dst, "tag": "text" if key_by_uid else "int"},
                },
                "row-set",
                f"How long is the shortest {rel_type} path from {src} {{UID_A}} to {dst} {{UID_B}}?",
            )
        )

    join_pairs = _co_target_pairs(relations)
    for (r1, la, shared), (r2, lb, _) in join_pairs[:2]:
        akey = _key_expr(schema, "a", la)
        bkey = _key_expr(schema, "b", lb)
        out.append(
            _mk(
                f"noagg/hashjoin/{r1}+{r2}",
                "NoAgg",
                f"MATCH (a:{la})-[:{r1}]->(m:{shared}) MATCH (b:{lb})-[:{r2}]->(m)"
                f" WHERE a <> b RETURN DISTINCT {akey} AS answer, {bkey} AS partner",
                {},
                "row-set",
                f"Which pairs of a {la} and a {lb} point at one shared {shared} through {r1} and {r2}?",
            )
        )

    # cartesian value-join pairs on a shared property (positive polarity);
    # the match domain is pinned to non-null carriers so that = and <>
    # partition it exactly
    pair_label, pair_prop, extra_prop = _pair_choice(schema)
    if pair_label is not None:
        akey = _key_expr(schema, "a", pair_label)
        bkey = _key_expr(schema, "b", pair_label)
        shared = f"a <> b AND a.{pair_prop} IS NOT NULL AND b.{pair_prop} IS NOT NULL"
        out.append(
            _mk(
                f"noagg/cartesian_pair/{pair_label}.{pair_prop}",
                "NoAgg",
                f"MATCH (a:{pair_label}), (b:{pair_label})"
                f" WHERE a.{pair_prop} = b.{pair_prop} AND {shared}"
                f" RETURN {akey} AS left, {bkey} AS right",
                {},
                "row-set",
                f"Which ordered pairs of distinct {pair_label} nodes share the same {pair_prop}?",
                pair_predicate={
                    "lhs": f"a.{pair_prop}",
                    "op": "=",
                    "rhs": f"b.{pair_prop}",
                    "shared": shared,
                    "label": pair_label,
                },
            )
        )

    for rel_type, src, dst in relations[:2]:
        nkey = _key_expr(schema, "n", src)
        mkey = _key_expr(schema, "m", dst)
        out.append(
            _mk(
                f"noagg/optional/{rel_type}",
                "NoAgg",
                f"MATCH (n:{src}) OPTIONAL MATCH (n)-[:{rel_type}]->(m)"
                f" RETURN {nkey} AS answer, {mkey} AS partner",
                {},
                "row-set",
                f"For every {src}, which node does it reach through {rel_type}, if any?",
            )
        )

    for label in schema.node_labels[:2]:
        key = _key_expr(schema, "n", label)
        numeric = _label_props(schema, label, ("int", "float"))
        if numeric:
            prop = numeric[0]
            out.append(
                _mk(
                    f"noagg/sort/{label}.{prop}",
                    "NoAgg",
                    f"MATCH (n:{label}) WHERE n.{prop} > $BOUND"
                    f" RETURN {key} AS answer, n.{prop} AS v ORDER BY v DESC",
                    {"BOUND": {"kind": "numeric_bound", "label": label, "prop": prop, "percentile": 75}},
                    "row-set",
                    f"List {label} nodes with {prop} above {{BOUND}}, highest first.",
                )
            )
            out.append(
                _mk(
                    f"noagg/top/{label}.{prop}",
                    "NoAgg",
                    f"MATCH (n:{label}) RETURN {key} AS answer, n.{prop} AS v ORDER BY v DESC LIMIT $N",
                    {"N": {"kind": "small_int", "lo": 3, "hi": 10}},
                    "row-set",
                    f"Which {{N}} {label} nodes have the highest {prop}?",
                )
            )
        out.append(
            _mk(
                f"noagg/limit/{label}",
                "NoAgg",
                f"MATCH (n:{label}) RETURN {key} AS answer LIMIT $N",
                {"N": {"kind": "small_int", "lo": 3, "hi": 10}},
                "row-set",
                f"Name {{N}} {label} nodes.",
            )
        )
        out.append(
            _mk(
                f"noagg/skip/{label}",
                "NoAgg",
                f"MATCH (n:{label}) RETURN {key} AS answer ORDER BY answer SKIP $N",
                {"N": {"kind": "small_int", "lo": 1, "hi": 5}},
                "row-set",
                f"List {label} nodes in order, leaving out the first {{N}}.",
            )
        )
    return out


def _co_target_pairs(relations) -> list:
    by_dst: dict = {}
    for rel_type, src, dst in relations:
        by_dst.setdefault(dst, []).append((rel_type, src, dst))
    out = []
    for dst in sorted(by_dst):
        rels = by_dst[dst]
        if len(rels) >= 2:
            out.append((rels[0], rels[1]))
    return out


def _pair_choice(schema: SchemaSummary):
    """Label + property for the value-join pair; prefers low-cardinality text."""
    for label in schema.node_labels:
        props = schema.props_for(label)
        for name in ("locationIP", "city", "chromosome", "sector", "name"):
            if name in props and "text" in props[name]:
                others = [p for p in sorted(props) if p not in (name, "uid")]
                return label, name, (others[0] if others else name)
    for label in schema.node_labels:
        texts = _label_props(schema, label, ("text",))
        if texts:
            others = [p for p in texts if p != texts[0]]
            return label, texts[0], (others[0] if others else texts[0])
    return None, None, None


# -- phase 3: aggregation extension ----------------------------------------------


def extend_agg(noagg_and_basic: list, schema: SchemaSummary) -> list:
    out = []
    for template in noagg_and_basic:
        if not template.match_fragment or not template.agg_var:
            continue
        var = template.agg_var
        label_numeric = template.agg_prop
        if not label_numeric:
            # find a numeric prop on the variable's likely label; fall back to
            # skipping the template when none exists
            label_numeric = _numeric_prop_for_var(schema, template, var)
        if not label_numeric:
            continue
        for fn in AGG_FUNCS:
            inner = var if fn == "count" else f"{var}.{label_numeric}"
            skeleton = f"{template.match_fragment} RETURN {fn}({inner}) AS value"
            out.append(
                _mk(
                    f"agg/{fn}/{template.id.split('/', 1)[1]}",
                    "Agg",
                    skeleton,
                    dict(template.signature),
                    "scalar",
                    _agg_nl(fn, template, label_numeric),
                    match_fragment=template.match_fragment,
                    parent_id=template.id,
                )
            )
    # grouped neighbor-count family, plus its single-group samplable form
    for rel_type, src, dst in _relations(schema)[:3]:
        if not _has_uid(schema, src):
            continue
        out.append(
            _mk(
                f"agg/degree_grouped/{rel_type}",
                "Agg",
                f"MATCH (n:{src})-[:{rel_type}]->(m) RETURN n.uid AS key, count(m) AS degree",
                {},
                "row-set",
                f"For each {src}, how many {rel_type} edges does it have?",
                samplable=False,
            )
        )
        out.append(
            _mk(
                f"agg/degree/{rel_type}",
                "Agg",
                f"MATCH (n:{src})-[:{rel_type}]->(m) WHERE n.uid = $UID RETURN count(m) AS degree",
                {"UID": {"kind": "node_uid", "label": src, "tag": "text"}},
                "scalar",
                f"How many {rel_type} edges does {src} {{UID}} have?",
            )
        )
    # collect-flavored cartesian pair (kept for pair derivation and coverage)
    pair_label, pair_prop, extra_prop = _pair_choice(schema)
    if pair_label is not None:
        akey = _key_expr(schema, "a", pair_label)
        shared = f"a <> b AND a.{pair_prop} IS NOT NULL AND b.{pair_prop} IS NOT NULL"
        out.append(
            _mk(
                f"agg/collect_pair/{pair_label}.{pair_prop}",
                "Agg",
                f"MATCH (a:{pair_label}), (b:{pair_label})"
                f" WHERE a.{pair_prop} = b.{pair_prop} AND {shared}"
                f" RETURN {akey} AS left, collect(b.{extra_prop})[0..1] AS bs",
                {},
                "row-set",
                f"For {pair_label} nodes sharing a {pair_prop} with someone else, collect two partner {extra_prop} values.",
                samplable=False,
                pair_predicate={
                    "lhs": f"a.{pair_prop}",
                    "op": "=",
                    "rhs": f"b.{pair_prop}",
                    "shared": shared,
                    "label": pair_label,
                },
            )
        )
    return out


def _numeric_prop_for_var(schema: SchemaSummary, template: QueryTemplate, var: str) -> str:
    # the variable's label is recoverable from the id for per-label families
    for label in schema.node_labels:
        if f"/{label}" in template.id or f"(n:{label})" in template.skeleton or f"(m:{label})" in template.skeleton:
            numeric = _label_props(schema, label, ("int", "float"))
            if numeric and f"({var}:{label})" in template.skeleton:
                return numeric[0]
    # destination variables: use the relation's dst label
    for rel_type, src, dst in _relations(schema):
        if rel_type in template.id and var == "m":
            numeric = _label_props(schema, dst, ("int", "float"))
            if numeric:
                return numeric[0]
    return ""


def _agg_nl(fn: str, template: QueryTemplate, prop: str) -> str:
    base = template.nl_pattern.rstrip("?.")
    if fn == "count":
        return f"How many results match this: {base}?"
    word = {"sum": "total", "min": "smallest", "max": "largest", "avg": "average"}[fn]
    return f"What is the {word} {prop} among the matches of: {base}?"


# -- phase 4: boolean pairs --------------------------------------------------------


def derive_boolean_pairs(templates: list) -> list:
    out = []
    for template in templates:
        if template.pair_predicate is None:
            continue
        if not ({"Collect", "CartesianProduct"} & template.tags):
            continue
        pred = template.pair_predicate
        positive_clause = f"{pred['lhs']} {pred['op']} {pred['rhs']}"
        inverse_op = "<>" if pred["op"] == "=" else "="
        inverse_clause = f"{pred['lhs']} {inverse_op} {pred['rhs']}"
        inverse_skeleton = template.skeleton.replace(positive_clause, inverse_clause)
        inverse = QueryTemplate(
            id=template.id + "/inverse",
            phase=template.phase,
            skeleton=inverse_skeleton,
            tags=template.tags,
            signature=dict(template.signature),
            arity=template.arity,
            nl_pattern=template.nl_pattern.replace("share the same", "differ in").replace("sharing a", "differing in"),
            samplable=template.samplable,
            pair_predicate=None,
        )
        domain = template.skeleton.replace(f"{positive_clause} AND ", "")
        out.append(
            BooleanPairTemplate(
                id=template.id + "/pair",
                positive=template,
                inverse=inverse,
                domain_skeleton=domain,
                key_columns=("left", "right") if " AS right" in template.skeleton else ("left",),
                signature=dict(template.signature),
            )
        )
    return out


# -- management batches -------------------------------------------------------------


def build_management_batches(schema: SchemaSummary, k: int = STANDARD_K, kinds=("Uniform", "Mixed")) -> list:
    if schema.is_empty():
        raise EmptySchema("schema has no node labels")
    if k < 1:
        raise ValueError("k must be >= 1")
    label = _mgmt_label(schema)
    background = next((lb for lb in schema.node_labels if lb != label), label)
    relations = _relations(schema)
    self_rel = next((r for r, s, d in relations if s == d == label), None)
    rel_type = self_rel or (relations[0][0] if relations else None)
    rel_src, rel_dst = label, label
    if rel_type and not self_rel:
        rel_src, rel_dst = relations[0][1], relations[0][2]

    text_prop = (_label_props(schema, label, ("text",)) or ["note"])[0]
    src_text = _label_props(schema, rel_src, ("text",))
    out = []

    if "Uniform" in kinds:
        if rel_type:
            steps = []
            signature: dict = {}
            for i in range(k):
                signature[f"NEW_A_{i}"] = {"kind": "fresh_uid", "label": rel_src, "tag": "text"}
                signature[f"NEW_B_{i}"] = {"kind": "fresh_uid", "label": rel_dst, "tag": "text"}
                src_props = f"uid: $NEW_A_{i}"
                if src_text:
                    signature[f"CITY_{i}"] = {
                        "kind": "prop_value",
                        "label": rel_src,
                        "prop": src_text[0],
                        "tag": "text",
                    }
                    src_props += f", {src_text[0]}: $CITY_{i}"
                op = (
                    f"CREATE (n:{rel_src} {{{src_props}}})"
                    f"-[:{rel_type}]->(g:{rel_dst} {{uid: $NEW_B_{i}}})"
                )
                val = f"MATCH (g:{rel_dst})<-[:{rel_type}]-(n:{rel_src}) RETURN count(n) AS cnt"
                steps.append((op, val))
            out.append(
                ManagementBatchTemplate(
                    id=f"mgmt/uniform_create/{rel_type}",
                    kind="Uniform",
                    steps=steps,
                    signature=signature,
                    nl_pattern=f"Insert {k} new {rel_type} relationships, verifying the running count after each.",
                )
            )
        steps = []
        signature = {}
        for i in range(k):
            signature[f"UID_{i}"] = {"kind": "node_uid", "label": label, "tag": "text"}
            steps.append(
                (
                    f"MATCH (n:{label} {{uid: $UID_{i}}}) DETACH DELETE n",
                    f"MATCH (n:{label}) RETURN count(n) AS cnt",
                )
            )
        out.append(
            ManagementBatchTemplate(
                id=f"mgmt/uniform_delete/{label}",
                kind="Uniform",
                steps=steps,
                signature=signature,
                nl_pattern=f"Remove {k} named {label} nodes one by one, checking the remaining count each time.",
            )
        )
        steps = []
        signature = {}
        for i in range(k):
            signature[f"UID_{i}"] = {"kind": "node_uid", "label": label, "tag": "text"}
            signature[f"VAL_{i}"] = {"kind": "fresh_uid", "label": label, "tag": "text"}
            steps.append(
                (
                    f"MATCH (n:{label} {{uid: $UID_{i}}}) SET n.{text_prop} = $VAL_{i}",
                    f"MATCH (n:{label}) WHERE n.{text_prop} = $VAL_{i} RETURN count(n) AS cnt",
                )
            )
        out.append(
            ManagementBatchTemplate(
                id=f"mgmt/uniform_set/{label}",
                kind="Uniform",
                steps=steps,
                signature=signature,
                nl_pattern=f"Rewrite {text_prop} on {k} named {label} nodes, confirming each write.",
            )
        )
        steps = []
        signature = {}
        for i in range(k):
            signature[f"MUID_{i}"] = {"kind": "fresh_uid", "label": label, "tag": "text"}
            steps.append(
                (
                    f"MERGE (n:{label} {{uid: $MUID_{i}}})",
                    f"MATCH (n:{label}) WHERE n.uid = $MUID_{i} RETURN count(n) AS cnt",
                )
            )
        out.append(
            ManagementBatchTemplate(
                id=f"mgmt/uniform_merge/{label}",
                kind="Uniform",
                steps=steps,
                signature=signature,
                nl_pattern=f"Merge {k} {label} nodes by uid, verifying presence after each merge.",
            )
        )
        steps = []
        signature = {}
        for i in range(k):
            signature[f"FU_A_{i}"] = {"kind": "fresh_uid", "label": label, "tag": "text"}
            signature[f"FU_B_{i}"] = {"kind": "fresh_uid", "label": label, "tag": "text"}
            steps.append(
                (
                    f"FOREACH (x IN [$FU_A_{i}, $FU_B_{i}] | CREATE (:{label} {{uid: x}}))",
                    f"MATCH (n:{label}) RETURN count(n) AS cnt",
                )
            )
        out.append(
            ManagementBatchTemplate(
                id=f"mgmt/uniform_foreach/{label}",
                kind="Uniform",
                steps=steps,
                signature=signature,
                nl_pattern=f"Batch-create pairs of {label} nodes via list iteration, counting after each step.",
            )
        )

    if "Mixed" in kinds:
        pattern = ["create", "create", "delete_created", "set_created", "remove_created"]
        steps = []
        signature = {}
        created: list = []
        for i in range(k):
            action = pattern[i % len(pattern)]
            if action == "create" or not created:
                name = f"MIX_NEW_{i}"
                signature[name] = {"kind": "fresh_uid", "label": label, "tag": "text"}
                created.append(name)
                op = f"CREATE (n:{label} {{uid: ${name}}})"
                val = (
                    f"MATCH (n:{label}) WHERE n.uid = ${name} RETURN count(n) AS cnt"
                    if i % 2 == 0
                    else f"MATCH (m:{background}) RETURN count(m) AS cnt"
                )
            elif action == "delete_created":
                name = created.pop(0)
                op = f"MATCH (n:{label} {{uid: ${name}}}) DETACH DELETE n"
                val = f"MATCH (n:{label}) WHERE n.uid = ${name} RETURN count(n) AS cnt"
            elif action == "set_created":
                name = created[0]
                vname = f"MIX_VAL_{i}"
                signature[vname] = {"kind": "fresh_uid", "label": label, "tag": "text"}
                op = f"MATCH (n:{label} {{uid: ${name}}}) SET n.{text_prop} = ${vname}"
                val = f"MATCH (n:{label}) WHERE n.{text_prop} = ${vname} RETURN count(n) AS cnt"
            else:  # remove_created
                name = created[0]
                op = f"MATCH (n:{label} {{uid: ${name}}}) REMOVE n.{text_prop}"
                val = f"MATCH (m:{background}) RETURN count(m) AS cnt"
            steps.append((op, val))
        out.append(
            ManagementBatchTemplate(
                id=f"mgmt/mixed/{label}",
                kind="Mixed",
                steps=steps,
                signature=signature,
                nl_pattern=f"Interleave creates, deletes, and property edits on {label} nodes with spot checks.",
            )
        )
    return out


def _mgmt_label(schema: SchemaSummary) -> str:
    for label in schema.node_labels:
        if _has_uid(schema, label):
            return label
    return schema.node_labels[0]


# -- library assembly ---------------------------------------------------------------


def build_library(schema: SchemaSummary, varlen=DEFAULT_VARLEN, k: int = STANDARD_K) -> TemplateLibrary:
    basic = build_basic_templates(schema)
    noagg = augment_noagg(basic, schema, varlen)
    agg = extend_agg(basic + noagg, schema)
    pairs = derive_boolean_pairs(noagg + agg)
    management = build_management_batches(schema, k)
    return TemplateLibrary(basic=basic, noagg=noagg, agg=agg, boolean_pairs=pairs, management=management)


def save_library(library: TemplateLibrary, path):
    Path(path).write_text(library.to_jsonl(), encoding="utf-8")


def load_library(path) -> TemplateLibrary:
    return TemplateLibrary.from_jsonl(Path(path).read_text(encoding="utf-8"))
