"""Planned execution of logical plans over graph snapshots.

Read execution is a pure function of (plan, snapshot, params). Mutating
execution drives a MutationSession; reads inside a mutating statement see
the session state at statement start (documented single-statement
visibility).
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import kernels
from ..errors import ConstraintError, RuntimeTypeError
from ..values import sort_key
from . import ast
from . import plan as planmod
from .eval import EvalContext, cypher_equals, evaluate
from .table import EdgeRef, NodeRef, PathVal, ResultTable, cell_compare_form

_EDGES = "#edges"


def _visible(row: dict) -> dict:
    return {k: v for k, v in row.items() if not k.startswith("#")}


def _row_canonical_key(row: dict):
    return tuple(sort_key(row[k]) for k in sorted(row) if not k.startswith("#"))


@dataclass
class MutationResult:
    nodes_created: int = 0
    nodes_deleted: int = 0
    edges_created: int = 0
    edges_deleted: int = 0
    props_set: int = 0

    def as_dict(self):
        return {
            "nodes_created": self.nodes_created,
            "nodes_deleted": self.nodes_deleted,
            "edges_created": self.edges_created,
            "edges_deleted": self.edges_deleted,
            "props_set": self.props_set,
        }


class _Runner:
    def __init__(self, snapshot, params=None, session=None):
        self.snapshot = snapshot
        self.params = params or {}
        self.session = session
        self.summary = MutationResult()
        self.argument_row: dict = {}
        self._subplan_cache: dict = {}
        self._deleted_nodes: set = set()
        self._deleted_edges: set = set()
        self.ctx = EvalContext(snapshot, self.params, check_pattern=self.check_pattern)

    # -- entry ---------------------------------------------------------

    def run(self, node: planmod.PlanNode) -> list:
        method = getattr(self, "_run_" + type(node).__name__)
        return method(node)

    def eval(self, expr, row):
        return evaluate(expr, row, self.ctx)

    # -- correlated subplans --------------------------------------------

    def subplan_for(self, part: ast.PatternPart, bound_key: frozenset):
        key = (id(part), bound_key)
        cached = self._subplan_cache.get(key)
        if cached is None:
            lowerer = planmod._Lowerer()
            cached = lowerer.lower_part(
                planmod.ArgumentNode("Argument"), part, set(bound_key), []
            )
            self._subplan_cache[key] = cached
        return cached

    def match_part(self, part: ast.PatternPart, row: dict) -> list:
        """Correlated matching of one pattern part seeded by ``row``."""
        part_vars = {e.var for e in part.elements if e.var}
        bound_key = frozenset(v for v in row if not v.startswith("#") and v in part_vars)
        for v in bound_key:
            if row[v] is None:
                return []
        sub = self.subplan_for(part, bound_key)
        saved = self.argument_row
        self.argument_row = _visible(row)
        try:
            return self.run(sub)
        finally:
            self.argument_row = saved

    def check_pattern(self, part: ast.PatternPart, row: dict) -> bool:
        return bool(self.match_part(part, row))

    # -- leaves ----------------------------------------------------------

    def _run_SingleRowNode(self, node):
        return [{}]

    def _run_ArgumentNode(self, node):
        return [dict(self.argument_row)]

    def _iter_label(self, label):
        if label is None:
            return sorted(self.snapshot.nodes)
        return sorted(self.snapshot.nodes_with_label(label))

    def _node_matches(self, node_id, labels, props, row) -> bool:
        node = self.snapshot.nodes.get(node_id)
        if node is None:
            return False
        if any(lb not in node.labels for lb in labels):
            return False
        for name, expr in props.items():
            if cypher_equals(node.props.get(name), self.eval(expr, row)) is not True:
                return False
        return True

    def _run_ScanNode(self, node):
        labels = (node.label,) if node.label else ()
        labels = labels + tuple(getattr(node, "extra_labels", ()))
        out = []
        for nid in self._iter_label(node.label):
            if self._node_matches(nid, labels, node.props, {}):
                out.append({node.var: NodeRef(nid)})
        return out

    def _run_SeekNode(self, node):
        value = self.eval(node.value, {})
        labels = (node.label,) + tuple(getattr(node, "extra_labels", ()))
        out = []
        for nid in sorted(self.snapshot.seek(node.label, node.prop, value)):
            # recheck with Cypher equality: the index treats 1/True/1.0 as one
            # key, query semantics do not
            if cypher_equals(self.snapshot.nodes[nid].props.get(node.prop), value) is not True:
                continue
            if self._node_matches(nid, labels, node.props, {}):
                out.append({node.var: NodeRef(nid)})
        return out

    def _run_NodeCheckNode(self, node):
        out = []
        for row in self.run(node.children[0]):
            val = row.get(node.var)
            if isinstance(val, NodeRef) and self._node_matches(val.id, node.labels, node.props, row):
                out.append(row)
        return out

    # -- traversal --------------------------------------------------------

    def _adj_eids(self, node_id, direction):
        if direction == "out":
            return self.snapshot.out_adj[node_id]
        if direction == "in":
            return self.snapshot.in_adj[node_id]
        merged = set(self.snapshot.out_adj[node_id]) | set(self.snapshot.in_adj[node_id])
        return sorted(merged)

    def _rel_props_ok(self, edge, props, row) -> bool:
        for name, expr in props.items():
            if cypher_equals(edge.props.get(name), self.eval(expr, row)) is not True:
                return False
        return True

    def _run_ExpandNode(self, node):
        out = []
        rel = node.rel
        for row in self.run(node.children[0]):
            src = row.get(node.src_var)
            if not isinstance(src, NodeRef):
                continue
            used = row.get(_EDGES, frozenset())
            dst_bound = row.get(node.dst_name)
            rel_bound = row.get(node.rel_name) if node.rel_name in row else None
            for eid in self._adj_eids(src.id, rel.direction):
                if eid in used:
                    continue
                if rel_bound is not None and not (isinstance(rel_bound, EdgeRef) and rel_bound.id == eid):
                    continue
                edge = self.snapshot.edges[eid]
                if rel.types and edge.rel_type not in rel.types:
                    continue
                if not self._rel_props_ok(edge, rel.props, row):
                    continue
                other = edge.dst if edge.src == src.id else edge.src
                if rel.direction == "out" and edge.src != src.id:
                    continue
                if rel.direction == "in" and edge.dst != src.id:
                    continue
                if node.dst_name in row:
                    if not (isinstance(dst_bound, NodeRef) and dst_bound.id == other):
                        continue
                elif not self._node_matches(other, node.dst.labels, node.dst.props, row):
                    continue
                new = dict(row)
                new[node.rel_name] = EdgeRef(eid)
                new[node.dst_name] = NodeRef(other)
                new[_EDGES] = used | {eid}
                if node.path_name:
                    new[node.path_name] = PathVal((src.id, other), (eid,))
                out.append(new)
        return out

    def _run_VarExpandNode(self, node):
        rel = node.rel
        lo, hi, _fixed = rel.hops
        csr = self.snapshot.csr()
        indptr, targets, eids, codes = csr.arrays(rel.direction)
        allowed = csr.allowed_mask(rel.types if rel.types else None)
        out = []
        for row in self.run(node.children[0]):
            src = row.get(node.src_var)
            if not isinstance(src, NodeRef):
                continue
            used = row.get(_EDGES, frozenset())
            dst_bound = row.get(node.dst_name)
            start_idx = csr.index_of.get(src.id)
            if start_idx is None:
                continue
            for end_idx, walk_eids, walk_nodes in kernels.varlen_walks(
                indptr, targets, eids, codes, allowed, start_idx, lo, hi
            ):
                if used and any(e in used for e in walk_eids):
                    continue
                end_id = int(csr.node_ids[end_idx])
                if node.dst_name in row:
                    if not (isinstance(dst_bound, NodeRef) and dst_bound.id == end_id):
                        continue
                elif not self._node_matches(end_id, node.dst.labels, node.dst.props, row):
                    continue
                if rel.props and not all(
                    self._rel_props_ok(self.snapshot.edges[e], rel.props, row) for e in walk_eids
                ):
                    continue
                new = dict(row)
                new[node.rel_name] = [EdgeRef(e) for e in walk_eids]
                new[node.dst_name] = NodeRef(end_id)
                new[_EDGES] = used | set(walk_eids)
                if node.path_name:
                    node_ids = tuple(int(csr.node_ids[i]) for i in walk_nodes)
                    new[node.path_name] = PathVal(node_ids, tuple(walk_eids))
                out.append(new)
        return out

    def _run_ShortestPathNode(self, node):
        rel = node.rel
        lo, hi, _fixed = rel.hops
        csr = self.snapshot.csr()
        indptr, targets, eids, codes = csr.arrays(rel.direction)
        allowed = csr.allowed_mask(rel.types if rel.types else None)
        out = []
        for row in self.run(node.children[0]):
            a = row.get(node.src_var)
            b = row.get(node.dst_var)
            if not isinstance(a, NodeRef) or not isinstance(b, NodeRef):
                continue
            ai = csr.index_of.get(a.id)
            bi = csr.index_of.get(b.id)
            if ai is None or bi is None:
                continue
            walk = kernels.shortest_walk(indptr, targets, eids, codes, allowed, ai, bi, hi)
            if walk is None:
                continue
            walk_eids, walk_nodes = walk
            if len(walk_eids) < lo:
                continue
            new = dict(row)
            if rel.var:
                new[rel.var] = [EdgeRef(int(e)) for e in walk_eids]
            if node.path_name:
                node_ids = tuple(int(csr.node_ids[i]) for i in walk_nodes)
                new[node.path_name] = PathVal(node_ids, tuple(int(e) for e in walk_eids))
            new[_EDGES] = row.get(_EDGES, frozenset()) | {int(e) for e in walk_eids}
            out.append(new)
        return out

    # -- row combinators ---------------------------------------------------

    def _run_FilterNode(self, node):
        return [row for row in self.run(node.children[0]) if self.eval(node.predicate, row) is True]

    def _run_HashJoinNode(self, node):
        left = [_visible(r) for r in self.run(node.children[0])]
        right = [_visible(r) for r in self.run(node.children[1])]
        table: dict = {}
        for row in left:
            cells = tuple(row.get(v) for v in node.on)
            if any(c is None for c in cells):
                continue
            table.setdefault(tuple(cell_compare_form(c) for c in cells), []).append(row)
        out = []
        for row in right:
            cells = tuple(row.get(v) for v in node.on)
            if any(c is None for c in cells):
                continue
            for match in table.get(tuple(cell_compare_form(c) for c in cells), ()):
                merged = dict(match)
                merged.update(row)
                out.append(merged)
        return out

    def _run_CartesianNode(self, node):
        left = self.run(node.children[0])
        right = self.run(node.children[1])
        out = []
        for lrow in left:
            for rrow in right:
                if node.in_clause:
                    le = lrow.get(_EDGES, frozenset())
                    re = rrow.get(_EDGES, frozenset())
                    if le & re:
                        continue
                    merged = dict(lrow)
                    merged.update(rrow)
                    merged[_EDGES] = le | re
                else:
                    merged = _visible(lrow)
                    merged.update(_visible(rrow))
                out.append(merged)
        return out

    def _run_OptionalNode(self, node):
        out = []
        saved = self.argument_row
        for row in self.run(node.children[0]):
            self.argument_row = _visible(row)
            sub_rows = self.run(node.subplan)
            if sub_rows:
                for sub in sub_rows:
                    merged = dict(row)
                    for var in node.new_vars:
                        merged[var] = sub.get(var)
                    out.append(merged)
            else:
                merged = dict(row)
                for var in node.new_vars:
                    merged[var] = None
                out.append(merged)
        self.argument_row = saved
        return out

    def _run_UnwindNode(self, node):
        out = []
        for row in self.run(node.children[0]):
            value = self.eval(node.expr, row)
            if value is None:
                continue
            if not isinstance(value, list):
                raise RuntimeTypeError("UNWIND requires a list")
            for item in value:
                new = dict(row)
                new[node.var] = item
                out.append(new)
        return out

    # -- projection ---------------------------------------------------------

    def _run_ProjectNode(self, node):
        out = []
        for row in self.run(node.children[0]):
            values = {alias: self.eval(expr, row) for expr, alias in node.items}
            if node.keep_input:
                new = _visible(row)
                new.update(values)
            else:
                new = values
            out.append(new)
        return out

    def _run_AggregateNode(self, node):
        rows = self.run(node.children[0])
        groups: dict = {}
        order: list = []
        for row in rows:
            key_vals = tuple(self.eval(expr, row) for expr, _ in node.keys)
            key = tuple(cell_compare_form(v) for v in key_vals)
            if key not in groups:
                groups[key] = (key_vals, [])
                order.append(key)
            groups[key][1].append(row)
        if not node.keys and not order:
            groups[()] = ((), [])
            order.append(())
        out = []
        for key in order:
            key_vals, group_rows = groups[key]
            new = {alias: key_vals[i] for i, (_, alias) in enumerate(node.keys)}
            for expr, alias in node.aggs:
                new[alias] = self._eval_agg_item(expr, group_rows)
            out.append(new)
        return out

    def _eval_agg_item(self, expr, group_rows):
        replacements = {}
        for sub in ast.walk_expr(expr):
            if isinstance(sub, ast.CountStar) or (
                isinstance(sub, ast.FuncCall) and sub.name in ast.AGG_FUNCS
            ):
                replacements[id(sub)] = ast.Lit(self._compute_agg(sub, group_rows))
        rewritten = _rewrite(expr, replacements)
        return self.eval(rewritten, {})

    def _compute_agg(self, call, group_rows):
        if isinstance(call, ast.CountStar):
            return len(group_rows)
        arg = call.args[0] if call.args else None
        if arg is None:
            raise RuntimeTypeError(f"{call.name}() requires an argument")
        values = []
        seen = set()
        for row in group_rows:
            value = self.eval(arg, row)
            if value is None:
                continue
            if call.distinct:
                form = cell_compare_form(value)
                if form in seen:
                    continue
                seen.add(form)
            values.append(value)
        name = call.name
        if name == "count":
            return len(values)
        if name == "collect":
            # canonical order keeps collect() deterministic across row orders
            return sorted(values, key=sort_key)
        if name == "sum":
            total = 0
            for v in values:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise RuntimeTypeError("sum() over a non-numeric value")
                total = total + v
            return total
        if name == "avg":
            if not values:
                return None
            total = 0.0
            for v in values:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise RuntimeTypeError("avg() over a non-numeric value")
                total += float(v)
            return total / len(values)
        if name in ("min", "max"):
            if not values:
                return None
            best = values[0]
            for v in values[1:]:
                if name == "min":
                    if sort_key(v) < sort_key(best):
                        best = v
                elif sort_key(v) > sort_key(best):
                    best = v
            return best
        raise RuntimeTypeError(f"unknown aggregate {name}()")

    def _run_DistinctNode(self, node):
        rows = self.run(node.children[0])
        if not rows:
            return rows
        columns = sorted(k for k in rows[0] if not k.startswith("#"))
        seen = set()
        out = []
        for row in rows:
            key = tuple(cell_compare_form(row[k]) for k in columns)
            if key in seen:
                continue
            seen.add(key)
            out.append(row)
        return out

    def _sorted_rows(self, rows, keys):
        # stable multi-pass: canonical tie-break first, then each sort key
        # from last to first; Python's sort keeps reverse=True stable
        rows = sorted(rows, key=_row_canonical_key)
        for expr, asc in reversed(keys):
            rows.sort(key=lambda r: sort_key(self.eval(expr, r)), reverse=not asc)
        return rows

    def _count_of(self, expr):
        value = self.eval(expr, {})
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise RuntimeTypeError("SKIP/LIMIT requires a non-negative integer")
        return value

    def _run_SortNode(self, node):
        return self._sorted_rows(self.run(node.children[0]), node.keys)

    def _run_SkipNode(self, node):
        rows = self.run(node.children[0])
        if node.canonicalize:
            rows = sorted(rows, key=_row_canonical_key)
        return rows[self._count_of(node.expr) :]

    def _run_LimitNode(self, node):
        rows = self.run(node.children[0])
        if node.canonicalize:
            rows = sorted(rows, key=_row_canonical_key)
        return rows[: self._count_of(node.expr)]

    def _run_TopNode(self, node):
        rows = self._sorted_rows(self.run(node.children[0]), node.keys)
        start = self._count_of(node.skip) if node.skip is not None else 0
        return rows[start : start + self._count_of(node.limit)]

    def _run_UnionNode(self, node):
        rows = self.run(node.children[0]) + self.run(node.children[1])
        if node.union_all or not rows:
            return rows
        columns = sorted(rows[0])
        seen = set()
        out = []
        for row in rows:
            key = tuple(cell_compare_form(row[k]) for k in columns)
            if key not in seen:
                seen.add(key)
                out.append(row)
        return out

    # -- mutation -----------------------------------------------------------

    def _require_session(self):
        if self.session is None:
            raise ConstraintError("mutating plan executed without a session")
        return self.session

    def _run_CreatePlanNode(self, node):
        session = self._require_session()
        out = []
        for row in self.run(node.children[0]):
            new = dict(row)
            for part in node.parts:
                self._create_part(session, part, new)
            out.append(new)
        return out

    def _create_part(self, session, part: ast.PatternPart, row: dict):
        elements = part.elements
        prev_ref = self._create_node_pat(session, elements[0], row)
        for i in range(1, len(elements), 2):
            rel: ast.RelPat = elements[i]
            dst_ref = self._create_node_pat(session, elements[i + 1], row)
            src_ref, tgt_ref = (prev_ref, dst_ref) if rel.direction == "out" else (dst_ref, prev_ref)
            props = {name: self.eval(expr, row) for name, expr in rel.props.items()}
            props = {k: v for k, v in props.items() if v is not None}
            eid = session.create_edge(src_ref.id, tgt_ref.id, rel.types[0], props)
            self.summary.edges_created += 1
            if rel.var:
                row[rel.var] = EdgeRef(eid)
            prev_ref = dst_ref

    def _create_node_pat(self, session, pat: ast.NodePat, row: dict) -> NodeRef:
        if pat.var and pat.var in row:
            existing = row[pat.var]
            if not isinstance(existing, NodeRef):
                raise ConstraintError(f"variable {pat.var} is not a node")
            if pat.labels or pat.props:
                raise ConstraintError(f"variable {pat.var} already bound; cannot redeclare with labels/props")
            return existing
        if not pat.labels:
            raise ConstraintError("created node requires at least one label")
        props = {name: self.eval(expr, row) for name, expr in pat.props.items()}
        props = {k: v for k, v in props.items() if v is not None}
        nid = session.create_node(pat.labels, props)
        self.summary.nodes_created += 1
        ref = NodeRef(nid)
        if pat.var:
            row[pat.var] = ref
        return ref

    def _run_MergePlanNode(self, node):
        session = self._require_session()
        part = node.part
        for rel in part.rel_pats():
            if rel.hops is not None:
                raise ConstraintError("MERGE over a variable-length pattern is ambiguous")
        out = []
        for row in self.run(node.children[0]):
            # match against the current session state
            self.snapshot = session.view()
            self.ctx.snapshot = self.snapshot
            matches = self.match_part(part, row)
            if matches:
                for match in matches:
                    merged = dict(row)
                    for var in part.variables():
                        if var and var in match:
                            merged[var] = match[var]
                    out.append(merged)
                continue
            for rel in part.rel_pats():
                if rel.direction == "both":
                    raise ConstraintError("MERGE cannot create an undirected relationship")
            new = dict(row)
            self._create_part(session, part, new)
            out.append(new)
        self.snapshot = session.view()
        self.ctx.snapshot = self.snapshot
        return out

    def _run_DeletePlanNode(self, node):
        session = self._require_session()
        out = []
        node_targets: list = []
        edge_targets: list = []
        for row in self.run(node.children[0]):
            for expr in node.exprs:
                value = self.eval(expr, row)
                if value is None:
                    continue
                if isinstance(value, NodeRef):
                    node_targets.append(value.id)
                elif isinstance(value, EdgeRef):
                    edge_targets.append(value.id)
                else:
                    raise RuntimeTypeError("DELETE requires nodes or relationships")
            out.append(row)
        view = session.view()
        for eid in edge_targets:
            if eid in self._deleted_edges:
                continue
            self._deleted_edges.add(eid)
            session.delete_edge(eid)
            self.summary.edges_deleted += 1
        for nid in node_targets:
            if nid in self._deleted_nodes:
                continue
            self._deleted_nodes.add(nid)
            if node.detach:
                incident = set(view.out_adj.get(nid, ())) | set(view.in_adj.get(nid, ()))
                cascade = incident - self._deleted_edges
                self._deleted_edges |= cascade
                self.summary.edges_deleted += len(cascade)
            session.delete_node(nid, detach=node.detach)
            self.summary.nodes_deleted += 1
        return out

    def _run_SetPlanNode(self, node):
        session = self._require_session()
        out = []
        for row in self.run(node.children[0]):
            for target, value_expr in node.items:
                entity = self.eval(target.target, row)
                if entity is None:
                    continue
                value = self.eval(value_expr, row) if value_expr is not None else None
                if isinstance(entity, NodeRef):
                    session.set_node_prop(entity.id, target.name, value)
                elif isinstance(entity, EdgeRef):
                    session.set_edge_prop(entity.id, target.name, value)
                else:
                    raise RuntimeTypeError("SET/REMOVE requires an entity")
                self.summary.props_set += 1
            out.append(row)
        return out

    def _run_ForeachPlanNode(self, node):
        session = self._require_session()
        out = []
        for row in self.run(node.children[0]):
            value = self.eval(node.list_expr, row)
            if value is None:
                out.append(row)
                continue
            if not isinstance(value, list):
                raise RuntimeTypeError("FOREACH requires a list")
            for item in value:
                inner = dict(row)
                inner[node.var] = item
                self._apply_update_clauses(session, node.updates, inner)
            out.append(row)
        return out

    def _apply_update_clauses(self, session, clauses, row):
        for clause in clauses:
            if isinstance(clause, ast.CreateClause):
                for part in clause.parts:
                    planmod._check_create_part(part)
                    self._create_part(session, part, row)
            elif isinstance(clause, ast.SetClause):
                for target, expr in clause.items:
                    entity = self.eval(target.target, row)
                    if entity is None:
                        continue
                    value = self.eval(expr, row)
                    if isinstance(entity, NodeRef):
                        session.set_node_prop(entity.id, target.name, value)
                    elif isinstance(entity, EdgeRef):
                        session.set_edge_prop(entity.id, target.name, value)
                    else:
                        raise RuntimeTypeError("SET requires an entity")
                    self.summary.props_set += 1
            elif isinstance(clause, ast.RemoveClause):
                for target in clause.items:
                    entity = self.eval(target.target, row)
                    if entity is None:
                        continue
                    if isinstance(entity, NodeRef):
                        session.set_node_prop(entity.id, target.name, None)
                    elif isinstance(entity, EdgeRef):
                        session.set_edge_prop(entity.id, target.name, None)
                    self.summary.props_set += 1
            elif isinstance(clause, ast.DeleteClause):
                for expr in clause.exprs:
                    value = self.eval(expr, row)
                    if value is None:
                        continue
                    if isinstance(value, NodeRef) and value.id not in self._deleted_nodes:
                        self._deleted_nodes.add(value.id)
                        view = session.view()
                        if clause.detach:
                            incident = set(view.out_adj.get(value.id, ())) | set(view.in_adj.get(value.id, ()))
                            cascade = incident - self._deleted_edges
                            self._deleted_edges |= cascade
                            self.summary.edges_deleted += len(cascade)
                        session.delete_node(value.id, detach=clause.detach)
                        self.summary.nodes_deleted += 1
                    elif isinstance(value, EdgeRef) and value.id not in self._deleted_edges:
                        self._deleted_edges.add(value.id)
                        session.delete_edge(value.id)
                        self.summary.edges_deleted += 1
            elif isinstance(clause, ast.ForeachClause):
                value = self.eval(clause.list_expr, row)
                if value is None:
                    continue
                if not isinstance(value, list):
                    raise RuntimeTypeError("FOREACH requires a list")
                for item in value:
                    inner = dict(row)
                    inner[clause.var] = item
                    self._apply_update_clauses(session, clause.updates, inner)
            elif isinstance(clause, ast.MergeClause):
                self.snapshot = session.view()
                self.ctx.snapshot = self.snapshot
                matches = self.match_part(clause.part, row)
                if not matches:
                    self._create_part(session, clause.part, row)
            else:  # pragma: no cover
                raise RuntimeTypeError(f"unsupported FOREACH update {type(clause).__name__}")


def execute(plan: planmod.LogicalPlan, snapshot, params=None) -> ResultTable:
    """Run a read-only plan; deterministic canonicalized result."""
    if not plan.read_only:
        raise ConstraintError("execute() requires a read-only plan; use execute_mutation")
    runner = _Runner(snapshot, params)
    rows = runner.run(plan.root)
    table = ResultTable(plan.columns, [tuple(row.get(c) for c in plan.columns) for row in rows])
    if not plan.final_ordered:
        table = table.canonicalized()
    return table


def execute_mutation(plan: planmod.LogicalPlan, session, params=None) -> MutationResult:
    """Run a mutating plan against a session; returns exact change counts."""
    if plan.read_only:
        raise ConstraintError("execute_mutation() requires a mutating plan")
    runner = _Runner(session.view(), params, session=session)
    runner.run(plan.root)
    return runner.summary


def _rewrite(expr, replacements):
    if id(expr) in replacements:
        return replacements[id(expr)]
    if isinstance(expr, (ast.Lit, ast.Param, ast.Var, ast.CountStar, ast.PatternPred)):
        return expr
    if isinstance(expr, ast.Prop):
        return ast.Prop(_rewrite(expr.target, replacements), expr.name)
    if isinstance(expr, ast.ListLit):
        return ast.ListLit(tuple(_rewrite(i, replacements) for i in expr.items))
    if isinstance(expr, ast.Unary):
        return ast.Unary(expr.op, _rewrite(expr.operand, replacements))
    if isinstance(expr, ast.Binary):
        return ast.Binary(expr.op, _rewrite(expr.left, replacements), _rewrite(expr.right, replacements))
    if isinstance(expr, ast.StringOp):
        return ast.StringOp(expr.op, _rewrite(expr.left, replacements), _rewrite(expr.right, replacements))
    if isinstance(expr, ast.IsNull):
        return ast.IsNull(_rewrite(expr.target, replacements), expr.negated)
    if isinstance(expr, ast.FuncCall):
        return ast.FuncCall(expr.name, tuple(_rewrite(a, replacements) for a in expr.args), expr.distinct)
    if isinstance(expr, ast.Index):
        return ast.Index(_rewrite(expr.target, replacements), _rewrite(expr.index, replacements))
    if isinstance(expr, ast.Slice):
        return ast.Slice(
            _rewrite(expr.target, replacements),
            _rewrite(expr.lo, replacements) if expr.lo is not None else None,
            _rewrite(expr.hi, replacements) if expr.hi is not None else None,
        )
    raise RuntimeTypeError(f"cannot rewrite {type(expr).__name__}")
