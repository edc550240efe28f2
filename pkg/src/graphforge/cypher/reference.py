"""Brute-force reference evaluator.

Computes query results by exhaustive binding enumeration straight off the
AST: no indices, no join planning, no adjacency shortcuts — every candidate
node or edge is scanned and tested against the partial binding. Shares only
the scalar expression evaluator with the planned engine; matching,
aggregation, and projection are implemented independently so the two
routes can check each other.
"""

from __future__ import annotations

import functools

from ..errors import CapExceeded, RuntimeTypeError
from ..values import sort_key
from . import ast
from .eval import EvalContext, cypher_equals, evaluate
from .table import EdgeRef, NodeRef, PathVal, ResultTable, cell_compare_form

DEFAULT_CAP = 200


def reference_execute(plan_or_statement, snapshot, params=None, cap: int = DEFAULT_CAP) -> ResultTable:
    statement = getattr(plan_or_statement, "statement", plan_or_statement)
    if snapshot.node_count() > cap:
        raise CapExceeded(snapshot.node_count(), cap)
    if statement.is_mutating():
        raise RuntimeTypeError("reference evaluator handles read-only statements")
    evaluator = _Reference(snapshot, params or {})
    tables = [evaluator.run_single(q) for q in statement.queries]
    columns, rows, ordered = tables[0]
    for i, (cols2, rows2, _ord2) in enumerate(tables[1:]):
        if tuple(cols2) != tuple(columns):
            raise RuntimeTypeError("UNION parts must share column names")
        rows = rows + rows2
        if not statement.union_alls[i]:
            seen = set()
            deduped = []
            for row in rows:
                key = tuple(cell_compare_form(c) for c in row)
                if key not in seen:
                    seen.add(key)
                    deduped.append(row)
            rows = deduped
        ordered = False
    table = ResultTable(columns, rows)
    return table if ordered else table.canonicalized()


class _Reference:
    def __init__(self, snapshot, params):
        self.snapshot = snapshot
        self.params = params
        self.ctx = EvalContext(snapshot, params, check_pattern=self._pattern_exists)

    def eval(self, expr, row):
        return evaluate(expr, row, self.ctx)

    # -- clause pipeline -------------------------------------------------

    def run_single(self, query: ast.SingleQuery):
        rows = [{}]
        columns: tuple = ()
        ordered = False
        for clause in query.clauses:
            if isinstance(clause, ast.MatchClause):
                rows = self._match(rows, clause)
            elif isinstance(clause, ast.UnwindClause):
                rows = self._unwind(rows, clause)
            elif isinstance(clause, ast.WithClause):
                rows = self._project(rows, clause.body)
                if clause.where is not None:
                    rows = [r for r in rows if self.eval(clause.where, r) is True]
            elif isinstance(clause, ast.ReturnClause):
                rows = self._project(rows, clause.body)
                columns = tuple(alias for _, alias in clause.body.items)
                ordered = bool(clause.body.order_by)
            else:  # pragma: no cover - parser enforces read-only
                raise RuntimeTypeError(f"unexpected clause {type(clause).__name__}")
        out_rows = [tuple(row.get(c) for c in columns) for row in rows]
        return columns, out_rows, ordered

    # -- matching ----------------------------------------------------------

    def _match(self, rows, clause: ast.MatchClause):
        out = []
        for row in rows:
            extensions = self._match_parts(clause.parts, row)
            if clause.optional:
                new_vars = set()
                for part in clause.parts:
                    new_vars |= {v for v in part.variables() if v and v not in row}
                matched = []
                for ext in extensions:
                    merged = {**row, **ext}
                    if clause.where is None or self.eval(clause.where, merged) is True:
                        matched.append(merged)
                if matched:
                    out.extend(matched)
                else:
                    out.append({**row, **{v: None for v in sorted(new_vars)}})
            else:
                for ext in extensions:
                    merged = {**row, **ext}
                    if clause.where is None or self.eval(clause.where, merged) is True:
                        out.append(merged)
        return out

    def _match_parts(self, parts, row):
        """All clause-wide bindings; relationship uniqueness spans the parts."""
        results = [({}, frozenset())]
        for part in parts:
            next_results = []
            for binding, used in results:
                seed = {**row, **binding}
                for ext, ext_used in self._match_part(part, seed, used):
                    next_results.append(({**binding, **ext}, ext_used))
            results = next_results
        return [binding for binding, _ in results]

    def _match_part(self, part: ast.PatternPart, bound: dict, used: frozenset):
        if part.shortest:
            yield from self._match_shortest(part, bound, used)
            return
        elements = part.elements

        def node_candidates(pat: ast.NodePat):
            if pat.var and pat.var in bound:
                val = bound[pat.var]
                if isinstance(val, NodeRef) and self._node_ok(val.id, pat):
                    yield val.id
                return
            for nid in sorted(self.snapshot.nodes):
                if self._node_ok(nid, pat):
                    yield nid

        def extend(idx, current, current_used, node_seq, edge_seq):
            if idx >= len(elements):
                final = dict(current)
                if part.var is not None:
                    final[part.var] = PathVal(tuple(node_seq), tuple(edge_seq))
                yield final, frozenset(current_used)
                return
            rel: ast.RelPat = elements[idx]
            dst: ast.NodePat = elements[idx + 1]
            src_id = node_seq[-1]
            if rel.hops is None:
                for eid in sorted(self.snapshot.edges):
                    if eid in current_used:
                        continue
                    edge = self.snapshot.edges[eid]
                    other = self._edge_other(edge, src_id, rel.direction)
                    if other is None:
                        continue
                    if rel.types and edge.rel_type not in rel.types:
                        continue
                    if rel.var and rel.var in current and current[rel.var] != EdgeRef(eid):
                        continue
                    if not self._edge_props_ok(edge, rel.props, current):
                        continue
                    if not self._dst_ok(dst, other, current):
                        continue
                    nxt = dict(current)
                    if rel.var:
                        nxt[rel.var] = EdgeRef(eid)
                    if dst.var:
                        nxt[dst.var] = NodeRef(other)
                    yield from extend(
                        idx + 2, nxt, current_used | {eid}, node_seq + [other], edge_seq + [eid]
                    )
            else:
                lo, hi, _fixed = rel.hops
                for walk_eids, walk_nodes in self._walks(src_id, rel, lo, hi, current_used, current):
                    endpoint = walk_nodes[-1]
                    if not self._dst_ok(dst, endpoint, current):
                        continue
                    nxt = dict(current)
                    if rel.var:
                        nxt[rel.var] = [EdgeRef(e) for e in walk_eids]
                    if dst.var:
                        nxt[dst.var] = NodeRef(endpoint)
                    yield from extend(
                        idx + 2,
                        nxt,
                        current_used | set(walk_eids),
                        node_seq + list(walk_nodes[1:]),
                        edge_seq + list(walk_eids),
                    )

        n0 = elements[0]
        for nid in node_candidates(n0):
            start = {}
            if n0.var and n0.var not in bound:
                start[n0.var] = NodeRef(nid)
            # checks during extension must see the outer bindings too
            yield from extend(1, {**bound, **start}, set(used), [nid], [])

    def _walks(self, src_id, rel, lo, hi, used, row):
        """All edge-unique walks from src via scans of the full edge set."""
        out = []

        def rec(node_id, eids, nodes):
            if len(eids) >= lo:
                out.append((tuple(eids), tuple(nodes)))
            if len(eids) >= hi:
                return
            for eid in sorted(self.snapshot.edges):
                if eid in used or eid in eids:
                    continue
                edge = self.snapshot.edges[eid]
                other = self._edge_other(edge, node_id, rel.direction)
                if other is None:
                    continue
                if rel.types and edge.rel_type not in rel.types:
                    continue
                if not self._edge_props_ok(edge, rel.props, row):
                    continue
                rec(other, eids + [eid], nodes + [other])

        rec(src_id, [], [src_id])
        return out

    def _match_shortest(self, part, bound, used):
        n0, rel, n1 = part.elements
        lo, hi, _fixed = rel.hops if rel.hops else (1, 1, False)

        def candidates(pat):
            if pat.var and pat.var in bound:
                val = bound[pat.var]
                if isinstance(val, NodeRef) and self._node_ok(val.id, pat):
                    yield val.id
                return
            for nid in sorted(self.snapshot.nodes):
                if self._node_ok(nid, pat):
                    yield nid

        for a in candidates(n0):
            for b in candidates(n1):
                if a == b:
                    # zero-length path only, matching the planned engine
                    walks = [((), (a,))] if lo == 0 else []
                else:
                    walks = [
                        (eids, nodes)
                        for eids, nodes in self._walks(a, rel, max(lo, 0), hi, set(), bound)
                        if nodes[-1] == b and len(eids) >= lo
                    ]
                if not walks:
                    continue
                best_len = min(len(eids) for eids, _ in walks)
                best = min((eids, nodes) for eids, nodes in walks if len(eids) == best_len)
                binding = {}
                if n0.var and n0.var not in bound:
                    binding[n0.var] = NodeRef(a)
                if n1.var and n1.var not in bound:
                    binding[n1.var] = NodeRef(b)
                if rel.var:
                    binding[rel.var] = [EdgeRef(e) for e in best[0]]
                if part.var:
                    binding[part.var] = PathVal(tuple(best[1]), tuple(best[0]))
                yield binding, frozenset(set(used) | set(best[0]))

    def _edge_other(self, edge, src_id, direction):
        if direction == "out":
            return edge.dst if edge.src == src_id else None
        if direction == "in":
            return edge.src if edge.dst == src_id else None
        if edge.src == src_id:
            return edge.dst
        if edge.dst == src_id:
            return edge.src
        return None

    def _node_ok(self, node_id, pat: ast.NodePat) -> bool:
        node = self.snapshot.nodes[node_id]
        if any(lb not in node.labels for lb in pat.labels):
            return False
        for name, expr in pat.props.items():
            if cypher_equals(node.props.get(name), self.eval(expr, {})) is not True:
                return False
        return True

    def _dst_ok(self, pat: ast.NodePat, node_id, current) -> bool:
        if pat.var and pat.var in current:
            val = current[pat.var]
            return isinstance(val, NodeRef) and val.id == node_id
        return self._node_ok(node_id, pat)

    def _edge_props_ok(self, edge, props, row) -> bool:
        for name, expr in props.items():
            if cypher_equals(edge.props.get(name), self.eval(expr, row)) is not True:
                return False
        return True

    def _pattern_exists(self, part: ast.PatternPart, row) -> bool:
        for var in {e.var for e in part.elements if e.var}:
            if var in row and row[var] is None:
                return False
        for _ in self._match_part(part, dict(row), frozenset()):
            return True
        return False

    # -- projection ----------------------------------------------------------

    def _unwind(self, rows, clause: ast.UnwindClause):
        out = []
        for row in rows:
            value = self.eval(clause.expr, row)
            if value is None:
                continue
            if not isinstance(value, list):
                raise RuntimeTypeError("UNWIND requires a list")
            for item in value:
                out.append({**row, clause.var: item})
        return out

    def _project(self, rows, body: ast.ProjectionBody):
        has_agg = any(ast.has_aggregate(expr) for expr, _ in body.items)
        aliases = [alias for _, alias in body.items]
        if has_agg:
            projected = self._aggregate(rows, body)
            scope_is_aliases = True
        elif body.distinct:
            projected = [{alias: self.eval(expr, row) for expr, alias in body.items} for row in rows]
            scope_is_aliases = True
        else:
            projected = []
            for row in rows:
                merged = {k: v for k, v in row.items() if not k.startswith("#")}
                for expr, alias in body.items:
                    merged[alias] = self.eval(expr, row)
                projected.append(merged)
            scope_is_aliases = False
        if body.distinct:
            seen = set()
            deduped = []
            for row in projected:
                key = tuple((k, cell_compare_form(row[k])) for k in sorted(row))
                if key not in seen:
                    seen.add(key)
                    deduped.append(row)
            projected = deduped

        if body.order_by:
            projected = self._order(projected, body.order_by)
        elif body.skip is not None or body.limit is not None:
            projected = sorted(projected, key=_canon_key)
        if body.skip is not None:
            projected = projected[self._count(body.skip) :]
        if body.limit is not None:
            projected = projected[: self._count(body.limit)]

        if not scope_is_aliases:
            projected = [{a: row[a] for a in aliases} for row in projected]
        return projected

    def _count(self, expr):
        value = self.eval(expr, {})
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise RuntimeTypeError("SKIP/LIMIT requires a non-negative integer")
        return value

    def _order(self, rows, keys):
        def cmp(a, b):
            for expr, asc in keys:
                ka = sort_key(self.eval(expr, a))
                kb = sort_key(self.eval(expr, b))
                if ka < kb:
                    return -1 if asc else 1
                if ka > kb:
                    return 1 if asc else -1
            ca, cb = _canon_key(a), _canon_key(b)
            return -1 if ca < cb else (1 if ca > cb else 0)

        return sorted(rows, key=functools.cmp_to_key(cmp))

    def _aggregate(self, rows, body: ast.ProjectionBody):
        keys = [(e, a) for e, a in body.items if not ast.has_aggregate(e)]
        aggs = [(e, a) for e, a in body.items if ast.has_aggregate(e)]
        groups: dict = {}
        order: list = []
        for row in rows:
            key_vals = tuple(self.eval(expr, row) for expr, _ in keys)
            key = tuple(cell_compare_form(v) for v in key_vals)
            if key not in groups:
                groups[key] = (key_vals, [])
                order.append(key)
            groups[key][1].append(row)
        if not keys and not order:
            groups[()] = ((), [])
            order.append(())
        out = []
        for key in order:
            key_vals, group_rows = groups[key]
            new = {alias: key_vals[i] for i, (_, alias) in enumerate(keys)}
            for expr, alias in aggs:
                new[alias] = self._agg_value(expr, group_rows)
            out.append(new)
        return out

    def _agg_value(self, expr, group_rows):
        subs = {}
        for sub in ast.walk_expr(expr):
            if isinstance(sub, ast.CountStar) or (
                isinstance(sub, ast.FuncCall) and sub.name in ast.AGG_FUNCS
            ):
                subs[id(sub)] = ast.Lit(self._agg_compute(sub, group_rows))
        return self.eval(_substitute(expr, subs), {})

    def _agg_compute(self, call, group_rows):
        if isinstance(call, ast.CountStar):
            return len(group_rows)
        if not call.args:
            raise RuntimeTypeError(f"{call.name}() requires an argument")
        values = []
        seen = set()
        for row in group_rows:
            value = self.eval(call.args[0], row)
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
            # mirror the engine's canonical collect() ordering
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
            for v in values:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise RuntimeTypeError("avg() over a non-numeric value")
            return sum(float(v) for v in values) / len(values)
        if name == "min":
            return min(values, key=sort_key) if values else None
        if name == "max":
            return max(values, key=sort_key) if values else None
        raise RuntimeTypeError(f"unknown aggregate {name}()")


def _canon_key(row: dict):
    return tuple(sort_key(row[k]) for k in sorted(row) if not k.startswith("#"))


def _substitute(expr, subs):
    if id(expr) in subs:
        return subs[id(expr)]
    if isinstance(expr, (ast.Lit, ast.Param, ast.Var, ast.CountStar, ast.PatternPred)):
        return expr
    if isinstance(expr, ast.Prop):
        return ast.Prop(_substitute(expr.target, subs), expr.name)
    if isinstance(expr, ast.ListLit):
        return ast.ListLit(tuple(_substitute(i, subs) for i in expr.items))
    if isinstance(expr, ast.Unary):
        return ast.Unary(expr.op, _substitute(expr.operand, subs))
    if isinstance(expr, ast.Binary):
        return ast.Binary(expr.op, _substitute(expr.left, subs), _substitute(expr.right, subs))
    if isinstance(expr, ast.StringOp):
        return ast.StringOp(expr.op, _substitute(expr.left, subs), _substitute(expr.right, subs))
    if isinstance(expr, ast.IsNull):
        return ast.IsNull(_substitute(expr.target, subs), expr.negated)
    if isinstance(expr, ast.FuncCall):
        return ast.FuncCall(expr.name, tuple(_substitute(a, subs) for a in expr.args), expr.distinct)
    if isinstance(expr, ast.Index):
        return ast.Index(_substitute(expr.target, subs), _substitute(expr.index, subs))
    if isinstance(expr, ast.Slice):
        return ast.Slice(
            _substitute(expr.target, subs),
            _substitute(expr.lo, subs) if expr.lo is not None else None,
            _substitute(expr.hi, subs) if expr.hi is not None else None,
        )
    raise RuntimeTypeError(f"cannot rewrite {type(expr).__name__}")
