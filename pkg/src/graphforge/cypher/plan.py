"""Lowering from AST to a tagged logical operator tree.

Plans follow syntactic order: each pattern part anchors at its leftmost
node (Seek when an indexed label+property equality is available, Scan
otherwise) and expands rightward. Later MATCH clauses are evaluated
standalone and joined — HashJoin on shared variables, CartesianProduct
otherwise. Every plan node carries exactly one core-operator tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..errors import UnsupportedFeature
from . import ast
from .ops import ALL_OPERATORS, COLLECT_OPERATOR


@dataclass
class PlanNode:
    tag: str
    children: tuple = ()
    # payload fields set by subclasses

    def own_tags(self):
        return {self.tag}

    def all_tags(self):
        out = set()
        stack = [self]
        while stack:
            node = stack.pop()
            out |= node.own_tags()
            stack.extend(node.children)
        return out


@dataclass
class ScanNode(PlanNode):
    var: str = ""
    label: Optional[str] = None
    props: dict = field(default_factory=dict)


@dataclass
class SeekNode(PlanNode):
    var: str = ""
    label: str = ""
    prop: str = ""
    value: object = None  # ast expression (literal or parameter)
    props: dict = field(default_factory=dict)


@dataclass
class ArgumentNode(PlanNode):
    """Leaf yielding the incoming argument row (correlated subplans)."""


@dataclass
class SingleRowNode(PlanNode):
    """Leaf yielding one empty row (queries with no reading clause)."""


@dataclass
class NodeCheckNode(PlanNode):
    """Filter verifying a bound variable against node-pattern constraints."""

    var: str = ""
    labels: tuple = ()
    props: dict = field(default_factory=dict)


@dataclass
class ExpandNode(PlanNode):
    src_var: str = ""
    rel: ast.RelPat = None
    dst: ast.NodePat = None
    rel_name: str = ""
    dst_name: str = ""
    path_name: Optional[str] = None


@dataclass
class VarExpandNode(PlanNode):
    src_var: str = ""
    rel: ast.RelPat = None
    dst: ast.NodePat = None
    rel_name: str = ""
    dst_name: str = ""
    path_name: Optional[str] = None


@dataclass
class ShortestPathNode(PlanNode):
    src_var: str = ""
    dst_var: str = ""
    rel: ast.RelPat = None
    path_name: Optional[str] = None


@dataclass
class FilterNode(PlanNode):
    predicate: ast.Expr = None
    extra_tags: frozenset = frozenset()

    def own_tags(self):
        return {self.tag} | set(self.extra_tags)


@dataclass
class HashJoinNode(PlanNode):
    on: tuple = ()


@dataclass
class CartesianNode(PlanNode):
    in_clause: bool = False


@dataclass
class OptionalNode(PlanNode):
    subplan: PlanNode = None
    new_vars: tuple = ()

    def own_tags(self):
        return {self.tag} | self.subplan.all_tags()


@dataclass
class UnwindNode(PlanNode):
    expr: ast.Expr = None
    var: str = ""


@dataclass
class ProjectNode(PlanNode):
    items: tuple = ()  # (expr, alias)
    keep_input: bool = False


@dataclass
class AggregateNode(PlanNode):
    keys: tuple = ()  # (expr, alias)
    aggs: tuple = ()  # (expr, alias) where expr is FuncCall/CountStar or wraps one

    def own_tags(self):
        tags = {self.tag}
        for expr, _alias in self.aggs:
            for sub in ast.walk_expr(expr):
                if isinstance(sub, ast.FuncCall) and sub.name == "collect":
                    tags.add(COLLECT_OPERATOR)
        return tags


@dataclass
class DistinctNode(PlanNode):
    pass


@dataclass
class SortNode(PlanNode):
    keys: tuple = ()  # (expr, ascending)


@dataclass
class SkipNode(PlanNode):
    expr: ast.Expr = None
    canonicalize: bool = False


@dataclass
class LimitNode(PlanNode):
    expr: ast.Expr = None
    canonicalize: bool = False


@dataclass
class TopNode(PlanNode):
    keys: tuple = ()
    skip: Optional[ast.Expr] = None
    limit: ast.Expr = None


@dataclass
class UnionNode(PlanNode):
    union_all: bool = False


@dataclass
class CreatePlanNode(PlanNode):
    parts: tuple = ()


@dataclass
class MergePlanNode(PlanNode):
    part: ast.PatternPart = None


@dataclass
class DeletePlanNode(PlanNode):
    exprs: tuple = ()
    detach: bool = False


@dataclass
class SetPlanNode(PlanNode):
    items: tuple = ()  # (Prop target, expr or None for removal)


@dataclass
class ForeachPlanNode(PlanNode):
    var: str = ""
    list_expr: ast.Expr = None
    updates: tuple = ()  # raw mutating AST clauses

    def own_tags(self):
        tags = {self.tag}
        for clause in self.updates:
            tags |= _mutation_clause_tags(clause)
        return tags


def _mutation_clause_tags(clause) -> set:
    if isinstance(clause, ast.CreateClause):
        return {"Create"}
    if isinstance(clause, ast.MergeClause):
        return {"Merge"}
    if isinstance(clause, ast.DeleteClause):
        return {"Delete"}
    if isinstance(clause, (ast.SetClause, ast.RemoveClause)):
        return {"Set"}
    if isinstance(clause, ast.ForeachClause):
        tags = {"Foreach"}
        for c in clause.updates:
            tags |= _mutation_clause_tags(c)
        return tags
    return set()


@dataclass
class LogicalPlan:
    root: PlanNode
    statement: ast.Statement
    read_only: bool
    columns: tuple
    final_ordered: bool

    def tags(self) -> frozenset:
        return frozenset(self.root.all_tags())


# -- lowering ----------------------------------------------------------------


class _Lowerer:
    def __init__(self):
        self.fresh = 0

    def gensym(self, prefix: str) -> str:
        self.fresh += 1
        return f"#{prefix}{self.fresh}"

    # .. pattern parts ..................................................

    def lower_part(
        self,
        plan: Optional[PlanNode],
        part: ast.PatternPart,
        bound: set,
        where_conjuncts: list,
    ) -> PlanNode:
        """Chain one pattern part onto ``plan`` (or start a new chain)."""
        if part.shortest:
            return self.lower_shortest(plan, part, bound, where_conjuncts)
        elements = list(part.elements)
        n0 = elements[0]
        n0_name = n0.var or self.gensym("n")
        if part.var is not None and len(elements) == 1:
            raise UnsupportedFeature("named path over a single node")
        if part.var is not None and len(elements) > 3:
            raise UnsupportedFeature("named path over a multi-relationship pattern")

        if n0.var is not None and n0.var in bound:
            base = plan if plan is not None else ArgumentNode("Argument")
            chain: PlanNode = NodeCheckNode("Filter", (base,), var=n0.var, labels=n0.labels, props=n0.props)
        else:
            anchor = self.make_anchor(n0, n0_name, where_conjuncts)
            if plan is None:
                chain = anchor
            else:
                chain = CartesianNode("CartesianProduct", (plan, anchor), in_clause=True)
        bound.add(n0_name)
        chain = self._absorb_conjuncts(chain, bound, where_conjuncts)

        src_name = n0_name
        for i in range(1, len(elements), 2):
            rel: ast.RelPat = elements[i]
            dst: ast.NodePat = elements[i + 1]
            rel_name = rel.var or self.gensym("r")
            dst_name = dst.var or self.gensym("n")
            _check_match_props(rel.props)
            _check_match_props(dst.props)
            if rel.hops is None:
                chain = ExpandNode(
                    "Expand",
                    (chain,),
                    src_var=src_name,
                    rel=rel,
                    dst=dst,
                    rel_name=rel_name,
                    dst_name=dst_name,
                    path_name=part.var,
                )
            else:
                chain = VarExpandNode(
                    "Repeat" if rel.hops[2] else "VarLengthExpand",
                    (chain,),
                    src_var=src_name,
                    rel=rel,
                    dst=dst,
                    rel_name=rel_name,
                    dst_name=dst_name,
                    path_name=part.var,
                )
            bound.add(rel_name)
            bound.add(dst_name)
            src_name = dst_name
            chain = self._absorb_conjuncts(chain, bound, where_conjuncts)
        if part.var is not None:
            bound.add(part.var)
        return chain

    def _absorb_conjuncts(self, chain: PlanNode, bound: set, conjuncts: list) -> PlanNode:
        """Place WHERE conjuncts as soon as their variables are all bound.

        Semantics-preserving for conjunctions; keeps expansion frontiers
        small. Pattern predicates are left for the clause-level filter.
        """
        if not conjuncts:
            return chain
        ready = []
        for conj in list(conjuncts):
            if any(isinstance(e, ast.PatternPred) for e in ast.walk_expr(conj)):
                continue
            if ast.expr_vars(conj) <= bound:
                ready.append(conj)
                conjuncts.remove(conj)
        if ready:
            chain = FilterNode("Filter", (chain,), predicate=_join_and(ready), extra_tags=frozenset())
        return chain

    def lower_shortest(
        self, plan: Optional[PlanNode], part: ast.PatternPart, bound: set, where_conjuncts=None
    ) -> PlanNode:
        n0, rel, n1 = part.elements
        if rel.hops is None:
            raise UnsupportedFeature("shortestPath over a fixed single hop")
        a_name = n0.var or self.gensym("n")
        b_name = n1.var or self.gensym("n")
        chain = plan
        for pat, name in ((n0, a_name), (n1, b_name)):
            if pat.var is not None and pat.var in bound:
                base = chain if chain is not None else ArgumentNode("Argument")
                chain = NodeCheckNode("Filter", (base,), var=pat.var, labels=pat.labels, props=pat.props)
            else:
                anchor = self.make_anchor(pat, name, where_conjuncts if where_conjuncts is not None else [])
                chain = anchor if chain is None else CartesianNode("CartesianProduct", (chain, anchor), in_clause=True)
            bound.add(name)
            if where_conjuncts:
                chain = self._absorb_conjuncts(chain, bound, where_conjuncts)
        node = ShortestPathNode(
            "ShortestPath", (chain,), src_var=a_name, dst_var=b_name, rel=rel, path_name=part.var
        )
        if part.var:
            bound.add(part.var)
        return node

    def make_anchor(self, pat: ast.NodePat, name: str, where_conjuncts: list) -> PlanNode:
        _check_match_props(pat.props)
        label = pat.labels[0] if pat.labels else None
        props = dict(pat.props)
        if label is not None:
            for prop_name in sorted(props):
                value = props[prop_name]
                if isinstance(value, (ast.Lit, ast.Param)):
                    rest = dict(props)
                    del rest[prop_name]
                    node = SeekNode("Seek", (), var=name, label=label, prop=prop_name, value=value, props=rest)
                    node.extra_labels = pat.labels[1:]  # type: ignore[attr-defined]
                    return node
            # look for `var.prop = literal` conjuncts in WHERE
            for idx, conj in enumerate(where_conjuncts):
                found = _seekable(conj, pat.var)
                if found is not None:
                    prop_name, value = found
                    del where_conjuncts[idx]
                    node = SeekNode("Seek", (), var=name, label=label, prop=prop_name, value=value, props=props)
                    node.extra_labels = pat.labels[1:]  # type: ignore[attr-defined]
                    return node
        node = ScanNode("Scan", (), var=name, label=label, props=props)
        node.extra_labels = pat.labels[1:]  # type: ignore[attr-defined]
        return node

    # .. clauses ........................................................

    def lower_match(self, plan: Optional[PlanNode], clause: ast.MatchClause, visible: set) -> tuple:
        conjuncts = _split_and(clause.where) if clause.where else []
        clause_bound: set = set()
        sub: Optional[PlanNode] = None
        for part in clause.parts:
            sub = self.lower_part(sub, part, clause_bound, conjuncts)
        clause_vars = {v for v in clause_bound if not v.startswith("#")}

        if plan is not None:
            shared = tuple(sorted(visible & clause_vars))
            if shared:
                joined: PlanNode = HashJoinNode("HashJoin", (plan, sub), on=shared)
            else:
                joined = CartesianNode("CartesianProduct", (plan, sub), in_clause=False)
        else:
            joined = sub

        if conjuncts:
            predicate = _join_and(conjuncts)
            extra = _pattern_pred_tags(predicate, visible | clause_vars)
            joined = FilterNode("Filter", (joined,), predicate=predicate, extra_tags=extra)
        return joined, clause_vars

    def lower_optional(self, plan: Optional[PlanNode], clause: ast.MatchClause, visible: set) -> tuple:
        base = plan if plan is not None else SingleRowNode("Argument")
        bound = set(visible)
        sub: Optional[PlanNode] = ArgumentNode("Argument")
        conjuncts = _split_and(clause.where) if clause.where else []
        for part in clause.parts:
            sub = self.lower_part(sub, part, bound, conjuncts)
        if conjuncts:
            predicate = _join_and(conjuncts)
            extra = _pattern_pred_tags(predicate, bound)
            sub = FilterNode("Filter", (sub,), predicate=predicate, extra_tags=extra)
        new_vars = tuple(sorted(v for v in bound - visible if not v.startswith("#")))
        node = OptionalNode("Optional", (base,), subplan=sub, new_vars=new_vars)
        return node, set(new_vars)

    def lower_projection(self, plan: PlanNode, body: ast.ProjectionBody, visible: set) -> tuple:
        has_agg = any(ast.has_aggregate(expr) for expr, _ in body.items)
        aliases = tuple(alias for _, alias in body.items)
        if has_agg:
            keys = tuple((e, a) for e, a in body.items if not ast.has_aggregate(e))
            aggs = tuple((e, a) for e, a in body.items if ast.has_aggregate(e))
            node: PlanNode = AggregateNode("Aggregate", (plan,), keys=keys, aggs=aggs)
            scope_is_aliases = True
        elif body.distinct:
            node = ProjectNode("Project", (plan,), items=tuple(body.items), keep_input=False)
            scope_is_aliases = True
        else:
            node = ProjectNode("Project", (plan,), items=tuple(body.items), keep_input=True)
            scope_is_aliases = False
        if body.distinct:
            node = DistinctNode("Distinct", (node,))

        ordered = bool(body.order_by)
        if ordered and body.limit is not None:
            node = TopNode("Top", (node,), keys=tuple(body.order_by), skip=body.skip, limit=body.limit)
        else:
            if ordered:
                node = SortNode("Sort", (node,), keys=tuple(body.order_by))
            if body.skip is not None:
                node = SkipNode("Skip", (node,), expr=body.skip, canonicalize=not ordered)
            if body.limit is not None:
                node = LimitNode("Limit", (node,), expr=body.limit, canonicalize=not ordered)

        if not scope_is_aliases:
            # narrow to the projected aliases after order/paging used the
            # merged scope
            node = ProjectNode(
                "Project", (node,), items=tuple((ast.Var(a), a) for a in aliases), keep_input=False
            )
        return node, aliases, ordered

    def lower_single(self, query: ast.SingleQuery) -> tuple:
        plan: Optional[PlanNode] = None
        visible: set = set()
        columns: tuple = ()
        ordered = False
        for clause in query.clauses:
            if isinstance(clause, ast.MatchClause):
                if clause.optional:
                    base = plan
                    node, new_vars = self.lower_optional(base, clause, visible)
                    plan = node
                    visible |= new_vars
                else:
                    plan, clause_vars = self.lower_match(plan, clause, visible)
                    visible |= clause_vars
            elif isinstance(clause, ast.UnwindClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                plan = UnwindNode("Unwind", (base,), expr=clause.expr, var=clause.var)
                visible.add(clause.var)
            elif isinstance(clause, ast.WithClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                plan, aliases, _ = self.lower_projection(base, clause.body, visible)
                visible = set(aliases)
                if clause.where is not None:
                    extra = _pattern_pred_tags(clause.where, visible)
                    plan = FilterNode("Filter", (plan,), predicate=clause.where, extra_tags=extra)
            elif isinstance(clause, ast.ReturnClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                plan, columns, ordered = self.lower_projection(base, clause.body, visible)
                visible = set(columns)
            elif isinstance(clause, ast.CreateClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                for part in clause.parts:
                    _check_create_part(part)
                plan = CreatePlanNode("Create", (base,), parts=clause.parts)
                for part in clause.parts:
                    visible |= {v for v in part.variables() if v}
            elif isinstance(clause, ast.MergeClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                plan = MergePlanNode("Merge", (base,), part=clause.part)
                visible |= {v for v in clause.part.variables() if v}
            elif isinstance(clause, ast.DeleteClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                plan = DeletePlanNode("Delete", (base,), exprs=clause.exprs, detach=clause.detach)
            elif isinstance(clause, ast.SetClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                plan = SetPlanNode("Set", (base,), items=tuple((t, e) for t, e in clause.items))
            elif isinstance(clause, ast.RemoveClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                plan = SetPlanNode("Set", (base,), items=tuple((t, None) for t in clause.items))
            elif isinstance(clause, ast.ForeachClause):
                base = plan if plan is not None else SingleRowNode("Argument")
                plan = ForeachPlanNode(
                    "Foreach", (base,), var=clause.var, list_expr=clause.list_expr, updates=clause.updates
                )
            else:  # pragma: no cover
                raise UnsupportedFeature(type(clause).__name__)
        return plan, columns, ordered


def _check_match_props(props: dict):
    for value in props.values():
        if not isinstance(value, (ast.Lit, ast.Param)):
            raise UnsupportedFeature("computed property value in a match pattern")


def _check_create_part(part: ast.PatternPart):
    if part.shortest:
        raise UnsupportedFeature("shortestPath in CREATE")
    for rel in part.rel_pats():
        if rel.hops is not None:
            raise UnsupportedFeature("variable-length relationship in CREATE")
        if rel.direction == "both":
            raise UnsupportedFeature("undirected relationship in CREATE")
        if not rel.types or len(rel.types) != 1:
            raise UnsupportedFeature("CREATE relationship requires exactly one type")


def _split_and(expr: ast.Expr) -> list:
    if isinstance(expr, ast.Binary) and expr.op == "AND":
        return _split_and(expr.left) + _split_and(expr.right)
    return [expr]


def _join_and(conjuncts: list) -> ast.Expr:
    expr = conjuncts[0]
    for conj in conjuncts[1:]:
        expr = ast.Binary("AND", expr, conj)
    return expr


def _seekable(conj: ast.Expr, var: Optional[str]):
    """Match `var.prop = literal/param` (either side) for the anchor var."""
    if var is None or not isinstance(conj, ast.Binary) or conj.op != "=":
        return None
    for lhs, rhs in ((conj.left, conj.right), (conj.right, conj.left)):
        if (
            isinstance(lhs, ast.Prop)
            and isinstance(lhs.target, ast.Var)
            and lhs.target.name == var
            and isinstance(rhs, (ast.Lit, ast.Param))
        ):
            return lhs.name, rhs
    return None


def _pattern_pred_tags(expr: ast.Expr, bound: set) -> frozenset:
    tags: set = set()

    def walk(node, negated):
        if isinstance(node, ast.Unary) and node.op == "NOT":
            walk(node.operand, not negated)
            return
        if isinstance(node, ast.PatternPred):
            tags.update({"Apply", "Argument"})
            if negated:
                tags.add("Anti")
            part = node.part
            if len(part.elements) == 3:
                a, _, b = part.elements
                if a.var in bound and b.var in bound:
                    tags.add("Triadic")
            return
        for child in ast.children_of(node):
            walk(child, negated)

    walk(expr, False)
    return frozenset(tags)


def plan_statement(stmt: ast.Statement) -> LogicalPlan:
    """Lower a parsed statement into its logical plan."""
    lowerer = _Lowerer()
    plans = []
    columns: tuple = ()
    ordered = False
    for i, query in enumerate(stmt.queries):
        root, cols, is_ordered = lowerer.lower_single(query)
        if i == 0:
            columns = cols
            ordered = is_ordered
        elif tuple(cols) != tuple(columns):
            raise UnsupportedFeature("UNION parts must share column names")
        plans.append(root)
    if len(plans) == 1:
        root = plans[0]
    else:
        root = plans[0]
        for i, nxt in enumerate(plans[1:]):
            root = UnionNode("Union", (root, nxt), union_all=stmt.union_alls[i])
        ordered = False
    plan = LogicalPlan(
        root=root,
        statement=stmt,
        read_only=not stmt.is_mutating(),
        columns=columns,
        final_ordered=ordered,
    )
    for tag in plan.tags():
        assert tag in ALL_OPERATORS, tag
    return plan
