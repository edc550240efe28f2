"""AST node definitions for the supported Cypher subset."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Lit(Expr):
    value: object


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Prop(Expr):
    target: Expr
    name: str


@dataclass(frozen=True)
class ListLit(Expr):
    items: tuple


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "-" | "+" | "NOT"
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # arithmetic, comparison, AND/OR/XOR, IN
    left: Expr
    right: Expr


@dataclass(frozen=True)
class StringOp(Expr):
    op: str  # STARTS | ENDS | CONTAINS
    left: Expr
    right: Expr


@dataclass(frozen=True)
class IsNull(Expr):
    target: Expr
    negated: bool


@dataclass(frozen=True)
class FuncCall(Expr):
    name: str  # lowercased
    args: tuple
    distinct: bool = False


@dataclass(frozen=True)
class CountStar(Expr):
    pass


@dataclass(frozen=True)
class Index(Expr):
    target: Expr
    index: Expr


@dataclass(frozen=True)
class Slice(Expr):
    target: Expr
    lo: Optional[Expr]
    hi: Optional[Expr]


@dataclass(frozen=True)
class PatternPred(Expr):
    """A relationship pattern used as a boolean predicate in WHERE."""

    part: "PatternPart"


AGG_FUNCS = frozenset({"count", "sum", "min", "max", "avg", "collect"})


def has_aggregate(expr: Expr) -> bool:
    if isinstance(expr, CountStar):
        return True
    if isinstance(expr, FuncCall) and expr.name in AGG_FUNCS:
        return True
    return any(has_aggregate(child) for child in children_of(expr))


def children_of(expr: Expr):
    if isinstance(expr, (Lit, Param, Var, CountStar, PatternPred)):
        return ()
    if isinstance(expr, Prop):
        return (expr.target,)
    if isinstance(expr, ListLit):
        return expr.items
    if isinstance(expr, Unary):
        return (expr.operand,)
    if isinstance(expr, (Binary, StringOp)):
        return (expr.left, expr.right)
    if isinstance(expr, IsNull):
        return (expr.target,)
    if isinstance(expr, FuncCall):
        return expr.args
    if isinstance(expr, Index):
        return (expr.target, expr.index)
    if isinstance(expr, Slice):
        out = [expr.target]
        if expr.lo is not None:
            out.append(expr.lo)
        if expr.hi is not None:
            out.append(expr.hi)
        return tuple(out)
    raise TypeError(f"unknown expression {expr!r}")


def walk_expr(expr: Expr):
    yield expr
    for child in children_of(expr):
        yield from walk_expr(child)


def expr_vars(expr: Expr):
    """Variables referenced anywhere in the expression (incl. pattern preds)."""
    out = set()
    for node in walk_expr(expr):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, PatternPred):
            out |= {e.var for e in node.part.elements if e.var}
    return out


# -- patterns ----------------------------------------------------------------


@dataclass(frozen=True)
class NodePat:
    var: Optional[str]
    labels: tuple
    props: dict = field(default_factory=dict, hash=False, compare=False)


@dataclass(frozen=True)
class RelPat:
    var: Optional[str]
    types: tuple
    direction: str  # "out" | "in" | "both"
    props: dict = field(default_factory=dict, hash=False, compare=False)
    # None for single hop; (min, max, fixed) for *-patterns where fixed means
    # the literal was written as a single count (*k)
    hops: Optional[tuple] = None


@dataclass(frozen=True)
class PatternPart:
    var: Optional[str]
    shortest: bool
    elements: tuple  # alternating NodePat / RelPat, odd length

    def node_pats(self):
        return self.elements[0::2]

    def rel_pats(self):
        return self.elements[1::2]

    def variables(self):
        return {e.var for e in self.elements if e.var} | ({self.var} if self.var else set())


# -- clauses -----------------------------------------------------------------


@dataclass(frozen=True)
class Clause:
    pass


@dataclass(frozen=True)
class MatchClause(Clause):
    parts: tuple
    where: Optional[Expr]
    optional: bool


@dataclass(frozen=True)
class UnwindClause(Clause):
    expr: Expr
    var: str


@dataclass(frozen=True)
class ProjectionBody:
    items: tuple  # of (Expr, alias str)
    distinct: bool
    order_by: tuple  # of (Expr, ascending bool)
    skip: Optional[Expr]
    limit: Optional[Expr]


@dataclass(frozen=True)
class WithClause(Clause):
    body: ProjectionBody
    where: Optional[Expr]


@dataclass(frozen=True)
class ReturnClause(Clause):
    body: ProjectionBody


@dataclass(frozen=True)
class CreateClause(Clause):
    parts: tuple


@dataclass(frozen=True)
class MergeClause(Clause):
    part: PatternPart


@dataclass(frozen=True)
class DeleteClause(Clause):
    exprs: tuple
    detach: bool


@dataclass(frozen=True)
class SetClause(Clause):
    items: tuple  # of (Prop, Expr)


@dataclass(frozen=True)
class RemoveClause(Clause):
    items: tuple  # of Prop


@dataclass(frozen=True)
class ForeachClause(Clause):
    var: str
    list_expr: Expr
    updates: tuple  # of mutating Clause


MUTATING_CLAUSES = (CreateClause, MergeClause, DeleteClause, SetClause, RemoveClause, ForeachClause)


@dataclass(frozen=True)
class SingleQuery:
    clauses: tuple

    def is_mutating(self) -> bool:
        return any(isinstance(c, MUTATING_CLAUSES) for c in self.clauses)


@dataclass(frozen=True)
class Statement:
    """One parsed statement: a query, optionally a UNION chain."""

    queries: tuple  # of SingleQuery
    union_alls: tuple  # of bool, len == len(queries) - 1
    source: str = ""

    def is_mutating(self) -> bool:
        return any(q.is_mutating() for q in self.queries)
