"""Expression evaluation with Cypher null semantics.

Shared by the planned executor and the brute-force reference: expression
semantics are defined once, while pattern matching — the behavior under
test — stays separate. Pattern predicates are delegated to the caller
through ``EvalContext.check_pattern``.
"""

from __future__ import annotations

import math

from ..errors import RuntimeTypeError
from . import ast
from .parser import expr_text
from .table import EdgeRef, NodeRef, PathVal


class EvalContext:
    def __init__(self, snapshot, params=None, check_pattern=None):
        self.snapshot = snapshot
        self.params = params or {}
        self.check_pattern = check_pattern  # (PatternPart, row) -> bool


def is_numeric(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def cypher_equals(a, b):
    """Ternary equality: True, False, or None for unknown."""
    if a is None or b is None:
        return None
    a_bool, b_bool = isinstance(a, bool), isinstance(b, bool)
    if a_bool or b_bool:
        return a is b if a_bool and b_bool else False
    if is_numeric(a) and is_numeric(b):
        return bool(a == b)
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return False
        result = True
        for x, y in zip(a, b):
            eq = cypher_equals(x, y)
            if eq is False:
                return False
            if eq is None:
                result = None
        return result
    for kind in (NodeRef, EdgeRef, PathVal):
        if isinstance(a, kind) or isinstance(b, kind):
            return isinstance(a, kind) and isinstance(b, kind) and a == b
    return False


def cypher_less(a, b, expr=None):
    if is_numeric(a) and is_numeric(b):
        return bool(a < b)
    if isinstance(a, str) and isinstance(b, str):
        return a < b
    if isinstance(a, bool) and isinstance(b, bool):
        return a < b
    raise RuntimeTypeError(
        f"cannot order {type(a).__name__} against {type(b).__name__}",
        expr_text(expr) if expr is not None else None,
    )


def _and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _xor(a, b):
    if a is None or b is None:
        return None
    return bool(a) != bool(b)


def _truth(value, expr):
    if value is None or isinstance(value, bool):
        return value
    raise RuntimeTypeError("predicate did not evaluate to a boolean", expr_text(expr))


def evaluate(expr, row, ctx: EvalContext):
    if isinstance(expr, ast.Lit):
        return expr.value
    if isinstance(expr, ast.Param):
        try:
            return ctx.params[expr.name]
        except KeyError:
            raise RuntimeTypeError(f"missing parameter ${expr.name}") from None
    if isinstance(expr, ast.Var):
        try:
            return row[expr.name]
        except KeyError:
            raise RuntimeTypeError(f"undefined variable {expr.name}") from None
    if isinstance(expr, ast.Prop):
        target = evaluate(expr.target, row, ctx)
        if target is None:
            return None
        if isinstance(target, NodeRef):
            return ctx.snapshot.node(target.id).props.get(expr.name)
        if isinstance(target, EdgeRef):
            return ctx.snapshot.edge(target.id).props.get(expr.name)
        raise RuntimeTypeError("property access on a non-entity", expr_text(expr))
    if isinstance(expr, ast.ListLit):
        return [evaluate(item, row, ctx) for item in expr.items]
    if isinstance(expr, ast.Unary):
        if expr.op == "NOT":
            val = _truth(evaluate(expr.operand, row, ctx), expr)
            return None if val is None else not val
        val = evaluate(expr.operand, row, ctx)
        if val is None:
            return None
        if not is_numeric(val):
            raise RuntimeTypeError("unary minus on a non-number", expr_text(expr))
        return -val if expr.op == "-" else val
    if isinstance(expr, ast.Binary):
        return _binary(expr, row, ctx)
    if isinstance(expr, ast.StringOp):
        left = evaluate(expr.left, row, ctx)
        right = evaluate(expr.right, row, ctx)
        if left is None or right is None:
            return None
        if not isinstance(left, str) or not isinstance(right, str):
            raise RuntimeTypeError("string predicate on non-text operands", expr_text(expr))
        if expr.op == "STARTS":
            return left.startswith(right)
        if expr.op == "ENDS":
            return left.endswith(right)
        return right in left
    if isinstance(expr, ast.IsNull):
        value = evaluate(expr.target, row, ctx)
        return (value is not None) if expr.negated else (value is None)
    if isinstance(expr, ast.FuncCall):
        return _function(expr, row, ctx)
    if isinstance(expr, ast.Index):
        target = evaluate(expr.target, row, ctx)
        idx = evaluate(expr.index, row, ctx)
        if target is None or idx is None:
            return None
        if not isinstance(target, list) or isinstance(idx, bool) or not isinstance(idx, int):
            raise RuntimeTypeError("indexing requires a list and an integer", expr_text(expr))
        if -len(target) <= idx < len(target):
            return target[idx]
        return None
    if isinstance(expr, ast.Slice):
        target = evaluate(expr.target, row, ctx)
        if target is None:
            return None
        if not isinstance(target, list):
            raise RuntimeTypeError("slicing requires a list", expr_text(expr))
        lo = evaluate(expr.lo, row, ctx) if expr.lo is not None else None
        hi = evaluate(expr.hi, row, ctx) if expr.hi is not None else None
        if (expr.lo is not None and lo is None) or (expr.hi is not None and hi is None):
            return None
        return target[lo:hi]
    if isinstance(expr, ast.PatternPred):
        if ctx.check_pattern is None:
            raise RuntimeTypeError("pattern predicate in a value-only context")
        return ctx.check_pattern(expr.part, row)
    if isinstance(expr, ast.CountStar):
        raise RuntimeTypeError("count(*) outside an aggregating projection")
    raise RuntimeTypeError(f"cannot evaluate {type(expr).__name__}")


def _binary(expr: ast.Binary, row, ctx):
    op = expr.op
    if op in ("AND", "OR", "XOR"):
        left = _truth(evaluate(expr.left, row, ctx), expr)
        # short-circuit where three-valued logic allows it
        if op == "AND" and left is False:
            return False
        if op == "OR" and left is True:
            return True
        right = _truth(evaluate(expr.right, row, ctx), expr)
        return {"AND": _and, "OR": _or, "XOR": _xor}[op](left, right)

    left = evaluate(expr.left, row, ctx)
    right = evaluate(expr.right, row, ctx)
    if op == "=":
        return cypher_equals(left, right)
    if op == "<>":
        eq = cypher_equals(left, right)
        return None if eq is None else not eq
    if op in ("<", "<=", ">", ">="):
        if left is None or right is None:
            return None
        if op == "<":
            return cypher_less(left, right, expr)
        if op == ">":
            return cypher_less(right, left, expr)
        if op == "<=":
            return not cypher_less(right, left, expr)
        return not cypher_less(left, right, expr)
    if op == "IN":
        if right is None:
            return None
        if not isinstance(right, list):
            raise RuntimeTypeError("IN requires a list", expr_text(expr))
        if left is None:
            return None
        saw_null = False
        for item in right:
            eq = cypher_equals(left, item)
            if eq is True:
                return True
            if eq is None:
                saw_null = True
        return None if saw_null else False
    # arithmetic
    if left is None or right is None:
        return None
    if op == "+":
        if isinstance(left, str) and isinstance(right, str):
            return left + right
        if isinstance(left, list) and isinstance(right, list):
            return left + right
        _require_numbers(left, right, expr)
        return left + right
    _require_numbers(left, right, expr)
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if right == 0:
            raise RuntimeTypeError("division by zero", expr_text(expr))
        if isinstance(left, int) and isinstance(right, int):
            q = abs(left) // abs(right)
            return q if (left >= 0) == (right >= 0) else -q
        return left / right
    if op == "%":
        if right == 0:
            raise RuntimeTypeError("modulo by zero", expr_text(expr))
        # sign follows the dividend, as in mainstream Cypher runtimes
        if isinstance(left, int) and isinstance(right, int):
            return int(math.fmod(left, right))
        return math.fmod(left, right)
    raise RuntimeTypeError(f"unknown operator {op}", expr_text(expr))


def _require_numbers(left, right, expr):
    if not (is_numeric(left) and is_numeric(right)):
        raise RuntimeTypeError(
            f"arithmetic on {type(left).__name__} and {type(right).__name__}",
            expr_text(expr),
        )


def _function(expr: ast.FuncCall, row, ctx):
    name = expr.name
    if name in ast.AGG_FUNCS:
        raise RuntimeTypeError(f"aggregate {name}() outside an aggregating projection")
    args = [evaluate(a, row, ctx) for a in expr.args]

    def one():
        if len(args) != 1:
            raise RuntimeTypeError(f"{name}() takes one argument")
        return args[0]

    if name == "id":
        val = one()
        if val is None:
            return None
        if isinstance(val, (NodeRef, EdgeRef)):
            return val.id
        raise RuntimeTypeError("id() requires an entity", expr_text(expr))
    if name == "labels":
        val = one()
        if val is None:
            return None
        if isinstance(val, NodeRef):
            return list(ctx.snapshot.node(val.id).labels)
        raise RuntimeTypeError("labels() requires a node", expr_text(expr))
    if name == "type":
        val = one()
        if val is None:
            return None
        if isinstance(val, EdgeRef):
            return ctx.snapshot.edge(val.id).rel_type
        raise RuntimeTypeError("type() requires a relationship", expr_text(expr))
    if name == "size":
        val = one()
        if val is None:
            return None
        if isinstance(val, (list, str)):
            return len(val)
        raise RuntimeTypeError("size() requires a list or string", expr_text(expr))
    if name == "length":
        val = one()
        if val is None:
            return None
        if isinstance(val, PathVal):
            return val.length()
        if isinstance(val, list):
            return len(val)
        raise RuntimeTypeError("length() requires a path", expr_text(expr))
    if name == "nodes":
        val = one()
        if val is None:
            return None
        if isinstance(val, PathVal):
            return [NodeRef(n) for n in val.nodes]
        raise RuntimeTypeError("nodes() requires a path", expr_text(expr))
    if name == "relationships":
        val = one()
        if val is None:
            return None
        if isinstance(val, PathVal):
            return [EdgeRef(e) for e in val.edges]
        raise RuntimeTypeError("relationships() requires a path", expr_text(expr))
    if name == "coalesce":
        for val in args:
            if val is not None:
                return val
        return None
    if name == "abs":
        val = one()
        if val is None:
            return None
        if not is_numeric(val):
            raise RuntimeTypeError("abs() requires a number", expr_text(expr))
        return abs(val)
    if name == "tointeger":
        val = one()
        if val is None:
            return None
        if isinstance(val, bool):
            raise RuntimeTypeError("toInteger() on a boolean", expr_text(expr))
        if isinstance(val, int):
            return int(val)
        if isinstance(val, float):
            return int(val)
        if isinstance(val, str):
            try:
                return int(val.strip())
            except ValueError:
                try:
                    return int(float(val.strip()))
                except ValueError:
                    return None
        raise RuntimeTypeError("toInteger() requires number or text", expr_text(expr))
    if name == "tofloat":
        val = one()
        if val is None:
            return None
        if isinstance(val, bool):
            raise RuntimeTypeError("toFloat() on a boolean", expr_text(expr))
        if is_numeric(val):
            return float(val)
        if isinstance(val, str):
            try:
                return float(val.strip())
            except ValueError:
                return None
        raise RuntimeTypeError("toFloat() requires number or text", expr_text(expr))
    if name == "tostring":
        val = one()
        if val is None:
            return None
        if isinstance(val, bool):
            return "true" if val else "false"
        if isinstance(val, (int, float, str)):
            return str(val)
        raise RuntimeTypeError("toString() requires a scalar", expr_text(expr))
    if name == "head":
        val = one()
        if val is None:
            return None
        if not isinstance(val, list):
            raise RuntimeTypeError("head() requires a list", expr_text(expr))
        return val[0] if val else None
    if name == "last":
        val = one()
        if val is None:
            return None
        if not isinstance(val, list):
            raise RuntimeTypeError("last() requires a list", expr_text(expr))
        return val[-1] if val else None
    raise RuntimeTypeError(f"unknown function {name}()", expr_text(expr))
