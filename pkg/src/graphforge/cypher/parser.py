"""Recursive-descent parser for the Cypher subset.

Produces the AST in :mod:`graphforge.cypher.ast`. Anything syntactically
valid Cypher but outside the subset raises UnsupportedFeature; malformed
input raises CypherSyntaxError with position and the expected-token set.
"""

from __future__ import annotations

from ..errors import CypherSyntaxError, UnsupportedFeature
from . import ast
from .lexer import Token, tokenize

DEFAULT_VARLEN_MAX = 8

CLAUSE_KEYWORDS = {
    "MATCH",
    "OPTIONAL",
    "UNWIND",
    "WITH",
    "RETURN",
    "CREATE",
    "MERGE",
    "DELETE",
    "DETACH",
    "SET",
    "REMOVE",
    "FOREACH",
    "UNION",
    "WHERE",
    "ORDER",
    "SKIP",
    "LIMIT",
    "AND",
    "OR",
    "XOR",
    "NOT",
    "AS",
    "IN",
    "IS",
    "STARTS",
    "ENDS",
    "CONTAINS",
    "ASC",
    "DESC",
    "ASCENDING",
    "DESCENDING",
    "DISTINCT",
    "ALL",
    "NULL",
    "TRUE",
    "FALSE",
    "EXISTS",
    "CASE",
    "ON",
}

UNSUPPORTED_CLAUSES = {"CALL", "LOAD", "USE", "SHOW", "START", "USING", "PROFILE", "EXPLAIN"}


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.toks = tokenize(source)
        self.pos = 0

    # -- token plumbing ------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def advance(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at_punct(self, value: str) -> bool:
        tok = self.peek()
        return tok.kind == "PUNCT" and tok.value == value

    def at_kw(self, word: str) -> bool:
        return self.peek().is_kw(word)

    def take_punct(self, value: str) -> bool:
        if self.at_punct(value):
            self.advance()
            return True
        return False

    def take_kw(self, word: str) -> bool:
        if self.at_kw(word):
            self.advance()
            return True
        return False

    def expect_punct(self, value: str) -> Token:
        if not self.at_punct(value):
            self.fail(f"expected {value!r}", expected=(value,))
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            self.fail(f"expected {word}", expected=(word,))
        return self.advance()

    def expect_name(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != "NAME":
            self.fail(f"expected {what}", expected=(what,))
        self.advance()
        return tok.value

    def fail(self, message: str, expected=()):
        tok = self.peek()
        raise CypherSyntaxError(
            f"{message}, found {tok.value!r}" if tok.kind != "EOF" else f"{message}, found end of input",
            tok.line,
            tok.col,
            expected,
        )

    # -- statement -----------------------------------------------------

    def parse_statement(self) -> ast.Statement:
        queries = [self.parse_single_query()]
        union_alls = []
        while self.at_kw("UNION"):
            self.advance()
            union_alls.append(self.take_kw("ALL"))
            queries.append(self.parse_single_query())
        tok = self.peek()
        if tok.kind != "EOF":
            self.fail("expected end of statement or UNION", expected=("UNION", "end of input"))
        stmt = ast.Statement(tuple(queries), tuple(union_alls), source=self.source)
        _validate_statement(stmt)
        return stmt

    def parse_single_query(self) -> ast.SingleQuery:
        clauses = []
        while True:
            tok = self.peek()
            if tok.kind == "EOF" or tok.is_kw("UNION"):
                break
            if tok.kind != "NAME":
                self.fail("expected a clause keyword", expected=sorted({"MATCH", "RETURN", "CREATE"}))
            word = tok.value.upper()
            if word in UNSUPPORTED_CLAUSES:
                raise UnsupportedFeature(word)
            if word == "MATCH":
                self.advance()
                clauses.append(self.parse_match(optional=False))
            elif word == "OPTIONAL":
                self.advance()
                self.expect_kw("MATCH")
                clauses.append(self.parse_match(optional=True))
            elif word == "UNWIND":
                self.advance()
                expr = self.parse_expression()
                self.expect_kw("AS")
                clauses.append(ast.UnwindClause(expr, self.expect_name("alias")))
            elif word == "WITH":
                self.advance()
                body = self.parse_projection_body()
                where = self.parse_expression() if self.take_kw("WHERE") else None
                clauses.append(ast.WithClause(body, where))
            elif word == "RETURN":
                self.advance()
                clauses.append(ast.ReturnClause(self.parse_projection_body()))
                break
            elif word == "CREATE":
                self.advance()
                parts = [self.parse_pattern_part(allow_named=False)]
                while self.take_punct(","):
                    parts.append(self.parse_pattern_part(allow_named=False))
                clauses.append(ast.CreateClause(tuple(parts)))
            elif word == "MERGE":
                self.advance()
                part = self.parse_pattern_part(allow_named=False)
                if self.at_kw("ON"):
                    raise UnsupportedFeature("MERGE ON CREATE / ON MATCH")
                clauses.append(ast.MergeClause(part))
            elif word in ("DELETE", "DETACH"):
                detach = word == "DETACH"
                self.advance()
                if detach:
                    self.expect_kw("DELETE")
                exprs = [self.parse_expression()]
                while self.take_punct(","):
                    exprs.append(self.parse_expression())
                clauses.append(ast.DeleteClause(tuple(exprs), detach))
            elif word == "SET":
                self.advance()
                clauses.append(self.parse_set())
            elif word == "REMOVE":
                self.advance()
                items = [self.parse_property_ref()]
                while self.take_punct(","):
                    items.append(self.parse_property_ref())
                clauses.append(ast.RemoveClause(tuple(items)))
            elif word == "FOREACH":
                self.advance()
                clauses.append(self.parse_foreach())
            elif word == "CASE":
                raise UnsupportedFeature("CASE expression")
            else:
                self.fail(
                    "expected a clause keyword",
                    expected=("MATCH", "OPTIONAL MATCH", "UNWIND", "WITH", "RETURN", "CREATE", "MERGE", "DELETE", "SET", "REMOVE", "FOREACH"),
                )
        if not clauses:
            self.fail("empty query", expected=("MATCH", "RETURN", "CREATE"))
        return ast.SingleQuery(tuple(clauses))

    def parse_match(self, optional: bool) -> ast.MatchClause:
        parts = [self.parse_pattern_part(allow_named=True)]
        while self.take_punct(","):
            parts.append(self.parse_pattern_part(allow_named=True))
        where = self.parse_expression() if self.take_kw("WHERE") else None
        return ast.MatchClause(tuple(parts), where, optional)

    def parse_set(self) -> ast.SetClause:
        items = []
        while True:
            target = self.parse_property_ref(allow_label_set=True)
            self.expect_punct("=")
            items.append((target, self.parse_expression()))
            if not self.take_punct(","):
                break
        return ast.SetClause(tuple(items))

    def parse_property_ref(self, allow_label_set: bool = False) -> ast.Prop:
        name = self.expect_name("variable")
        if self.at_punct(":"):
            raise UnsupportedFeature("SET/REMOVE label")
        self.expect_punct(".")
        prop = self.expect_name("property name")
        return ast.Prop(ast.Var(name), prop)

    def parse_foreach(self) -> ast.ForeachClause:
        self.expect_punct("(")
        var = self.expect_name("loop variable")
        self.expect_kw("IN")
        list_expr = self.parse_expression()
        self.expect_punct("|")
        updates = []
        while not self.at_punct(")"):
            tok = self.peek()
            if tok.kind != "NAME":
                self.fail("expected an update clause", expected=("CREATE", "SET", "DELETE", "REMOVE", "FOREACH"))
            word = tok.value.upper()
            self.advance()
            if word == "CREATE":
                parts = [self.parse_pattern_part(allow_named=False)]
                while self.take_punct(","):
                    parts.append(self.parse_pattern_part(allow_named=False))
                updates.append(ast.CreateClause(tuple(parts)))
            elif word == "MERGE":
                updates.append(ast.MergeClause(self.parse_pattern_part(allow_named=False)))
            elif word in ("DELETE", "DETACH"):
                detach = word == "DETACH"
                if detach:
                    self.expect_kw("DELETE")
                exprs = [self.parse_expression()]
                while self.take_punct(","):
                    exprs.append(self.parse_expression())
                updates.append(ast.DeleteClause(tuple(exprs), detach))
            elif word == "SET":
                updates.append(self.parse_set())
            elif word == "REMOVE":
                items = [self.parse_property_ref()]
                while self.take_punct(","):
                    items.append(self.parse_property_ref())
                updates.append(ast.RemoveClause(tuple(items)))
            elif word == "FOREACH":
                updates.append(self.parse_foreach())
            else:
                self.fail("expected an update clause", expected=("CREATE", "SET", "DELETE", "REMOVE", "FOREACH"))
        self.expect_punct(")")
        if not updates:
            self.fail("FOREACH requires at least one update clause", expected=("CREATE", "SET", "DELETE"))
        return ast.ForeachClause(var, list_expr, tuple(updates))

    # -- projections ----------------------------------------------------

    def parse_projection_body(self) -> ast.ProjectionBody:
        distinct = self.take_kw("DISTINCT")
        if self.at_punct("*"):
            raise UnsupportedFeature("RETURN *")
        items = []
        while True:
            expr = self.parse_expression()
            alias = self.expect_name("alias") if self.take_kw("AS") else expr_text(expr)
            items.append((expr, alias))
            if not self.take_punct(","):
                break
        order_by = []
        if self.take_kw("ORDER"):
            self.expect_kw("BY")
            while True:
                key = self.parse_expression()
                asc = True
                if self.take_kw("ASC") or self.take_kw("ASCENDING"):
                    asc = True
                elif self.take_kw("DESC") or self.take_kw("DESCENDING"):
                    asc = False
                order_by.append((key, asc))
                if not self.take_punct(","):
                    break
        skip = self.parse_expression() if self.take_kw("SKIP") else None
        limit = self.parse_expression() if self.take_kw("LIMIT") else None
        return ast.ProjectionBody(tuple(items), distinct, tuple(order_by), skip, limit)

    # -- patterns --------------------------------------------------------

    def parse_pattern_part(self, allow_named: bool) -> ast.PatternPart:
        var = None
        if (
            allow_named
            and self.peek().kind == "NAME"
            and self.peek().value.upper() not in CLAUSE_KEYWORDS
            and self.peek(1).kind == "PUNCT"
            and self.peek(1).value == "="
        ):
            var = self.advance().value
            self.advance()
        shortest = False
        if self.peek().kind == "NAME" and self.peek().value.lower() in ("shortestpath", "allshortestpaths"):
            if self.peek().value.lower() == "allshortestpaths":
                raise UnsupportedFeature("allShortestPaths")
            self.advance()
            shortest = True
            self.expect_punct("(")
            inner = self.parse_pattern_elements()
            self.expect_punct(")")
            if len(inner) != 3:
                self.fail("shortestPath requires a single relationship pattern")
            return ast.PatternPart(var, True, inner)
        elements = self.parse_pattern_elements()
        return ast.PatternPart(var, shortest, elements)

    def parse_pattern_elements(self) -> tuple:
        elements = [self.parse_node_pattern()]
        while self.at_punct("<") or self.at_punct("-"):
            rel = self.parse_rel_pattern()
            node = self.parse_node_pattern()
            elements.extend([rel, node])
        return tuple(elements)

    def parse_node_pattern(self) -> ast.NodePat:
        self.expect_punct("(")
        var = None
        if self.peek().kind == "NAME":
            var = self.advance().value
        labels = []
        while self.take_punct(":"):
            labels.append(self.expect_name("label"))
        props = self.parse_map_literal() if self.at_punct("{") else {}
        self.expect_punct(")")
        return ast.NodePat(var, tuple(labels), props)

    def parse_rel_pattern(self) -> ast.RelPat:
        left = self.take_punct("<")
        self.expect_punct("-")
        var = None
        types: list = []
        props: dict = {}
        hops = None
        if self.take_punct("["):
            if self.peek().kind == "NAME" and not self.at_punct(":"):
                var = self.advance().value
            if self.take_punct(":"):
                types.append(self.expect_name("relationship type"))
                while self.take_punct("|"):
                    self.take_punct(":")
                    types.append(self.expect_name("relationship type"))
            if self.take_punct("*"):
                lo = hi = None
                fixed = False
                if self.peek().kind == "INT":
                    lo = self.advance().value
                    fixed = True
                if self.take_punct(".."):
                    fixed = False
                    hi = self.advance().value if self.peek().kind == "INT" else None
                if lo is None:
                    lo_v = 1
                elif fixed:
                    lo_v = lo
                else:
                    lo_v = lo
                hi_v = lo if fixed and lo is not None else (hi if hi is not None else DEFAULT_VARLEN_MAX)
                hops = (lo_v, hi_v, fixed and lo is not None)
            if self.at_punct("{"):
                props = self.parse_map_literal()
            self.expect_punct("]")
        self.expect_punct("-")
        right = self.take_punct(">")
        if left and right:
            self.fail("relationship cannot point both ways")
        direction = "in" if left else ("out" if right else "both")
        return ast.RelPat(var, tuple(types), direction, props, hops)

    def parse_map_literal(self) -> dict:
        self.expect_punct("{")
        out = {}
        if not self.at_punct("}"):
            while True:
                key = self.expect_name("property name")
                self.expect_punct(":")
                out[key] = self.parse_expression()
                if not self.take_punct(","):
                    break
        self.expect_punct("}")
        return out

    # -- expressions ------------------------------------------------------

    def parse_expression(self) -> ast.Expr:
        return self.parse_or()

    def parse_or(self) -> ast.Expr:
        left = self.parse_xor()
        while self.at_kw("OR"):
            self.advance()
            left = ast.Binary("OR", left, self.parse_xor())
        return left

    def parse_xor(self) -> ast.Expr:
        left = self.parse_and()
        while self.at_kw("XOR"):
            self.advance()
            left = ast.Binary("XOR", left, self.parse_and())
        return left

    def parse_and(self) -> ast.Expr:
        left = self.parse_not()
        while self.at_kw("AND"):
            self.advance()
            left = ast.Binary("AND", left, self.parse_not())
        return left

    def parse_not(self) -> ast.Expr:
        if self.take_kw("NOT"):
            return ast.Unary("NOT", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> ast.Expr:
        left = self.parse_additive()
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.value in ("=", "<>", "<", "<=", ">", ">="):
            self.advance()
            return ast.Binary(tok.value, left, self.parse_additive())
        if self.at_kw("IN"):
            self.advance()
            return ast.Binary("IN", left, self.parse_additive())
        if self.at_kw("STARTS"):
            self.advance()
            self.expect_kw("WITH")
            return ast.StringOp("STARTS", left, self.parse_additive())
        if self.at_kw("ENDS"):
            self.advance()
            self.expect_kw("WITH")
            return ast.StringOp("ENDS", left, self.parse_additive())
        if self.at_kw("CONTAINS"):
            self.advance()
            return ast.StringOp("CONTAINS", left, self.parse_additive())
        if self.at_kw("IS"):
            self.advance()
            negated = self.take_kw("NOT")
            self.expect_kw("NULL")
            return ast.IsNull(left, negated)
        return left

    def parse_additive(self) -> ast.Expr:
        left = self.parse_multiplicative()
        while self.peek().kind == "PUNCT" and self.peek().value in ("+", "-"):
            op = self.advance().value
            left = ast.Binary(op, left, self.parse_multiplicative())
        return left

    def parse_multiplicative(self) -> ast.Expr:
        left = self.parse_unary()
        while self.peek().kind == "PUNCT" and self.peek().value in ("*", "/", "%"):
            op = self.advance().value
            left = ast.Binary(op, left, self.parse_unary())
        return left

    def parse_unary(self) -> ast.Expr:
        if self.at_punct("-"):
            self.advance()
            return ast.Unary("-", self.parse_unary())
        if self.at_punct("+"):
            self.advance()
            return ast.Unary("+", self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> ast.Expr:
        expr = self.parse_primary()
        while True:
            if self.at_punct("."):
                self.advance()
                expr = ast.Prop(expr, self.expect_name("property name"))
            elif self.at_punct("["):
                self.advance()
                if self.at_punct(".."):
                    self.advance()
                    hi = None if self.at_punct("]") else self.parse_expression()
                    self.expect_punct("]")
                    expr = ast.Slice(expr, None, hi)
                    continue
                first = self.parse_expression()
                if self.take_punct(".."):
                    hi = None if self.at_punct("]") else self.parse_expression()
                    self.expect_punct("]")
                    expr = ast.Slice(expr, first, hi)
                else:
                    self.expect_punct("]")
                    expr = ast.Index(expr, first)
            else:
                return expr

    def parse_primary(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind == "INT" or tok.kind == "FLOAT":
            self.advance()
            return ast.Lit(tok.value)
        if tok.kind == "STRING":
            self.advance()
            return ast.Lit(tok.value)
        if tok.kind == "PARAM":
            self.advance()
            return ast.Param(tok.value)
        if tok.kind == "PUNCT" and tok.value == "[":
            self.advance()
            items = []
            if not self.at_punct("]"):
                while True:
                    items.append(self.parse_expression())
                    if not self.take_punct(","):
                        break
            self.expect_punct("]")
            return ast.ListLit(tuple(items))
        if tok.kind == "PUNCT" and tok.value == "(":
            pattern = self.try_parse_pattern_pred()
            if pattern is not None:
                return pattern
            self.advance()
            expr = self.parse_expression()
            self.expect_punct(")")
            return expr
        if tok.kind == "NAME":
            word = tok.value.upper()
            if word == "TRUE":
                self.advance()
                return ast.Lit(True)
            if word == "FALSE":
                self.advance()
                return ast.Lit(False)
            if word == "NULL":
                self.advance()
                return ast.Lit(None)
            if word == "CASE":
                raise UnsupportedFeature("CASE expression")
            if word == "EXISTS" and self.peek(1).kind == "PUNCT" and self.peek(1).value == "{":
                self.advance()
                self.advance()
                part = self.parse_pattern_part(allow_named=False)
                self.expect_punct("}")
                return ast.PatternPred(part)
            if self.peek(1).kind == "PUNCT" and self.peek(1).value == "(":
                name = self.advance().value
                self.advance()
                if name.lower() == "count" and self.at_punct("*"):
                    self.advance()
                    self.expect_punct(")")
                    return ast.CountStar()
                distinct = self.take_kw("DISTINCT")
                args = []
                if not self.at_punct(")"):
                    while True:
                        args.append(self.parse_expression())
                        if not self.take_punct(","):
                            break
                self.expect_punct(")")
                return ast.FuncCall(name.lower(), tuple(args), distinct)
            self.advance()
            return ast.Var(tok.value)
        self.fail("expected an expression", expected=("literal", "variable", "function call", "("))

    def try_parse_pattern_pred(self):
        """Backtracking probe: a parenthesized pattern with >= 1 relationship."""
        saved = self.pos
        try:
            part = self.parse_pattern_part(allow_named=False)
            if len(part.elements) >= 3:
                return ast.PatternPred(part)
        except (CypherSyntaxError, UnsupportedFeature):
            pass
        self.pos = saved
        return None


def _validate_statement(stmt: ast.Statement):
    for query in stmt.queries:
        saw_return = False
        for clause in query.clauses:
            if saw_return:
                raise CypherSyntaxError("RETURN must be the final clause", 1, 1)
            if isinstance(clause, ast.ReturnClause):
                saw_return = True
        if not query.is_mutating() and not saw_return:
            raise CypherSyntaxError("read query must end with RETURN", 1, 1)
    if len(stmt.queries) > 1:
        if stmt.is_mutating():
            raise UnsupportedFeature("UNION over mutating queries")


def expr_text(expr: ast.Expr) -> str:
    """Deterministic textual name for an unaliased projection item."""
    if isinstance(expr, ast.Lit):
        return repr(expr.value) if not isinstance(expr.value, str) else f"'{expr.value}'"
    if isinstance(expr, ast.Param):
        return f"${expr.name}"
    if isinstance(expr, ast.Var):
        return expr.name
    if isinstance(expr, ast.Prop):
        return f"{expr_text(expr.target)}.{expr.name}"
    if isinstance(expr, ast.ListLit):
        return "[" + ", ".join(expr_text(i) for i in expr.items) + "]"
    if isinstance(expr, ast.Unary):
        return f"{expr.op} {expr_text(expr.operand)}" if expr.op == "NOT" else f"{expr.op}{expr_text(expr.operand)}"
    if isinstance(expr, ast.Binary):
        return f"{expr_text(expr.left)} {expr.op} {expr_text(expr.right)}"
    if isinstance(expr, ast.StringOp):
        op = {"STARTS": "STARTS WITH", "ENDS": "ENDS WITH", "CONTAINS": "CONTAINS"}[expr.op]
        return f"{expr_text(expr.left)} {op} {expr_text(expr.right)}"
    if isinstance(expr, ast.IsNull):
        return f"{expr_text(expr.target)} IS {'NOT ' if expr.negated else ''}NULL"
    if isinstance(expr, ast.FuncCall):
        inner = ", ".join(expr_text(a) for a in expr.args)
        return f"{expr.name}({'DISTINCT ' if expr.distinct else ''}{inner})"
    if isinstance(expr, ast.CountStar):
        return "count(*)"
    if isinstance(expr, ast.Index):
        return f"{expr_text(expr.target)}[{expr_text(expr.index)}]"
    if isinstance(expr, ast.Slice):
        lo = expr_text(expr.lo) if expr.lo is not None else ""
        hi = expr_text(expr.hi) if expr.hi is not None else ""
        return f"{expr_text(expr.target)}[{lo}..{hi}]"
    if isinstance(expr, ast.PatternPred):
        return "<pattern>"
    return "<expr>"


def parse(source: str) -> ast.Statement:
    """Parse one Cypher statement into its AST."""
    return _Parser(source).parse_statement()
