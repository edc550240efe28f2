"""Cypher-subset parser, planner, executor, and brute-force reference."""

from .executor import MutationResult, execute, execute_mutation
from .ops import ALL_OPERATORS, ANALYTICAL_OPERATORS, MANAGEMENT_OPERATORS
from .parser import parse as parse_ast
from .plan import LogicalPlan, plan_statement
from .reference import reference_execute
from .table import ResultTable


def parse(source: str) -> LogicalPlan:
    """Parse one statement and lower it to a tagged logical plan."""
    return plan_statement(parse_ast(source))


__all__ = [
    "ALL_OPERATORS",
    "ANALYTICAL_OPERATORS",
    "MANAGEMENT_OPERATORS",
    "LogicalPlan",
    "MutationResult",
    "ResultTable",
    "execute",
    "execute_mutation",
    "parse",
    "parse_ast",
    "plan_statement",
    "reference_execute",
]
