"""The core functional operator vocabulary used to tag logical plans."""

ANALYTICAL_OPERATORS = frozenset(
    {
        # data access
        "Scan",
        "Seek",
        # traversal & matching
        "Expand",
        "VarLengthExpand",
        "ShortestPath",
        "Repeat",
        "Optional",
        "Anti",
        "Triadic",
        # join & set operations
        "HashJoin",
        "Apply",
        "CartesianProduct",
        "Argument",
        "Union",
        # filter & projection
        "Filter",
        "Project",
        "Distinct",
        # aggregation & control
        "Aggregate",
        "Unwind",
        "Sort",
        "Limit",
        "Skip",
        "Top",
    }
)

MANAGEMENT_OPERATORS = frozenset({"Create", "Merge", "Delete", "Set", "Foreach"})

# collect() materializes multi-valued results and drives the positive/inverse
# pair derivation, so it is tagged as its own operator alongside Aggregate.
COLLECT_OPERATOR = "Collect"

ALL_OPERATORS = ANALYTICAL_OPERATORS | MANAGEMENT_OPERATORS | {COLLECT_OPERATOR}

assert len(ANALYTICAL_OPERATORS) == 23
assert len(MANAGEMENT_OPERATORS) == 5
assert len(ALL_OPERATORS) == 29
