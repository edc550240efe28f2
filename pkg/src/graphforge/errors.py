"""Exception hierarchy shared across the toolkit."""


class GraphForgeError(Exception):
    """Base class for every error raised by this package."""


class GraphError(GraphForgeError):
    """Structural violation in a graph or mutation."""


class DanglingEdge(GraphError):
    def __init__(self, edge_id, missing_node):
        self.edge_id = edge_id
        self.missing_node = missing_node
        super().__init__(f"edge {edge_id} references missing node {missing_node}")


class DuplicateId(GraphError):
    def __init__(self, kind, entity_id):
        self.kind = kind
        self.entity_id = entity_id
        super().__init__(f"duplicate {kind} id {entity_id}")


class UnknownNode(GraphError):
    def __init__(self, node_id):
        self.node_id = node_id
        super().__init__(f"unknown node id {node_id}")


class UnknownEdge(GraphError):
    def __init__(self, edge_id):
        self.edge_id = edge_id
        super().__init__(f"unknown edge id {edge_id}")


class NonFiniteValue(GraphForgeError):
    """Float property is NaN or infinite."""


class InvalidProperty(GraphForgeError):
    """Value does not fit the property type system."""


class ParseError(GraphForgeError):
    """A canonical graph file failed to parse."""

    def __init__(self, path, line_no, reason):
        self.path = path
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class InvalidSpec(GraphForgeError):
    """Synthesis spec is malformed."""


class InvalidProfile(GraphForgeError):
    """Noise profile is malformed."""


class DigestMismatch(GraphForgeError):
    """A perturbation log was replayed against the wrong base graph."""


class CypherSyntaxError(GraphForgeError):
    """Query text failed to parse; carries position and the expected token set."""

    def __init__(self, message, line, column, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        hint = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"line {line}, col {column}: {message}{hint}")


class UnsupportedFeature(GraphForgeError):
    """Cypher construct outside the supported subset."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"unsupported Cypher feature: {name}")


class RuntimeTypeError(GraphForgeError):
    """Type mismatch during expression evaluation; carries the offending expression."""

    def __init__(self, message, expression=None):
        self.expression = expression
        where = f" in `{expression}`" if expression else ""
        super().__init__(f"{message}{where}")


class ConstraintError(GraphForgeError):
    """Mutation violated a structural constraint (e.g. ambiguous MERGE)."""


class CapExceeded(GraphForgeError):
    """Reference evaluator refused a graph above its size cap."""

    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"graph has {size} nodes, reference cap is {cap}")


class EmptySchema(GraphForgeError):
    """Template construction needs a non-empty schema."""


class Unsatisfiable(GraphForgeError):
    """No valid binding exists for a template under the requested targeting."""

    def __init__(self, template_id, reason=""):
        self.template_id = template_id
        detail = f": {reason}" if reason else ""
        super().__init__(f"template {template_id} unsatisfiable{detail}")


class MissingPattern(GraphForgeError):
    """Template has no verbalization pattern."""

    def __init__(self, template_id):
        self.template_id = template_id
        super().__init__(f"template {template_id} has no verbalization pattern")


class EmptyInput(GraphForgeError):
    """Metric received an empty list."""


class DomainError(GraphForgeError):
    """Metric input outside the formula's domain."""


class AnswererTimeout(GraphForgeError):
    """External answerer exceeded its deadline."""


class AnswererProtocolError(GraphForgeError):
    """External answerer returned a malformed response."""


class EngineError(GraphForgeError):
    """Execution failure surfaced with the query id attached."""

    def __init__(self, query_id, cause):
        self.query_id = query_id
        self.cause = cause
        super().__init__(f"query {query_id}: {cause}")


class VerificationFailure(GraphForgeError):
    """Bundle verification found mismatches; lists every one."""

    def __init__(self, mismatches):
        self.mismatches = list(mismatches)
        super().__init__(
            f"{len(self.mismatches)} verification mismatch(es): "
            + "; ".join(self.mismatches[:5])
            + ("..." if len(self.mismatches) > 5 else "")
        )
