"""Exception hierarchy shared across the engine."""


class MaestroError(Exception):
    """Base class for all engine errors."""


class GraphValidationError(MaestroError):
    """A graph specification violates a structural invariant."""


class CycleInDagMode(GraphValidationError):
    pass


class NotADag(GraphValidationError):
    pass


class SchemaMismatch(GraphValidationError):
    def __init__(self, edge_id: str, detail: str = ""):
        self.edge_id = edge_id
        super().__init__(f"edge {edge_id!r}: {detail or 'adapter output schema does not match target input schema'}")


class UnknownFunction(GraphValidationError):
    def __init__(self, node_id: str, function_ref: str = ""):
        self.node_id = node_id
        super().__init__(f"node {node_id!r}: function {function_ref!r} not registered")


class UnresolvedParam(GraphValidationError):
    def __init__(self, name: str, detail: str = ""):
        self.name = name
        super().__init__(f"parameter {name!r}: {detail or 'not declared in the config space'}")


class DanglingEdge(GraphValidationError):
    def __init__(self, edge_id: str, detail: str = ""):
        self.edge_id = edge_id
        super().__init__(f"edge {edge_id!r}: {detail or 'references a missing node'}")


class AdapterFailure(MaestroError):
    """An edge transform could not be applied to the realized upstream value."""

    def __init__(self, edge_id: str, detail: str = ""):
        self.edge_id = edge_id
        super().__init__(f"edge {edge_id!r}: {detail}")


class NodeFailure(MaestroError):
    """Raised by a node function to signal that the rollout cannot continue.

    The engine catches this, aborts the rollout, and records a designated
    failure output so evaluators can penalize the design.
    """

    def __init__(self, detail: str = "", node_id: str | None = None):
        self.detail = detail
        self.node_id = node_id
        super().__init__(detail)


class BudgetExceeded(MaestroError):
    pass


class MissingParam(MaestroError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"assignment is missing parameter {name!r}")


class OutOfDomain(MaestroError):
    def __init__(self, name: str, detail: str = ""):
        self.name = name
        super().__init__(f"parameter {name!r}: {detail or 'value outside its declared domain'}")


class EmptyArchive(MaestroError):
    pass


class InapplicableEdit(MaestroError):
    def __init__(self, index: int, detail: str = ""):
        self.index = index
        super().__init__(f"edit #{index}: {detail or 'not applicable to this graph'}")


class ScheduleMismatch(MaestroError):
    """Two utility estimates were compared across different seed schedules."""


class SpaceTooLarge(MaestroError):
    pass


class InvalidRunSpec(MaestroError):
    pass


class InvalidDocument(MaestroError):
    pass


class ProtocolViolation(MaestroError):
    pass
