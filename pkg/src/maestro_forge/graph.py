"""Typed stochastic computation graph: specs, validation, node ordering.

A graph is a set of typed nodes joined by edges that carry adapters
(per-edge input transforms) and optional gate predicates; multi-parent
nodes declare a merge strategy.  Validation checks the structural
invariants once so execution can stay lean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    CycleInDagMode,
    DanglingEdge,
    GraphValidationError,
    NotADag,
    SchemaMismatch,
    UnknownFunction,
    UnresolvedParam,
)
from .params import ConfigSpace, ParamRef
from .schema import TEXT, ValueSchema, schema_at_path, zero_value

ADAPTER_KINDS = ("identity", "field-project", "template-render", "scalar-affine")
MERGE_KINDS = ("identity", "record-union", "concat-text", "sum-vectors")
COMPARATORS = ("equals", "not-equals", "greater-than")


@dataclass(frozen=True)
class AdapterSpec:
    """Per-edge transform mapping a source output into the target's input space."""

    kind: str = "identity"
    path: str = ""  # field-project
    template: str | ParamRef = ""  # template-render
    a: float | ParamRef = 1.0  # scalar-affine
    b: float | ParamRef = 0.0

    def __post_init__(self):
        if self.kind not in ADAPTER_KINDS:
            raise ValueError(f"unknown adapter kind {self.kind!r}")

    @property
    def param_refs(self) -> tuple[str, ...]:
        return tuple(v.name for v in (self.template, self.a, self.b) if isinstance(v, ParamRef))


IDENTITY_ADAPTER = AdapterSpec("identity")


def project(path: str) -> AdapterSpec:
    return AdapterSpec("field-project", path=path)


def render(template: str | ParamRef) -> AdapterSpec:
    return AdapterSpec("template-render", template=template)


def affine(a: float | ParamRef = 1.0, b: float | ParamRef = 0.0) -> AdapterSpec:
    return AdapterSpec("scalar-affine", a=a, b=b)


@dataclass(frozen=True)
class GatePredicate:
    """Declarative activation test on the realized upstream output."""

    path: str
    comparator: str
    value: object

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")


@dataclass(frozen=True)
class MergeSpec:
    """How a node combines its adapted incoming values (absents ignored)."""

    strategy: str = "identity"
    separator: str | ParamRef = " "  # concat-text

    def __post_init__(self):
        if self.strategy not in MERGE_KINDS:
            raise ValueError(f"unknown merge strategy {self.strategy!r}")

    @property
    def param_refs(self) -> tuple[str, ...]:
        return (self.separator.name,) if isinstance(self.separator, ParamRef) else ()


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    input_schema: ValueSchema
    output_schema: ValueSchema
    function_ref: str
    config_param_refs: tuple[str, ...] = ()
    role_tag: str = ""
    default_input: object = None  # None -> zero_value(input_schema)

    def resolved_default(self):
        return zero_value(self.input_schema) if self.default_input is None else self.default_input


@dataclass(frozen=True)
class EdgeSpec:
    edge_id: str
    source: str
    target: str
    adapter: AdapterSpec = IDENTITY_ADAPTER
    gate: GatePredicate | None = None


@dataclass(frozen=True)
class GraphSpec:
    graph_id: str
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    merges: tuple[tuple[str, MergeSpec], ...] = ()
    mode: str = "dag"  # dag | unrolled
    steps: int = 0  # declared horizon when mode == "unrolled"

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def edge(self, edge_id: str) -> EdgeSpec:
        for e in self.edges:
            if e.edge_id == edge_id:
                return e
        raise KeyError(edge_id)

    def has_node(self, node_id: str) -> bool:
        return any(n.node_id == node_id for n in self.nodes)

    def merge_for(self, node_id: str) -> MergeSpec:
        for nid, m in self.merges:
            if nid == node_id:
                return m
        return MergeSpec("identity")


def graph_spec(
    graph_id: str,
    nodes,
    edges,
    inputs,
    outputs,
    merges: dict[str, MergeSpec] | None = None,
    mode: str = "dag",
    steps: int = 0,
) -> GraphSpec:
    """Normalizing constructor: sorts nodes/edges/merges for canonical identity."""
    return GraphSpec(
        graph_id=graph_id,
        nodes=tuple(sorted(nodes, key=lambda n: n.node_id)),
        edges=tuple(sorted(edges, key=lambda e: e.edge_id)),
        inputs=tuple(sorted(inputs)),
        outputs=tuple(sorted(outputs)),
        merges=tuple(sorted((merges or {}).items())),
        mode=mode,
        steps=steps,
    )


def adapter_output_schema(adapter: AdapterSpec, source_output: ValueSchema, edge_id: str) -> ValueSchema:
    if adapter.kind == "identity":
        return source_output
    if adapter.kind == "field-project":
        try:
            return schema_at_path(source_output, adapter.path)
        except KeyError:
            raise SchemaMismatch(edge_id, f"projection path {adapter.path!r} not in source output schema")
    if adapter.kind == "template-render":
        return TEXT
    # scalar-affine preserves the numeric shape
    if source_output.kind not in ("number", "vector"):
        raise SchemaMismatch(edge_id, "scalar-affine requires a number or vector source output")
    return source_output


@dataclass
class ValidatedGraph:
    """An immutable, pre-indexed graph ready for execution.

    ``order`` is the deterministic node order (topological for DAGs,
    pseudo-topological for cyclic unrolled graphs); ``back_edges`` are the
    edges that deliver the previous step's value during unrolled execution.
    """

    spec: GraphSpec
    registry: "object"
    space: ConfigSpace
    order: tuple[str, ...]
    back_edges: frozenset[str]
    in_edges: dict[str, tuple[EdgeSpec, ...]] = field(default_factory=dict)

    @property
    def graph_id(self) -> str:
        return self.spec.graph_id

    def node(self, node_id: str) -> NodeSpec:
        return self.spec.node(node_id)


def _node_order(spec: GraphSpec, reverse_ties: bool = False) -> tuple[tuple[str, ...], frozenset[str]]:
    """Kahn's algorithm with a lexicographic tie-break.

    When no zero-in-degree node remains (a cycle), the first remaining node
    in tie-break order is forced out.  Edges whose source does not strictly
    precede its target in the final order become back edges (they deliver
    the previous step's value during unrolled execution); for a DAG the
    back-edge set is empty.
    """
    ids = [n.node_id for n in spec.nodes]
    pending_in = {nid: 0 for nid in ids}
    outgoing: dict[str, list[EdgeSpec]] = {nid: [] for nid in ids}
    for e in spec.edges:
        pending_in[e.target] += 1
        outgoing[e.source].append(e)

    pick = max if reverse_ties else min
    remaining = set(ids)
    order: list[str] = []
    while remaining:
        ready = [nid for nid in remaining if pending_in[nid] == 0]
        nid = pick(ready) if ready else pick(remaining)
        remaining.remove(nid)
        order.append(nid)
        for e in outgoing[nid]:
            if e.target in remaining:
                pending_in[e.target] -= 1
    pos = {nid: i for i, nid in enumerate(order)}
    back = {e.edge_id for e in spec.edges if pos[e.source] >= pos[e.target]}
    return tuple(order), frozenset(back)


def validate_graph(spec: GraphSpec, registry, space: ConfigSpace) -> ValidatedGraph:
    """Check all structural invariants and build the execution index."""
    ids = [n.node_id for n in spec.nodes]
    if len(ids) != len(set(ids)):
        raise GraphValidationError("node ids must be unique")
    known = set(ids)
    if not spec.inputs or not spec.outputs:
        raise GraphValidationError("input and output node sets must be nonempty")
    for nid in list(spec.inputs) + list(spec.outputs):
        if nid not in known:
            raise GraphValidationError(f"designated node {nid!r} is not in the graph")
    if spec.mode not in ("dag", "unrolled"):
        raise GraphValidationError(f"unknown mode {spec.mode!r}")
    if spec.mode == "unrolled" and spec.steps < 1:
        raise GraphValidationError("unrolled mode requires steps >= 1")

    edge_ids = [e.edge_id for e in spec.edges]
    if len(edge_ids) != len(set(edge_ids)):
        raise GraphValidationError("edge ids must be unique")
    in_edges: dict[str, list[EdgeSpec]] = {nid: [] for nid in ids}
    for e in spec.edges:
        if e.source not in known or e.target not in known:
            raise DanglingEdge(e.edge_id)
        if e.source == e.target and spec.mode == "dag":
            raise CycleInDagMode(f"self-edge {e.edge_id!r} in dag mode")
        in_edges[e.target].append(e)

    for nid in ids:
        incoming = in_edges[nid]
        if nid in spec.inputs and incoming:
            raise GraphValidationError(f"input node {nid!r} must have no incoming edges")
        if nid not in spec.inputs and not incoming:
            raise GraphValidationError(f"non-input node {nid!r} must have at least one incoming edge")
        merge = spec.merge_for(nid)
        if merge.strategy == "identity" and len(incoming) > 1:
            raise GraphValidationError(f"node {nid!r}: identity merge needs exactly one incoming edge")

    param_names = set(space.names)
    for node in spec.nodes:
        if not registry.has(node.function_ref):
            raise UnknownFunction(node.node_id, node.function_ref)
        for ref in node.config_param_refs:
            if ref not in param_names:
                raise UnresolvedParam(ref, f"referenced by node {node.node_id!r}")
    for e in spec.edges:
        for ref in e.adapter.param_refs:
            if ref not in param_names:
                raise UnresolvedParam(ref, f"referenced by edge {e.edge_id!r}")
        source = spec.node(e.source)
        target = spec.node(e.target)
        out_schema = adapter_output_schema(e.adapter, source.output_schema, e.edge_id)
        if out_schema != target.input_schema:
            raise SchemaMismatch(e.edge_id)
        if e.gate is not None:
            try:
                gate_schema = schema_at_path(source.output_schema, e.gate.path)
            except KeyError:
                raise GraphValidationError(f"gate on {e.edge_id!r}: path {e.gate.path!r} not in source output")
            if e.gate.comparator == "greater-than" and gate_schema.kind not in ("number",):
                raise GraphValidationError(f"gate on {e.edge_id!r}: greater-than needs a numeric path")
    for nid, merge in spec.merges:
        if nid not in known:
            raise GraphValidationError(f"merge declared for missing node {nid!r}")
        for ref in merge.param_refs:
            if ref not in param_names:
                raise UnresolvedParam(ref, f"referenced by merge of {nid!r}")
    for p in space:
        owner = p.owner
        if owner.startswith("merge:"):
            owner = owner[len("merge:"):]
        if owner and owner not in known and owner not in set(edge_ids):
            raise UnresolvedParam(p.name, f"owner {p.owner!r} not present in the graph")

    order, back = _node_order(spec)
    if spec.mode == "dag" and back:
        raise CycleInDagMode(f"cycle detected among edges {sorted(back)}")

    return ValidatedGraph(
        spec=spec,
        registry=registry,
        space=space,
        order=order,
        back_edges=back,
        in_edges={nid: tuple(sorted(in_edges[nid], key=lambda e: e.edge_id)) for nid in ids},
    )


def topological_order(graph: ValidatedGraph | GraphSpec, reverse_ties: bool = False) -> tuple[str, ...]:
    """Node order with every edge source before its target.

    Ties break lexicographically on node id (reversed with
    ``reverse_ties``, used to check order-invariance of execution).
    """
    spec = graph.spec if isinstance(graph, ValidatedGraph) else graph
    order, back = _node_order(spec, reverse_ties=reverse_ties)
    if back:
        raise NotADag(f"graph {spec.graph_id!r} has cycles")
    return order


def structure_counts(spec: GraphSpec) -> tuple[int, int]:
    return len(spec.nodes), len(spec.edges)
