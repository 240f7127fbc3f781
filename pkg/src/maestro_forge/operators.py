"""Structural edit operators over graph specs.

Operators are concrete (bound to target nodes/edges/templates) so a
catalog enumerates deterministically.  Application either yields a new
GraphSpec plus the config-space delta it implies (params gained from node
templates, params lost with removed structure) or raises InapplicableEdit;
full well-formedness is re-checked by validate_graph on the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import InapplicableEdit
from .graph import (
    AdapterSpec,
    EdgeSpec,
    GatePredicate,
    GraphSpec,
    IDENTITY_ADAPTER,
    MergeSpec,
    NodeSpec,
    graph_spec,
)
from .params import ConfigSpace, ParamSpec
from .schema import ValueSchema

OPERATOR_KINDS = (
    "insert-node",
    "remove-node",
    "rewire-edge",
    "add-edge",
    "remove-edge",
    "change-node-type",
    "add-gate",
    "add-state-loop",
)


@dataclass(frozen=True)
class NodeTemplate:
    """A library entry an insert-node operator can splice into an edge.

    ``params`` use short names; instantiation prefixes them with the new
    node id and registers them in the space delta.  ``keep_spliced_edge``
    makes the insertion a parallel path (the original edge survives)
    instead of a replacement.
    """

    base_id: str
    role_tag: str
    function_ref: str
    input_schema: ValueSchema
    output_schema: ValueSchema
    params: tuple[ParamSpec, ...] = ()
    in_adapter: AdapterSpec = IDENTITY_ADAPTER
    out_adapter: AdapterSpec = IDENTITY_ADAPTER
    merge: MergeSpec | None = None
    default_input: object = None
    keep_spliced_edge: bool = False


@dataclass(frozen=True)
class GraphOperator:
    operator_id: str
    kind: str
    unit_cost: int = 1
    template: NodeTemplate | None = None
    edge_id: str = ""
    node_id: str = ""
    source: str = ""
    target: str = ""
    new_source: str = ""
    new_target: str = ""
    adapter: AdapterSpec = IDENTITY_ADAPTER
    gate: GatePredicate | None = None
    function_ref: str = ""
    state_field: str = ""

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.unit_cost < 1:
            raise ValueError("unit edit cost must be a positive integer")


def insert_node(template: NodeTemplate, edge_id: str, unit_cost: int = 1) -> GraphOperator:
    return GraphOperator(f"insert:{template.base_id}@{edge_id}", "insert-node", unit_cost, template=template, edge_id=edge_id)


def remove_node(node_id: str, unit_cost: int = 1) -> GraphOperator:
    return GraphOperator(f"remove:{node_id}", "remove-node", unit_cost, node_id=node_id)


def rewire_edge(edge_id: str, new_source: str = "", new_target: str = "", unit_cost: int = 1) -> GraphOperator:
    tag = f"src={new_source}" if new_source else f"dst={new_target}"
    return GraphOperator(
        f"rewire:{edge_id}@{tag}", "rewire-edge", unit_cost, edge_id=edge_id, new_source=new_source, new_target=new_target
    )


def add_edge(source: str, target: str, adapter: AdapterSpec = IDENTITY_ADAPTER, unit_cost: int = 1) -> GraphOperator:
    return GraphOperator(f"add-edge:{source}->{target}", "add-edge", unit_cost, source=source, target=target, adapter=adapter)


def remove_edge(edge_id: str, unit_cost: int = 1) -> GraphOperator:
    return GraphOperator(f"remove-edge:{edge_id}", "remove-edge", unit_cost, edge_id=edge_id)


def change_node_type(node_id: str, function_ref: str, unit_cost: int = 1) -> GraphOperator:
    return GraphOperator(
        f"change:{node_id}->{function_ref}", "change-node-type", unit_cost, node_id=node_id, function_ref=function_ref
    )


def add_gate(edge_id: str, gate: GatePredicate, unit_cost: int = 1) -> GraphOperator:
    return GraphOperator(f"add-gate:{edge_id}", "add-gate", unit_cost, edge_id=edge_id, gate=gate)


def add_state_loop(node_id: str, state_field: str, unit_cost: int = 1) -> GraphOperator:
    return GraphOperator(
        f"state-loop:{node_id}.{state_field}", "add-state-loop", unit_cost, node_id=node_id, state_field=state_field
    )


@dataclass(frozen=True)
class SpaceDelta:
    added: tuple[ParamSpec, ...] = ()
    removed: tuple[str, ...] = ()

    def merge(self, other: "SpaceDelta") -> "SpaceDelta":
        still_added = tuple(p for p in self.added if p.name not in set(other.removed))
        return SpaceDelta(still_added + other.added, self.removed + other.removed)

    def apply(self, space: ConfigSpace) -> ConfigSpace:
        return space.without(self.removed).with_params(self.added)


@dataclass(frozen=True)
class EditSequence:
    ops: tuple[GraphOperator, ...] = ()

    @property
    def distance(self) -> int:
        return sum(op.unit_cost for op in self.ops)

    def describe(self) -> str:
        return "; ".join(op.operator_id for op in self.ops) or "(no edits)"


def _owned_params(space: ConfigSpace, owners: set[str]) -> tuple[str, ...]:
    return tuple(p.name for p in space if p.owner in owners or p.owner in {f"merge:{o}" for o in owners})


def _instantiate(template: NodeTemplate, node_id: str) -> tuple[NodeSpec, tuple[ParamSpec, ...]]:
    params = tuple(
        replace(p, name=f"{node_id}.{p.name}", owner=node_id) for p in template.params
    )
    node = NodeSpec(
        node_id=node_id,
        input_schema=template.input_schema,
        output_schema=template.output_schema,
        function_ref=template.function_ref,
        config_param_refs=tuple(p.name for p in params),
        role_tag=template.role_tag,
        default_input=template.default_input,
    )
    return node, params


def apply_operator(spec: GraphSpec, space: ConfigSpace, op: GraphOperator) -> tuple[GraphSpec, SpaceDelta]:
    """Apply one operator; InapplicableEdit when its targets do not fit."""
    nodes = list(spec.nodes)
    edges = list(spec.edges)
    merges = dict(spec.merges)
    edge_ids = {e.edge_id for e in edges}
    node_ids = {n.node_id for n in nodes}

    def need_edge(edge_id: str) -> EdgeSpec:
        for e in edges:
            if e.edge_id == edge_id:
                return e
        raise InapplicableEdit(0, f"edge {edge_id!r} not in graph")

    def need_node(node_id: str) -> NodeSpec:
        for n in nodes:
            if n.node_id == node_id:
                return n
        raise InapplicableEdit(0, f"node {node_id!r} not in graph")

    delta = SpaceDelta()

    if op.kind == "insert-node":
        spliced = need_edge(op.edge_id)
        new_id = f"{op.template.base_id}@{op.edge_id}"
        if new_id in node_ids:
            raise InapplicableEdit(0, f"node id {new_id!r} already present")
        node, params = _instantiate(op.template, new_id)
        in_id = f"{spliced.source}__{new_id}"
        out_id = f"{new_id}__{spliced.target}"
        if in_id in edge_ids or out_id in edge_ids:
            raise InapplicableEdit(0, "generated edge ids collide")
        nodes.append(node)
        if not op.template.keep_spliced_edge:
            edges.remove(spliced)
        edges.append(EdgeSpec(in_id, spliced.source, new_id, adapter=op.template.in_adapter))
        edges.append(EdgeSpec(out_id, new_id, spliced.target, adapter=op.template.out_adapter))
        if op.template.merge is not None:
            merges[new_id] = op.template.merge
        if op.template.keep_spliced_edge and merges.get(spliced.target, MergeSpec("identity")).strategy == "identity":
            merges[spliced.target] = MergeSpec("record-union")
        delta = SpaceDelta(added=params)

    elif op.kind == "remove-node":
        node = need_node(op.node_id)
        if op.node_id in spec.inputs or op.node_id in spec.outputs:
            raise InapplicableEdit(0, "cannot remove a designated input/output node")
        incoming = [e for e in edges if e.target == op.node_id]
        outgoing = [e for e in edges if e.source == op.node_id]
        removed_edges = {e.edge_id for e in incoming + outgoing}
        nodes.remove(node)
        edges = [e for e in edges if e.edge_id not in removed_edges]
        merges.pop(op.node_id, None)
        if len(incoming) == 1 and len(outgoing) == 1 and incoming[0].source != op.node_id:
            # splice-heal a pass-through node: reconnect around it
            src, dst = incoming[0].source, outgoing[0].target
            heal_id = f"{src}__{dst}"
            if heal_id not in {e.edge_id for e in edges}:
                edges.append(EdgeSpec(heal_id, src, dst, adapter=outgoing[0].adapter))
        delta = SpaceDelta(removed=_owned_params(space, {op.node_id} | removed_edges))

    elif op.kind == "rewire-edge":
        old = need_edge(op.edge_id)
        source = op.new_source or old.source
        target = op.new_target or old.target
        if source not in node_ids or target not in node_ids:
            raise InapplicableEdit(0, "rewire endpoint not in graph")
        if source == old.source and target == old.target:
            raise InapplicableEdit(0, "rewire changes nothing")
        edges[edges.index(old)] = replace(old, source=source, target=target)

    elif op.kind == "add-edge":
        if op.source not in node_ids or op.target not in node_ids:
            raise InapplicableEdit(0, "edge endpoint not in graph")
        new_id = f"{op.source}__{op.target}"
        if new_id in edge_ids:
            raise InapplicableEdit(0, f"edge id {new_id!r} already present")
        edges.append(EdgeSpec(new_id, op.source, op.target, adapter=op.adapter))

    elif op.kind == "remove-edge":
        old = need_edge(op.edge_id)
        edges.remove(old)
        delta = SpaceDelta(removed=_owned_params(space, {op.edge_id}))

    elif op.kind == "change-node-type":
        node = need_node(op.node_id)
        if node.function_ref == op.function_ref:
            raise InapplicableEdit(0, "node already has this function")
        nodes[nodes.index(node)] = replace(node, function_ref=op.function_ref)

    elif op.kind == "add-gate":
        old = need_edge(op.edge_id)
        if old.gate is not None:
            raise InapplicableEdit(0, "edge already gated")
        edges[edges.index(old)] = replace(old, gate=op.gate)

    else:  # add-state-loop
        node = need_node(op.node_id)
        if spec.mode != "unrolled":
            raise InapplicableEdit(0, "state loops need unrolled mode")
        if node.input_schema != node.output_schema:
            raise InapplicableEdit(0, "state loop needs matching input/output schemas")
        if node.input_schema.kind != "record" or op.state_field not in dict(node.input_schema.fields):
            raise InapplicableEdit(0, f"state field {op.state_field!r} not in the node's record schema")
        loop_id = f"{op.node_id}__{op.node_id}"
        if loop_id in edge_ids:
            raise InapplicableEdit(0, "node already has a self edge")
        edges.append(EdgeSpec(loop_id, op.node_id, op.node_id))
        if merges.get(op.node_id, MergeSpec("identity")).strategy == "identity":
            merges[op.node_id] = MergeSpec("record-union")

    new_spec = graph_spec(
        graph_id=spec.graph_id,
        nodes=nodes,
        edges=edges,
        inputs=spec.inputs,
        outputs=spec.outputs,
        merges=merges,
        mode=spec.mode,
        steps=spec.steps,
    )
    return new_spec, delta


def apply_edits(spec: GraphSpec, space: ConfigSpace, edits: EditSequence) -> tuple[GraphSpec, SpaceDelta]:
    """Apply a sequence in order; InapplicableEdit carries the failing index."""
    current = spec
    current_space = space
    delta = SpaceDelta()
    for i, op in enumerate(edits.ops):
        try:
            current, step_delta = apply_operator(current, current_space, op)
        except InapplicableEdit as exc:
            raise InapplicableEdit(i, str(exc))
        delta = delta.merge(step_delta)
        current_space = step_delta.apply(current_space)
    return current, delta
