"""Graph execution with deterministic, seed-replayable semantics.

Each node's randomness comes from a seed hashed from (master seed,
node id, step), so a trace replays exactly regardless of scheduling.
Node functions are looked up in a registry; a function may signal failure,
which aborts the rollout and surfaces a designated failure output to the
evaluator instead of crashing the engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Mapping

from .errors import AdapterFailure, MaestroError, NodeFailure
from .graph import AdapterSpec, EdgeSpec, MergeSpec, NodeSpec, ValidatedGraph
from .params import ConfigAssignment, ParamRef
from .schema import ABSENT, conforms, value_at_path
from .seeding import derive_seed

if TYPE_CHECKING:
    from .evaluation import BudgetLedger

#: (input value, node params by short name, seed) -> (output value, cost units)
NodeFunction = Callable[[object, Mapping[str, object], int], tuple[object, float]]


EXTERNAL_PREFIX = "external:"


class NodeFunctionRegistry:
    """Name -> node function table; external protocol nodes attach here too.

    With an attached protocol client, any ``external:<name>`` ref resolves
    to a wrapper that calls the peer's ``<name>`` node.
    """

    def __init__(self, functions: Mapping[str, NodeFunction] | None = None):
        self._functions: dict[str, NodeFunction] = dict(functions or {})
        self._external = None

    def register(self, name: str, fn: NodeFunction) -> None:
        self._functions[name] = fn

    def attach_external(self, client) -> None:
        self._external = client

    def has(self, name: str) -> bool:
        if name in self._functions:
            return True
        return self._external is not None and name.startswith(EXTERNAL_PREFIX)

    def resolve(self, name: str) -> NodeFunction:
        if name in self._functions:
            return self._functions[name]
        if self._external is not None and name.startswith(EXTERNAL_PREFIX):
            from .protocol import external_node_function

            fn = external_node_function(self._external, name[len(EXTERNAL_PREFIX):])
            self._functions[name] = fn
            return fn
        raise MaestroError(f"function {name!r} not registered")

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._functions))


@dataclass(frozen=True)
class FailureValue:
    """Designated output standing in for a node that aborted the rollout."""

    node_id: str
    detail: str


@dataclass(frozen=True)
class TraceEntry:
    node_id: str
    step: int
    input: object
    output: object
    seed: int
    cost: float
    feedback: str | None = None


@dataclass(frozen=True)
class ExecutionTrace:
    graph_id: str
    master_seed: int
    order: tuple[str, ...]
    entries: tuple[TraceEntry, ...]
    activations: tuple[tuple[str, int, int], ...]  # (edge id, step, bit)
    final_outputs: dict
    total_cost: float
    failure: FailureValue | None = None

    def entry(self, node_id: str, step: int = 0) -> TraceEntry:
        for e in self.entries:
            if e.node_id == node_id and e.step == step:
                return e
        raise KeyError((node_id, step))


def _resolve_ref(value, config: ConfigAssignment):
    if isinstance(value, ParamRef):
        return config[value.name]
    return value


def apply_transform(adapter: AdapterSpec, edge_id: str, value, config: ConfigAssignment):
    """Apply one edge adapter to a present upstream value.

    May return ABSENT (projecting an optional field that is absent); raises
    AdapterFailure when the transform cannot apply to the realized value.
    """
    if adapter.kind == "identity":
        return value
    if adapter.kind == "field-project":
        try:
            return value_at_path(value, adapter.path)
        except KeyError:
            raise AdapterFailure(edge_id, f"projection path {adapter.path!r} missing at runtime")
    if adapter.kind == "template-render":
        template = _resolve_ref(adapter.template, config)
        fields = value if isinstance(value, dict) else {"value": value}
        try:
            return str(template).format(**{k: ("" if v is ABSENT else v) for k, v in fields.items()})
        except (KeyError, IndexError) as exc:
            raise AdapterFailure(edge_id, f"template placeholder {exc} missing at runtime")
    a = float(_resolve_ref(adapter.a, config))
    b = float(_resolve_ref(adapter.b, config))
    if isinstance(value, tuple):
        return tuple(a * x + b for x in value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return a * value + b
    raise AdapterFailure(edge_id, "scalar-affine applied to a non-numeric value")


def _merge_values(merge: MergeSpec, node: NodeSpec, present: list, config: ConfigAssignment):
    """Combine adapted values (already sorted by edge id, absents removed)."""
    if not present:
        return node.resolved_default()
    if merge.strategy == "identity":
        return present[0]
    if merge.strategy == "record-union":
        out: dict = {}
        for value in present:
            for key, item in value.items():
                if item is ABSENT and key in out:
                    continue  # an absent field never clobbers a present one
                out[key] = item
        return out
    if merge.strategy == "concat-text":
        sep = str(_resolve_ref(merge.separator, config))
        return sep.join(present)
    total = list(present[0])
    for value in present[1:]:
        for i, x in enumerate(value):
            total[i] += x
    return tuple(total)


def gate_passes(gate, upstream_value) -> bool:
    """Evaluate a gate on the realized upstream output; absent paths fail."""
    try:
        probe = value_at_path(upstream_value, gate.path)
    except KeyError:
        return False
    if probe is ABSENT:
        return False
    if gate.comparator == "equals":
        return probe == gate.value
    if gate.comparator == "not-equals":
        return probe != gate.value
    return isinstance(probe, (int, float)) and probe > gate.value


def resolve_inputs(
    node: NodeSpec,
    incoming: list[tuple[EdgeSpec, object]],
    config: ConfigAssignment,
    merge: MergeSpec | None = None,
) -> object:
    """Adapt and merge the (gate-applied) upstream values for one node.

    ``incoming`` carries one (edge, value-or-ABSENT) pair per in-edge; an
    all-absent set falls back to the node's declared default input.
    """
    merge = merge or MergeSpec("identity")
    present = []
    for edge, value in sorted(incoming, key=lambda pair: pair[0].edge_id):
        if value is ABSENT:
            continue
        adapted = apply_transform(edge.adapter, edge.edge_id, value, config)
        if adapted is ABSENT:
            continue
        present.append(adapted)
    return _merge_values(merge, node, present, config)


def _node_params(node: NodeSpec, config: ConfigAssignment) -> dict:
    """Slice the assignment down to this node's params, keyed by short name."""
    prefix = node.node_id + "."
    out = {}
    for ref in node.config_param_refs:
        short = ref[len(prefix):] if ref.startswith(prefix) else ref
        out[short] = config[ref]
    return out


def _run(
    vgraph: ValidatedGraph,
    config: ConfigAssignment,
    inputs: Mapping[str, object],
    steps: int,
    seed: int,
    ledger: "BudgetLedger",
    order: tuple[str, ...] | None = None,
) -> ExecutionTrace:
    spec = vgraph.spec
    ledger.charge(1)

    for nid in spec.inputs:
        if nid not in inputs:
            raise MaestroError(f"no input value supplied for input node {nid!r}")
        if not conforms(inputs[nid], spec.node(nid).input_schema):
            raise MaestroError(f"input value for node {nid!r} does not conform to its schema")

    node_order = order or vgraph.order
    positions = {nid: i for i, nid in enumerate(node_order)}
    entries: list[TraceEntry] = []
    activations: list[tuple[str, int, int]] = []
    previous: dict[str, object] = {}
    total_cost = 0.0
    failure: FailureValue | None = None

    for step in range(steps):
        current: dict[str, object] = {}
        for nid in node_order:
            node = spec.node(nid)
            if nid in spec.inputs:
                x = inputs[nid]
            else:
                incoming: list[tuple[EdgeSpec, object]] = []
                for edge in vgraph.in_edges[nid]:
                    is_back = edge.edge_id in vgraph.back_edges or positions[edge.source] >= positions[nid]
                    upstream = previous.get(edge.source, ABSENT) if is_back else current.get(edge.source, ABSENT)
                    value = upstream
                    if value is not ABSENT and edge.gate is not None and not gate_passes(edge.gate, value):
                        value = ABSENT
                    if value is not ABSENT:
                        adapted = apply_transform(edge.adapter, edge.edge_id, value, config)
                    else:
                        adapted = ABSENT
                    bit = 0 if adapted is ABSENT else 1
                    activations.append((edge.edge_id, step, bit))
                    incoming.append((edge, adapted))
                present = [v for _, v in sorted(incoming, key=lambda p: p[0].edge_id) if v is not ABSENT]
                x = _merge_values(spec.merge_for(nid), node, present, config)
            node_seed = derive_seed(seed, nid, step)
            fn = vgraph.registry.resolve(node.function_ref)
            try:
                result = fn(x, _node_params(node, config), node_seed)
            except NodeFailure as exc:
                failure = FailureValue(nid, exc.detail or str(exc))
                entries.append(TraceEntry(nid, step, x, failure, node_seed, 0.0))
                break
            if len(result) == 3:  # protocol-backed nodes may attach feedback text
                output, cost, feedback = result
            else:
                (output, cost), feedback = result, None
            total_cost += float(cost)
            entries.append(TraceEntry(nid, step, x, output, node_seed, float(cost), feedback))
            current[nid] = output
        if failure is not None:
            break
        previous = current

    if failure is not None:
        final = {o: failure for o in spec.outputs}
    else:
        final = {o: previous[o] for o in spec.outputs}
    ledger.add_cost(total_cost)
    return ExecutionTrace(
        graph_id=spec.graph_id,
        master_seed=seed,
        order=node_order,
        entries=tuple(entries),
        activations=tuple(activations),
        final_outputs=final,
        total_cost=total_cost,
        failure=failure,
    )


def execute(
    vgraph: ValidatedGraph,
    config: ConfigAssignment,
    inputs: Mapping[str, object],
    seed: int,
    ledger: "BudgetLedger",
    order: tuple[str, ...] | None = None,
) -> ExecutionTrace:
    """Run one rollout of a DAG; charges exactly one rollout to the ledger.

    ``order`` overrides the default lexicographic topological order (must
    still be a valid topological order; used to check order-invariance).
    """
    if vgraph.spec.mode != "dag":
        raise MaestroError("execute requires dag mode; use execute_unrolled")
    return _run(vgraph, config, inputs, 1, seed, ledger, order=order)


def execute_unrolled(
    vgraph: ValidatedGraph,
    config: ConfigAssignment,
    inputs: Mapping[str, object],
    steps: int,
    seed: int,
    ledger: "BudgetLedger",
) -> ExecutionTrace:
    """Unroll a (possibly cyclic) graph for ``steps`` steps; one rollout total.

    Back edges deliver the previous step's output (absent at step 0, so
    first-step inputs fall back to node defaults); the readout is the
    output nodes' values at the final step.
    """
    if vgraph.spec.mode != "unrolled":
        raise MaestroError("execute_unrolled requires unrolled mode")
    if steps < 1:
        raise MaestroError("steps must be >= 1")
    return _run(vgraph, config, inputs, steps, seed, ledger)


def run_trace(vgraph: ValidatedGraph, config, inputs, seed, ledger) -> ExecutionTrace:
    """Mode-dispatching rollout used by the evaluator."""
    if vgraph.spec.mode == "unrolled":
        return execute_unrolled(vgraph, config, inputs, vgraph.spec.steps, seed, ledger)
    return execute(vgraph, config, inputs, seed, ledger)
