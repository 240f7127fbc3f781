"""Canonical text documents for graphs, spaces, and assignments, plus DOT export.

All documents are JSON with sorted keys and compact separators, so a fixed
seed reproduces byte-identical artifacts; the serialized form is also the
dedup identity for candidate graphs.
"""

from __future__ import annotations

import json

from .errors import InvalidDocument
from .graph import (
    AdapterSpec,
    EdgeSpec,
    GatePredicate,
    GraphSpec,
    MergeSpec,
    NodeSpec,
    graph_spec,
)
from .params import ConfigSpace, ParamRef, ParamSpec
from .schema import schema_from_doc, schema_to_doc, value_from_doc, value_to_doc


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def _ref_or_literal(value):
    if isinstance(value, ParamRef):
        return {"$param": value.name}
    return value


def _from_ref_or_literal(doc):
    if isinstance(doc, dict) and "$param" in doc:
        return ParamRef(doc["$param"])
    return doc


def adapter_to_doc(adapter: AdapterSpec) -> dict:
    doc = {"kind": adapter.kind}
    if adapter.kind == "field-project":
        doc["path"] = adapter.path
    elif adapter.kind == "template-render":
        doc["template"] = _ref_or_literal(adapter.template)
    elif adapter.kind == "scalar-affine":
        doc["a"] = _ref_or_literal(adapter.a)
        doc["b"] = _ref_or_literal(adapter.b)
    return doc


def adapter_from_doc(doc) -> AdapterSpec:
    kind = doc["kind"]
    if kind == "field-project":
        return AdapterSpec(kind, path=doc["path"])
    if kind == "template-render":
        return AdapterSpec(kind, template=_from_ref_or_literal(doc["template"]))
    if kind == "scalar-affine":
        return AdapterSpec(kind, a=_from_ref_or_literal(doc["a"]), b=_from_ref_or_literal(doc["b"]))
    return AdapterSpec(kind)


def graph_to_doc(spec: GraphSpec) -> dict:
    nodes = []
    for n in spec.nodes:
        nodes.append(
            {
                "id": n.node_id,
                "role": n.role_tag,
                "function": n.function_ref,
                "input-schema": schema_to_doc(n.input_schema),
                "output-schema": schema_to_doc(n.output_schema),
                "params": list(n.config_param_refs),
                "default-input": value_to_doc(n.resolved_default()),
            }
        )
    edges = []
    for e in spec.edges:
        gate = None
        if e.gate is not None:
            gate = {"path": e.gate.path, "comparator": e.gate.comparator, "value": e.gate.value}
        edges.append(
            {
                "id": e.edge_id,
                "source": e.source,
                "target": e.target,
                "adapter": adapter_to_doc(e.adapter),
                "gate": gate,
            }
        )
    merges = []
    for nid, m in spec.merges:
        merges.append({"node": nid, "strategy": m.strategy, "separator": _ref_or_literal(m.separator)})
    return {
        "graph-id": spec.graph_id,
        "mode": {"kind": spec.mode, "steps": spec.steps},
        "inputs": list(spec.inputs),
        "outputs": list(spec.outputs),
        "nodes": nodes,
        "edges": edges,
        "merges": merges,
    }


def graph_from_doc(doc) -> GraphSpec:
    try:
        nodes = []
        for nd in doc["nodes"]:
            input_schema = schema_from_doc(nd["input-schema"])
            nodes.append(
                NodeSpec(
                    node_id=nd["id"],
                    input_schema=input_schema,
                    output_schema=schema_from_doc(nd["output-schema"]),
                    function_ref=nd["function"],
                    config_param_refs=tuple(nd.get("params", ())),
                    role_tag=nd.get("role", ""),
                    default_input=value_from_doc(nd.get("default-input"), input_schema)
                    if nd.get("default-input") is not None
                    else None,
                )
            )
        edges = []
        for ed in doc["edges"]:
            gate = None
            if ed.get("gate"):
                g = ed["gate"]
                gate = GatePredicate(g["path"], g["comparator"], g["value"])
            edges.append(
                EdgeSpec(
                    edge_id=ed["id"],
                    source=ed["source"],
                    target=ed["target"],
                    adapter=adapter_from_doc(ed["adapter"]),
                    gate=gate,
                )
            )
        merges = {}
        for md in doc.get("merges", ()):
            merges[md["node"]] = MergeSpec(md["strategy"], separator=_from_ref_or_literal(md.get("separator", " ")))
        mode = doc.get("mode", {"kind": "dag", "steps": 0})
        return graph_spec(
            graph_id=doc["graph-id"],
            nodes=nodes,
            edges=edges,
            inputs=doc["inputs"],
            outputs=doc["outputs"],
            merges=merges,
            mode=mode["kind"],
            steps=int(mode.get("steps", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDocument(f"malformed graph document: {exc}")


def canonical_graph(spec: GraphSpec) -> str:
    """Stable serialization used as the identity of a graph for dedup."""
    doc = graph_to_doc(spec)
    doc["graph-id"] = ""  # identity is structural, not the label
    return canonical_json(doc)


def param_to_doc(spec: ParamSpec) -> dict:
    doc = {"name": spec.name, "owner": spec.owner, "kind": spec.kind}
    if spec.kind == "choice":
        doc["choices"] = list(spec.choices)
    elif spec.kind in ("int", "float"):
        doc["lo"] = spec.lo
        doc["hi"] = spec.hi
    else:
        doc["vocabulary"] = list(spec.vocabulary)
        doc["max-tokens"] = spec.max_tokens
        doc["initial"] = spec.initial_text
    return doc


def param_from_doc(doc) -> ParamSpec:
    kind = doc["kind"]
    if kind == "choice":
        return ParamSpec(doc["name"], doc["owner"], "choice", choices=tuple(doc["choices"]))
    if kind == "int":
        return ParamSpec(doc["name"], doc["owner"], "int", lo=int(doc["lo"]), hi=int(doc["hi"]))
    if kind == "float":
        return ParamSpec(doc["name"], doc["owner"], "float", lo=float(doc["lo"]), hi=float(doc["hi"]))
    if kind == "text":
        return ParamSpec(
            doc["name"],
            doc["owner"],
            "text",
            vocabulary=tuple(doc["vocabulary"]),
            max_tokens=int(doc["max-tokens"]),
            initial_text=doc.get("initial", ""),
        )
    raise InvalidDocument(f"unknown param kind {kind!r}")


def space_to_doc(space: ConfigSpace) -> dict:
    return {"params": [param_to_doc(p) for p in space]}


def space_from_doc(doc) -> ConfigSpace:
    try:
        return ConfigSpace(tuple(param_from_doc(p) for p in doc["params"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDocument(f"malformed space document: {exc}")


def assignment_to_doc(assignment: dict) -> dict:
    return {"values": dict(sorted(assignment.items()))}


def assignment_from_doc(doc) -> dict:
    try:
        return dict(doc["values"])
    except (KeyError, TypeError) as exc:
        raise InvalidDocument(f"malformed assignment document: {exc}")


def _dot_quote(text: str) -> str:
    return '"' + text.replace('"', '\\"') + '"'


def graph_to_dot(spec: GraphSpec, diff_base: GraphSpec | None = None) -> str:
    """DOT rendering; with ``diff_base`` the additions/removals are styled."""
    base_nodes = {n.node_id for n in diff_base.nodes} if diff_base else set()
    base_edges = {e.edge_id for e in diff_base.edges} if diff_base else set()
    cur_nodes = {n.node_id for n in spec.nodes}
    cur_edges = {e.edge_id for e in spec.edges}
    lines = [f"digraph {_dot_quote(spec.graph_id)} {{", "  rankdir=TB;"]
    for n in spec.nodes:
        attrs = [f"label={_dot_quote(n.node_id + (chr(10) + n.role_tag if n.role_tag else ''))}"]
        if n.node_id in spec.inputs:
            attrs.append("shape=invhouse")
        elif n.node_id in spec.outputs:
            attrs.append("shape=house")
        else:
            attrs.append("shape=box")
        if diff_base and n.node_id not in base_nodes:
            attrs.append("color=blue")
            attrs.append("fontcolor=blue")
        lines.append(f"  {_dot_quote(n.node_id)} [{', '.join(attrs)}];")
    if diff_base:
        for n in diff_base.nodes:
            if n.node_id not in cur_nodes:
                lines.append(f"  {_dot_quote(n.node_id)} [shape=box, color=red, style=dashed, fontcolor=red];")
    for e in spec.edges:
        attrs = []
        if e.gate is not None:
            attrs.append(f"label={_dot_quote(f'{e.gate.path} {e.gate.comparator} {e.gate.value}')}")
            attrs.append("style=dotted")
        if diff_base and e.edge_id not in base_edges:
            attrs.append("color=blue")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {_dot_quote(e.source)} -> {_dot_quote(e.target)}{suffix};")
    if diff_base:
        for e in diff_base.edges:
            if e.edge_id not in cur_edges:
                lines.append(f"  {_dot_quote(e.source)} -> {_dot_quote(e.target)} [color=red, style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
