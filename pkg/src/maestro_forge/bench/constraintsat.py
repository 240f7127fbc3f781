"""Instruction-compliance bundle with a draft/rewrite pipeline.

Each task states one constraint per active kind (length bound, required
token, forbidden token, casing, prefix, suffix).  The draft stage honors a
constraint kind only when its control token appears in the draft prompt
(plus a deterministic base-compliance floor); the rewrite stage fixes the
kinds named in its prompt or fed to it through the ``issues`` field.  A
checker node from the template library computes those issues reliably, so
inserting it unlocks scores that prompt tuning alone cannot reach: the
prompt token budgets are deliberately too small to cover every kind.
"""

from __future__ import annotations

import random

from ..errors import MaestroError
from ..evaluation import Metric, TaskInstance
from ..execution import NodeFunctionRegistry
from ..feedback import FeedbackItem
from ..graph import EdgeSpec, GatePredicate, GraphSpec, NodeSpec, graph_spec
from ..operators import GraphOperator, NodeTemplate, add_gate, insert_node, remove_node
from ..params import ConfigSpace, default_assignment, text_param
from ..schema import ABSENT, optional, record, TEXT
from ..seeding import derive_seed
from .base import TaskBundle

KINDS = ("length", "required", "forbidden", "casing", "prefix", "suffix")
DISTRACTORS = ("please", "careful", "polite", "brief")
CONTENT_WORDS = ("Alpha", "beta", "Gamma", "delta", "epsilon", "Zeta", "eta", "theta")
TOKEN_POOL = ("apple", "board", "cedar", "dune", "ember", "fjord")
EXPENSIVE_COST = 500.0

MESSAGE = record({"request": TEXT, "response": optional(TEXT), "issues": optional(TEXT)})


def control_token(kind: str) -> str:
    return f"ensure-{kind}"


def _constraints_from_request(request: str) -> dict:
    out = {}
    for token in request.split():
        if token.startswith("::"):
            kind, _, arg = token[2:].partition("=")
            out[kind] = int(arg) if kind == "length" else (True if kind == "casing" else arg)
    return out


def _content_tokens(request: str) -> list[str]:
    return [t for t in request.split() if not t.startswith("::")]


def checker(response: str, constraints: dict) -> set[str]:
    """Kinds the response satisfies; the metric's ground truth."""
    toks = response.split()
    ok = set()
    for kind, arg in constraints.items():
        if kind == "length":
            good = len(toks) <= arg
        elif kind == "required":
            good = arg in toks
        elif kind == "forbidden":
            good = arg not in toks
        elif kind == "casing":
            good = all(t == t.lower() for t in toks)
        elif kind == "prefix":
            good = bool(toks) and toks[0] == arg
        else:
            good = bool(toks) and toks[-1] == arg
        if good:
            ok.add(kind)
    return ok


def compose_response(request: str, known: set[str]) -> str:
    """Deterministic response honoring exactly the ``known`` constraint kinds."""
    constraints = _constraints_from_request(request)
    body = _content_tokens(request)
    if "forbidden" in known and "forbidden" in constraints:
        body = [t for t in body if t != constraints["forbidden"]]
    if "casing" in known and "casing" in constraints:
        body = [t.lower() for t in body]
    pre = [constraints["prefix"]] if "prefix" in known and "prefix" in constraints else []
    post = []
    if "required" in known and "required" in constraints:
        post.append(constraints["required"])
    if "suffix" in known and "suffix" in constraints:
        post.append(constraints["suffix"])
    if "length" in known and "length" in constraints:
        budget = max(0, constraints["length"] - len(pre) - len(post))
        body = body[:budget]
    return " ".join(pre + body + post)


def _floor_kinds(request: str, constraints: dict) -> set[str]:
    """Base compliance the draft exhibits with no prompt help (25% per kind)."""
    return {k for k in constraints if derive_seed("floor", request, k) % 4 == 0}


def _prompt_kinds(prompt: str) -> set[str]:
    toks = set(prompt.split())
    return {k for k in KINDS if control_token(k) in toks}


def _registry() -> NodeFunctionRegistry:
    def input_fn(value, params, seed):
        return value, 0.0

    def draft_fn(value, params, seed):
        request = value["request"]
        constraints = _constraints_from_request(request)
        known = _prompt_kinds(params.get("prompt", "")) | _floor_kinds(request, constraints)
        return {"request": request, "response": compose_response(request, known), "issues": ABSENT}, 1.0

    def rewrite_fn(value, params, seed):
        request = value["request"]
        response = value["response"]
        if response is ABSENT:
            return {"request": request, "response": ABSENT, "issues": ABSENT}, 1.0
        constraints = _constraints_from_request(request)
        known = _prompt_kinds(params.get("prompt", ""))
        issues = value.get("issues", ABSENT)
        if issues is not ABSENT:
            known |= {t[len("fix:"):] for t in issues.split() if t.startswith("fix:")}
        known |= checker(response, constraints)  # never regress what already holds
        return {"request": request, "response": compose_response(request, known), "issues": ABSENT}, 1.0

    def checker_fn(value, params, seed):
        request = value["request"]
        response = value["response"]
        if response is ABSENT:
            violated = sorted(_constraints_from_request(request))
        else:
            constraints = _constraints_from_request(request)
            violated = sorted(set(constraints) - checker(response, constraints))
        issues = " ".join(f"fix:{k}" for k in violated)
        return {"request": request, "response": response, "issues": issues}, 1.0

    def output_fn(value, params, seed):
        return value, 0.0

    def expensive_fn(value, params, seed):
        return value, EXPENSIVE_COST

    reg = NodeFunctionRegistry()
    reg.register("cs.input", input_fn)
    reg.register("cs.draft", draft_fn)
    reg.register("cs.rewrite", rewrite_fn)
    reg.register("cs.checker", checker_fn)
    reg.register("cs.output", output_fn)
    reg.register("cs.expensive", expensive_fn)
    return reg


def make_constraintsat(n_constraint_kinds: int = 4, seed: int = 0) -> TaskBundle:
    if not 2 <= n_constraint_kinds <= 6:
        raise MaestroError("n_constraint_kinds must be in [2, 6]")
    kinds = KINDS[:n_constraint_kinds]
    vocabulary = tuple(control_token(k) for k in kinds) + DISTRACTORS

    def make_tasks(count: int, task_seed: int) -> list[TaskInstance]:
        tasks = []
        for i in range(count):
            rng = random.Random(derive_seed(seed, "task", task_seed, i))
            content = [rng.choice(CONTENT_WORDS) for _ in range(rng.randint(5, 8))]
            if not any(t != t.lower() for t in content):
                content[0] = content[0].capitalize()
            constraints: dict = {}
            for kind in kinds:
                if kind == "length":
                    constraints[kind] = rng.randint(3, 4)
                elif kind == "required":
                    constraints[kind] = rng.choice(TOKEN_POOL)
                elif kind == "forbidden":
                    constraints[kind] = rng.choice(content)
                elif kind == "casing":
                    constraints[kind] = True
                elif kind == "prefix":
                    constraints[kind] = rng.choice(TOKEN_POOL)
                else:
                    constraints[kind] = rng.choice(TOKEN_POOL)
            markers = []
            for kind in kinds:
                arg = constraints[kind]
                markers.append(f"::{kind}={'1' if kind == 'casing' else arg}")
            request = " ".join(content + markers)
            value = {"request": request, "response": ABSENT, "issues": ABSENT}
            tasks.append(TaskInstance(f"cs-{task_seed}-{i}", {"query": value}, {"constraints": constraints}))
        return tasks

    def score_fn(final_outputs, task) -> float:
        message = final_outputs["out"]
        response = message["response"]
        constraints = task.metadata["constraints"]
        if response is ABSENT or not constraints:
            return 0.0
        return 100.0 * len(checker(response, constraints)) / len(constraints)

    def feedback_fn(final_outputs, task):
        message = final_outputs["out"]
        response = message["response"]
        constraints = task.metadata["constraints"]
        violated = (
            sorted(constraints)
            if response is ABSENT
            else sorted(set(constraints) - checker(response, constraints))
        )
        return [
            FeedbackItem("violated-constraint", control_token(kind), task_id=task.task_id) for kind in violated
        ]

    metric = Metric("constraint-satisfaction", score_fn, feedback_fn)

    nodes = [
        NodeSpec("query", MESSAGE, MESSAGE, "cs.input", role_tag="source"),
        NodeSpec("draft", MESSAGE, MESSAGE, "cs.draft", config_param_refs=("draft.prompt",), role_tag="draft"),
        NodeSpec("fix", MESSAGE, MESSAGE, "cs.rewrite", config_param_refs=("fix.prompt",), role_tag="rewrite"),
        NodeSpec("out", MESSAGE, MESSAGE, "cs.output", role_tag="sink"),
    ]
    edges = [
        EdgeSpec("query__draft", "query", "draft"),
        EdgeSpec("draft__fix", "draft", "fix"),
        EdgeSpec("fix__out", "fix", "out"),
    ]
    initial_graph = graph_spec("constraintsat-initial", nodes, edges, inputs=["query"], outputs=["out"])
    space = ConfigSpace(
        (
            text_param("draft.prompt", "draft", vocabulary, max_tokens=max(1, n_constraint_kinds - 2)),
            text_param("fix.prompt", "fix", vocabulary, max_tokens=1),
        )
    )

    checker_template = NodeTemplate(
        base_id="check",
        role_tag="validate",
        function_ref="cs.checker",
        input_schema=MESSAGE,
        output_schema=MESSAGE,
        params=(text_param("prompt", "", vocabulary, max_tokens=1),),
    )
    audit_template = NodeTemplate(
        base_id="audit",
        role_tag="audit",
        function_ref="cs.expensive",
        input_schema=MESSAGE,
        output_schema=MESSAGE,
    )
    library = (checker_template, audit_template)

    def catalog_for(graph: GraphSpec) -> list[GraphOperator]:
        ops: list[GraphOperator] = []
        for template in library:
            for edge in graph.edges:
                ops.append(insert_node(template, edge.edge_id))
        protected = set(graph.inputs) | set(graph.outputs)
        for node in graph.nodes:
            if node.node_id not in protected:
                ops.append(remove_node(node.node_id))
        for edge in graph.edges:
            if edge.gate is None and graph.node(edge.source).role_tag == "validate":
                ops.append(add_gate(edge.edge_id, GatePredicate("issues", "not-equals", "")))
        return sorted(ops, key=lambda op: op.operator_id)

    return TaskBundle(
        name="constraintsat",
        registry=_registry(),
        metric=metric,
        initial_graph=initial_graph,
        initial_space=space,
        initial_assignment=default_assignment(space),
        node_library=library,
        make_tasks=make_tasks,
        catalog_for=catalog_for,
        notes=f"kinds={n_constraint_kinds}",
        extras={"kinds": kinds, "vocabulary": vocabulary, "checker": checker, "compose": compose_response},
    )
