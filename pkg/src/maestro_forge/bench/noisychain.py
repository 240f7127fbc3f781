"""Vector-pipeline bundle: recover a hidden normalize/clip/scale composition.

Tasks are random vectors x with target y = clip(normalize(x)) * g_star;
the initial design is a lone trainable scale stage, so structure search
must discover the missing preprocessing stages while config search tunes
the gain.  With noise_level 0 every node is deterministic.
"""

from __future__ import annotations

import math
import random

from ..errors import MaestroError
from ..evaluation import Metric, TaskInstance
from ..execution import NodeFunctionRegistry
from ..graph import EdgeSpec, GraphSpec, NodeSpec, graph_spec
from ..operators import GraphOperator, NodeTemplate, change_node_type, insert_node, remove_node
from ..params import ConfigSpace, choice_param, default_assignment, float_param
from ..schema import vector
from ..seeding import derive_seed
from .base import TaskBundle

G_STAR = 1.5
CLIP_BOUND = 0.5
STRAY_NOISE = 0.3  # the library's noise stage always jitters by this much
EXPENSIVE_COST = 500.0

KERNELS = ("linear", "relu", "abs")


def _norm(v) -> float:
    return math.sqrt(sum(x * x for x in v))


def _jitter(v, level: float, seed: int):
    if level == 0.0:
        return v
    rng = random.Random(seed)
    return tuple(x + level * rng.gauss(0.0, 1.0) for x in v)


def _apply_kernel(kernel: str, v):
    if kernel == "relu":
        return tuple(max(0.0, x) for x in v)
    if kernel == "abs":
        return tuple(abs(x) for x in v)
    return v


def _truth(x):
    n = _norm(x)
    unit = tuple(xi / n for xi in x) if n > 1e-12 else x
    clipped = tuple(min(max(xi, -CLIP_BOUND), CLIP_BOUND) for xi in unit)
    return tuple(G_STAR * xi for xi in clipped)


def _registry(noise_level: float) -> NodeFunctionRegistry:
    def input_fn(value, params, seed):
        return value, 0.0

    def normalize_fn(value, params, seed):
        n = _norm(value)
        out = tuple(x / n for x in value) if n > 1e-12 else value
        return _jitter(out, noise_level, seed), 1.0

    def clip_fn(value, params, seed):
        out = tuple(min(max(x, -CLIP_BOUND), CLIP_BOUND) for x in value)
        return _jitter(out, noise_level, seed), 1.0

    def scale_fn(value, params, seed):
        gain = float(params.get("gain", 1.0))
        bias = float(params.get("bias", 0.0))
        out = _apply_kernel(params.get("kernel", "linear"), tuple(gain * x + bias for x in value))
        return _jitter(out, noise_level, seed), 1.0

    def identity_fn(value, params, seed):
        return _jitter(value, noise_level, seed), 1.0

    def noise_fn(value, params, seed):
        return _jitter(value, STRAY_NOISE, derive_seed(seed, "stray")), 1.0

    def expensive_fn(value, params, seed):
        return value, EXPENSIVE_COST

    reg = NodeFunctionRegistry()
    reg.register("nc.input", input_fn)
    reg.register("nc.normalize", normalize_fn)
    reg.register("nc.clip", clip_fn)
    reg.register("nc.scale", scale_fn)
    reg.register("nc.identity", identity_fn)
    reg.register("nc.noise", noise_fn)
    reg.register("nc.expensive", expensive_fn)
    return reg


def make_noisychain(dim: int = 6, noise_level: float = 0.0, seed: int = 0) -> TaskBundle:
    if dim < 1:
        raise MaestroError("dim must be >= 1")
    schema = vector(dim)

    def make_tasks(count: int, task_seed: int) -> list[TaskInstance]:
        tasks = []
        for i in range(count):
            rng = random.Random(derive_seed(seed, "task", task_seed, i))
            raw = [rng.gauss(0.0, 1.0) for _ in range(dim)]
            n = _norm(raw) or 1.0
            # wide radius spread: no single linear gain fits all tasks,
            # so the missing normalize stage dominates any config tuning
            radius = rng.uniform(0.25, 4.0)
            x = tuple(radius * xi / n for xi in raw)
            tasks.append(TaskInstance(f"nc-{task_seed}-{i}", {"in": x}, {"target": _truth(x)}))
        return tasks

    def score_fn(final_outputs, task) -> float:
        out = final_outputs["scale"]
        target = task.metadata["target"]
        err = _norm(tuple(a - b for a, b in zip(out, target)))
        base = _norm(target)
        return 100.0 * max(0.0, 1.0 - err / base) if base > 0 else (100.0 if err == 0 else 0.0)

    metric = Metric("noisychain-relative-error", score_fn)

    nodes = [
        NodeSpec("in", schema, schema, "nc.input", role_tag="source"),
        NodeSpec(
            "scale",
            schema,
            schema,
            "nc.scale",
            config_param_refs=("scale.gain", "scale.bias", "scale.kernel"),
            role_tag="transform",
        ),
    ]
    edges = [EdgeSpec("in__scale", "in", "scale")]
    initial_graph = graph_spec("noisychain-initial", nodes, edges, inputs=["in"], outputs=["scale"])
    space = ConfigSpace(
        (
            float_param("scale.gain", "scale", 0.0, 3.0),
            float_param("scale.bias", "scale", -1.0, 1.0),
            choice_param("scale.kernel", "scale", KERNELS),
        )
    )

    library = tuple(
        NodeTemplate(base_id, role, f"nc.{fn}", schema, schema)
        for base_id, role, fn in (
            ("normalize", "normalize", "normalize"),
            ("clip", "clip", "clip"),
            ("ident", "relay", "identity"),
            ("jitter", "perturb", "noise"),
            ("audit", "audit", "expensive"),
        )
    )

    swappable = ("nc.normalize", "nc.clip", "nc.identity", "nc.noise")

    def catalog_for(graph: GraphSpec) -> list[GraphOperator]:
        ops: list[GraphOperator] = []
        for template in library:
            for edge in graph.edges:
                ops.append(insert_node(template, edge.edge_id))
        protected = set(graph.inputs) | set(graph.outputs)
        for node in graph.nodes:
            if node.node_id in protected:
                continue
            ops.append(remove_node(node.node_id))
            for fn in swappable:
                if fn != node.function_ref:
                    ops.append(change_node_type(node.node_id, fn))
        return sorted(ops, key=lambda op: op.operator_id)

    return TaskBundle(
        name="noisychain",
        registry=_registry(noise_level),
        metric=metric,
        initial_graph=initial_graph,
        initial_space=space,
        initial_assignment=default_assignment(space),
        node_library=library,
        make_tasks=make_tasks,
        catalog_for=catalog_for,
        notes=f"dim={dim} noise={noise_level}",
        extras={"g_star": G_STAR, "truth": _truth, "dim": dim},
    )
