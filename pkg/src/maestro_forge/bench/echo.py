"""Minimal single-node bundle: echo the input text, exact-match scoring."""

from __future__ import annotations

from ..evaluation import Metric, TaskInstance
from ..execution import NodeFunctionRegistry
from ..graph import GraphSpec, NodeSpec, graph_spec
from ..params import ConfigSpace
from ..schema import TEXT
from .base import TaskBundle


def make_echo(seed: int = 0) -> TaskBundle:
    reg = NodeFunctionRegistry()
    reg.register("echo.identity", lambda value, params, s: (value, 1.0))

    def make_tasks(count: int, task_seed: int) -> list[TaskInstance]:
        return [
            TaskInstance(f"echo-{task_seed}-{i}", {"echo": f"msg-{task_seed}-{i}"}, {"expected": f"msg-{task_seed}-{i}"})
            for i in range(count)
        ]

    metric = Metric(
        "exact-match",
        lambda outputs, task: 100.0 if outputs["echo"] == task.metadata["expected"] else 0.0,
    )
    initial = graph_spec(
        "echo-initial",
        [NodeSpec("echo", TEXT, TEXT, "echo.identity", role_tag="relay")],
        [],
        inputs=["echo"],
        outputs=["echo"],
    )
    return TaskBundle(
        name="echo",
        registry=reg,
        metric=metric,
        initial_graph=initial,
        initial_space=ConfigSpace(),
        initial_assignment={},
        node_library=(),
        make_tasks=make_tasks,
        catalog_for=lambda graph: [],
    )
