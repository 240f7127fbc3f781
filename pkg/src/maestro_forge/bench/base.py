"""Task bundle container and the by-name registry the CLI uses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..evaluation import Metric, TaskInstance
from ..execution import NodeFunctionRegistry
from ..graph import GraphSpec
from ..operators import GraphOperator, NodeTemplate
from ..params import ConfigAssignment, ConfigSpace


@dataclass
class TaskBundle:
    """Everything a run needs: initial design, node library, tasks, scoring.

    ``make_tasks(count, seed)`` is a pure generator; ``catalog_for`` builds
    the concrete operator catalog for whatever the incumbent graph looks
    like (templates from the node library applied to its current edges).
    """

    name: str
    registry: NodeFunctionRegistry
    metric: Metric
    initial_graph: GraphSpec
    initial_space: ConfigSpace
    initial_assignment: ConfigAssignment
    node_library: tuple[NodeTemplate, ...]
    make_tasks: Callable[[int, int], list[TaskInstance]]
    catalog_for: Callable[[GraphSpec], list[GraphOperator]]
    notes: str = ""
    extras: dict = field(default_factory=dict)


def bundle_by_name(name: str, **kwargs) -> TaskBundle:
    from .constraintsat import make_constraintsat
    from .echo import make_echo
    from .noisychain import make_noisychain

    factories = {
        "noisychain": make_noisychain,
        "constraintsat": make_constraintsat,
        "echo": make_echo,
    }
    if name not in factories:
        raise KeyError(f"unknown task bundle {name!r}; available: {sorted(factories)}")
    return factories[name](**kwargs)


BUNDLE_NAMES = ("constraintsat", "echo", "noisychain")
