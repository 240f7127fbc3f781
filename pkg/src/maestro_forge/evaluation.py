"""Rollout evaluation: scoring, utility estimates, and budget accounting.

The BudgetLedger is the single synchronized object in the engine: charging
is an atomic compare-and-increment, and a rollout is charged before it
executes, so a crash mid-rollout still counts against the cap.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import BudgetExceeded, MaestroError
from .execution import ExecutionTrace, run_trace
from .feedback import FeedbackItem
from .graph import GraphSpec, ValidatedGraph
from .params import ConfigAssignment


class BudgetLedger:
    """Rollout and cost accounting; never admits more than ``cap`` rollouts."""

    def __init__(self, cap: int, cost_cap: float = math.inf):
        self.cap = int(cap)
        self.cost_cap = float(cost_cap)
        self.used = 0
        self.cost_sum = 0.0
        self._lock = threading.Lock()

    def charge(self, n: int = 1) -> None:
        """Atomically add ``n`` rollouts, or fail having changed nothing."""
        if n < 1:
            raise MaestroError("charge needs a positive rollout count")
        with self._lock:
            if self.used + n > self.cap:
                raise BudgetExceeded(f"{self.used} used of {self.cap}, cannot charge {n}")
            self.used += n

    def add_cost(self, cost: float) -> None:
        with self._lock:
            self.cost_sum += float(cost)

    @property
    def remaining(self) -> int:
        return self.cap - self.used


def charge(ledger: BudgetLedger, n: int) -> None:
    ledger.charge(n)


@dataclass(frozen=True)
class TaskInstance:
    task_id: str
    inputs: dict  # one value per graph input node
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Metric:
    """Maps (final outputs, task) to a score in [0, 100], plus optional feedback."""

    metric_id: str
    score_fn: Callable[[dict, TaskInstance], float]
    feedback_fn: Callable[[dict, TaskInstance], Sequence[FeedbackItem]] | None = None


@dataclass(frozen=True)
class RolloutRecord:
    task_id: str
    seed: int
    trace: ExecutionTrace
    score: float
    cost: float
    feedback: tuple[FeedbackItem, ...] = ()


@dataclass(frozen=True)
class UtilityEstimate:
    """Budget-aware mean utility over a fixed minibatch and seed schedule."""

    mean: float
    count: int
    mean_cost: float
    seeds: tuple[int, ...]
    task_ids: tuple[str, ...] = ()
    partial: bool = False

    def same_schedule(self, other: "UtilityEstimate") -> bool:
        return self.seeds == other.seeds and self.task_ids == other.task_ids


def matches_schedule(estimate: UtilityEstimate | None, tasks: Sequence[TaskInstance], seeds: Sequence[int]) -> bool:
    return (
        estimate is not None
        and not estimate.partial
        and estimate.seeds == tuple(seeds)
        and estimate.task_ids == tuple(t.task_id for t in tasks)
    )


def run_rollout(
    vgraph: ValidatedGraph,
    config: ConfigAssignment,
    task: TaskInstance,
    seed: int,
    ledger: BudgetLedger,
    metric: Metric,
    history=None,
) -> RolloutRecord:
    """Charge one rollout, execute, score, and extract feedback.

    A failed trace scores 0 and carries a node-failure feedback item; the
    metric never sees the designated failure output in that case.
    """
    trace = run_trace(vgraph, config, task.inputs, seed, ledger)
    items: list[FeedbackItem] = []
    if trace.failure is not None:
        score = 0.0
        items.append(
            FeedbackItem(
                kind="node-failure",
                payload=trace.failure.detail,
                subject=trace.failure.node_id,
                task_id=task.task_id,
            )
        )
    else:
        score = float(metric.score_fn(trace.final_outputs, task))
        if not (math.isfinite(score) and 0.0 <= score <= 100.0):
            raise MaestroError(f"metric {metric.metric_id!r} produced out-of-range score {score!r}")
        if metric.feedback_fn is not None:
            for item in metric.feedback_fn(trace.final_outputs, task):
                items.append(item if item.task_id else item.with_task(task.task_id))
    for entry in trace.entries:
        if entry.feedback:
            items.append(FeedbackItem("free-text", entry.feedback, subject=entry.node_id, task_id=task.task_id))
    record = RolloutRecord(task.task_id, seed, trace, score, trace.total_cost, tuple(items))
    if history is not None:
        history.record_rollout(record)
    return record


def estimate_utility(
    vgraph: ValidatedGraph,
    config: ConfigAssignment,
    minibatch: Sequence[TaskInstance],
    seeds: Sequence[int],
    ledger: BudgetLedger,
    metric: Metric,
    history=None,
    record_sink: list | None = None,
) -> UtilityEstimate:
    """Mean score over the minibatch under a caller-fixed seed schedule.

    Candidates compared within one search step must share the schedule
    (common random numbers).  If the ledger dries up mid-batch the prefix
    estimate is returned flagged ``partial``.
    """
    if len(minibatch) != len(seeds) or not minibatch:
        raise MaestroError("minibatch and seed schedule must align and be nonempty")
    if ledger.remaining < 1:
        raise BudgetExceeded("no rollouts remaining before the minibatch")
    scores: list[float] = []
    costs: list[float] = []
    used_seeds: list[int] = []
    task_ids: list[str] = []
    partial = False
    for task, seed in zip(minibatch, seeds):
        try:
            record = run_rollout(vgraph, config, task, seed, ledger, metric, history=history)
        except BudgetExceeded:
            partial = True
            break
        if record_sink is not None:
            record_sink.append(record)
        scores.append(record.score)
        costs.append(record.cost)
        used_seeds.append(seed)
        task_ids.append(task.task_id)
    return UtilityEstimate(
        mean=sum(scores) / len(scores),
        count=len(scores),
        mean_cost=sum(costs) / len(costs),
        seeds=tuple(used_seeds),
        task_ids=tuple(task_ids),
        partial=partial,
    )


def structure_complexity(graph: GraphSpec | ValidatedGraph, weights: tuple[float, float]) -> float:
    """Weighted node/edge count used as the structure regularizer."""
    w_nodes, w_edges = weights
    if w_nodes < 0 or w_edges < 0:
        raise MaestroError("structure weights must be non-negative")
    spec = graph.spec if isinstance(graph, ValidatedGraph) else graph
    return w_nodes * len(spec.nodes) + w_edges * len(spec.edges)
