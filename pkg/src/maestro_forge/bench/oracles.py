"""Brute-force oracles: exhaustive config/graph enumeration, edit distance.

Oracles are pure cross-checks.  They charge a private ledger (never the
optimizer's), reuse only the leaf contracts they verify (execution,
warm-start derivation), and enumerate by direct iteration so the search
code's budgeting/ordering/dedup logic is exercised against an independent
argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..documents import canonical_graph
from ..errors import GraphValidationError, InapplicableEdit, SpaceTooLarge
from ..evaluation import BudgetLedger, Metric, TaskInstance, estimate_utility
from ..execution import NodeFunctionRegistry
from ..graph import GraphSpec, ValidatedGraph, validate_graph
from ..graph_search import warm_start
from ..operators import EditSequence, GraphOperator, apply_edits
from ..params import ConfigAssignment, ConfigSpace, enumerate_grid, grid_size, inherit_assignment
from ..seeding import derive_seed

ORACLE_CAP = 10_000


def _oracle_ledger() -> BudgetLedger:
    return BudgetLedger(10**9)


def oracle_enumerate_configs(
    vgraph: ValidatedGraph,
    space: ConfigSpace,
    metric: Metric,
    tasks: Sequence[TaskInstance],
    seeds: Sequence[int],
    cap: int = ORACLE_CAP,
) -> tuple[ConfigAssignment, float]:
    """Exact argmax over the discretized space with fixed seeds."""
    ledger = _oracle_ledger()
    best: tuple[ConfigAssignment, float] | None = None
    for assignment in enumerate_grid(space, cap):
        estimate = estimate_utility(vgraph, assignment, tasks, seeds, ledger, metric)
        if best is None or estimate.mean > best[1]:
            best = (assignment, estimate.mean)
    if best is None:
        raise SpaceTooLarge("empty enumeration")
    return best


@dataclass
class GraphOracleRow:
    edits: str
    spec: GraphSpec
    assignment: ConfigAssignment
    score: float
    omega_ok: bool = True


@dataclass
class GraphOracleResult:
    spec: GraphSpec
    assignment: ConfigAssignment
    score: float
    rows: list[GraphOracleRow] = field(default_factory=list)


def _neighbor_specs(spec: GraphSpec, space: ConfigSpace, registry, catalog, radius):
    """Independent trust-region enumeration (singles, then ordered pairs)."""
    seen = {canonical_graph(spec)}
    ops = sorted(catalog, key=lambda op: op.operator_id)
    sequences = [EditSequence((op,)) for op in ops if op.unit_cost <= radius]
    if radius >= 2:
        for first in ops:
            for second in ops:
                if first.unit_cost + second.unit_cost <= radius:
                    sequences.append(EditSequence((first, second)))
    for seq in sequences:
        try:
            candidate, delta = apply_edits(spec, space, seq)
            new_space = delta.apply(space)
            validate_graph(candidate, registry, new_space)
        except (InapplicableEdit, GraphValidationError):
            continue
        key = canonical_graph(candidate)
        if key in seen:
            continue
        seen.add(key)
        yield seq, candidate, new_space


def oracle_enumerate_graphs(
    vgraph: ValidatedGraph,
    space: ConfigSpace,
    base_assignment: ConfigAssignment,
    catalog: Sequence[GraphOperator],
    radius: int,
    metric: Metric,
    tasks: Sequence[TaskInstance],
    seeds: Sequence[int],
    warm_seed: int = 0,
    sweep_new_params: bool = True,
    cap: int = ORACLE_CAP,
) -> GraphOracleResult:
    """Exhaustively score the incumbent and every trust-region neighbor.

    Each neighbor is scored at its warm-start configuration and (when
    ``sweep_new_params``) at every grid setting of its newly created
    params, taking the per-neighbor max.
    """
    registry = vgraph.registry
    ledger = _oracle_ledger()
    rows: list[GraphOracleRow] = []

    base_est = estimate_utility(vgraph, base_assignment, tasks, seeds, ledger, metric)
    rows.append(GraphOracleRow("(incumbent)", vgraph.spec, dict(base_assignment), base_est.mean))

    evaluations = 0
    for seq, spec, new_space in _neighbor_specs(vgraph.spec, space, registry, catalog, radius):
        new_vgraph = validate_graph(spec, registry, new_space)
        warm = warm_start(new_space, base_assignment, derive_seed(warm_seed, "warm", seq.describe()))
        configs = [warm]
        if sweep_new_params:
            new_names = tuple(n for n in new_space.names if n not in base_assignment)
            if new_names:
                sub = ConfigSpace(tuple(new_space.get(n) for n in new_names))
                if grid_size(sub, cap + 1) > cap:
                    raise SpaceTooLarge("new-parameter grid too large for the graph oracle")
                inherited = inherit_assignment(new_space, base_assignment)
                for grid_part in enumerate_grid(sub, cap):
                    configs.append({**inherited, **grid_part})
        evaluations += len(configs)
        if evaluations > cap:
            raise SpaceTooLarge("graph oracle workload exceeds the cap")
        best_here: GraphOracleRow | None = None
        for assignment in configs:
            est = estimate_utility(new_vgraph, assignment, tasks, seeds, ledger, metric)
            if best_here is None or est.mean > best_here.score:
                best_here = GraphOracleRow(seq.describe(), spec, assignment, est.mean)
        rows.append(best_here)

    best = rows[0]
    for row in rows[1:]:
        if row.score > best.score:
            best = row
    return GraphOracleResult(best.spec, best.assignment, best.score, rows)


def oracle_edit_distance(
    start: GraphSpec,
    space: ConfigSpace,
    registry: NodeFunctionRegistry,
    target: GraphSpec,
    catalog: Sequence[GraphOperator],
    max_cost: int,
) -> int | None:
    """Minimum summed unit cost of an operator sequence start -> target.

    Breadth-first over sequences up to ``max_cost``; None when the target
    is unreachable within that bound.  Exponential in the bound: meant for
    small graphs and radii.
    """
    goal = canonical_graph(target)
    if canonical_graph(start) == goal:
        return 0
    frontier: list[tuple[GraphSpec, ConfigSpace, int]] = [(start, space, 0)]
    visited = {canonical_graph(start): 0}
    best: int | None = None
    ops = sorted(catalog, key=lambda op: op.operator_id)
    while frontier:
        spec, cur_space, cost = frontier.pop(0)
        for op in ops:
            next_cost = cost + op.unit_cost
            if next_cost > max_cost or (best is not None and next_cost >= best):
                continue
            try:
                candidate, delta = apply_edits(spec, cur_space, EditSequence((op,)))
                new_space = delta.apply(cur_space)
                validate_graph(candidate, registry, new_space)
            except (InapplicableEdit, GraphValidationError):
                continue
            key = canonical_graph(candidate)
            if key == goal:
                best = next_cost if best is None else min(best, next_cost)
                continue
            if key in visited and visited[key] <= next_cost:
                continue
            visited[key] = next_cost
            frontier.append((candidate, new_space, next_cost))
    return best
