"""Structural search within an edit-distance trust region (the G-step).

The neighborhood enumerates all applicable operator sequences whose summed
unit costs stay inside the radius, deduplicated by canonical serialization
of the resulting graph.  Candidates are scored on the step's common seed
schedule with warm-started configurations, so the acceptance comparison
against the incumbent is paired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .documents import canonical_graph
from .errors import BudgetExceeded, GraphValidationError, InapplicableEdit, MaestroError
from .evaluation import (
    BudgetLedger,
    Metric,
    TaskInstance,
    UtilityEstimate,
    estimate_utility,
    matches_schedule,
    structure_complexity,
)
from .execution import NodeFunctionRegistry
from .feedback import EditProposal
from .graph import GraphSpec, ValidatedGraph, validate_graph
from .operators import EditSequence, GraphOperator, SpaceDelta, apply_edits
from .params import ConfigAssignment, ConfigSpace, inherit_assignment, mutate_assignment
from .seeding import derive_seed


@dataclass
class CandidateGraph:
    candidate_id: str
    spec: GraphSpec
    space: ConfigSpace
    assignment: ConfigAssignment
    edits: EditSequence
    omega: float = 0.0
    estimate: UtilityEstimate | None = None
    structure_feasible: bool = True
    cost_feasible: bool | None = None
    scored: bool = False

    @property
    def feasible(self) -> bool:
        return bool(self.structure_feasible and self.cost_feasible and self.scored)


def neighborhood(vgraph: ValidatedGraph, catalog: Sequence[GraphOperator], radius: int) -> list[EditSequence]:
    """All applicable edit sequences with total distance <= radius.

    Single operators first, then ordered pairs (radius permitting), in
    (operator id, pair order) enumeration order; sequences reproducing an
    already-seen graph (the incumbent included) are dropped.
    """
    if radius < 1:
        raise MaestroError("trust radius must be >= 1")
    ops = sorted(catalog, key=lambda op: op.operator_id)
    seen = {canonical_graph(vgraph.spec)}
    out: list[EditSequence] = []

    def consider(seq: EditSequence) -> bool:
        try:
            spec, delta = apply_edits(vgraph.spec, vgraph.space, seq)
            validate_graph(spec, vgraph.registry, delta.apply(vgraph.space))
        except (InapplicableEdit, GraphValidationError):
            return False
        key = canonical_graph(spec)
        if key in seen:
            return False
        seen.add(key)
        out.append(seq)
        return True

    for op in ops:
        if op.unit_cost <= radius:
            consider(EditSequence((op,)))
    if radius >= 2:
        for first in ops:
            for second in ops:
                if first.unit_cost + second.unit_cost <= radius:
                    consider(EditSequence((first, second)))
    return out


def warm_start(new_space: ConfigSpace, incumbent_assignment: ConfigAssignment, seed: int = 0) -> ConfigAssignment:
    """Inherit the incumbent's values, then briefly tune newly created params.

    The tuning pass is one mutation wave of size min(3, new-param count),
    restricted to the new params; inherited values are never touched.
    """
    inherited = inherit_assignment(new_space, incumbent_assignment)
    new_params = tuple(name for name in new_space.names if name not in incumbent_assignment)
    if not new_params:
        return inherited
    return mutate_assignment(new_space, inherited, min(3, len(new_params)), seed, params=new_params)


def score_candidate(
    candidate: CandidateGraph,
    tasks: Sequence[TaskInstance],
    seeds: Sequence[int],
    ledger: BudgetLedger,
    metric: Metric,
    registry: NodeFunctionRegistry,
    tau: float,
    kappa: float,
    omega_weights: tuple[float, float],
    history=None,
    iteration: int = 0,
    record_sink: list | None = None,
) -> CandidateGraph:
    """Evaluate one candidate graph; structure-infeasible ones cost nothing."""
    candidate.omega = structure_complexity(candidate.spec, omega_weights)
    candidate.structure_feasible = candidate.omega <= tau
    if not candidate.structure_feasible:
        return candidate
    vgraph = validate_graph(candidate.spec, registry, candidate.space)
    if history is not None:
        history.set_context(iteration, "g-step", candidate.candidate_id)
    candidate.estimate = estimate_utility(
        vgraph, candidate.assignment, tasks, seeds, ledger, metric, history=history, record_sink=record_sink
    )
    candidate.scored = not candidate.estimate.partial
    candidate.cost_feasible = candidate.scored and candidate.estimate.mean_cost <= kappa
    return candidate


@dataclass
class GStepReport:
    radius: int
    candidates: list[CandidateGraph] = field(default_factory=list)
    rollouts_used: int = 0
    incumbent_spec: GraphSpec | None = None
    catalog: tuple[GraphOperator, ...] = ()
    stopped: str = ""


def run_g_step(
    vgraph: ValidatedGraph,
    space: ConfigSpace,
    incumbent_assignment: ConfigAssignment,
    incumbent_estimate: UtilityEstimate | None,
    catalog: Sequence[GraphOperator],
    radius: int,
    budget: int,
    tau: float,
    kappa: float,
    omega_weights: tuple[float, float],
    seed: int,
    proposals: Sequence[EditProposal],
    tasks: Sequence[TaskInstance],
    seeds: Sequence[int],
    ledger: BudgetLedger,
    metric: Metric,
    history=None,
    iteration: int = 0,
    record_sink: list | None = None,
) -> tuple[CandidateGraph, GStepReport]:
    """Score trust-region neighbors and return the best feasible design.

    The incumbent participates on the same schedule (re-scored out of this
    step's budget only if its estimate is stale); with zero budget or an
    empty neighborhood it is returned unchanged.
    """
    report = GStepReport(radius=radius, incumbent_spec=vgraph.spec, catalog=tuple(catalog))
    start_used = ledger.used
    minibatch = len(tasks)

    incumbent = CandidateGraph(
        candidate_id=f"g{iteration}.0",
        spec=vgraph.spec,
        space=space,
        assignment=dict(incumbent_assignment),
        edits=EditSequence(()),
    )
    incumbent.omega = structure_complexity(vgraph.spec, omega_weights)
    incumbent.structure_feasible = incumbent.omega <= tau
    if matches_schedule(incumbent_estimate, tasks, seeds):
        incumbent.estimate = incumbent_estimate
        incumbent.scored = True
        incumbent.cost_feasible = incumbent_estimate.mean_cost <= kappa
    elif budget >= minibatch and ledger.remaining >= 1:
        if history is not None:
            history.set_context(iteration, "g-step", incumbent.candidate_id)
        try:
            incumbent.estimate = estimate_utility(
                vgraph, incumbent.assignment, tasks, seeds, ledger, metric, history=history, record_sink=record_sink
            )
            incumbent.scored = not incumbent.estimate.partial
            incumbent.cost_feasible = incumbent.scored and incumbent.estimate.mean_cost <= kappa
        except BudgetExceeded:
            report.stopped = "ledger-exhausted"
    report.candidates.append(incumbent)

    sequences = neighborhood(vgraph, catalog, radius)
    priority = {p.target: p.priority for p in proposals}

    def order_key(indexed):
        idx, seq = indexed
        best = max((priority.get(op.operator_id, 0.0) for op in seq.ops), default=0.0)
        return (-best, idx)

    ordered = [seq for _, seq in sorted(enumerate(sequences), key=order_key)]

    for i, seq in enumerate(ordered, start=1):
        spec, delta = apply_edits(vgraph.spec, vgraph.space, seq)
        new_space = delta.apply(space)
        candidate = CandidateGraph(
            candidate_id=f"g{iteration}.{i}",
            spec=spec,
            space=new_space,
            assignment=warm_start(new_space, incumbent_assignment, derive_seed(seed, "warm", i)),
            edits=seq,
        )
        candidate.omega = structure_complexity(spec, omega_weights)
        candidate.structure_feasible = candidate.omega <= tau
        if candidate.structure_feasible:
            if ledger.used - start_used + minibatch > budget or ledger.remaining < 1:
                report.candidates.append(candidate)  # enumerated but unscored: budget spent
                report.stopped = report.stopped or "budget-exhausted"
                continue
            try:
                score_candidate(
                    candidate, tasks, seeds, ledger, metric, vgraph.registry, tau, kappa, omega_weights,
                    history=history, iteration=iteration, record_sink=record_sink,
                )
            except BudgetExceeded:
                report.stopped = "ledger-exhausted"
        report.candidates.append(candidate)

    report.rollouts_used = ledger.used - start_used
    best = incumbent
    for candidate in report.candidates[1:]:
        if not candidate.feasible:
            continue
        if not best.feasible or candidate.estimate.mean > best.estimate.mean:
            best = candidate
    return best, report
