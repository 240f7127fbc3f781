"""Outer block-coordinate loop: alternate config and structure search.

Each iteration runs a C-step (tune the configuration on the fixed graph),
then a G-step (score trust-region structural edits with the tuned config
carried over), and accepts the new structure only under a guarded
improvement test on paired estimates.  The evaluation schedule (minibatch
plus seed list) is drawn once per run from the master seed, which makes
the accepted-estimate sequence exactly monotone and every comparison
paired; incumbent estimates are cached while the schedule matches and
re-scored (out of the G-step budget) only when stale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .config_search import CandidateConfig, CStepReport, run_c_step
from .errors import BudgetExceeded, InvalidRunSpec, MaestroError, ScheduleMismatch
from .evaluation import BudgetLedger, UtilityEstimate, estimate_utility, structure_complexity
from .feedback import EditProposal, collect, distill
from .graph import GraphSpec, ValidatedGraph, validate_graph
from .graph_search import CandidateGraph, GStepReport, run_g_step
from .history import HistoryLog, RunReport
from .params import ConfigAssignment, ConfigSpace
from .seeding import derive_seed

MODES = ("joint", "config-only")


@dataclass(frozen=True)
class AcceptanceRule:
    """Tolerance schedule for the guarded improvement test."""

    xi: float | tuple[float, ...] = 2.0

    def xi_for(self, iteration: int) -> float:
        if isinstance(self.xi, (int, float)):
            value = float(self.xi)
        else:
            if not self.xi:
                raise InvalidRunSpec("empty tolerance schedule")
            value = float(self.xi[min(iteration - 1, len(self.xi) - 1)])
        if value < 0:
            raise InvalidRunSpec("acceptance tolerance must be >= 0")
        return value


def accept(candidate: UtilityEstimate, base: UtilityEstimate, xi: float) -> bool:
    """Guarded improvement on paired estimates: mean >= base mean + xi."""
    if xi < 0:
        raise MaestroError("tolerance must be >= 0")
    if not candidate.same_schedule(base):
        raise ScheduleMismatch("estimates compared across different seed schedules")
    return candidate.mean >= base.mean + xi


@dataclass
class RunSpec:
    budget: int
    max_iters: int = 8
    bt: int | None = None  # per-iteration config-step rollouts
    bpt: int | None = None  # per-iteration graph-step rollouts
    radius: int = 1
    tau: float | None = None  # None: omega(initial graph) + 10
    kappa: float = 50.0
    strategy: str = "smbo"
    master_seed: int = 0
    mode: str = "joint"
    minibatch: int = 5
    acceptance: AcceptanceRule = field(default_factory=AcceptanceRule)
    explore_weight: float = 20.0
    archive_capacity: int = 8
    omega_weights: tuple[float, float] = (1.0, 1.0)

    def validate(self) -> None:
        if self.budget < 0:
            raise InvalidRunSpec("budget must be >= 0")
        if self.max_iters < 0:
            raise InvalidRunSpec("max iterations must be >= 0")
        if self.minibatch < 1:
            raise InvalidRunSpec("minibatch size must be >= 1")
        if self.radius < 1:
            raise InvalidRunSpec("trust radius must be >= 1")
        if self.mode not in MODES:
            raise InvalidRunSpec(f"unknown mode {self.mode!r}")
        if self.kappa <= 0:
            raise InvalidRunSpec("cost cap must be positive")
        if any(w < 0 for w in self.omega_weights):
            raise InvalidRunSpec("structure weights must be >= 0")
        bt, bpt = self.split()
        if self.max_iters and bt + bpt > self.budget:
            raise InvalidRunSpec("per-iteration split exceeds the total budget")

    def split(self) -> tuple[int, int]:
        """Per-iteration (config, graph) rollout budgets; default 2:1."""
        if self.bt is not None:
            bt = self.bt
            bpt = 0 if self.mode == "config-only" else (self.bpt if self.bpt is not None else max(0, bt // 2))
            return bt, bpt
        if self.max_iters == 0:
            return 0, 0
        per_iter = max(self.minibatch, (self.budget - self.minibatch) // self.max_iters)
        if self.mode == "config-only":
            return per_iter, 0
        bt = max(self.minibatch, (2 * per_iter) // 3)
        return bt, per_iter - bt


@dataclass
class OptimizerState:
    iteration: int
    graph: GraphSpec
    vgraph: ValidatedGraph
    space: ConfigSpace
    assignment: ConfigAssignment
    estimate: UtilityEstimate | None
    terminal: bool = False


@dataclass
class RunResult:
    graph: GraphSpec
    assignment: ConfigAssignment
    space: ConfigSpace
    history: HistoryLog
    report: RunReport
    state: OptimizerState
    c_reports: list[CStepReport] = field(default_factory=list)
    g_reports: list[GStepReport] = field(default_factory=list)
    baseline: UtilityEstimate | None = None

    @property
    def final_score(self) -> float:
        return self.state.estimate.mean if self.state.estimate is not None else math.nan


@dataclass
class _RunContext:
    bundle: object
    runspec: RunSpec
    ledger: BudgetLedger
    history: HistoryLog
    report: RunReport
    tasks: Sequence
    seeds: tuple[int, ...]
    tau: float
    proposals: list[EditProposal] = field(default_factory=list)
    c_reports: list[CStepReport] = field(default_factory=list)
    g_reports: list[GStepReport] = field(default_factory=list)


def run_iteration(state: OptimizerState, ctx: _RunContext) -> OptimizerState:
    """One C-step/G-step alternation with the guarded acceptance rule."""
    spec = ctx.runspec
    t = state.iteration + 1
    bt, bpt = spec.split()
    if ctx.ledger.remaining < spec.minibatch and state.estimate is None:
        state.terminal = True
        return state
    bt = min(bt, ctx.ledger.remaining)
    records: list = []

    best_cfg, c_report = run_c_step(
        state.vgraph,
        state.space,
        spec.strategy,
        ctx.tasks,
        ctx.seeds,
        bt,
        derive_seed(spec.master_seed, "c-step", t),
        ctx.ledger,
        ctx.bundle.metric,
        state.assignment,
        incumbent_estimate=state.estimate,
        proposals=ctx.proposals,
        kappa=spec.kappa,
        explore_weight=spec.explore_weight,
        archive_capacity=spec.archive_capacity,
        history=ctx.history,
        iteration=t,
        record_sink=records,
    )
    ctx.c_reports.append(c_report)
    assignment = dict(best_cfg.assignment)
    base_estimate = best_cfg.estimate
    catalog = ctx.bundle.catalog_for(state.graph)
    ctx.proposals = distill(collect(records), state.space, state.graph, catalog)

    accepted = False
    edit_text = ""
    g_best: CandidateGraph | None = None
    if spec.mode == "joint":
        bpt_t = min(bpt, ctx.ledger.remaining)
        g_best, g_report = run_g_step(
            state.vgraph,
            state.space,
            assignment,
            base_estimate,
            catalog,
            spec.radius,
            bpt_t,
            ctx.tau,
            spec.kappa,
            spec.omega_weights,
            derive_seed(spec.master_seed, "g-step", t),
            ctx.proposals,
            ctx.tasks,
            ctx.seeds,
            ctx.ledger,
            ctx.bundle.metric,
            history=ctx.history,
            iteration=t,
            record_sink=records,
        )
        ctx.g_reports.append(g_report)
        incumbent_candidate = g_report.candidates[0]
        if incumbent_candidate.estimate is not None and not incumbent_candidate.estimate.partial:
            base_estimate = incumbent_candidate.estimate  # re-scored stale incumbent
        if g_best.edits.ops and g_best.feasible and base_estimate is not None and not base_estimate.partial:
            accepted = accept(g_best.estimate, base_estimate, spec.acceptance.xi_for(t))

    if accepted:
        new_state = OptimizerState(
            iteration=t,
            graph=g_best.spec,
            vgraph=validate_graph(g_best.spec, ctx.bundle.registry, g_best.space),
            space=g_best.space,
            assignment=dict(g_best.assignment),
            estimate=g_best.estimate,
        )
        edit_text = g_best.edits.describe()
        ctx.history.record_edit(t, edit_text, g_best.spec.graph_id)
    else:
        new_state = OptimizerState(
            iteration=t,
            graph=state.graph,
            vgraph=state.vgraph,
            space=state.space,
            assignment=assignment,  # carry the tuned config even when the edit is rejected
            estimate=base_estimate if base_estimate is not None else state.estimate,
        )

    ctx.proposals = distill(
        collect(records), new_state.space, new_state.graph, ctx.bundle.catalog_for(new_state.graph)
    )
    ctx.report.add_row(
        iter=t,
        step="iteration",
        c_candidates=len(c_report.candidates),
        g_candidates=len(ctx.g_reports[-1].candidates) if spec.mode == "joint" else 0,
        rollouts=c_report.rollouts_used + (ctx.g_reports[-1].rollouts_used if spec.mode == "joint" else 0),
        incumbent_score=new_state.estimate.mean if new_state.estimate else None,
        incumbent_cost=new_state.estimate.mean_cost if new_state.estimate else None,
        incumbent_omega=structure_complexity(new_state.graph, spec.omega_weights),
        accepted=accepted,
        edit=edit_text,
    )
    return new_state


def run(runspec: RunSpec, bundle) -> RunResult:
    """Optimize a task bundle's initial design under the run spec."""
    runspec.validate()
    ledger = BudgetLedger(runspec.budget, runspec.kappa)
    history = HistoryLog()
    report = RunReport()
    vgraph = validate_graph(bundle.initial_graph, bundle.registry, bundle.initial_space)
    tau = runspec.tau if runspec.tau is not None else structure_complexity(bundle.initial_graph, runspec.omega_weights) + 10.0
    if structure_complexity(bundle.initial_graph, runspec.omega_weights) > tau:
        raise InvalidRunSpec("initial design violates the structure budget")

    tasks = bundle.make_tasks(runspec.minibatch, derive_seed(runspec.master_seed, "minibatch"))
    seeds = tuple(derive_seed(runspec.master_seed, "rollout", i) for i in range(len(tasks)))
    ctx = _RunContext(bundle, runspec, ledger, history, report, tasks, seeds, tau)

    assignment = dict(bundle.initial_assignment)
    baseline: UtilityEstimate | None = None
    history.set_context(0, "baseline", "c0.0")
    try:
        baseline = estimate_utility(vgraph, assignment, tasks, seeds, ledger, bundle.metric, history=history)
        if baseline.partial:
            baseline = None
    except BudgetExceeded:
        pass
    state = OptimizerState(0, bundle.initial_graph, vgraph, bundle.initial_space, assignment, baseline)
    report.add_row(
        iter=0,
        step="baseline",
        rollouts=ledger.used,
        incumbent_score=baseline.mean if baseline else None,
        incumbent_cost=baseline.mean_cost if baseline else None,
        incumbent_omega=structure_complexity(bundle.initial_graph, runspec.omega_weights),
        accepted=False,
        edit="",
    )
    if baseline is None:
        state.terminal = True

    for _ in range(runspec.max_iters):
        if state.terminal or ledger.remaining < runspec.minibatch:
            break
        state = run_iteration(state, ctx)

    report.finalize(ledger, history)
    return RunResult(
        graph=state.graph,
        assignment=state.assignment,
        space=state.space,
        history=history,
        report=report,
        state=state,
        c_reports=ctx.c_reports,
        g_reports=ctx.g_reports,
        baseline=baseline,
    )
