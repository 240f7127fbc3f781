"""Configuration search with the graph held fixed (the C-step).

Three pluggable strategies (factored-UCB surrogate, Pareto-evolutionary,
random) propose assignments that are all scored on one common seed
schedule, so comparisons are paired.  Proposals are deduplicated against
already-evaluated assignments and fall back to deterministic enumeration
of the discretized space when it is small enough, which makes the step
provably exhaustive under a sufficient budget.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from .errors import BudgetExceeded, EmptyArchive, MaestroError
from .evaluation import BudgetLedger, Metric, TaskInstance, UtilityEstimate, estimate_utility, matches_schedule
from .feedback import EditProposal
from .graph import ValidatedGraph
from .params import (
    ConfigAssignment,
    ConfigSpace,
    assignment_key,
    enumerate_grid,
    grid_size,
    mutate_assignment,
    sample_assignment,
    snap_to_grid,
)
from .seeding import derive_seed

PRIOR_MEAN = 50.0  # midpoint of the score range; avoids directional bias
ENUMERABLE_CAP = 10_000
STRATEGIES = ("smbo", "evolutionary", "random")


@dataclass
class CandidateConfig:
    candidate_id: str
    assignment: ConfigAssignment
    estimate: UtilityEstimate | None = None
    feasible: bool | None = None
    parent: str = ""
    edit: str = ""


# --- surrogate model (factored per-parameter value statistics) ---


def _bucket_keys(spec, value) -> list:
    """Buckets an observed value belongs to (text values hit one per token)."""
    if spec.kind == "choice":
        return [("choice", value)]
    if spec.kind in ("int", "float"):
        span = spec.hi - spec.lo
        if span <= 0:
            return [("decile", 0)]
        return [("decile", min(9, int((value - spec.lo) / span * 10)))]
    return [("token", tok) for tok in dict.fromkeys(value.split())]


def _all_buckets(spec) -> list:
    if spec.kind == "choice":
        return [("choice", v) for v in spec.choices]
    if spec.kind in ("int", "float"):
        return [("decile", i) for i in range(10)]
    return [("token", tok) for tok in spec.vocabulary]


class SurrogateModel:
    """Observation counts and online mean utility per (param, value bucket)."""

    def __init__(self):
        self.stats: dict[tuple, list] = {}  # (param, bucket) -> [count, mean]
        self.global_count = 0

    def bucket_stats(self, param: str, bucket) -> tuple[int, float]:
        count, mean = self.stats.get((param, bucket), (0, PRIOR_MEAN))
        return count, mean


def smbo_update(surrogate: SurrogateModel, space: ConfigSpace, assignment: ConfigAssignment, utility: float, cost: float) -> SurrogateModel:
    """Fold one observation into the matching buckets (online means)."""
    if not (0.0 <= utility <= 100.0):
        raise MaestroError(f"utility {utility!r} outside [0, 100]")
    for spec in space:
        for bucket in _bucket_keys(spec, assignment[spec.name]):
            entry = surrogate.stats.setdefault((spec.name, bucket), [0, 0.0])
            entry[0] += 1
            entry[1] += (utility - entry[1]) / entry[0]
    surrogate.global_count += 1
    return surrogate


def _ucb(surrogate: SurrogateModel, param: str, bucket, explore_weight: float) -> float:
    count, mean = surrogate.bucket_stats(param, bucket)
    bonus = explore_weight * math.sqrt(math.log(1 + surrogate.global_count) / (1 + count))
    return mean + bonus


def smbo_propose(surrogate: SurrogateModel, space: ConfigSpace, seed: int, explore_weight: float) -> ConfigAssignment:
    """Pick the UCB-max bucket per parameter, then a concrete value inside it."""
    rng = random.Random(seed)
    out: ConfigAssignment = {}
    for spec in space:
        buckets = _all_buckets(spec)
        scores = [_ucb(surrogate, spec.name, b, explore_weight) for b in buckets]
        best = max(scores)
        tied = [b for b, s in zip(buckets, scores) if s == best]
        bucket = tied[0] if len(tied) == 1 else rng.choice(tied)
        if spec.kind == "choice":
            out[spec.name] = bucket[1]
        elif spec.kind == "int":
            span = spec.hi - spec.lo
            lo = spec.lo + bucket[1] * span / 10
            hi = spec.lo + (bucket[1] + 1) * span / 10
            lo_i = max(int(spec.lo), math.ceil(lo))
            hi_i = min(int(spec.hi), math.floor(hi))
            out[spec.name] = rng.randint(lo_i, hi_i) if lo_i <= hi_i else int(round(min(max(lo, spec.lo), spec.hi)))
        elif spec.kind == "float":
            span = spec.hi - spec.lo
            lo = spec.lo + bucket[1] * span / 10
            hi = spec.lo + (bucket[1] + 1) * span / 10
            out[spec.name] = rng.uniform(lo, hi)
        else:
            out[spec.name] = bucket[1]
    return out


# --- Pareto archive (utility up, cost down) ---


def _dominates(a: CandidateConfig, b: CandidateConfig) -> bool:
    au, ac = a.estimate.mean, a.estimate.mean_cost
    bu, bc = b.estimate.mean, b.estimate.mean_cost
    return au >= bu and ac <= bc and (au > bu or ac < bc)


@dataclass
class ParetoArchive:
    capacity: int
    members: list[CandidateConfig] = field(default_factory=list)


def _crowding(members: list[CandidateConfig]) -> dict[int, float]:
    """One-dimensional crowding distance on utility; boundary members get inf."""
    order = sorted(range(len(members)), key=lambda i: members[i].estimate.mean)
    out = {}
    for rank, idx in enumerate(order):
        if rank == 0 or rank == len(order) - 1:
            out[idx] = math.inf
        else:
            out[idx] = members[order[rank + 1]].estimate.mean - members[order[rank - 1]].estimate.mean
    return out


def pareto_insert(archive: ParetoArchive, candidate: CandidateConfig) -> ParetoArchive:
    """Insert iff non-dominated; evict dominated members, then over-capacity."""
    if candidate.estimate is None:
        raise MaestroError("pareto_insert needs an evaluated candidate")
    if any(_dominates(m, candidate) for m in archive.members):
        return archive
    archive.members = [m for m in archive.members if not _dominates(candidate, m)]
    archive.members.append(candidate)
    if len(archive.members) > archive.capacity:
        crowd = _crowding(archive.members)
        evict = min(
            range(len(archive.members)),
            key=lambda i: (crowd[i], -archive.members[i].estimate.mean_cost, i),
        )
        archive.members.pop(evict)
    return archive


def evolve_population(
    archive: ParetoArchive,
    space: ConfigSpace,
    proposals: Sequence[EditProposal],
    seed: int,
    children: int,
    offset: int = 0,
) -> list[ConfigAssignment]:
    """Mutate archive parents round-robin, one edit each.

    The edited parameter is the highest-priority feedback proposal that
    names a parameter in this space; without one the choice is uniform.
    """
    if not archive.members:
        raise EmptyArchive("cannot evolve from an empty archive")
    pool = None
    for proposal in proposals:
        if space.has(proposal.target):
            pool = (proposal.target,)
            break
    out = []
    for j in range(children):
        parent = archive.members[(offset + j) % len(archive.members)]
        out.append(mutate_assignment(space, parent.assignment, 1, derive_seed(seed, "child", j), params=pool))
    return out


# --- the step driver ---


@dataclass
class CStepReport:
    strategy: str
    candidates: list[CandidateConfig] = field(default_factory=list)
    rollouts_used: int = 0
    space_exhausted: bool = False
    no_feasible: bool = False
    stopped: str = ""


def _snap_assignment(space: ConfigSpace, assignment: ConfigAssignment) -> ConfigAssignment:
    return {spec.name: snap_to_grid(spec, assignment[spec.name]) for spec in space}


def run_c_step(
    vgraph: ValidatedGraph,
    space: ConfigSpace,
    strategy: str,
    tasks: Sequence[TaskInstance],
    seeds: Sequence[int],
    budget: int,
    seed: int,
    ledger: BudgetLedger,
    metric: Metric,
    incumbent_assignment: ConfigAssignment,
    incumbent_estimate: UtilityEstimate | None = None,
    proposals: Sequence[EditProposal] = (),
    kappa: float = math.inf,
    explore_weight: float = 20.0,
    archive_capacity: int = 8,
    history=None,
    iteration: int = 0,
    record_sink: list | None = None,
) -> tuple[CandidateConfig, CStepReport]:
    """Search the configuration space under a rollout budget.

    Returns the feasible candidate with the highest estimate (the incumbent
    included, and preferred on ties) plus a report listing every candidate
    with its lineage.  Consumes at most ``budget`` rollouts.
    """
    if strategy not in STRATEGIES:
        raise MaestroError(f"unknown strategy {strategy!r}")
    minibatch = len(tasks)
    if budget < minibatch and not matches_schedule(incumbent_estimate, tasks, seeds):
        raise MaestroError("c-step budget cannot cover one minibatch for the incumbent")
    report = CStepReport(strategy=strategy)
    start_used = ledger.used

    def estimate(assignment, candidate_id):
        if history is not None:
            history.set_context(iteration, "c-step", candidate_id)
        return estimate_utility(
            vgraph, assignment, tasks, seeds, ledger, metric, history=history, record_sink=record_sink
        )

    def step_used() -> int:
        return ledger.used - start_used

    incumbent = CandidateConfig(f"c{iteration}.0", dict(incumbent_assignment), edit="incumbent")
    if matches_schedule(incumbent_estimate, tasks, seeds):
        incumbent.estimate = incumbent_estimate
    else:
        try:
            incumbent.estimate = estimate(incumbent.assignment, incumbent.candidate_id)
        except BudgetExceeded:
            report.stopped = "budget-exhausted-before-incumbent"
            report.candidates.append(incumbent)
            report.rollouts_used = step_used()
            return incumbent, report
    incumbent.feasible = not incumbent.estimate.partial and incumbent.estimate.mean_cost <= kappa
    report.candidates.append(incumbent)

    surrogate = SurrogateModel()
    archive = ParetoArchive(archive_capacity)
    evolved = 0

    def observe(candidate: CandidateConfig):
        nonlocal evolved
        if candidate.estimate is None or candidate.estimate.partial:
            return
        if strategy == "smbo":
            smbo_update(surrogate, space, candidate.assignment, candidate.estimate.mean, candidate.estimate.mean_cost)
        elif strategy == "evolutionary":
            pareto_insert(archive, candidate)

    observe(incumbent)

    seen = {assignment_key(incumbent.assignment)}
    enumerable = grid_size(space, ENUMERABLE_CAP + 1) <= ENUMERABLE_CAP
    grid_iter = None
    if enumerable:
        # fallback pool for exhausted strategies: the whole grid in a
        # seeded-shuffled order, so partial budgets are not biased toward
        # one corner of the space while full budgets still cover all of it
        shuffled = list(enumerate_grid(space, ENUMERABLE_CAP))
        random.Random(derive_seed(seed, "grid-fallback")).shuffle(shuffled)
        grid_iter = iter(shuffled)

    def propose(index: int) -> tuple[ConfigAssignment, str, str] | None:
        """One fresh assignment, or None when the search space is spent."""
        for attempt in range(20):
            pseed = derive_seed(seed, strategy, index, attempt)
            if strategy == "random":
                raw, edit, parent = sample_assignment(space, pseed), "random-sample", incumbent.candidate_id
            elif strategy == "smbo":
                raw, edit, parent = smbo_propose(surrogate, space, pseed, explore_weight), "smbo-proposal", incumbent.candidate_id
            else:
                parent_member = archive.members[evolved % len(archive.members)] if archive.members else incumbent
                raw = evolve_population(
                    ParetoArchive(1, [parent_member]), space, proposals, pseed, 1
                )[0]
                edit, parent = "evolve-mutation", parent_member.candidate_id
            candidate = _snap_assignment(space, raw)
            if assignment_key(candidate) not in seen:
                return candidate, edit, parent
        if grid_iter is not None:
            for candidate in grid_iter:
                if assignment_key(candidate) not in seen:
                    return candidate, "grid-enumeration", incumbent.candidate_id
            report.space_exhausted = True
        return None

    index = 0
    while step_used() + minibatch <= budget and ledger.remaining >= 1:
        proposal = propose(index)
        if proposal is None:
            if not report.space_exhausted:
                report.stopped = "no-fresh-proposals"
            break
        assignment, edit, parent = proposal
        seen.add(assignment_key(assignment))
        index += 1
        if strategy == "evolutionary":
            evolved += 1
        candidate = CandidateConfig(f"c{iteration}.{index}", assignment, parent=parent, edit=edit)
        try:
            candidate.estimate = estimate(assignment, candidate.candidate_id)
        except BudgetExceeded:
            report.stopped = "ledger-exhausted"
            break
        candidate.feasible = not candidate.estimate.partial and candidate.estimate.mean_cost <= kappa
        report.candidates.append(candidate)
        observe(candidate)

    report.rollouts_used = step_used()
    best = None
    for candidate in report.candidates:
        if candidate.estimate is None or candidate.estimate.partial or not candidate.feasible:
            continue
        if best is None or candidate.estimate.mean > best.estimate.mean:
            best = candidate
    if best is None:
        report.no_feasible = True
        return incumbent, report
    return best, report
