"""Structured non-numeric feedback and its distillation into edit proposals.

Evaluators emit typed items rather than free prose; a deterministic rule
table turns item frequencies into ranked proposals that point either at a
config parameter or at a graph operator, so both search steps can use them.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

FEEDBACK_KINDS = ("violated-constraint", "missing-information", "node-failure", "off-scope-output", "free-text")


@dataclass(frozen=True)
class FeedbackItem:
    kind: str
    payload: str
    subject: str | None = None  # node id, when the item names one
    task_id: str = ""

    def __post_init__(self):
        if self.kind not in FEEDBACK_KINDS:
            raise ValueError(f"unknown feedback kind {self.kind!r}")

    def with_task(self, task_id: str) -> "FeedbackItem":
        return replace(self, task_id=task_id)

    def to_doc(self) -> dict:
        return {"kind": self.kind, "payload": self.payload, "subject": self.subject, "task-id": self.task_id}


@dataclass(frozen=True)
class EditProposal:
    target: str  # config parameter name or graph operator id
    hint: str = ""
    priority: float = 0.0


def collect(records: Sequence) -> list[FeedbackItem]:
    """Gather evaluator items across records, in (task id, emission) order.

    Failed traces without an explicit node-failure item get one synthesized
    so downstream rules always see the failure.
    """
    per_task: dict[str, list[FeedbackItem]] = {}
    for record in records:
        bucket = per_task.setdefault(record.task_id, [])
        bucket.extend(record.feedback)
        failure = getattr(record.trace, "failure", None)
        if failure is not None and not any(
            i.kind == "node-failure" and i.subject == failure.node_id for i in record.feedback
        ):
            bucket.append(
                FeedbackItem("node-failure", failure.detail, subject=failure.node_id, task_id=record.task_id)
            )
    out: list[FeedbackItem] = []
    for task_id in sorted(per_task):
        out.extend(per_task[task_id])
    return out


def _keyword_match(role_tag: str, payload: str) -> bool:
    role = role_tag.lower()
    for token in payload.lower().split():
        if token and (token in role or role in token):
            return True
    return False


def _proposal_targets(item: FeedbackItem, space, graph_spec, catalog: Iterable) -> list[tuple[str, str]]:
    """Rule table: map one item to (target, hint) pairs."""
    targets: list[tuple[str, str]] = []
    if item.kind == "violated-constraint":
        fixer_nodes = {
            n.node_id for n in graph_spec.nodes if "rewrite" in n.role_tag.lower() or "validate" in n.role_tag.lower()
        }
        for spec in space:
            if spec.kind == "text" and spec.owner in fixer_nodes:
                targets.append((spec.name, item.payload))
        for op in catalog:
            if op.kind == "insert-node" and "validate" in op.template.role_tag.lower():
                targets.append((op.operator_id, item.payload))
    elif item.kind == "node-failure" and item.subject:
        for op in catalog:
            if op.kind in ("remove-node", "change-node-type") and op.node_id == item.subject:
                targets.append((op.operator_id, item.payload))
    elif item.kind == "missing-information":
        for op in catalog:
            if op.kind == "insert-node" and _keyword_match(op.template.role_tag, item.payload):
                targets.append((op.operator_id, item.payload))
    return targets


def distill(items: Sequence[FeedbackItem], space, graph_spec, catalog: Sequence) -> list[EditProposal]:
    """Turn feedback items into ranked proposals.

    Priorities are exact supporting-item counts; ties order by target name
    so the optimizer replays byte-identically.
    """
    counts: Counter[str] = Counter()
    hints: dict[str, str] = {}
    for item in items:
        for target, hint in _proposal_targets(item, space, graph_spec, catalog):
            counts[target] += 1
            hints.setdefault(target, hint)
    proposals = [EditProposal(target, hints[target], float(count)) for target, count in counts.items()]
    proposals.sort(key=lambda p: (-p.priority, p.target))
    return proposals
