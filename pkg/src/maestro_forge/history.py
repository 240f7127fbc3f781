"""Line-delimited run history and the per-iteration run report.

Every charged rollout appends exactly one ``kind=rollout`` row, so the
ledger counter always equals the rollout row count; accepted graph edits
append ``kind=edit`` rows.  Rows are canonical JSON (sorted keys, no
timestamps) so fixed-seed runs are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


def _canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


class HistoryLog:
    """Append-only run log with a settable (iteration, step, candidate) context."""

    def __init__(self):
        self.rows: list[dict] = []
        self._iter = 0
        self._step = "base"
        self._candidate = ""

    def set_context(self, iteration: int, step: str, candidate: str) -> None:
        self._iter = iteration
        self._step = step
        self._candidate = candidate

    def record_rollout(self, record) -> None:
        self.rows.append(
            {
                "kind": "rollout",
                "iter": self._iter,
                "step": self._step,
                "candidate-id": self._candidate,
                "task-id": record.task_id,
                "seed": record.seed,
                "score": record.score,
                "cost": record.cost,
                "feedback": [item.to_doc() for item in record.feedback],
            }
        )

    def record_edit(self, iteration: int, description: str, graph_id: str) -> None:
        self.rows.append({"kind": "edit", "iter": iteration, "edit": description, "graph-id": graph_id})

    def rollout_rows(self) -> list[dict]:
        return [r for r in self.rows if r["kind"] == "rollout"]

    def to_lines(self) -> str:
        return "".join(_canonical(row) + "\n" for row in self.rows)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_lines())


@dataclass
class RunReport:
    """Per-iteration summary rows plus totals reconciled against the ledger."""

    rows: list[dict] = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def add_row(self, **fields) -> None:
        self.rows.append(dict(fields))

    def finalize(self, ledger, history: HistoryLog) -> None:
        self.totals = {
            "rollouts": ledger.used,
            "cost": ledger.cost_sum,
            "history-rollout-rows": len(history.rollout_rows()),
            "iterations": len([r for r in self.rows if r.get("step") != "baseline"]),
        }

    def to_doc(self) -> dict:
        return {"rows": self.rows, "totals": self.totals}

    def to_text(self) -> str:
        return _canonical(self.to_doc()) + "\n"
