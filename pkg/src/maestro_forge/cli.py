"""Command-line front door: optimize, eval, serve-node.

Exit codes: 0 success, 2 invalid documents/spec, 3 budget exhausted before
the first evaluation.  All run artifacts are byte-stable under a fixed
seed; wall-clock metadata goes to a separate meta.json.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import subprocess
import sys
import time
from pathlib import Path

from . import documents
from .bench import bundle_by_name
from .errors import InvalidDocument, InvalidRunSpec, MaestroError
from .evaluation import BudgetLedger, estimate_utility
from .graph import validate_graph
from .optimizer import AcceptanceRule, RunSpec, run
from .params import default_assignment, validate_assignment
from .protocol import ExternalNodeClient, serve_external_node
from .seeding import derive_seed

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_BUDGET = 3

log = logging.getLogger("maestro_forge")


def _configure_logging() -> None:
    level = os.environ.get("MAESTRO_FORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)


def _load_bundle(task: str):
    if task.endswith(".json") or "/" in task or task.startswith("."):
        with open(task, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        name = doc.pop("bundle")
        return bundle_by_name(name, **doc)
    return bundle_by_name(task)


def _load_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _apply_overrides(bundle, args) -> None:
    if getattr(args, "graph", None):
        bundle.initial_graph = documents.graph_from_doc(_load_json(args.graph))
    if getattr(args, "space", None):
        bundle.initial_space = documents.space_from_doc(_load_json(args.space))
        bundle.initial_assignment = default_assignment(bundle.initial_space)
    if getattr(args, "config", None):
        bundle.initial_assignment = documents.assignment_from_doc(_load_json(args.config))
    validate_assignment(bundle.initial_space, bundle.initial_assignment)


def _attach_external(bundle, command: str | None):
    if not command:
        return None
    proc = subprocess.Popen(
        command, shell=True, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
    )
    client = ExternalNodeClient(proc.stdout, proc.stdin)
    bundle.registry.attach_external(client)
    return proc


def cmd_optimize(args) -> int:
    try:
        bundle = _load_bundle(args.task)
        _apply_overrides(bundle, args)
    except (InvalidDocument, MaestroError, FileNotFoundError, KeyError, ValueError) as exc:
        log.error("invalid inputs: %s", exc)
        return EXIT_INVALID
    proc = _attach_external(bundle, args.external)
    started = time.time()
    try:
        runspec = RunSpec(
            budget=args.budget,
            max_iters=args.iters,
            bt=args.bt,
            bpt=args.bpt,
            radius=args.radius,
            tau=args.tau,
            kappa=args.kappa,
            strategy=args.strategy,
            master_seed=args.seed,
            mode=args.mode,
            minibatch=args.minibatch,
            acceptance=AcceptanceRule(args.xi),
            omega_weights=(args.w_nodes, args.w_edges),
        )
        try:
            result = run(runspec, bundle)
        except (InvalidRunSpec, InvalidDocument) as exc:
            log.error("invalid run spec: %s", exc)
            return EXIT_INVALID

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result.history.save(out / "history.jsonl")
        (out / "graph.json").write_text(
            documents.canonical_json(documents.graph_to_doc(result.graph)) + "\n", encoding="utf-8"
        )
        (out / "config.json").write_text(
            documents.canonical_json(documents.assignment_to_doc(result.assignment)) + "\n", encoding="utf-8"
        )
        (out / "space.json").write_text(
            documents.canonical_json(documents.space_to_doc(result.space)) + "\n", encoding="utf-8"
        )
        (out / "report.json").write_text(result.report.to_text(), encoding="utf-8")
        (out / "diff.dot").write_text(
            documents.graph_to_dot(result.graph, diff_base=bundle.initial_graph), encoding="utf-8"
        )
        (out / "meta.json").write_text(
            json.dumps({"elapsed-seconds": time.time() - started, "command": "optimize"}) + "\n",
            encoding="utf-8",
        )
        if result.baseline is None:
            log.error("budget exhausted before the baseline evaluation")
            return EXIT_NO_BUDGET
        final = result.final_score
        print(f"final-score={final:.4f} rollouts={result.report.totals['rollouts']} out={out}")
        return EXIT_OK
    finally:
        if proc is not None:
            proc.stdin.close()
            proc.wait(timeout=10)


def cmd_eval(args) -> int:
    try:
        bundle = _load_bundle(args.task)
        _apply_overrides(bundle, args)
    except (InvalidDocument, MaestroError, FileNotFoundError, KeyError, ValueError) as exc:
        log.error("invalid inputs: %s", exc)
        return EXIT_INVALID
    if args.n < 1:
        log.error("--n must be >= 1")
        return EXIT_INVALID
    proc = _attach_external(bundle, args.external)
    try:
        vgraph = validate_graph(bundle.initial_graph, bundle.registry, bundle.initial_space)
        tasks = bundle.make_tasks(args.n, derive_seed(args.seed, "eval"))
        seeds = [derive_seed(args.seed, "eval-rollout", i) for i in range(len(tasks))]
        ledger = BudgetLedger(len(tasks))
        estimate = estimate_utility(vgraph, bundle.initial_assignment, tasks, seeds, ledger, bundle.metric)
        print(f"mean={estimate.mean:.4f} count={estimate.count} mean-cost={estimate.mean_cost:.4f}")
        return EXIT_OK
    finally:
        if proc is not None:
            proc.stdin.close()
            proc.wait(timeout=10)


def cmd_serve_node(args) -> int:
    bundle = _load_bundle(args.task)
    serve_external_node(sys.stdin, sys.stdout, bundle.registry)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maestro-forge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--task", required=True, help="bundle name (noisychain|constraintsat|echo) or task document path")
        p.add_argument("--graph", help="graph document overriding the bundle's initial graph")
        p.add_argument("--space", help="config-space document overriding the bundle's space")
        p.add_argument("--config", help="assignment document overriding the bundle's initial config")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--external", help="shell command for an external node-function peer")

    opt = sub.add_parser("optimize", help="jointly optimize structure and configuration")
    common(opt)
    opt.add_argument("--budget", type=int, required=True, help="total rollout budget")
    opt.add_argument("--iters", type=int, default=8)
    opt.add_argument("--bt", type=int, default=None, help="per-iteration config-step rollouts")
    opt.add_argument("--bpt", type=int, default=None, help="per-iteration graph-step rollouts")
    opt.add_argument("--mode", choices=["joint", "config-only"], default="joint")
    opt.add_argument("--radius", type=int, default=1)
    opt.add_argument("--tau", type=float, default=None, help="structure budget (default: initial + 10)")
    opt.add_argument("--kappa", type=float, default=50.0, help="per-rollout mean cost cap")
    opt.add_argument("--strategy", choices=["smbo", "evolutionary", "random"], default="smbo")
    opt.add_argument("--minibatch", type=int, default=5)
    opt.add_argument("--xi", type=float, default=2.0, help="acceptance tolerance")
    opt.add_argument("--w-nodes", type=float, default=1.0)
    opt.add_argument("--w-edges", type=float, default=1.0)
    opt.add_argument("--out", required=True, help="artifact directory")
    opt.set_defaults(fn=cmd_optimize)

    ev = sub.add_parser("eval", help="evaluate a fixed design, no optimization")
    common(ev)
    ev.add_argument("--n", type=int, required=True, help="number of evaluation tasks")
    ev.set_defaults(fn=cmd_eval)

    serve = sub.add_parser("serve-node", help="host this bundle's node functions over stdio")
    serve.add_argument("--task", required=True)
    serve.set_defaults(fn=cmd_serve_node)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except MaestroError as exc:
        log.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
