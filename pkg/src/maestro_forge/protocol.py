"""Line-delimited request/response protocol for external node functions.

One JSON object per line.  Requests carry {"id", "node", "input",
"config", "seed"}; responses carry {"id", "output", "cost"?, "feedback"?}
or {"id", "error"}.  Ids let a peer answer out of order and let the engine
pipeline concurrent in-flight node calls.  ABSENT travels as null; vectors
as lists; records as objects.

Both halves live here: the client that makes a peer's nodes callable from
a graph, and the server that exposes a local registry to a peer.
"""

from __future__ import annotations

import json
import threading

from .errors import NodeFailure, ProtocolViolation
from .schema import ABSENT

DEFAULT_COST = 1.0


def wire_encode(value):
    if value is ABSENT:
        return None
    if isinstance(value, tuple):
        return [wire_encode(v) for v in value]
    if isinstance(value, dict):
        return {k: wire_encode(v) for k, v in value.items()}
    return value


def wire_decode(doc):
    if doc is None:
        return ABSENT
    if isinstance(doc, list):
        return tuple(wire_decode(v) for v in doc)
    if isinstance(doc, dict):
        return {k: wire_decode(v) for k, v in doc.items()}
    return doc


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


class ExternalNodeClient:
    """Engine-side endpoint: send node-call requests, match replies by id.

    Thread-safe; whichever caller is waiting takes a turn reading the
    stream and parks replies for the others, so out-of-order responses
    re-associate correctly.
    """

    def __init__(self, reader, writer):
        self._reader = reader
        self._writer = writer
        self._cond = threading.Condition()
        self._arrived: dict[int, dict] = {}
        self._next_id = 0
        self._reading = False
        self._closed = False

    def request(self, node: str, value, config, seed: int):
        """Call one external node; returns (output, cost, feedback-or-None)."""
        with self._cond:
            if self._closed:
                raise NodeFailure(f"external session closed before calling {node!r}", node_id=node)
            self._next_id += 1
            rid = self._next_id
            line = _dump(
                {"id": rid, "node": node, "input": wire_encode(value), "config": wire_encode(dict(config)), "seed": seed}
            )
            self._writer.write(line + "\n")
            self._writer.flush()
        reply = self._await(rid, node)
        if "error" in reply:
            raise NodeFailure(str(reply["error"]), node_id=node)
        output = wire_decode(reply.get("output"))
        cost = float(reply.get("cost", DEFAULT_COST))
        feedback = reply.get("feedback")
        return output, cost, feedback

    def _await(self, rid: int, node: str) -> dict:
        while True:
            with self._cond:
                while rid not in self._arrived:
                    if self._closed:
                        raise NodeFailure(f"external session closed awaiting reply {rid}", node_id=node)
                    if self._reading:
                        self._cond.wait()
                    else:
                        self._reading = True
                        break
                else:
                    return self._arrived.pop(rid)
            try:
                line = self._reader.readline()
            finally:
                with self._cond:
                    self._reading = False
                    if not line:
                        self._closed = True
                    else:
                        try:
                            msg = json.loads(line)
                            got = int(msg["id"])
                        except (ValueError, TypeError, KeyError):
                            self._closed = True  # unattributable reply: the stream is unusable
                        else:
                            self._arrived[got] = msg
                    self._cond.notify_all()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        try:
            self._writer.close()
        except Exception:
            pass


def external_node_function(client: ExternalNodeClient, node: str):
    """Wrap one protocol node as an engine node function."""

    def fn(value, params, seed):
        return client.request(node, value, params, seed)

    return fn


def serve_external_node(reader, writer, registry) -> None:
    """Answer node-call requests against a local registry until EOF.

    A malformed line yields an error response (null id when none can be
    read) and the session continues; a parseable request without an id is
    a protocol violation: one error frame, then the session closes.
    """

    def respond(doc):
        writer.write(_dump(doc) + "\n")
        writer.flush()

    for line in reader:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except ValueError:
            respond({"id": None, "error": "malformed line: not valid JSON"})
            continue
        if not isinstance(msg, dict) or "id" not in msg:
            respond({"id": None, "error": "protocol violation: request without an id"})
            raise ProtocolViolation("request without an id")
        rid = msg["id"]
        node = msg.get("node")
        if not isinstance(node, str) or not registry.has(node):
            respond({"id": rid, "error": f"unknown node {node!r}"})
            continue
        try:
            value = wire_decode(msg.get("input"))
            params = wire_decode(msg.get("config") or {})
            seed = int(msg.get("seed", 0))
            result = registry.resolve(node)(value, params, seed)
            output, cost = result[0], result[1]
        except NodeFailure as exc:
            respond({"id": rid, "error": exc.detail or str(exc)})
            continue
        except Exception as exc:  # keep the session alive on handler bugs
            respond({"id": rid, "error": f"node raised {type(exc).__name__}: {exc}"})
            continue
        respond({"id": rid, "output": wire_encode(output), "cost": float(cost)})
