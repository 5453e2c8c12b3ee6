"""Newline-delimited JSON server for the scorer wire protocol.

Requests: ``{"session": ..., "op": ..., "payload": ...}``. Responses:
``{"session": ..., "ok": true, "payload": ...}`` or
``{"session": ..., "ok": false, "error": {"code": ..., "message": ...}}``.

Ops: ``hello`` (registers the session, returns vocabulary size and the
end id), ``encode``/``decode``, and ``step``. A step with ``allowed_ids``
returns the restricted argmax computed server-side (ties toward the
lowest id, matching the driving client); without it, the top-k list of
(id, logprob) pairs. Error codes: ``BAD_SEQUENCE`` (malformed request or
op out of order), ``UNKNOWN_SESSION`` (op from a session that never said
hello), ``OOM`` (scoring ran out of memory; the session survives),
``MODEL_LOAD_FAILED`` (fatal).
"""

from __future__ import annotations

import json
import socketserver
import sys
from typing import Optional, TextIO

from .backend import Backend, restricted_argmax, topk

DEFAULT_TOPK = 50


def _ok(session, payload):
    return {"session": session, "ok": True, "payload": payload}


def _error(session, code, message):
    return {"session": session, "ok": False,
            "error": {"code": code, "message": message}}


class BridgeServer:
    """Protocol state machine over one backend; transport-agnostic."""

    def __init__(self, backend: Backend, top_k: int = DEFAULT_TOPK):
        self.backend = backend
        self.top_k = top_k
        self.sessions: set = set()

    def handle_line(self, line: str) -> Optional[dict]:
        line = line.strip()
        if not line:
            return None
        try:
            request = json.loads(line)
        except json.JSONDecodeError as err:
            return _error(None, "BAD_SEQUENCE", f"not a JSON line: {err}")
        if not isinstance(request, dict):
            return _error(None, "BAD_SEQUENCE", "request must be an object")
        session = request.get("session")
        op = request.get("op")
        payload = request.get("payload")
        if payload is None:
            payload = {}
        if not isinstance(payload, dict):
            return _error(session, "BAD_SEQUENCE", "payload must be an object")
        try:
            return self._dispatch(session, op, payload)
        except MemoryError:
            return _error(session, "OOM", "scoring ran out of memory")
        except (KeyError, TypeError, ValueError, IndexError) as err:
            return _error(session, "BAD_SEQUENCE", f"bad payload: {err}")

    def _dispatch(self, session, op, payload) -> dict:
        if op == "hello":
            self.sessions.add(session)
            return _ok(
                session,
                {"vocab_size": self.backend.vocab_size, "end_id": self.backend.end_id},
            )
        if session not in self.sessions:
            return _error(session, "UNKNOWN_SESSION", "hello must precede other ops")
        if op == "encode":
            return _ok(session, {"ids": self.backend.encode(str(payload["text"]))})
        if op == "decode":
            ids = [int(i) for i in payload["ids"]]
            return _ok(session, {"text": self.backend.decode(ids)})
        if op == "step":
            input_ids = [int(i) for i in payload["input_ids"]]
            prefix_ids = [int(i) for i in payload["prefix_ids"]]
            scores = self._scores_guarded(session, input_ids, prefix_ids)
            if "allowed_ids" in payload:
                allowed = [int(i) for i in payload["allowed_ids"]]
                if not allowed:
                    return _error(session, "BAD_SEQUENCE", "allowed_ids is empty")
                if any(not 0 <= i < self.backend.vocab_size for i in allowed):
                    return _error(
                        session, "BAD_SEQUENCE", "allowed_ids outside the vocabulary"
                    )
                chosen = restricted_argmax(scores, allowed)
                return _ok(
                    session, {"chosen_id": chosen, "logprob": float(scores[chosen])}
                )
            pairs = topk(scores, self.top_k)
            return _ok(session, {"topk": [[i, lp] for i, lp in pairs]})
        return _error(session, "BAD_SEQUENCE", f"unknown op {op!r}")

    def _scores_guarded(self, session, input_ids, prefix_ids):
        try:
            return self.backend.scores(input_ids, prefix_ids)
        except MemoryError:
            raise
        except RuntimeError as err:
            # torch raises RuntimeError for its out-of-memory conditions
            if "out of memory" in str(err).lower():
                raise MemoryError(str(err)) from None
            raise


def serve_stream(server: BridgeServer, reader: TextIO, writer: TextIO) -> None:
    """Blocking serve loop over text streams (one request per line)."""
    for line in reader:
        response = server.handle_line(line)
        if response is None:
            continue
        writer.write(json.dumps(response) + "\n")
        writer.flush()


def serve_stdio(server: BridgeServer) -> None:
    serve_stream(server, sys.stdin, sys.stdout)


def make_tcp_server(server: BridgeServer, host: str, port: int) -> socketserver.TCPServer:
    """One connection at a time; every connection shares the backend."""

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                response = server.handle_line(raw.decode("utf-8"))
                if response is None:
                    continue
                self.wfile.write((json.dumps(response) + "\n").encode("utf-8"))

    socketserver.TCPServer.allow_reuse_address = True
    return socketserver.TCPServer((host, port), Handler)


def serve_tcp(server: BridgeServer, host: str, port: int) -> None:
    with make_tcp_server(server, host, port) as tcp:
        tcp.serve_forever()


def report_load_failure_and_exit(reader: TextIO, writer: TextIO, message: str) -> None:
    """MODEL_LOAD_FAILED is fatal: answer the first request, then stop."""
    for line in reader:
        if not line.strip():
            continue
        try:
            session = json.loads(line).get("session")
        except json.JSONDecodeError:
            session = None
        writer.write(
            json.dumps(_error(session, "MODEL_LOAD_FAILED", message)) + "\n"
        )
        writer.flush()
        break
