"""Client for a remote scorer speaking the newline-delimited JSON protocol.

Every request is one JSON line ``{"session": ..., "op": ..., "payload": ...}``
and every response ``{"session": ..., "ok": ..., "payload": ...}`` (or
``"error": {"code": ..., "message": ...}`` when not ok). Supported ops:

* ``hello`` -> ``{"vocab_size": int, "end_id": int}``
* ``encode {"text"}`` -> ``{"ids": [int]}``
* ``decode {"ids"}`` -> ``{"text": str}``
* ``step {"input_ids", "prefix_ids", "allowed_ids"?}`` ->
  ``{"chosen_id", "logprob"}`` with a mask, else ``{"topk": [[id, logprob]]}``

The server performs the restricted argmax itself (ties toward the lowest
id, matching the local driver) so full vocabulary score vectors never
cross the wire. Without a mask the client takes the top entry of the
returned top-k list, again breaking logprob ties toward the lowest id.

Addresses: ``tcp:HOST:PORT`` connects to a listening server;
``exec:COMMAND`` spawns the command and speaks over its stdio.
"""

from __future__ import annotations

import itertools
import json
import shlex
import socket
import subprocess
from typing import Iterable, Optional, Sequence

from .decoding import Scorer


class BridgeProtocolError(Exception):
    """The remote side broke the message contract."""


class ScorerFailureError(Exception):
    """Transport or remote-side failure while scoring."""


_session_counter = itertools.count(1)


class BridgeClient(Scorer):
    """Scorer plus tokenizer view backed by a remote bridge process.

    One in-flight request per session; a single client instance is meant
    to be driven sequentially.
    """

    def __init__(self, reader, writer, close=None):
        self._reader = reader
        self._writer = writer
        self._close = close
        self.session = f"s{next(_session_counter)}"
        try:
            hello = self._call("hello", {})
            self.vocab_size = int(hello["vocab_size"])
            self.end_id = int(hello["end_id"])
        except Exception:
            self.close()
            raise
        if not 0 <= self.end_id < self.vocab_size:
            self.close()
            raise BridgeProtocolError(
                f"hello returned end_id {self.end_id} outside vocab "
                f"size {self.vocab_size}"
            )

    @classmethod
    def open(cls, address: str) -> "BridgeClient":
        """Connect to ``tcp:HOST:PORT`` or spawn ``exec:COMMAND``."""
        kind, _, rest = address.partition(":")
        if kind == "tcp":
            host, _, port = rest.rpartition(":")
            if not host or not port.isdigit():
                raise ValueError(f"bad tcp address {address!r}")
            try:
                sock = socket.create_connection((host, int(port)), timeout=30)
            except OSError as err:
                raise ScorerFailureError(f"cannot connect to {address}: {err}") from None
            return cls(
                sock.makefile("r", encoding="utf-8"),
                sock.makefile("w", encoding="utf-8"),
                close=sock.close,
            )
        if kind == "exec":
            if not rest:
                raise ValueError("exec address needs a command")
            proc = subprocess.Popen(
                shlex.split(rest),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
            return cls(proc.stdout, proc.stdin, close=lambda: _stop(proc))
        raise ValueError(f"unsupported bridge address {address!r}")

    def close(self) -> None:
        # The stream wrappers hold the transport open (socket io refs,
        # subprocess pipes), so they must close before the transport hook.
        for stream in (self._writer, self._reader):
            try:
                stream.close()
            except OSError:
                pass
        if self._close is not None:
            self._close()
            self._close = None

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _call(self, op: str, payload: dict) -> dict:
        request = {"session": self.session, "op": op, "payload": payload}
        try:
            self._writer.write(json.dumps(request) + "\n")
            self._writer.flush()
            line = self._reader.readline()
        except (OSError, ValueError) as err:
            raise ScorerFailureError(f"bridge transport failed: {err}") from None
        if not line:
            raise ScorerFailureError("bridge closed the connection")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as err:
            raise BridgeProtocolError(f"bad response line: {err}") from None
        if response.get("session") != self.session:
            raise BridgeProtocolError("response for a different session")
        if not response.get("ok"):
            error = response.get("error") or {}
            raise ScorerFailureError(
                f"bridge error {error.get('code', '?')}: {error.get('message', '')}"
            )
        payload = response.get("payload")
        if not isinstance(payload, dict):
            raise BridgeProtocolError("response payload missing")
        return payload

    # TokenizerView surface

    def encode(self, text: str) -> list[int]:
        return [int(i) for i in self._call("encode", {"text": text})["ids"]]

    def decode(self, ids: Sequence[int]) -> str:
        return str(self._call("decode", {"ids": list(ids)})["text"])

    # Scorer surface

    def best_token(
        self,
        input_ids: Sequence[int],
        prefix_ids: Sequence[int],
        allowed: Optional[Iterable[int]] = None,
    ) -> int:
        payload = {"input_ids": list(input_ids), "prefix_ids": list(prefix_ids)}
        if allowed is not None:
            payload["allowed_ids"] = sorted(allowed)
            return int(self._call("step", payload)["chosen_id"])
        topk = self._call("step", payload)["topk"]
        if not topk:
            raise BridgeProtocolError("step returned an empty topk list")
        best_id, best = None, None
        for tid, logprob in topk:
            if best is None or logprob > best or (logprob == best and tid < best_id):
                best_id, best = int(tid), logprob
        return best_id


def _stop(proc: subprocess.Popen) -> None:
    for pipe in (proc.stdin, proc.stdout):
        try:
            pipe.close()
        except OSError:
            pass
    try:
        proc.wait(timeout=10)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait(timeout=10)
