"""Newline-delimited JSON framing for protocol messages."""

from __future__ import annotations

import json

from ..qkd.messages import ProtocolViolation, validate


class TransportError(Exception):
    """The connection dropped or could not be established."""


def encode(msg: dict) -> bytes:
    return (json.dumps(msg, separators=(",", ":")) + "\n").encode("utf-8")


def decode(line: bytes) -> dict:
    try:
        msg = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolViolation(f"undecodable line: {line[:80]!r}") from exc
    return validate(msg)


class LineChannel:
    """Blocking line reader/writer over a socket file."""

    def __init__(self, sock):
        self.sock = sock
        self.rfile = sock.makefile("rb")
        self.wfile = sock.makefile("wb")

    def send(self, msgs) -> None:
        try:
            for m in msgs:
                self.wfile.write(encode(m))
            self.wfile.flush()
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv(self) -> dict:
        try:
            line = self.rfile.readline()
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not line:
            raise TransportError("peer closed the connection")
        return decode(line)

    def close(self) -> None:
        for f in (self.wfile, self.rfile):
            try:
                f.close()
            except OSError:
                pass
        try:
            self.sock.close()
        except OSError:
            pass
