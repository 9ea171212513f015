"""Process-separated sessions over TCP: Bob serves, Alice connects, Eve proxies.

Amplitudes travel on the wire in "pulse" messages. That is simulation
artifice standing in for photons on a fiber; it lets the proxy apply the same
eavesdropping strategies as an in-process run.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import time
from dataclasses import replace
from pathlib import Path

from ..channel import EveLog, EveStrategy, eve_apply, eve_finalize
from ..qkd.messages import NegotiationError, msg_pulse, pulse_msg
from ..qkd.parties import Alice, Bob, Party
from ..qkd.postprocess import KeyMaterial
from ..qkd.session import ALICE, BOB, CHANNEL, EVE
from ..qsim import Basis
from ..rng import Rng
from .spec import RunSpec, key_paths, render, stats_record, write_key
from .wire import LineChannel, TransportError, encode

log = logging.getLogger(__name__)

NET_PROTOCOLS = ("bb84", "b92")


def session_seed(master: int, index: int) -> int:
    return (master + index) % (1 << 64)


def party_stats(party: Party) -> dict:
    completed = not party.aborted and party.key is not None
    return {
        "n_detected": party.n_detected if isinstance(party, Bob) else None,
        "sifted_len": len(party.sifted_ids),
        "qber_est": party.qber_est,
        "qber_true": None,  # needs both parties' raw data
        "aborted": not completed,
        "ec_leak_bits": party.leak if completed else 0,
        "final_len": party.final_len if completed else 0,
    }


def _drive(party: Party, chan: LineChannel, initial: list[dict]) -> None:
    chan.send(initial)
    while not party.finished:
        chan.send(party.handle(chan.recv()))


def _session_out(out: str | None, index: int, total: int) -> str | None:
    if not out or total == 1:
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}.{index}{p.suffix}"))


def _finish(spec: RunSpec, party: Party, role: str, seed: int, out: str | None, which: int) -> dict:
    s = replace(spec, seed=seed)
    rec = stats_record(s, party_stats(party), role=role)
    if out:
        Path(out).write_text(render([rec], spec.format))
        if party.key is not None and not party.aborted and len(party.key) > 0:
            write_key(key_paths(out)[which], KeyMaterial(party.key).hex())
    return rec


def _check_protocol(spec: RunSpec) -> None:
    spec.validate()
    if spec.protocol not in NET_PROTOCOLS:
        raise ValueError(f"networked mode supports {', '.join(NET_PROTOCOLS)}, not {spec.protocol}")


def serve_bob(spec: RunSpec, host: str = "127.0.0.1", port: int = 0, sessions: int = 1,
              ready: threading.Event | None = None, bound: list | None = None) -> list[dict]:
    """Accept `sessions` connections in turn, one full session each.

    Session i uses seed spec.seed + i. `bound` receives the listening port.
    """
    _check_protocol(spec)
    records = []
    with socket.create_server((host, port)) as srv:
        if bound is not None:
            bound.append(srv.getsockname()[1])
        log.info("bob listening on %s:%d", host, srv.getsockname()[1])
        if ready is not None:
            ready.set()
        for i in range(sessions):
            conn, _ = srv.accept()
            chan = LineChannel(conn)
            seed = session_seed(spec.seed, i)
            root = Rng(seed)
            bob = Bob(spec.protocol, spec.config, root.child(BOB), spec.channel, root.child(CHANNEL))
            try:
                _drive(bob, chan, [])
            except NegotiationError:
                chan.send([bob.hello()])
                raise
            finally:
                chan.close()
            records.append(_finish(spec, bob, "bob", seed, _session_out(spec.out, i, sessions), 1))
    return records


def _connect(host: str, port: int, timeout: float) -> socket.socket:
    deadline = time.monotonic() + timeout
    while True:
        try:
            return socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            if time.monotonic() > deadline:
                raise TransportError(f"cannot reach {host}:{port}: {exc}") from exc
            time.sleep(0.05)


def connect_alice(spec: RunSpec, host: str, port: int, connect_timeout: float = 10.0) -> dict:
    _check_protocol(spec)
    sock = _connect(host, port, connect_timeout)
    sock.settimeout(None)
    chan = LineChannel(sock)
    alice = Alice(spec.protocol, spec.config, Rng(spec.seed).child(ALICE), spec.source)
    try:
        _drive(alice, chan, alice.start())
    finally:
        chan.close()
    return _finish(spec, alice, "alice", spec.seed, spec.out, 0)


class _Tap:
    """What Eve learns while forwarding one session."""

    def __init__(self, strategy: EveStrategy, rng: Rng, protocol: str):
        self.strategy = strategy
        self.rng = rng
        self.protocol = protocol
        self.log = EveLog()
        self.bases: list[int] | None = None
        self.keep: list[int] = []
        self.n: int | None = None
        self.classical: list[bytes] = []  # forwarded classical lines, prefixed A> or B>

    def pulse(self, msg: dict) -> bytes:
        return encode(pulse_msg(eve_apply(self.strategy, msg_pulse(msg), self.rng, self.log)))

    def observe(self, msg: dict) -> None:
        t = msg.get("t")
        if t == "hello":
            self.n = msg.get("n")
        elif t == "bases":
            self.bases = msg["v"]
        elif t == "sift":
            self.keep = msg["keep"]

    def report(self) -> dict:
        if self.protocol == "b92":
            guesses = eve_finalize(self.log, None, self.rng, two_state=True)
        else:
            announced = {i: Basis(self.bases[i]) for i in self.keep} if self.bases else {}
            guesses = eve_finalize(self.log, announced, self.rng)
        return {
            "role": "eve",
            "strategy": str(self.strategy),
            "intercepted": len(self.log.intercepted),
            "stored": len(self.log.stored),
            "guessed_sifted": sum(1 for i in self.keep if i in guesses),
        }


def _pump(src: LineChannel, dst: LineChannel, tap: _Tap, from_alice: bool) -> None:
    try:
        while True:
            line = src.rfile.readline()
            if not line:
                break
            try:
                msg = json.loads(line)
            except ValueError:
                msg = {}
            if from_alice and isinstance(msg, dict) and msg.get("t") == "pulse":
                dst.wfile.write(tap.pulse(msg))
                # batch pulse writes; the last pulse must go out before Bob can answer
                if tap.n is None or msg.get("id") == tap.n - 1 or msg.get("id", 0) % 1024 == 0:
                    dst.wfile.flush()
                continue
            tap.classical.append((b"A>" if from_alice else b"B>") + line)
            if isinstance(msg, dict):
                tap.observe(msg)
            dst.wfile.write(line)
            dst.wfile.flush()
    except OSError:
        pass
    finally:
        try:
            dst.wfile.flush()
            dst.sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass


def eve_proxy(listen: tuple[str, int], forward: tuple[str, int], strategy: EveStrategy, seed: int,
              protocol: str = "bb84", sessions: int = 1, transcript: str | None = None,
              ready: threading.Event | None = None, bound: list | None = None) -> list[dict]:
    """Man in the middle on the wire: rewrites pulses, forwards classical lines verbatim."""
    reports = []
    with socket.create_server(listen) as srv:
        if bound is not None:
            bound.append(srv.getsockname()[1])
        if ready is not None:
            ready.set()
        for i in range(sessions):
            conn, _ = srv.accept()
            a = LineChannel(conn)
            b = LineChannel(_connect(*forward, timeout=10.0))
            tap = _Tap(strategy, Rng(session_seed(seed, i)).child(EVE), protocol)
            up = threading.Thread(target=_pump, args=(a, b, tap, True), daemon=True)
            down = threading.Thread(target=_pump, args=(b, a, tap, False), daemon=True)
            up.start()
            down.start()
            up.join()
            down.join()
            a.close()
            b.close()
            rep = tap.report()
            rep["seed"] = session_seed(seed, i)
            reports.append(rep)
            if transcript:
                with open(transcript, "ab") as f:
                    f.writelines(tap.classical)
    return reports
