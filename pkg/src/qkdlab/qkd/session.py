"""In-process protocol sessions and transcript replay."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from ..channel import ChannelConfig, EveKind, EveLog, EveStrategy, SourceConfig, eve_apply, eve_finalize
from ..qsim import Basis
from ..rng import Rng
from .config import CHSH_A, CHSH_B, ProtocolConfig
from .messages import msg_pulse, pulse_msg
from .parties import Alice, Bob
from .postprocess import FP_BITS, KeyMaterial, final_length

# labels of the per-party child streams; the networked harness uses the same ones
ALICE, BOB, CHANNEL, EVE = "alice", "bob", "channel", "eve"


@dataclass
class SessionStats:
    n_detected: int | None
    sifted_len: int
    qber_est: float | None
    qber_true: float | None
    aborted: bool
    ec_leak_bits: int
    final_len: int
    eve_accuracy: float | None = None
    chsh: float | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Session:
    stats: SessionStats
    key: KeyMaterial | None
    transcript: list[dict]
    bob_key: KeyMaterial | None = None
    alice: Alice | None = field(default=None, repr=False)
    bob: Bob | None = field(default=None, repr=False)
    eve_log: EveLog | None = field(default=None, repr=False)

    def __iter__(self):
        # allows `stats, key, transcript = run_bb84(...)`
        return iter((self.stats, self.key, self.transcript))


def make_eve_hook(strategy: EveStrategy, rng: Rng, log: EveLog):
    """Rewrites pulse messages the way an eavesdropper on the fiber would."""
    if strategy.kind is EveKind.NONE:
        return None

    def hook(msg: dict) -> dict:
        return pulse_msg(eve_apply(strategy, msg_pulse(msg), rng, log))

    return hook


def pump(alice: Alice, bob: Bob, eve_hook=None, transcript: list | None = None) -> list[dict]:
    """Deliver messages between the parties until both have finished."""
    transcript = [] if transcript is None else transcript
    queue = deque(("bob", m) for m in alice.start())
    while queue:
        dest, msg = queue.popleft()
        if dest == "bob" and eve_hook is not None and msg["t"] == "pulse":
            msg = eve_hook(msg)
        transcript.append(msg)
        party, back = (bob, "alice") if dest == "bob" else (alice, "bob")
        queue.extend((back, m) for m in party.handle(msg))
    if not (alice.finished and bob.finished):
        raise RuntimeError("session stalled before both parties finished")
    return transcript


def chsh_from_records(alice: Alice, bob: Bob) -> float | None:
    """S = E(a,b) - E(a,b') + E(a',b) + E(a',b') over Bob's CHSH-angle detections."""
    test = bob.detected & (bob.settings >= 2)
    if not test.any():
        return None
    a = alice.bases[test].astype(int)
    b = bob.settings[test].astype(int) - 2
    prod = np.where(alice.bits[test] == bob.outcomes[test], 1, -1)
    e = np.zeros((2, 2))
    for i in (0, 1):
        for j in (0, 1):
            sel = (a == i) & (b == j)
            if not sel.any():
                return None
            e[i, j] = prod[sel].mean()
    return float(e[0, 0] - e[0, 1] + e[1, 0] + e[1, 1])


def _eve_accuracy(protocol: str, log: EveLog, alice: Alice, sifted: list[int], rng: Rng) -> float | None:
    if not sifted:
        return None
    if protocol == "b92":
        guesses = eve_finalize(log, None, rng, two_state=True)
    else:
        announced = {i: Basis(int(alice.bases[i])) for i in sifted}
        guesses = eve_finalize(log, announced, rng)
    score = 0.0
    for i in sifted:
        g = guesses.get(i)
        if g is None:
            score += 0.5  # blind guess
            continue
        if protocol == "epr":
            g = 1 - g  # eve saw bob's half, anti-correlated with alice
        score += 1.0 if g == alice.bits[i] else 0.0
    return score / len(sifted)


def run_session(
    protocol: str,
    config: ProtocolConfig,
    source: SourceConfig | None,
    channel: ChannelConfig | None,
    eve: EveStrategy | None,
    rng: Rng,
) -> Session:
    source = source or SourceConfig()
    channel = channel or ChannelConfig()
    eve = eve or EveStrategy.none()
    alice = Alice(protocol, config, rng.child(ALICE), source)
    bob = Bob(protocol, config, rng.child(BOB), channel, rng.child(CHANNEL))
    log = EveLog()
    eve_rng = rng.child(EVE)
    transcript = pump(alice, bob, make_eve_hook(eve, eve_rng, log))

    sifted = bob.sifted_ids
    a_sift = alice.key_bits(sifted)
    b_sift = bob.key_bits(sifted)
    qber_true = float(np.mean(a_sift != b_sift)) if sifted else None
    eve_acc = None if eve.kind is EveKind.NONE else _eve_accuracy(protocol, log, alice, sifted, eve_rng)
    completed = not bob.aborted and bob.key is not None
    stats = SessionStats(
        n_detected=bob.n_detected,
        sifted_len=len(sifted),
        qber_est=bob.qber_est,
        qber_true=qber_true,
        aborted=not completed,
        ec_leak_bits=bob.leak if completed else 0,
        final_len=bob.final_len if completed else 0,
        eve_accuracy=eve_acc,
        chsh=chsh_from_records(alice, bob) if protocol == "epr" else None,
        seed=rng.seed,
    )
    return Session(
        stats=stats,
        key=KeyMaterial(alice.key) if completed else None,
        transcript=transcript,
        bob_key=KeyMaterial(bob.key) if completed else None,
        alice=alice,
        bob=bob,
        eve_log=log,
    )


def run_bb84(config, source=None, channel=None, eve=None, rng: Rng | None = None) -> Session:
    return run_session("bb84", config, source, channel, eve, rng or Rng(0))


def run_b92(config, source=None, channel=None, eve=None, rng: Rng | None = None) -> Session:
    return run_session("b92", config, source, channel, eve, rng or Rng(0))


def run_epr(config, channel=None, eve=None, rng: Rng | None = None) -> Session:
    return run_session("epr", config, None, channel, eve, rng or Rng(0))


def replay(transcript: list[dict], pa_safety: int) -> dict:
    """Recompute the public session figures from a transcript alone."""
    out = {"sifted_len": 0, "qber_est": None, "aborted": True, "ec_leak_bits": 0, "final_len": 0,
           "n_key": 0, "final_len_formula": 0}
    sample: list[int] = []
    parities = 0
    fp = False
    for msg in transcript:
        t = msg["t"]
        if t == "sift":
            out["sifted_len"] = len(msg["keep"])
        elif t == "sample":
            sample = msg["idx"]
        elif t == "qber":
            out["qber_est"] = msg["v"]
            out["aborted"] = msg["abort"]
        elif t == "parity" and "v" in msg:
            parities += 1
        elif t == "fp":
            fp = True
        elif t == "pa":
            out["final_len"] = msg["len"]
            out["aborted"] = False
    if out["qber_est"] is not None and not out["aborted"] and fp:
        leak = parities + FP_BITS
        n_key = out["sifted_len"] - len(sample)
        out["ec_leak_bits"] = leak
        out["n_key"] = n_key
        out["final_len_formula"] = final_length(n_key, leak, out["qber_est"], pa_safety)
    else:
        out["aborted"] = True
    return out
