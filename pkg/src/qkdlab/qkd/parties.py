"""Alice and Bob as lockstep message handlers.

Each party consumes one message at a time and returns the messages it sends
in reply. The same objects drive in-process sessions and networked ones, so
a given seed yields the same session either way.
"""

from __future__ import annotations

import numpy as np

from ..channel import ChannelConfig, Pulse, SourceConfig, emit_state, transmit
from ..qsim import Basis, measure, measure_angle, measure_qubit, prepare, singlet
from ..rng import Rng
from .config import CHSH_B, PROTOCOLS, ProtocolConfig
from .messages import NegotiationError, ProtocolViolation, field, msg_pulse, pulse_msg
from .postprocess import (
    FP_BITS,
    ParityQuery,
    answer_parity,
    cascade,
    check_abort,
    choose_sample,
    fingerprint,
    final_length,
    toeplitz_hash,
    Verdict,
)

_H = prepare(0, Basis.RECT)
_D45 = prepare(0, Basis.DIAG)


class Party:
    role = "?"

    def __init__(self, protocol: str, config: ProtocolConfig, rng: Rng):
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}")
        self.protocol = protocol
        self.config = config
        self.rng = rng
        self.finished = False
        self.aborted = False
        self.sifted_ids: list[int] = []
        self.sample_ids: list[int] = []
        self.key_ids: list[int] = []
        self.qber_est: float | None = None
        self.leak = 0
        self.final_len = 0
        self.key: np.ndarray | None = None
        self.pa_seed: int | None = None

    def hello(self) -> dict:
        return {"t": "hello", "proto": self.protocol, "n": self.config.n_pulses}

    def _check_hello(self, msg: dict) -> None:
        proto, n = field(msg, "proto", str), field(msg, "n", int)
        if proto != self.protocol or n != self.config.n_pulses:
            raise NegotiationError(
                f"{self.role} expects {self.protocol}/n={self.config.n_pulses}, peer offered {proto}/n={n}"
            )

    def handle(self, msg: dict) -> list[dict]:
        if self.finished:
            raise ProtocolViolation(f"{self.role} got {msg.get('t')!r} after the session ended")
        handler = getattr(self, "on_" + str(msg.get("t")), None)
        if handler is None:
            raise ProtocolViolation(f"{self.role} cannot handle {msg.get('t')!r}")
        return handler(msg)

    def key_bits(self, ids) -> np.ndarray:
        raise NotImplementedError


class Alice(Party):
    role = "alice"

    def __init__(self, protocol: str, config: ProtocolConfig, rng: Rng, source: SourceConfig | None = None):
        super().__init__(protocol, config, rng)
        self.source = source or SourceConfig()
        if protocol == "epr" and not self.source.ideal:
            raise ValueError("the EPR source emits exactly one pair per pulse")
        self.bits = np.zeros(config.n_pulses, dtype=np.uint8)
        self.bases = np.zeros(config.n_pulses, dtype=np.uint8)
        self.photon_counts = np.zeros(config.n_pulses, dtype=np.int64)
        self._orders: dict = {}
        self._started = False
        self._key_arr: np.ndarray | None = None

    def start(self) -> list[dict]:
        return [self.hello()]

    def on_hello(self, msg):
        if self._started:
            raise ProtocolViolation("duplicate hello")
        self._check_hello(msg)
        self._started = True
        out = [pulse_msg(self._pulse(i)) for i in range(self.config.n_pulses)]
        if self.protocol != "b92":
            out.append({"t": "bases", "v": self.bases.tolist()})
        return out

    def _pulse(self, i: int) -> Pulse:
        rng = self.rng
        if self.protocol == "bb84":
            bit, basis = rng.bit(), rng.bit()
            state = prepare(bit, Basis(basis))
        elif self.protocol == "b92":
            bit, basis = rng.bit(), 0
            state = _D45 if bit else _H
        else:
            # measuring Alice's half first leaves Bob's half pure; local
            # operations on separate halves commute, so the joint statistics
            # are those of the shared singlet
            basis = rng.bit()
            bit, state = measure_qubit(singlet(), 0, Basis(basis), rng)
        self.bits[i] = bit
        self.bases[i] = basis
        pulse = emit_state(self.source, state, rng, i)
        self.photon_counts[i] = pulse.count
        return pulse

    def key_bits(self, ids) -> np.ndarray:
        return self.bits[np.asarray(ids, dtype=np.int64)]

    def on_sift(self, msg):
        keep = field(msg, "keep", list)
        if any(not 0 <= i < self.config.n_pulses for i in keep) or keep != sorted(set(keep)):
            raise ProtocolViolation("sift ids out of range or unordered")
        self.sifted_ids = keep
        return []

    def on_sample(self, msg):
        idx = field(msg, "idx", list)
        if not set(idx) <= set(self.sifted_ids):
            raise ProtocolViolation("sample ids outside the sifted set")
        self.sample_ids = idx
        return [{"t": "sample_v", "bits": self.key_bits(idx).tolist()}]

    def on_qber(self, msg):
        self.qber_est = float(field(msg, "v", (int, float)))
        if field(msg, "abort", bool):
            self.aborted = True
            self.finished = True
            return [{"t": "done"}]
        sampled = set(self.sample_ids)
        self.key_ids = [i for i in self.sifted_ids if i not in sampled]
        self._key_arr = self.key_bits(self.key_ids)
        return []

    def on_parity(self, msg):
        if self._key_arr is None:
            raise ProtocolViolation("parity query before the error estimate")
        if "v" in msg:
            raise ProtocolViolation("alice received a parity answer")
        q = ParityQuery(field(msg, "pass", int), field(msg, "lo", int), field(msg, "hi", int), field(msg, "seed", int))
        if not 0 <= q.lo < q.hi <= len(self._key_arr):
            raise ProtocolViolation("parity range out of bounds")
        v = answer_parity(self._key_arr, q, self._orders)
        self.leak += 1
        return [{"t": "parity", "pass": q.pass_index, "lo": q.lo, "hi": q.hi, "v": v}]

    def on_fp(self, msg):
        if self._key_arr is None:
            raise ProtocolViolation("fingerprint before the error estimate")
        theirs = int(field(msg, "v", str), 16)
        point = int(field(msg, "x", str), 16)
        self.leak += FP_BITS
        if fingerprint(self._key_arr, point) != theirs:
            self.aborted = True
            self.finished = True
            return [{"t": "done"}]
        self.final_len = final_length(len(self._key_arr), self.leak, self.qber_est, self.config.pa_safety)
        self.pa_seed = self.rng.uint63()
        self.key = toeplitz_hash(self._key_arr, self.final_len, self.pa_seed)
        return [{"t": "pa", "seed": self.pa_seed, "len": self.final_len}]

    def on_done(self, msg):
        self.finished = True
        return []


class Bob(Party):
    role = "bob"

    def __init__(self, protocol: str, config: ProtocolConfig, rng: Rng, channel: ChannelConfig | None = None,
                 channel_rng: Rng | None = None):
        super().__init__(protocol, config, rng)
        self.channel = channel or ChannelConfig()
        self.channel_rng = channel_rng or rng.child("channel")
        n = config.n_pulses
        self.detected = np.zeros(n, dtype=bool)
        self.settings = np.zeros(n, dtype=np.int8)  # basis 0/1, or 2/3 for the CHSH angles
        self.outcomes = np.zeros(n, dtype=np.uint8)
        self.conclusive = np.zeros(n, dtype=bool)
        self.next_id = 0
        self._hello_seen = False
        self._cascade = None
        self._bits_by_id: dict[int, int] = {}
        self._key_arr: np.ndarray | None = None

    @property
    def n_detected(self) -> int:
        return int(self.detected.sum())

    def on_hello(self, msg):
        if self._hello_seen:
            raise ProtocolViolation("duplicate hello")
        self._hello_seen = True
        try:
            self._check_hello(msg)
        except NegotiationError:
            self.finished = True
            self.negotiation_failed = True
            raise
        return [self.hello()]

    def on_pulse(self, msg):
        if not self._hello_seen:
            raise ProtocolViolation("pulse before hello")
        pulse = msg_pulse(msg)
        if pulse.id != self.next_id or pulse.id >= self.config.n_pulses:
            raise ProtocolViolation(f"pulse id {pulse.id} out of sequence (expected {self.next_id})")
        self.next_id += 1
        self._detect(transmit(pulse, self.channel, self.channel_rng))
        if self.next_id == self.config.n_pulses and self.protocol == "b92":
            return self._announce(np.flatnonzero(self.conclusive).tolist())
        return []

    def _detect(self, pulse: Pulse) -> None:
        i, rng = pulse.id, self.rng
        if self.protocol == "epr" and rng.random() < self.config.test_fraction:
            setting = 2 + rng.bit()
        else:
            setting = rng.bit()
        self.settings[i] = setting
        if not pulse.photons:
            return
        self.detected[i] = True
        # a multiphoton arrival is registered as a single click
        photon = pulse.photons[0]
        if setting >= 2:
            bit, _ = measure_angle(photon, CHSH_B[setting - 2], rng)
        else:
            bit, _ = measure(photon, Basis(setting), rng)
        self.outcomes[i] = bit
        if self.protocol == "b92":
            # V excludes H (Alice's 0), 135 excludes 45 (Alice's 1)
            if bit == 1:
                self.conclusive[i] = True
                self._bits_by_id[i] = 1 if setting == 0 else 0
        elif self.protocol == "epr":
            self._bits_by_id[i] = 1 - bit
        else:
            self._bits_by_id[i] = bit

    def key_bits(self, ids) -> np.ndarray:
        return np.array([self._bits_by_id[int(i)] for i in ids], dtype=np.uint8)

    def on_bases(self, msg):
        if self.protocol == "b92":
            raise ProtocolViolation("b92 has no basis announcement")
        if self.next_id != self.config.n_pulses:
            raise ProtocolViolation("bases announced before all pulses arrived")
        v = field(msg, "v", list)
        if len(v) != self.config.n_pulses or any(b not in (0, 1) for b in v):
            raise ProtocolViolation("bad basis announcement")
        a = np.asarray(v, dtype=np.int8)
        keep = np.flatnonzero(self.detected & (a == self.settings))
        self.alice_bases = a
        return self._announce(keep.tolist())

    def _announce(self, keep: list[int]) -> list[dict]:
        self.sifted_ids = keep
        if not keep:
            # nothing to test with: assume the worst and stop
            self.qber_est = 1.0
            self.aborted = True
            return [{"t": "sift", "keep": keep}, {"t": "qber", "v": 1.0, "abort": True}]
        self.sample_ids = choose_sample(keep, self.config.sample_fraction, self.rng)
        return [{"t": "sift", "keep": keep}, {"t": "sample", "idx": self.sample_ids}]

    def on_sample_v(self, msg):
        bits = field(msg, "bits", list)
        if len(bits) != len(self.sample_ids) or any(b not in (0, 1) for b in bits):
            raise ProtocolViolation("sample values do not match the requested sample")
        mine = self.key_bits(self.sample_ids)
        self.qber_est = float(np.mean(mine != np.asarray(bits, dtype=np.uint8)))
        verdict = check_abort(self.qber_est, self.config.abort_threshold)
        out = [{"t": "qber", "v": self.qber_est, "abort": verdict is Verdict.ABORT}]
        if verdict is Verdict.ABORT:
            self.aborted = True
            return out
        sampled = set(self.sample_ids)
        self.key_ids = [i for i in self.sifted_ids if i not in sampled]
        self._cascade = cascade(self.key_bits(self.key_ids), self.qber_est, self.config.ec_passes, self.rng)
        return out + self._advance(None)

    def _advance(self, answer: int | None) -> list[dict]:
        try:
            q = next(self._cascade) if answer is None else self._cascade.send(answer)
        except StopIteration as stop:
            self._key_arr, self.leak = stop.value
            self._pending = None
            self.fp_point = 1 + self.rng.uint63()
            self.leak += FP_BITS
            fp = fingerprint(self._key_arr, self.fp_point)
            return [{"t": "fp", "v": f"{fp:016x}", "x": f"{self.fp_point:016x}"}]
        self._pending = q
        return [{"t": "parity", "pass": q.pass_index, "lo": q.lo, "hi": q.hi, "seed": q.seed}]

    def on_parity(self, msg):
        q = getattr(self, "_pending", None)
        if self._cascade is None or q is None:
            raise ProtocolViolation("unsolicited parity")
        if (field(msg, "pass", int), field(msg, "lo", int), field(msg, "hi", int)) != (q.pass_index, q.lo, q.hi):
            raise ProtocolViolation("parity answer does not match the query")
        v = field(msg, "v", int)
        if v not in (0, 1):
            raise ProtocolViolation("parity must be 0 or 1")
        return self._advance(v)

    def on_pa(self, msg):
        if self._key_arr is None:
            raise ProtocolViolation("privacy amplification before reconciliation")
        seed, length = field(msg, "seed", int), field(msg, "len", int)
        self.final_len = final_length(len(self._key_arr), self.leak, self.qber_est, self.config.pa_safety)
        if length != self.final_len:
            raise ProtocolViolation(f"alice announced key length {length}, bob computed {self.final_len}")
        self.pa_seed = seed
        self.key = toeplitz_hash(self._key_arr, self.final_len, seed)
        self.finished = True
        return [{"t": "done"}]

    def on_done(self, msg):
        # alice only ends early after an abort or a fingerprint mismatch
        if not self.aborted:
            self.aborted = True
            self.verify_failed = self._key_arr is not None
        self.finished = True
        return []
