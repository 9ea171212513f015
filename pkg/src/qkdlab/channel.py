"""Photon sources, the lossy/noisy fiber, and eavesdropper strategies."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .qsim import Basis, PureState, measure, prepare
from .rng import Rng


@dataclass
class Pulse:
    id: int
    photons: list[PureState] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.photons)


@dataclass(frozen=True)
class SourceConfig:
    """Ideal single-photon source (mu is None) or weak coherent pulses with mean mu."""

    mu: float | None = None

    def __post_init__(self):
        if self.mu is not None and self.mu < 0:
            raise ValueError(f"mean photon number must be >= 0, got {self.mu}")

    @property
    def ideal(self) -> bool:
        return self.mu is None

    @classmethod
    def weak_coherent(cls, mu: float) -> "SourceConfig":
        return cls(mu=float(mu))


@dataclass(frozen=True)
class ChannelConfig:
    survive_prob: float = 1.0
    flip_x_prob: float = 0.0
    flip_z_prob: float = 0.0

    def __post_init__(self):
        for name in ("survive_prob", "flip_x_prob", "flip_z_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def noisy(cls, p: float, survive_prob: float = 1.0) -> "ChannelConfig":
        return cls(survive_prob=survive_prob, flip_x_prob=p, flip_z_prob=p)


class EveKind(enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"
    PNS = "pns"


class ResendPolicy(enum.Enum):
    ALWAYS_RECT = "rect"
    ALWAYS_DIAG = "diag"
    RANDOM = "random"


@dataclass(frozen=True)
class EveStrategy:
    kind: EveKind = EveKind.NONE
    policy: ResendPolicy | None = None

    @classmethod
    def none(cls) -> "EveStrategy":
        return cls()

    @classmethod
    def intercept_resend(cls, policy: ResendPolicy = ResendPolicy.RANDOM) -> "EveStrategy":
        return cls(EveKind.INTERCEPT_RESEND, policy)

    @classmethod
    def pns(cls) -> "EveStrategy":
        return cls(EveKind.PNS)

    @classmethod
    def parse(cls, text: str) -> "EveStrategy":
        """Accepts none, ir-random, ir-rect, ir-diag, pns."""
        t = text.strip().lower()
        if t in ("none", ""):
            return cls.none()
        if t == "pns":
            return cls.pns()
        if t.startswith("ir-") or t.startswith("ir_"):
            return cls.intercept_resend(ResendPolicy(t[3:]))
        if t == "ir":
            return cls.intercept_resend()
        raise ValueError(f"unknown eve strategy {text!r}")

    def __str__(self) -> str:
        if self.kind is EveKind.INTERCEPT_RESEND:
            return f"ir-{self.policy.value}"
        return self.kind.value


@dataclass
class EveLog:
    intercepted: dict[int, tuple[Basis, int]] = field(default_factory=dict)
    stored: dict[int, PureState] = field(default_factory=dict)
    guesses: dict[int, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.intercepted) + len(self.stored)


def emit(source: SourceConfig, bit: int, basis: Basis, rng: Rng, pulse_id: int = 0) -> Pulse:
    return emit_state(source, prepare(bit, basis), rng, pulse_id)


def emit_state(source: SourceConfig, state: PureState, rng: Rng, pulse_id: int = 0) -> Pulse:
    count = 1 if source.ideal else rng.poisson(source.mu)
    return Pulse(pulse_id, [state] * count)


def transmit(pulse: Pulse, channel: ChannelConfig, rng: Rng) -> Pulse:
    t, px, pz = channel.survive_prob, channel.flip_x_prob, channel.flip_z_prob
    out = []
    for ph in pulse.photons:
        if t < 1.0 and not rng.random() < t:
            continue
        if px > 0 and rng.random() < px:
            ph = PureState(ph.v, ph.h)
        if pz > 0 and rng.random() < pz:
            ph = PureState(ph.h, -ph.v)
        out.append(ph)
    return Pulse(pulse.id, out)


def _eve_basis(policy: ResendPolicy, rng: Rng) -> Basis:
    if policy is ResendPolicy.ALWAYS_RECT:
        return Basis.RECT
    if policy is ResendPolicy.ALWAYS_DIAG:
        return Basis.DIAG
    return Basis.from_bit(rng.bit())


def eve_apply(strategy: EveStrategy, pulse: Pulse, rng: Rng, log: EveLog) -> Pulse:
    if strategy.kind is EveKind.NONE or not pulse.photons:
        return pulse
    if pulse.id in log.intercepted or pulse.id in log.stored:
        raise ValueError(f"pulse {pulse.id} already handled by eve")
    if strategy.kind is EveKind.INTERCEPT_RESEND:
        basis = _eve_basis(strategy.policy, rng)
        bit, _ = measure(pulse.photons[0], basis, rng)
        log.intercepted[pulse.id] = (basis, bit)
        return Pulse(pulse.id, [prepare(bit, basis)])
    # photon-number splitting: keep one photon of any multiphoton pulse
    if pulse.count >= 2:
        log.stored[pulse.id] = pulse.photons[0]
        return Pulse(pulse.id, pulse.photons[1:])
    return pulse


def eve_finalize(
    log: EveLog,
    announced_bases: dict[int, Basis] | None,
    rng: Rng | None = None,
    two_state: bool = False,
) -> dict[int, int]:
    """Eve's bit guesses per pulse id, made after the bases are public.

    With `two_state` (B92) there are no announced bases; outcomes are mapped
    to the signal state they point at (H or V -> outcome, 45 -> 1, 135 -> 0).
    """
    guesses: dict[int, int] = {}
    for pid, (basis, bit) in log.intercepted.items():
        if two_state:
            guesses[pid] = bit if basis is Basis.RECT else 1 - bit
        elif announced_bases is None or pid in announced_bases:
            guesses[pid] = bit
    for pid, photon in log.stored.items():
        if two_state:
            if rng is None:
                raise ValueError("rng required to measure stored photons")
            basis = Basis.from_bit(rng.bit())
            bit, _ = measure(photon, basis, rng)
            guesses[pid] = bit if basis is Basis.RECT else 1 - bit
            continue
        if announced_bases is None or pid not in announced_bases:
            continue
        if rng is None:
            raise ValueError("rng required to measure stored photons")
        guesses[pid], _ = measure(photon, announced_bases[pid], rng)
    log.guesses = guesses
    return guesses
