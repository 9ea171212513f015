"""BB84-style quantum bit commitment and the two ways Alice can try to cheat.

Committing to 0 sends n photons in the rectilinear basis, committing to 1
uses the diagonal basis; each photon's bit is a fresh coin flip. Bob keeps
the photons unmeasured until Alice opens.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .qsim import Basis, PureState, TwoQubitState, measure, measure_qubit, prepare, reduced_density, singlet, trace_distance
from .rng import Rng


class Mode(enum.Enum):
    HONEST = "honest"
    EPR_CHEAT = "epr_cheat"


class Outcome(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class CommitError(ValueError):
    pass


class SharedPair:
    """An EPR pair whose halves live with different parties.

    Measuring either half collapses the other one.
    """

    def __init__(self, state: TwoQubitState):
        self.joint: TwoQubitState | None = state
        self.collapsed: list[PureState | None] = [None, None]

    def measure_half(self, which: int, basis: Basis, rng: Rng) -> int:
        if self.joint is not None:
            bit, other = measure_qubit(self.joint, which, basis, rng)
            self.joint = None
            self.collapsed[1 - which] = other
            self.collapsed[which] = prepare(bit, basis)
            return bit
        state = self.collapsed[which]
        bit, after = measure(state, basis, rng)
        self.collapsed[which] = after
        return bit

    def density(self, which: int) -> np.ndarray:
        if self.joint is not None:
            return reduced_density(self.joint, "first" if which == 0 else "second")
        return self.collapsed[which].density()


@dataclass
class BobPhoton:
    """A photon in Bob's hands: either a pure state or one half of a shared pair."""

    state: PureState | None = None
    pair: SharedPair | None = None

    def measure(self, basis: Basis, rng: Rng) -> int:
        if self.pair is not None:
            return self.pair.measure_half(1, basis, rng)
        bit, self.state = measure(self.state, basis, rng)
        return bit

    def density(self) -> np.ndarray:
        if self.pair is not None:
            return self.pair.density(1)
        return self.state.density()


@dataclass
class BobHolding:
    photons: list[BobPhoton]
    measured: bool = False

    def __len__(self) -> int:
        return len(self.photons)


@dataclass
class CommitRecord:
    mode: Mode
    n: int
    committed_bit: int | None = None
    flips: list[int] = field(default_factory=list)
    pairs: list[SharedPair] = field(default_factory=list)
    opened: bool = False


@dataclass(frozen=True)
class Opening:
    claimed_basis: Basis
    claimed_bits: tuple[int, ...]


def commit(bit: int, n: int, rng: Rng) -> tuple[CommitRecord, BobHolding]:
    if n < 1:
        raise CommitError("a commitment needs at least one photon")
    if bit not in (0, 1):
        raise CommitError("bit must be 0 or 1")
    basis = Basis.from_bit(bit)
    flips = [rng.bit() for _ in range(n)]
    holding = BobHolding([BobPhoton(state=prepare(f, basis)) for f in flips])
    return CommitRecord(Mode.HONEST, n, bit, flips), holding


def open_honest(record: CommitRecord) -> Opening:
    if record.mode is not Mode.HONEST:
        raise CommitError("only an honest record can be opened honestly")
    return Opening(Basis.from_bit(record.committed_bit), tuple(record.flips))


def verify(holding: BobHolding, opening: Opening, rng: Rng) -> Outcome:
    if len(opening.claimed_bits) != len(holding):
        raise CommitError(f"opening claims {len(opening.claimed_bits)} bits for {len(holding)} photons")
    if holding.measured:
        raise CommitError("bob already measured this holding")
    holding.measured = True
    ok = True
    for photon, claimed in zip(holding.photons, opening.claimed_bits):
        # measure everything so the holding is fully consumed either way
        if photon.measure(opening.claimed_basis, rng) != claimed:
            ok = False
    return Outcome.ACCEPT if ok else Outcome.REJECT


def cheat_classical(record: CommitRecord, desired_bit: int) -> Opening:
    """Lie about the basis, announcing the original coin flips."""
    if record.mode is not Mode.HONEST:
        raise CommitError("classical cheating starts from an honest commitment")
    if desired_bit == record.committed_bit:
        raise CommitError("desired bit equals the committed bit; nothing to cheat")
    return Opening(Basis.from_bit(desired_bit), tuple(record.flips))


def cheat_classical_zeros(record: CommitRecord, desired_bit: int) -> Opening:
    """Same lie, announcing all zeros. Acceptance statistics match cheat_classical."""
    op = cheat_classical(record, desired_bit)
    return Opening(op.claimed_basis, (0,) * record.n)


def cheat_epr_commit(n: int, rng: Rng) -> tuple[CommitRecord, BobHolding]:
    if n < 1:
        raise CommitError("a commitment needs at least one photon")
    pairs = [SharedPair(singlet()) for _ in range(n)]
    holding = BobHolding([BobPhoton(pair=p) for p in pairs])
    return CommitRecord(Mode.EPR_CHEAT, n, pairs=pairs), holding


def cheat_epr_open(record: CommitRecord, desired_bit: int, rng: Rng) -> Opening:
    """Measure the kept halves in the basis of `desired_bit` and claim the opposite results."""
    if record.mode is not Mode.EPR_CHEAT:
        raise CommitError("not an EPR-cheat record")
    if record.opened:
        raise CommitError("stored halves were already measured")
    record.opened = True
    basis = Basis.from_bit(desired_bit)
    outcomes = [p.measure_half(0, basis, rng) for p in record.pairs]
    record.committed_bit = desired_bit
    return Opening(basis, tuple(1 - b for b in outcomes))


def average_density(holdings) -> np.ndarray:
    """Bob's per-photon density matrix averaged over an ensemble of holdings.

    Accepts BobHolding objects, lists of photons, or bare PureStates.
    """
    total = np.zeros((2, 2), dtype=complex)
    count = 0
    for h in holdings:
        items = h.photons if isinstance(h, BobHolding) else (h if isinstance(h, (list, tuple)) else [h])
        for item in items:
            total += item.density()
            count += 1
    if count == 0:
        raise CommitError("empty ensemble")
    return total / count


def bob_distinguish(holdings_for_bit0, holdings_for_bit1) -> float:
    """Trace distance between Bob's average states for the two commitments."""
    return trace_distance(average_density(holdings_for_bit0), average_density(holdings_for_bit1))
