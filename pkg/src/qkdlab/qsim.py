"""Exact one- and two-qubit polarization simulator.

States are stored as complex amplitudes in the {H, V} basis; two-qubit
amplitudes are ordered (HH, HV, VH, VV). Analyzer angles are in degrees.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .rng import Rng

TOL = 1e-9
_S = 1 / math.sqrt(2)


class Basis(enum.Enum):
    RECT = 0
    DIAG = 1

    @property
    def angle(self) -> float:
        return 0.0 if self is Basis.RECT else 45.0

    @property
    def other(self) -> "Basis":
        return Basis.DIAG if self is Basis.RECT else Basis.RECT

    @classmethod
    def from_bit(cls, b: int) -> "Basis":
        return cls.DIAG if b else cls.RECT


class Polarization(enum.Enum):
    H = (0, Basis.RECT)
    V = (1, Basis.RECT)
    D45 = (0, Basis.DIAG)
    D135 = (1, Basis.DIAG)

    @property
    def bit(self) -> int:
        return self.value[0]

    @property
    def basis(self) -> Basis:
        return self.value[1]

    @classmethod
    def of(cls, bit: int, basis: Basis) -> "Polarization":
        return _POL[(bit, basis)]

    @property
    def state(self) -> "PureState":
        return _VEC[self]


_POL = {p.value: p for p in Polarization}


class NormError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class PureState:
    h: complex
    v: complex

    def __post_init__(self):
        n = abs(self.h) ** 2 + abs(self.v) ** 2
        if abs(n - 1.0) > TOL:
            raise NormError(f"state not normalized (norm^2 = {n!r})")

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=complex)

    @classmethod
    def from_amplitudes(cls, amps) -> "PureState":
        return cls(complex(amps[0]), complex(amps[1]))

    def norm(self) -> float:
        return math.sqrt(abs(self.h) ** 2 + abs(self.v) ** 2)

    def inner(self, other: "PureState") -> complex:
        return self.h.conjugate() * other.h + self.v.conjugate() * other.v

    def density(self) -> np.ndarray:
        a = self.amplitudes
        return np.outer(a, a.conj())


@dataclass(frozen=True, slots=True)
class TwoQubitState:
    amps: tuple[complex, complex, complex, complex]

    def __post_init__(self):
        n = sum(abs(a) ** 2 for a in self.amps)
        if abs(n - 1.0) > TOL:
            raise NormError(f"state not normalized (norm^2 = {n!r})")

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array(self.amps, dtype=complex)

    @classmethod
    def from_amplitudes(cls, amps) -> "TwoQubitState":
        return cls(tuple(complex(a) for a in amps))

    @classmethod
    def product(cls, a: PureState, b: PureState) -> "TwoQubitState":
        return cls((a.h * b.h, a.h * b.v, a.v * b.h, a.v * b.v))

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amps))


_VEC = {
    Polarization.H: PureState(1 + 0j, 0j),
    Polarization.V: PureState(0j, 1 + 0j),
    Polarization.D45: PureState(_S + 0j, _S + 0j),
    Polarization.D135: PureState(_S + 0j, -_S + 0j),
}


def prepare(bit: int, basis: Basis) -> PureState:
    return _VEC[_POL[(bit, basis)]]


def analyzer(theta: float) -> tuple[PureState, PureState]:
    """Outcome-0 and outcome-1 vectors of a polarizer at `theta` degrees."""
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    return PureState(complex(c), complex(s)), PureState(complex(-s), complex(c))


def _basis_vectors(basis: Basis) -> tuple[PureState, PureState]:
    return prepare(0, basis), prepare(1, basis)


def _check(state: PureState) -> None:
    n = abs(state.h) ** 2 + abs(state.v) ** 2
    if abs(n - 1.0) > TOL:
        raise NormError(f"state not normalized (norm^2 = {n!r})")


def probabilities(state: PureState, basis: Basis | float) -> tuple[float, float]:
    b0, _ = _basis_vectors(basis) if isinstance(basis, Basis) else analyzer(basis)
    p0 = abs(b0.inner(state)) ** 2
    p0 = min(max(p0, 0.0), 1.0)
    return p0, 1.0 - p0


def _measure(state: PureState, vecs: tuple[PureState, PureState], rng: Rng) -> tuple[int, PureState]:
    _check(state)
    p0 = abs(vecs[0].inner(state)) ** 2
    bit = 0 if rng.random() < p0 else 1
    return bit, vecs[bit]


def measure(state: PureState, basis: Basis, rng: Rng) -> tuple[int, PureState]:
    return _measure(state, _basis_vectors(basis), rng)


def measure_angle(state: PureState, theta: float, rng: Rng) -> tuple[int, PureState]:
    return _measure(state, analyzer(theta), rng)


def singlet() -> TwoQubitState:
    return TwoQubitState((0j, _S + 0j, -_S + 0j, 0j))


_HAD = np.array([[1, 1], [1, -1]], dtype=complex) * _S


def _change_matrix(basis: Basis) -> np.ndarray:
    return np.eye(2, dtype=complex) if basis is Basis.RECT else _HAD


def change_basis(state: PureState | TwoQubitState, basis: Basis) -> np.ndarray:
    """Amplitudes of `state` re-expressed in `basis` (per qubit for pairs).

    Diagonal coordinates are taken against (45°, 135°), so the map is an
    involution.
    """
    m = _change_matrix(basis)
    if isinstance(state, PureState):
        return m @ state.amplitudes
    return np.kron(m, m) @ state.amplitudes


def equal_up_to_phase(a, b, tol: float = TOL) -> bool:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    k = int(np.argmax(np.abs(b)))
    if abs(b[k]) < tol:
        return bool(np.max(np.abs(a)) < tol)
    phase = a[k] / b[k]
    if abs(abs(phase) - 1) > tol:
        return False
    return bool(np.max(np.abs(a - phase * b)) < tol)


def _pair_probs(state: TwoQubitState, va: tuple[PureState, PureState], vb: tuple[PureState, PureState]):
    psi = state.amplitudes.reshape(2, 2)
    ua = np.array([[va[0].h, va[0].v], [va[1].h, va[1].v]]).conj()
    ub = np.array([[vb[0].h, vb[0].v], [vb[1].h, vb[1].v]]).conj()
    c = ua @ psi @ ub.T
    return np.abs(c) ** 2


def measure_pair_angles(state: TwoQubitState, theta_a: float, theta_b: float, rng: Rng) -> tuple[int, int]:
    probs = _pair_probs(state, analyzer(theta_a), analyzer(theta_b)).ravel()
    u = rng.random() * probs.sum()
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k >> 1, k & 1
    return 1, 1


def measure_pair(state: TwoQubitState, basis_a: Basis, basis_b: Basis, rng: Rng) -> tuple[int, int]:
    probs = _pair_probs(state, _basis_vectors(basis_a), _basis_vectors(basis_b)).ravel()
    u = rng.random() * probs.sum()
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k >> 1, k & 1
    return 1, 1


def measure_qubit(
    state: TwoQubitState, which: int, basis: Basis | float, rng: Rng
) -> tuple[int, PureState]:
    """Measure one qubit of a pair; return its outcome and the other qubit's collapsed state."""
    vecs = _basis_vectors(basis) if isinstance(basis, Basis) else analyzer(basis)
    hh, hv, vh, vv = state.amps
    if which == 1:
        hv, vh = vh, hv
    elif which != 0:
        raise ValueError("which must be 0 or 1")
    # amplitude of the remaining qubit given outcome k on the measured one
    cond = []
    for vec in vecs:
        ch, cv = vec.h.conjugate(), vec.v.conjugate()
        cond.append((ch * hh + cv * vh, ch * hv + cv * vv))
    p0 = abs(cond[0][0]) ** 2 + abs(cond[0][1]) ** 2
    bit = 0 if rng.random() < p0 else 1
    h, v = cond[bit]
    norm = math.sqrt(abs(h) ** 2 + abs(v) ** 2)
    return bit, PureState(h / norm, v / norm)


def reduced_density(state: TwoQubitState, which: str = "second") -> np.ndarray:
    psi = state.amplitudes.reshape(2, 2)
    rho = np.einsum("ij,kl->ijkl", psi, psi.conj())
    if which == "first":
        return np.einsum("ijkj->ik", rho)
    if which == "second":
        return np.einsum("ijil->jl", rho)
    raise ValueError("which must be 'first' or 'second'")


def _basis_unitary(vecs: tuple[PureState, PureState]) -> np.ndarray:
    """U with U|b_k> = |k>."""
    return np.array([[vecs[0].h, vecs[0].v], [vecs[1].h, vecs[1].v]], dtype=complex).conj()


_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def ancilla_unitary(basis: Basis | float) -> np.ndarray:
    """Controlled-copy of the system's `basis` value onto an ancilla (system ⊗ ancilla)."""
    vecs = _basis_vectors(basis) if isinstance(basis, Basis) else analyzer(basis)
    u = np.kron(_basis_unitary(vecs), np.eye(2))
    return u.conj().T @ _CNOT @ u


def measure_via_ancilla(state: PureState, basis: Basis, rng: Rng) -> tuple[int, PureState]:
    """Measurement as a unitary on system+ancilla followed by reading the ancilla."""
    _check(state)
    joint = ancilla_unitary(basis) @ np.kron(state.amplitudes, np.array([1, 0], dtype=complex))
    joint = joint.reshape(2, 2)  # [system, ancilla]
    p0 = float(np.vdot(joint[:, 0], joint[:, 0]).real)
    bit = 0 if rng.random() < p0 else 1
    sys_state = joint[:, bit] / np.linalg.norm(joint[:, bit])
    out = PureState.from_amplitudes(sys_state)
    # strip the global phase so the result is the canonical basis vector
    ref = prepare(bit, basis)
    phase = ref.inner(out)
    return bit, PureState(out.h / phase, out.v / phase)


def correlation(state: TwoQubitState, theta_a: float, theta_b: float) -> float:
    """Exact ±1-outcome correlation for analyzers at the given angles."""
    p = _pair_probs(state, analyzer(theta_a), analyzer(theta_b))
    return float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0])


def chsh_value(
    state: TwoQubitState,
    angles_a: tuple[float, float],
    angles_b: tuple[float, float],
    n_trials: int,
    rng: Rng,
) -> float:
    """Monte Carlo estimate of E(a,b) - E(a,b') + E(a',b) + E(a',b')."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    a, a2 = angles_a
    b, b2 = angles_b
    pairs = [(a, b, 1), (a, b2, -1), (a2, b, 1), (a2, b2, 1)]
    base, extra = divmod(n_trials, 4)
    s = 0.0
    for k, (ta, tb, sign) in enumerate(pairs):
        m = base + (1 if k < extra else 0)
        if m == 0:
            continue
        tot = 0
        for _ in range(m):
            x, rest = measure_qubit(state, 0, ta, rng)
            y, _ = measure_angle(rest, tb, rng)
            tot += 1 if x == y else -1
        s += sign * tot / m
    return s


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(rho - sigma)
    return float(0.5 * np.sum(np.abs(ev)))
