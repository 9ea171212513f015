"""Classical post-processing: sifting, error estimation, Cascade, hashing."""

from __future__ import annotations

import enum
import math
from collections.abc import Generator, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..qsim import Basis
from ..rng import Rng

FP_MODULUS = (1 << 64) - 59  # largest prime below 2**64
FP_BITS = 64


class EmptySampleError(ValueError):
    pass


@dataclass
class SiftedKey:
    bits: np.ndarray
    pulse_ids: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        self.pulse_ids = np.asarray(self.pulse_ids, dtype=np.int64)
        if self.bits.shape != self.pulse_ids.shape:
            raise ValueError("bits and pulse_ids must have equal length")

    def __len__(self) -> int:
        return len(self.bits)

    def select(self, ids: Sequence[int]) -> "SiftedKey":
        pos = np.searchsorted(self.pulse_ids, ids)
        return SiftedKey(self.bits[pos], self.pulse_ids[pos])

    @classmethod
    def from_mapping(cls, bits: dict[int, int], ids: Sequence[int]) -> "SiftedKey":
        ids = np.asarray(ids, dtype=np.int64)
        return cls(np.array([bits[int(i)] for i in ids], dtype=np.uint8), ids)


@dataclass
class KeyMaterial:
    bits: np.ndarray

    def __len__(self) -> int:
        return len(self.bits)

    def hex(self) -> str:
        """Bits packed MSB-first, zero-padded to a whole byte, lowercase hex."""
        return np.packbits(np.asarray(self.bits, dtype=np.uint8)).tobytes().hex()

    def __eq__(self, other) -> bool:
        return isinstance(other, KeyMaterial) and np.array_equal(self.bits, other.bits)


class Verdict(enum.Enum):
    PROCEED = "proceed"
    ABORT = "abort"


def sift(alice_bases: Sequence, bob_bases: Sequence, detected_ids) -> list[int]:
    """Ids where both used the same basis and Bob saw a photon, in order."""
    if len(alice_bases) != len(bob_bases):
        raise ValueError(f"basis lists differ in length ({len(alice_bases)} vs {len(bob_bases)})")
    detected = set(int(i) for i in detected_ids)
    return [i for i, (a, b) in enumerate(zip(alice_bases, bob_bases)) if a == b and i in detected]


def choose_sample(pulse_ids: Sequence[int], fraction: float, rng: Rng) -> list[int]:
    ids = np.asarray(pulse_ids, dtype=np.int64)
    m = min(len(ids), max(1, int(round(fraction * len(ids))))) if len(ids) else 0
    if m == 0:
        return []
    return ids[rng.sample(len(ids), m)].tolist()


def estimate_qber(alice: SiftedKey, bob: SiftedKey, sample_ids: Sequence[int]) -> tuple[float, list[int]]:
    """Mismatch rate on the announced sample, and the ids left for the key."""
    if len(sample_ids) == 0:
        raise EmptySampleError("cannot estimate the error rate from an empty sample")
    if not np.array_equal(alice.pulse_ids, bob.pulse_ids):
        raise ValueError("alice and bob sifted keys cover different pulses")
    a = alice.select(sample_ids)
    if not np.array_equal(a.pulse_ids, np.asarray(sample_ids)):
        raise ValueError("sample ids must be a subset of the sifted ids")
    b = bob.select(sample_ids)
    q = float(np.mean(a.bits != b.bits))
    sampled = set(int(i) for i in sample_ids)
    remaining = [int(i) for i in alice.pulse_ids if int(i) not in sampled]
    return q, remaining


def check_abort(qber_est: float, threshold: float = 0.10) -> Verdict:
    return Verdict.ABORT if qber_est > threshold else Verdict.PROCEED


def binary_entropy(q: float) -> float:
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return -q * math.log2(q) - (1 - q) * math.log2(1 - q)


def first_block_size(n: int, qber_est: float) -> int:
    if n == 0:
        return 0
    k = math.ceil(0.73 / max(qber_est, 1.0 / n))
    return min(max(k, 4), n)


def parity(bits: np.ndarray, order: np.ndarray | None, lo: int, hi: int) -> int:
    seg = bits[lo:hi] if order is None else bits[order[lo:hi]]
    return int(np.bitwise_xor.reduce(seg)) if len(seg) else 0


def pass_order(n: int, seed: int) -> np.ndarray | None:
    """Position order for a Cascade pass; seed 0 means the identity."""
    if seed == 0:
        return None
    return np.random.Generator(np.random.Philox(seed)).permutation(n)


@dataclass(frozen=True)
class ParityQuery:
    pass_index: int
    lo: int
    hi: int
    seed: int


def cascade(
    bob_bits: np.ndarray, qber_est: float, passes: int, rng: Rng
) -> Generator[ParityQuery, int, tuple[np.ndarray, int]]:
    """Bob's side of Cascade as a coroutine.

    Yields parity queries over [lo, hi) of a pass's permuted order and expects
    Alice's parity sent back. Returns (corrected bits, number of disclosed
    parities). Bits are never discarded.
    """
    bits = np.array(bob_bits, dtype=np.uint8)
    n = len(bits)
    if n == 0 or passes <= 0:
        return bits, 0
    k1 = first_block_size(n, qber_est)
    orders: list[np.ndarray | None] = []
    where: list[np.ndarray | None] = []
    sizes: list[int] = []
    seeds: list[int] = []
    known: dict[tuple[int, int, int], int] = {}
    leak = 0

    def ask(p: int, lo: int, hi: int):
        nonlocal leak
        key = (p, lo, hi)
        if key not in known:
            known[key] = yield ParityQuery(p, lo, hi, seeds[p])
            leak += 1
        return known[key]

    def block_of(p: int, j: int) -> tuple[int, int]:
        pos = j if where[p] is None else int(where[p][j])
        lo = (pos // sizes[p]) * sizes[p]
        return lo, min(lo + sizes[p], n)

    def bisect(p: int, lo: int, hi: int):
        order = orders[p]
        while hi - lo > 1:
            mid = (lo + hi) // 2
            a = yield from ask(p, lo, mid)
            if a != parity(bits, order, lo, mid):
                hi = mid
            else:
                lo = mid
        return lo if order is None else int(order[lo])

    def fix(p: int, lo: int, hi: int):
        queue = [(p, lo, hi)]
        while queue:
            q, blo, bhi = queue.pop()
            if known[(q, blo, bhi)] == parity(bits, orders[q], blo, bhi):
                continue
            j = yield from bisect(q, blo, bhi)
            bits[j] ^= 1
            for r in range(len(orders)):
                if r == q:
                    continue
                rlo, rhi = block_of(r, j)
                if (r, rlo, rhi) in known:
                    queue.append((r, rlo, rhi))

    for p in range(passes):
        size = min(k1 * (2**p), n)
        seed = 0 if p == 0 else rng.uint63() | 1
        order = pass_order(n, seed)
        orders.append(order)
        seeds.append(seed)
        sizes.append(size)
        if order is None:
            where.append(None)
        else:
            inv = np.empty(n, dtype=np.int64)
            inv[order] = np.arange(n)
            where.append(inv)
        for lo in range(0, n, size):
            hi = min(lo + size, n)
            a = yield from ask(p, lo, hi)
            if a != parity(bits, order, lo, hi):
                yield from fix(p, lo, hi)
    return bits, leak


def answer_parity(alice_bits: np.ndarray, query: ParityQuery, cache: dict | None = None) -> int:
    """Alice's reply to a parity query."""
    order = None
    if query.seed:
        if cache is not None and query.seed in cache:
            order = cache[query.seed]
        else:
            order = pass_order(len(alice_bits), query.seed)
            if cache is not None:
                cache[query.seed] = order
    return parity(alice_bits, order, query.lo, query.hi)


def reconcile(
    alice_bits, bob_bits, qber_est: float, ec_passes: int, rng: Rng
) -> tuple[np.ndarray, int, list[dict]]:
    """Run Cascade locally; returns (bob corrected, leaked parities, parity messages)."""
    alice_bits = np.asarray(alice_bits, dtype=np.uint8)
    bob_bits = np.asarray(bob_bits, dtype=np.uint8)
    if alice_bits.shape != bob_bits.shape:
        raise ValueError("alice and bob keys differ in length")
    transcript: list[dict] = []
    cache: dict = {}
    co = cascade(bob_bits, qber_est, ec_passes, rng)
    try:
        q = next(co)
        while True:
            transcript.append({"t": "parity", "pass": q.pass_index, "lo": q.lo, "hi": q.hi, "seed": q.seed})
            v = answer_parity(alice_bits, q, cache)
            transcript.append({"t": "parity", "pass": q.pass_index, "lo": q.lo, "hi": q.hi, "v": v})
            q = co.send(v)
    except StopIteration as stop:
        corrected, leak = stop.value
    return corrected, leak, transcript


def fingerprint(bits, point: int) -> int:
    """Polynomial hash sum(b_i * point**(i+1)) mod a fixed 64-bit prime."""
    h = 0
    for b in np.asarray(bits, dtype=np.uint8).tolist():
        h = (h + b) * point % FP_MODULUS
    return h


def fingerprint_point(seed: int) -> int:
    return 1 + seed % (FP_MODULUS - 1)


def verify_equal(alice_bits, bob_bits, seed: int = 0x5EED) -> bool:
    """Compare 64-bit public fingerprints of both strings (costs FP_BITS of leakage)."""
    x = fingerprint_point(seed)
    return fingerprint(alice_bits, x) == fingerprint(bob_bits, x)


def final_length(n: int, leak_bits: int, qber_est: float, s: int) -> int:
    q = min(max(qber_est, 0.0), 0.5)
    return max(0, n - leak_bits - math.ceil(n * binary_entropy(q)) - s)


def toeplitz_seed_bits(pa_seed: int, count: int) -> np.ndarray:
    return np.random.Generator(np.random.Philox(pa_seed)).integers(0, 2, size=count, dtype=np.uint8)


def toeplitz_hash(bits, out_len: int, pa_seed: int) -> np.ndarray:
    """Multiply `bits` by an out_len x n Toeplitz matrix over GF(2).

    Entry (i, j) is r[i - j + n - 1] for seed bits r of length n + out_len - 1.
    """
    x = np.asarray(bits, dtype=np.uint8)
    n = len(x)
    if out_len == 0 or n == 0:
        return np.zeros(0, dtype=np.uint8)
    r = toeplitz_seed_bits(pa_seed, n + out_len - 1)
    if n * out_len <= 1 << 22:
        conv = np.convolve(r.astype(np.int64), x.astype(np.int64))
    else:
        conv = np.rint(fftconvolve(r.astype(np.float64), x.astype(np.float64))).astype(np.int64)
    return (conv[n - 1 : n - 1 + out_len] & 1).astype(np.uint8)


def privacy_amplify(bits, leak_bits: int, qber_est: float, s: int, pa_seed: int) -> KeyMaterial:
    bits = np.asarray(bits, dtype=np.uint8)
    ell = final_length(len(bits), leak_bits, qber_est, s)
    return KeyMaterial(toeplitz_hash(bits, ell, pa_seed))


def basis_bits(bases: Sequence[Basis]) -> list[int]:
    return [b.value for b in bases]
