"""Seeded random streams.

Every party in a session draws from its own child stream, derived from the
master seed and a text label, so transcripts are reproducible and the same
party logic gives the same draws whether it runs in-process or over a socket.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

_BUF = 4096
_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


class Rng:
    """Counter-based (Philox) generator with labelled child streams.

    Not thread-safe; one owner per instance.
    """

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.path = path
        entropy = [seed] + [_label_key(p) for p in path]
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
        self._buf = np.empty(0)
        self._pos = 0

    def child(self, label: str) -> "Rng":
        return Rng(self.seed, self.path + (str(label),))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, path={'/'.join(self.path) or '-'})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BUF)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    def bit(self) -> int:
        return 1 if self.random() < 0.5 else 0

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        return int(self._gen.integers(lo, hi))

    def uint63(self) -> int:
        return int(self._gen.integers(0, 1 << 63))

    def poisson(self, mu: float) -> int:
        if mu < 0:
            raise ValueError("mu must be non-negative")
        if mu == 0:
            return 0
        if mu > 30:
            return int(self._gen.poisson(mu))
        # inverse transform on a single uniform keeps one draw per pulse
        u = self.random()
        k = 0
        p = math.exp(-mu)
        cdf = p
        while u > cdf:
            k += 1
            p *= mu / k
            cdf += p
            if p == 0.0:
                break
        return k

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def sample(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), sorted."""
        return np.sort(self._gen.choice(n, size=k, replace=False))


def derive_seed(master: int, index: int) -> int:
    """Child seed for the index-th run of a sweep."""
    h = hashlib.blake2b(f"{master}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "little")
