"""Toy classical cryptography: one-time pad, Caesar, textbook RSA, key-search cost.

None of this is fit for protecting anything.
"""

from __future__ import annotations

import enum
import math


class KeyExhausted(ValueError):
    """The pad is shorter than the message."""


class NotSemiprime(ValueError):
    pass


def otp_apply(message: bytes, key: bytes) -> bytes:
    if len(key) < len(message):
        raise KeyExhausted(f"pad has {len(key)} bytes left, message needs {len(message)}")
    return bytes(m ^ k for m, k in zip(message, key))


def two_time_pad(c1: bytes, c2: bytes) -> bytes:
    """XOR of two ciphertexts under the same pad; the pad cancels."""
    if len(c1) != len(c2):
        raise ValueError("ciphertexts differ in length")
    return bytes(a ^ b for a, b in zip(c1, c2))


class Direction(enum.Enum):
    ENCODE = "encode"
    DECODE = "decode"


def caesar(text: str, shift: int = 3, direction: Direction | str = Direction.ENCODE) -> str:
    direction = Direction(direction)
    k = shift % 26 if direction is Direction.ENCODE else -shift % 26
    out = []
    for ch in text:
        if "A" <= ch <= "Z":
            out.append(chr((ord(ch) - 65 + k) % 26 + 65))
        elif "a" <= ch <= "z":
            out.append(chr((ord(ch) - 97 + k) % 26 + 97))
        else:
            out.append(ch)
    return "".join(out)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, x, y) with a*x + b*y = g = gcd(a, b)."""
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def modinv(e: int, r: int) -> int:
    g, x, _ = egcd(e, r)
    if g != 1:
        raise ValueError(f"{e} has no inverse modulo {r} (gcd {g})")
    return x % r


def modpow(base: int, exp: int, mod: int) -> int:
    """Square-and-multiply."""
    result = 1 % mod
    base %= mod
    while exp > 0:
        if exp & 1:
            result = result * base % mod
        base = base * base % mod
        exp >>= 1
    return result


class RsaPublicKey:
    def __init__(self, N: int, e: int):
        if N < 1 or e < 1:
            raise ValueError("N and e must be positive")
        self.N, self.e = N, e

    def __repr__(self):
        return f"RsaPublicKey(N={self.N}, e={self.e})"

    def __eq__(self, other):
        return isinstance(other, RsaPublicKey) and (self.N, self.e) == (other.N, other.e)


class RsaPrivateKey:
    def __init__(self, d: int, N: int):
        self.d, self.N = d, N

    def __repr__(self):
        return f"RsaPrivateKey(d={self.d}, N={self.N})"

    def __eq__(self, other):
        return isinstance(other, RsaPrivateKey) and (self.d, self.N) == (other.d, other.N)


def rsa_keygen(p: int, q: int, e: int) -> tuple[RsaPublicKey, RsaPrivateKey]:
    if p == q:
        raise ValueError("p and q must be distinct")
    for x in (p, q):
        if not is_prime(x):
            raise ValueError(f"{x} is not prime")
    r = (p - 1) * (q - 1)
    if math.gcd(e, r) != 1:
        raise ValueError(f"gcd(e={e}, r={r}) = {math.gcd(e, r)}, need 1")
    return RsaPublicKey(p * q, e), RsaPrivateKey(modinv(e, r), p * q)


def rsa_encrypt(m: int, pub: RsaPublicKey) -> int:
    if not 0 <= m < pub.N:
        raise ValueError(f"message {m} outside [0, {pub.N})")
    return modpow(m, pub.e, pub.N)


def rsa_decrypt(y: int, priv: RsaPrivateKey) -> int:
    if not 0 <= y < priv.N:
        raise ValueError(f"ciphertext {y} outside [0, {priv.N})")
    return modpow(y, priv.d, priv.N)


CRACK_LIMIT = 10**12


def factor_semiprime(N: int) -> tuple[int, int]:
    """Trial division; returns p < q with p*q = N, both prime."""
    if N < 4:
        raise NotSemiprime(f"{N} is not a product of two distinct primes")
    if N > CRACK_LIMIT:
        raise ValueError(f"N={N} exceeds the desk-scale limit {CRACK_LIMIT}")
    f = 2
    while f * f <= N:
        if N % f == 0:
            q = N // f
            if q != f and is_prime(q):
                return f, q
            raise NotSemiprime(f"{N} is not a product of two distinct primes")
        f += 1 if f == 2 else 2
    raise NotSemiprime(f"{N} is prime")


def rsa_crack(pub: RsaPublicKey) -> RsaPrivateKey:
    p, q = factor_semiprime(pub.N)
    return RsaPrivateKey(modinv(pub.e, (p - 1) * (q - 1)), pub.N)


def search_cost(key_bits: int) -> tuple[int, int]:
    """(exhaustive-search queries, Grover queries) with O() constants dropped."""
    if not 0 <= key_bits <= 128:
        raise ValueError("key_bits must lie in [0, 128]")
    n = 1 << key_bits
    g = math.isqrt(n)
    if g * g < n:
        g += 1
    return n, g
