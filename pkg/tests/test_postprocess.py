import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdlab.qkd.postprocess import (
    EmptySampleError,
    KeyMaterial,
    SiftedKey,
    Verdict,
    binary_entropy,
    check_abort,
    choose_sample,
    estimate_qber,
    final_length,
    fingerprint,
    first_block_size,
    privacy_amplify,
    reconcile,
    sift,
    toeplitz_hash,
    toeplitz_seed_bits,
    verify_equal,
)
from qkdlab.rng import Rng


def dense_toeplitz(bits, out_len, seed):
    """Explicit matrix T[i, j] = r[i - j + n - 1], product over GF(2)."""
    n = len(bits)
    r = toeplitz_seed_bits(seed, n + out_len - 1)
    T = np.array([[r[i - j + n - 1] for j in range(n)] for i in range(out_len)], dtype=np.int64).reshape(out_len, n)
    return (T @ np.asarray(bits, dtype=np.int64)) % 2


def test_sift_keeps_matching_detected():
    assert sift([0, 1, 1, 0, 1], [0, 0, 1, 0, 1], [0, 2, 4]) == [0, 2, 4]
    assert sift([0, 1, 1], [0, 1, 1], [1]) == [1]
    with pytest.raises(ValueError):
        sift([0], [0, 1], [0])


def test_estimate_qber_and_remaining():
    a = SiftedKey(np.array([0, 1, 1, 0], np.uint8), np.array([2, 5, 7, 9]))
    b = SiftedKey(np.array([0, 0, 1, 1], np.uint8), np.array([2, 5, 7, 9]))
    q, rest = estimate_qber(a, b, [5, 7])
    assert q == 0.5 and rest == [2, 9]
    with pytest.raises(EmptySampleError):
        estimate_qber(a, b, [])


def test_choose_sample_size():
    ids = list(range(10, 110))
    s = choose_sample(ids, 0.25, Rng(0))
    assert len(s) == 25 and set(s) <= set(ids)
    assert len(choose_sample([3], 0.01, Rng(0))) == 1


def test_abort_threshold_is_strict():
    assert check_abort(0.10, 0.10) is Verdict.PROCEED
    assert check_abort(0.1001, 0.10) is Verdict.ABORT


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.03) == pytest.approx(0.19439, abs=5e-6)


def test_final_length_worked_instance():
    assert final_length(1000, 120, 0.03, 30) == 655
    assert final_length(100, 120, 0.03, 30) == 0


def test_first_block_size_clamped():
    assert first_block_size(1024, 0.046) == 16
    assert first_block_size(1024, 0.5) == 4
    assert first_block_size(10, 0.0) == 8
    assert first_block_size(3, 0.0) == 3


def test_cascade_identical_inputs_leak():
    bits = np.random.default_rng(1).integers(0, 2, 1024, dtype=np.uint8)
    out, leak, tr = reconcile(bits, bits.copy(), 0.046, 2, Rng(0))
    assert leak == 64 + 32
    assert np.array_equal(out, bits)
    assert sum(1 for m in tr if "v" in m) == leak


def test_single_error_costs_bisection():
    bits = np.random.default_rng(2).integers(0, 2, 1024, dtype=np.uint8)
    bob = bits.copy()
    bob[300] ^= 1
    # one pass of 64-bit blocks: 16 block parities plus log2(64) bisection parities
    out, leak, _ = reconcile(bits, bob, 0.0115, 1, Rng(0))
    assert first_block_size(1024, 0.0115) == 64
    assert np.array_equal(out, bits) and leak == 16 + 6


@pytest.mark.parametrize("q", [0.02, 0.05, 0.08])
def test_cascade_corrects_random_errors(q):
    gen = np.random.default_rng(int(q * 100))
    ok = 0
    for trial in range(20):
        a = gen.integers(0, 2, 4000, dtype=np.uint8)
        b = a ^ (gen.random(4000) < q).astype(np.uint8)
        out, leak, _ = reconcile(a, b, q, 4, Rng(trial))
        ok += np.array_equal(out, a)
        # leakage stays within a small factor of the Shannon bound
        assert leak < 2.0 * 4000 * binary_entropy(q) + 100
    assert ok >= 19


def test_fingerprint_detects_single_flips():
    gen = np.random.default_rng(3)
    missed = 0
    for k in range(10_000):
        a = gen.integers(0, 2, 256, dtype=np.uint8)
        b = a.copy()
        b[gen.integers(0, 256)] ^= 1
        missed += verify_equal(a, b, seed=k)
    assert missed == 0
    assert verify_equal(a, a.copy())


def test_fingerprint_horner_matches_sum():
    bits = [1, 0, 1, 1]
    x, p = 12345, (1 << 64) - 59
    direct = sum(b * pow(x, len(bits) - i, p) for i, b in enumerate(bits)) % p
    assert fingerprint(bits, x) == direct


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(0, 40), st.integers(1, 2**40))
def test_toeplitz_matches_dense(n, ell, seed):
    bits = np.random.default_rng(seed).integers(0, 2, n, dtype=np.uint8)
    assert np.array_equal(toeplitz_hash(bits, ell, seed), dense_toeplitz(bits, ell, seed))


def test_toeplitz_fft_path_matches_dense_rows():
    # large enough to take the FFT path; check a slice of rows against the definition
    n, ell, seed = 5000, 1000, 99
    bits = np.random.default_rng(4).integers(0, 2, n, dtype=np.uint8)
    out = toeplitz_hash(bits, ell, seed)
    r = toeplitz_seed_bits(seed, n + ell - 1).astype(np.int64)
    for i in (0, 1, 500, 999):
        row = r[i + n - 1 - np.arange(n)]
        assert out[i] == int(row @ bits) % 2


def test_privacy_amplify_length_and_linearity():
    gen = np.random.default_rng(5)
    a = gen.integers(0, 2, 1000, dtype=np.uint8)
    b = gen.integers(0, 2, 1000, dtype=np.uint8)
    ka = privacy_amplify(a, 120, 0.03, 30, 7)
    kb = privacy_amplify(b, 120, 0.03, 30, 7)
    kab = privacy_amplify(a ^ b, 120, 0.03, 30, 7)
    assert len(ka) == 655
    assert np.array_equal(ka.bits ^ kb.bits, kab.bits)


def test_key_hex_msb_first():
    assert KeyMaterial(np.array([1, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1], np.uint8)).hex() == "81f0"
