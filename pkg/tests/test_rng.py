import numpy as np
import pytest
from scipy import stats

from qkdlab.rng import Rng, derive_seed


def test_same_seed_same_stream():
    a, b = Rng(42), Rng(42)
    assert [a.random() for _ in range(10)] == [b.random() for _ in range(10)]


def test_children_are_independent_of_parent_use():
    a = Rng(1)
    c1 = a.child("bob")
    b = Rng(1)
    for _ in range(500):
        b.random()
    c2 = b.child("bob")
    assert [c1.bit() for _ in range(64)] == [c2.bit() for _ in range(64)]


def test_labels_differ():
    r = Rng(7)
    assert [r.child("alice").uint63() for _ in range(3)] != [r.child("bob").uint63() for _ in range(3)]


def test_poisson_moments():
    r = Rng(3)
    xs = np.array([r.poisson(0.2) for _ in range(50_000)])
    assert abs(xs.mean() - 0.2) < 5 * np.sqrt(0.2 / xs.size)
    counts = np.bincount(xs, minlength=4)[:3]
    expect = stats.poisson.pmf(range(3), 0.2) * xs.size
    assert np.all(np.abs(counts - expect) < 5 * np.sqrt(expect))
    with pytest.raises(ValueError):
        r.poisson(-1)


def test_sample_distinct_sorted():
    s = Rng(0).sample(100, 30)
    assert len(set(s.tolist())) == 30 and np.all(np.diff(s) > 0)


def test_derive_seed_stable():
    assert derive_seed(5, 0) == derive_seed(5, 0)
    assert derive_seed(5, 0) != derive_seed(5, 1)
    assert 0 <= derive_seed(5, 3) < 1 << 64
