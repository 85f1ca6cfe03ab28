import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pairfuse.core import SingleGroup, make_partition
from pairfuse.metrics import (CoincidentCentroids, EmptyBeta, LengthMismatch, davies_bouldin,
                              rand_index, rmse_beta, rmse_mu)


def rand_by_enumeration(a, b):
    agree = 0
    pairs = list(itertools.combinations(range(len(a)), 2))
    for i, j in pairs:
        agree += (a[i] == a[j]) == (b[i] == b[j])
    return agree / len(pairs)


def db_by_hand(values, labels):
    values, labels = np.asarray(values, float), np.asarray(labels)
    ks = sorted(set(labels.tolist()))
    c = {k: values[labels == k].mean() for k in ks}
    s = {k: np.mean(np.abs(values[labels == k] - c[k])) for k in ks}
    worst = [max((s[k] + s[m]) / abs(c[k] - c[m]) for m in ks if m != k) for k in ks]
    return sum(worst) / len(ks)


labelings = st.lists(st.integers(0, 4), min_size=2, max_size=25)


def test_rand_identical():
    assert rand_index([1, 1, 2, 3], [1, 1, 2, 3]) == 1.0


def test_rand_crossed_pairs():
    assert rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(1 / 3, abs=1e-15)


def test_rand_against_one_cluster():
    assert rand_index([1, 1, 2, 2], [1, 1, 1, 1]) == pytest.approx(1 / 3, abs=1e-15)


def test_rand_errors():
    with pytest.raises(LengthMismatch):
        rand_index([1, 2, 3], [1, 2])
    with pytest.raises(LengthMismatch):
        rand_index([1], [1])


@given(labelings, st.data())
def test_rand_matches_enumeration(a, data):
    b = data.draw(st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))
    assert rand_index(a, b) == pytest.approx(rand_by_enumeration(a, b), abs=1e-12)


@given(labelings, st.data())
def test_rand_symmetric_and_bounded(a, data):
    b = data.draw(st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))
    r = rand_index(a, b)
    assert 0.0 <= r <= 1.0
    assert r == rand_index(b, a)
    assert rand_index(a, a) == 1.0


@given(labelings, st.permutations(range(5)))
def test_rand_relabel_invariant(a, perm):
    relabeled = [perm[v] + 10 for v in a]
    other = sorted(a)
    assert rand_index(a, other) == rand_index(relabeled, other)


def test_db_zero_spread():
    assert davies_bouldin([0, 0, 10, 10], [1, 1, 2, 2]) == 0.0


def test_db_two_groups():
    assert davies_bouldin([0, 2, 10, 12], [1, 1, 2, 2]) == pytest.approx(0.2, abs=1e-15)


def test_db_accepts_partition():
    part = make_partition([1, 1, 2, 2])
    assert davies_bouldin([0, 2, 10, 12], part) == pytest.approx(0.2, abs=1e-15)


def test_db_errors():
    with pytest.raises(SingleGroup):
        davies_bouldin([1, 2, 3], [1, 1, 1])
    with pytest.raises(CoincidentCentroids):
        davies_bouldin([0, 2, 1, 1], [1, 1, 2, 2])
    with pytest.raises(LengthMismatch):
        davies_bouldin([0, 1, 2], [1, 2])


def test_db_three_groups_by_hand(rng):
    v = np.concatenate([rng.normal(m, 0.3, 7) for m in (-2, 0, 3)])
    lab = np.repeat([1, 2, 3], 7)
    assert davies_bouldin(v, lab) == pytest.approx(db_by_hand(v, lab), rel=1e-12)


@given(st.floats(-1e3, 1e3), st.floats(0.01, 100.0))
def test_db_shift_and_scale_invariant(shift, scale):
    v = np.array([0.0, 1.5, 2.0, 9.0, 11.0, 10.0, 20.0, 21.0])
    lab = [1, 1, 1, 2, 2, 2, 3, 3]
    base = davies_bouldin(v, lab)
    assert davies_bouldin(v + shift, lab) == pytest.approx(base, rel=1e-9)
    assert davies_bouldin(v * scale, lab) == pytest.approx(base, rel=1e-9)


def test_rmse_examples():
    assert rmse_mu([1, 2, 3], [1, 2, 3]) == 0.0
    assert rmse_mu([1, 1, 1, 1], [0, 0, 0, 0]) == 1.0
    assert rmse_beta([0.5, 0.5], [0.0, 0.0]) == pytest.approx(0.5)


def test_rmse_errors():
    with pytest.raises(LengthMismatch):
        rmse_mu([1, 2], [1, 2, 3])
    with pytest.raises(LengthMismatch):
        rmse_beta([1.0], [1.0, 2.0])
    with pytest.raises(EmptyBeta):
        rmse_beta([], [])
