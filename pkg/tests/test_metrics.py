import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clusterquilt.errors import InvalidInputError
from clusterquilt.metrics import adjusted_rand_index, align_labels, contingency, misclustering_rate
from oracles import ari_pairs, best_bijection


labelings = st.integers(1, 12).flatmap(
    lambda n: st.tuples(st.integers(1, 5)).flatmap(
        lambda k: st.tuples(st.lists(st.integers(0, k[0] - 1), min_size=n, max_size=n),
                            st.lists(st.integers(0, k[0] - 1), min_size=n, max_size=n),
                            st.just(k[0]))))


def test_ari_examples():
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert adjusted_rand_index([1, 1, 2, 2], [2, 2, 1, 1]) == 1.0
    a, b = [1, 1, 1, 2, 2, 2], [1, 1, 2, 2, 2, 2]
    assert adjusted_rand_index(a, b) == pytest.approx(ari_pairs(a, b), abs=1e-12)


def test_ari_length_mismatch():
    with pytest.raises(InvalidInputError):
        adjusted_rand_index([0, 1], [0, 1, 1])
    with pytest.raises(InvalidInputError):
        misclustering_rate([0, 1], [0])


def test_ari_random_expectation_near_zero():
    rng = np.random.default_rng(0)
    vals = [adjusted_rand_index(rng.integers(3, size=200), rng.integers(3, size=200)) for _ in range(200)]
    assert abs(np.mean(vals)) < 0.01


def test_misclustering_examples():
    z = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2, 2])
    assert misclustering_rate(z, z) == 0.0
    zhat = z.copy()
    zhat[0] = 2
    assert misclustering_rate((zhat + 1) % 3, z) == pytest.approx(0.1)


def test_align_examples():
    assert align_labels([0, 1, 2, 2], [0, 1, 2, 2]) == {0: 0, 1: 1, 2: 2}
    assert align_labels([1, 1, 0, 0], [0, 0, 1, 1]) == {0: 1, 1: 0}


def test_align_k4_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(20):
        z = rng.integers(4, size=12)
        zhat = rng.integers(4, size=12)
        _, phi = best_bijection(zhat, z, 4)
        assert align_labels(zhat, z, n_clusters=4) == dict(enumerate(phi))


def test_align_out_of_range():
    with pytest.raises(InvalidInputError):
        align_labels([0, 5], [0, 1], n_clusters=2)


def test_contingency():
    C = contingency([0, 0, 1], ["a", "b", "b"])
    np.testing.assert_array_equal(C, [[1, 1], [0, 1]])


@given(labelings)
def test_ari_matches_pair_counting(case):
    a, b, _ = case
    assert adjusted_rand_index(a, b) == pytest.approx(ari_pairs(a, b), abs=1e-12)


@given(labelings)
def test_misclustering_matches_enumeration(case):
    a, b, K = case
    rate, phi = best_bijection(a, b, K)
    assert misclustering_rate(a, b, n_clusters=K) == rate
    assert align_labels(a, b, n_clusters=K) == dict(enumerate(phi))


@given(labelings, st.permutations(range(5)))
def test_ari_symmetric_and_relabel_invariant(case, perm):
    a, b, _ = case
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)
    relabeled = [perm[x] for x in a]
    assert adjusted_rand_index(relabeled, b) == pytest.approx(adjusted_rand_index(a, b), abs=1e-12)


@given(labelings)
def test_misclustering_range(case):
    a, b, K = case
    ell = misclustering_rate(a, b, n_clusters=K)
    assert 0.0 <= ell <= 1.0
    nz = contingency(a, b).astype(bool)
    # zero error exactly when the observed labels correspond one to one
    assert (ell == 0.0) == (nz.sum(1).max() == 1 and nz.sum(0).max() == 1)
