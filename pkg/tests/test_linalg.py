import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clusterquilt.errors import InvalidInputError, InvalidRankError, SingularTransformError
from clusterquilt.linalg import (canonical_svd, fix_signs, invert_square, least_squares_transform,
                                 rth_singular_value, spectral_norm, truncated_svd)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def matrices(draw, max_side=20):
    m = draw(st.integers(1, max_side))
    n = draw(st.integers(1, max_side))
    return draw(arrays(np.float64, (m, n), elements=finite))


def test_identity_svd():
    U, s, V = truncated_svd(np.eye(2), 2)
    np.testing.assert_array_equal(U, np.eye(2))
    np.testing.assert_array_equal(s, [1.0, 1.0])
    np.testing.assert_array_equal(V, np.eye(2))


def test_rank_one_by_hand():
    # A^T A = [[5, 10], [10, 20]] has eigenvalues 0 and 25
    U, s, V = truncated_svd([[1, 2], [2, 4]], 1)
    assert s[0] == pytest.approx(5.0)
    np.testing.assert_allclose(U[:, 0], np.array([1, 2]) / np.sqrt(5), atol=1e-12)


def test_zero_matrix():
    svd = truncated_svd(np.zeros((3, 2)), 2)
    np.testing.assert_array_equal(svd.sigma, [0.0, 0.0])
    np.testing.assert_array_equal(svd.reconstruct(), np.zeros((3, 2)))


@pytest.mark.parametrize("r", [0, 3])
def test_rank_out_of_range(r):
    with pytest.raises(InvalidRankError):
        truncated_svd(np.ones((2, 4)), r)


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_rejected(bad):
    A = np.ones((3, 3))
    A[1, 1] = bad
    with pytest.raises(InvalidInputError):
        truncated_svd(A, 1)
    with pytest.raises(InvalidInputError):
        spectral_norm(A)


def test_spectral_norm_examples():
    assert spectral_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0)
    assert spectral_norm([[0, 1], [0, 0]]) == pytest.approx(1.0)
    assert spectral_norm(np.zeros((2, 3))) == 0.0


def test_spectral_norm_sphere_grid(rng):
    A = rng.standard_normal((4, 3))
    # Fibonacci lattice on S^2
    N = 200_000
    k = np.arange(N) + 0.5
    phi = np.arccos(1 - 2 * k / N)
    theta = np.pi * (1 + 5 ** 0.5) * k
    u = np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    brute = np.linalg.norm(A @ u, axis=0).max()
    assert abs(brute - spectral_norm(A)) <= 1e-3


def test_rth_singular_value_examples():
    assert rth_singular_value(np.diag([3.0, 1.0]), 2) == pytest.approx(1.0)
    assert rth_singular_value([[1, 2], [2, 4]], 2) == 0.0
    assert rth_singular_value(np.eye(3), 3) == pytest.approx(1.0)
    with pytest.raises(InvalidRankError):
        rth_singular_value(np.eye(2), 3)


def test_least_squares_identity(rng):
    Z = rng.standard_normal((7, 3))
    np.testing.assert_allclose(least_squares_transform(Z, Z), np.eye(3), atol=1e-10)


def test_least_squares_exact_model(rng):
    Z, _ = np.linalg.qr(rng.standard_normal((8, 3)))
    R = rng.standard_normal((3, 3))
    np.testing.assert_allclose(least_squares_transform(Z, Z @ R), R, atol=1e-10)


def test_least_squares_normal_equations_by_hand(rng):
    Z = rng.standard_normal((6, 2))
    Y = rng.standard_normal((6, 2))
    (a, b), (c, d) = Z.T @ Z
    inv = np.array([[d, -b], [-c, a]]) / (a * d - b * c)
    np.testing.assert_allclose(least_squares_transform(Z, Y), inv @ Z.T @ Y, atol=1e-10)


def test_least_squares_rank_deficient_is_minimum_norm(rng):
    z = rng.standard_normal((5, 1))
    Z = np.hstack([z, 2 * z])
    Y = rng.standard_normal((5, 2))
    G = least_squares_transform(Z, Y)
    ref, *_ = np.linalg.lstsq(Z, Y, rcond=None)
    np.testing.assert_allclose(G, ref, atol=1e-10)


def test_least_squares_row_mismatch():
    with pytest.raises(InvalidInputError):
        least_squares_transform(np.ones((3, 2)), np.ones((4, 2)))


def test_invert_square_examples():
    np.testing.assert_array_equal(invert_square(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(invert_square(np.diag([2.0, 0.5])), np.diag([0.5, 2.0]))
    np.testing.assert_allclose(invert_square([[1, 1], [0, 1]]), [[1, -1], [0, 1]])


def test_invert_square_singular():
    with pytest.raises(SingularTransformError) as info:
        invert_square([[1, 2], [2, 4]])
    assert info.value.condition > 1e12


def test_invert_square_non_square():
    with pytest.raises(InvalidInputError):
        invert_square(np.ones((2, 3)))


def test_sign_convention_ties_to_lowest_row():
    U, V = fix_signs(np.array([[-0.5], [0.5]]), np.array([[1.0]]))
    assert U[0, 0] == 0.5 and V[0, 0] == -1.0


def test_tied_singular_values_ordered():
    # columns with equal singular values sort by descending U columns
    U = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = canonical_svd(U, np.array([1.0, 1.0]), np.eye(2))
    np.testing.assert_array_equal(out.U, np.eye(2))


@given(matrices(), st.data())
def test_reconstruction_residual_matches_tail(A, data):
    r = data.draw(st.integers(1, min(A.shape)))
    svd = truncated_svd(A, r)
    full = np.linalg.svd(A, compute_uv=False)
    tail = float((full[r:] ** 2).sum())
    resid = float(((A - svd.reconstruct()) ** 2).sum())
    assert resid == pytest.approx(tail, rel=1e-8, abs=1e-8 * max(1.0, (full ** 2).sum()))


@given(matrices(), st.data())
def test_svd_invariants(A, data):
    r = data.draw(st.integers(1, min(A.shape)))
    U, s, V = truncated_svd(A, r)
    np.testing.assert_allclose(U.T @ U, np.eye(r), atol=1e-10 * r)
    np.testing.assert_allclose(V.T @ V, np.eye(r), atol=1e-10 * r)
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
    for j in range(r):
        col = U[:, j]
        assert col[np.argmax(np.abs(col))] >= 0


@given(matrices())
def test_svd_deterministic(A):
    r = min(A.shape)
    a, b = truncated_svd(A, r), truncated_svd(A.copy(), r)
    for x, y in zip(a, b):
        assert x.tobytes() == y.tobytes()


@given(matrices(8), st.data())
def test_spectral_norm_submultiplicative(A, data):
    B = data.draw(arrays(np.float64, (A.shape[1], data.draw(st.integers(1, 8))), elements=finite))
    assert spectral_norm(A @ B) <= spectral_norm(A) * spectral_norm(B) * (1 + 1e-12) + 1e-12


@given(st.integers(0, 2**32 - 1))
def test_least_squares_dominates_random_candidates(seed):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((6, 2))
    Y = rng.standard_normal((6, 2))
    best = np.linalg.norm(Z @ least_squares_transform(Z, Y) - Y)
    cands = rng.standard_normal((1000, 2, 2)) * 2
    resid = np.linalg.norm(Z @ cands - Y, axis=(1, 2))
    assert np.all(best <= resid + 1e-12)


def test_inputs_not_mutated(rng):
    A = rng.standard_normal((5, 4))
    before = A.copy()
    truncated_svd(A, 2)
    least_squares_transform(A, A)
    np.testing.assert_array_equal(A, before)
