"""Dense linear-algebra kernels.

All functions take array-likes, never mutate their inputs, and return fresh
``float64`` arrays.  SVD outputs follow one fixed sign/ordering convention so
that every downstream computation is replayable bit for bit.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, InvalidRankError, SingularTransformError

# singular values of (Z^T Z) below this fraction of the largest are zeroed
PINV_RCOND = 1e-12
# invert_square refuses anything worse conditioned than this
MAX_CONDITION = 1e12
# singular values closer than this (relative to sigma_1) are treated as tied
_TIE_RTOL = 1e-12


class SvdTriple(NamedTuple):
    """Thin SVD ``A ~= U @ diag(sigma) @ V.T``."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def as_matrix(A, name="matrix") -> np.ndarray:
    """Return ``A`` as a finite 2-D float64 array or raise InvalidInputError."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return A


def fix_signs(U, V=None):
    """Flip column signs so each column of ``U`` has a non-negative pivot.

    The pivot is the entry of largest magnitude, lowest row index on ties.
    The same flips are applied to ``V`` so that ``U diag(s) V^T`` is unchanged.
    """
    U = np.array(U, dtype=float, copy=True)
    if U.size == 0:
        return (U, None if V is None else np.array(V, dtype=float, copy=True))
    pivots = np.argmax(np.abs(U), axis=0)  # argmax returns the first maximum
    signs = np.where(U[pivots, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    U *= signs
    if V is None:
        return U, None
    V = np.array(V, dtype=float, copy=True) * signs
    return U, V


def _order_ties(U, s, V):
    # Columns sharing a singular value are sorted by descending lexicographic
    # order of their (sign-fixed) U columns.  The singular values themselves
    # stay put so they remain non-increasing.
    if s.size < 2:
        return U, s, V
    scale = s[0] if s[0] > 0 else 1.0
    order = np.arange(s.size)
    start = 0
    while start < s.size:
        stop = start + 1
        while stop < s.size and s[start] - s[stop] <= _TIE_RTOL * scale:
            stop += 1
        if stop - start > 1:
            block = list(range(start, stop))
            block.sort(key=lambda j: tuple(U[:, j]), reverse=True)
            order[start:stop] = block
        start = stop
    return U[:, order], s, V[:, order]


def canonical_svd(U, s, V) -> SvdTriple:
    """Apply the package sign and tie-ordering convention to a thin SVD."""
    U, V = fix_signs(U, V)
    U, s, V = _order_ties(U, np.asarray(s, dtype=float), V)
    return SvdTriple(U, s, V)


def truncated_svd(A, r: int) -> SvdTriple:
    """Top-``r`` singular triple of ``A`` under the package sign convention.

    Parameters
    ----------
    A : (m, n) array_like
        Finite real matrix.
    r : int
        Number of singular triples to keep, ``1 <= r <= min(m, n)``.

    Returns
    -------
    SvdTriple
        ``U`` (m, r) and ``V`` (n, r) with orthonormal columns and ``sigma``
        non-increasing.  ``U @ diag(sigma) @ V.T`` is the best rank-``r``
        Frobenius approximation of ``A``.

    Raises
    ------
    InvalidRankError
        If ``r`` is out of range.
    InvalidInputError
        If ``A`` is not a finite 2-D array.
    """
    A = as_matrix(A)
    r = int(r)
    if not 1 <= r <= min(A.shape):
        raise InvalidRankError(f"rank {r} outside [1, {min(A.shape)}] for shape {A.shape}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    U, s, V = canonical_svd(U, s, Vt.T)
    return SvdTriple(U[:, :r].copy(), s[:r].copy(), V[:, :r].copy())


def singular_values(A) -> np.ndarray:
    A = as_matrix(A)
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A, compute_uv=False)


def spectral_norm(A) -> float:
    """Largest singular value of ``A`` (0 for an empty or zero matrix)."""
    s = singular_values(A)
    return float(s[0]) if s.size else 0.0


def rth_singular_value(A, r: int) -> float:
    """The ``r``-th largest singular value, with numerical zeros snapped to 0.

    Values below ``max(shape) * eps * sigma_1`` (the usual numerical-rank
    threshold) are reported as exactly zero, so a rank-deficient matrix gives
    ``0.0`` rather than round-off noise.
    """
    A = as_matrix(A)
    r = int(r)
    if not 1 <= r <= min(A.shape):
        raise InvalidRankError(f"rank {r} outside [1, {min(A.shape)}] for shape {A.shape}")
    s = singular_values(A)
    cutoff = max(A.shape) * np.finfo(float).eps * s[0]
    value = s[r - 1]
    return 0.0 if value <= cutoff else float(value)


def pinv_symmetric(S, rcond: float = PINV_RCOND) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix with a relative cutoff."""
    S = as_matrix(S)
    U, s, Vt = np.linalg.svd(S)
    if s.size == 0 or s[0] == 0:
        return np.zeros_like(S.T)
    keep = s > rcond * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def least_squares_transform(Z, Y) -> np.ndarray:
    """Minimum-norm ``G`` minimising ``||Z G - Y||_F``.

    Computed literally as ``(Z^T Z)^+ Z^T Y``, with singular values of
    ``Z^T Z`` below ``1e-12`` times the largest treated as zero.
    """
    Z = as_matrix(Z, "Z")
    Y = as_matrix(Y, "Y")
    if Z.shape[0] != Y.shape[0]:
        raise InvalidInputError(f"row mismatch: Z has {Z.shape[0]}, Y has {Y.shape[0]}")
    return pinv_symmetric(Z.T @ Z) @ (Z.T @ Y)


def invert_square(G) -> np.ndarray:
    """Inverse of a well-conditioned square matrix.

    Raises SingularTransformError when the 2-norm condition number exceeds
    ``1e12``; callers attach the offending patch index.
    """
    G = as_matrix(G, "G")
    if G.shape[0] != G.shape[1]:
        raise InvalidInputError(f"matrix must be square, got shape {G.shape}")
    s = singular_values(G)
    cond = np.inf if s[-1] == 0 else s[0] / s[-1]
    if not cond <= MAX_CONDITION:
        raise SingularTransformError(f"transform condition number {cond:.3g} exceeds {MAX_CONDITION:g}",
                                     condition=float(cond))
    return np.linalg.inv(G)
