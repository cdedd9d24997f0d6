"""Partition comparison: adjusted Rand index and misclustering rate."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError


def _pair(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise InvalidInputError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise InvalidInputError("label vectors are empty")
    return a, b


def contingency(a, b) -> np.ndarray:
    """Counts ``C[i, j]`` of samples with the i-th label of ``a`` and j-th of ``b``."""
    a, b = _pair(a, b)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    C = np.zeros((ua.size, ub.size), dtype=np.int64)
    np.add.at(C, (ia, ib), 1)
    return C


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index.

    Two single-cluster partitions (where the index is 0/0) score 1.
    """
    C = contingency(a, b)
    n = int(C.sum())
    sum_ij = int(_comb2(C).sum())
    sum_a = int(_comb2(C.sum(1)).sum())
    sum_b = int(_comb2(C.sum(0)).sum())
    total = n * (n - 1) // 2
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def _square_confusion(zhat, z, n_clusters):
    zhat, z = _pair(zhat, z)
    if n_clusters is None:
        labels = np.union1d(zhat, z)
    else:
        labels = np.arange(int(n_clusters))
        if not (np.isin(zhat, labels).all() and np.isin(z, labels).all()):
            raise InvalidInputError(f"labels must lie in 0..{int(n_clusters) - 1}")
    ih = np.searchsorted(labels, zhat)
    iz = np.searchsorted(labels, z)
    C = np.zeros((labels.size, labels.size), dtype=np.int64)
    np.add.at(C, (ih, iz), 1)
    return C, labels


def align_labels(zhat, z, n_clusters=None) -> dict:
    """Bijection ``phi`` maximising agreement of ``phi(zhat)`` with ``z``.

    The label alphabet is ``0..n_clusters-1`` when ``n_clusters`` is given and
    the union of both vectors otherwise; ``phi`` maps label values of ``zhat``
    to label values of ``z``.  Among optimal
    bijections the lexicographically smallest (in pooled label order) wins.
    """
    C, labels = _square_confusion(zhat, z, n_clusters)
    K = C.shape[0]
    rows, cols = linear_sum_assignment(C, maximize=True)
    target = int(C[rows, cols].sum())
    # Fix phi(0), phi(1), ... to the smallest value that keeps the optimum reachable.
    fixed = {}
    for a in range(K):
        free_rows = [i for i in range(K) if i not in fixed and i != a]
        used = set(fixed.values())
        for b in range(K):
            if b in used:
                continue
            free_cols = [j for j in range(K) if j not in used and j != b]
            rest = 0
            if free_rows:
                sub = C[np.ix_(free_rows, free_cols)]
                rr, cc = linear_sum_assignment(sub, maximize=True)
                rest = int(sub[rr, cc].sum())
            if sum(C[i, j] for i, j in fixed.items()) + C[a, b] + rest == target:
                fixed[a] = b
                break
    return {labels[i].item(): labels[j].item() for i, j in fixed.items()}


def misclustering_rate(zhat, z, n_clusters=None) -> float:
    """Fraction misclassified under the best bijective relabelling of ``zhat``."""
    C, _ = _square_confusion(zhat, z, n_clusters)
    rows, cols = linear_sum_assignment(C, maximize=True)
    n = int(C.sum())
    return (n - int(C[rows, cols].sum())) / n
