"""Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

Points are the *columns* of a ``(d, n)`` array, matching the orientation of
the spectral embedding ``diag(Lambda) @ V.T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import as_matrix


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 25
    max_iters: int = 300
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or not self.tol > 0:
            raise InvalidInputError("k-means needs restarts >= 1, max_iters >= 1 and tol > 0")


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray  # (K, d)
    objective: float
    n_iter: int
    history: list  # objective after every Lloyd iteration of the winning run
    restart: int


def _sq_dists(X, C):
    # X (n, d), C (K, d) -> (n, K); exact enough for assignment and clipped at 0
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(X, K, rng):
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(1)
    for j in range(1, K):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[j] = X[idx]
        closest = np.minimum(closest, ((X - centers[j]) ** 2).sum(1))
    return centers


def _objective(X, labels, centers):
    return float(((X - centers[labels]) ** 2).sum())


def _means(X, labels, K, old):
    centers = old.copy()
    counts = np.bincount(labels, minlength=K)
    sums = np.zeros_like(old)
    np.add.at(sums, labels, X)
    nz = counts > 0
    centers[nz] = sums[nz] / counts[nz, None]
    return centers


def _repair_empty(X, labels, centers, K):
    # Move the point farthest from its own center into each empty cluster.
    labels = labels.copy()
    while True:
        counts = np.bincount(labels, minlength=K)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return labels
        cost = ((X - centers[labels]) ** 2).sum(1)
        cost[counts[labels] <= 1] = -1.0
        i = int(np.argmax(cost))
        labels[i] = empty[0]
        centers = centers.copy()
        centers[empty[0]] = X[i]


def _lloyd(X, K, cfg, rng):
    # round-off allowance for the monotonicity check, relative to total scatter
    slack = 1e-12 * max(float(((X - X.mean(0)) ** 2).sum()), np.finfo(float).tiny)
    centers = _plusplus(X, K, rng)
    labels = np.argmin(_sq_dists(X, centers), axis=1)
    labels = _repair_empty(X, labels, centers, K)
    centers = _means(X, labels, K, centers)
    obj = _objective(X, labels, centers)
    history = [obj]
    n_iter = 0
    for n_iter in range(1, cfg.max_iters + 1):
        new = np.argmin(_sq_dists(X, centers), axis=1)
        # keep the current label on exact distance ties so the objective cannot creep up
        d_new = ((X - centers[new]) ** 2).sum(1)
        d_old = ((X - centers[labels]) ** 2).sum(1)
        new = np.where(d_old <= d_new, labels, new)
        new = _repair_empty(X, new, centers, K)
        centers_new = _means(X, new, K, centers)
        obj_new = _objective(X, new, centers_new)
        if obj_new > obj + slack:
            raise AssertionError(f"Lloyd objective increased: {obj} -> {obj_new}")
        history.append(obj_new)
        changed = not np.array_equal(new, labels)
        labels, centers = new, centers_new
        converged = (obj - obj_new) <= cfg.tol * obj
        obj = obj_new
        if not changed or converged:
            break
    return labels, centers, obj, n_iter, history


def kmeans(points, K: int, cfg: KMeansConfig | None = None) -> KMeansResult:
    """Cluster the columns of ``points``.

    Runs ``cfg.restarts`` independent Lloyd iterations from k-means++ seeds
    and keeps the run with the smallest within-cluster sum of squares
    (lowest restart index on ties).  Restart ``i`` draws from its own child
    stream of ``SeedSequence(cfg.seed)`` so results are reproducible.

    Parameters
    ----------
    points : (d, n) array_like
        One point per column.
    K : int
        Number of clusters, ``1 <= K <= n``.
    cfg : KMeansConfig, optional

    Returns
    -------
    KMeansResult
        ``labels`` in ``0..K-1``, ``centers`` of shape ``(K, d)``, the
        objective, and the per-iteration objective history of the best run.
    """
    cfg = cfg or KMeansConfig()
    X = as_matrix(points, "points").T
    n = X.shape[0]
    K = int(K)
    if not 1 <= K <= n:
        raise InvalidInputError(f"need 1 <= K <= n, got K={K}, n={n}")
    best = None
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    for i, child in enumerate(children):
        labels, centers, obj, n_iter, history = _lloyd(X, K, cfg, np.random.default_rng(child))
        if best is None or obj < best.objective:
            best = KMeansResult(labels, centers, obj, n_iter, history, i)
    return best
