"""Cluster Quilting: stitch patchwise SVDs into global factors and cluster.

For an ordering ``pi`` the first patch seeds ``V~[I, :] = V_1`` and
``H~[T, :] = U_1 diag(s_1)``.  Each later patch is aligned to the samples it
shares with earlier patches by the least-squares map
``G = argmin ||V_m[J2] G - V~[J1]||``; its remaining samples are written as
``V_m G`` and its features as ``U_m diag(s_m) G^{-T}``.  The product
``H~ V~^T`` is then re-factorised and k-means runs on the columns of
``diag(Lambda) V^T``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import EmptyOverlapError, InvalidInputError, InvalidRankError, SingularTransformError
from .kmeans import KMeansConfig, kmeans
from .linalg import canonical_svd, invert_square, least_squares_transform, truncated_svd
from .ordering import OrderingResult, choose_ordering
from .patches import PatchSet

log = logging.getLogger(__name__)

# above this many entries postprocess(method="auto") never forms H V^T
EXPLICIT_LIMIT = 10**6


@dataclass
class QuiltState:
    H_tilde: np.ndarray  # (p, r)
    V_tilde: np.ndarray  # (n, r)
    filled_samples: np.ndarray
    filled_features: np.ndarray
    transforms: list = field(default_factory=list)  # G for steps 1..M-1
    ordering: tuple = ()
    warnings: list = field(default_factory=list)

    def product(self) -> np.ndarray:
        return self.H_tilde @ self.V_tilde.T


@dataclass
class QuiltResult:
    U_hat: np.ndarray  # (p, r)
    Lambda_hat: np.ndarray  # (r,)
    V_hat: np.ndarray  # (n, r)
    labels: np.ndarray  # (n,)
    centroids: np.ndarray  # (K, p), row j is U_hat @ c_j
    embedding: np.ndarray  # (r, n) = diag(Lambda_hat) @ V_hat.T
    ordering_used: OrderingResult
    state: QuiltState
    kmeans_objective: float
    centers: np.ndarray  # (K, r) k-means centers in embedding space

    @property
    def warnings(self):
        return self.state.warnings

    def to_dict(self) -> dict:
        return {
            "labels": self.labels.tolist(),
            "ordering": self.ordering_used.to_dict(),
            "singular_values": self.Lambda_hat.tolist(),
            "transforms": [G.tolist() for G in self.state.transforms],
            "kmeans_objective": self.kmeans_objective,
            "warnings": list(self.state.warnings),
        }


def _pi(ordering, M):
    if ordering is None:
        return tuple(range(M))
    if isinstance(ordering, OrderingResult):
        return ordering.pi
    return tuple(int(k) for k in ordering)


def check_rank(ps: PatchSet, r: int) -> None:
    limit = min(min(pt.shape) for pt in ps)
    if not 1 <= r <= limit:
        raise InvalidRankError(f"rank {r} must lie in [1, {limit}] (smallest patch dimension)")


def quilt_factors(ps: PatchSet, ordering: Union[OrderingResult, Sequence[int], None], r: int) -> QuiltState:
    """Sequentially merge the top-``r`` patch SVDs along ``ordering``.

    Raises
    ------
    EmptyOverlapError
        A step shares no samples with earlier patches.
    SingularTransformError
        A merge transform cannot be inverted; ``.step``/``.patch`` say where.
    """
    r = int(r)
    check_rank(ps, r)
    pi = _pi(ordering, ps.M)
    if sorted(pi) != list(range(ps.M)):
        raise InvalidInputError(f"{list(pi)} is not a permutation of the patches")
    H = np.zeros((ps.p, r))
    V = np.zeros((ps.n, r))
    filled = np.zeros(ps.n, dtype=bool)
    filled_f = np.zeros(ps.p, dtype=bool)
    transforms, warnings = [], []

    first = ps[pi[0]]
    svd = truncated_svd(first.data, r)
    V[first.samples] = svd.V
    H[first.features] = svd.U * svd.sigma
    filled[first.samples] = True
    filled_f[first.features] = True

    for step in range(1, ps.M):
        k = pi[step]
        pt = ps[k]
        svd = truncated_svd(pt.data, r)
        overlap = filled[pt.samples]
        if not overlap.any():
            raise EmptyOverlapError(f"patch {k} (step {step}) shares no samples with earlier patches",
                                    step=step, patch=k)
        if overlap.sum() < r:
            msg = f"step {step} (patch {k}): overlap of {int(overlap.sum())} samples is below rank {r}"
            log.warning(msg)
            warnings.append(msg)
        G = least_squares_transform(svd.V[overlap], V[pt.samples[overlap]])
        try:
            G_inv_T = invert_square(G).T
        except SingularTransformError as exc:
            raise SingularTransformError(f"merge transform for patch {k} (step {step}) is singular: {exc}",
                                         step=step, patch=k, condition=exc.condition) from exc
        fresh = ~overlap
        V[pt.samples[fresh]] = svd.V[fresh] @ G
        H[pt.features] = (svd.U * svd.sigma) @ G_inv_T
        filled[pt.samples] = True
        filled_f[pt.features] = True
        transforms.append(G)

    return QuiltState(H, V, np.flatnonzero(filled), np.flatnonzero(filled_f), transforms, pi, warnings)


def postprocess(qs: Union[QuiltState, tuple], r: int, method: str = "factored"):
    """Rank-``r`` SVD of ``H~ V~^T``.

    ``method="factored"`` works from thin QR factors of ``H~`` and ``V~`` and
    an ``r x r`` core, never forming the ``p x n`` product.  ``"explicit"``
    forms the product; ``"auto"`` picks explicit only for products with at
    most ``EXPLICIT_LIMIT`` entries.

    Returns
    -------
    (U_hat, Lambda_hat, V_hat)
    """
    H, V = (qs.H_tilde, qs.V_tilde) if isinstance(qs, QuiltState) else qs
    H = np.asarray(H, dtype=float)
    V = np.asarray(V, dtype=float)
    if method == "auto":
        method = "explicit" if H.shape[0] * V.shape[0] <= EXPLICIT_LIMIT else "factored"
    if method == "explicit":
        svd = truncated_svd(H @ V.T, r)
        return svd.U, svd.sigma, svd.V
    if method != "factored":
        raise InvalidInputError(f"unknown postprocess method {method!r}")
    Qh, Rh = np.linalg.qr(H)
    Qv, Rv = np.linalg.qr(V)
    core = np.linalg.svd(Rh @ Rv.T)
    U, s, V_hat = canonical_svd(Qh @ core[0], core[1], Qv @ core[2].T)
    return U[:, :r], s[:r], V_hat[:, :r]


def cluster_quilting(ps: PatchSet, r: int, K: int, ordering: Union[str, OrderingResult, Sequence[int]] = "exhaustive",
                     score: str = "size", kmeans_cfg: Optional[KMeansConfig] = None,
                     given: Optional[Sequence[int]] = None) -> QuiltResult:
    """Full pipeline: order patches, quilt, re-factorise, k-means.

    Parameters
    ----------
    ps : PatchSet
    r : int
        Rank of the spectral embedding.
    K : int
        Number of clusters.
    ordering : {"exhaustive", "greedy", "given"} or OrderingResult or sequence
        How to order the patches.  A sequence is treated as ``"given"``.
    score : {"size", "snr"}
        Score function used by the ordering search.
    kmeans_cfg : KMeansConfig, optional
    given : sequence of int, optional
        Permutation for ``ordering="given"``.
    """
    r, K = int(r), int(K)
    if not 1 <= K <= ps.n:
        raise InvalidInputError(f"need 1 <= K <= n={ps.n}, got K={K}")
    check_rank(ps, r)
    if isinstance(ordering, OrderingResult):
        order = ordering
    elif isinstance(ordering, str):
        order = choose_ordering(ps, ordering, score, rank=r, given=given)
    else:
        order = choose_ordering(ps, "given", score, rank=r, given=ordering)
    state = quilt_factors(ps, order, r)
    U, lam, V = postprocess(state, r)
    embedding = lam[:, None] * V.T
    km = kmeans(embedding, K, kmeans_cfg)
    centroids = km.centers @ U.T
    return QuiltResult(U, lam, V, km.labels, centroids, embedding, order, state, km.objective, km.centers)


def impute_matrix(qr: QuiltResult) -> np.ndarray:
    """Low-rank completion ``U_hat diag(Lambda_hat) V_hat^T`` (p x n)."""
    return (qr.U_hat * qr.Lambda_hat) @ qr.V_hat.T
