"""Synthetic low-rank Gaussian mixtures and patchwork masks.

Data are generated as ``X = Theta^T F^T + E`` (features x samples) where the
``K x p`` centroid matrix ``Theta = W Z^T`` has rank ``r``, ``W`` has entries
drawn from ``{-d, 0, d}`` and ``Z`` has orthonormal columns.  Two masks cut
the full matrix into patches: *sequential* (consecutive, overlapping sample
blocks with contiguous feature slices) and *mosaic* (random sample blocks,
each observing a random subset of whole views).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import GenerationError, InvalidConfigError, InvalidInputError
from .patches import Patch, PatchSet, build_graph, check_connected

MAX_CENTROID_DRAWS = 1000
MAX_LABEL_DRAWS = 1000
MAX_MOSAIC_DRAWS = 10_000


@dataclass(frozen=True)
class SimConfig:
    """Flat, JSON-friendly description of one simulated data set.

    ``pattern="sequential"`` uses ``overlap`` and/or ``block_rows``;
    ``pattern="mosaic"`` uses ``views`` and ``views_per_block``.
    ``noise="ar1"`` correlates noise along the feature index with
    coefficient ``rho``; ``copula_dof`` applies a t-copula to every feature.
    """

    n: int
    p: int
    K: int
    r: int
    d: float
    M: int = 3
    pattern: str = "sequential"
    overlap: Optional[int] = None
    block_rows: Optional[int] = None
    views: Optional[int] = None
    views_per_block: Optional[int] = None
    per_view_centroids: bool = False
    noise: str = "gaussian"
    sigma: float = 1.0
    rho: float = 0.0
    copula_dof: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        def bad(name, msg):
            raise InvalidConfigError(f"{name}: {msg}", field=name)

        for name in ("n", "p", "K", "r", "M", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                bad(name, f"must be an integer, got {v!r}")
        if self.n < 1 or self.p < 1:
            bad("n" if self.n < 1 else "p", "must be positive")
        if self.K < 1:
            bad("K", "must be positive")
        if not 1 <= self.r < self.K:
            bad("r", f"need 1 <= r < K, got r={self.r}, K={self.K}")
        if self.K > self.n:
            bad("K", "cannot exceed n")
        if not self.d > 0:
            bad("d", "must be positive")
        if self.M < 1:
            bad("M", "must be positive")
        if self.pattern not in ("sequential", "mosaic"):
            bad("pattern", "must be 'sequential' or 'mosaic'")
        if self.noise not in ("gaussian", "ar1"):
            bad("noise", "must be 'gaussian' or 'ar1'")
        if not self.sigma >= 0:
            bad("sigma", "must be non-negative")
        if not abs(self.rho) < 1:
            bad("rho", "need |rho| < 1")
        if self.copula_dof is not None and not self.copula_dof > 2:
            bad("copula_dof", "must exceed 2")
        if self.pattern == "sequential":
            if self.M > self.p:
                bad("M", "more feature blocks than features")
            sequential_sizes(self.n, self.M, self.block_rows, self.overlap)
        else:
            if self.views is None or self.views_per_block is None:
                bad("views", "mosaic pattern needs views and views_per_block")
            if not 1 <= self.views <= self.p:
                bad("views", "need 1 <= views <= p")
            if not 1 <= self.views_per_block <= self.views:
                bad("views_per_block", "need 1 <= views_per_block <= views")
            if self.M * self.views_per_block < self.views:
                bad("views_per_block", "M * views_per_block must cover every view")
            if self.M > self.n:
                bad("M", "more sample blocks than samples")
        if self.per_view_centroids and self.pattern != "mosaic":
            bad("per_view_centroids", "only meaningful for the mosaic pattern")

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        if not isinstance(data, dict):
            raise InvalidConfigError("configuration must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidConfigError(f"unknown configuration keys: {unknown}", field=unknown[0])
        missing = [k for k in ("n", "p", "K", "r", "d") if k not in data]
        if missing:
            raise InvalidConfigError(f"missing required keys: {missing}", field=missing[0])
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class MixtureGroundTruth:
    Theta: np.ndarray  # (K, p), row j is centroid j
    z: np.ndarray  # (n,)
    r: int
    d: float
    noise: np.ndarray  # (p, n), X - X_star
    cluster_sizes: np.ndarray = field(init=False)
    Delta: float = field(init=False)

    def __post_init__(self):
        K = self.Theta.shape[0]
        self.cluster_sizes = np.bincount(self.z, minlength=K)
        self.Delta = min_separation(self.Theta)

    @property
    def K(self) -> int:
        return self.Theta.shape[0]

    @property
    def F(self) -> np.ndarray:
        return np.eye(self.K)[self.z]

    @property
    def X_star(self) -> np.ndarray:
        return self.Theta[self.z].T.copy()

    def Delta_m(self, ps: PatchSet) -> np.ndarray:
        """Minimum centroid separation restricted to each patch's features."""
        return np.array([min_separation(self.Theta[:, pt.features]) for pt in ps])

    def noise_norms(self, ps: PatchSet) -> np.ndarray:
        """Exact ``||E[T_m, I_m]||`` for every patch."""
        return np.array([np.linalg.norm(self.noise[np.ix_(pt.features, pt.samples)], 2) for pt in ps])

    def to_dict(self) -> dict:
        return {"Theta": self.Theta.tolist(), "labels": self.z.tolist(), "r": self.r, "d": self.d,
                "Delta": self.Delta, "cluster_sizes": self.cluster_sizes.tolist()}


def min_separation(Theta) -> float:
    """``min_{j != j'} ||Theta[j] - Theta[j']||_2`` over rows."""
    Theta = np.asarray(Theta, dtype=float)
    if Theta.shape[0] < 2:
        return float("inf")
    diff = Theta[:, None, :] - Theta[None, :, :]
    D = np.sqrt((diff ** 2).sum(-1))
    return float(D[np.triu_indices(Theta.shape[0], 1)].min())


def random_orthonormal(p: int, r: int, rng) -> np.ndarray:
    """Haar-distributed ``p x r`` matrix with orthonormal columns."""
    Q, R = np.linalg.qr(rng.standard_normal((p, r)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def generate_centroids(K: int, p: int, r: int, d: float, rng, distinct: bool = False) -> np.ndarray:
    """Rank-``r`` centroid matrix ``W Z^T`` of shape ``(K, p)``.

    ``W`` (``K x r``) is redrawn until it has rank ``r``; with ``distinct``
    it is also redrawn until its rows (hence all centroids) are pairwise
    different.
    """
    if not 1 <= r < K:
        raise InvalidInputError(f"need 1 <= r < K, got r={r}, K={K}")
    if r > p:
        raise InvalidInputError(f"rank {r} exceeds feature count {p}")
    if distinct and K > 3 ** r:
        raise InvalidInputError(f"cannot draw {K} distinct rows from {{-d,0,d}}^{r}")
    Z = random_orthonormal(p, r, rng)
    levels = np.array([-d, 0.0, d])
    for _ in range(MAX_CENTROID_DRAWS):
        W = levels[rng.integers(3, size=(K, r))]
        if np.linalg.matrix_rank(W) < r:
            continue
        if distinct and np.unique(W, axis=0).shape[0] < K:
            continue
        return W @ Z.T
    raise GenerationError(f"no valid W after {MAX_CENTROID_DRAWS} draws")


def apply_ar1_noise(E_base, rho: float, stationary: bool = True) -> np.ndarray:
    """Run ``E[k] = rho * E[k-1] + eps[k]`` down the rows of ``E_base``.

    Rows of ``E_base`` are the innovations.  With ``stationary`` the first row
    is scaled by ``1 / sqrt(1 - rho^2)`` so every row has the stationary
    variance ``var(eps) / (1 - rho^2)``.
    """
    if not abs(rho) < 1:
        raise InvalidInputError(f"AR(1) coefficient must satisfy |rho| < 1, got {rho}")
    E_base = np.asarray(E_base, dtype=float)
    if rho == 0:
        return E_base.copy()
    out = np.empty_like(E_base)
    out[0] = E_base[0] / np.sqrt(1 - rho ** 2) if stationary else E_base[0]
    for k in range(1, E_base.shape[0]):
        out[k] = rho * out[k - 1] + E_base[k]
    return out


def copula_t_transform(X, dof: float) -> np.ndarray:
    """Map each row's standardised values through ``Phi`` then ``t_dof^{-1}``.

    The transform is strictly increasing within each row.  Constant rows map
    to zero.
    """
    if not dof > 2:
        raise InvalidInputError("t-copula needs dof > 2")
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=1, keepdims=True)
    sd = X.std(axis=1, keepdims=True)
    Zs = np.divide(X - mu, sd, out=np.zeros_like(X), where=sd > 0)
    # evaluate each tail from its own side to keep precision far from the median
    lower = stats.t.ppf(stats.norm.cdf(Zs), dof)
    upper = stats.t.isf(stats.norm.sf(Zs), dof)
    out = np.where(Zs < 0, lower, upper)
    out[Zs == 0] = 0.0  # isf(0.5) is off by round-off
    return out


def _draw_labels(n, K, rng):
    for _ in range(MAX_LABEL_DRAWS):
        z = rng.integers(K, size=n)
        if np.bincount(z, minlength=K).min() > 0:
            return z
    raise GenerationError(f"could not populate all {K} clusters with n={n}")


def view_slices(p: int, views: int):
    return np.array_split(np.arange(p), views)


def generate_mixture(cfg: SimConfig, rng=None):
    """Draw labels, centroids and noise for ``cfg``.

    Returns
    -------
    X : (p, n) ndarray
    gt : MixtureGroundTruth
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    z = _draw_labels(cfg.n, cfg.K, rng)
    if cfg.per_view_centroids:
        blocks = [generate_centroids(cfg.K, v.size, cfg.r, cfg.d, rng, distinct=True)
                  for v in view_slices(cfg.p, cfg.views)]
        Theta = np.concatenate(blocks, axis=1)
    else:
        Theta = generate_centroids(cfg.K, cfg.p, cfg.r, cfg.d, rng, distinct=True)
    X_star = Theta[z].T
    E = cfg.sigma * rng.standard_normal((cfg.p, cfg.n))
    if cfg.noise == "ar1":
        E = apply_ar1_noise(E, cfg.rho)
    X = X_star + E
    if cfg.copula_dof is not None:
        X = copula_t_transform(X, cfg.copula_dof)
    rank = int(np.linalg.matrix_rank(Theta))
    return X, MixtureGroundTruth(Theta, z, rank, cfg.d, X - X_star)


def sequential_sizes(n: int, M: int, block_rows: Optional[int] = None, overlap: Optional[int] = None):
    """Block sizes and the shared overlap for a sequential layout.

    Sizes differ by at most one when ``n + (M - 1) * overlap`` is not a
    multiple of ``M``.
    """
    if M == 1:
        return [n], 0
    if overlap is None and block_rows is None:
        raise InvalidConfigError("sequential pattern needs overlap or block_rows", field="overlap")
    if overlap is None:
        extra = M * block_rows - n
        if extra < 0 or extra % (M - 1):
            raise InvalidConfigError(f"block_rows={block_rows} cannot tile n={n} with M={M} equal overlaps",
                                     field="block_rows")
        overlap = extra // (M - 1)
    if overlap < 1:
        raise InvalidConfigError("consecutive blocks must share at least one sample", field="overlap")
    total = n + (M - 1) * overlap
    sizes = [len(a) for a in np.array_split(np.arange(total), M)]
    if block_rows is not None and any(s != block_rows for s in sizes):
        raise InvalidConfigError(f"block_rows={block_rows} and overlap={overlap} do not tile n={n}",
                                 field="block_rows")
    if min(sizes) <= overlap:
        raise InvalidConfigError(f"blocks of {min(sizes)} rows cannot hold an overlap of {overlap}",
                                 field="overlap")
    return sizes, overlap


def mask_sequential(X, M: int, rng=None, block_rows: Optional[int] = None, overlap: Optional[int] = None,
                    labels=None) -> PatchSet:
    """Chain of ``M`` patches over consecutive, overlapping sample blocks.

    Feature block ``m`` is the ``m``-th contiguous slice of ``range(p)``.  If
    ``labels`` are given, the sample order is reshuffled (at most 1000 times)
    until every block contains every cluster.
    """
    X = np.asarray(X, dtype=float)
    p, n = X.shape
    if M > p:
        raise InvalidConfigError(f"M={M} exceeds p={p}", field="M")
    sizes, overlap = sequential_sizes(n, M, block_rows, overlap)
    starts = np.concatenate([[0], np.cumsum(np.array(sizes[:-1], dtype=int) - overlap)]).astype(int)
    order = np.arange(n)

    def represented(order):
        if labels is None:
            return True
        want = np.unique(labels).size
        return all(np.unique(np.asarray(labels)[order[s:s + sz]]).size == want for s, sz in zip(starts, sizes))

    if not represented(order):
        rng = np.random.default_rng() if rng is None else rng
        for _ in range(MAX_LABEL_DRAWS):
            order = rng.permutation(n)
            if represented(order):
                break
        else:
            raise GenerationError("could not place every cluster in every sequential block")
    feats = np.array_split(np.arange(p), M)
    blocks = [(f, np.sort(order[s:s + sz])) for f, s, sz in zip(feats, starts, sizes)]
    return PatchSet.from_full(X, blocks)


@dataclass(frozen=True)
class MosaicLayout:
    row_blocks: tuple  # M sorted sample-index arrays
    selections: tuple  # M sorted tuples of view ids
    views: tuple  # feature-index arrays, one per view

    def patch_blocks(self):
        """Disjoint ``(features, samples)`` blocks, one per distinct observer set.

        Views observed by exactly the same row blocks are merged so feature
        sets stay disjoint.
        """
        groups = {}
        for v in range(len(self.views)):
            who = tuple(b for b, sel in enumerate(self.selections) if v in sel)
            groups.setdefault(who, []).append(v)
        out = []
        for who, vs in groups.items():
            feats = np.concatenate([self.views[v] for v in vs])
            samples = np.sort(np.concatenate([self.row_blocks[b] for b in who]))
            out.append((feats, samples))
        return out


def _mosaic_ok(selections, n_views):
    if len(set(selections)) < len(selections):
        return False
    if set().union(*map(set, selections)) != set(range(n_views)):
        return False
    M = len(selections)
    seen, stack = {0}, [0]
    while stack:
        b = stack.pop()
        for c in range(M):
            if c not in seen and set(selections[b]) & set(selections[c]):
                seen.add(c)
                stack.append(c)
    return len(seen) == M


def mosaic_layout(n: int, p: int, M: int, views: int, views_per_block: int, rng,
                  max_draws: int = MAX_MOSAIC_DRAWS) -> MosaicLayout:
    """Random row blocks plus an accepted draw of observed views per block.

    Accepted draws have pairwise-distinct view sets, cover every view, and
    give a connected block graph (blocks adjacent when they share a view).
    """
    if M * views_per_block < views:
        raise InvalidConfigError("M * views_per_block must be at least views", field="views_per_block")
    if not 1 <= views_per_block <= views:
        raise InvalidConfigError("need 1 <= views_per_block <= views", field="views_per_block")
    rows = tuple(np.sort(b) for b in np.array_split(rng.permutation(n), M))
    for _ in range(max_draws):
        sel = tuple(tuple(sorted(rng.choice(views, views_per_block, replace=False).tolist())) for _ in range(M))
        if _mosaic_ok(sel, views):
            return MosaicLayout(rows, sel, tuple(view_slices(p, views)))
    raise InvalidConfigError(f"no valid mosaic layout in {max_draws} draws "
                             f"(M={M}, views={views}, views_per_block={views_per_block})",
                             field="views_per_block")


def mask_mosaic(X, M: int, views: int, views_per_block: int, rng=None) -> PatchSet:
    """Mosaic patches of ``X`` (see :func:`mosaic_layout`)."""
    X = np.asarray(X, dtype=float)
    p, n = X.shape
    rng = np.random.default_rng() if rng is None else rng
    layout = mosaic_layout(n, p, M, views, views_per_block, rng)
    ps = PatchSet.from_full(X, layout.patch_blocks())
    assert check_connected(build_graph(ps))
    return ps


@dataclass
class Simulation:
    config: SimConfig
    patches: PatchSet
    truth: MixtureGroundTruth
    X: np.ndarray


def simulate(cfg: SimConfig) -> Simulation:
    """Generate data and mask it, all from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    X, gt = generate_mixture(cfg, rng)
    if cfg.pattern == "sequential":
        ps = mask_sequential(X, cfg.M, rng, block_rows=cfg.block_rows, overlap=cfg.overlap, labels=gt.z)
    else:
        ps = mask_mosaic(X, cfg.M, cfg.views, cfg.views_per_block, rng)
    return Simulation(cfg, ps, gt, X)
