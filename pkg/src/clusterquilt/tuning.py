"""Choose ``(r, K)`` by prediction validation.

Samples are split into train and test halves, stratified by the set of
patches each sample belongs to so both halves keep the overlap structure.
Each half is clustered on its own.  A classifier trained on the train
embedding then predicts labels for the test samples, which are projected
into the train embedding by least squares on the features they observe.
The score of a cell is the ARI between those predictions and the test
clustering, averaged over repeats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidConfigError, QuiltError, SplitInfeasibleError
from .kmeans import KMeansConfig
from .metrics import adjusted_rand_index
from .patches import PatchSet, build_graph, check_connected
from .quilt import cluster_quilting

MAX_SPLIT_RETRIES = 100
_TIE_ATOL = 1e-9
# a rank is unsupported by a patch when sigma_r <= RANK_RTOL * sigma_1
RANK_RTOL = 1e-10


class NearestCentroid:
    """Assign each point to the closest class mean (rows are points)."""

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.means_ = np.stack([X[y == c].mean(axis=0) for c in self.classes_])
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        d = ((X[:, None, :] - self.means_[None, :, :]) ** 2).sum(-1)
        return self.classes_[np.argmin(d, axis=1)]


@dataclass
class TuneGrid:
    ranks: Sequence[int]
    cluster_counts: Sequence[int]
    split_fraction: float = 0.5
    repeats: int = 5
    classifier: Callable[[], object] = NearestCentroid

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        self.cluster_counts = tuple(int(k) for k in self.cluster_counts)
        if not self.ranks or not self.cluster_counts:
            raise InvalidConfigError("grid must be nonempty", field="ranks" if not self.ranks else "cluster_counts")
        if min(self.ranks) < 1:
            raise InvalidConfigError("ranks must be positive", field="ranks")
        if min(self.cluster_counts) < 1:
            raise InvalidConfigError("cluster counts must be positive", field="cluster_counts")
        if not 0 < self.split_fraction < 1:
            raise InvalidConfigError("split_fraction must lie in (0, 1)", field="split_fraction")
        if self.repeats < 1:
            raise InvalidConfigError("repeats must be positive", field="repeats")


@dataclass
class TuneResult:
    rank: int
    K: int
    agreement: float
    table: dict  # (r, K) -> mean agreement (nan if every repeat failed)
    per_repeat: dict = field(default_factory=dict)  # (r, K) -> list
    retries: int = 0

    def to_dict(self):
        return {
            "rank": self.rank, "K": self.K, "agreement": self.agreement, "retries": self.retries,
            "table": [{"rank": r, "K": k, "agreement": None if math.isnan(v) else v,
                       "repeats": [None if math.isnan(x) else x for x in self.per_repeat[(r, k)]]}
                      for (r, k), v in self.table.items()],
        }


def _membership_groups(ps: PatchSet):
    key = np.zeros(ps.n, dtype=np.int64)
    for m, pt in enumerate(ps):
        key[pt.samples] |= 1 << m
    return [np.flatnonzero(key == k) for k in np.unique(key)]


def _split_ok(sub: PatchSet, need: int) -> bool:
    return check_connected(build_graph(sub)) and min(min(pt.shape) for pt in sub) >= need


def split_samples(ps: PatchSet, fraction: float, rng, need_rank: int = 1):
    """Stratified train/test split of the samples.

    Every group of samples sharing the same patch membership is split by
    ``fraction``.  Draws are retried until both halves are valid connected
    PatchSets whose patches all have at least ``need_rank`` rows and columns.

    Returns
    -------
    (train_ids, test_ids, train_ps, test_ps, retries)
    """
    groups = _membership_groups(ps)
    for attempt in range(MAX_SPLIT_RETRIES):
        train, test = [], []
        for g in groups:
            g = rng.permutation(g)
            cut = int(round(fraction * g.size))
            if g.size >= 2:
                cut = min(max(cut, 1), g.size - 1)
            train.append(g[:cut])
            test.append(g[cut:])
        tr = np.sort(np.concatenate(train))
        te = np.sort(np.concatenate(test))
        if tr.size == 0 or te.size == 0:
            continue
        try:
            a, b = ps.restrict_samples(tr), ps.restrict_samples(te)
        except QuiltError:
            continue
        if _split_ok(a, need_rank) and _split_ok(b, need_rank):
            return tr, te, a, b, attempt
    raise SplitInfeasibleError(f"no valid train/test split in {MAX_SPLIT_RETRIES} draws", retries=MAX_SPLIT_RETRIES)


def project_samples(ps: PatchSet, U) -> np.ndarray:
    """Least-squares coordinates of every sample in the column space of ``U``.

    Sample ``i`` is fitted only on the features it observes:
    ``argmin_c ||x_i - U[T_i] c||``.  Returns an ``(n, r)`` array.
    """
    U = np.asarray(U, dtype=float)
    X = ps.to_masked()
    out = np.zeros((ps.n, U.shape[1]))
    seen = ~np.isnan(X)
    patterns, inverse = np.unique(seen.T, axis=0, return_inverse=True)
    for k, pat in enumerate(patterns):
        cols = np.flatnonzero(inverse.ravel() == k)
        coef, *_ = np.linalg.lstsq(U[pat], X[np.ix_(pat, cols)], rcond=None)
        out[cols] = coef.T
    return out


def supported_rank(ps: PatchSet, rtol: float = RANK_RTOL) -> int:
    """Largest ``r`` whose ``sigma_r`` is numerically nonzero in every patch."""
    out = None
    for pt in ps:
        s = np.linalg.svd(pt.data, compute_uv=False)
        k = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
        out = k if out is None else min(out, k)
    return out


def _agreement(train_ps, test_ps, r, K, classifier, ordering, score, kcfg):
    tr = cluster_quilting(train_ps, r, K, ordering=ordering, score=score, kmeans_cfg=kcfg)
    te = cluster_quilting(test_ps, r, K, ordering=ordering, score=score, kmeans_cfg=kcfg)
    clf = classifier().fit(tr.embedding.T, tr.labels)
    pred = clf.predict(project_samples(test_ps, tr.U_hat))
    return adjusted_rand_index(pred, te.labels)


def tune(ps: PatchSet, grid: TuneGrid, seed: int = 0, ordering: str = "exhaustive", score: str = "size",
         kmeans_cfg: Optional[KMeansConfig] = None) -> TuneResult:
    """Prediction-validation search over ``grid``.

    All cells share the same splits within a repeat.  A cell whose quilting
    fails on some split scores nan there; its mean ignores failed repeats.
    Ranks above :func:`supported_rank` are skipped (nan), since extra
    components would be fitted to round-off.  The best mean wins; ties
    (within 1e-9) go to the larger cluster count, then the larger rank, i.e.
    the richest setting that predicts equally well.
    """
    rng = np.random.default_rng(seed)
    top = supported_rank(ps)
    need = max([r for r in grid.ranks if r <= top] or [1])
    kcfg = kmeans_cfg or KMeansConfig(seed=seed)
    cells = [(r, k) for r in sorted(set(grid.ranks)) for k in sorted(set(grid.cluster_counts))]
    per = {c: [] for c in cells}
    retries = 0
    for _ in range(grid.repeats):
        _, _, a, b, tries = split_samples(ps, grid.split_fraction, rng, need)
        retries += tries
        for r, k in cells:
            if r > top:
                per[(r, k)].append(math.nan)
                continue
            try:
                per[(r, k)].append(_agreement(a, b, r, k, grid.classifier, ordering, score, kcfg))
            except QuiltError:
                per[(r, k)].append(math.nan)
    table = {}
    for c, vals in per.items():
        ok = [v for v in vals if not math.isnan(v)]
        table[c] = float(np.mean(ok)) if ok else math.nan
    best = None
    for c in sorted(cells, key=lambda c: (-c[1], -c[0])):  # first of a tie wins
        v = table[c]
        if math.isnan(v):
            continue
        if best is None or v > table[best] + _TIE_ATOL:
            best = c
    if best is None:
        raise QuiltError("every grid cell failed")
    return TuneResult(best[0], best[1], table[best], table, per, retries)
