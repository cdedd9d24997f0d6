"""Patchwork observation structure.

A :class:`PatchSet` holds ``M`` observed blocks ``X[T_m, I_m]`` of an
unobserved ``p x n`` matrix.  Feature blocks ``T_m`` partition ``range(p)``;
sample sets ``I_m`` may overlap and together cover ``range(n)``.  All indices
are 0-based.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, PatchValidationError


def _index_array(values, name):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise PatchValidationError(f"{name} must be a flat list of indices", "index-shape")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise PatchValidationError(f"{name} must contain integers", "index-type")
    return arr.astype(np.int64)


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Patch:
    """One observed block: ``data[a, b] = X[features[a], samples[b]]``.

    Index arrays are stored sorted; the constructor reorders ``data`` to match
    if they are given out of order.
    """

    features: np.ndarray
    samples: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        features = _index_array(self.features, "features")
        samples = _index_array(self.samples, "samples")
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape != (features.size, samples.size):
            raise PatchValidationError(
                f"data shape {data.shape} does not match |T|={features.size} x |I|={samples.size}",
                "block-shape")
        if not np.all(np.isfinite(data)):
            raise PatchValidationError("patch data contains NaN or Inf", "finite-data")
        if features.size == 0 or samples.size == 0:
            raise PatchValidationError("patches must have at least one feature and one sample", "nonempty")
        fo, so = np.argsort(features, kind="stable"), np.argsort(samples, kind="stable")
        features, samples, data = features[fo], samples[so], data[np.ix_(fo, so)]
        if np.any(np.diff(features) == 0):
            raise PatchValidationError("duplicate feature index inside a patch", "duplicate-index")
        if np.any(np.diff(samples) == 0):
            raise PatchValidationError("duplicate sample index inside a patch", "duplicate-index")
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "samples", _frozen(samples))
        object.__setattr__(self, "data", _frozen(data))

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True, eq=False)
class PatchSet:
    """Validated collection of patches over ``p`` features and ``n`` samples."""

    n: int
    p: int
    patches: tuple

    def __post_init__(self):
        patches = tuple(pt if isinstance(pt, Patch) else Patch(*pt) for pt in self.patches)
        n, p = int(self.n), int(self.p)
        if not patches:
            raise PatchValidationError("a patch set needs at least one patch", "nonempty")
        seen_f = np.zeros(p, dtype=bool)
        seen_s = np.zeros(n, dtype=bool)
        for m, pt in enumerate(patches):
            if pt.features[0] < 0 or pt.features[-1] >= p:
                raise PatchValidationError(f"patch {m}: feature index out of range [0, {p})", "index-range")
            if pt.samples[0] < 0 or pt.samples[-1] >= n:
                raise PatchValidationError(f"patch {m}: sample index out of range [0, {n})", "index-range")
            if np.any(seen_f[pt.features]):
                raise PatchValidationError(f"patch {m}: feature blocks must be disjoint", "disjoint-features")
            seen_f[pt.features] = True
            seen_s[pt.samples] = True
        if not seen_f.all():
            missing = np.flatnonzero(~seen_f)[:5].tolist()
            raise PatchValidationError(f"features not covered by any patch, e.g. {missing}", "feature-coverage")
        if not seen_s.all():
            missing = np.flatnonzero(~seen_s)[:5].tolist()
            raise PatchValidationError(f"samples not observed in any patch, e.g. {missing}", "sample-coverage")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "patches", patches)

    @property
    def M(self) -> int:
        return len(self.patches)

    def __len__(self):
        return len(self.patches)

    def __getitem__(self, m) -> Patch:
        return self.patches[m]

    def __iter__(self):
        return iter(self.patches)

    @classmethod
    def from_full(cls, X, blocks: Sequence[tuple]) -> "PatchSet":
        """Cut ``(features, samples)`` blocks out of a full ``p x n`` matrix."""
        X = np.asarray(X, dtype=float)
        p, n = X.shape
        patches = []
        for features, samples in blocks:
            f = np.asarray(features, dtype=np.int64)
            s = np.asarray(samples, dtype=np.int64)
            patches.append(Patch(f, s, X[np.ix_(f, s)]))
        return cls(n, p, tuple(patches))

    def restrict_samples(self, keep) -> "PatchSet":
        """Sub-problem on the samples ``keep`` (re-indexed to ``0..len(keep)-1``).

        Raises PatchValidationError if some patch loses all of its samples.
        """
        keep = np.unique(np.asarray(keep, dtype=np.int64))
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        patches = []
        for m, pt in enumerate(self.patches):
            mask = remap[pt.samples] >= 0
            if not mask.any():
                raise PatchValidationError(f"patch {m} has no samples left", "nonempty")
            patches.append(Patch(pt.features, remap[pt.samples[mask]], pt.data[:, mask]))
        return PatchSet(keep.size, self.p, tuple(patches))

    def permuted(self, order) -> "PatchSet":
        """Same patches listed in ``order``."""
        return PatchSet(self.n, self.p, tuple(self.patches[k] for k in order))

    def scaled(self, c: float) -> "PatchSet":
        return PatchSet(self.n, self.p, tuple(Patch(pt.features, pt.samples, c * pt.data)
                                              for pt in self.patches))

    def to_masked(self) -> np.ndarray:
        """Full ``p x n`` array with unobserved entries set to NaN."""
        out = np.full((self.p, self.n), np.nan)
        for pt in self.patches:
            out[np.ix_(pt.features, pt.samples)] = pt.data
        return out

    def sample_features(self):
        """For each sample, the sorted features at which it is observed."""
        per = [[] for _ in range(self.n)]
        for pt in self.patches:
            for i in pt.samples:
                per[i].append(pt.features)
        return [np.sort(np.concatenate(f)) for f in per]


@dataclass(frozen=True)
class ObservationGraph:
    """Patches as nodes; an edge wherever two patches share a sample."""

    n_nodes: int
    edges: frozenset

    def neighbors(self, k):
        return sorted({b if a == k else a for a, b in self.edges if k in (a, b)})

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        for a, b in self.edges:
            A[a, b] = A[b, a] = True
        return A


def build_graph(ps: PatchSet) -> ObservationGraph:
    member = np.zeros((ps.M, ps.n), dtype=bool)
    for m, pt in enumerate(ps.patches):
        member[m, pt.samples] = True
    shared = member.astype(np.int64) @ member.T.astype(np.int64)
    edges = frozenset((j, k) for j, k in combinations(range(ps.M), 2) if shared[j, k] > 0)
    return ObservationGraph(ps.M, edges)


def check_connected(g: ObservationGraph) -> bool:
    """True iff every node is reachable from node 0 (an empty graph is not)."""
    if g.n_nodes == 0:
        return False
    adj = g.adjacency()
    seen = {0}
    queue = deque([0])
    while queue:
        k = queue.popleft()
        for j in np.flatnonzero(adj[k]):
            if j not in seen:
                seen.add(int(j))
                queue.append(int(j))
    return len(seen) == g.n_nodes


def overlap_sets(ps: PatchSet, ordering: Sequence[int], step: int):
    """Overlap of patch ``ordering[step]`` with all patches placed before it.

    Returns
    -------
    J1 : ndarray
        Global sample ids in ``I_{ordering[step]}`` that already appear in
        ``ordering[:step]``.
    J2 : ndarray
        Positions of ``J1`` inside ``I_{ordering[step]}``.  May be empty.
    """
    M = ps.M
    if not 1 <= step < M:
        raise InvalidInputError(f"step must lie in [1, {M - 1}], got {step}")
    prior = np.unique(np.concatenate([ps[k].samples for k in ordering[:step]]))
    current = ps[ordering[step]].samples
    mask = np.isin(current, prior, assume_unique=True)
    return current[mask], np.flatnonzero(mask)
