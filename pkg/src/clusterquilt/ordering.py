"""Patch ordering: score functions, exhaustive search and greedy forward search.

An ordering ``pi`` is feasible when every patch after the first shares at
least one sample with the patches placed before it.  Among feasible
orderings we maximise the product of per-step scores
``s(pi[m], union(I[pi[l]] for l < m))``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyOverlapError, InvalidInputError, NoFeasibleOrderingError, SizeCapError
from .linalg import rth_singular_value, spectral_norm
from .patches import PatchSet, build_graph, check_connected

log = logging.getLogger(__name__)

EXHAUSTIVE_CAP = 9
SNR_INFLATION = 1.1
# relative gap below which two objectives count as tied
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class OrderingResult:
    pi: tuple
    step_scores: tuple
    objective: float
    method: str

    def to_dict(self):
        return {"pi": list(self.pi), "step_scores": list(self.step_scores),
                "objective": self.objective, "method": self.method}


def score_overlap_size(ps: PatchSet, k: int, I) -> float:
    """``|I_k & I|`` as a float."""
    return float(np.intersect1d(ps[k].samples, np.asarray(I, dtype=np.int64)).size)


def score_snr(ps: PatchSet, k: int, I, r: int) -> float:
    """Empirical overlap-signal score ``(1.1 ||X_k|| / sigma_r(X_k[:, I_k & I]) + 1)^-1``.

    Returns 0 when the overlap block has rank below ``r``.
    """
    pt = ps[k]
    mask = np.isin(pt.samples, np.asarray(I, dtype=np.int64))
    if not mask.any():
        raise EmptyOverlapError(f"patch {k} shares no samples with the given set", patch=k)
    block = pt.data[:, mask]
    if r > min(block.shape):
        return 0.0
    sr = rth_singular_value(block, r)
    if sr == 0.0:
        return 0.0
    return sr / (SNR_INFLATION * spectral_norm(pt.data) + sr)


@dataclass(frozen=True)
class ScoreFunction:
    """``kind`` is ``"size"`` (overlap cardinality) or ``"snr"`` (needs ``rank``)."""

    kind: str = "size"
    rank: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("size", "snr"):
            raise InvalidInputError(f"unknown score kind {self.kind!r}")
        if self.kind == "snr" and (self.rank is None or self.rank < 1):
            raise InvalidInputError("snr score needs a positive rank")

    def __call__(self, ps: PatchSet, k: int, I) -> float:
        if self.kind == "size":
            return score_overlap_size(ps, k, I)
        return score_snr(ps, k, I, self.rank)


class _Scorer:
    """Memoised ``s(k, union of patches in prior)`` keyed on a bitmask."""

    def __init__(self, ps, sf):
        self.ps, self.sf = ps, sf
        self.adj = build_graph(ps).adjacency()
        self.cache = {}

    def union(self, prior_mask):
        return np.unique(np.concatenate([self.ps[j].samples for j in range(self.ps.M)
                                         if prior_mask >> j & 1]))

    def feasible(self, k, prior_mask):
        return any(self.adj[k, j] for j in range(self.ps.M) if prior_mask >> j & 1)

    def __call__(self, k, prior_mask):
        key = (k, prior_mask)
        if key not in self.cache:
            self.cache[key] = self.sf(self.ps, k, self.union(prior_mask))
        return self.cache[key]


def _require_connected(ps):
    if not check_connected(build_graph(ps)):
        raise NoFeasibleOrderingError("observation graph is disconnected; no feasible ordering exists")


def _better(value, best):
    return value > best + _TIE_RTOL * abs(best)


def order_exhaustive(ps: PatchSet, sf: ScoreFunction, cap: int = EXHAUSTIVE_CAP) -> OrderingResult:
    """Best feasible ordering by full enumeration (lexicographically first on ties)."""
    M = ps.M
    if M > cap:
        raise SizeCapError(f"exhaustive search over {M} patches exceeds cap {cap}; use greedy ordering")
    if M == 1:
        return OrderingResult((0,), (), 1.0, "exhaustive")
    _require_connected(ps)
    scorer = _Scorer(ps, sf)
    best = {"value": -1.0, "pi": None}
    pi = []

    def dfs(mask, value):
        if len(pi) == M:
            if _better(value, best["value"]):
                best["value"], best["pi"] = value, tuple(pi)
            return
        for k in range(M):
            if mask >> k & 1:
                continue
            if pi:
                if not scorer.feasible(k, mask):
                    continue
                step = value * scorer(k, mask)
            else:
                step = 1.0
            pi.append(k)
            dfs(mask | 1 << k, step)
            pi.pop()

    dfs(0, 1.0)
    if best["pi"] is None:
        raise NoFeasibleOrderingError("no feasible ordering found")
    return evaluate_ordering(ps, best["pi"], sf, method="exhaustive")


def order_greedy(ps: PatchSet, sf: ScoreFunction) -> OrderingResult:
    """Greedy forward search: best ordered pair first, then best next patch."""
    M = ps.M
    if M == 1:
        return OrderingResult((0,), (), 1.0, "greedy")
    _require_connected(ps)
    scorer = _Scorer(ps, sf)
    best_pair, best_val = None, -1.0
    for k1 in range(M):
        for k2 in range(M):
            if k1 == k2 or not scorer.adj[k1, k2]:
                continue
            v = scorer(k2, 1 << k1)
            if v > best_val:
                best_pair, best_val = (k1, k2), v
    pi = list(best_pair)
    mask = (1 << pi[0]) | (1 << pi[1])
    while len(pi) < M:
        nxt, nxt_val = None, -1.0
        for j in range(M):
            if mask >> j & 1 or not scorer.feasible(j, mask):
                continue
            v = scorer(j, mask)
            if v > nxt_val:
                nxt, nxt_val = j, v
        if nxt is None:
            raise NoFeasibleOrderingError("greedy search ran out of feasible patches")
        pi.append(nxt)
        mask |= 1 << nxt
    return evaluate_ordering(ps, pi, sf, method="greedy")


def evaluate_ordering(ps: PatchSet, pi: Sequence[int], sf: ScoreFunction,
                      method: str = "given") -> OrderingResult:
    """Validate ``pi`` and compute its step scores and product objective.

    Raises InvalidInputError if ``pi`` is not a permutation and
    NoFeasibleOrderingError if some step has an empty overlap.
    """
    pi = tuple(int(k) for k in pi)
    if sorted(pi) != list(range(ps.M)):
        raise InvalidInputError(f"{list(pi)} is not a permutation of 0..{ps.M - 1}")
    scores = []
    seen = ps[pi[0]].samples
    for step in range(1, ps.M):
        k = pi[step]
        if not np.isin(ps[k].samples, seen, assume_unique=True).any():
            raise NoFeasibleOrderingError(f"ordering {list(pi)} has an empty overlap at step {step} (patch {k})")
        scores.append(sf(ps, k, seen))
        seen = np.union1d(seen, ps[k].samples)
    objective = float(math.prod(scores))
    return OrderingResult(pi, tuple(scores), objective, method)


def choose_ordering(ps: PatchSet, mode: str = "exhaustive", score: str = "size", rank: Optional[int] = None,
                    given: Optional[Sequence[int]] = None, cap: int = EXHAUSTIVE_CAP,
                    fallback: bool = True) -> OrderingResult:
    """Dispatch on ``mode`` in ``{"exhaustive", "greedy", "given"}``.

    With ``fallback`` an exhaustive request above ``cap`` patches drops to the
    greedy search with a logged warning instead of raising SizeCapError.
    """
    sf = ScoreFunction(score, rank if score == "snr" else None)
    if mode == "given":
        if given is None:
            raise InvalidInputError("ordering mode 'given' needs a permutation")
        return evaluate_ordering(ps, given, sf, method="given")
    if mode == "greedy":
        return order_greedy(ps, sf)
    if mode == "exhaustive":
        if ps.M > cap and fallback:
            log.warning("%d patches exceed the exhaustive cap %d; using greedy ordering", ps.M, cap)
            return order_greedy(ps, sf)
        return order_exhaustive(ps, sf, cap=cap)
    raise InvalidInputError(f"unknown ordering mode {mode!r}")
