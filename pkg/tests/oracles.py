"""Brute-force reference implementations shared by the test modules."""
from itertools import combinations, permutations

import numpy as np

from clusterquilt.patches import Patch, PatchSet


def ari_pairs(a, b):
    """ARI by explicit enumeration of sample pairs."""
    n = len(a)
    same_a = np.array([a[i] == a[j] for i, j in combinations(range(n), 2)], dtype=bool)
    same_b = np.array([b[i] == b[j] for i, j in combinations(range(n), 2)], dtype=bool)
    total = len(same_a)
    both = int((same_a & same_b).sum())
    na, nb = int(same_a.sum()), int(same_b.sum())
    expected = na * nb / total if total else 0.0
    maximum = (na + nb) / 2
    if maximum == expected:
        return 1.0
    return (both - expected) / (maximum - expected)


def best_bijection(zhat, z, K):
    best, best_phi = None, None
    for perm in permutations(range(K)):  # lexicographic order
        errors = sum(perm[h] != t for h, t in zip(zhat, z))
        if best is None or errors < best:
            best, best_phi = errors, perm
    return best / len(z), best_phi


def make_ps(sample_sets, rng, feats=3):
    n = max(max(s) for s in sample_sets) + 1
    patches = tuple(Patch(np.arange(m * feats, (m + 1) * feats), np.array(sorted(s)),
                          rng.standard_normal((feats, len(s)))) for m, s in enumerate(sample_sets))
    return PatchSet(n, feats * len(sample_sets), patches)


def oracle_score(ps, kind, r, k, prior):
    samples = ps[k].samples.tolist()
    inter = [j for j, s in enumerate(samples) if s in prior]
    if kind == "size":
        return float(len(inter))
    block = ps[k].data[:, inter]
    if r > min(block.shape):
        return 0.0
    sv = np.linalg.svd(block, compute_uv=False)
    sr = sv[r - 1] if sv[r - 1] > max(block.shape) * np.finfo(float).eps * sv[0] else 0.0
    if sr == 0:
        return 0.0
    return 1.0 / (1.1 * np.linalg.norm(ps[k].data, 2) / sr + 1.0)


def brute_force(ps, kind, r):
    """(best objective, lexicographically first optimal pi) over feasible permutations."""
    results = []
    for pi in permutations(range(ps.M)):
        prior = set(ps[pi[0]].samples.tolist())
        value, ok = 1.0, True
        for k in pi[1:]:
            cur = set(ps[k].samples.tolist())
            if not prior & cur:
                ok = False
                break
            value *= oracle_score(ps, kind, r, k, prior)
            prior |= cur
        if ok:
            results.append((pi, value))
    best = max(v for _, v in results)
    first = min(pi for pi, v in results if v >= best * (1 - 1e-12))
    return best, first
