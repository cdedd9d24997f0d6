import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterquilt.diagnostics import (ar1_dependency_norm, compute_gamma, compute_heterogeneity,
                                      data_driven_ordering_check, diagnose, estimate_noise_norms, merge_factor,
                                      misclustering_bound)
from clusterquilt.errors import DegeneratePatchError
from clusterquilt.ordering import order_exhaustive, ScoreFunction
from clusterquilt.patches import Patch, PatchSet
from clusterquilt.simulate import SimConfig, apply_ar1_noise, simulate


def test_gamma_full_overlap_is_inverse_condition(rng):
    # second patch sees exactly the first patch's samples, so J1 covers it
    A, B = rng.standard_normal((3, 6)), rng.standard_normal((4, 6))
    ps = PatchSet(6, 7, (Patch([0, 1, 2], range(6), A), Patch([3, 4, 5, 6], range(6), B)))
    s = np.linalg.svd(B, compute_uv=False)
    g = compute_gamma(ps, (0, 1), 2)
    assert g.values[0] == pytest.approx(s[1] / s[0], rel=1e-12)
    assert g.mode == "empirical" and not g.clamped.any()


def test_gamma_too_small_overlap_is_zero(rng):
    ps = PatchSet(5, 4, (Patch([0, 1], [0, 1, 2], rng.standard_normal((2, 3))),
                         Patch([2, 3], [2, 3, 4], rng.standard_normal((2, 3)))))
    g = compute_gamma(ps, (0, 1), 2)
    assert g.values.tolist() == [0.0]
    assert merge_factor(g.values) == math.inf


def test_gamma_zero_patch_raises():
    ps = PatchSet(3, 2, (Patch([0], [0, 1], np.ones((1, 2))), Patch([1], [1, 2], np.zeros((1, 2)))))
    with pytest.raises(DegeneratePatchError):
        compute_gamma(ps, (0, 1), 1)


def test_gamma_oracle_equals_empirical_without_noise(mosaic_clean):
    ps, X_star = mosaic_clean.patches, mosaic_clean.truth.X_star
    order = order_exhaustive(ps, ScoreFunction("snr", 2))
    a = compute_gamma(ps, order, 2)
    b = compute_gamma(ps, order, 2, X_star=X_star)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-10)
    assert b.mode == "oracle"


def test_merge_factor_examples():
    assert merge_factor([]) == 1.0
    assert merge_factor([1.0, 1.0]) == pytest.approx(2.1 ** 2)
    assert merge_factor([0.5]) == pytest.approx(3.2)


@given(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=6), st.floats(1e-3, 1.0))
def test_merge_factor_monotone_and_floor(gammas, g):
    mf = merge_factor(gammas)
    assert mf >= 2.1 ** len(gammas) * (1 - 1e-12)
    smaller = [min(x, g) for x in gammas]
    assert merge_factor(smaller) >= mf * (1 - 1e-12)


def test_heterogeneity_single_patch(rng):
    X = rng.standard_normal((5, 3)) @ rng.standard_normal((3, 9))
    ps = PatchSet.from_full(X, [(range(5), range(9))])
    h = compute_heterogeneity(X, ps, 3)
    s = np.linalg.svd(X, compute_uv=False)
    assert h.alpha_max == pytest.approx(s[0] / s[2], rel=1e-10)
    assert h.beta_max == pytest.approx(1.0, abs=1e-10)
    assert h.beta_min == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_heterogeneity_brackets_one(seed):
    sim = simulate(SimConfig(n=60, p=20, K=3, r=2, d=3.0, M=3, overlap=10, sigma=0.0, seed=seed))
    h = compute_heterogeneity(sim.truth.X_star, sim.patches, 2)
    assert h.beta_min <= 1 + 1e-9 <= h.beta_max + 2e-9
    assert h.alpha_max >= 1.0


def test_bound_zero_without_noise(mosaic_clean):
    rep = misclustering_bound(mosaic_clean.truth, mosaic_clean.patches, (0, 1, 2, 3)[:mosaic_clean.patches.M], 2)
    assert rep.bound == 0.0 and not rep.vacuous
    assert all(math.isinf(s) for s in rep.snr)
    d = rep.to_dict()
    assert "universal constant" in d["note"]
    json.dumps(d)


def test_bound_scales_with_noise_squared(sequential_noisy):
    sim = sequential_noisy
    order = order_exhaustive(sim.patches, ScoreFunction("snr", 2))
    e = sim.truth.noise_norms(sim.patches)
    a = misclustering_bound(sim.truth, sim.patches, order, 2, noise_norms=e)
    b = misclustering_bound(sim.truth, sim.patches, order, 2, noise_norms=2 * e)
    assert b.bound == pytest.approx(4 * a.bound, rel=1e-12)
    assert b.separation_bound == pytest.approx(4 * a.separation_bound, rel=1e-12)
    assert a.B == b.B and a.snr_required == b.snr_required
    np.testing.assert_allclose(b.snr, a.snr / 2)


def test_bound_b_formula(sequential_noisy):
    sim = sequential_noisy
    order = order_exhaustive(sim.patches, ScoreFunction("snr", 2))
    rep = misclustering_bound(sim.truth, sim.patches, order, 2)
    h = rep.heterogeneity
    want = h.alpha_max * (h.beta_max + 1) / h.beta_min ** 2 * rep.merge_factor
    assert rep.B == pytest.approx(want, rel=1e-12)
    assert rep.merge_factor == pytest.approx(np.prod(1.1 / rep.gammas + 1), rel=1e-12)


def test_ordering_check_noiseless(mosaic_clean):
    chk = data_driven_ordering_check(mosaic_clean.patches, mosaic_clean.truth.X_star, 2)
    assert chk.ratio == pytest.approx(1.0) and chk.within_e2
    json.dumps(chk.to_dict())


def test_ordering_check_two_patches():
    sim = simulate(SimConfig(n=60, p=20, K=3, r=2, d=3.0, M=2, overlap=15, sigma=0.0, seed=4))
    chk = data_driven_ordering_check(sim.patches, sim.truth.X_star, 2)
    assert chk.data_pi == chk.oracle_pi and chk.ratio == 1.0


def test_noise_estimate_close_to_truth():
    sim = simulate(SimConfig(n=400, p=200, K=3, r=2, d=3.0, M=2, overlap=100, sigma=0.8, seed=6))
    est = estimate_noise_norms(sim.patches, 2)
    true = sim.truth.noise_norms(sim.patches)
    np.testing.assert_allclose(est, true, rtol=0.1)


def test_diagnose_report(sequential_noisy):
    rep = diagnose(sequential_noisy.patches, 2)
    assert rep.bound is None and rep.gamma.mode == "empirical"
    assert "merge factor" in rep.table()
    full = diagnose(sequential_noisy.patches, 2, truth=sequential_noisy.truth)
    assert full.bound is not None and full.gamma.mode == "oracle"
    text = full.table()
    assert "misclustering bound" in text and "snr condition" in text
    json.dumps(full.to_dict())


def test_ar1_dependency_norm():
    out = ar1_dependency_norm(0.0, 5)
    assert out["exact"] == pytest.approx(1.0)
    for rho in (-0.6, 0.3, 0.8):
        out = ar1_dependency_norm(rho, 200)
        assert out["exact"] <= out["series_bound"] + 1e-9
        # the generator applied to unit innovations is the dependency matrix itself
        A = apply_ar1_noise(np.eye(200), rho, stationary=False)
        assert np.linalg.norm(A, 2) == pytest.approx(out["exact"], rel=1e-10)
    assert ar1_dependency_norm(0.8, 200)["exact"] > ar1_dependency_norm(0.8, 200)["one_lag_bound"]
