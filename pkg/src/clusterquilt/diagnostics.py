"""Runtime diagnostics for the quilting error bound.

Quantities entering the misclustering bound:

* ``gamma_m`` -- overlap signal proportion ``sigma_r(X*[T, J1]) / ||X*[T, I]||``
  of the patch placed at step ``m``;
* merge factor ``prod_m (1.1 / gamma_m + 1)``;
* heterogeneity constants ``alpha_max``, ``beta_max``, ``beta_min``;
* the bound ``B^2 * r K max_j n_j / n * max_m ||E_m||^2 / sigma_r(X*_m)^2`` with
  ``B = C alpha_max (beta_max + 1) / beta_min^2 * merge factor``.

The universal constant ``C`` is unknown; every report uses ``C = 1`` and says
so.  Oracle quantities need the noiseless matrix and are simulation-only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegeneratePatchError, InvalidInputError
from .linalg import rth_singular_value, spectral_norm, truncated_svd
from .ordering import EXHAUSTIVE_CAP, OrderingResult, ScoreFunction, choose_ordering, order_exhaustive
from .patches import Patch, PatchSet, overlap_sets
from .quilt import _pi

INFLATION = 1.1
MAD_SCALE = 1.4826


def truth_patches(ps: PatchSet, X_star) -> PatchSet:
    """Patches with the index sets of ``ps`` but values taken from ``X_star``."""
    X_star = np.asarray(X_star, dtype=float)
    return PatchSet(ps.n, ps.p, tuple(Patch(pt.features, pt.samples, X_star[np.ix_(pt.features, pt.samples)])
                                      for pt in ps))


def _sigma_r(block, r):
    if r > min(block.shape):
        return 0.0
    return rth_singular_value(block, r)


@dataclass
class GammaResult:
    values: np.ndarray  # one entry per step 1..M-1
    clamped: np.ndarray  # bool, True where the raw ratio left [0, 1]
    mode: str

    @property
    def minimum(self) -> float:
        return float(self.values.min()) if self.values.size else 1.0


def compute_gamma(ps: PatchSet, ordering, r: int, X_star=None) -> GammaResult:
    """Overlap signal proportions along ``ordering``.

    With ``X_star`` (the noiseless ``p x n`` matrix) this is the oracle
    quantity; otherwise observed patch values are used.
    """
    pi = _pi(ordering, ps.M)
    src = ps if X_star is None else truth_patches(ps, X_star)
    values, clamped = [], []
    for step in range(1, ps.M):
        pt = src[pi[step]]
        _, J2 = overlap_sets(src, pi, step)
        denom = spectral_norm(pt.data)
        if denom == 0:
            raise DegeneratePatchError(f"patch {pi[step]} is identically zero")
        g = _sigma_r(pt.data[:, J2], r) / denom if J2.size else 0.0
        clamped.append(not 0.0 <= g <= 1.0)
        values.append(min(max(g, 0.0), 1.0))
    return GammaResult(np.array(values), np.array(clamped, dtype=bool), "empirical" if X_star is None else "oracle")


def merge_factor(gammas: Sequence[float]) -> float:
    """``prod (1.1 / gamma + 1)``; infinite if any gamma is zero."""
    out = 1.0
    for g in gammas:
        if g <= 0:
            return math.inf
        out *= INFLATION / g + 1.0
    return out


@dataclass
class Heterogeneity:
    alpha_max: float
    beta_max: float
    beta_min: float


def compute_heterogeneity(X_star, ps: PatchSet, r: int) -> Heterogeneity:
    """``alpha_max``, ``beta_max``, ``beta_min`` from exact ground-truth SVDs.

    ``B_m = Lambda* U*[T_m]^T U_m Lambda_m^{-1}`` maps the global right
    singular vectors onto those of patch ``m``.
    """
    X_star = np.asarray(X_star, dtype=float)
    glob = truncated_svd(X_star, r)
    Bs, norms, smins = [], [], []
    for m, pt in enumerate(ps):
        block = X_star[np.ix_(pt.features, pt.samples)]
        sr = _sigma_r(block, r)
        if sr == 0:
            raise DegeneratePatchError(f"ground-truth block {m} has rank below {r}")
        loc = truncated_svd(block, r)
        Bs.append((glob.sigma[:, None] * (glob.U[pt.features].T @ loc.U)) / loc.sigma[None, :])
        norms.append(loc.sigma[0])
        smins.append(sr)
    Binv = []
    for m, B in enumerate(Bs):
        if _sigma_r(B, r) == 0:
            raise DegeneratePatchError(f"matching matrix of block {m} is singular")
        Binv.append(np.linalg.inv(B))
    beta_max, beta_min = 0.0, math.inf
    for Bi in Binv:
        for B in Bs:
            s = np.linalg.svd(Bi @ B, compute_uv=False)
            beta_max = max(beta_max, s[0])
            beta_min = min(beta_min, s[r - 1])
    return Heterogeneity(float(max(norms) / min(smins)), float(beta_max), float(beta_min))


def estimate_noise_norms(ps: PatchSet, r: int) -> np.ndarray:
    """``sigma_hat * (sqrt(p_m) + sqrt(n_m))`` per patch.

    ``sigma_hat`` is the normalised median absolute deviation of the residual
    after removing the rank-``r`` part of the patch.
    """
    out = []
    for pt in ps:
        resid = pt.data - truncated_svd(pt.data, min(r, min(pt.shape))).reconstruct()
        sig = MAD_SCALE * np.median(np.abs(resid - np.median(resid)))
        out.append(sig * (math.sqrt(pt.shape[0]) + math.sqrt(pt.shape[1])))
    return np.array(out)


def ar1_dependency_norm(rho: float, p: int) -> dict:
    """Noise-dependency factor for AR(1) feature noise of length ``p``.

    ``E = A eps`` with ``A = (I - rho S)^{-1}`` (``S`` the down-shift), so
    ``||A||`` multiplies the noise level in the separation condition.  Also
    reports the one-lag bound ``1 + |rho|`` and the series bound
    ``1 / (1 - |rho|)``.
    """
    if not abs(rho) < 1:
        raise InvalidInputError(f"need |rho| < 1, got {rho}")
    A = np.linalg.inv(np.eye(p) - rho * np.eye(p, k=-1))
    return {"rho": float(rho), "exact": float(np.linalg.norm(A, 2)), "one_lag_bound": 1 + abs(rho),
            "series_bound": 1 / (1 - abs(rho))}


@dataclass
class BoundReport:
    bound: float
    vacuous: bool
    B: float
    merge_factor: float
    gammas: np.ndarray
    heterogeneity: Heterogeneity
    snr: np.ndarray  # sigma_r(X*_m) / ||E_m||
    snr_required: float
    assumption_snr: np.ndarray  # per-patch pass/fail of the SNR condition
    assumption_centroid: bool
    separation_bound: Optional[float] = None
    constant: float = 1.0

    def to_dict(self):
        h = self.heterogeneity
        return {
            "bound": _num(self.bound), "vacuous": self.vacuous, "B": _num(self.B),
            "merge_factor": _num(self.merge_factor), "gamma": self.gammas.tolist(),
            "alpha_max": h.alpha_max, "beta_max": h.beta_max, "beta_min": h.beta_min,
            "snr": [_num(v) for v in self.snr], "snr_required": _num(self.snr_required),
            "snr_margin": [_num(v / self.snr_required) for v in self.snr],
            "assumption_snr": self.assumption_snr.tolist(), "assumption_centroid": self.assumption_centroid,
            "separation_bound": _num(self.separation_bound),
            "note": f"modulo universal constant (C = {self.constant:g})",
        }


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf") if not math.isnan(x) else "nan"


def misclustering_bound(gt, ps: PatchSet, ordering, r: int, noise_norms=None, C: float = 1.0) -> BoundReport:
    """Evaluate the misclustering bound and its SNR assumption.

    Parameters
    ----------
    gt : MixtureGroundTruth
        Needs ``Theta``, ``z`` and ``X_star``.
    ps : PatchSet
    ordering : OrderingResult or sequence
        Ordering the quilting run used.
    r : int
    noise_norms : array_like, optional
        ``||E[T_m, I_m]||`` per patch; defaults to the exact ground-truth norms.
    C : float
        Stand-in for the unknown universal constant.
    """
    X_star = gt.X_star
    noise = gt.noise_norms(ps) if noise_norms is None else np.asarray(noise_norms, dtype=float)
    gam = compute_gamma(ps, ordering, r, X_star=X_star)
    het = compute_heterogeneity(X_star, ps, r)
    mf = merge_factor(gam.values)
    B = C * het.alpha_max * (het.beta_max + 1) / het.beta_min ** 2 * mf
    sizes = np.bincount(gt.z, minlength=gt.K)
    n, K = gt.z.size, gt.K
    sig = np.array([_sigma_r(X_star[np.ix_(pt.features, pt.samples)], r) for pt in ps])
    ratio2 = np.max(noise ** 2 / sig ** 2)
    bound = 0.0 if noise.max() == 0 else B ** 2 * r * K * sizes.max() / n * ratio2
    with np.errstate(divide="ignore"):
        snr = np.where(noise > 0, sig / np.where(noise > 0, noise, 1.0), np.inf)
    required = B * math.sqrt(r * K * sizes.max() / sizes.min())
    max_norm = float(np.linalg.norm(gt.Theta, axis=1).max())
    centroid_ok = max_norm <= C * gt.Delta

    # separation form: kappa_r(Theta[:, T_m]) and Delta_m replace sigma_r(X*_m)
    sep_terms = []
    for m, pt in enumerate(ps):
        th = gt.Theta[:, pt.features]
        s = np.linalg.svd(th, compute_uv=False)
        kappa = s[0] / s[r - 1] if r <= s.size and s[r - 1] > 0 else math.inf
        nm = np.bincount(gt.z[pt.samples], minlength=K).min()
        dm = gt.Delta_m(ps)[m]
        sep_terms.append(math.inf if nm == 0 or dm == 0 else kappa ** 2 * noise[m] ** 2 / (nm * dm ** 2))
    sep = 0.0 if noise.max() == 0 else 2 * B ** 2 * r * K * sizes.max() / n * max(sep_terms)
    return BoundReport(float(bound), bool(bound >= 1), float(B), float(mf), gam.values, het, snr, float(required),
                       snr >= required, bool(centroid_ok), float(sep), C)


@dataclass
class OrderingCheck:
    oracle_pi: tuple
    oracle_factor: float
    data_pi: tuple
    data_factor: float  # oracle merge factor evaluated at the data-driven ordering
    ratio: float
    within_e2: bool

    def to_dict(self):
        return {"oracle_pi": list(self.oracle_pi), "oracle_factor": _num(self.oracle_factor),
                "data_pi": list(self.data_pi), "data_factor": _num(self.data_factor),
                "ratio": _num(self.ratio), "within_e2": self.within_e2}


def data_driven_ordering_check(ps: PatchSet, X_star, r: int) -> OrderingCheck:
    """Compare the data-driven snr ordering with the oracle ordering.

    The oracle ordering minimises the merge factor computed from ``X_star``;
    the data-driven one maximises the product of empirical snr scores.  Both
    are scored with the oracle merge factor.
    """
    sf = ScoreFunction("snr", r)
    oracle = order_exhaustive(truth_patches(ps, X_star), sf)
    data = order_exhaustive(ps, sf)
    f_star = merge_factor(compute_gamma(ps, oracle, r, X_star=X_star).values)
    f_hat = merge_factor(compute_gamma(ps, data, r, X_star=X_star).values)
    ratio = f_hat / f_star if math.isfinite(f_star) else math.nan
    return OrderingCheck(oracle.pi, f_star, data.pi, f_hat, ratio, bool(ratio <= math.e ** 2))


@dataclass
class DiagnosticsReport:
    ordering: OrderingResult
    gamma: GammaResult
    kappa: np.ndarray
    merge_factor: float
    snr_per_patch: np.ndarray
    noise_estimates: np.ndarray
    bound: Optional[BoundReport] = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "ordering": self.ordering.to_dict(),
            "gamma_mode": self.gamma.mode,
            "gamma": self.gamma.values.tolist(),
            "gamma_clamped": self.gamma.clamped.tolist(),
            "gamma_min": self.gamma.minimum,
            "kappa": [_num(k) for k in self.kappa],
            "merge_factor": _num(self.merge_factor),
            "snr_per_patch": [_num(s) for s in self.snr_per_patch],
            "noise_estimates": self.noise_estimates.tolist(),
            "warnings": list(self.warnings),
        }
        if self.bound is not None:
            out["bound"] = self.bound.to_dict()
        return out

    def table(self) -> str:
        rows = [f"{'step':>4} {'patch':>5} {'gamma':>9} {'kappa':>9} {'snr':>9}"]
        pi = self.ordering.pi
        for step, k in enumerate(pi):
            g = f"{self.gamma.values[step - 1]:9.4f}" if step else f"{'-':>9}"
            rows.append(f"{step:>4} {k:>5} {g} {self.kappa[k]:9.3g} {self.snr_per_patch[k]:9.3g}")
        rows.append(f"merge factor: {self.merge_factor:.4g}")
        if self.bound is not None:
            b = self.bound
            val = "vacuous" if b.vacuous else f"{b.bound:.4g}"
            rows.append(f"misclustering bound (C=1): {val}")
            h = b.heterogeneity
            rows.append(f"alpha_max={h.alpha_max:.4g} beta_max={h.beta_max:.4g} beta_min={h.beta_min:.4g}")
            rows.append("snr condition: " + " ".join("ok" if ok else "fail" for ok in b.assumption_snr))
        return "\n".join(rows)


def diagnose(ps: PatchSet, r: int, ordering="exhaustive", score: str = "snr", truth=None,
             cap: int = EXHAUSTIVE_CAP) -> DiagnosticsReport:
    """Empirical diagnostics, plus oracle bound quantities when ``truth`` is given.

    ``truth`` is a MixtureGroundTruth; with it gammas are oracle values and
    noise norms are exact.
    """
    if isinstance(ordering, OrderingResult):
        order = ordering
    elif isinstance(ordering, str):
        order = choose_ordering(ps, ordering, score, rank=r, cap=cap)
    else:
        order = choose_ordering(ps, "given", score, rank=r, given=ordering)
    X_star = None if truth is None else truth.X_star
    gam = compute_gamma(ps, order, r, X_star=X_star)
    src = ps if X_star is None else truth_patches(ps, X_star)
    kappa = []
    for pt in src:
        s1, sr = spectral_norm(pt.data), _sigma_r(pt.data, r)
        kappa.append(math.inf if sr == 0 else s1 / sr)
    est = estimate_noise_norms(ps, r)
    noise = est if truth is None else truth.noise_norms(ps)
    sig = np.array([_sigma_r(pt.data, r) for pt in src])
    with np.errstate(divide="ignore"):
        snr = np.where(noise > 0, sig / np.where(noise > 0, noise, 1.0), np.inf)
    warnings = [f"gamma at step {i + 1} clamped to [0, 1]" for i in np.flatnonzero(gam.clamped)]
    bound = None
    if truth is not None:
        try:
            bound = misclustering_bound(truth, ps, order, r)
        except DegeneratePatchError as exc:
            warnings.append(f"bound unavailable: {exc}")
    return DiagnosticsReport(order, gam, np.array(kappa), merge_factor(gam.values), snr, est, bound, warnings)
