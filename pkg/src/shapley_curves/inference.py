"""Confidence intervals for component-based Shapley curves.

The wild bootstrap perturbs each subset's residuals with Mammen's two-point
weights around an oversmoothed reference fit and refits every subset. Local
linear fits are linear in the response, so each refit is a matrix product with
precomputed equivalent-kernel weights; nothing is re-solved per replicate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.stats import norm

from .component import ComponentModel
from .data import ConfigurationError, CurveEstimate, EstimationError, all_subsets, as_points
from .smoothing import (
    GAUSSIAN,
    BandwidthPlan,
    KernelSpec,
    LocalFit,
    curvature_bias,
    evaluate_surface,
    kde,
    local_variance,
    loglog_oversmoothing_factor,
)
from .weights import weight_table

log = logging.getLogger(__name__)

SQRT5 = math.sqrt(5.0)
MAMMEN_LOW = -(SQRT5 - 1) / 2
MAMMEN_HIGH = (SQRT5 + 1) / 2
MAMMEN_P_LOW = (SQRT5 + 1) / (2 * SQRT5)
MAX_FAILED_REPLICATES = 0.05
DENSITY_FLOOR = 1e-12


def mammen_draw(rng, size=None):
    """Mammen two-point weights: mean 0, variance 1, third moment 1."""
    u = rng.random(size)
    return np.where(u < MAMMEN_P_LOW, MAMMEN_LOW, MAMMEN_HIGH) if size is not None else \
        (MAMMEN_LOW if u < MAMMEN_P_LOW else MAMMEN_HIGH)


@dataclass(frozen=True)
class BootstrapConfig:
    """Wild bootstrap settings.

    ``oversmooth`` is ``"log_log"`` (``g = h * 4 log log n``) or
    ``"explicit"``, in which case ``g`` maps subset bitmask to bandwidths.
    ``independent_v_per_subset`` redraws the Mammen weights for every subset
    instead of sharing one draw per observation.
    """

    b_reps: int = 500
    alpha: float = 0.05
    oversmooth: str = "log_log"
    g: Optional[Dict[int, np.ndarray]] = None
    seed: int = 0
    independent_v_per_subset: bool = False
    keep_subset_terms: bool = True

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if self.b_reps < 2 / self.alpha:
            raise ConfigurationError(f"b_reps={self.b_reps} too small for alpha={self.alpha}")
        if self.oversmooth not in ("log_log", "explicit"):
            raise ConfigurationError(f"unknown oversmoothing rule {self.oversmooth!r}")
        if self.oversmooth == "explicit" and self.g is None:
            raise ConfigurationError("explicit oversmoothing needs g")

    def replicate_seeds(self) -> np.ndarray:
        return np.random.SeedSequence(self.seed).generate_state(self.b_reps)


def replicate_weights(seed: int, n: int, d: int, independent: bool = False) -> np.ndarray:
    """Mammen weights for one replicate, shape ``(2**d, n)``.

    With shared weights (the default) every row is the same draw.
    """
    rng = np.random.default_rng(int(seed))
    if independent:
        return mammen_draw(rng, (1 << d, n))
    v = mammen_draw(rng, n)
    return np.broadcast_to(v, (1 << d, n))


@dataclass
class BootstrapResult:
    points: np.ndarray
    variables: tuple
    alpha: float
    estimate: np.ndarray       # (m, k) curve estimates
    lower: np.ndarray          # (m, k) CI bounds; NaN where unavailable
    upper: np.ndarray
    replicates: np.ndarray     # (B, m, k) draws of phi* - phi_g
    seeds: np.ndarray
    reference: np.ndarray      # (m, k) phi_g
    subset_terms: Optional[np.ndarray] = field(default=None, repr=False)  # (B, m, 2**d)
    d: int = 0

    def quantile_ci(self, alpha: float):
        """Bounds at another level from the stored replicates."""
        return _ci(self.estimate, self.replicates, alpha)

    def as_curve(self) -> CurveEstimate:
        failed = ~np.all(np.isfinite(self.lower), axis=1)
        return CurveEstimate(self.points, self.estimate, "component", self.lower, self.upper,
                             self.alpha, failed, self.variables)


def _ci(estimate, reps, alpha):
    B = reps.shape[0]
    finite = np.isfinite(reps)
    bad = (B - finite.sum(axis=0)) > MAX_FAILED_REPLICATES * B
    with np.errstate(all="ignore"):
        q = np.nanquantile(reps, [alpha / 2, 1 - alpha / 2], axis=0)
    lower, upper = estimate + q[0], estimate + q[1]
    lower[bad | ~np.isfinite(estimate)] = np.nan
    upper[bad | ~np.isfinite(estimate)] = np.nan
    return lower, upper


def _oversmoothed_plan(model: ComponentModel, config: BootstrapConfig) -> BandwidthPlan:
    if config.oversmooth == "log_log":
        return model.plan.with_oversmoothing(loglog_oversmoothing_factor(model.data.n))
    return BandwidthPlan(model.d, dict(model.plan.h), {int(b): v for b, v in config.g.items()})


def wild_bootstrap_ci(data, model: ComponentModel, points, config: BootstrapConfig = BootstrapConfig(),
                      j=None, residuals: Optional[Dict[int, np.ndarray]] = None) -> BootstrapResult:
    """Pointwise wild bootstrap intervals for the component-based curves.

    For each subset ``s`` the bootstrap response is
    ``Y*_s = m_{s,g}(X_s) + e_s * V`` with ``e_s`` the residuals of the
    ``h``-fit; the replicate statistic is ``sum_s w(j, s) (m*_s - m_{s,g})``
    and the interval is the estimate plus its ``alpha/2`` and
    ``1 - alpha/2`` quantiles. ``residuals`` overrides ``e_s`` per bitmask.
    """
    data = model.data if data is None else data
    if not data.equals(model.data):
        raise ConfigurationError("bootstrap data differ from the data the model was fitted on")
    d, n = model.d, data.n
    variables = tuple(range(d)) if j is None else (j,) if np.isscalar(j) else tuple(j)
    pts = as_points(points, d)
    m = pts.shape[0]
    plan_g = _oversmoothed_plan(model, config)
    table = weight_table(d)[list(variables)]

    # per-subset pieces: weights at the points, residual-scaled weights, bias offset
    scaled = np.empty((1 << d, m, n))
    offset = np.empty((m, 1 << d))
    est_comp = np.empty((m, 1 << d))
    ref_comp = np.empty((m, 1 << d))
    for s in all_subsets(d):
        fit = model.fits[s.bits]
        sub_pts = pts[:, list(s.indices)]
        sub_x = fit.x
        fit_g = LocalFit(sub_x, data.y, plan_g.g[s.bits]) if s.bits else fit
        W, ok = fit.weights(sub_pts)
        W = np.where(ok[:, None], W, np.nan)
        if residuals is not None and s.bits in residuals:
            e = np.asarray(residuals[s.bits], dtype=float)
        else:
            fitted, fok = fit.fitted()
            if not fok.all():
                raise EstimationError(f"subset {s}: fit fails at {int((~fok).sum())} design points")
            e = data.y - fitted
        ref_design = evaluate_surface(fit_g, sub_x)
        if not np.all(np.isfinite(ref_design)):
            raise EstimationError(f"subset {s}: oversmoothed fit fails at design points")
        ref_comp[:, s.bits] = evaluate_surface(fit_g, sub_pts)
        est_comp[:, s.bits] = W @ data.y
        offset[:, s.bits] = W @ ref_design - ref_comp[:, s.bits]
        scaled[s.bits] = W * e[None, :]

    seeds = config.replicate_seeds()
    B = config.b_reps
    keep = config.keep_subset_terms
    terms = np.empty((B, m, 1 << d)) if keep else None
    reps = np.empty((B, m, len(variables)))
    for b in range(B):
        V = replicate_weights(seeds[b], n, d, config.independent_v_per_subset)
        D = np.einsum("smn,sn->ms", scaled, V) + offset
        if keep:
            terms[b] = D
        reps[b] = D @ table.T
    failed_b = ~np.all(np.isfinite(reps.reshape(B, -1)), axis=1)
    if failed_b.any():
        log.warning("bootstrap: %d replicates non-finite at some point (seeds %s...)",
                    int(failed_b.sum()), seeds[failed_b][:5].tolist())
    estimate = est_comp @ table.T
    lower, upper = _ci(estimate, reps, config.alpha)
    return BootstrapResult(pts, variables, config.alpha, estimate, lower, upper, reps, seeds,
                           ref_comp @ table.T, terms, d)


@dataclass
class VarianceDecomposition:
    """Per-subset shares of the replicate variance; shares sum to one."""

    variables: tuple
    total_variance: np.ndarray   # (m, k)
    shares: np.ndarray           # (m, k, 2**d), indexed by bitmask
    full_share: np.ndarray       # (m, k)

    def rows(self):
        m, k, S = self.shares.shape
        for i in range(m):
            for c, v in enumerate(self.variables):
                for bits in range(S):
                    yield i, v, bits, float(self.shares[i, c, bits])


def bootstrap_variance_decomposition(result: BootstrapResult) -> VarianceDecomposition:
    """Split ``Var(phi* - phi_g)`` into ``Cov(w_s D_s, T) / Var(T)`` per subset."""
    if result.subset_terms is None:
        raise ConfigurationError("replicate subset terms were not kept")
    d = result.d
    table = weight_table(d)[list(result.variables)]
    D = result.subset_terms                                   # (B, m, S)
    Dc = D - D.mean(axis=0)
    T = result.replicates - result.replicates.mean(axis=0)    # (B, m, k)
    B = D.shape[0]
    total = (T * T).sum(axis=0) / (B - 1)
    cov = np.einsum("bms,bmk->mks", Dc, T) / (B - 1) * table[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        shares = cov / total[:, :, None]
    return VarianceDecomposition(result.variables, total, shares, shares[:, :, (1 << d) - 1])


def analytic_ci(data, model: ComponentModel, points, alpha: float = 0.05, j=None,
                bias_correct: bool = False, kernel: KernelSpec = GAUSSIAN,
                kernel_norm: Optional[float] = None, sigma2=None, density=None) -> CurveEstimate:
    """Normal-approximation intervals from plug-in bias and variance.

    ``phi_j(x) [- B(x)] +/- z * sqrt(V(x) / (n prod h))`` with
    ``B = mu2 / (2 d) * sum_k h_k**2 d2m/dx_k**2`` and
    ``V = kernel_norm * sigma2(x) / (d**2 f(x))``. ``kernel_norm`` defaults to
    the product-kernel ``||K||_2**2 = l2sq**d``; ``sigma2`` and ``density``
    are callables overriding the default smoothers.
    """
    if not 0 < alpha < 1:
        raise ConfigurationError("alpha must lie in (0, 1)")
    data = model.data if data is None else data
    d, n = model.d, data.n
    variables = tuple(range(d)) if j is None else (j,) if np.isscalar(j) else tuple(j)
    pts = as_points(points, d)
    full = model.full
    h = full.h
    comps = np.empty((pts.shape[0], 1 << d))
    for s in all_subsets(d):
        comps[:, s.bits] = evaluate_surface(model.fits[s.bits], pts[:, list(s.indices)])
    estimate = comps @ weight_table(d)[list(variables)].T
    if kernel_norm is None:
        kernel_norm = kernel.l2sq ** d
    if sigma2 is None:
        sigma2 = local_variance(data, full)
    if density is None:
        density = kde(data.x, h)
    f = np.asarray(density(pts), dtype=float)
    s2 = np.asarray(sigma2(pts), dtype=float)
    unavailable = ~(f >= DENSITY_FLOOR) | ~np.isfinite(s2) | ~np.all(np.isfinite(estimate), axis=1)
    with np.errstate(all="ignore"):
        var = kernel_norm * s2 / (d * d * f)
        half = norm.ppf(1 - alpha / 2) * np.sqrt(var / (n * np.prod(h)))
    centre = estimate.copy()
    if bias_correct:
        bias = np.array([curvature_bias(full, x, kernel=kernel) / d if not bad else np.nan
                         for x, bad in zip(pts, unavailable)])
        centre = centre - bias[:, None]
    lower = centre - half[:, None]
    upper = centre + half[:, None]
    lower[unavailable] = np.nan
    upper[unavailable] = np.nan
    return CurveEstimate(pts, estimate, "analytic", lower, upper, alpha, unavailable, variables)
