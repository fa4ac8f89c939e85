"""Component-based Shapley curves: one local linear regression per subset."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from .data import (
    ConfigurationError,
    CurveEstimate,
    Dataset,
    SubsetMask,
    all_subsets,
    as_points,
    slice_columns,
)
from .smoothing import (
    BandwidthPlan,
    BandwidthSelectionError,
    LocalFit,
    evaluate_surface,
    loo_cv_bandwidth,
)
from .weights import combine, weight_table

log = logging.getLogger(__name__)


@dataclass
class ComponentModel:
    """All ``2**d`` subset fits, keyed by bitmask; bitmask 0 is the sample mean."""

    data: Dataset
    plan: BandwidthPlan
    fits: Dict[int, LocalFit]

    @property
    def d(self) -> int:
        return self.data.d

    @property
    def full(self) -> LocalFit:
        return self.fits[(1 << self.d) - 1]

    @property
    def ybar(self) -> float:
        return self.fits[0].ybar

    def with_response(self, y, plan: Optional[BandwidthPlan] = None) -> "ComponentModel":
        """Refit every subset on a new response, keeping the design."""
        plan = plan or self.plan
        data = Dataset(self.data.x, y, self.data.names)
        return ComponentModel(data, plan, _fit_all(data, plan))


def _fit_all(data: Dataset, plan: BandwidthPlan) -> Dict[int, LocalFit]:
    fits = {}
    for s in all_subsets(data.d):
        part = slice_columns(data, s)
        fits[s.bits] = LocalFit(part.x, part.y, plan.h[s.bits] if s.bits else np.empty(0))
    return fits


def select_bandwidths(data: Dataset, n_jobs: int = 1, search_factory=None) -> BandwidthPlan:
    """Cross-validate every non-empty subset independently."""

    def one(s: SubsetMask):
        if s.bits == 0:
            return np.empty(0)
        part = slice_columns(data, s)
        try:
            return loo_cv_bandwidth(part, None if search_factory is None else search_factory(part))
        except BandwidthSelectionError as exc:
            raise BandwidthSelectionError(f"subset {s}: {exc}", subset=s) from exc

    subsets = all_subsets(data.d)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            hs = list(pool.map(one, subsets))
    else:
        hs = [one(s) for s in subsets]
    return BandwidthPlan(data.d, {s.bits: h for s, h in zip(subsets, hs)})


def fit_components(data: Dataset, plan: Optional[BandwidthPlan] = None, n_jobs: int = 1) -> ComponentModel:
    """Fit all subset regressions; bandwidths are cross-validated when ``plan`` is None."""
    if plan is None:
        plan = select_bandwidths(data, n_jobs=n_jobs)
    elif plan.d != data.d:
        raise ConfigurationError(f"plan for d={plan.d} given data with d={data.d}")
    missing = [b for b in range(1, 1 << data.d) if b not in plan.h]
    if missing:
        raise ConfigurationError(f"bandwidth plan lacks subsets {missing}")
    return ComponentModel(data, plan, _fit_all(data, plan))


def evaluate_components(fits, d: int, points) -> np.ndarray:
    """Component values, shape ``(m, 2**d)``; NaN where a fit failed.

    ``fits`` maps bitmask to a fit or a callable of the subset coordinates.
    Each subset is evaluated once per distinct ``x_s`` among the points.
    """
    pts = as_points(points, d)
    out = np.empty((pts.shape[0], 1 << d))
    for bits in range(1 << d):
        idx = [j for j in range(d) if bits >> j & 1]
        sub = pts[:, idx]
        f = fits[bits]
        if not idx:
            out[:, bits] = evaluate_surface(f, sub[:1])[0]
            continue
        uniq, inverse = np.unique(sub, axis=0, return_inverse=True)
        out[:, bits] = evaluate_surface(f, uniq)[inverse.reshape(-1)]
    return out


def estimate_curve(model: ComponentModel, points, j=None) -> CurveEstimate:
    """Shapley curves for variable ``j`` (or all variables) at ``points``.

    Points where any component fails are flagged in ``failed`` and carry NaN.
    """
    d = model.d
    variables = tuple(range(d)) if j is None else (j,) if np.isscalar(j) else tuple(j)
    pts = as_points(points, d)
    comps = evaluate_components(model.fits, d, pts)
    failed = ~np.all(np.isfinite(comps), axis=1)
    values = combine(comps, d, variables)
    values[failed] = np.nan
    return CurveEstimate(pts, values, "component", failed=failed, variables=variables)


def weighted_sum_residual(model: ComponentModel, oracle: Callable, point, j: int) -> np.ndarray:
    """Per-subset terms ``w(j, s) * (m_hat_s(x_s) - m_s(x_s))``, indexed by bitmask.

    ``oracle(s, x_s)`` returns the true component ``m_s`` at ``x_s``.
    """
    d = model.d
    x = as_points(point, d)[0]
    est = evaluate_components(model.fits, d, x[None, :])[0]
    truth = np.empty(1 << d)
    for s in all_subsets(d):
        try:
            truth[s.bits] = float(oracle(s, x[list(s.indices)]))
        except (KeyError, NotImplementedError) as exc:
            raise ConfigurationError(f"oracle unavailable for subset {s}") from exc
    return weight_table(d)[j] * (est - truth)
