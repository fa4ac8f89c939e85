"""Kernel smoothing: local linear fits, LOO cross-validated bandwidths, KDE,
local residual variance and finite-difference curvature of fitted surfaces.

All smoothers use the product Gaussian kernel with a diagonal bandwidth
matrix (one bandwidth per direction).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from . import kernels
from .data import (
    ConfigurationError,
    Dataset,
    EstimationError,
    ShapleyCurvesError,
    SubsetMask,
    as_points,
)

log = logging.getLogger(__name__)

MASS_FLOOR = 1e-12
RIDGE = 1e-10


class BandwidthSelectionError(ShapleyCurvesError):
    def __init__(self, message, subset=None):
        super().__init__(message)
        self.subset = subset


@dataclass(frozen=True)
class KernelSpec:
    """Second-order kernel constants. Only the Gaussian family is implemented."""

    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ConfigurationError(f"unsupported kernel family {self.family!r}")

    @property
    def mu2(self) -> float:
        return 1.0

    @property
    def l2sq(self) -> float:
        return 1.0 / (2.0 * math.sqrt(math.pi))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


GAUSSIAN = KernelSpec()


def _as_h(h, q):
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size == 1 and q > 1:
        h = np.repeat(h, q)
    if h.shape != (q,):
        raise ConfigurationError(f"need {q} bandwidths, got {h.shape}")
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ConfigurationError(f"bandwidths must be positive and finite: {h}")
    return h


class LocalFit:
    """Local linear regression of ``y`` on ``x`` with bandwidths ``h``.

    Evaluation is pure; ``evaluate`` reports per-point failures through an
    ``ok`` mask instead of raising.
    """

    def __init__(self, x, y, h):
        x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(len(y), -1))
        self.x = x
        self.y = np.ascontiguousarray(y, dtype=float)
        self.dim = x.shape[1]
        self.h = _as_h(h, self.dim) if self.dim else np.empty(0)
        self.ybar = float(self.y.mean())
        for a in (self.x, self.y, self.h):
            a.setflags(write=False)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def _queries(self, points):
        if self.dim == 0:
            p = np.asarray(points, dtype=float)
            return np.empty((p.shape[0] if p.ndim == 2 else 1, 0))
        return np.ascontiguousarray(as_points(points, self.dim))

    def evaluate(self, points):
        """Fitted values at ``points`` (``m x dim``) as ``(values, ok)``."""
        pts = self._queries(points)
        if self.dim == 0:
            m = pts.shape[0]
            return np.full(m, self.ybar), np.ones(m, dtype=bool)
        return kernels.loclin_eval(self.x, self.y, self.h, pts, MASS_FLOOR, RIDGE)

    def __call__(self, points) -> np.ndarray:
        """Fitted values; raises :class:`EstimationError` at the first failed point."""
        values, ok = self.evaluate(points)
        if not ok.all():
            bad = self._queries(points)[np.argmin(ok)]
            raise EstimationError(f"local linear fit not identified at {bad}", point=bad)
        return values

    def weights(self, points):
        """Equivalent-kernel weights ``W`` (``m x n``) with ``fit(points) = W @ y``."""
        pts = self._queries(points)
        if self.dim == 0:
            m = pts.shape[0]
            return np.full((m, self.n), 1.0 / self.n), np.ones(m, dtype=bool)
        return kernels.loclin_weights(self.x, self.h, pts, MASS_FLOOR, RIDGE)

    def refit(self, y) -> "LocalFit":
        """Same design and bandwidths, new response."""
        return LocalFit(self.x, y, self.h)

    def fitted(self):
        """Values at the design points (not leave-one-out)."""
        return self.evaluate(self.x)


def local_linear_fit(data: Dataset, h) -> LocalFit:
    if data.d and data.n < data.d + 2:
        raise ConfigurationError(f"need at least {data.d + 2} rows for a {data.d}-D local linear fit")
    return LocalFit(data.x, data.y, h)


def rule_of_thumb(x) -> np.ndarray:
    """Per-direction anchor ``std(x_j) * n**(-1/(4+dim))``."""
    x = np.asarray(x, dtype=float)
    n, q = x.shape
    sd = x.std(axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    return sd * n ** (-1.0 / (4 + q))


def default_grids(x, size: int = 25, span=(0.1, 10.0)) -> list:
    anchor = rule_of_thumb(x)
    return [a * np.geomspace(span[0], span[1], size) for a in anchor]


def cv_score(x, y, h, max_fail: float = 0.10):
    """Mean squared leave-one-out residual; ``inf`` if too many points fail."""
    pred, ok = kernels.loo_predict(np.ascontiguousarray(x, dtype=float),
                                   np.ascontiguousarray(y, dtype=float),
                                   np.asarray(h, dtype=float), MASS_FLOOR, RIDGE)
    n = len(ok)
    if n - ok.sum() > max_fail * n:
        return math.inf
    r = np.asarray(y)[ok] - pred[ok]
    return float(np.mean(r * r))


def loo_cv_bandwidth(data: Dataset, search: Optional[Sequence] = None, max_sweeps: int = 10,
                     coarse_step: int = 3) -> np.ndarray:
    """Leave-one-out CV bandwidths, searched direction by direction.

    The first sweep scans every ``coarse_step``-th candidate of each
    direction (others held fixed) and then refines around the best one;
    later sweeps descend locally through neighbouring candidates until a full
    sweep changes nothing. Ties go to the larger bandwidth.
    """
    x, y = data.x, data.y
    n, q = x.shape
    if q == 0:
        return np.empty(0)
    if n < 10:
        raise ConfigurationError("bandwidth cross-validation needs n >= 10")
    grids = [np.asarray(g, dtype=float) for g in (search if search is not None else default_grids(x))]
    if len(grids) != q or any(g.size == 0 for g in grids):
        raise ConfigurationError("need one non-empty candidate grid per direction")
    grids = [np.sort(g) for g in grids]
    scores: Dict[tuple, float] = {}

    def score(idx):
        if idx not in scores:
            h = np.array([grids[k][i] for k, i in enumerate(idx)])
            scores[idx] = cv_score(x, y, h)
        return scores[idx]

    def best_of(idx, k, candidates):
        best_i, best = idx[k], score(idx)
        for i in candidates:
            sc = score(idx[:k] + (i,) + idx[k + 1:])
            if sc < best or (sc == best and i > best_i):
                best_i, best = i, sc
        return best_i

    idx = tuple(g.size // 2 for g in grids)
    for sweep in range(max_sweeps):
        changed = False
        for k in range(q):
            size = grids[k].size
            if sweep == 0:
                coarse = sorted(set(range(0, size, coarse_step)) | {size - 1})
                i = best_of(idx, k, coarse)
                i = best_of(idx[:k] + (i,) + idx[k + 1:], k,
                            range(max(0, i - coarse_step + 1), min(size, i + coarse_step)))
            else:
                i = idx[k]
                while True:
                    j = best_of(idx[:k] + (i,) + idx[k + 1:], k, [c for c in (i - 1, i + 1) if 0 <= c < size])
                    if j == i:
                        break
                    i = j
            if i != idx[k]:
                idx = idx[:k] + (i,) + idx[k + 1:]
                changed = True
        if not changed or q == 1:
            break
    if not math.isfinite(score(idx)):
        raise BandwidthSelectionError("every bandwidth candidate failed leave-one-out evaluation")
    return np.array([grids[k][i] for k, i in enumerate(idx)])


@dataclass
class BandwidthPlan:
    """Bandwidths per subset (keyed by bitmask) plus optional oversmoothed ones."""

    d: int
    h: Dict[int, np.ndarray]
    g: Optional[Dict[int, np.ndarray]] = None

    def __post_init__(self):
        self.h = {int(b): _as_h(v, bin(b).count("1")) if b else np.empty(0) for b, v in self.h.items()}
        if self.g is not None:
            self.g = {int(b): _as_h(v, bin(b).count("1")) if b else np.empty(0) for b, v in self.g.items()}
            for b, gv in self.g.items():
                if b in self.h and np.any(gv < self.h[b]):
                    raise ConfigurationError(f"oversmoothed bandwidth below h for subset {b}")

    def __getitem__(self, s) -> np.ndarray:
        return self.h[s.bits if isinstance(s, SubsetMask) else int(s)]

    @property
    def full(self) -> np.ndarray:
        return self.h[(1 << self.d) - 1]

    def with_oversmoothing(self, factor: float) -> "BandwidthPlan":
        if factor < 1:
            raise ConfigurationError("oversmoothing factor must be >= 1")
        return BandwidthPlan(self.d, dict(self.h), {b: v * factor for b, v in self.h.items()})

    def to_dict(self) -> dict:
        out = {"d": self.d, "h": {str(b): v.tolist() for b, v in sorted(self.h.items())}}
        if self.g is not None:
            out["g"] = {str(b): v.tolist() for b, v in sorted(self.g.items())}
        return out

    @classmethod
    def from_dict(cls, raw) -> "BandwidthPlan":
        g = raw.get("g")
        return cls(int(raw["d"]), {int(k): v for k, v in raw["h"].items()},
                   None if g is None else {int(k): v for k, v in g.items()})


def loglog_oversmoothing_factor(n: int) -> float:
    """``g = h * log(log n) * 4``."""
    return math.log(math.log(n)) * 4.0


class KernelDensity:
    """Product Gaussian kernel density estimate."""

    def __init__(self, x, h):
        self.x = np.asarray(x, dtype=float).reshape(len(x), -1)
        self.h = _as_h(h, self.x.shape[1])

    def __call__(self, points) -> np.ndarray:
        pts = as_points(points, self.x.shape[1])
        out = np.empty(pts.shape[0])
        norm = np.prod(self.h) * (2 * math.pi) ** (self.x.shape[1] / 2) * self.x.shape[0]
        for t, p in enumerate(pts):
            u = (self.x - p) / self.h
            out[t] = np.exp(-0.5 * np.einsum("ij,ij->i", u, u)).sum() / norm
        return out


def kde(x, h) -> KernelDensity:
    return KernelDensity(x, h)


class LocalVariance:
    """Local-constant smooth of squared residuals, an estimate of ``Var(eps | x)``."""

    def __init__(self, x, resid_sq, h):
        self.x = np.asarray(x, dtype=float).reshape(len(resid_sq), -1)
        self.r2 = np.asarray(resid_sq, dtype=float)
        self.h = _as_h(h, self.x.shape[1])

    def evaluate(self, points):
        pts = as_points(points, self.x.shape[1])
        out = np.full(pts.shape[0], np.nan)
        ok = np.zeros(pts.shape[0], dtype=bool)
        for t, p in enumerate(pts):
            u = (self.x - p) / self.h
            w = np.exp(-0.5 * np.einsum("ij,ij->i", u, u))
            tot = w.sum()
            if tot >= MASS_FLOOR * len(w):
                out[t] = w @ self.r2 / tot
                ok[t] = True
        return out, ok

    def __call__(self, points):
        values, ok = self.evaluate(points)
        if not ok.all():
            raise EstimationError("zero kernel mass for variance smoother",
                                  point=as_points(points, self.x.shape[1])[np.argmin(ok)])
        return values


def local_variance(data: Dataset, fit: LocalFit, h=None) -> LocalVariance:
    """Residual-variance smoother from a full-model fit (bandwidths default to the fit's)."""
    fitted, ok = fit.fitted()
    if not ok.all():
        raise EstimationError("full-model fit failed at a design point")
    resid = data.y - fitted
    return LocalVariance(data.x, resid * resid, fit.h if h is None else h)


def second_derivatives(fit, x, step=None) -> np.ndarray:
    """Central-difference ``d2 m / d x_j^2`` of a fitted surface at ``x``.

    ``fit`` is a :class:`LocalFit` or any callable returning values for an
    ``m x d`` array. ``step`` defaults to the fit's bandwidths.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.size
    if step is None:
        step = fit.h
    step = np.broadcast_to(np.asarray(step, dtype=float), (d,))
    stencil = np.repeat(x[None, :], 2 * d + 1, axis=0)
    for j in range(d):
        stencil[1 + 2 * j, j] += step[j]
        stencil[2 + 2 * j, j] -= step[j]
    values = evaluate_surface(fit, stencil)
    if not np.all(np.isfinite(values)):
        raise EstimationError("second-derivative stencil left the fit's support", point=x)
    centre = values[0]
    return (values[1::2] - 2 * centre + values[2::2]) / step ** 2


def evaluate_surface(f, points) -> np.ndarray:
    """Evaluate a fit or plain callable at ``points``; failures become NaN."""
    if hasattr(f, "evaluate"):
        values, ok = f.evaluate(points)
        return np.where(ok, values, np.nan)
    return np.asarray(f(np.asarray(points, dtype=float)), dtype=float).reshape(-1)


def curvature_bias(fit, x, h=None, kernel: KernelSpec = GAUSSIAN) -> float:
    """``mu2/2 * sum_j h_j**2 * d2m/dx_j^2`` at ``x`` (leading local linear bias)."""
    h = np.asarray(fit.h if h is None else h, dtype=float)
    second = second_derivatives(fit, x, step=h)
    return 0.5 * kernel.mu2 * float(np.sum(h * h * second))
