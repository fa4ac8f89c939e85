"""Integration-based Shapley curves.

A single full-model pilot fit is integrated against the conditional law of the
excluded covariates to obtain every lower-order component. Gaussian covariate
laws are integrated by product Gauss-Hermite or seeded Monte Carlo; under
independence the empirical marginal average over the sample can be used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .data import (
    ConfigurationError,
    CurveEstimate,
    Dataset,
    EstimationError,
    SubsetMask,
    all_subsets,
    as_points,
    subset_rows,
)
from .smoothing import GAUSSIAN, KernelSpec, LocalFit, evaluate_surface, loo_cv_bandwidth
from .weights import combine, weight_table

MAX_DROPPED = 0.20
# keeps one batch of pilot queries around 16 MB
_BATCH_POINTS = 250_000


class IntegrationError(EstimationError):
    def __init__(self, message, subset=None, point=None):
        super().__init__(message, point=point)
        self.subset = subset


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ConfigurationError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise ConfigurationError("covariance matrix is not symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ConfigurationError("covariance matrix is not positive definite") from None
        for name, a in (("mean", mean), ("cov", cov), ("chol", chol)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def equicorrelated(cls, d: int, var: float = 4.0, rho: float = 0.0, mean=0.0) -> "GaussianLaw":
        cov = var * (np.full((d, d), rho) + (1 - rho) * np.eye(d))
        return cls(np.broadcast_to(np.asarray(mean, dtype=float), (d,)).copy(), cov)

    @classmethod
    def fit(cls, x) -> "GaussianLaw":
        """Moment fit to a sample."""
        x = np.asarray(x, dtype=float)
        return cls(x.mean(axis=0), np.atleast_2d(np.cov(x, rowvar=False)))

    @property
    def d(self) -> int:
        return self.mean.size

    def sample(self, rng, n: int) -> np.ndarray:
        return self.mean + rng.standard_normal((n, self.d)) @ self.chol.T


@dataclass(frozen=True, eq=False)
class ConditionalGaussian:
    """Law of ``X_{-s}`` given ``X_s = x_s``."""

    s: SubsetMask
    x_s: np.ndarray
    mean: np.ndarray
    cov: np.ndarray


def _psd_root(cov):
    if cov.size == 0:
        return cov
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        return vecs * np.sqrt(np.clip(vals, 0, None))


class Conditioner:
    """Precomputed regression of ``X_{-s}`` on ``X_s`` for one law and subset.

    The conditional covariance does not depend on ``x_s``; the conditional
    mean is affine in it, so many ``x_s`` are handled in one matrix product.
    """

    def __init__(self, law: GaussianLaw, s: SubsetMask):
        if s.d != law.d:
            raise ConfigurationError(f"mask over d={s.d} used with a {law.d}-D law")
        self.law, self.s = law, s
        inside, outside = list(s.indices), list(s.complement)
        self.inside, self.outside = inside, outside
        S = law.cov
        if inside:
            Sss = S[np.ix_(inside, inside)]
            Sos = S[np.ix_(outside, inside)]
            try:
                self.coef = np.linalg.solve(Sss, Sos.T).T
            except np.linalg.LinAlgError:
                raise ConfigurationError(f"singular covariance block for subset {s}") from None
            self.cov = S[np.ix_(outside, outside)] - self.coef @ Sos.T
        else:
            self.coef = np.zeros((len(outside), 0))
            self.cov = S[np.ix_(outside, outside)].copy()
        self.cov = 0.5 * (self.cov + self.cov.T)
        self.root = _psd_root(self.cov)

    def mean(self, x_s) -> np.ndarray:
        x_s = subset_rows(x_s, len(self.inside))
        mu = self.law.mean
        return mu[self.outside] + (x_s - mu[self.inside]) @ self.coef.T

    def at(self, x_s) -> ConditionalGaussian:
        x_s = np.asarray(x_s, dtype=float).reshape(len(self.inside))
        return ConditionalGaussian(self.s, x_s, self.mean(x_s)[0], self.cov)


def conditional_gaussian(law: GaussianLaw, s: SubsetMask, x_s) -> ConditionalGaussian:
    if len(s) >= law.d:
        raise ConfigurationError("conditioning on every variable leaves nothing to integrate")
    return Conditioner(law, s).at(x_s)


@dataclass(frozen=True)
class QuadratureRule:
    """Integration rule against a standard normal in ``k`` dimensions."""

    method: str = "gauss_hermite_product"
    nodes: int = 20
    draws: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("gauss_hermite_product", "monte_carlo"):
            raise ConfigurationError(f"unknown quadrature method {self.method!r}")

    def standard(self, k: int, stream: int = 0):
        """Nodes ``Z`` (``K x k``) and weights summing to one."""
        if k == 0:
            return np.empty((1, 0)), np.ones(1)
        if self.method == "monte_carlo":
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(stream,)))
            return rng.standard_normal((self.draws, k)), np.full(self.draws, 1.0 / self.draws)
        z, w = hermegauss(self.nodes)
        w = w / w.sum()
        grids = np.meshgrid(*([z] * k), indexing="ij")
        wgrids = np.meshgrid(*([w] * k), indexing="ij")
        Z = np.stack([g.reshape(-1) for g in grids], axis=1)
        W = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
        return Z, W


def default_rule(free_dims: int) -> QuadratureRule:
    """20-node product Gauss-Hermite up to 3 free axes, 4096 Monte Carlo draws beyond."""
    if free_dims <= 3:
        return QuadratureRule("gauss_hermite_product", nodes=20)
    return QuadratureRule("monte_carlo", draws=4096)


@dataclass
class IntegrationResult:
    values: np.ndarray
    dropped: np.ndarray  # fraction of quadrature mass lost to failed pilot evaluations


def _integrate_many(pilot, cond: Conditioner, xs, rule: QuadratureRule, max_dropped=MAX_DROPPED):
    """Integrate the pilot over ``X_{-s} | X_s = x_s`` for every row of ``xs``."""
    d = cond.law.d
    xs = subset_rows(xs, len(cond.inside))
    Z, w = rule.standard(len(cond.outside), stream=cond.s.bits)
    offsets = Z @ cond.root.T
    means = cond.mean(xs)
    u, K = xs.shape[0], Z.shape[0]
    values = np.empty(u)
    dropped = np.empty(u)
    per = max(1, _BATCH_POINTS // K)
    for start in range(0, u, per):
        stop = min(u, start + per)
        block = np.empty((stop - start, K, d))
        block[:, :, cond.inside] = xs[start:stop, None, :]
        block[:, :, cond.outside] = means[start:stop, None, :] + offsets[None, :, :]
        f = evaluate_surface(pilot, block.reshape(-1, d)).reshape(stop - start, K)
        ok = np.isfinite(f)
        kept = (ok * w).sum(axis=1)
        dropped[start:stop] = 1.0 - kept
        with np.errstate(invalid="ignore", divide="ignore"):
            values[start:stop] = np.where(ok, f, 0.0) @ w / kept
    bad = dropped > max_dropped
    values[bad] = np.nan
    return IntegrationResult(values, dropped)


def integrate_component(pilot, law: GaussianLaw, s: SubsetMask, x_s, rule: Optional[QuadratureRule] = None) -> float:
    """``int m_hat(x) f(x_{-s} | x_s) dx_{-s}`` for a single ``x_s``."""
    x_s = np.asarray(x_s, dtype=float).reshape(-1)
    if len(s) == law.d:
        return float(evaluate_surface(pilot, x_s[None, :])[0])
    rule = rule or default_rule(law.d - len(s))
    res = _integrate_many(pilot, Conditioner(law, s), x_s[None, :], rule)
    if not np.isfinite(res.values[0]):
        raise IntegrationError(
            f"subset {s}: {res.dropped[0]:.1%} of quadrature mass outside the pilot's support",
            subset=s, point=x_s)
    return float(res.values[0])


def integrate_component_empirical(pilot, data_x, s: SubsetMask, x_s):
    """Average of the pilot over the sample's ``X_{-s}`` with ``X_s = x_s`` held fixed.

    Only valid under independence of ``X_s`` and ``X_{-s}``. Returns
    ``(value, n_failed)``.
    """
    values, failures = _empirical_many(pilot, np.asarray(data_x, dtype=float), s,
                                       np.asarray(x_s, dtype=float).reshape(1, -1))
    if not np.isfinite(values[0]):
        raise IntegrationError(f"subset {s}: pilot failed at every hybrid point", subset=s, point=x_s)
    return float(values[0]), int(failures[0])


def _empirical_many(pilot, X, s: SubsetMask, xs):
    n, d = X.shape
    inside = list(s.indices)
    xs = subset_rows(xs, len(inside))
    if len(inside) == d:
        v = evaluate_surface(pilot, xs)
        return v, (~np.isfinite(v)).astype(int)
    u = xs.shape[0]
    values = np.empty(u)
    failures = np.empty(u, dtype=int)
    per = max(1, _BATCH_POINTS // n)
    for start in range(0, u, per):
        stop = min(u, start + per)
        block = np.repeat(X[None, :, :], stop - start, axis=0)
        block[:, :, inside] = xs[start:stop, None, :]
        f = evaluate_surface(pilot, block.reshape(-1, d)).reshape(stop - start, n)
        ok = np.isfinite(f)
        failures[start:stop] = n - ok.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            values[start:stop] = np.where(ok, f, 0.0).sum(axis=1) / ok.sum(axis=1)
    return values, failures


@dataclass
class IntegrationModel:
    """Pilot fit plus the covariate law it is integrated against.

    ``law`` is a :class:`GaussianLaw` or the string ``"independent"`` for the
    empirical-average shortcut over ``data_x``.
    """

    pilot: object
    law: Union[GaussianLaw, str]
    d: int
    data_x: Optional[np.ndarray] = None
    rule: Optional[QuadratureRule] = None
    _conditioners: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if isinstance(self.law, str):
            if self.law != "independent":
                raise ConfigurationError(f"unknown law {self.law!r}")
            if self.data_x is None:
                raise ConfigurationError("independence mode needs the sample covariates")
        elif self.law.d != self.d:
            raise ConfigurationError(f"law dimension {self.law.d} != {self.d}")

    def component(self, s: SubsetMask, xs) -> IntegrationResult:
        xs = subset_rows(xs, len(s))
        if len(s) == self.d:
            v = evaluate_surface(self.pilot, xs)
            return IntegrationResult(v, np.where(np.isfinite(v), 0.0, 1.0))
        if isinstance(self.law, str):
            v, fails = _empirical_many(self.pilot, self.data_x, s, xs)
            return IntegrationResult(v, fails / self.data_x.shape[0])
        if s.bits not in self._conditioners:
            self._conditioners[s.bits] = Conditioner(self.law, s)
        rule = self.rule or default_rule(self.d - len(s))
        return _integrate_many(self.pilot, self._conditioners[s.bits], xs, rule)

    def components(self, points) -> np.ndarray:
        """``(m, 2**d)`` integrated components; NaN where integration failed."""
        pts = as_points(points, self.d)
        out = np.empty((pts.shape[0], 1 << self.d))
        for s in all_subsets(self.d):
            sub = pts[:, list(s.indices)]
            if not len(s):
                res = self.component(s, sub[:1])
                if not np.isfinite(res.values[0]):
                    raise IntegrationError("pilot cannot be integrated against the full covariate law", subset=s)
                out[:, 0] = res.values[0]
                continue
            uniq, inverse = np.unique(sub, axis=0, return_inverse=True)
            out[:, s.bits] = self.component(s, uniq).values[inverse.reshape(-1)]
        return out

    def mean_component(self) -> float:
        """The integrated pilot for the empty subset (the estimate of E Y)."""
        return float(self.components(np.zeros((1, self.d)))[0, 0])


def fit_integration(data: Dataset, law, h=None, rule: Optional[QuadratureRule] = None) -> IntegrationModel:
    """Cross-validate (unless ``h`` is given) and fit the full-model pilot."""
    if h is None:
        h = loo_cv_bandwidth(data)
    pilot = LocalFit(data.x, data.y, h)
    return IntegrationModel(pilot, law, data.d, data_x=np.asarray(data.x), rule=rule)


def estimate_curve_integration(data: Optional[Dataset], law, points, rule: Optional[QuadratureRule] = None,
                               h=None, pilot=None, j=None) -> CurveEstimate:
    """Integration-based Shapley curves at ``points``.

    Pass ``pilot`` to integrate a given function instead of fitting one
    (then ``data`` is needed only for independence mode).
    """
    if pilot is None:
        model = fit_integration(data, law, h=h, rule=rule)
    else:
        d = law.d if isinstance(law, GaussianLaw) else data.d
        model = IntegrationModel(pilot, law, d, data_x=None if data is None else np.asarray(data.x), rule=rule)
    return curve_from_model(model, points, j)


def curve_from_model(model: IntegrationModel, points, j=None) -> CurveEstimate:
    d = model.d
    variables = tuple(range(d)) if j is None else (j,) if np.isscalar(j) else tuple(j)
    pts = as_points(points, d)
    comps = model.components(pts)
    failed = ~np.all(np.isfinite(comps), axis=1)
    values = combine(comps, d, variables)
    values[failed] = np.nan
    return CurveEstimate(pts, values, "integration", failed=failed, variables=variables)


def integration_bias_diagnostic(pilot, law: GaussianLaw, point, j: int, h=None,
                                rule: Optional[QuadratureRule] = None,
                                kernel: KernelSpec = GAUSSIAN) -> float:
    """Plug-in leading bias of the integration-based curve for variable ``j``.

    For each subset the bandwidth-weighted curvature ``sum_k h_k**2 d2m/dx_k**2``
    of the pilot (central differences, step ``h_k``) is integrated against the
    conditional law, then combined with the Shapley weights and ``mu2 / 2``.
    """
    d = law.d
    h = np.asarray(pilot.h if h is None else h, dtype=float).reshape(-1)
    h = np.broadcast_to(h, (d,))
    x = as_points(point, d)[0]

    def curvature(pts):
        m = pts.shape[0]
        stencil = np.repeat(pts[:, None, :], 2 * d + 1, axis=1)
        for k in range(d):
            stencil[:, 1 + 2 * k, k] += h[k]
            stencil[:, 2 + 2 * k, k] -= h[k]
        f = evaluate_surface(pilot, stencil.reshape(-1, d)).reshape(m, 2 * d + 1)
        second = (f[:, 1::2] - 2 * f[:, :1] + f[:, 2::2]) / h ** 2
        return second @ (h * h)

    table = weight_table(d)[j]
    total = 0.0
    for s in all_subsets(d):
        if len(s) == d:
            avg = float(curvature(x[None, :])[0])
            if not np.isfinite(avg):
                raise IntegrationError("curvature stencil failed at the evaluation point", subset=s, point=x)
        else:
            cond = Conditioner(law, s)
            res = _integrate_many(curvature, cond, x[list(s.indices)][None, :], rule or default_rule(d - len(s)))
            avg = float(res.values[0])
            if not np.isfinite(avg):
                raise IntegrationError(f"subset {s}: curvature integration lost "
                                       f"{res.dropped[0]:.1%} of its mass", subset=s, point=x)
        total += table[s.bits] * avg
    return 0.5 * kernel.mu2 * total
