"""Data generating processes and their population Shapley curves.

Each regression function is a sum of terms that each involve at most two
covariates, so ``E[m(X) | X_s = x_s]`` reduces term by term to an integral
over that term's free covariates under their exact conditional Gaussian law.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.stats import norm

from .data import ConfigurationError, Dataset, SubsetMask, all_subsets, as_points, subset_rows
from .integration import Conditioner, GaussianLaw, QuadratureRule, _integrate_many, _psd_root
from .weights import combine, weight_table

DGP_IDS = ("dgp1_additive", "dgp2_interactive", "dgp3_bivariate", "dgp4_additive_d",
           "dgp5_interactive_d", "threshold_example")
ERROR_LAWS = ("normal", "student_t5")

# Gauss-Hermite sizes for term-wise population quadrature
_NODES_1D = 200
_NODES_2D = 64


class CapabilityError(ConfigurationError):
    pass


class Term:
    """``fn`` of the covariates ``variables``; ``fn`` takes an ``m x len(variables)`` array."""

    def __init__(self, variables, fn):
        self.variables = tuple(variables)
        self.fn = fn

    def __call__(self, x):
        return self.fn(x[:, list(self.variables)])

    def expect(self, known, x_known, mean_free, cov_free):
        """Conditional expectation given the known coordinates.

        ``known`` flags which of ``variables`` are fixed; ``x_known`` is
        ``m x n_known``; ``mean_free`` is ``m x n_free``, ``cov_free`` the
        common conditional covariance of the free ones.
        """
        k = len(self.variables)
        nfree = k - int(np.sum(known))
        m = x_known.shape[0]
        if nfree == 0:
            return self.fn(x_known)
        z, w = hermegauss(_NODES_1D if nfree == 1 else _NODES_2D)
        w = w / w.sum()
        Z = np.stack([g.reshape(-1) for g in np.meshgrid(*([z] * nfree), indexing="ij")], axis=1)
        W = np.prod(np.stack([g.reshape(-1) for g in np.meshgrid(*([w] * nfree), indexing="ij")], axis=1), axis=1)
        root = _psd_root(cov_free)
        nodes = mean_free[:, None, :] + (Z @ root.T)[None, :, :]
        full = np.empty((m, Z.shape[0], k))
        full[:, :, known] = x_known[:, None, :]
        full[:, :, ~known] = nodes
        return self.fn(full.reshape(-1, k)).reshape(m, -1) @ W


class ThresholdTerm(Term):
    """``theta * x_a * 1{x_b <= C}`` with exact Gaussian conditional expectations."""

    def __init__(self, a, b, theta, C):
        self.theta, self.C = theta, C
        super().__init__((a, b), lambda x: theta * x[:, 0] * (x[:, 1] <= C))

    def expect(self, known, x_known, mean_free, cov_free):
        ka, kb = known
        th, C = self.theta, self.C
        if ka and kb:
            return self.fn(x_known)
        if ka:
            p = norm.cdf((C - mean_free[:, 0]) / math.sqrt(cov_free[0, 0]))
            return th * x_known[:, 0] * p
        if kb:
            return th * mean_free[:, 0] * (x_known[:, 0] <= C)
        sb = math.sqrt(cov_free[1, 1])
        a = (C - mean_free[:, 1]) / sb
        return th * (mean_free[:, 0] * norm.cdf(a) - cov_free[0, 1] / sb * norm.pdf(a))


class ProductSineTerm(Term):
    """``amp * sin(pi * x_a * x_b)``: inner expectation in closed form, outer by Gauss-Hermite."""

    def __init__(self, a, b, amp):
        self.amp = amp
        super().__init__((a, b), lambda x: amp * np.sin(math.pi * x[:, 0] * x[:, 1]))

    def expect(self, known, x_known, mean_free, cov_free):
        ka, kb = known
        if ka and kb:
            return self.fn(x_known)
        if ka or kb:
            c = math.pi * x_known[:, 0]
            return self.amp * np.sin(c * mean_free[:, 0]) * np.exp(-0.5 * c * c * cov_free[0, 0])
        # integrate x_b | x_a analytically, then x_a by quadrature
        z, w = hermegauss(_NODES_1D)
        w = w / w.sum()
        va = cov_free[0, 0]
        beta = cov_free[0, 1] / va
        vb = max(cov_free[1, 1] - beta * cov_free[0, 1], 0.0)
        xa = mean_free[:, :1] + math.sqrt(va) * z[None, :]
        mb = mean_free[:, 1:2] + beta * (xa - mean_free[:, :1])
        c = math.pi * xa
        inner = np.sin(c * mb) * np.exp(-0.5 * c * c * vb)
        return self.amp * inner @ w


def _alt_sine(j):
    sign = (-1.0) ** (j + 1)
    return Term((j,), lambda x: sign * np.sin(2 * math.pi * x[:, 0]))


@dataclass(frozen=True, eq=False)
class DgpSpec:
    """A generative model: regression terms, Gaussian covariate law and error law."""

    id: str
    d: int
    law: GaussianLaw
    terms: Tuple[Term, ...]
    error: str = "normal"
    error_scale: float = 1.0
    rho: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in DGP_IDS:
            raise ConfigurationError(f"unknown DGP {self.id!r}")
        if self.error not in ERROR_LAWS:
            raise ConfigurationError(f"unknown error law {self.error!r}")
        if self.law.d != self.d:
            raise ConfigurationError(f"law dimension {self.law.d} != d={self.d}")
        if self.error_scale < 0:
            raise ConfigurationError("error_scale must be non-negative")

    def m(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        out = np.zeros(x.shape[0])
        for t in self.terms:
            out += t(x)
        return out

    def describe(self) -> dict:
        return {"id": self.id, "d": self.d, "rho": self.rho, "error": self.error,
                "error_scale": self.error_scale, **self.params}

    def __reduce__(self):
        # terms hold closures; rebuild from the constructor arguments instead
        return _rebuild, (self.describe(),)


def _rebuild(desc: dict) -> "DgpSpec":
    return make_dgp(**desc)


def make_dgp(id: str, rho: float = 0.0, d: Optional[int] = None, error: str = "normal",
             error_scale: float = 1.0, var: Optional[float] = None, psi: float = 1.0, theta: float = 2.0,
             C: float = 0.0) -> DgpSpec:
    """Build one of the named DGPs with covariates ``N(0, var * R(rho))``.

    ``var`` defaults to 4, except for the threshold example whose default
    covariates are independent standard normals.
    """
    sin, cos = np.sin, np.cos
    params = {}
    if id == "dgp1_additive":
        d = _fixed_d(id, d, 3)
        terms = (Term((0,), lambda x: -sin(2 * x[:, 0])), Term((1,), lambda x: cos(2 * x[:, 0])),
                 Term((2,), lambda x: x[:, 0]))
    elif id == "dgp2_interactive":
        d = _fixed_d(id, d, 3)
        terms = (Term((0,), lambda x: -sin(2 * x[:, 0])), Term((1,), lambda x: cos(3 * x[:, 0])),
                 Term((2,), lambda x: 0.5 * x[:, 0]),
                 Term((0, 1), lambda x: 2 * cos(x[:, 0]) * sin(2 * x[:, 1])))
    elif id == "dgp3_bivariate":
        d = _fixed_d(id, d, 2)
        terms = (Term((0,), lambda x: -sin(2 * x[:, 0])), Term((1,), lambda x: 0.1 * x[:, 0]),
                 Term((0, 1), lambda x: 2 * cos(x[:, 0]) * sin(x[:, 1])))
    elif id == "dgp4_additive_d":
        d = 3 if d is None else d
        if d < 1:
            raise ConfigurationError("dgp4 needs d >= 1")
        terms = tuple(_alt_sine(j) for j in range(d))
    elif id == "dgp5_interactive_d":
        d = 3 if d is None else d
        if d < 3:
            raise ConfigurationError("dgp5 needs d >= 3")
        terms = (ProductSineTerm(0, 1, -2.0), ProductSineTerm(0, 2, -2.0), ProductSineTerm(1, 2, 2.0)) + \
            tuple(_alt_sine(j) for j in range(d))
    elif id == "threshold_example":
        d = _fixed_d(id, d, 2)
        var = 1.0 if var is None else var
        terms = (Term((0,), lambda x: psi * x[:, 0]), ThresholdTerm(0, 1, theta, C))
        params = {"psi": psi, "theta": theta, "C": C}
    else:
        raise ConfigurationError(f"unknown DGP {id!r}; choose from {DGP_IDS}")
    var = 4.0 if var is None else var
    params["var"] = var
    law = GaussianLaw.equicorrelated(d, var=var, rho=rho)
    return DgpSpec(id, d, law, terms, error, error_scale, rho, params)


def _fixed_d(id, d, expected):
    if d not in (None, expected):
        raise ConfigurationError(f"{id} has d={expected}, got {d}")
    return expected


def sample(spec: DgpSpec, n: int, seed) -> Dataset:
    """Draw ``n`` observations; fully determined by ``seed``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = spec.law.sample(rng, n)
    if spec.error == "normal":
        eps = rng.standard_normal(n)
    else:
        eps = rng.standard_t(5, n)
    y = spec.m(x) + spec.error_scale * eps
    if n < 2:
        # a single draw is still useful for oracle checks; pad-free container
        x, y = np.vstack([x, x]), np.concatenate([y, y])
    return Dataset(x, y)


def _term_component(term: Term, cond: Conditioner, xs: np.ndarray) -> np.ndarray:
    s_idx = cond.inside
    known = np.array([v in s_idx for v in term.variables])
    x_known = xs[:, [s_idx.index(v) for v in term.variables if v in s_idx]]
    free = [v for v in term.variables if v not in s_idx]
    if not free:
        return term.fn(x_known)
    pos = [cond.outside.index(v) for v in free]
    mean_free = cond.mean(xs)[:, pos]
    cov_free = cond.cov[np.ix_(pos, pos)]
    return term.expect(known, x_known, mean_free, cov_free)


def true_component(spec: DgpSpec, s: SubsetMask, x_s, rule: Optional[QuadratureRule] = None) -> np.ndarray:
    """``m_s(x_s) = E[m(X) | X_s = x_s]`` for one or many ``x_s`` (rows).

    With ``rule`` given, the whole regression function is integrated over all
    excluded covariates with that rule; otherwise term by term.
    """
    xs = subset_rows(x_s, len(s))
    if len(s) == spec.d:
        return spec.m(xs)
    cond = Conditioner(spec.law, s)
    if rule is not None:
        return _integrate_many(spec.m, cond, xs, rule, max_dropped=1.0).values
    out = np.zeros(xs.shape[0])
    for t in spec.terms:
        out += _term_component(t, cond, xs)
    return out


@dataclass
class PopulationCurve:
    """Population Shapley curves of a DGP; ``method`` in closed_form/quadrature/monte_carlo."""

    spec: DgpSpec
    method: str = "quadrature"
    draws: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("closed_form", "quadrature", "monte_carlo"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.method == "closed_form":
            _closed_form_supported(self.spec)

    def mean(self) -> float:
        """``E Y``."""
        return float(true_component(self.spec, SubsetMask(0, self.spec.d), np.empty((1, 0)))[0])

    def components(self, points) -> np.ndarray:
        d = self.spec.d
        pts = as_points(points, d)
        out = np.empty((pts.shape[0], 1 << d))
        for s in all_subsets(d):
            if not s.bits:
                out[:, 0] = true_component(self.spec, s, np.empty((1, 0)))[0]
                continue
            sub = pts[:, list(s.indices)]
            uniq, inverse = np.unique(sub, axis=0, return_inverse=True)
            out[:, s.bits] = true_component(self.spec, s, uniq)[inverse.reshape(-1)]
        return out

    def evaluate(self, points, j=None) -> np.ndarray:
        """``(m, k)`` curve values for variables ``j`` (default all)."""
        d = self.spec.d
        variables = tuple(range(d)) if j is None else (j,) if np.isscalar(j) else tuple(j)
        pts = as_points(points, d)
        if self.method == "closed_form":
            full = _closed_form(self.spec, pts)
            return full[:, list(variables)]
        if self.method == "monte_carlo":
            out = np.empty((pts.shape[0], len(variables)))
            for i, x in enumerate(pts):
                for c, v in enumerate(variables):
                    out[i, c] = brute_force_curve(self.spec, v, x, self.draws, self.seed)[0]
            return out
        return combine(self.components(pts), d, variables)

    def __call__(self, j: int, x) -> float:
        return float(self.evaluate(np.asarray(x, dtype=float)[None, :], j)[0, 0])


def population_curve(spec: DgpSpec, method: str = "quadrature") -> PopulationCurve:
    return PopulationCurve(spec, method)


def _closed_form_supported(spec: DgpSpec):
    cov = spec.law.cov
    independent = np.allclose(cov, np.diag(np.diag(cov)))
    if spec.id in ("threshold_example", "dgp1_additive", "dgp3_bivariate") and independent:
        return
    raise CapabilityError(f"no closed form for {spec.id} with rho={spec.rho}")


def _closed_form(spec: DgpSpec, x: np.ndarray) -> np.ndarray:
    """Closed-form curves under independent Gaussian covariates.

    Centering constants of the non-centred terms are Gaussian moments:
    ``E cos(t X) = exp(-t**2 var / 2)`` for ``X ~ N(0, var)``.
    """
    mu = spec.law.mean
    var = np.diag(spec.law.cov)
    if spec.id == "threshold_example":
        psi, theta, C = spec.params["psi"], spec.params["theta"], spec.params["C"]
        p = norm.cdf((C - mu[1]) / math.sqrt(var[1]))
        ind = (x[:, 1] <= C).astype(float)
        phi1 = (psi + 0.5 * theta * ind + 0.5 * theta * p) * (x[:, 0] - mu[0])
        phi2 = 0.5 * theta * (ind - p) * (x[:, 0] + mu[0])
        return np.stack([phi1, phi2], axis=1)
    if np.any(mu != 0):
        raise CapabilityError("closed forms assume zero-mean covariates")
    if spec.id == "dgp1_additive":
        ecos = math.exp(-2.0 * var[1])
        return np.stack([-np.sin(2 * x[:, 0]), np.cos(2 * x[:, 1]) - ecos, x[:, 2]], axis=1)
    # dgp3: g1 = -sin(2 x1), g2 = 0.1 x2, g12 = 2 cos(x1) sin(x2)
    ecos1 = math.exp(-0.5 * var[0])
    g12 = 2 * np.cos(x[:, 0]) * np.sin(x[:, 1])
    phi1 = -np.sin(2 * x[:, 0]) + 0.5 * g12 - ecos1 * np.sin(x[:, 1])
    phi2 = 0.1 * x[:, 1] + 0.5 * g12 + ecos1 * np.sin(x[:, 1])
    return np.stack([phi1, phi2], axis=1)


_BLOCK = 1 << 14


def _mc_component(spec: DgpSpec, cond: Conditioner, s: SubsetMask, x_s, draws: int, seed, n_jobs: int):
    """Mean and variance of ``m`` over ``draws`` conditional draws, in fixed seeded blocks."""
    d = spec.d
    blocks = [(b, min(_BLOCK, draws - b * _BLOCK)) for b in range((draws + _BLOCK - 1) // _BLOCK)]
    mu = cond.mean(x_s)[0]

    def run(block):
        b, size = block
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(s.bits, b)))
        z = rng.standard_normal((size, len(cond.outside)))
        pts = np.empty((size, d))
        pts[:, cond.inside] = x_s
        pts[:, cond.outside] = mu + z @ cond.root.T
        v = spec.m(pts)
        return v.sum(), (v * v).sum()

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    # fixed block order keeps the sums independent of scheduling
    tot = sum(p[0] for p in parts)
    sq = sum(p[1] for p in parts)
    mean = tot / draws
    var = max(sq / draws - mean * mean, 0.0) * draws / (draws - 1)
    return mean, var


def brute_force_curve(spec: DgpSpec, j: int, x, draws: int = 100_000, seed=0, n_jobs: int = 1):
    """Monte Carlo Shapley value ``(estimate, standard_error)`` at one point.

    Every component except the full model is an average of ``m`` over
    independent draws from the exact conditional Gaussian law.
    """
    if draws < 10_000:
        raise ConfigurationError("brute force oracle needs at least 10**4 draws")
    d = spec.d
    x = np.asarray(x, dtype=float).reshape(d)
    w = weight_table(d)[j]
    value, var = 0.0, 0.0
    for s in all_subsets(d):
        if w[s.bits] == 0:
            continue
        x_s = x[list(s.indices)]
        if len(s) == d:
            value += w[s.bits] * float(spec.m(x[None, :])[0])
            continue
        mean, v = _mc_component(spec, Conditioner(spec.law, s), s, x_s, draws, seed, n_jobs)
        value += w[s.bits] * mean
        var += w[s.bits] ** 2 * v / draws
    return value, math.sqrt(var)
