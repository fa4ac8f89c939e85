"""Monte Carlo experiments: MISE, average MSE and bootstrap coverage.

Replication ``r`` of an experiment with seed ``seed`` draws its data from
``SeedSequence(seed, spawn_key=(r,))``, so results do not depend on the
number of worker processes or on scheduling.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .component import ComponentModel, estimate_curve, fit_components
from .data import ConfigurationError, ShapleyCurvesError, all_subsets, as_points
from .inference import BootstrapConfig, wild_bootstrap_ci
from .integration import curve_from_model, fit_integration
from .population import DgpSpec, PopulationCurve, sample

log = logging.getLogger(__name__)

MAX_FAILED_REPS = 0.10
REPORT_COLUMNS = ("dgp", "rho", "n", "estimator", "variable", "statistic", "value", "se",
                  "failures", "seconds")


# -- integration over the MISE region ---------------------------------------------------

def adaptive_integrate(f: Callable, lo, hi, start: int = 4, rel_tol: float = 1e-3,
                       cell_frac: float = 1e-3, max_depth: int = 3, max_points: int = 60_000):
    """Adaptive midpoint-rule integral of a non-negative ``f`` over a box.

    ``f`` maps an ``m x d`` array to ``m x k`` values. The box starts as a
    ``start``-per-axis grid. Every round splits dyadically each cell whose
    contribution or estimated error exceeds ``cell_frac`` of the running
    total; the error of a cell is the change its family saw when its parent
    was split (unknown, hence always refined, for the starting cells). Rounds
    stop once the total changes by less than ``rel_tol`` (relative), no cell
    qualifies, or ``max_depth`` / the point budget is reached. Returns
    ``(integral (k,), points evaluated)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    if np.any(hi <= lo):
        raise ConfigurationError("integration region is degenerate")
    width0 = (hi - lo) / start
    axes = [lo[k] + width0[k] * (np.arange(start) + 0.5) for k in range(d)]
    centres = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    level = np.zeros(len(centres), dtype=int)
    vals = np.atleast_2d(np.asarray(f(centres), dtype=float).reshape(len(centres), -1))
    contrib = vals * np.prod(width0)
    error = np.full(len(centres), np.inf)
    evaluated = len(centres)
    offsets = np.array(np.meshgrid(*([[-1.0, 1.0]] * d), indexing="ij")).reshape(d, -1).T
    nkids = 1 << d
    while True:
        total = contrib.sum()
        if not np.isfinite(total):
            return np.full(contrib.shape[1], np.nan), evaluated
        if total <= 0:
            break
        open_ = level < max_depth
        heavy = open_ & (contrib.sum(axis=1) > cell_frac * total)
        # largest estimated errors first, until what is left is within tolerance
        err = np.where(open_, error, 0.0)
        order = np.argsort(-err, kind="stable")
        tail = np.cumsum(err[order][::-1])[::-1]
        rough = np.zeros(len(err), dtype=bool)
        rough[order[(tail > rel_tol * total) & (err[order] > 0)]] = True
        score = np.maximum(contrib.sum(axis=1), error)
        cand = np.flatnonzero(heavy | rough)
        budget = (max_points - evaluated) // nkids
        if cand.size == 0 or budget <= 0:
            break
        if cand.size > budget:
            cand = cand[np.argsort(-score[cand], kind="stable")[:budget]]
            cand.sort()
        child_w = width0 / 2.0 ** (level[cand] + 1)[:, None]
        kids = (centres[cand][:, None, :] + 0.5 * child_w[:, None, :] * offsets[None, :, :]).reshape(-1, d)
        kid_level = np.repeat(level[cand] + 1, nkids)
        kid_vals = np.asarray(f(kids), dtype=float).reshape(len(kids), -1)
        kid_contrib = kid_vals * np.prod(np.repeat(child_w, nkids, axis=0), axis=1)[:, None]
        family = kid_contrib.reshape(len(cand), nkids, -1).sum(axis=1)
        change = np.abs(family - contrib[cand]).sum(axis=1)
        evaluated += len(kids)
        keep = np.ones(len(centres), dtype=bool)
        keep[cand] = False
        centres = np.concatenate([centres[keep], kids])
        level = np.concatenate([level[keep], kid_level])
        contrib = np.concatenate([contrib[keep], kid_contrib])
        error = np.concatenate([error[keep], np.repeat(change / nkids, nkids)])
    return contrib.sum(axis=0), evaluated


@dataclass(frozen=True)
class Region:
    """``hypercube`` with bounds ``(lo, hi)`` per axis, or ``empirical_quantile``
    with probabilities ``(lo, hi)`` applied to each replication's covariates."""

    kind: str = "hypercube"
    lo: float = -2.0
    hi: float = 2.0

    def __post_init__(self):
        if self.kind not in ("hypercube", "empirical_quantile"):
            raise ConfigurationError(f"unknown region {self.kind!r}")
        if not self.lo < self.hi:
            raise ConfigurationError("region bounds must satisfy lo < hi")
        if self.kind == "empirical_quantile" and not 0 <= self.lo < self.hi <= 1:
            raise ConfigurationError("quantile region needs 0 <= lo < hi <= 1")

    def bounds(self, x: np.ndarray):
        d = x.shape[1]
        if self.kind == "hypercube":
            return np.full(d, self.lo), np.full(d, self.hi)
        q = np.quantile(x, [self.lo, self.hi], axis=0)
        return q[0], q[1]


# -- estimators -------------------------------------------------------------------------

def component_estimator(data, spec: DgpSpec):
    model = fit_components(data)
    return lambda pts: estimate_curve(model, pts).values


def integration_estimator(data, spec: DgpSpec):
    model = fit_integration(data, spec.law)
    return lambda pts: curve_from_model(model, pts).values


ESTIMATORS = {"component": component_estimator, "integration": integration_estimator}


class _Truth:
    """Population curves with a per-point cache (grids repeat across replications)."""

    def __init__(self, spec: DgpSpec):
        self.curve = PopulationCurve(spec, "quadrature")
        self.cache: Dict[bytes, np.ndarray] = {}

    def __call__(self, pts):
        pts = np.ascontiguousarray(pts, dtype=float)
        keys = [p.tobytes() for p in pts]
        missing = [i for i, k in enumerate(keys) if k not in self.cache]
        if missing:
            vals = self.curve.evaluate(pts[missing])
            for i, v in zip(missing, vals):
                self.cache[keys[i]] = v
        return np.stack([self.cache[k] for k in keys])


_TRUTHS: Dict[int, _Truth] = {}


def _truth_for(spec: DgpSpec) -> _Truth:
    key = hash(tuple(sorted(spec.describe().items())))
    if key not in _TRUTHS:
        _TRUTHS.clear()
        _TRUTHS[key] = _Truth(spec)
    return _TRUTHS[key]


# -- configurations and the report ------------------------------------------------------

@dataclass(frozen=True)
class MiseConfig:
    spec: DgpSpec
    n: int
    reps: int
    estimator: str = "component"          # component | integration | both
    variables: Optional[Tuple[int, ...]] = None
    region: Region = Region()
    method: str = "adaptive_grid"         # adaptive_grid | sample_average
    seed: int = 0
    n_jobs: int = 1
    start: int = 4
    max_depth: int = 3
    rel_tol: float = 1e-3
    estimator_factory: Optional[Callable] = None

    def __post_init__(self):
        if self.reps < 2:
            raise ConfigurationError("need at least two replications")
        if self.estimator not in ("component", "integration", "both"):
            raise ConfigurationError(f"unknown estimator {self.estimator!r}")
        if self.method not in ("adaptive_grid", "sample_average"):
            raise ConfigurationError(f"unknown MISE method {self.method!r}")
        if self.n < 10:
            raise ConfigurationError("n must be at least 10")

    @property
    def estimators(self) -> Tuple[str, ...]:
        if self.estimator_factory is not None:
            return ("injected",)
        return ("component", "integration") if self.estimator == "both" else (self.estimator,)

    def echo(self) -> dict:
        return {"experiment": "mise", "dgp": self.spec.describe(), "n": self.n, "reps": self.reps,
                "estimator": self.estimator, "variables": self.variables,
                "region": {"kind": self.region.kind, "lo": self.region.lo, "hi": self.region.hi},
                "method": self.method, "seed": self.seed, "start": self.start,
                "max_depth": self.max_depth, "rel_tol": self.rel_tol}


@dataclass(frozen=True)
class CoverageConfig:
    spec: DgpSpec
    n: int
    reps: int
    b_reps: int = 500
    point: Tuple[float, ...] = (-0.5, -0.5)
    alphas: Tuple[float, ...] = (0.15, 0.10, 0.05)
    variables: Optional[Tuple[int, ...]] = None
    seed: int = 0
    n_jobs: int = 1
    independent_v_per_subset: bool = False
    ci_factory: Optional[Callable] = None

    def __post_init__(self):
        if self.reps < 2:
            raise ConfigurationError("need at least two replications")
        if not self.alphas or not all(0 < a < 1 for a in self.alphas):
            raise ConfigurationError("alphas must lie in (0, 1)")
        if len(self.point) != self.spec.d:
            raise ConfigurationError(f"point has {len(self.point)} coordinates, DGP has d={self.spec.d}")

    def echo(self) -> dict:
        return {"experiment": "coverage", "dgp": self.spec.describe(), "n": self.n, "reps": self.reps,
                "b_reps": self.b_reps, "point": list(self.point), "alphas": list(self.alphas),
                "variables": self.variables, "seed": self.seed,
                "independent_v_per_subset": self.independent_v_per_subset}


@dataclass
class Cell:
    dgp: str
    rho: float
    n: int
    estimator: str
    variable: str
    statistic: str
    value: float
    se: float
    failures: int
    seconds: float
    reps: int = 0


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@dataclass
class ExperimentReport:
    cells: List[Cell]
    config: dict
    seed: int
    per_rep: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def cell(self, estimator: str, variable, statistic: Optional[str] = None) -> Cell:
        name = variable if isinstance(variable, str) else f"x{variable + 1}"
        for c in self.cells:
            if c.estimator == estimator and c.variable == name and (statistic is None or c.statistic == statistic):
                return c
        raise KeyError((estimator, name, statistic))

    def to_csv(self, path=None, timing: bool = True) -> str:
        """CSV text (one row per cell); ``timing=False`` blanks the seconds column."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for c in self.cells:
            w.writerow([c.dgp, _fmt(c.rho), c.n, c.estimator, c.variable, c.statistic, _fmt(c.value),
                        _fmt(c.se), c.failures, _fmt(c.seconds) if timing else ""])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_text(self) -> str:
        """Plain table: one row per (n, statistic), one column per estimator/variable."""
        cols = sorted({(c.estimator, c.variable) for c in self.cells})
        rows = sorted({(c.dgp, c.rho, c.n, c.statistic) for c in self.cells})
        head = ["dgp", "rho", "n", "statistic"] + [f"{e}:{v}" for e, v in cols]
        lines = [head]
        for key in rows:
            line = [key[0], f"{key[1]:g}", str(key[2]), key[3]]
            for e, v in cols:
                hit = [c for c in self.cells if (c.dgp, c.rho, c.n, c.statistic, c.estimator, c.variable) == key + (e, v)]
                line.append(f"{hit[0].value:.4f} ({hit[0].se:.4f})" if hit else "")
            lines.append(line)
        widths = [max(len(r[i]) for r in lines) for i in range(len(head))]
        return "\n".join("  ".join(s.rjust(w) for s, w in zip(r, widths)) for r in lines) + "\n"


def _map(fn, items, n_jobs: int):
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _rep_seed(seed: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(rep,))


# -- MISE -------------------------------------------------------------------------------

def _mise_rep(args):
    config, rep = args
    spec = config.spec
    variables = config.variables or tuple(range(spec.d))
    data = sample(spec, config.n, _rep_seed(config.seed, rep))
    truth = _truth_for(spec)
    out = {}
    for name in config.estimators:
        t0 = time.perf_counter()
        factory = config.estimator_factory or ESTIMATORS[name]
        try:
            curve = factory(data, spec)
            if config.method == "sample_average":
                diff = curve(data.x)[:, list(variables)] - truth(data.x)[:, list(variables)]
                err = np.mean(diff * diff, axis=0)
            else:
                lo, hi = config.region.bounds(data.x)

                def sq_err(pts):
                    diff = curve(pts)[:, list(variables)] - truth(pts)[:, list(variables)]
                    return diff * diff

                err, _ = adaptive_integrate(sq_err, lo, hi, config.start, config.rel_tol,
                                            max_depth=config.max_depth)
            if not np.all(np.isfinite(err)):
                raise ShapleyCurvesError("non-finite squared error")
        except ShapleyCurvesError as exc:
            log.warning("replication %d (%s) failed: %s", rep, name, exc)
            err = np.full(len(variables), np.nan)
        out[name] = (np.asarray(err, dtype=float), time.perf_counter() - t0)
    return out


def run_mise(config: MiseConfig) -> ExperimentReport:
    """Mean integrated squared error of the Shapley curve estimates over replications."""
    spec = config.spec
    variables = config.variables or tuple(range(spec.d))
    results = _map(_mise_rep, [(config, r) for r in range(config.reps)], config.n_jobs)
    stat = "mise" if config.method == "adaptive_grid" else "average_mse"
    cells, per_rep = [], {}
    for name in config.estimators:
        errs = np.stack([r[name][0] for r in results])
        secs = float(np.mean([r[name][1] for r in results]))
        per_rep[name] = errs
        ok = np.all(np.isfinite(errs), axis=1)
        fails = int((~ok).sum())
        aborted = fails > MAX_FAILED_REPS * config.reps
        if aborted:
            log.error("%s: %d of %d replications failed; cell aborted", name, fails, config.reps)
        for c, v in enumerate(variables):
            e = errs[ok, c]
            value = float(e.mean()) if e.size and not aborted else math.nan
            se = float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 and not aborted else math.nan
            cells.append(Cell(spec.id, spec.rho, config.n, name, f"x{v + 1}", stat, value, se, fails,
                              secs, int(ok.sum())))
    return ExperimentReport(cells, config.echo(), config.seed, per_rep)


# -- coverage ---------------------------------------------------------------------------

def bootstrap_intervals(data, point, alphas, b_reps: int, seed: int, independent_v: bool = False):
    """Default interval factory: component fit plus wild bootstrap at one point."""
    model = fit_components(data)
    cfg = BootstrapConfig(b_reps=b_reps, alpha=min(alphas), seed=seed,
                          independent_v_per_subset=independent_v, keep_subset_terms=False)
    res = wild_bootstrap_ci(data, model, np.asarray(point, dtype=float)[None, :], cfg)
    return {a: tuple(b[0] for b in res.quantile_ci(a)) for a in alphas}


def _coverage_rep(args):
    config, rep, truth = args
    t0 = time.perf_counter()
    data = sample(config.spec, config.n, _rep_seed(config.seed, rep))
    boot_seed = int(np.random.SeedSequence(config.seed, spawn_key=(rep, 1)).generate_state(1)[0])
    try:
        if config.ci_factory is not None:
            cis = config.ci_factory(data, config.point, config.alphas)
        else:
            cis = bootstrap_intervals(data, config.point, config.alphas, config.b_reps, boot_seed,
                                      config.independent_v_per_subset)
        hits = {}
        for a, (lo, hi) in cis.items():
            lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
            if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
                raise ShapleyCurvesError("interval unavailable")
            hits[a] = (lo <= truth) & (truth <= hi)
    except ShapleyCurvesError as exc:
        log.warning("coverage replication %d failed: %s", rep, exc)
        hits = None
    return hits, time.perf_counter() - t0


def run_coverage(config: CoverageConfig) -> ExperimentReport:
    """Empirical coverage of pointwise intervals for the population curve at ``config.point``."""
    spec = config.spec
    variables = config.variables or tuple(range(spec.d))
    truth = PopulationCurve(spec, "quadrature").evaluate(np.asarray(config.point, dtype=float)[None, :])[0]
    results = _map(_coverage_rep, [(config, r, truth) for r in range(config.reps)], config.n_jobs)
    good = [h for h, _ in results if h is not None]
    fails = len(results) - len(good)
    secs = float(np.mean([s for _, s in results]))
    cells, per_rep = [], {}
    for a in config.alphas:
        hits = np.array([h[a] for h in good], dtype=float).reshape(len(good), spec.d)
        per_rep[f"alpha={a:g}"] = hits
        for v in variables:
            m = hits.shape[0]
            p = float(hits[:, v].mean()) if m else math.nan
            se = math.sqrt(p * (1 - p) / m) if m else math.nan
            cells.append(Cell(spec.id, spec.rho, config.n, "component", f"x{v + 1}", f"coverage@{a:g}", p,
                              se, fails, secs, m))
    report = ExperimentReport(cells, config.echo(), config.seed, per_rep)
    report.config["truth"] = truth.tolist()
    return report


# -- curve summaries --------------------------------------------------------------------

def cumulative_curves(model: ComponentModel, order: Sequence[int], points) -> np.ndarray:
    """``(d + 1, m)`` stacked curves: ``ybar``, then ``ybar`` plus the first k curves in ``order``.

    The last row equals the full-model fit wherever it is defined.
    """
    d = model.d
    order = [int(o) for o in order]
    if sorted(order) != list(range(d)):
        raise ConfigurationError(f"order must be a permutation of 0..{d - 1}")
    pts = as_points(points, d)
    est = estimate_curve(model, pts)
    out = np.empty((d + 1, pts.shape[0]))
    out[0] = model.ybar
    for k, j in enumerate(order, start=1):
        out[k] = out[k - 1] + est.column(j)
    return out


def rate_exponent(mise1: float, mise2: float, n1: int, n2: int, se1: float = 0.0, se2: float = 0.0):
    """``log(MISE1 / MISE2) / log(n2 / n1)`` and its delta-method standard error."""
    if not n1 < n2:
        raise ConfigurationError("rate check needs n1 < n2")
    if mise1 <= 0 or mise2 <= 0:
        raise ConfigurationError("MISE values must be positive")
    span = math.log(n2 / n1)
    return math.log(mise1 / mise2) / span, math.hypot(se1 / mise1, se2 / mise2) / span


def rate_check(report1: ExperimentReport, report2: ExperimentReport, estimator: str = "component",
               variable=0):
    """Empirical convergence exponent between two MISE reports differing only in ``n``."""
    c1, c2 = report1.cell(estimator, variable), report2.cell(estimator, variable)
    return rate_exponent(c1.value, c2.value, c1.n, c2.n, c1.se, c2.se)
