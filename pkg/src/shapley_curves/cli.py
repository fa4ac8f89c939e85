"""Command-line front end.

Usage::

    shapley-curves COMMAND [--config FILE] [--dotted.key VALUE ...]

Commands: estimate, bootstrap-ci, simulate-mise, simulate-coverage,
cumulative, population. The config file is YAML or JSON (a manifest written
by an earlier run is accepted too); every key can be overridden by a flag
with the same dotted name, e.g. ``--bootstrap.b_reps 200``. Every run
writes ``manifest.json`` next to its results.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimation
failure, 5 internal error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import os
import platform
import sys
import tempfile
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import scipy
import yaml

from . import __version__
from .component import estimate_curve, fit_components
from .data import (
    ConfigurationError,
    CurveEstimate,
    DataError,
    Dataset,
    EstimationError,
    ShapleyCurvesError,
    as_points,
)
from .harness import (
    CoverageConfig,
    ExperimentReport,
    MiseConfig,
    Region,
    cumulative_curves,
    run_coverage,
    run_mise,
)
from .inference import BootstrapConfig, analytic_ci, bootstrap_variance_decomposition, wild_bootstrap_ci
from .integration import GaussianLaw, curve_from_model, fit_integration
from .population import PopulationCurve, make_dgp, sample
from .smoothing import BandwidthPlan

log = logging.getLogger("shapley_curves")

COMMANDS = ("estimate", "bootstrap-ci", "simulate-mise", "simulate-coverage", "cumulative", "population")
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ESTIMATION, EXIT_INTERNAL = 0, 2, 3, 4, 5
CURVE_COLUMNS = ("variable", "estimate", "ci_lower", "ci_upper", "method", "alpha")

DEFAULTS = {
    "seed": None,
    "data": {
        "path": None,            # CSV file; when null a sample is drawn from `dgp`
        "response": "y",
        "dgp": "dgp1_additive",
        "n": 500,
        "rho": 0.0,
        "d": None,
        "error": "normal",
        "error_scale": 1.0,
    },
    "estimator": "component",    # component | integration
    "law": "gaussian",           # integration: gaussian (true law for DGPs, moment fit for CSV) | independent
    "evaluation": {
        "kind": "slice",         # slice | grid | points
        "variable": 1,           # slice: 1-based column index or column name
        "size": 41,
        "lo": None,              # slice/grid bounds; slice defaults to the 5%/95% quantiles
        "hi": None,
        "points_path": None,     # points: CSV with one column per covariate
    },
    "bandwidth": {"plan": None},  # {bitmask: [h, ...]} overrides cross-validation
    "bootstrap": {"b_reps": 500, "alpha": 0.05, "independent_v_per_subset": False},
    "analytic": {"enabled": False, "alpha": 0.05, "bias_correct": False},
    "simulation": {
        "n": [300, 1000],
        "reps": 100,
        "estimator": "component",
        "variables": None,       # 1-based
        "region": {"kind": "hypercube", "lo": -2.0, "hi": 2.0},
        "method": "adaptive_grid",
        "n_jobs": 1,
        "b_reps": 500,
        "alphas": [0.15, 0.10, 0.05],
        "point": [-0.5, -0.5],
    },
    "cumulative": {"order": None},  # 1-based permutation
    "population": {"method": "quadrature"},
    "overlay": {"shap_csv": None},
    "output": {"dir": "shapley_out", "max_failed_fraction": 0.5},
}


# -- config -----------------------------------------------------------------------------

def _merge(base: dict, extra: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        key = f"{prefix}{k}"
        if k not in out:
            raise ConfigurationError(f"unknown config key {key!r}")
        if isinstance(out[k], dict) and v is not None:
            if not isinstance(v, dict):
                raise ConfigurationError(f"config key {key!r} must be a mapping")
            out[k] = _merge(out[k], v, key + ".")
        else:
            out[k] = v
    return out


def _set_dotted(cfg: dict, dotted: str, value):
    parts = dotted.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigurationError(f"unknown config key {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigurationError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def load_config(path: Optional[str], overrides: Sequence[str] = ()) -> dict:
    """Defaults, then the config file, then ``--dotted.key value`` overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config {path} is not valid YAML/JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigurationError("config file must hold a mapping")
        if "config" in raw and "manifest_version" in raw:
            raw = raw["config"]
        raw = {k: v for k, v in raw.items() if k != "command"}
        cfg = _merge(cfg, raw)
    it = iter(overrides)
    for flag in it:
        if not flag.startswith("--"):
            raise ConfigurationError(f"unexpected argument {flag!r}")
        key, eq, val = flag[2:].partition("=")
        if not eq:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigurationError(f"flag {flag} needs a value") from None
        _set_dotted(cfg, key, yaml.safe_load(val))
    return cfg


# -- data ingestion ---------------------------------------------------------------------

def read_dataset(path, response: str = "y") -> Dataset:
    """Read a comma-separated file with a header row; ``response`` becomes ``y``.

    Every other column is a covariate, in file order. Cells must parse as
    finite numbers; errors cite the file line (header is line 1) and column.
    """
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open dataset {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if response not in header:
            raise DataError(f"response column {response!r} not found; available: {', '.join(header)}")
        if len(set(header)) != len(header):
            raise DataError(f"duplicate column names in {path}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"line {line_no}: expected {len(header)} fields, found {len(row)}")
            vals = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise DataError(f"line {line_no}, column {col}: non-numeric value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, found {len(rows)}")
    table = np.array(rows)
    yi = header.index(response)
    xcols = [i for i in range(len(header)) if i != yi]
    if not xcols:
        raise DataError("no covariate columns besides the response")
    names = tuple(header[i] for i in xcols)
    log.info("read %d rows from %s: response %s, covariates %s", len(rows), path, response, ", ".join(names))
    return Dataset(table[:, xcols], table[:, yi], names)


def median_slice(data: Dataset, j: int, size: int, lo=None, hi=None) -> np.ndarray:
    """Points varying covariate ``j`` (0-based) over its 5%-95% quantile range,
    the others held at their medians."""
    if size < 2:
        raise ConfigurationError("slice needs at least 2 points")
    if not 0 <= j < data.d:
        raise ConfigurationError(f"slice variable {j} outside 0..{data.d - 1}")
    col = data.x[:, j]
    q_lo, q_hi = np.quantile(col, [0.05, 0.95])
    lo = q_lo if lo is None else float(lo)
    hi = q_hi if hi is None else float(hi)
    if not hi > lo:
        raise ConfigurationError(f"degenerate slice range [{lo}, {hi}] for column {data.names[j]}")
    pts = np.tile(np.median(data.x, axis=0), (size, 1))
    pts[:, j] = np.linspace(lo, hi, size)
    return pts


def _read_points(path, names) -> np.ndarray:
    ds = read_dataset_columns(path)
    header, table = ds
    missing = [n for n in names if n not in header]
    if missing:
        raise DataError(f"points file lacks columns {missing}")
    return table[:, [header.index(n) for n in names]]


def read_dataset_columns(path):
    """Header and numeric table of a CSV file (no response column)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    out = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise DataError(f"line {line_no}: non-numeric value") from None
        if len(vals) != len(header) or not all(math.isfinite(v) for v in vals):
            raise DataError(f"line {line_no}: expected {len(header)} finite numbers")
        out.append(vals)
    return header, np.array(out).reshape(len(out), len(header))


# -- curve files ------------------------------------------------------------------------

def _g(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else format(float(v), ".17g")


def curve_rows(curve: CurveEstimate, names) -> List[list]:
    rows = []
    for i, p in enumerate(curve.points):
        for c, j in enumerate(curve.variables):
            lo = curve.ci_lower[i, c] if curve.has_ci else None
            hi = curve.ci_upper[i, c] if curve.has_ci else None
            rows.append([_g(v) for v in p] + [names[j], _g(curve.values[i, c]), _g(lo), _g(hi), curve.method,
                                              "" if curve.alpha is None else _g(curve.alpha)])
    return rows


def write_curve_file(path, curves: Sequence[CurveEstimate], names) -> None:
    """Long-format CSV: coordinates, then variable, estimate, ci_lower, ci_upper, method, alpha."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(names) + list(CURVE_COLUMNS))
    for c in curves:
        w.writerows(curve_rows(c, names))
    atomic_write(path, buf.getvalue())


def read_curve_file(path):
    """Inverse of :func:`write_curve_file`: ``(names, [CurveEstimate, ...])`` by method and alpha."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    d = len(header) - len(CURVE_COLUMNS)
    if d < 1 or tuple(header[d:]) != CURVE_COLUMNS:
        raise DataError(f"{path} is not a curve file")
    names = header[:d]
    groups = {}
    for r in rows[1:]:
        key = (r[d + 4], r[d + 5])
        groups.setdefault(key, []).append(r)
    curves = []
    for (method, alpha), rs in groups.items():
        pts, seen = [], {}
        variables = []
        for r in rs:
            p = tuple(float(v) for v in r[:d])
            if p not in seen:
                seen[p] = len(pts)
                pts.append(p)
            j = names.index(r[d])
            if j not in variables:
                variables.append(j)
        m, k = len(pts), len(variables)
        vals = np.full((m, k), np.nan)
        lo = np.full((m, k), np.nan)
        hi = np.full((m, k), np.nan)
        for r in rs:
            i, c = seen[tuple(float(v) for v in r[:d])], variables.index(names.index(r[d]))
            vals[i, c], lo[i, c], hi[i, c] = float(r[d + 1]), float(r[d + 2]), float(r[d + 3])
        has_ci = not (np.all(np.isnan(lo)) and np.all(np.isnan(hi)))
        curves.append(CurveEstimate(np.array(pts), vals, method, lo if has_ci else None, hi if has_ci else None,
                                    float(alpha) if alpha else None, None, tuple(variables)))
    return names, curves


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- commands ---------------------------------------------------------------------------

def _spec(cfg):
    dc = cfg["data"]
    return make_dgp(dc["dgp"], rho=dc["rho"], d=dc["d"], error=dc["error"], error_scale=dc["error_scale"])


def _dataset(cfg):
    """Dataset plus the Gaussian law used for integration."""
    dc = cfg["data"]
    if dc["path"]:
        data = read_dataset(dc["path"], dc["response"])
        return data, None
    spec = _spec(cfg)
    return sample(spec, int(dc["n"]), cfg["seed"]), spec


def _variable_index(data: Dataset, v) -> int:
    if isinstance(v, str):
        if v not in data.names:
            raise ConfigurationError(f"unknown variable {v!r}; columns are {list(data.names)}")
        return data.names.index(v)
    v = int(v)
    if not 1 <= v <= data.d:
        raise ConfigurationError(f"variable {v} outside 1..{data.d}")
    return v - 1


def _points(cfg, data: Dataset) -> np.ndarray:
    ev = cfg["evaluation"]
    kind = ev["kind"]
    if kind == "slice":
        return median_slice(data, _variable_index(data, ev["variable"]), int(ev["size"]), ev["lo"], ev["hi"])
    if kind == "grid":
        lo = -2.0 if ev["lo"] is None else float(ev["lo"])
        hi = 2.0 if ev["hi"] is None else float(ev["hi"])
        if not hi > lo:
            raise ConfigurationError("grid needs lo < hi")
        axis = np.linspace(lo, hi, int(ev["size"]))
        mesh = np.meshgrid(*([axis] * data.d), indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)
    if kind == "points":
        if not ev["points_path"]:
            raise ConfigurationError("evaluation.points_path is required for kind=points")
        return as_points(_read_points(ev["points_path"], data.names), data.d)
    raise ConfigurationError(f"unknown evaluation kind {kind!r}")


def _plan(cfg, data):
    raw = cfg["bandwidth"]["plan"]
    if raw is None:
        return None
    h = {int(k): v for k, v in raw.items()}
    h.setdefault(0, [])
    return BandwidthPlan(data.d, h)


def _external_overlay(cfg, data: Dataset) -> Optional[CurveEstimate]:
    path = cfg["overlay"]["shap_csv"]
    if not path:
        return None
    header, table = read_dataset_columns(path)
    missing = [n for n in data.names if n not in header or f"shap_{n}" not in header]
    if missing:
        raise DataError(f"overlay {path} needs columns <name> and shap_<name> for {missing}")
    pts = table[:, [header.index(n) for n in data.names]]
    vals = table[:, [header.index(f"shap_{n}") for n in data.names]]
    return CurveEstimate(pts, vals, "external")


def _check_failures(cfg, curve: CurveEstimate):
    frac = float(np.mean(curve.failed)) if curve.failed.size else 0.0
    if frac > cfg["output"]["max_failed_fraction"]:
        raise EstimationError(f"{frac:.0%} of evaluation points failed")


def cmd_estimate(cfg, out: Path, meta: dict) -> List[Path]:
    data, spec = _dataset(cfg)
    pts = _points(cfg, data)
    curves = []
    if cfg["estimator"] == "component":
        model = fit_components(data, _plan(cfg, data))
        curve = estimate_curve(model, pts)
        if cfg["analytic"]["enabled"]:
            a = cfg["analytic"]
            curve = analytic_ci(data, model, pts, alpha=a["alpha"], bias_correct=a["bias_correct"])
            curve.method = "component"
    elif cfg["estimator"] == "integration":
        if cfg["law"] == "independent":
            law = "independent"
        elif cfg["law"] == "gaussian":
            law = spec.law if spec is not None else GaussianLaw.fit(data.x)
        else:
            raise ConfigurationError(f"unknown law {cfg['law']!r}")
        plan = _plan(cfg, data)
        model = fit_integration(data, law, h=None if plan is None else plan.full)
        curve = curve_from_model(model, pts)
    else:
        raise ConfigurationError(f"unknown estimator {cfg['estimator']!r}")
    curves.append(curve)
    overlay = _external_overlay(cfg, data)
    if overlay is not None:
        curves.append(overlay)
    path = out / "curves.csv"
    write_curve_file(path, curves, data.names)
    _check_failures(cfg, curve)
    return [path]


def cmd_bootstrap(cfg, out: Path, meta: dict) -> List[Path]:
    data, _ = _dataset(cfg)
    pts = _points(cfg, data)
    model = fit_components(data, _plan(cfg, data))
    b = cfg["bootstrap"]
    bcfg = BootstrapConfig(b_reps=int(b["b_reps"]), alpha=float(b["alpha"]), seed=cfg["seed"],
                           independent_v_per_subset=bool(b["independent_v_per_subset"]))
    res = wild_bootstrap_ci(data, model, pts, bcfg)
    curve = res.as_curve()
    curves = [curve]
    overlay = _external_overlay(cfg, data)
    if overlay is not None:
        curves.append(overlay)
    paths = [out / "curves.csv", out / "variance_shares.csv"]
    write_curve_file(paths[0], curves, data.names)
    dec = bootstrap_variance_decomposition(res)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(data.names) + ["variable", "subset", "share", "total_variance"])
    for i, v, bits, share in dec.rows():
        subset = "{" + ",".join(data.names[k] for k in range(data.d) if bits >> k & 1) + "}"
        w.writerow([_g(x) for x in pts[i]] + [data.names[v], subset, _g(share),
                                               _g(dec.total_variance[i, dec.variables.index(v)])])
    atomic_write(paths[1], buf.getvalue())
    _check_failures(cfg, curve)
    return paths


def _sim_variables(cfg):
    v = cfg["simulation"]["variables"]
    return None if v is None else tuple(int(j) - 1 for j in v)


def _ns(cfg):
    n = cfg["simulation"]["n"]
    return [int(n)] if np.isscalar(n) else [int(x) for x in n]


def _write_report(out: Path, cells, text: str, meta: dict) -> List[Path]:
    # timings vary run to run; they go to the manifest so result files stay reproducible
    rep = ExperimentReport(cells, {}, 0)
    paths = [out / "report.csv", out / "report.txt"]
    atomic_write(paths[0], rep.to_csv(timing=False))
    atomic_write(paths[1], text)
    meta["seconds_per_replication"] = [
        {"n": c.n, "estimator": c.estimator, "variable": c.variable, "statistic": c.statistic,
         "seconds": c.seconds} for c in cells]
    return paths


def cmd_simulate_mise(cfg, out: Path, meta: dict) -> List[Path]:
    spec = _spec(cfg)
    sc = cfg["simulation"]
    region = Region(**sc["region"])
    cells, text = [], ""
    for n in _ns(cfg):
        rep = run_mise(MiseConfig(spec, n, int(sc["reps"]), sc["estimator"], _sim_variables(cfg), region,
                                  sc["method"], cfg["seed"], int(sc["n_jobs"])))
        cells += rep.cells
        text += rep.to_text()
    return _write_report(out, cells, text, meta)


def cmd_simulate_coverage(cfg, out: Path, meta: dict) -> List[Path]:
    spec = _spec(cfg)
    sc = cfg["simulation"]
    cells, text = [], ""
    for n in _ns(cfg):
        rep = run_coverage(CoverageConfig(spec, n, int(sc["reps"]), int(sc["b_reps"]), tuple(sc["point"]),
                                          tuple(float(a) for a in sc["alphas"]), _sim_variables(cfg),
                                          cfg["seed"], int(sc["n_jobs"]),
                                          bool(cfg["bootstrap"]["independent_v_per_subset"])))
        cells += rep.cells
        text += rep.to_text()
    return _write_report(out, cells, text, meta)


def cmd_cumulative(cfg, out: Path, meta: dict) -> List[Path]:
    data, _ = _dataset(cfg)
    pts = _points(cfg, data)
    model = fit_components(data, _plan(cfg, data))
    order = cfg["cumulative"]["order"]
    order = list(range(data.d)) if order is None else [_variable_index(data, v) for v in order]
    stacked = cumulative_curves(model, order, pts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(data.names) + ["step", "label", "value"])
    labels = ["ybar"] + ["+" + data.names[j] for j in order]
    for i, p in enumerate(pts):
        for k in range(stacked.shape[0]):
            w.writerow([_g(x) for x in p] + [k, labels[k], _g(stacked[k, i])])
    path = out / "cumulative.csv"
    atomic_write(path, buf.getvalue())
    return [path]


def cmd_population(cfg, out: Path, meta: dict) -> List[Path]:
    spec = _spec(cfg)
    data = sample(spec, max(int(cfg["data"]["n"]), 2), cfg["seed"])
    pts = _points(cfg, data)
    method = cfg["population"]["method"]
    pc = PopulationCurve(spec, method)
    curve = CurveEstimate(pts, pc.evaluate(pts), f"population_{method}")
    path = out / "curves.csv"
    write_curve_file(path, [curve], data.names)
    return [path]


HANDLERS = {"estimate": cmd_estimate, "bootstrap-ci": cmd_bootstrap, "simulate-mise": cmd_simulate_mise,
            "simulate-coverage": cmd_simulate_coverage, "cumulative": cmd_cumulative,
            "population": cmd_population}


def _manifest(command, cfg, outputs, seconds, meta) -> str:
    doc = {
        "manifest_version": 1,
        "command": command,
        "seed": cfg["seed"],
        "config": cfg,
        "outputs": [str(p.name) for p in outputs],
        "versions": {"shapley_curves": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "wall_clock_seconds": seconds,
        **meta,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run(command: str, cfg: dict) -> int:
    """Execute one command with a fully merged config; returns the exit status."""
    if command not in HANDLERS:
        raise ConfigurationError(f"unknown command {command!r}")
    cfg = copy.deepcopy(cfg)
    if cfg["seed"] is None:
        cfg["seed"] = int(np.random.SeedSequence().generate_state(1)[0])
        log.info("no seed given; drew %d", cfg["seed"])
    cfg["seed"] = int(cfg["seed"])
    out = Path(cfg["output"]["dir"])
    t0 = time.perf_counter()
    status = EXIT_OK
    outputs: List[Path] = []
    meta: dict = {}
    try:
        outputs = HANDLERS[command](cfg, out, meta)
    except EstimationError as exc:
        log.error("estimation failed: %s", exc)
        status = EXIT_ESTIMATION
        outputs = [p for p in (out / "curves.csv", out / "variance_shares.csv") if p.exists()]
    atomic_write(out / "manifest.json", _manifest(command, cfg, outputs, time.perf_counter() - t0, meta))
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="shapley-curves", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="YAML/JSON config file or a previous manifest.json")
    parser.add_argument("-v", "--verbose", action="store_true")
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, rest)
        return run(args.command, cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ShapleyCurvesError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
