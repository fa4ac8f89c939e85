import numpy as np
import pytest

from shapley_curves import (
    BandwidthPlan,
    ConfigurationError,
    Dataset,
    SubsetMask,
    all_subsets,
    estimate_curve,
    fit_components,
    select_bandwidths,
)
from shapley_curves.component import evaluate_components, weighted_sum_residual
from shapley_curves.weights import combine

from conftest import make_dataset


@pytest.fixture(scope="module")
def model3():
    return fit_components(make_dataset(200, 3, seed=3))


def test_efficiency_identity(model3):
    pts = np.random.default_rng(1).normal(size=(50, 3))
    est = estimate_curve(model3, pts)
    assert not est.failed.any()
    full, _ = model3.full.evaluate(pts)
    np.testing.assert_allclose(est.values.sum(axis=1), full - model3.ybar, atol=1e-10)


def test_d1_collapse_exact():
    model = fit_components(make_dataset(80, 1, seed=5))
    pts = np.linspace(-1, 1, 9)[:, None]
    est = estimate_curve(model, pts)
    full, _ = model.full.evaluate(pts)
    assert np.array_equal(est.values[:, 0], full - model.ybar)


def test_swap_symmetry():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(60, 2))
    x = np.vstack([a, a[:, ::-1]])
    y = np.tile(np.sin(a[:, 0]) * np.sin(a[:, 1]) + rng.normal(size=60), 2)
    plan = BandwidthPlan(2, {0: [], 1: [0.7], 2: [0.7], 3: [0.8, 0.8]})
    model = fit_components(Dataset(x, y), plan)
    pts = rng.normal(size=(10, 2))
    phi = estimate_curve(model, pts).values
    phi_swapped = estimate_curve(model, pts[:, ::-1]).values
    np.testing.assert_allclose(phi[:, 0], phi_swapped[:, 1], atol=1e-12)


def test_null_feature_with_oracle_components():
    # y depends on x1 only; the true component is sin(x1) when x1 is in s, E sin(X1) = 0 otherwise
    fits = {s.bits: ((lambda p: np.sin(p[:, 0])) if 0 in s else (lambda p: np.zeros(len(p))))
            for s in all_subsets(2)}
    pts = np.random.default_rng(2).normal(size=(20, 2))
    phi = combine(evaluate_components(fits, 2, pts), 2)
    assert np.all(phi[:, 1] == 0)
    np.testing.assert_allclose(phi[:, 0], np.sin(pts[:, 0]))


def test_components_evaluated_once_per_distinct_point():
    calls = {}

    def counter(bits):
        def f(p):
            calls[bits] = calls.get(bits, 0) + len(p)
            return p.sum(axis=1)
        return f

    fits = {b: counter(b) for b in range(4)}
    axis = np.array([0.0, 1.0, 2.0])
    pts = np.array([[a, b] for a in axis for b in axis])
    evaluate_components(fits, 2, pts)
    assert calls == {0: 1, 1: 3, 2: 3, 3: 9}


def test_failed_points_are_flagged():
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, (50, 2))
    plan = BandwidthPlan(2, {0: [], 1: [0.05], 2: [0.05], 3: [0.05, 0.05]})
    model = fit_components(Dataset(x, x[:, 0] + rng.normal(size=50)), plan)
    est = estimate_curve(model, np.array([[0.0, 0.0], [40.0, 40.0]]))
    assert est.failed.tolist() == [False, True]
    assert np.all(np.isnan(est.values[1])) and np.all(np.isfinite(est.values[0]))


def test_weighted_sum_residual_adds_up(model3):
    point = np.array([0.2, -0.4, 0.9])
    zero = weighted_sum_residual(model3, lambda s, xs: 0.0, point, 1)
    est = estimate_curve(model3, point[None, :], j=1).values[0, 0]
    assert zero.sum() == pytest.approx(est, abs=1e-12)
    assert zero.shape == (8,)


def test_parallel_bandwidth_selection_matches_serial():
    ds = make_dataset(120, 2, seed=8)
    a, b = select_bandwidths(ds, n_jobs=1), select_bandwidths(ds, n_jobs=2)
    assert all(np.array_equal(a.h[k], b.h[k]) for k in a.h)


def test_with_response_keeps_plan(model3):
    y = model3.data.y + 5.0
    shifted = model3.with_response(y)
    pts = np.zeros((1, 3))
    a, b = estimate_curve(model3, pts).values, estimate_curve(shifted, pts).values
    np.testing.assert_allclose(a, b, atol=1e-10)
    assert shifted.ybar == pytest.approx(model3.ybar + 5.0)


def test_plan_mismatch_rejected():
    ds = make_dataset(30, 2)
    with pytest.raises(ConfigurationError):
        fit_components(ds, BandwidthPlan(3, {0: []}))
    with pytest.raises(ConfigurationError):
        fit_components(ds, BandwidthPlan(2, {0: [], 1: [1.0]}))
