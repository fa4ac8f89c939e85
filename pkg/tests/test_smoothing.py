import math

import numpy as np
import pytest
from scipy import integrate

from shapley_curves import (
    GAUSSIAN,
    BandwidthPlan,
    ConfigurationError,
    Dataset,
    EstimationError,
    LocalFit,
    curvature_bias,
    kde,
    local_linear_fit,
    local_variance,
    loo_cv_bandwidth,
    second_derivatives,
)
from shapley_curves import kernels
from shapley_curves.smoothing import cv_score, default_grids, loglog_oversmoothing_factor, rule_of_thumb

BACKENDS = kernels.available_backends()


def test_compiled_backend_present():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
def test_symmetric_three_point_fixture(backend):
    # weighted least squares by hand: intercept 2 e^{-1/2} / (1 + 2 e^{-1/2})
    k = kernels.get_backend(backend)
    x = np.array([[-1.0], [0.0], [1.0]])
    v, ok = k.loclin_eval(x, np.array([1.0, 0.0, 1.0]), np.array([1.0]), np.array([[0.0]]))
    assert ok[0]
    assert v[0] == pytest.approx(0.548137238122394, abs=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_asymmetric_three_point_fixture(backend):
    k = kernels.get_backend(backend)
    x = np.array([[0.0], [1.0], [3.0]])
    v, _ = k.loclin_eval(x, np.array([2.0, -1.0, 4.0]), np.array([0.8]), np.array([[0.5]]))
    # the 1e-10 ridge on the slope block moves the intercept at the 1e-10 level
    assert v[0] == pytest.approx(0.5452371875945613, abs=1e-9)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_affine_targets_reproduced(d, rng):
    x = rng.normal(size=(80, d))
    beta = rng.normal(size=d)
    y = 1.7 + x @ beta
    fit = LocalFit(x, y, rng.uniform(0.3, 2.0, d))
    q = rng.normal(size=(25, d))
    np.testing.assert_allclose(fit(q), 1.7 + q @ beta, atol=1e-8)


def test_weights_normalised_and_linear(rng):
    x = rng.normal(size=(60, 2))
    y = np.sin(x[:, 0]) + rng.normal(size=60)
    fit = LocalFit(x, y, [0.5, 0.8])
    q = rng.normal(size=(10, 2))
    W, ok = fit.weights(q)
    assert ok.all()
    np.testing.assert_allclose(W.sum(axis=1), 1.0, rtol=0, atol=1e-13)
    np.testing.assert_allclose(W @ y, fit(q), atol=1e-12)


def test_weights_reproduce_design_moments(rng):
    x = rng.normal(size=(60, 2))
    fit = LocalFit(x, np.zeros(60), [0.6, 0.6])
    q = rng.normal(size=(5, 2))
    W, _ = fit.weights(q)
    # local linear weights annihilate centred linear terms
    np.testing.assert_allclose(W @ x, q, atol=1e-10)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_backends_agree(rng):
    c, p = kernels.get_backend("cython"), kernels.get_backend("python")
    x = np.ascontiguousarray(rng.normal(size=(150, 3)))
    y = x[:, 0] ** 2 - x[:, 1] + rng.normal(size=150)
    h = np.array([0.4, 0.9, 1.3])
    q = np.ascontiguousarray(rng.normal(size=(20, 3)))
    for a, b in [(c.loclin_eval(x, y, h, q), p.loclin_eval(x, y, h, q)),
                 (c.loo_predict(x, y, h), p.loo_predict(x, y, h)),
                 (c.loclin_weights(x, h, q), p.loclin_weights(x, h, q))]:
        np.testing.assert_array_equal(a[1], b[1])
        np.testing.assert_allclose(a[0], b[0], rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_loo_matches_explicit_deletion(backend, rng):
    k = kernels.get_backend(backend)
    x = np.ascontiguousarray(rng.normal(size=(30, 2)))
    y = rng.normal(size=30)
    h = np.array([0.7, 0.9])
    pred, ok = k.loo_predict(x, y, h)
    assert ok.all()
    for i in (0, 11, 29):
        keep = np.arange(30) != i
        v, _ = k.loclin_eval(np.ascontiguousarray(x[keep]), y[keep], h, x[i:i + 1])
        assert pred[i] == pytest.approx(v[0], abs=1e-11)


def test_failure_far_from_data():
    fit = LocalFit(np.array([[0.0], [0.1], [0.2]]), np.array([1.0, 2.0, 3.0]), [0.01])
    v, ok = fit.evaluate(np.array([[50.0]]))
    assert not ok[0] and np.isnan(v[0])
    with pytest.raises(EstimationError):
        fit(np.array([[50.0]]))


def test_empty_subset_fit_is_mean():
    fit = LocalFit(np.empty((4, 0)), np.array([1.0, 2.0, 3.0, 6.0]), [])
    v, ok = fit.evaluate(np.empty((3, 0)))
    assert v.tolist() == [3.0, 3.0, 3.0] and ok.all()
    W, _ = fit.weights(np.empty((1, 0)))
    assert W.tolist() == [[0.25] * 4]


def test_kernel_constants_by_quadrature():
    mu2, _ = integrate.quad(lambda u: u * u * GAUSSIAN(u), -np.inf, np.inf, epsabs=1e-13)
    l2, _ = integrate.quad(lambda u: GAUSSIAN(u) ** 2, -np.inf, np.inf, epsabs=1e-13)
    mass, _ = integrate.quad(GAUSSIAN, -np.inf, np.inf, epsabs=1e-13)
    assert abs(mu2 - GAUSSIAN.mu2) < 1e-10
    assert abs(l2 - GAUSSIAN.l2sq) < 1e-10
    assert abs(l2 - 1 / (2 * math.sqrt(math.pi))) < 1e-10
    assert abs(mass - 1) < 1e-10


def test_local_linear_fit_checks_size():
    with pytest.raises(ConfigurationError):
        local_linear_fit(Dataset(np.zeros((3, 2)), np.zeros(3)), [1.0, 1.0])


def test_rule_of_thumb_and_grids():
    x = np.column_stack([np.linspace(-1, 1, 101), np.linspace(0, 10, 101)])
    anchor = rule_of_thumb(x)
    np.testing.assert_allclose(anchor, x.std(axis=0, ddof=1) * 101 ** (-1 / 6))
    grids = default_grids(x)
    assert len(grids) == 2 and all(g.size == 25 for g in grids)
    np.testing.assert_allclose(grids[0][[0, -1]], anchor[0] * np.array([0.1, 10.0]))


def test_cv_score_flags_failures():
    x = np.array([[0.0], [1.0], [2.0], [50.0]])
    assert cv_score(x, np.arange(4.0), [0.05]) == math.inf


def test_loo_cv_picks_from_grid_and_is_deterministic(rng):
    x = rng.uniform(-2, 2, (150, 1))
    y = np.sin(2 * x[:, 0]) + 0.3 * rng.normal(size=150)
    ds = Dataset(x, y)
    grid = [np.array([0.05, 0.1, 0.2, 0.4, 0.8, 1.6])]
    h = loo_cv_bandwidth(ds, grid)
    assert h[0] in grid[0]
    scores = [cv_score(x, y, [g]) for g in grid[0]]
    assert h[0] == grid[0][int(np.argmin(scores))]
    assert np.array_equal(h, loo_cv_bandwidth(ds, grid))


def test_loo_cv_multivariate_is_coordinatewise_optimum(rng):
    x = rng.normal(size=(120, 2))
    y = np.sin(x[:, 0]) + 0.1 * x[:, 1] + 0.3 * rng.normal(size=120)
    ds = Dataset(x, y)
    h = loo_cv_bandwidth(ds)
    grids = default_grids(x)
    for k in range(2):
        i = int(np.flatnonzero(np.isclose(grids[k], h[k]))[0])
        base = cv_score(x, y, h)
        for j in (i - 1, i + 1):
            if 0 <= j < grids[k].size:
                alt = h.copy()
                alt[k] = grids[k][j]
                assert cv_score(x, y, alt) >= base


def test_bandwidth_plan_roundtrip_and_oversmoothing():
    plan = BandwidthPlan(2, {0: [], 1: [0.5], 2: [0.7], 3: [0.4, 0.6]})
    again = BandwidthPlan.from_dict(plan.to_dict())
    assert all(np.array_equal(plan.h[b], again.h[b]) for b in range(4))
    g = plan.with_oversmoothing(3.0)
    np.testing.assert_allclose(g.g[3], [1.2, 1.8])
    assert BandwidthPlan.from_dict(g.to_dict()).g[1].tolist() == [1.5]
    with pytest.raises(ConfigurationError):
        plan.with_oversmoothing(0.5)
    with pytest.raises(ConfigurationError):
        BandwidthPlan(1, {0: [], 1: [1.0]}, {1: [0.5]})


def test_oversmoothing_factor():
    assert loglog_oversmoothing_factor(250) == pytest.approx(4 * math.log(math.log(250)))
    assert loglog_oversmoothing_factor(2000) > loglog_oversmoothing_factor(250)


def test_kde_integrates_to_one(rng):
    f = kde(rng.normal(size=(200, 1)), [0.3])
    mass, _ = integrate.quad(lambda t: f(np.array([[t]]))[0], -8, 8, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_local_variance_homoskedastic(rng):
    x = rng.uniform(-2, 2, (3000, 1))
    y = 0.5 * x[:, 0] + 0.7 * rng.normal(size=3000)
    ds = Dataset(x, y)
    fit = LocalFit(x, y, [0.5])
    s2 = local_variance(ds, fit)
    np.testing.assert_allclose(s2(np.array([[-1.0], [0.0], [1.0]])), 0.49, rtol=0.15)


def test_second_derivatives_quadratic():
    f = lambda p: 3 * p[:, 0] ** 2 - p[:, 1] ** 2 + p[:, 0] * p[:, 1]
    np.testing.assert_allclose(second_derivatives(f, [0.3, -0.2], step=[0.1, 0.2]), [6.0, -2.0], atol=1e-9)


def test_curvature_bias_on_noise_free_quadratic(rng):
    x = np.linspace(-3, 3, 601)[:, None]
    fit = LocalFit(x, x[:, 0] ** 2, [0.3])
    # d2/dx2 of a local linear fit to x^2 is 2 in the interior; bias = mu2/2 * h^2 * 2
    assert curvature_bias(fit, [0.0]) == pytest.approx(0.09, rel=0.05)
