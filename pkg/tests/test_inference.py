import math

import numpy as np
import pytest
from scipy.stats import norm

from shapley_curves import ConfigurationError, fit_components, make_dgp, sample
from shapley_curves.inference import (
    MAMMEN_HIGH,
    MAMMEN_LOW,
    BootstrapConfig,
    _ci,
    analytic_ci,
    bootstrap_variance_decomposition,
    mammen_draw,
    replicate_weights,
    wild_bootstrap_ci,
)

from conftest import make_dataset

POINTS = np.array([[0.0, 0.0], [-0.5, 0.5], [1.0, -1.0]])


@pytest.fixture(scope="module")
def model():
    return fit_components(sample(make_dgp("dgp3_bivariate"), 200, 11))


def test_mammen_support_and_moments():
    v = mammen_draw(np.random.default_rng(0), 200_000)
    assert set(np.unique(v)) == {MAMMEN_LOW, MAMMEN_HIGH}
    assert abs(v.mean()) < 0.01
    assert v.var() == pytest.approx(1, abs=0.01)
    assert (v ** 3).mean() == pytest.approx(1, abs=0.03)
    assert mammen_draw(np.random.default_rng(0)) in (MAMMEN_LOW, MAMMEN_HIGH)


def test_shared_and_independent_weights():
    shared = replicate_weights(5, 30, 2)
    assert shared.shape == (4, 30) and np.all(shared == shared[0])
    indep = replicate_weights(5, 30, 2, independent=True)
    assert indep.shape == (4, 30) and not np.all(indep == indep[0])


def test_zero_residuals_give_zero_width(model):
    zeros = {b: np.zeros(model.data.n) for b in range(4)}
    res = wild_bootstrap_ci(None, model, POINTS, BootstrapConfig(b_reps=100, seed=1), residuals=zeros)
    np.testing.assert_allclose(res.upper - res.lower, 0, atol=1e-12)


def test_alpha_nesting_and_shapes(model):
    res = wild_bootstrap_ci(None, model, POINTS, BootstrapConfig(b_reps=200, seed=2))
    assert res.replicates.shape == (200, 3, 2) and res.subset_terms.shape == (200, 3, 4)
    lo10, hi10 = res.quantile_ci(0.10)
    assert np.all(lo10 >= res.lower) and np.all(hi10 <= res.upper)
    assert np.all(res.lower <= res.upper)
    curve = res.as_curve()
    assert curve.ci_lower is res.lower and not curve.failed.any()


def test_response_shift_leaves_widths_unchanged(model):
    cfg = BootstrapConfig(b_reps=100, seed=3)
    a = wild_bootstrap_ci(None, model, POINTS, cfg)
    shifted = model.with_response(model.data.y + 10.0)
    b = wild_bootstrap_ci(None, shifted, POINTS, cfg)
    np.testing.assert_allclose(a.upper - a.lower, b.upper - b.lower, atol=1e-9)
    np.testing.assert_allclose(a.estimate, b.estimate, atol=1e-9)


def test_only_full_subset_random_gives_full_share(model):
    resid = {b: np.zeros(model.data.n) for b in range(3)}
    res = wild_bootstrap_ci(None, model, POINTS, BootstrapConfig(b_reps=100, seed=4), residuals=resid)
    dec = bootstrap_variance_decomposition(res)
    np.testing.assert_allclose(dec.full_share, 1.0, atol=1e-10)


def test_shares_sum_to_one(model):
    res = wild_bootstrap_ci(None, model, POINTS, BootstrapConfig(b_reps=100, seed=5))
    dec = bootstrap_variance_decomposition(res)
    np.testing.assert_allclose(dec.shares.sum(axis=2), 1.0, atol=1e-10)
    assert len(list(dec.rows())) == 3 * 2 * 4


def test_width_stable_in_replicate_count(model):
    w1 = wild_bootstrap_ci(None, model, POINTS, BootstrapConfig(b_reps=500, seed=6))
    w4 = wild_bootstrap_ci(None, model, POINTS, BootstrapConfig(b_reps=2000, seed=7))
    ratio = (w1.upper - w1.lower) / (w4.upper - w4.lower)
    assert np.all(np.abs(ratio - 1) < 0.2)


def test_seed_determinism(model):
    cfg = BootstrapConfig(b_reps=50, seed=8)
    a = wild_bootstrap_ci(None, model, POINTS, cfg)
    b = wild_bootstrap_ci(None, model, POINTS, cfg)
    assert np.array_equal(a.replicates, b.replicates) and np.array_equal(a.seeds, b.seeds)
    c = wild_bootstrap_ci(None, model, POINTS, BootstrapConfig(b_reps=50, seed=9))
    assert not np.array_equal(a.replicates, c.replicates)


def test_config_validation(model):
    with pytest.raises(ConfigurationError):
        BootstrapConfig(alpha=1.5)
    with pytest.raises(ConfigurationError):
        BootstrapConfig(b_reps=10, alpha=0.05)
    with pytest.raises(ConfigurationError):
        BootstrapConfig(oversmooth="explicit")
    other = make_dataset(200, 2, seed=1)
    with pytest.raises(ConfigurationError):
        wild_bootstrap_ci(other, model, POINTS, BootstrapConfig(b_reps=50))


def test_explicit_oversmoothing_equal_to_h_centres_offsets(model):
    g = {b: np.asarray(h) for b, h in model.plan.h.items()}
    cfg = BootstrapConfig(b_reps=50, seed=1, oversmooth="explicit", g=g)
    res = wild_bootstrap_ci(None, model, POINTS, cfg)
    np.testing.assert_allclose(res.reference, res.estimate, atol=1e-10)


def test_too_many_failed_replicates_mark_nan():
    reps = np.random.default_rng(0).normal(size=(100, 2, 1))
    reps[:6, 0, 0] = np.nan
    reps[:3, 1, 0] = np.nan
    lo, hi = _ci(np.zeros((2, 1)), reps, 0.05)
    assert np.isnan(lo[0, 0]) and np.isfinite(lo[1, 0]) and np.isfinite(hi[1, 0])


def test_analytic_formula_and_degenerate_variance(model):
    n, h = model.data.n, model.full.h
    const = lambda p: np.full(len(p), 2.0)
    ci = analytic_ci(None, model, POINTS, sigma2=const, density=lambda p: np.full(len(p), 0.5))
    expected = norm.ppf(0.975) * math.sqrt(model_norm(2) * 2.0 / (4 * 0.5) / (n * np.prod(h)))
    np.testing.assert_allclose((ci.ci_upper - ci.ci_lower) / 2, expected, rtol=1e-12)
    zero = analytic_ci(None, model, POINTS, sigma2=lambda p: np.zeros(len(p)))
    np.testing.assert_allclose(zero.ci_upper, zero.ci_lower, atol=0)
    empty = analytic_ci(None, model, POINTS, density=lambda p: np.zeros(len(p)))
    assert empty.failed.all() and np.isnan(empty.ci_lower).all()


def model_norm(d):
    return (1 / (2 * math.sqrt(math.pi))) ** d


def test_analytic_bias_correction_shifts_centre(model):
    a = analytic_ci(None, model, POINTS)
    b = analytic_ci(None, model, POINTS, bias_correct=True)
    np.testing.assert_allclose(a.ci_upper - a.ci_lower, b.ci_upper - b.ci_lower, atol=1e-12)
    assert not np.allclose(a.ci_lower, b.ci_lower)
    np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.slow
def test_analytic_and_bootstrap_widths_comparable_at_large_n():
    m = fit_components(sample(make_dgp("dgp3_bivariate"), 2000, 21))
    pts = np.array([[0.0, 0.0], [-0.5, -0.5]])
    boot = wild_bootstrap_ci(None, m, pts, BootstrapConfig(b_reps=300, seed=1))
    ana = analytic_ci(None, m, pts)
    ratio = (ana.ci_upper - ana.ci_lower) / (boot.upper - boot.lower)
    assert np.all((ratio > 0.5) & (ratio < 2.0)), ratio
