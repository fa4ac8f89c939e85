"""Randomized property checks."""
import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from shapley_curves import BandwidthPlan, Dataset, LocalFit, all_subsets, combine, estimate_curve, fit_components
from shapley_curves.weights import weight_table

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@given(d=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
@SETTINGS
def test_combine_sums_to_full_minus_empty(d, seed):
    comps = np.random.default_rng(seed).normal(size=(3, 1 << d))
    phi = combine(comps, d)
    np.testing.assert_allclose(phi.sum(axis=1), comps[:, -1] - comps[:, 0], atol=1e-10)


@given(d=st.integers(1, 8), shift=st.floats(-1e3, 1e3))
@SETTINGS
def test_constant_shift_of_components_cancels(d, shift):
    comps = np.random.default_rng(d).normal(size=(2, 1 << d))
    np.testing.assert_allclose(combine(comps + shift, d), combine(comps, d), atol=1e-9 * (1 + abs(shift)))
    assert np.allclose(weight_table(d).sum(axis=1), 0.0, atol=1e-12)


@given(n=st.integers(20, 60), d=st.integers(1, 3), h=st.floats(0.3, 3.0), seed=st.integers(0, 10_000))
@SETTINGS
def test_efficiency_on_random_fits(n, d, h, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    ds = Dataset(x, rng.normal(size=n))
    plan = BandwidthPlan(d, {s.bits: [h] * len(s) for s in all_subsets(d)})
    model = fit_components(ds, plan)
    pts = rng.normal(scale=0.5, size=(5, d))
    est = estimate_curve(model, pts)
    full, ok = model.full.evaluate(pts)
    keep = ~est.failed
    np.testing.assert_allclose(est.values[keep].sum(axis=1), full[keep] - model.ybar, atol=1e-10)


@given(a=st.floats(-5, 5), b=st.floats(-5, 5), h=st.floats(0.2, 5.0), seed=st.integers(0, 10_000))
@SETTINGS
def test_local_linear_reproduces_affine(a, b, h, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(40, 2))
    y = a + b * x[:, 0] - 0.5 * x[:, 1]
    fit = LocalFit(x, y, [h, h])
    q = rng.uniform(-0.8, 0.8, size=(6, 2))
    vals, ok = fit.evaluate(q)
    target = a + b * q[:, 0] - 0.5 * q[:, 1]
    np.testing.assert_allclose(vals[ok], target[ok], atol=1e-8 * (1 + np.abs(target[ok]).max(initial=0)))
