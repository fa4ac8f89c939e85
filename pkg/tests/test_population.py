import math
import pickle

import numpy as np
import pytest

from shapley_curves import ConfigurationError, SubsetMask, make_dgp, population_curve, sample
from shapley_curves.integration import QuadratureRule
from shapley_curves.population import (
    DGP_IDS,
    CapabilityError,
    PopulationCurve,
    brute_force_curve,
    true_component,
)


def test_threshold_example_values():
    curve = population_curve(make_dgp("threshold_example"), "closed_form")
    assert curve(0, [1.0, -1.0]) == pytest.approx(2.5, abs=1e-12)
    assert curve(1, [1.0, -1.0]) == pytest.approx(0.5, abs=1e-12)


def test_threshold_closed_form_matches_quadrature():
    spec = make_dgp("threshold_example", theta=1.5, C=0.3, psi=-0.5)
    pts = np.random.default_rng(0).normal(size=(25, 2))
    a = population_curve(spec, "closed_form").evaluate(pts)
    b = population_curve(spec, "quadrature").evaluate(pts)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_dgp1_single_component():
    spec = make_dgp("dgp1_additive")
    v = true_component(spec, SubsetMask(4, 3), [[0.7]])
    assert v[0] == pytest.approx(0.7 + math.exp(-8), abs=1e-12)


@pytest.mark.parametrize("id_", ["dgp1_additive", "dgp3_bivariate"])
def test_closed_forms_match_quadrature(id_):
    spec = make_dgp(id_)
    pts = np.random.default_rng(1).uniform(-2, 2, (30, spec.d))
    a = population_curve(spec, "closed_form").evaluate(pts)
    b = population_curve(spec).evaluate(pts)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_closed_form_capability_error():
    with pytest.raises(CapabilityError):
        population_curve(make_dgp("dgp2_interactive"), "closed_form")
    with pytest.raises(CapabilityError):
        population_curve(make_dgp("dgp1_additive", rho=0.5), "closed_form")


@pytest.mark.parametrize("id_,rho", [("dgp1_additive", 0.0), ("dgp2_interactive", 0.8), ("dgp3_bivariate", 0.5),
                                     ("dgp4_additive_d", 0.3), ("dgp5_interactive_d", 0.5)])
def test_additivity(id_, rho):
    spec = make_dgp(id_, rho=rho)
    curve = population_curve(spec)
    pts = np.random.default_rng(2).uniform(-2, 2, (20, spec.d))
    phi = curve.evaluate(pts)
    np.testing.assert_allclose(phi.sum(axis=1), spec.m(pts) - curve.mean(), atol=1e-8)


def test_term_wise_and_whole_function_quadrature_agree():
    spec = make_dgp("dgp2_interactive", rho=0.5)
    s = SubsetMask(1, 3)
    xs = np.array([[0.4], [-1.1]])
    a = true_component(spec, s, xs)
    b = true_component(spec, s, xs, rule=QuadratureRule("gauss_hermite_product", nodes=40))
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_brute_force_agrees_and_se_scales():
    spec = make_dgp("dgp3_bivariate", rho=0.5)
    x = np.array([0.3, -0.8])
    truth = population_curve(spec)(0, x)
    v1, se1 = brute_force_curve(spec, 0, x, draws=40_000, seed=1)
    v4, se4 = brute_force_curve(spec, 0, x, draws=160_000, seed=1)
    assert abs(v1 - truth) < 4 * se1 and abs(v4 - truth) < 4 * se4
    assert se4 / se1 == pytest.approx(0.5, rel=0.05)
    with pytest.raises(ConfigurationError):
        brute_force_curve(spec, 0, x, draws=100)


def test_brute_force_is_seed_deterministic_and_thread_independent():
    spec = make_dgp("dgp2_interactive")
    x = np.array([0.1, 0.2, 0.3])
    a = brute_force_curve(spec, 1, x, draws=50_000, seed=4)
    b = brute_force_curve(spec, 1, x, draws=50_000, seed=4, n_jobs=3)
    assert a == b


def test_sample_determinism_and_correlation():
    spec = make_dgp("dgp2_interactive", rho=0.8)
    a, b = sample(spec, 500, 7), sample(spec, 500, 7)
    assert a.equals(b)
    assert not a.equals(sample(spec, 500, 8))
    big = sample(spec, 200_000, 0)
    corr = np.corrcoef(big.x, rowvar=False)
    assert np.all(np.abs(corr[np.triu_indices(3, 1)] - 0.8) < 0.01)
    quiet = sample(make_dgp("dgp1_additive", error_scale=0.0), 50, 1)
    np.testing.assert_allclose(quiet.y, make_dgp("dgp1_additive").m(quiet.x))


def test_student_errors_have_heavier_tails():
    spec = make_dgp("dgp1_additive", error="student_t5")
    ds = sample(spec, 100_000, 3)
    eps = ds.y - spec.m(ds.x)
    assert eps.var() == pytest.approx(5 / 3, rel=0.05)


def test_dgp4_sign_symmetry():
    spec = make_dgp("dgp4_additive_d", d=4)
    curve = population_curve(spec)
    t = np.full((1, 4), 0.13)
    phi = curve.evaluate(t)[0]
    assert phi[0] == pytest.approx(-phi[1], abs=1e-10)
    assert phi[2] == pytest.approx(-phi[3], abs=1e-10)


def test_example_structure_of_interactive_model():
    # with independent covariates an interaction only moves the curves of its own variables
    spec = make_dgp("dgp2_interactive")
    pts = np.random.default_rng(5).uniform(-2, 2, (10, 3))
    phi3 = population_curve(spec).evaluate(pts, 2)[:, 0]
    np.testing.assert_allclose(phi3, 0.5 * pts[:, 2], atol=1e-10)


def test_validation_and_pickle():
    for bad in [dict(id="nope"), dict(id="dgp1_additive", d=4), dict(id="dgp5_interactive_d", d=2),
                dict(id="dgp1_additive", error="cauchy"), dict(id="dgp1_additive", rho=1.2)]:
        with pytest.raises(ConfigurationError):
            make_dgp(**bad)
    spec = make_dgp("threshold_example", theta=3.0)
    clone = pickle.loads(pickle.dumps(spec))
    assert clone.describe() == spec.describe()
    assert set(DGP_IDS) >= {"dgp1_additive", "threshold_example"}
    with pytest.raises(ConfigurationError):
        PopulationCurve(spec, "guess")
