"""Shapley curves: local Shapley attributions as functions of the covariates.

Component-based and integration-based local linear estimators, wild
bootstrap and analytic confidence intervals, population oracles for the
simulation designs, and a Monte Carlo harness. Variables are indexed from 0.
"""
__version__ = "0.1.0"

from .data import (
    ConfigurationError,
    CurveEstimate,
    DataError,
    Dataset,
    EstimationError,
    Grid,
    ShapleyCurvesError,
    SubsetMask,
    all_subsets,
    subsets_excluding,
)
from .weights import ShapleyWeight, combine, exact_weight_table, shapley_weight, weight_table
from .smoothing import (
    GAUSSIAN,
    BandwidthPlan,
    BandwidthSelectionError,
    KernelSpec,
    LocalFit,
    curvature_bias,
    kde,
    local_linear_fit,
    local_variance,
    loo_cv_bandwidth,
    second_derivatives,
)
from .component import ComponentModel, estimate_curve, fit_components, select_bandwidths
from .integration import (
    ConditionalGaussian,
    GaussianLaw,
    IntegrationError,
    IntegrationModel,
    QuadratureRule,
    conditional_gaussian,
    estimate_curve_integration,
    fit_integration,
    integrate_component,
    integrate_component_empirical,
    integration_bias_diagnostic,
)
from .population import DgpSpec, PopulationCurve, brute_force_curve, make_dgp, population_curve, sample, true_component
from .inference import (
    BootstrapConfig,
    BootstrapResult,
    analytic_ci,
    bootstrap_variance_decomposition,
    mammen_draw,
    wild_bootstrap_ci,
)
from .harness import (
    CoverageConfig,
    ExperimentReport,
    MiseConfig,
    Region,
    adaptive_integrate,
    cumulative_curves,
    rate_check,
    run_coverage,
    run_mise,
)
from . import kernels

BACKEND = kernels.BACKEND
