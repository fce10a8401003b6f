"""Synthetic data and independent oracles."""

from .aggregation import aggregation_experiment, window_prior
from .oracles import (
    OracleAssessment,
    TwoNodeMoments,
    exact_conjugate_oracle,
    quadrature_cdf,
    quadrature_posterior_2node,
)
from .scenario import (
    SimScenario,
    StratumSpec,
    allocate_births,
    load_scenario,
    pa_like,
    proper_car_field,
    simulate,
    stratum_rates,
    true_rates,
)

__all__ = [
    "OracleAssessment",
    "SimScenario",
    "StratumSpec",
    "TwoNodeMoments",
    "aggregation_experiment",
    "allocate_births",
    "exact_conjugate_oracle",
    "load_scenario",
    "pa_like",
    "proper_car_field",
    "quadrature_cdf",
    "quadrature_posterior_2node",
    "simulate",
    "stratum_rates",
    "true_rates",
    "window_prior",
]
