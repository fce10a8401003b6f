"""Exact conjugate posteriors and the reliability definition."""

from .assessment import (
    QuantileSource,
    ReliabilityAssessment,
    assess,
    cv_reliable,
    is_reliable,
    max_prior_info,
    posterior_case_threshold,
    relative_precision,
    reliability_level,
    required_cases,
)
from .conjugate import (
    BetaPrior,
    ConjugatePosterior,
    CountRecord,
    Family,
    beta_posterior,
    equal_tailed_ci,
    gamma_posterior,
    posterior_cv,
    prior_from_rate,
)

__all__ = [
    "BetaPrior",
    "ConjugatePosterior",
    "CountRecord",
    "Family",
    "QuantileSource",
    "ReliabilityAssessment",
    "assess",
    "beta_posterior",
    "cv_reliable",
    "equal_tailed_ci",
    "gamma_posterior",
    "is_reliable",
    "max_prior_info",
    "posterior_case_threshold",
    "posterior_cv",
    "prior_from_rate",
    "relative_precision",
    "reliability_level",
    "required_cases",
]
