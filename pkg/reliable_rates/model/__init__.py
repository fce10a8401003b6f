from .config import InverseGammaPrior, ModelConfig
from .informativeness import (
    A0Summary,
    InfoInputs,
    a0_posterior_summary,
    a_hat_binomial,
    a_hat_binomial_array,
    a_hat_poisson,
)
from .sampler import (
    ChainMetadata,
    ChainState,
    PosteriorDraws,
    adapt_proposals,
    chain_seed,
    draw_beta0,
    draw_sigma2,
    draw_tau2,
    fit_restricted,
    fit_standard,
)

__all__ = [
    "A0Summary",
    "ChainMetadata",
    "ChainState",
    "InfoInputs",
    "InverseGammaPrior",
    "ModelConfig",
    "PosteriorDraws",
    "a0_posterior_summary",
    "a_hat_binomial",
    "a_hat_binomial_array",
    "a_hat_poisson",
    "adapt_proposals",
    "chain_seed",
    "draw_beta0",
    "draw_sigma2",
    "draw_tau2",
    "fit_restricted",
    "fit_standard",
]
