"""Prior informativeness of CAR models, as an equivalent number of prior events.

For the binomial-logit CAR model the prior contributes roughly

    a_hat = (1 + e^L) / (s2 + (s2 + t2) / m) - e^L / (1 + e^L)

events to a region with linear predictor ``L`` and ``m`` neighbours. The
model-wide baseline ``a0_hat`` is the same expression at the average linear
predictor and a baseline neighbour count ``m0`` (3 by convention). The Poisson
analogue is ``1 / (exp(s2 + (s2 + t2) / m) - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from ..errors import DataValidationError, NumericalError

if TYPE_CHECKING:  # pragma: no cover - type checking only
    from .sampler import PosteriorDraws


@dataclass(frozen=True)
class InfoInputs:
    linear_predictor: float
    sigma2: float
    tau2: float
    m: int

    def __post_init__(self) -> None:
        if self.sigma2 < 0 or self.tau2 < 0:
            raise DataValidationError("variances must be non-negative")
        if self.m < 1:
            raise DataValidationError(f"neighbour count must be >= 1, got {self.m}")

    @property
    def pooled_variance(self) -> float:
        return self.sigma2 + (self.sigma2 + self.tau2) / self.m


def a_hat_binomial(inputs: InfoInputs) -> float:
    v = inputs.pooled_variance
    if v <= 0:
        raise NumericalError("informativeness undefined when both variances are zero")
    L = inputs.linear_predictor
    # expit and 1 + e^L written to stay finite for large |L|
    odds_plus_one = math.exp(L) + 1.0 if L < 700 else math.inf
    return odds_plus_one / v - _expit(L)


def a_hat_poisson(inputs: InfoInputs) -> float:
    v = inputs.pooled_variance
    if v <= 0:
        raise NumericalError("Poisson informativeness is infinite at zero variance")
    return 1.0 / math.expm1(v)


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def a_hat_binomial_array(
    linear_predictor: np.ndarray, sigma2: np.ndarray, tau2: np.ndarray, m: int
) -> np.ndarray:
    """Element-wise :func:`a_hat_binomial` over draws."""
    L = np.asarray(linear_predictor, dtype=float)
    v = np.asarray(sigma2, dtype=float) + (np.asarray(sigma2) + np.asarray(tau2)) / m
    if np.any(v <= 0):
        raise NumericalError("informativeness undefined when both variances are zero")
    with np.errstate(over="ignore"):
        return (1.0 + np.exp(L)) / v - 1.0 / (1.0 + np.exp(-L))


@dataclass(frozen=True)
class A0Summary:
    median: float
    low: float
    high: float
    max: float
    level: float = 0.95


def a0_posterior_summary(
    draws: PosteriorDraws | pd.DataFrame, m0: int = 3, level: float = 0.95
) -> A0Summary:
    """Median and equal-tailed interval of baseline informativeness over draws.

    ``draws`` is either a fitted :class:`PosteriorDraws` or a draws table with
    ``beta0``, ``sigma2`` and ``tau2`` columns (as written by the fit command).
    """
    if m0 < 1:
        raise DataValidationError(f"m0 must be >= 1, got {m0}")
    if isinstance(draws, pd.DataFrame):
        missing = {"beta0", "sigma2", "tau2"} - set(draws.columns)
        if missing:
            raise DataValidationError(f"draws table lacks columns {sorted(missing)}")
        beta0, sigma2, tau2 = (draws[c].to_numpy(float) for c in ("beta0", "sigma2", "tau2"))
    else:
        beta0, sigma2, tau2 = draws.beta0, draws.sigma2, draws.tau2
    if beta0.size == 0:
        raise DataValidationError("no draws to summarise")
    a0 = a_hat_binomial_array(beta0, sigma2, tau2, m0)
    alpha = 1.0 - level
    low, med, high = np.quantile(a0, [alpha / 2, 0.5, 1 - alpha / 2])
    return A0Summary(
        median=float(med), low=float(low), high=float(high), max=float(a0.max()), level=level
    )
