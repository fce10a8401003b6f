"""Conjugate posteriors for binomial (beta) and Poisson (gamma) rate data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

from scipy import optimize, special

from ..errors import DataValidationError, ErrorCategory, NumericalError
from ..metrics import quantile_refinements_total

logger = logging.getLogger(__name__)

# Largest tolerated |CDF(q) - p| for a returned quantile.
CDF_TOL = 1e-10


@dataclass(frozen=True)
class CountRecord:
    """One observation: ``events`` cases out of ``trials`` in a region-stratum-year."""

    region_id: str
    stratum: str
    year: int
    events: int
    trials: int

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise DataValidationError(f"{self.key}: trials must be >= 1, got {self.trials}")
        if self.events < 0:
            raise DataValidationError(f"{self.key}: events must be >= 0, got {self.events}")
        if self.events > self.trials:
            raise DataValidationError(
                f"{self.key}: events ({self.events}) exceed trials ({self.trials})"
            )

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.region_id, self.stratum, self.year)

    @property
    def crude_rate(self) -> float:
        return self.events / self.trials


@dataclass(frozen=True)
class BetaPrior:
    """Beta prior read as ``prior_cases`` cases and ``prior_noncases`` non-cases."""

    prior_cases: float
    prior_noncases: float

    def __post_init__(self) -> None:
        if not (self.prior_cases > 0 and math.isfinite(self.prior_cases)):
            raise DataValidationError(f"prior_cases must be positive, got {self.prior_cases}")
        if not (self.prior_noncases > 0 and math.isfinite(self.prior_noncases)):
            raise DataValidationError(
                f"prior_noncases must be positive, got {self.prior_noncases}"
            )

    @property
    def mean(self) -> float:
        return self.prior_cases / (self.prior_cases + self.prior_noncases)


class Family(str, Enum):
    BETA = "beta"
    GAMMA = "gamma"


@dataclass(frozen=True)
class ConjugatePosterior:
    """Beta(shape1, shape2) or Gamma(shape1, rate=shape2) posterior for a rate.

    For the beta family ``shape1`` is the posterior number of cases (y + a) and
    ``shape2`` the posterior number of non-cases (n - y + b). For the gamma
    family ``shape2`` is the rate parameter n + b.
    """

    family: Family
    shape1: float
    shape2: float

    def __post_init__(self) -> None:
        for name in ("shape1", "shape2"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DataValidationError(f"{name} must be positive and finite, got {value}")

    @property
    def bounded(self) -> bool:
        """Whether the parameter lives in (0, 1) and therefore has an opposite."""
        return self.family is Family.BETA

    def opposite(self) -> ConjugatePosterior:
        """Posterior of ``1 - pi``; only defined for the beta family."""
        if not self.bounded:
            raise DataValidationError("gamma posteriors have no opposite")
        return ConjugatePosterior(Family.BETA, self.shape2, self.shape1)

    def mean(self) -> float:
        if self.bounded:
            return self.shape1 / (self.shape1 + self.shape2)
        return self.shape1 / self.shape2

    def variance(self) -> float:
        a, b = self.shape1, self.shape2
        if self.bounded:
            return a * b / ((a + b) ** 2 * (a + b + 1))
        return a / b**2

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        if self.bounded:
            return 1.0 if x >= 1 else float(special.betainc(self.shape1, self.shape2, x))
        return float(special.gammainc(self.shape1, self.shape2 * x))

    def quantile(self, p: float) -> float:
        """Inverse CDF, checked against the CDF and refined by bracketing if needed."""
        if not 0.0 < p < 1.0:
            raise DataValidationError(f"quantile probability must be in (0, 1), got {p}")
        if self.bounded:
            x = float(special.betaincinv(self.shape1, self.shape2, p))
        else:
            x = float(special.gammaincinv(self.shape1, p)) / self.shape2
        if math.isfinite(x) and abs(self.cdf(x) - p) <= CDF_TOL:
            return x
        return self._refine(p)

    def _refine(self, p: float) -> float:
        quantile_refinements_total.inc()
        logger.debug(
            "quantile_refined",
            extra={
                "event_type": "quantile_refined",
                "error_category": ErrorCategory.NUMERICAL.value,
            },
        )
        hi = 1.0
        if not self.bounded:
            hi = max(self.mean(), 1e-300)
            while self.cdf(hi) < p:
                hi *= 2.0
                if not math.isfinite(hi):
                    raise NumericalError(f"could not bracket quantile {p} of {self}")
        try:
            x = optimize.brentq(lambda t: self.cdf(t) - p, 0.0, hi, xtol=1e-300, rtol=1e-15)
        except (ValueError, RuntimeError) as exc:
            raise NumericalError(f"quantile {p} of {self} did not converge: {exc}") from exc
        if abs(self.cdf(x) - p) > CDF_TOL:
            raise NumericalError(f"quantile {p} of {self} did not reach CDF tolerance")
        return float(x)

    def median(self) -> float:
        return self.quantile(0.5)

    def interval(self, level: float) -> tuple[float, float]:
        """Equal-tailed ``level`` credible interval."""
        check_level(level)
        alpha = 1.0 - level
        return self.quantile(alpha / 2), self.quantile(1.0 - alpha / 2)


def check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise DataValidationError(f"level must be in (0, 1), got {level}")


def beta_posterior(rec: CountRecord, prior: BetaPrior) -> ConjugatePosterior:
    """Beta(y + a, n - y + b) posterior of a binomial rate."""
    return ConjugatePosterior(
        Family.BETA,
        rec.events + prior.prior_cases,
        rec.trials - rec.events + prior.prior_noncases,
    )


def gamma_posterior(
    rec: CountRecord, prior_shape: float, prior_rate: float
) -> ConjugatePosterior:
    """Gamma(y + a, rate n + b) posterior of a Poisson rate per trial."""
    if not (prior_shape > 0 and prior_rate > 0):
        raise DataValidationError("gamma prior shape and rate must be positive")
    return ConjugatePosterior(Family.GAMMA, rec.events + prior_shape, rec.trials + prior_rate)


def posterior_cv(post: ConjugatePosterior) -> float:
    """Coefficient of variation (posterior sd over posterior mean)."""
    a, b = post.shape1, post.shape2
    if post.bounded:
        return math.sqrt(b / (a * (a + b + 1)))
    return 1.0 / math.sqrt(a)


def prior_from_rate(pi0: float, a: float = 0.5) -> BetaPrior:
    """Beta prior with ``a`` prior cases whose mean equals ``pi0``."""
    if not 0.0 < pi0 < 1.0:
        raise DataValidationError(f"pi0 must be in (0, 1), got {pi0}")
    return BetaPrior(a, a * (1.0 - pi0) / pi0)


def equal_tailed_ci(post: ConjugatePosterior, level: float) -> tuple[float, float]:
    return post.interval(level)
