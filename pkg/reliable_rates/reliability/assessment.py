"""Reliability of a rate estimate from its posterior median and credible interval.

An estimate is reliable at level ``1 - alpha`` when the posterior medians of
``pi`` and of its opposite ``1 - pi`` both exceed the width of their
equal-tailed ``(1 - alpha)`` credible intervals. Both intervals have the same
width, so the check reduces to ``min(m, 1 - m) / width > 1``; the ratio is the
relative precision. For unbounded (gamma) rates there is no opposite and the
ratio is ``m / width``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Protocol

from scipy import optimize

from ..errors import DataValidationError, DegeneratePosteriorError, NumericalError
from .conjugate import ConjugatePosterior, Family, check_level, posterior_cv, prior_from_rate

LEVEL_FLOOR = 0.001
LEVEL_CEIL = 0.999
LEVEL_XTOL = 1e-4

Criterion = Literal["quantile", "cv"]


class QuantileSource(Protocol):
    """Anything exposing a posterior median and equal-tailed intervals."""

    @property
    def bounded(self) -> bool: ...

    def median(self) -> float: ...

    def interval(self, level: float) -> tuple[float, float]: ...


@dataclass(frozen=True)
class ReliabilityAssessment:
    median: float
    ci_low: float
    ci_high: float
    level_used: float
    relative_precision: float
    reliability_level: float
    reliable: bool
    degenerate: bool = False
    low_sample: bool = False

    def __post_init__(self) -> None:
        if not self.ci_low <= self.median <= self.ci_high:
            raise NumericalError(
                f"median {self.median} outside interval [{self.ci_low}, {self.ci_high}]"
            )


def _canonical(source: QuantileSource) -> QuantileSource:
    # pi and 1 - pi share a reliability value; evaluating one fixed orientation
    # makes the symmetry exact rather than up to solver round-off.
    if isinstance(source, ConjugatePosterior) and source.bounded:
        if source.shape1 > source.shape2:
            return source.opposite()
    return source


def relative_precision(source: QuantileSource, level: float) -> float:
    """Posterior median (or its opposite, whichever is smaller) over the CI width."""
    check_level(level)
    source = _canonical(source)
    m = source.median()
    low, high = source.interval(level)
    width = high - low
    if not width > 0:
        raise DegeneratePosteriorError(f"zero-width {level} interval at median {m}")
    numerator = min(m, 1.0 - m) if source.bounded else m
    return numerator / width


def is_reliable(source: QuantileSource, level: float) -> bool:
    try:
        return relative_precision(source, level) > 1.0
    except DegeneratePosteriorError:
        return True


def cv_reliable(post: ConjugatePosterior, threshold: float = 0.25) -> bool:
    """Coefficient-of-variation criterion (CV below ``threshold``)."""
    return posterior_cv(post) < threshold


def reliability_level(source: QuantileSource) -> float:
    """Largest level ``1 - alpha`` at which ``source`` is reliable.

    Relative precision falls as the level rises (intervals widen), so the
    crossing of 1 is found by bisection. Results are clamped to
    ``[LEVEL_FLOOR, LEVEL_CEIL]``.
    """
    source = _canonical(source)

    def excess(level: float) -> float:
        try:
            return relative_precision(source, level) - 1.0
        except DegeneratePosteriorError:
            return math.inf

    if excess(LEVEL_CEIL) > 0:
        return LEVEL_CEIL
    if excess(LEVEL_FLOOR) <= 0:
        return LEVEL_FLOOR
    try:
        root = optimize.bisect(excess, LEVEL_FLOOR, LEVEL_CEIL, xtol=LEVEL_XTOL, maxiter=200)
    except RuntimeError as exc:
        raise NumericalError(f"reliability level bisection failed: {exc}") from exc
    return min(max(float(root), LEVEL_FLOOR), LEVEL_CEIL)


def assess(source: QuantileSource, level: float) -> ReliabilityAssessment:
    """Full reliability assessment of ``source`` at ``level``."""
    m = source.median()
    low, high = source.interval(level)
    try:
        rp = relative_precision(source, level)
        degenerate = False
    except DegeneratePosteriorError:
        rp = math.inf
        degenerate = True
    return ReliabilityAssessment(
        median=m,
        ci_low=low,
        ci_high=high,
        level_used=level,
        relative_precision=rp,
        reliability_level=reliability_level(source),
        reliable=rp > 1.0,
        degenerate=degenerate,
    )


def required_cases(
    pi0: float,
    a: float = 0.5,
    level: float = 0.95,
    trials: int | None = None,
    *,
    criterion: Criterion = "quantile",
    max_events: int = 100_000,
) -> int | None:
    """Smallest event count that yields a reliable estimate, or ``None``.

    Without ``trials`` the population grows with the count, ``n = round(y / pi0)``,
    tracing the fixed-rate curves of relative precision against events. The
    search ascends from zero and gives up at ``trials`` (or ``max_events``).
    """
    check_level(level)
    prior = prior_from_rate(pi0, a)
    if trials is not None and trials < 1:
        raise DataValidationError(f"trials must be >= 1, got {trials}")
    limit = trials if trials is not None else max_events
    for y in range(limit + 1):
        n = trials if trials is not None else max(round(y / pi0), y, 1)
        post = ConjugatePosterior(
            Family.BETA, y + prior.prior_cases, n - y + prior.prior_noncases
        )
        ok = cv_reliable(post) if criterion == "cv" else is_reliable(post, level)
        if ok:
            return y
    return None


def max_prior_info(pi0: float, multiplier: float = 16.0) -> float:
    """Prior-case budget below which the data must outweigh the prior to be reliable."""
    if not 0.0 < pi0 < 1.0:
        raise DataValidationError(f"pi0 must be in (0, 1), got {pi0}")
    return multiplier * (1.0 - pi0) / 2


def posterior_case_threshold(pi0: float, multiplier: float = 16.0) -> float:
    """Posterior cases (y + a) needed for reliability at prior rate ``pi0``."""
    if not 0.0 < pi0 < 1.0:
        raise DataValidationError(f"pi0 must be in (0, 1), got {pi0}")
    return multiplier * (1.0 - pi0)
