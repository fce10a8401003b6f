"""Brute-force reference computations for cross-checking the fast code paths.

Nothing here calls into ``reliable_rates.reliability`` or the sampler: the
beta CDF is integrated from the density and the two-region posterior is
integrated directly over both logits.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from ..errors import DataValidationError, NumericalError


def quadrature_cdf(x: float, a: float, b: float, tol: float = 1e-12) -> float:
    """Beta(a, b) CDF at ``x`` by adaptive quadrature of the density."""
    if not (a > 0 and b > 0):
        raise DataValidationError("beta shapes must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    if x > 0.5:
        return 1.0 - quadrature_cdf(1.0 - x, b, a, tol)
    log_norm = -special.betaln(a, b)

    def right_factor(t: float) -> float:
        # (1 - t)^(b - 1) / B(a, b); t^(a - 1) is carried by the quadrature weight
        return math.exp((b - 1.0) * math.log1p(-t) + log_norm)

    def density(t: float) -> float:
        return math.exp((a - 1.0) * math.log(t) + (b - 1.0) * math.log1p(-t) + log_norm)

    mode = (a - 1.0) / (a + b - 2.0) if a > 1.0 and b > 1.0 else 0.0
    split = min(x, 0.5 * mode) if mode > 0 else x
    low, _ = integrate.quad(
        right_factor,
        0.0,
        split,
        weight="alg",
        wvar=(a - 1.0, 0.0),
        epsabs=0.0,
        epsrel=tol,
        limit=500,
    )
    high = 0.0
    if split < x:
        points = [mode] if split < mode < x else None
        high, _ = integrate.quad(
            density, split, x, points=points, epsabs=0.0, epsrel=tol, limit=500
        )
    return min(max(low + high, 0.0), 1.0)


def _quadrature_quantile(p: float, a: float, b: float, tol: float) -> float:
    return optimize.brentq(
        lambda x: quadrature_cdf(x, a, b, tol) - p, 0.0, 1.0, xtol=1e-14, rtol=1e-13, maxiter=500
    )


@dataclass(frozen=True)
class OracleAssessment:
    median: float
    ci_low: float
    ci_high: float
    relative_precision: float


def exact_conjugate_oracle(
    y: int, n: int, a: float, b: float, level: float, tol: float = 1e-12
) -> OracleAssessment:
    """Assessment of Beta(y + a, n - y + b) from quadrature-integrated CDFs."""
    if not (0 <= y <= n) or not 0.0 < level < 1.0:
        raise DataValidationError("need 0 <= y <= n and level in (0, 1)")
    s1, s2 = y + a, n - y + b
    alpha = 1.0 - level
    med = _quadrature_quantile(0.5, s1, s2, tol)
    lo = _quadrature_quantile(alpha / 2, s1, s2, tol)
    hi = _quadrature_quantile(1.0 - alpha / 2, s1, s2, tol)
    width = hi - lo
    rp = min(med, 1.0 - med) / width if width > 0 else math.inf
    return OracleAssessment(median=med, ci_low=lo, ci_high=hi, relative_precision=rp)


@dataclass(frozen=True)
class TwoNodeMoments:
    mean: tuple[float, float]
    variance: tuple[float, float]


def quadrature_posterior_2node(
    y: Sequence[int],
    n: Sequence[int],
    beta0: float,
    sigma2: float,
    tau2: float,
    tol: float = 1e-10,
) -> TwoNodeMoments:
    """Posterior moments of both rates in a two-region CAR model with fixed hyperparameters.

    With one edge and the sum-to-zero constraint, ``z = (u, -u)`` with
    ``u ~ N(0, tau2 / 4)``, so the logits are jointly normal with mean
    ``beta0`` and covariance ``sigma2 I + tau2 / 4 [[1, -1], [-1, 1]]``. The
    binomial likelihood is integrated against that density on a box wide
    enough to hold all but a negligible tail.
    """
    y_arr = np.asarray(y, dtype=float)
    n_arr = np.asarray(n, dtype=float)
    if y_arr.shape != (2,) or n_arr.shape != (2,):
        raise DataValidationError("two-region oracle needs two counts and two trial totals")
    if np.any(y_arr < 0) or np.any(y_arr > n_arr):
        raise DataValidationError("need 0 <= y <= n")
    if sigma2 <= 0 or tau2 < 0:
        raise DataValidationError("need sigma2 > 0 and tau2 >= 0")
    cov = sigma2 * np.eye(2) + tau2 / 4.0 * np.array([[1.0, -1.0], [-1.0, 1.0]])
    prec = np.linalg.inv(cov)

    def log_post(e: np.ndarray) -> float:
        d = e - beta0
        loglik = y_arr @ e - n_arr @ np.logaddexp(0.0, e)
        return float(loglik - 0.5 * d @ prec @ d)

    opt = optimize.minimize(lambda e: -log_post(e), x0=np.full(2, beta0), method="BFGS")
    mode = opt.x
    peak = log_post(mode)
    # Laplace scale bounds the box; the likelihood only sharpens the prior.
    hess = prec + np.diag(n_arr * special.expit(mode) * (1.0 - special.expit(mode)))
    sd = np.sqrt(np.diag(np.linalg.inv(hess)))
    half = 12.0 * np.maximum(sd, 1e-3)
    lo, hi = mode - half, mode + half

    def integral(fn) -> float:
        val, _ = integrate.dblquad(
            lambda e2, e1: fn(e1, e2) * math.exp(log_post(np.array([e1, e2])) - peak),
            lo[0],
            hi[0],
            lo[1],
            hi[1],
            epsabs=1e-13,
            epsrel=tol,
        )
        return val

    z = integral(lambda e1, e2: 1.0)
    if not z > 0:
        raise NumericalError("two-region posterior integrated to zero")
    m1 = [integral(lambda e1, e2: special.expit(e1)), integral(lambda e1, e2: special.expit(e2))]
    m2 = [
        integral(lambda e1, e2: special.expit(e1) ** 2),
        integral(lambda e1, e2: special.expit(e2) ** 2),
    ]
    mean = (m1[0] / z, m1[1] / z)
    var = (m2[0] / z - mean[0] ** 2, m2[1] / z - mean[1] ** 2)
    return TwoNodeMoments(mean=mean, variance=var)
