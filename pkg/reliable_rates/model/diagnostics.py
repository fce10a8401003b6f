"""Single-chain convergence diagnostics recorded alongside the draws."""

from __future__ import annotations

import math
import warnings
from collections.abc import Mapping

import numpy as np


def _one(fn, values: np.ndarray) -> float:
    if values.size < 4 or not np.isfinite(values).all() or np.ptp(values) == 0:
        return math.nan
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        # arviz reads a bare 2-D array as (chain, draw)
        return float(fn(values[np.newaxis, :]))


def chain_diagnostics(raw: Mapping[str, np.ndarray]) -> dict[str, float]:
    """Bulk ESS and split R-hat for the global parameters, plus the worst region.

    ``raw`` maps parameter names to draws; ``pi`` is (draws, regions).
    """
    # Lazy import: arviz pulls in xarray and is slow to import in worker processes.
    import arviz as az

    out: dict[str, float] = {}
    for name in ("beta0", "sigma2", "tau2", "a0_hat"):
        values = np.asarray(raw[name], dtype=float)
        out[f"ess_{name}"] = _one(az.ess, values)
        out[f"rhat_{name}"] = _one(az.rhat, values)
    pi = np.asarray(raw["pi"], dtype=float)
    ess_pi = [_one(az.ess, pi[:, j]) for j in range(pi.shape[1])]
    rhat_pi = [_one(az.rhat, pi[:, j]) for j in range(pi.shape[1])]
    out["min_ess_pi"] = float(np.nanmin(ess_pi)) if not np.isnan(ess_pi).all() else math.nan
    out["max_rhat_pi"] = float(np.nanmax(rhat_pi)) if not np.isnan(rhat_pi).all() else math.nan
    return out
