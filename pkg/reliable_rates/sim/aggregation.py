"""Pooling years to reach reliability: how many regions become reliable per window width."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable

import pandas as pd

from ..errors import DataValidationError
from ..io.counts import Dataset
from ..reliability import BetaPrior, ConjugatePosterior, Family, is_reliable

AGGREGATION_COLUMNS = [
    "stratum",
    "window_years",
    "windows",
    "regions",
    "mean_reliable",
    "mean_reliable_fraction",
]


def window_prior(events: int, trials: int, a0: float) -> BetaPrior:
    """Prior worth ``a0`` cases centred on the pooled stratum rate."""
    rate = events / trials if 0 < events < trials else (events + 0.5) / (trials + 1.0)
    return BetaPrior(a0, a0 * (1.0 - rate) / rate)


def _window_reliable(
    pooled: dict[str, tuple[int, int]], regions: Iterable[str], a0: float, level: float
) -> int:
    total_y = sum(y for y, _ in pooled.values())
    total_n = sum(n for _, n in pooled.values())
    if total_n == 0:
        return 0
    prior = window_prior(total_y, total_n, a0)
    count = 0
    for region in regions:
        y, n = pooled.get(region, (0, 0))
        if n == 0:
            continue
        post = ConjugatePosterior(
            Family.BETA, y + prior.prior_cases, n - y + prior.prior_noncases
        )
        count += is_reliable(post, level)
    return count


def aggregation_experiment(
    dataset: Dataset,
    window_years: int | Iterable[int],
    a0: float = 5.0,
    level: float = 0.95,
) -> pd.DataFrame:
    """Reliable-region counts per stratum when pooling ``window_years`` consecutive years.

    Every sliding window of the requested width is evaluated; the table
    reports the mean number and fraction of reliable regions over windows.
    Regions with no trials in a window count as unreliable.
    """
    widths = [window_years] if isinstance(window_years, int) else sorted(set(window_years))
    years = dataset.years
    if not widths or min(widths) < 1 or max(widths) > len(years):
        raise DataValidationError(f"window widths must lie in [1, {len(years)}], got {widths}")
    if a0 <= 0:
        raise DataValidationError(f"a0 must be positive, got {a0}")
    regions = dataset.regions

    by_stratum_year: dict[tuple[str, int], dict[str, tuple[int, int]]] = defaultdict(dict)
    for rec in dataset.records:
        by_stratum_year[(rec.stratum, rec.year)][rec.region_id] = (rec.events, rec.trials)

    rows = []
    for stratum in dataset.strata:
        for width in widths:
            reliable = []
            for start in range(len(years) - width + 1):
                pooled: dict[str, tuple[int, int]] = {}
                for year in years[start : start + width]:
                    for region, (y, n) in by_stratum_year[(stratum, year)].items():
                        py, pn = pooled.get(region, (0, 0))
                        pooled[region] = (py + y, pn + n)
                reliable.append(_window_reliable(pooled, regions, a0, level))
            mean_reliable = sum(reliable) / len(reliable)
            rows.append(
                {
                    "stratum": stratum,
                    "window_years": width,
                    "windows": len(reliable),
                    "regions": len(regions),
                    "mean_reliable": mean_reliable,
                    "mean_reliable_fraction": mean_reliable / len(regions),
                }
            )
    return pd.DataFrame.from_records(rows, columns=AGGREGATION_COLUMNS)
