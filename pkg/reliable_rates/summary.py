"""Per-region reliability from MCMC draws, and standard-vs-restricted comparisons."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .errors import DataValidationError
from .model.sampler import PosteriorDraws
from .reliability import ReliabilityAssessment, assess
from .reliability.conjugate import CountRecord, check_level

MIN_DRAWS = 1000
# numpy's default "linear" method is Hyndman-Fan type 7.
QUANTILE_METHOD = "linear"

SUMMARY_COLUMNS = [
    "model",
    "stratum",
    "year",
    "region_id",
    "events",
    "trials",
    "zero_trial",
    "median",
    "ci_low",
    "ci_high",
    "level",
    "relative_precision",
    "reliability_level",
    "reliable",
    "degenerate",
    "low_sample",
]

COMPARISON_COLUMNS = [
    "region_id",
    "stratum",
    "year",
    "events",
    "trials",
    "crude_rate",
    "median_standard",
    "median_restricted",
    "rp_standard",
    "rp_restricted",
    "level_standard",
    "level_restricted",
    "reliable_standard",
    "reliable_restricted",
    "delta_median",
    "delta_rp",
    "delta_level",
]


@dataclass(frozen=True)
class SampleSet:
    """Retained draws of one region's rate, read through empirical quantiles."""

    draws: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.draws, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DataValidationError("a sample set needs a non-empty 1-D array of draws")
        if not (np.isfinite(arr).all() and (arr >= 0).all() and (arr <= 1).all()):
            raise DataValidationError("rate draws must lie in [0, 1]")
        object.__setattr__(self, "draws", arr)

    @property
    def count(self) -> int:
        return int(self.draws.size)

    @property
    def low_sample(self) -> bool:
        return self.count < MIN_DRAWS

    @property
    def bounded(self) -> bool:
        return True

    def median(self) -> float:
        return float(np.quantile(self.draws, 0.5, method=QUANTILE_METHOD))

    def interval(self, level: float) -> tuple[float, float]:
        check_level(level)
        alpha = 1.0 - level
        low, high = np.quantile(self.draws, [alpha / 2, 1 - alpha / 2], method=QUANTILE_METHOD)
        return float(low), float(high)


def assess_region(s: SampleSet, level: float) -> ReliabilityAssessment:
    """Empirical reliability assessment; zero-width draws are flagged degenerate."""
    return replace(assess(s, level), low_sample=s.low_sample)


@dataclass(frozen=True)
class RegionAssessment:
    region_id: str
    stratum: str
    year: int
    events: int
    trials: int
    zero_trial: bool
    assessment: ReliabilityAssessment

    @property
    def crude_rate(self) -> float:
        return self.events / self.trials if self.trials else float("nan")


def assess_draws(
    draws: PosteriorDraws, records: Sequence[CountRecord], level: float
) -> list[RegionAssessment]:
    """One assessment per region of ``draws``, in graph node order."""
    by_region = {r.region_id: r for r in records}
    cells = {(r.stratum, r.year) for r in records}
    if len(cells) != 1:
        raise DataValidationError("records must belong to exactly one stratum-year")
    ((stratum, year),) = cells
    unknown = set(by_region) - set(draws.region_ids)
    if unknown:
        raise DataValidationError(f"records for regions missing from the draws: {sorted(unknown)}")
    out = []
    for col, region in enumerate(draws.region_ids):
        rec = by_region.get(region)
        out.append(
            RegionAssessment(
                region_id=region,
                stratum=stratum,
                year=year,
                events=rec.events if rec else 0,
                trials=rec.trials if rec else 0,
                zero_trial=rec is None,
                assessment=assess_region(SampleSet(draws.pi[:, col]), level),
            )
        )
    return out


def summary_frame(rows: Iterable[RegionAssessment], model: str) -> pd.DataFrame:
    records = []
    for r in rows:
        a = r.assessment
        records.append(
            {
                "model": model,
                "stratum": r.stratum,
                "year": r.year,
                "region_id": r.region_id,
                "events": r.events,
                "trials": r.trials,
                "zero_trial": r.zero_trial,
                "median": a.median,
                "ci_low": a.ci_low,
                "ci_high": a.ci_high,
                "level": a.level_used,
                "relative_precision": a.relative_precision,
                "reliability_level": round(a.reliability_level, 3),
                "reliable": a.reliable,
                "degenerate": a.degenerate,
                "low_sample": a.low_sample,
            }
        )
    return pd.DataFrame.from_records(records, columns=SUMMARY_COLUMNS)


def comparison_table(
    standard: Sequence[RegionAssessment], restricted: Sequence[RegionAssessment]
) -> pd.DataFrame:
    """Side-by-side standard and restricted assessments with restricted-minus-standard deltas."""

    def key(r: RegionAssessment) -> tuple[str, int, str]:
        return (r.stratum, r.year, r.region_id)

    left = {key(r): r for r in standard}
    right = {key(r): r for r in restricted}
    if left.keys() != right.keys():
        diff = sorted(left.keys() ^ right.keys())
        raise DataValidationError(f"region sets differ between models: {diff[:5]}")
    rows = []
    for k in sorted(left):
        s, r = left[k], right[k]
        sa, ra = s.assessment, r.assessment
        rows.append(
            {
                "region_id": s.region_id,
                "stratum": s.stratum,
                "year": s.year,
                "events": s.events,
                "trials": s.trials,
                "crude_rate": s.crude_rate,
                "median_standard": sa.median,
                "median_restricted": ra.median,
                "rp_standard": sa.relative_precision,
                "rp_restricted": ra.relative_precision,
                "level_standard": sa.reliability_level,
                "level_restricted": ra.reliability_level,
                "reliable_standard": sa.reliable,
                "reliable_restricted": ra.reliable,
                "delta_median": ra.median - sa.median,
                "delta_rp": _delta(ra.relative_precision, sa.relative_precision),
                "delta_level": ra.reliability_level - sa.reliability_level,
            }
        )
    return pd.DataFrame.from_records(rows, columns=COMPARISON_COLUMNS)


def _delta(a: float, b: float) -> float:
    # inf - inf: both degenerate, no change
    return 0.0 if a == b else a - b
