"""Stratified count tables: reading, validation and CSV output."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataValidationError, ErrorCategory
from ..reliability.conjugate import CountRecord
from ..spatial.graph import AdjacencyGraph

logger = logging.getLogger(__name__)

COUNT_COLUMNS = ["region_id", "stratum", "year", "events", "trials"]
FLOAT_FORMAT = "%.12g"

Key = tuple[str, str, int]


@dataclass(frozen=True)
class Dataset:
    """Validated counts. Rows with zero trials are kept apart as ``zero_trial`` keys."""

    records: tuple[CountRecord, ...]
    zero_trial: tuple[Key, ...] = ()

    def __post_init__(self) -> None:
        seen: set[Key] = set()
        for key in [r.key for r in self.records] + list(self.zero_trial):
            if key in seen:
                raise DataValidationError(f"duplicate record for {key}")
            seen.add(key)

    @cached_property
    def strata(self) -> tuple[str, ...]:
        return tuple(sorted({k[1] for k in self._keys}))

    @cached_property
    def years(self) -> tuple[int, ...]:
        return tuple(sorted({k[2] for k in self._keys}))

    @cached_property
    def regions(self) -> tuple[str, ...]:
        return tuple(sorted({k[0] for k in self._keys}))

    @property
    def _keys(self) -> list[Key]:
        return [r.key for r in self.records] + list(self.zero_trial)

    def cells(self) -> list[tuple[str, int]]:
        """Distinct (stratum, year) pairs in sorted order."""
        return sorted({(k[1], k[2]) for k in self._keys})

    def cell(self, stratum: str, year: int) -> list[CountRecord]:
        return [r for r in self.records if r.stratum == stratum and r.year == year]

    def check_regions(self, g: AdjacencyGraph) -> None:
        unknown = sorted(set(self.regions) - set(g.node_ids))
        if unknown:
            raise DataValidationError(f"regions absent from the graph: {unknown[:10]}")

    def to_frame(self) -> pd.DataFrame:
        rows = [(r.region_id, r.stratum, r.year, r.events, r.trials) for r in self.records]
        rows += [(region, stratum, year, 0, 0) for region, stratum, year in self.zero_trial]
        frame = pd.DataFrame(rows, columns=COUNT_COLUMNS)
        return frame.sort_values(["stratum", "year", "region_id"], ignore_index=True)


def read_counts(path: str | Path) -> Dataset:
    """Read ``region_id,stratum,year,events,trials``; errors name the file line.

    Blank lines are skipped but still counted, so line numbers match the file.
    """
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=False,
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataValidationError(f"{path}: malformed CSV ({exc})") from exc
    if list(frame.columns) != COUNT_COLUMNS:
        raise DataValidationError(
            f"{path}: expected header {','.join(COUNT_COLUMNS)}, got {','.join(frame.columns)}"
        )

    records: list[CountRecord] = []
    zero_trial: list[Key] = []
    lines: dict[Key, int] = {}
    for idx, raw in enumerate(frame.itertuples(index=False)):
        line = idx + 2
        # short and blank rows come back padded with NaN
        region_id, stratum, *numbers = (v.strip() if isinstance(v, str) else "" for v in raw)
        if not region_id and not stratum and not any(numbers):
            continue
        if any("\n" in v for v in (region_id, stratum, *numbers)):
            raise DataValidationError(f"{path}:{line}: quoted field spans several lines")
        try:
            year, events, trials = (int(v) for v in numbers)
        except ValueError:
            raise DataValidationError(
                f"{path}:{line}: year, events and trials must be integers"
            ) from None
        key = (region_id, stratum, year)
        if not region_id or not stratum:
            raise DataValidationError(f"{path}:{line}: empty region_id or stratum")
        if key in lines:
            raise DataValidationError(f"{path}:{line}: duplicate of line {lines[key]} for {key}")
        lines[key] = line
        if events < 0 or trials < 0:
            raise DataValidationError(f"{path}:{line}: negative count")
        if events > trials:
            raise DataValidationError(f"{path}:{line}: events ({events}) exceed trials ({trials})")
        if trials == 0:
            zero_trial.append(key)
            continue
        records.append(CountRecord(region_id, stratum, year, events, trials))

    if zero_trial:
        logger.warning(
            "zero_trial_rows",
            extra={
                "event_type": "zero_trial_rows",
                "error_category": ErrorCategory.VALIDATION.value,
            },
        )
    return Dataset(tuple(records), tuple(zero_trial))


def write_counts(dataset: Dataset, path: str | Path) -> None:
    write_table(dataset.to_frame(), path)


def write_table(frame: pd.DataFrame, path: str | Path) -> None:
    """CSV with 12 significant digits and ``\\n`` line endings."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def records_from_arrays(
    regions: Iterable[str], stratum: str, year: int, events: np.ndarray, trials: np.ndarray
) -> list[CountRecord]:
    return [
        CountRecord(region, stratum, year, int(y), int(n))
        for region, y, n in zip(regions, events, trials, strict=True)
    ]
