"""Inject reliability results into GeoJSON feature properties."""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pandas as pd

from ..errors import DataValidationError, ErrorCategory

logger = logging.getLogger(__name__)

MERGED_PROPERTIES = ("median", "relative_precision", "reliability_level", "reliable")
METADATA_MEMBER = "relrates"


@dataclass(frozen=True)
class MergeReport:
    matched: int
    unmatched_features: tuple[str, ...]
    unmatched_rows: tuple[str, ...]


def _json_value(value: Any) -> Any:
    # RFC 8259 has no infinities; degenerate relative precision becomes null.
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if hasattr(value, "item"):
        return _json_value(value.item())
    return value


def load_geojson(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: invalid JSON ({exc})") from exc
    if doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        raise DataValidationError(f"{path}: expected a GeoJSON FeatureCollection")
    return doc


def merge_geojson(
    summary: pd.DataFrame,
    geojson: dict[str, Any],
    join_key: str = "name",
    *,
    stratum: str | None = None,
    year: int | None = None,
    model: str | None = None,
    run_metadata: dict[str, Any] | None = None,
) -> tuple[dict[str, Any], MergeReport]:
    """Copy of ``geojson`` whose features carry the matching summary row's results.

    Features join on ``properties[join_key]`` against ``region_id``. The
    summary must hold one row per region after the optional filters.
    """
    rows = summary
    for column, value in (("stratum", stratum), ("year", year), ("model", model)):
        if value is not None and column in rows.columns:
            rows = rows[rows[column] == value]
    if len(rows) and "region_id" not in rows.columns:
        raise DataValidationError("summary lacks a region_id column")
    if len(rows) and rows["region_id"].duplicated().any():
        raise DataValidationError(
            "summary has several rows per region; filter by stratum, year and model"
        )
    by_region = {str(r["region_id"]): r for r in rows.to_dict(orient="records")}

    doc = copy.deepcopy(geojson)
    matched: set[str] = set()
    unmatched_features: list[str] = []
    for feature in doc["features"]:
        props = feature.setdefault("properties", {}) or {}
        feature["properties"] = props
        region = props.get(join_key)
        row = by_region.get(str(region)) if region is not None else None
        if row is None:
            unmatched_features.append(str(region))
            continue
        matched.add(str(region))
        for name in MERGED_PROPERTIES:
            props[name] = _json_value(row[name])

    meta = dict(run_metadata or {})
    meta.update({"join_key": join_key, "stratum": stratum, "year": year, "model": model})
    doc[METADATA_MEMBER] = {k: _json_value(v) for k, v in meta.items()}

    report = MergeReport(
        matched=len(matched),
        unmatched_features=tuple(unmatched_features),
        unmatched_rows=tuple(sorted(set(by_region) - matched)),
    )
    if report.unmatched_features or report.unmatched_rows:
        logger.warning(
            "unmatched_features",
            extra={
                "event_type": "unmatched_features",
                "error_category": ErrorCategory.IO.value,
            },
        )
    return doc, report


def write_geojson(doc: dict[str, Any], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")
