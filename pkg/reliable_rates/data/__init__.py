"""Bundled fixtures: Pennsylvania county contiguity, county GeoJSON, synthetic scenario."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

PA_EDGES = "pa_counties.tsv"
PA_GEOJSON = "pa_counties.geojson"
PA_SCENARIO = "pa_synthetic.scenario"


def path(name: str) -> Path:
    return Path(str(resources.files(__name__).joinpath(name)))
