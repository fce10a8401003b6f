"""Readers and writers for counts, draws, GeoJSON and run manifests."""

from .counts import Dataset, read_counts, write_counts, write_table
from .draws import draws_frame, read_draws, write_draws
from .geojson import MergeReport, load_geojson, merge_geojson, write_geojson
from .manifest import ChainRecord, RunManifest, file_digest

__all__ = [
    "ChainRecord",
    "Dataset",
    "MergeReport",
    "RunManifest",
    "draws_frame",
    "file_digest",
    "load_geojson",
    "merge_geojson",
    "read_counts",
    "read_draws",
    "write_counts",
    "write_draws",
    "write_geojson",
    "write_table",
]
