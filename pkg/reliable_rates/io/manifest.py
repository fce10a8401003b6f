"""Run manifest written next to fit outputs."""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from .. import __version__
from ..model.sampler import ChainMetadata


class ChainRecord(BaseModel):
    key: str
    model: str
    seed: int
    mean_acceptance: float | None
    min_acceptance: float | None
    stall_count: int
    constrained_updates: int
    zero_trial: list[str]
    graph_digest: str
    data_digest: str
    elapsed_ms: float
    diagnostics: dict[str, float | None]

    @classmethod
    def from_metadata(cls, meta: ChainMetadata) -> ChainRecord:
        rates = meta.acceptance_rates
        return cls(
            key=meta.key,
            model=meta.model,
            seed=meta.seed,
            mean_acceptance=meta.mean_acceptance if rates else None,
            min_acceptance=min(rates) if rates else None,
            stall_count=meta.stall_count,
            constrained_updates=meta.constrained_updates,
            zero_trial=list(meta.zero_trial),
            graph_digest=meta.graph_digest,
            data_digest=meta.data_digest,
            elapsed_ms=meta.elapsed_ms,
            diagnostics={k: (v if v == v else None) for k, v in meta.diagnostics.items()},
        )


class RunManifest(BaseModel):
    """Everything needed to rerun a fit: settings, model config, input digests."""

    software_version: str = __version__
    settings: dict[str, Any]
    chain_config: dict[str, Any] = Field(default_factory=dict)
    inputs: dict[str, str] = Field(default_factory=dict)
    quantile_method: str = "linear (type 7)"
    chains: list[ChainRecord] = Field(default_factory=list)
    wall_clock_ms: float | None = None

    def write(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> RunManifest:
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
