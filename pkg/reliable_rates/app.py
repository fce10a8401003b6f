from __future__ import annotations

import asyncio
import logging
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import pandas as pd

from .config import Settings, get_settings
from .errors import DataValidationError, ErrorCategory, RelRatesError
from .io.counts import Dataset, read_counts, write_table
from .io.draws import read_draws, write_draws
from .io.manifest import ChainRecord, RunManifest, file_digest
from .logging import configure_logging
from .metrics import Timer, chains_in_flight
from .model import (
    A0Summary,
    ModelConfig,
    PosteriorDraws,
    a0_posterior_summary,
    chain_seed,
    fit_restricted,
    fit_standard,
)
from .reliability import ConjugatePosterior, Family, assess
from .reliability.conjugate import CountRecord, check_level
from .spatial.graph import AdjacencyGraph, build_graph, read_edges
from .summary import RegionAssessment, assess_draws, comparison_table, summary_frame

log = logging.getLogger(__name__)

ModelChoice = Literal["standard", "restricted", "both"]

ASSESS_COLUMNS = [
    "region_id",
    "stratum",
    "year",
    "events",
    "trials",
    "family",
    "median",
    "ci_low",
    "ci_high",
    "level",
    "relative_precision",
    "reliability_level",
    "reliable",
    "degenerate",
]

INFO_COLUMNS = [
    "model",
    "stratum",
    "year",
    "a0_median",
    "a0_low",
    "a0_high",
    "a0_max",
    "stall_count",
    "mean_acceptance",
]


# -- crude (conjugate) assessment -------------------------------------------------


def assess_counts(
    dataset: Dataset,
    prior_a: float,
    level: float,
    *,
    pi0: float | None = None,
    family: Family = Family.BETA,
) -> pd.DataFrame:
    """Conjugate reliability assessment of every record.

    The prior carries ``prior_a`` cases with mean ``pi0``; without ``pi0`` the
    pooled rate of the record's stratum-year is used.
    """
    check_level(level)
    if prior_a <= 0:
        raise DataValidationError(f"prior cases must be positive, got {prior_a}")
    if pi0 is not None and not 0.0 < pi0 < 1.0:
        raise DataValidationError(f"pi0 must be in (0, 1), got {pi0}")
    if dataset.zero_trial:
        log.warning(
            "zero_trial_skipped",
            extra={
                "event_type": "zero_trial_skipped",
                "error_category": ErrorCategory.VALIDATION.value,
            },
        )
    rows = []
    for stratum, year in dataset.cells():
        cell = dataset.cell(stratum, year)
        if not cell:
            continue
        rate = pi0 if pi0 is not None else _pooled_rate(cell)
        for rec in sorted(cell, key=lambda r: r.region_id):
            post = _conjugate(rec, prior_a, rate, family)
            a = assess(post, level)
            rows.append(
                {
                    "region_id": rec.region_id,
                    "stratum": rec.stratum,
                    "year": rec.year,
                    "events": rec.events,
                    "trials": rec.trials,
                    "family": family.value,
                    "median": a.median,
                    "ci_low": a.ci_low,
                    "ci_high": a.ci_high,
                    "level": level,
                    "relative_precision": a.relative_precision,
                    "reliability_level": round(a.reliability_level, 3),
                    "reliable": a.reliable,
                    "degenerate": a.degenerate,
                }
            )
    return pd.DataFrame.from_records(rows, columns=ASSESS_COLUMNS)


def _pooled_rate(cell: Iterable[CountRecord]) -> float:
    cell = list(cell)
    y = sum(r.events for r in cell)
    n = sum(r.trials for r in cell)
    return (y + 0.5) / (n + 1.0)


def _conjugate(rec: CountRecord, a: float, rate: float, family: Family) -> ConjugatePosterior:
    if family is Family.GAMMA:
        return ConjugatePosterior(Family.GAMMA, rec.events + a, rec.trials + a / rate)
    return ConjugatePosterior(
        Family.BETA, rec.events + a, rec.trials - rec.events + a * (1.0 - rate) / rate
    )


# -- CAR fitting -------------------------------------------------------------------


@dataclass(frozen=True)
class ChainTask:
    model: Literal["standard", "restricted"]
    stratum: str
    year: int
    records: tuple[CountRecord, ...]
    graph: AdjacencyGraph
    config: ModelConfig
    level: float
    m0: int

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.model, self.stratum, self.year)


@dataclass(frozen=True)
class ChainResult:
    task: ChainTask
    draws: PosteriorDraws
    assessments: list[RegionAssessment]
    a0: A0Summary


def run_chain(task: ChainTask) -> ChainResult:
    """Fit and summarise one stratum-year chain. Top-level so worker processes can pickle it."""
    fit = fit_restricted if task.model == "restricted" else fit_standard
    draws = fit(task.records, task.graph, task.config)
    assessments = assess_draws(draws, task.records, task.level) if task.records else []
    return ChainResult(task, draws, assessments, a0_posterior_summary(draws, task.m0))


def fit_graph(dataset: Dataset, edges_path: str | Path, strict: bool = False) -> AdjacencyGraph:
    """Contiguity graph over every region named by the edges file or the data.

    Regions absent from the edges file join as isolated nodes unless ``strict``.
    """
    pairs = read_edges(edges_path)
    known = {n for pair in pairs for n in pair}
    if strict:
        dataset.check_regions(build_graph(pairs, sorted(known)))
    return build_graph(pairs, sorted(known | set(dataset.regions)))


def plan_chains(
    dataset: Dataset, g: AdjacencyGraph, settings: Settings, model: ModelChoice
) -> list[ChainTask]:
    models = ("standard", "restricted") if model == "both" else (model,)
    tasks = []
    for stratum, year in dataset.cells():
        records = tuple(dataset.cell(stratum, year))
        if not records:
            continue
        seed = chain_seed(settings.seed, stratum, year)
        for name in models:
            cfg = ModelConfig.from_settings(settings, restricted=name == "restricted", seed=seed)
            tasks.append(
                ChainTask(name, stratum, year, records, g, cfg, settings.level, settings.m0)
            )
    return sorted(tasks, key=lambda t: t.key)


async def _execute(tasks: list[ChainTask], workers: int) -> list[ChainResult]:
    loop = asyncio.get_running_loop()
    if workers <= 1:
        results = []
        for task in tasks:
            chains_in_flight.set(1)
            results.append(await asyncio.to_thread(run_chain, task))
        chains_in_flight.set(0)
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chains_in_flight.set(min(workers, len(tasks)))
        futures = [loop.run_in_executor(pool, run_chain, task) for task in tasks]
        try:
            return list(await asyncio.gather(*futures))
        finally:
            chains_in_flight.set(0)


@dataclass(frozen=True)
class FitOutputs:
    out_dir: Path
    summary: pd.DataFrame
    informativeness: pd.DataFrame
    comparison: pd.DataFrame | None
    manifest: RunManifest


async def run_fit(
    counts_path: str | Path,
    edges_path: str | Path,
    out_dir: str | Path,
    model: ModelChoice = "restricted",
    settings: Settings | None = None,
) -> FitOutputs:
    """Fit one chain per stratum-year (and model) and write all fit outputs."""
    settings = settings or get_settings()
    configure_logging(settings.log_level, settings.log_format)
    out = Path(out_dir)
    dataset = read_counts(counts_path)
    g = fit_graph(dataset, edges_path, strict=settings.strict_regions)
    tasks = plan_chains(dataset, g, settings, model)
    if not tasks:
        raise DataValidationError(f"{counts_path}: no records to fit")
    log.info("fit_start", extra={"event_type": "fit_start"})

    timer = Timer()
    try:
        with timer.time():
            results = await _execute(tasks, settings.workers)
    except RelRatesError as exc:
        log.error(
            "fit_failed",
            extra={"event_type": "fit_failed", "error_category": exc.category.value},
        )
        raise

    # Outputs are written in sorted task order regardless of completion order.
    results.sort(key=lambda r: r.task.key)
    frames = [summary_frame(r.assessments, r.task.model) for r in results]
    summary = pd.concat(frames, ignore_index=True)
    info = pd.DataFrame.from_records(
        [
            {
                "model": r.task.model,
                "stratum": r.task.stratum,
                "year": r.task.year,
                "a0_median": r.a0.median,
                "a0_low": r.a0.low,
                "a0_high": r.a0.high,
                "a0_max": r.a0.max,
                "stall_count": r.draws.metadata.stall_count,
                "mean_acceptance": r.draws.metadata.mean_acceptance,
            }
            for r in results
        ],
        columns=INFO_COLUMNS,
    )
    write_table(summary, out / "summary.csv")
    write_table(info, out / "informativeness.csv")
    for r in results:
        write_draws(r.draws, out / "draws" / f"{r.task.model}_{r.task.stratum}_{r.task.year}.csv")

    comparison = None
    if model == "both":
        standard = [a for r in results if r.task.model == "standard" for a in r.assessments]
        restricted = [a for r in results if r.task.model == "restricted" for a in r.assessments]
        comparison = comparison_table(standard, restricted)
        write_table(comparison, out / "comparison.csv")

    manifest = RunManifest(
        settings=settings.model_dump(mode="json"),
        chain_config=tasks[0].config.model_dump(mode="json", exclude={"seed"}),
        inputs={"counts": file_digest(counts_path), "edges": file_digest(edges_path)},
        chains=[ChainRecord.from_metadata(r.draws.metadata) for r in results],
        wall_clock_ms=timer.last_ms,
    )
    manifest.write(out / "manifest.json")
    log.info(
        "fit_done",
        extra={"event_type": "fit_done", "elapsed_ms": timer.last_ms},
    )
    return FitOutputs(out, summary, info, comparison, manifest)


# -- draws dumps -------------------------------------------------------------------


def info_table(paths: Iterable[str | Path], m0: int, level: float = 0.95) -> pd.DataFrame:
    """Baseline informativeness summary of each draws dump."""
    rows = []
    for path in paths:
        a0 = a0_posterior_summary(read_draws(path), m0=m0, level=level)
        rows.append(
            {
                "draws": Path(path).name,
                "m0": m0,
                "a0_median": a0.median,
                "a0_low": a0.low,
                "a0_high": a0.high,
                "a0_max": a0.max,
            }
        )
    return pd.DataFrame.from_records(
        rows, columns=["draws", "m0", "a0_median", "a0_low", "a0_high", "a0_max"]
    )
