from __future__ import annotations

import asyncio
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Any, cast

import pandas as pd
import pydantic
import typer

from . import app as app_module
from .config import Settings, get_settings
from .errors import ConfigError, DataValidationError, RelRatesError, SamplerDiagnosticError
from .io.counts import read_counts, write_counts, write_table
from .io.geojson import load_geojson, merge_geojson, write_geojson
from .logging import configure_logging
from .reliability import Family, required_cases as required_cases_fn
from .reliability.assessment import Criterion

app = typer.Typer(help="Reliability of small-area event rates")

EXIT_VALIDATION = 2
EXIT_SAMPLER = 3

FAMILIES = {"binomial": Family.BETA, "poisson": Family.GAMMA}


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map package errors onto process exit codes."""
    try:
        yield
    except (DataValidationError, ConfigError, pydantic.ValidationError, FileNotFoundError) as exc:
        typer.echo(f"error: {exc}", err=True)
        raise typer.Exit(EXIT_VALIDATION) from exc
    except SamplerDiagnosticError as exc:
        typer.echo(f"sampler error: {exc}", err=True)
        raise typer.Exit(EXIT_SAMPLER) from exc
    except RelRatesError as exc:
        typer.echo(f"error: {exc}", err=True)
        raise typer.Exit(1) from exc


def _settings(overrides: dict[str, Any], verbose: bool) -> Settings:
    given = {k: v for k, v in overrides.items() if v is not None}
    settings = Settings.model_validate({**get_settings().model_dump(), **given})
    configure_logging(settings.log_level, settings.log_format)
    if verbose:
        typer.echo(settings.model_dump_json(indent=2))
    return settings


def _emit(frame: pd.DataFrame, out: Path | None) -> None:
    if out is None:
        frame.to_csv(sys.stdout, index=False, float_format="%.12g", lineterminator="\n")
    else:
        write_table(frame, out)
        typer.echo(f"wrote {len(frame)} rows to {out}")


@app.command()
def assess(
    counts: Path = typer.Argument(..., help="Counts CSV (region_id,stratum,year,events,trials)"),
    out: Path | None = typer.Option(None, help="Output CSV (stdout when omitted)"),
    prior_a: float | None = typer.Option(None, help="Prior cases a"),
    pi0: float | None = typer.Option(None, help="Prior mean rate (default: pooled cell rate)"),
    level: float | None = typer.Option(None, help="Credible level"),
    family: str = typer.Option("binomial", help="binomial (beta posterior) or poisson (gamma)"),
    verbose: bool = typer.Option(False, help="Print effective settings"),
) -> None:
    """Conjugate reliability assessment of crude counts."""
    with _exit_codes():
        settings = _settings({"prior_a": prior_a, "level": level}, verbose)
        if family not in FAMILIES:
            raise DataValidationError(f"unknown family {family!r}")
        frame = app_module.assess_counts(
            read_counts(counts), settings.prior_a, settings.level, pi0=pi0, family=FAMILIES[family]
        )
        _emit(frame, out)


@app.command("required-cases")
def required_cases(
    pi0: float = typer.Option(..., help="Prior (and true) event rate"),
    level: float | None = typer.Option(None, help="Credible level"),
    prior_a: float | None = typer.Option(None, help="Prior cases a"),
    trials: int | None = typer.Option(None, help="Fixed number of trials"),
    criterion: str = typer.Option("quantile", help="quantile or cv"),
) -> None:
    """Smallest event count giving a reliable estimate."""
    with _exit_codes():
        settings = _settings({"prior_a": prior_a, "level": level}, verbose=False)
        if criterion not in ("quantile", "cv"):
            raise DataValidationError(f"unknown criterion {criterion!r}")
        y = required_cases_fn(
            pi0, settings.prior_a, settings.level, trials, criterion=cast(Criterion, criterion)
        )
    if y is None:
        typer.echo("unattainable")
        raise typer.Exit(1)
    typer.echo(str(y))


@app.command()
def fit(
    counts: Path = typer.Argument(..., help="Counts CSV"),
    edges: Path = typer.Argument(..., help="Edge list TSV"),
    out: Path = typer.Option(Path("fit-output"), help="Output directory"),
    model: str = typer.Option("restricted", help="standard, restricted or both"),
    iters: int | None = typer.Option(None, "--iters", help="Total iterations"),
    burnin: int | None = typer.Option(None, "--burnin", help="Burn-in iterations"),
    thin: int | None = typer.Option(None, help="Thinning factor"),
    a0_max: float | None = typer.Option(None, "--a0-max", help="Restriction bound A"),
    m0: int | None = typer.Option(None, help="Baseline neighbour count"),
    level: float | None = typer.Option(None, help="Credible level"),
    seed: int | None = typer.Option(None, help="Base seed"),
    workers: int | None = typer.Option(None, help="Parallel chains"),
    strict_regions: bool = typer.Option(
        False, "--strict-regions", help="Reject regions missing from the edges file"
    ),
    verbose: bool = typer.Option(False, help="Print effective settings"),
) -> None:
    """Fit standard and/or restricted CAR models, one chain per stratum-year."""
    overrides = {
        "iterations": iters,
        "burn_in": burnin,
        "thin": thin,
        "a0_max": a0_max,
        "m0": m0,
        "level": level,
        "seed": seed,
        "workers": workers,
        "strict_regions": strict_regions or None,
    }
    with _exit_codes():
        settings = _settings(overrides, verbose)
        if model not in ("standard", "restricted", "both"):
            raise ConfigError(f"unknown model {model!r}")
        # Resolve at call time so tests can monkeypatch reliable_rates.app.run_fit
        result = asyncio.run(
            app_module.run_fit(
                counts, edges, out, model=cast(app_module.ModelChoice, model), settings=settings
            )
        )
    typer.echo(f"wrote {len(result.summary)} assessments to {out}")


@app.command()
def info(
    draws: list[Path] = typer.Argument(..., help="Draws dumps written by fit"),
    m0: int | None = typer.Option(None, help="Baseline neighbour count"),
    out: Path | None = typer.Option(None, help="Output CSV (stdout when omitted)"),
) -> None:
    """Summarise baseline informativeness over the draws of each dump."""
    with _exit_codes():
        settings = _settings({"m0": m0}, verbose=False)
        _emit(app_module.info_table(draws, settings.m0), out)


@app.command("merge-geojson")
def merge_geojson_cmd(
    summary: Path = typer.Argument(..., help="summary.csv from fit, or assess output"),
    geojson: Path = typer.Argument(..., help="GeoJSON FeatureCollection"),
    out: Path = typer.Option(..., help="Enriched GeoJSON path"),
    join_key: str = typer.Option("name", help="Feature property holding the region id"),
    stratum: str | None = typer.Option(None, help="Stratum to map"),
    year: int | None = typer.Option(None, help="Year to map"),
    model: str | None = typer.Option(None, help="Model to map (fit summaries)"),
) -> None:
    """Copy reliability results into GeoJSON feature properties."""
    with _exit_codes():
        frame = pd.read_csv(summary, dtype={"region_id": str, "stratum": str})
        doc, report = merge_geojson(
            frame,
            load_geojson(geojson),
            join_key,
            stratum=stratum,
            year=year,
            model=model,
            run_metadata={"summary": summary.name},
        )
        write_geojson(doc, out)
    typer.echo(f"matched {report.matched} features")
    if report.unmatched_features:
        typer.echo(f"unmatched features: {', '.join(report.unmatched_features)}", err=True)
    if report.unmatched_rows:
        typer.echo(f"unmatched rows: {', '.join(report.unmatched_rows)}", err=True)


@app.command()
def simulate(
    scenario: Path = typer.Argument(..., help="key = value scenario file"),
    out: Path = typer.Option(..., help="Counts CSV to write"),
    seed: int | None = typer.Option(None, help="Override the scenario seed"),
) -> None:
    """Generate synthetic counts from a scenario file."""
    from .sim.scenario import load_scenario, simulate as simulate_fn

    with _exit_codes():
        sc = load_scenario(scenario)
        if seed is not None:
            sc = replace(sc, seed=seed)
        dataset = simulate_fn(sc)
        write_counts(dataset, out)
    typer.echo(f"wrote {len(dataset.records) + len(dataset.zero_trial)} rows to {out}")


@app.command()
def aggregate(
    counts: Path = typer.Argument(..., help="Counts CSV"),
    windows: str = typer.Option("1,2,3,4", help="Comma-separated window widths in years"),
    a0: float = typer.Option(5.0, help="Prior cases at the stratum mean rate"),
    level: float | None = typer.Option(None, help="Credible level"),
    out: Path | None = typer.Option(None, help="Output CSV (stdout when omitted)"),
) -> None:
    """Reliable-region counts when pooling consecutive years."""
    from .sim.aggregation import aggregation_experiment

    with _exit_codes():
        settings = _settings({"level": level}, verbose=False)
        try:
            widths = [int(w) for w in windows.split(",") if w.strip()]
        except ValueError:
            raise DataValidationError(f"bad window list {windows!r}") from None
        frame = aggregation_experiment(read_counts(counts), widths, a0, settings.level)
        _emit(frame, out)


if __name__ == "__main__":  # pragma: no cover
    app()
