import asyncio
import sys
from pathlib import Path

import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from reliable_rates import app, data
from reliable_rates.config import Settings
from reliable_rates.errors import DataValidationError
from reliable_rates.io import Dataset, RunManifest, read_counts, read_draws, write_counts
from reliable_rates.reliability import CountRecord, Family
from reliable_rates.sim import pa_like, simulate
from reliable_rates.summary import COMPARISON_COLUMNS, SUMMARY_COLUMNS

FAST = {"iterations": 400, "burn_in": 200, "thin": 1, "seed": 2010}


def _settings(**overrides) -> Settings:
    return Settings(_env_file=None, **{**FAST, **overrides})


def _pa_counts(tmp_path: Path, cells: list[tuple[str, int]]) -> Path:
    dataset = simulate(pa_like())
    records = tuple(r for s, y in cells for r in dataset.cell(s, y))
    path = tmp_path / "counts.csv"
    write_counts(Dataset(records), path)
    return path


def test_assess_counts_uses_the_pooled_rate_prior():
    dataset = Dataset(
        (
            CountRecord("a", "s", 2010, 16, 1600),
            CountRecord("b", "s", 2010, 2, 400),
            CountRecord("c", "t", 2010, 5, 50),
        )
    )
    frame = app.assess_counts(dataset, 0.5, 0.95)
    assert list(frame.columns) == app.ASSESS_COLUMNS
    assert frame["region_id"].tolist() == ["a", "b", "c"]
    assert frame["family"].unique().tolist() == ["beta"]
    fixed = app.assess_counts(dataset, 0.5, 0.95, pi0=0.01)
    assert bool(fixed.loc[0, "reliable"])
    assert not bool(fixed.loc[1, "reliable"])


def test_assess_counts_poisson_family():
    dataset = Dataset((CountRecord("a", "s", 2010, 30, 3000),))
    frame = app.assess_counts(dataset, 0.5, 0.95, pi0=0.01, family=Family.GAMMA)
    assert frame.loc[0, "family"] == "gamma"
    assert frame.loc[0, "median"] == pytest.approx(0.01, rel=0.05)


def test_assess_counts_validates_arguments():
    dataset = Dataset((CountRecord("a", "s", 2010, 3, 30),))
    with pytest.raises(DataValidationError):
        app.assess_counts(dataset, 0.0, 0.95)
    with pytest.raises(DataValidationError):
        app.assess_counts(dataset, 0.5, 0.95, pi0=1.0)
    with pytest.raises(DataValidationError):
        app.assess_counts(dataset, 0.5, 1.2)


def test_plan_chains_shares_seeds_between_models():
    dataset = Dataset(
        (CountRecord("a", "s", 2011, 3, 30), CountRecord("b", "s", 2010, 3, 30)),
        (("c", "s", 2012),),
    )
    g = app.fit_graph(dataset, data.path(data.PA_EDGES))
    assert {"a", "b", "c", "Adams"} <= set(g.node_ids)
    tasks = app.plan_chains(dataset, g, _settings(), "both")
    assert [t.key for t in tasks] == [
        ("restricted", "s", 2010),
        ("restricted", "s", 2011),
        ("standard", "s", 2010),
        ("standard", "s", 2011),
    ]
    assert tasks[0].config.seed == tasks[2].config.seed
    assert tasks[0].config.seed != tasks[1].config.seed
    assert tasks[0].config.restricted and not tasks[2].config.restricted


def test_run_fit_writes_every_output(tmp_path):
    counts = _pa_counts(tmp_path, [("hispanic", 2010)])
    out = tmp_path / "fit"
    result = asyncio.run(
        app.run_fit(counts, data.path(data.PA_EDGES), out, model="both", settings=_settings())
    )
    summary = pd.read_csv(out / "summary.csv")
    assert list(summary.columns) == SUMMARY_COLUMNS
    assert len(summary) == 2 * 67
    assert set(summary["model"]) == {"standard", "restricted"}
    assert summary["low_sample"].all()
    comparison = pd.read_csv(out / "comparison.csv")
    assert list(comparison.columns) == COMPARISON_COLUMNS
    assert len(comparison) == 67
    info = pd.read_csv(out / "informativeness.csv")
    assert list(info.columns) == app.INFO_COLUMNS
    restricted_info = info[info["model"] == "restricted"].iloc[0]
    assert restricted_info["a0_max"] < 5.0
    draws = read_draws(out / "draws" / "restricted_hispanic_2010.csv")
    assert len(draws) == 200
    manifest = RunManifest.read(out / "manifest.json")
    assert len(manifest.chains) == 2
    assert manifest.settings["iterations"] == 400
    assert "seed" not in manifest.chain_config
    assert set(manifest.inputs) == {"counts", "edges"}
    assert result.comparison is not None


def test_run_fit_rejects_empty_counts(tmp_path):
    counts = tmp_path / "counts.csv"
    counts.write_text("region_id,stratum,year,events,trials\nAdams,s,2010,0,0\n", encoding="utf-8")
    edges = data.path(data.PA_EDGES)
    with pytest.raises(DataValidationError, match="no records"):
        asyncio.run(app.run_fit(counts, edges, tmp_path / "out", settings=_settings()))


def test_worker_pool_matches_serial_run(tmp_path):
    counts = _pa_counts(tmp_path, [("asian", 2010), ("asian", 2011)])
    edges = data.path(data.PA_EDGES)
    serial = asyncio.run(app.run_fit(counts, edges, tmp_path / "serial", settings=_settings()))
    pooled = asyncio.run(
        app.run_fit(counts, edges, tmp_path / "pooled", settings=_settings(workers=2))
    )
    pd.testing.assert_frame_equal(serial.summary, pooled.summary)
    assert (tmp_path / "serial" / "summary.csv").read_bytes() == (
        tmp_path / "pooled" / "summary.csv"
    ).read_bytes()


def test_info_table_reads_draws_dumps(tmp_path):
    counts = _pa_counts(tmp_path, [("black", 2012)])
    out = tmp_path / "fit"
    asyncio.run(app.run_fit(counts, data.path(data.PA_EDGES), out, settings=_settings()))
    table = app.info_table(sorted((out / "draws").glob("*.csv")), m0=3)
    assert table["draws"].tolist() == ["restricted_black_2012.csv"]
    assert table.loc[0, "a0_max"] < 5.0


def test_strict_regions_rejects_unknown_regions(tmp_path):
    counts = tmp_path / "counts.csv"
    records = (CountRecord("Adams", "s", 2010, 3, 30), CountRecord("Atlantis", "s", 2010, 2, 20))
    write_counts(Dataset(records), counts)
    edges = data.path(data.PA_EDGES)
    dataset = read_counts(counts)
    assert "Atlantis" in app.fit_graph(dataset, edges).node_ids
    with pytest.raises(DataValidationError, match="Atlantis"):
        app.fit_graph(dataset, edges, strict=True)
    with pytest.raises(DataValidationError, match="absent from the graph"):
        asyncio.run(
            app.run_fit(counts, edges, tmp_path / "out", settings=_settings(strict_regions=True))
        )
    assert not (tmp_path / "out").exists()
