"""Synthetic stratified count data over a contiguity graph.

Each stratum has a statewide births total and event rate. Births are split
between urban and rural regions by the stratum's urban-to-rural ratio, and
region rates vary around the statewide rate through a proper CAR field
(autocorrelation ``rho``) plus independent noise on the logit scale.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType

import numpy as np
from scipy import linalg, special

from .. import data
from ..errors import DataValidationError
from ..io.counts import Dataset, Key
from ..reliability.conjugate import CountRecord
from ..spatial.graph import AdjacencyGraph, load_graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StratumSpec:
    name: str
    births: int
    rate: float
    urban_ratio: float = 1.0
    # Explicit per-region rates or yearly trials bypass the generated field / allocation.
    fixed_rates: Mapping[str, float] | None = None
    fixed_trials: Mapping[str, int] | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise DataValidationError("stratum name must be non-empty")
        if not 0.0 <= self.rate <= 1.0:
            raise DataValidationError(f"{self.name}: rate must lie in [0, 1], got {self.rate}")
        if self.births < 0 or self.urban_ratio <= 0:
            raise DataValidationError(f"{self.name}: births >= 0 and urban_ratio > 0 required")
        for region, rate in (self.fixed_rates or {}).items():
            if not 0.0 <= rate <= 1.0:
                raise DataValidationError(f"{self.name}: rate for {region!r} outside [0, 1]")
        for region, n in (self.fixed_trials or {}).items():
            if n < 0:
                raise DataValidationError(f"{self.name}: negative trials for {region!r}")


@dataclass(frozen=True)
class SimScenario:
    graph: AdjacencyGraph
    strata: tuple[StratumSpec, ...]
    years: tuple[int, ...]
    seed: int = 2010
    sigma2: float = 0.01
    tau2: float = 0.05
    rho: float = 0.95
    # sd of the log-normal region size weights
    size_spread: float = 1.0
    urban: frozenset[str] = frozenset()
    # region -> rate multiplier, applied after the field is drawn
    outliers: Mapping[str, float] = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self) -> None:
        if not self.strata or not self.years:
            raise DataValidationError("scenario needs at least one stratum and one year")
        if len({s.name for s in self.strata}) != len(self.strata):
            raise DataValidationError("duplicate stratum names")
        if self.sigma2 < 0 or self.tau2 < 0 or self.size_spread < 0:
            raise DataValidationError("sigma2, tau2 and size_spread must be non-negative")
        if not 0.0 <= self.rho < 1.0:
            raise DataValidationError(f"rho must lie in [0, 1), got {self.rho}")
        unknown = (set(self.urban) | set(self.outliers)) - set(self.graph.node_ids)
        if unknown:
            raise DataValidationError(f"scenario names unknown regions: {sorted(unknown)}")
        if any(m < 0 for m in self.outliers.values()):
            raise DataValidationError("outlier multipliers must be non-negative")


def _rng(scenario: SimScenario, *stream: int) -> np.random.Generator:
    return np.random.default_rng([scenario.seed, *stream])


def proper_car_field(
    g: AdjacencyGraph, tau2: float, rho: float, rng: np.random.Generator
) -> np.ndarray:
    """One draw from N(0, tau2 (D - rho W)^-1); isolated regions get variance tau2."""
    if tau2 == 0:
        return np.zeros(g.size)
    d = np.maximum(g.neighbor_counts.astype(float), 1.0)
    precision = (np.diag(d) - rho * g.adjacency.toarray()) / tau2
    chol = np.linalg.cholesky(precision)
    return linalg.solve_triangular(chol, rng.standard_normal(g.size), lower=True, trans="T")


def stratum_rates(scenario: SimScenario, index: int) -> np.ndarray:
    """True rates of stratum ``index`` in graph node order."""
    spec = scenario.strata[index]
    g = scenario.graph
    if spec.fixed_rates is not None:
        missing = set(g.node_ids) - set(spec.fixed_rates)
        if missing:
            raise DataValidationError(f"{spec.name}: fixed_rates lacks {sorted(missing)[:5]}")
        rates = np.array([spec.fixed_rates[r] for r in g.node_ids], dtype=float)
    elif spec.rate in (0.0, 1.0):
        rates = np.full(g.size, spec.rate)
    else:
        rng = _rng(scenario, 0, index)
        z = proper_car_field(g, scenario.tau2, scenario.rho, rng)
        noise = rng.normal(0.0, np.sqrt(scenario.sigma2), g.size)
        rates = special.expit(special.logit(spec.rate) + z + noise)
    for region, mult in scenario.outliers.items():
        i = g.index_of(region)
        rates[i] = min(rates[i] * mult, 1.0)
    return rates


def allocate_births(
    total: int,
    urban_ratio: float,
    regions: Sequence[str],
    urban: frozenset[str],
    rng: np.random.Generator,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Split ``total`` births across ``regions`` so urban:rural totals follow ``urban_ratio``.

    Every region receives at least one birth; the rest is multinomial within
    the urban and rural groups according to ``weights`` (uniform by default).
    """
    size = len(regions)
    if total < size:
        raise DataValidationError(f"{total} births cannot cover {size} regions")
    w = np.ones(size) if weights is None else np.asarray(weights, dtype=float)
    is_urban = np.array([r in urban for r in regions])
    counts = np.ones(size, dtype=np.int64)
    remaining = total - size
    groups = [g for g in (is_urban, ~is_urban) if g.any()]
    if len(groups) == 2:
        urban_share = urban_ratio / (1.0 + urban_ratio)
        split = [round(remaining * urban_share)]
        split.append(remaining - split[0])
    else:
        split = [remaining]
    for mask, amount in zip(groups, split, strict=True):
        p = w[mask] / w[mask].sum()
        counts[mask] += rng.multinomial(amount, p)
    return counts


def simulate(scenario: SimScenario) -> Dataset:
    """Binomial counts for every region, stratum and year of ``scenario``."""
    g = scenario.graph
    records: list[CountRecord] = []
    zero_trial: list[Key] = []
    for si, spec in enumerate(scenario.strata):
        rates = stratum_rates(scenario, si)
        # Region size weights are fixed per stratum so yearly totals vary only by sampling.
        weights = _rng(scenario, 1, si).lognormal(0.0, scenario.size_spread, g.size)
        for year in scenario.years:
            rng = _rng(scenario, 2, si, year)
            if spec.fixed_trials is not None:
                trials = np.array([spec.fixed_trials.get(r, 0) for r in g.node_ids])
            else:
                trials = allocate_births(
                    spec.births, spec.urban_ratio, g.node_ids, scenario.urban, rng, weights
                )
            events = rng.binomial(trials, rates)
            for region, y, n in zip(g.node_ids, events, trials, strict=True):
                if n == 0:
                    zero_trial.append((region, spec.name, year))
                else:
                    records.append(CountRecord(region, spec.name, year, int(y), int(n)))
    logger.info("simulated", extra={"event_type": "simulated"})
    return Dataset(tuple(records), tuple(zero_trial))


def true_rates(scenario: SimScenario) -> dict[str, dict[str, float]]:
    """stratum -> region -> true rate."""
    return {
        spec.name: dict(zip(scenario.graph.node_ids, stratum_rates(scenario, si), strict=True))
        for si, spec in enumerate(scenario.strata)
    }


def _parse_years(text: str) -> tuple[int, ...]:
    if "-" in text:
        start, end = (int(p) for p in text.split("-", 1))
        return tuple(range(start, end + 1))
    return tuple(int(p) for p in text.split(","))


def load_scenario(path: str | Path, graph: AdjacencyGraph | None = None) -> SimScenario:
    """Read a ``key = value`` scenario file.

    Recognised keys: ``seed``, ``years`` (``2010-2019`` or a comma list),
    ``edges`` (path relative to the scenario file), ``urban`` (comma list),
    ``sigma2``, ``tau2``, ``rho``, ``size_spread``, ``stratum.<name>.births|rate|urban_ratio``
    and ``outlier.<region>`` multipliers.
    """
    path = Path(path)
    values: dict[str, str] = {}
    strata: dict[str, dict[str, str]] = {}
    outliers: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataValidationError(f"{path}:{lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            if key.startswith("stratum."):
                parts = key.split(".")
                if len(parts) != 3 or parts[2] not in {"births", "rate", "urban_ratio"}:
                    raise DataValidationError(f"{path}:{lineno}: bad stratum key {key!r}")
                strata.setdefault(parts[1], {})[parts[2]] = value
            elif key.startswith("outlier."):
                outliers[key.split(".", 1)[1]] = float(value)
            elif key in {"seed", "years", "edges", "urban", "sigma2", "tau2", "rho", "size_spread"}:
                values[key] = value
            else:
                raise DataValidationError(f"{path}:{lineno}: unknown key {key!r}")

    if graph is None:
        if "edges" not in values:
            raise DataValidationError(f"{path}: no edges file and no graph given")
        graph = load_graph(path.parent / values["edges"])
    try:
        specs = tuple(
            StratumSpec(
                name=name,
                births=int(fields["births"]),
                rate=float(fields["rate"]),
                urban_ratio=float(fields.get("urban_ratio", 1.0)),
            )
            for name, fields in strata.items()
        )
    except KeyError as exc:
        raise DataValidationError(f"{path}: stratum missing {exc.args[0]!r}") from None
    urban = frozenset(u.strip() for u in values.get("urban", "").split(",") if u.strip())
    return SimScenario(
        graph=graph,
        strata=specs,
        years=_parse_years(values.get("years", "2010")),
        seed=int(values.get("seed", 2010)),
        sigma2=float(values.get("sigma2", 0.01)),
        tau2=float(values.get("tau2", 0.05)),
        rho=float(values.get("rho", 0.95)),
        size_spread=float(values.get("size_spread", 1.0)),
        urban=urban,
        outliers=MappingProxyType(outliers),
    )


def pa_like(seed: int | None = None) -> SimScenario:
    """The bundled Pennsylvania-shaped scenario, optionally reseeded."""
    scenario = load_scenario(data.path(data.PA_SCENARIO))
    if seed is None:
        return scenario
    return replace(scenario, seed=seed)
