"""Metropolis-within-Gibbs for the binomial-logit CAR model.

One chain models one stratum-year::

    y_i ~ Bin(n_i, expit(eta_i))
    eta_i ~ Norm(beta0 + z_i, sigma2)
    z ~ intrinsic CAR(tau2), sum-to-zero per connected component
    p(beta0) ∝ 1, sigma2 ~ IG(1, 1/100), tau2 ~ IG(1, 1/7)

Each scan updates eta (random-walk Metropolis per region), z, beta0, sigma2
and tau2 (Gibbs). The restricted model additionally truncates the beta0,
sigma2 and tau2 conditionals to the set where the baseline informativeness
a0_hat stays below the configured bound, by resampling until a draw lands
inside it.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg, special

from ..errors import ConfigError, DataValidationError, ErrorCategory, SamplerDiagnosticError
from ..metrics import Timer, chains_completed_total, constraint_stalls_total
from ..reliability.conjugate import CountRecord
from ..spatial.graph import AdjacencyGraph, car_conditional_moments, icar_quadratic
from .config import InverseGammaPrior, ModelConfig
from .diagnostics import chain_diagnostics
from .informativeness import InfoInputs, a_hat_binomial

logger = logging.getLogger(__name__)

ModelName = Literal["standard", "restricted"]

_INFLATE_LIMIT = 64


@dataclass
class ChainState:
    eta: np.ndarray
    z: np.ndarray
    beta0: float
    sigma2: float
    tau2: float
    a0_hat: float

    @property
    def pi(self) -> np.ndarray:
        return special.expit(self.eta)

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.eta).all()
            and np.isfinite(self.z).all()
            and math.isfinite(self.beta0)
            and math.isfinite(self.sigma2)
            and math.isfinite(self.tau2)
        )


@dataclass(frozen=True)
class ChainMetadata:
    key: str
    model: ModelName
    seed: int
    config: dict
    graph_digest: str
    data_digest: str
    acceptance_rates: tuple[float, ...]
    proposal_scales: tuple[float, ...]
    burn_in_scales: tuple[float, ...]
    stall_count: int
    constrained_updates: int
    zero_trial: tuple[str, ...]
    elapsed_ms: float
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def mean_acceptance(self) -> float:
        return float(np.mean(self.acceptance_rates)) if self.acceptance_rates else math.nan


@dataclass(frozen=True)
class PosteriorDraws:
    """Thinned draws; region columns follow the graph's node order."""

    region_ids: tuple[str, ...]
    pi: np.ndarray
    z: np.ndarray
    beta0: np.ndarray
    sigma2: np.ndarray
    tau2: np.ndarray
    a0_hat: np.ndarray
    metadata: ChainMetadata

    @property
    def n_draws(self) -> int:
        return int(self.beta0.size)

    def region_draws(self, region_id: str) -> np.ndarray:
        try:
            col = self.region_ids.index(region_id)
        except ValueError:
            raise DataValidationError(f"unknown region {region_id!r}") from None
        return self.pi[:, col]


def chain_seed(base_seed: int, stratum: str, year: int) -> int:
    """Per-chain seed: ``base_seed`` XOR the first 8 bytes of blake2b("stratum|year")."""
    digest = hashlib.blake2b(f"{stratum}|{year}".encode(), digest_size=8).digest()
    return (base_seed ^ int.from_bytes(digest, "big")) & (2**64 - 1)


def adapt_proposals(
    scales: np.ndarray,
    acceptance: np.ndarray,
    *,
    target: tuple[float, float] = (0.3, 0.5),
    factor: float = 1.25,
) -> np.ndarray:
    """Widen proposals accepting too often, narrow those accepting too rarely."""
    low, high = target
    out = np.asarray(scales, dtype=float).copy()
    out[acceptance > high] *= factor
    out[acceptance < low] /= factor
    return out


def draw_beta0(rng: np.random.Generator, eta: np.ndarray, z: np.ndarray, sigma2: float) -> float:
    """Gaussian conditional of the intercept under a flat prior."""
    return float(rng.normal(np.mean(eta - z), math.sqrt(sigma2 / eta.size)))


def draw_sigma2(
    rng: np.random.Generator,
    eta: np.ndarray,
    beta0: float,
    z: np.ndarray,
    prior: InverseGammaPrior,
) -> float:
    """Inverse-gamma conditional of the non-spatial variance."""
    r = eta - beta0 - z
    shape = prior.shape + eta.size / 2
    scale = prior.scale + 0.5 * float(r @ r)
    return scale / float(rng.gamma(shape))


def draw_tau2(
    rng: np.random.Generator, z: np.ndarray, g: AdjacencyGraph, prior: InverseGammaPrior
) -> float:
    """Inverse-gamma conditional of the CAR variance; rank is I minus components."""
    shape = prior.shape + (g.size - g.n_components) / 2
    scale = prior.scale + 0.5 * icar_quadratic(z, g)
    return scale / float(rng.gamma(shape))


def _cell_arrays(
    records: Sequence[CountRecord], g: AdjacencyGraph
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...], str]:
    y = np.zeros(g.size, dtype=np.int64)
    n = np.zeros(g.size, dtype=np.int64)
    seen: set[int] = set()
    cells = {(r.stratum, r.year) for r in records}
    if len(cells) > 1:
        raise DataValidationError(f"records span several stratum-years: {sorted(cells)}")
    for rec in records:
        i = g.index_of(rec.region_id)
        if i in seen:
            raise DataValidationError(f"duplicate record for region {rec.region_id!r}")
        seen.add(i)
        y[i], n[i] = rec.events, rec.trials
    zero_trial = tuple(g.node_ids[i] for i in range(g.size) if i not in seen)
    h = hashlib.sha256()
    for i in sorted(range(g.size), key=lambda k: g.node_ids[k]):
        h.update(f"{g.node_ids[i]}\t{y[i]}\t{n[i]}\n".encode())
    return y, n, zero_trial, h.hexdigest()


class _Chain:
    """Mutable sampler state for a single chain over a canonically ordered graph."""

    def __init__(
        self,
        y: np.ndarray,
        n: np.ndarray,
        g: AdjacencyGraph,
        cfg: ModelConfig,
        key: str,
        log_fields: dict[str, object] | None = None,
    ) -> None:
        self.y = y.astype(float)
        self.n = n.astype(float)
        self.g = g
        self.cfg = cfg
        self.key = key
        self.log_fields = log_fields or {"chain": key}
        self.rng = np.random.default_rng(cfg.seed)
        self.size = g.size

        m = g.neighbor_counts
        self.free = np.flatnonzero(m > 0)
        labels = g.component_labels
        self.components = [
            idx for idx in (self.free[labels[self.free] == c] for c in np.unique(labels))
            if idx.size
        ]
        self.q_free = g.laplacian()[np.ix_(self.free, self.free)]
        free_set = set(self.free.tolist())
        self.colour_classes = [
            np.array([i for i in cls if i in free_set], dtype=np.intp) for cls in g.coloring()
        ]
        self.colour_classes = [cls for cls in self.colour_classes if cls.size]

        self.scales = np.full(self.size, cfg.proposal_sd_init)
        self.accepted = np.zeros(self.size)
        self.window_accepted = np.zeros(self.size)
        self.stalls = 0
        self.stalls_after_burn_in = 0
        self.constrained_updates = 0
        self.state = self._initial_state()

    # -- informativeness constraint -------------------------------------------------

    def _a0(self, beta0: float, sigma2: float, tau2: float) -> float:
        return a_hat_binomial(InfoInputs(beta0, sigma2, tau2, self.cfg.baseline_m0))

    def _within(self, beta0: float, sigma2: float, tau2: float) -> bool:
        bound = self.cfg.restriction_bound
        return bound is None or self._a0(beta0, sigma2, tau2) < bound

    def _initial_state(self) -> ChainState:
        cfg = self.cfg
        pooled = (self.y.sum() + 0.5) / (self.n.sum() + 1.0)
        beta0 = cfg.fixed_beta0 if cfg.fixed_beta0 is not None else float(special.logit(pooled))
        eta = np.where(
            self.n > 0, special.logit((self.y + 0.5) / (self.n + 1.0)), beta0
        ).astype(float)
        sigma2 = cfg.fixed_sigma2 if cfg.fixed_sigma2 is not None else 0.1
        tau2 = cfg.fixed_tau2 if cfg.fixed_tau2 is not None else 0.1
        if cfg.restricted:
            if cfg.fixed_sigma2 is not None and cfg.fixed_tau2 is not None:
                if not self._within(beta0, sigma2, tau2):
                    raise ConfigError("fixed variances violate the informativeness bound")
            for _ in range(_INFLATE_LIMIT):
                if self._within(beta0, sigma2, tau2):
                    break
                if cfg.fixed_sigma2 is None:
                    sigma2 *= 2.0
                if cfg.fixed_tau2 is None:
                    tau2 *= 2.0
            else:
                raise ConfigError("could not find a starting state inside the bound")
        z = np.zeros(self.size)
        return ChainState(eta, z, beta0, sigma2, tau2, self._a0(beta0, sigma2, tau2))

    def _truncated(
        self,
        name: str,
        draw: Callable[[], float],
        inside: Callable[[float], bool],
        current: float,
        post_burn_in: bool,
    ) -> float:
        if not self.cfg.restricted:
            return draw()
        if post_burn_in:
            self.constrained_updates += 1
        for _ in range(self.cfg.max_rejections):
            value = draw()
            if inside(value):
                return value
        self.stalls += 1
        if post_burn_in:
            self.stalls_after_burn_in += 1
        logger.debug(
            "constraint_stall",
            extra={
                "event_type": "constraint_stall",
                **self.log_fields,
                "stall_count": self.stalls,
                "parameter": name,
                "error_category": ErrorCategory.SAMPLER.value,
            },
        )
        return current

    # -- update steps ---------------------------------------------------------------

    def _update_eta(self) -> None:
        s = self.state
        mu = s.beta0 + s.z
        prop = s.eta + self.scales * self.rng.standard_normal(self.size)
        log_ratio = (
            self.y * (prop - s.eta)
            - self.n * (np.logaddexp(0.0, prop) - np.logaddexp(0.0, s.eta))
            - ((prop - mu) ** 2 - (s.eta - mu) ** 2) / (2.0 * s.sigma2)
        )
        accept = np.log(self.rng.random(self.size)) < log_ratio
        s.eta = np.where(accept, prop, s.eta)
        self.accepted += accept
        self.window_accepted += accept

    def _update_z(self) -> None:
        s = self.state
        free = self.free
        if free.size == 0:
            return
        if self.cfg.z_update == "block":
            precision = self.q_free / s.tau2 + np.eye(free.size) / s.sigma2
            chol = np.linalg.cholesky(precision)
            mean = linalg.cho_solve((chol, True), (s.eta[free] - s.beta0) / s.sigma2)
            noise = linalg.solve_triangular(
                chol, self.rng.standard_normal(free.size), lower=True, trans="T"
            )
            s.z[free] = mean + noise
        else:
            for cls in self.colour_classes:
                nb_mean, nb_var = car_conditional_moments(cls, s.z, s.tau2, self.g)
                prec = 1.0 / nb_var + 1.0 / s.sigma2
                mean = (nb_mean / nb_var + (s.eta[cls] - s.beta0) / s.sigma2) / prec
                s.z[cls] = mean + self.rng.standard_normal(cls.size) / np.sqrt(prec)
        for idx in self.components:
            s.z[idx] -= s.z[idx].mean()

    def _update_globals(self, post_burn_in: bool) -> None:
        s, cfg, rng = self.state, self.cfg, self.rng
        if cfg.fixed_beta0 is None:
            s.beta0 = self._truncated(
                "beta0",
                lambda: draw_beta0(rng, s.eta, s.z, s.sigma2),
                lambda v: self._within(v, s.sigma2, s.tau2),
                s.beta0,
                post_burn_in,
            )
        if cfg.fixed_sigma2 is None:
            s.sigma2 = self._truncated(
                "sigma2",
                lambda: draw_sigma2(rng, s.eta, s.beta0, s.z, cfg.sigma2_prior),
                lambda v: self._within(s.beta0, v, s.tau2),
                s.sigma2,
                post_burn_in,
            )
        if cfg.fixed_tau2 is None:
            s.tau2 = self._truncated(
                "tau2",
                lambda: draw_tau2(rng, s.z, self.g, cfg.tau2_prior),
                lambda v: self._within(s.beta0, s.sigma2, v),
                s.tau2,
                post_burn_in,
            )
        s.a0_hat = self._a0(s.beta0, s.sigma2, s.tau2)

    def run(self) -> dict[str, np.ndarray]:
        cfg = self.cfg
        k = cfg.retained_draws
        out = {
            "pi": np.empty((k, self.size)),
            "z": np.empty((k, self.size)),
            "beta0": np.empty(k),
            "sigma2": np.empty(k),
            "tau2": np.empty(k),
            "a0_hat": np.empty(k),
        }
        self.burn_in_scales = self.scales.copy()
        stored = 0
        for t in range(cfg.total_iterations):
            post = t >= cfg.burn_in
            self._update_eta()
            self._update_z()
            self._update_globals(post)
            if not self.state.is_finite():
                logger.error(
                    "non_finite_state",
                    extra={
                        "event_type": "non_finite_state",
                        **self.log_fields,
                        "iteration": t,
                        "error_category": ErrorCategory.SAMPLER.value,
                    },
                )
                raise SamplerDiagnosticError(f"chain {self.key}: non-finite state at iteration {t}")

            if not post and (t + 1) % cfg.adapt_window == 0:
                rates = self.window_accepted / cfg.adapt_window
                self.scales = adapt_proposals(self.scales, rates)
                self.window_accepted[:] = 0
            if t + 1 == cfg.burn_in:
                self._finish_burn_in()

            if post and (t - cfg.burn_in + 1) % cfg.thin == 0 and stored < k:
                s = self.state
                out["pi"][stored] = s.pi
                out["z"][stored] = s.z
                out["beta0"][stored] = s.beta0
                out["sigma2"][stored] = s.sigma2
                out["tau2"][stored] = s.tau2
                out["a0_hat"][stored] = s.a0_hat
                stored += 1
                self._check_stalls(t)
        return out

    def _finish_burn_in(self) -> None:
        self.burn_in_scales = self.scales.copy()
        rate = float(self.accepted.mean() / self.cfg.burn_in)
        self.accepted[:] = 0
        logger.info(
            "burn_in_complete",
            extra={
                "event_type": "burn_in_complete",
                **self.log_fields,
                "iteration": self.cfg.burn_in,
                "acceptance_rate": rate,
                "stall_count": self.stalls,
            },
        )

    def _check_stalls(self, t: int) -> None:
        if self.constrained_updates < 3 * self.cfg.adapt_window:
            return
        rate = self.stalls_after_burn_in / self.constrained_updates
        if rate > self.cfg.stall_abort_rate:
            logger.error(
                "constraint_stall_abort",
                extra={
                    "event_type": "constraint_stall_abort",
                    **self.log_fields,
                    "iteration": t,
                    "stall_count": self.stalls,
                    "error_category": ErrorCategory.SAMPLER.value,
                },
            )
            raise SamplerDiagnosticError(
                f"chain {self.key}: {rate:.0%} of constrained updates stalled after burn-in"
            )


def _fit(
    records: Sequence[CountRecord], g: AdjacencyGraph, cfg: ModelConfig, model: ModelName
) -> PosteriorDraws:
    if g.size < 2:
        raise DataValidationError("model fitting needs at least two regions")
    y, n, zero_trial, data_digest = _cell_arrays(records, g)
    cell = sorted({(r.stratum, r.year) for r in records})
    key = f"{model}:{cell[0][0]}|{cell[0][1]}" if cell else f"{model}:empty"
    log_fields: dict[str, object] = {"chain": key}
    if cell:
        log_fields.update(stratum=cell[0][0], year=cell[0][1])
    if zero_trial:
        logger.warning(
            "zero_trial_regions",
            extra={
                "event_type": "zero_trial_regions",
                **log_fields,
                "error_category": ErrorCategory.VALIDATION.value,
            },
        )

    # Canonical (sorted-id) order inside the chain makes results equivariant
    # to any permutation of the input.
    order = np.array(sorted(range(g.size), key=lambda i: g.node_ids[i]), dtype=np.intp)
    canonical = g.permuted([g.node_ids[i] for i in order])

    timer = Timer()
    logger.info("chain_start", extra={"event_type": "chain_start", **log_fields})
    with timer.time():
        chain = _Chain(y[order], n[order], canonical, cfg, key, log_fields)
        raw = chain.run()

    pi = np.empty_like(raw["pi"])
    z = np.empty_like(raw["z"])
    pi[:, order] = raw["pi"]
    z[:, order] = raw["z"]
    scales = np.empty(g.size)
    burn_scales = np.empty(g.size)
    accept = np.empty(g.size)
    scales[order] = chain.scales
    burn_scales[order] = chain.burn_in_scales
    accept[order] = chain.accepted / max(cfg.total_iterations - cfg.burn_in, 1)

    chains_completed_total.inc()
    constraint_stalls_total.inc(chain.stalls)
    diagnostics = chain_diagnostics(raw)
    metadata = ChainMetadata(
        key=key,
        model=model,
        seed=cfg.seed,
        config=cfg.model_dump(mode="json"),
        graph_digest=g.digest(),
        data_digest=data_digest,
        acceptance_rates=tuple(float(a) for a in accept),
        proposal_scales=tuple(float(s) for s in scales),
        burn_in_scales=tuple(float(s) for s in burn_scales),
        stall_count=chain.stalls,
        constrained_updates=chain.constrained_updates,
        zero_trial=zero_trial,
        elapsed_ms=timer.last_ms or 0.0,
        diagnostics=diagnostics,
    )
    logger.info(
        "chain_done",
        extra={
            "event_type": "chain_done",
            **log_fields,
            "acceptance_rate": metadata.mean_acceptance,
            "stall_count": chain.stalls,
            "elapsed_ms": metadata.elapsed_ms,
        },
    )
    return PosteriorDraws(
        region_ids=g.node_ids,
        pi=pi,
        z=z,
        beta0=raw["beta0"],
        sigma2=raw["sigma2"],
        tau2=raw["tau2"],
        a0_hat=raw["a0_hat"],
        metadata=metadata,
    )


def fit_standard(
    records: Sequence[CountRecord], g: AdjacencyGraph, cfg: ModelConfig
) -> PosteriorDraws:
    """Standard CAR model for one stratum-year."""
    if cfg.restricted:
        raise ConfigError("fit_standard takes a config without restriction_bound")
    return _fit(records, g, cfg, "standard")


def fit_restricted(
    records: Sequence[CountRecord], g: AdjacencyGraph, cfg: ModelConfig
) -> PosteriorDraws:
    """CAR model truncated to a0_hat < restriction_bound for one stratum-year."""
    if not cfg.restricted:
        raise ConfigError("fit_restricted needs restriction_bound")
    return _fit(records, g, cfg, "restricted")
