import logging
import sys
from pathlib import Path

import numpy as np
import pydantic
import pytest
from scipy import stats

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from reliable_rates import data
from reliable_rates.errors import ConfigError, DataValidationError, SamplerDiagnosticError
from reliable_rates.io.counts import records_from_arrays
from reliable_rates.metrics import chains_completed_total
from reliable_rates.model import (
    InverseGammaPrior,
    ModelConfig,
    a_hat_binomial_array,
    adapt_proposals,
    chain_seed,
    draw_beta0,
    draw_sigma2,
    draw_tau2,
    fit_restricted,
    fit_standard,
)
from reliable_rates.model import sampler as sampler_module
from reliable_rates.reliability import CountRecord
from reliable_rates.sim import pa_like, quadrature_posterior_2node, simulate
from reliable_rates.spatial import build_graph, load_graph

SHORT = {"total_iterations": 600, "burn_in": 300, "thin": 1, "adapt_window": 50, "seed": 7}


def _path_graph(k: int = 5):
    ids = [f"r{i}" for i in range(k)]
    return build_graph(list(zip(ids, ids[1:])), ids)


def _records(g, events, trials, stratum="s", year=2010):
    return records_from_arrays(g.node_ids, stratum, year, np.asarray(events), np.asarray(trials))


def _pa_cell(stratum: str = "white", year: int = 2010):
    dataset = simulate(pa_like())
    return dataset.cell(stratum, year), load_graph(data.path(data.PA_EDGES))


def test_chain_seed_is_stable_and_distinct():
    a = chain_seed(2010, "white", 2010)
    assert a == chain_seed(2010, "white", 2010)
    assert a != chain_seed(2010, "white", 2011)
    assert a != chain_seed(2010, "black", 2010)
    assert 0 <= a < 2**64


def test_adapt_proposals_moves_towards_target_band():
    scales = np.array([1.0, 1.0, 1.0])
    out = adapt_proposals(scales, np.array([0.9, 0.1, 0.4]))
    assert out[0] > 1.0
    assert out[1] < 1.0
    assert out[2] == 1.0
    assert scales.tolist() == [1.0, 1.0, 1.0]


def test_sigma2_conditional_is_inverse_gamma():
    rng = np.random.default_rng(0)
    eta = np.array([-2.0, -1.5, -2.5, -1.8, -2.2])
    z = np.array([0.1, -0.1, 0.05, -0.05, 0.0])
    prior = InverseGammaPrior(shape=1.0, scale=0.01)
    draws = np.array([draw_sigma2(rng, eta, -2.0, z, prior) for _ in range(100_000)])
    r = eta + 2.0 - z
    target = stats.invgamma(a=1.0 + 5 / 2, scale=0.01 + 0.5 * r @ r)
    assert stats.kstest(draws, target.cdf).pvalue > 1e-3


def test_tau2_conditional_uses_rank_deficiency():
    # two components plus an isolated node: rank is 6 - 3
    g = build_graph([("a", "b"), ("b", "c"), ("d", "e")], ["a", "b", "c", "d", "e", "f"])
    rng = np.random.default_rng(1)
    z = np.array([0.3, -0.1, -0.2, 0.4, -0.4, 0.0])
    prior = InverseGammaPrior(shape=1.0, scale=1 / 7)
    draws = np.array([draw_tau2(rng, z, g, prior) for _ in range(100_000)])
    quad = (0.4**2 + 0.1**2) + 0.8**2
    target = stats.invgamma(a=1.0 + 3 / 2, scale=1 / 7 + 0.5 * quad)
    assert stats.kstest(draws, target.cdf).pvalue > 1e-3


def test_beta0_conditional_is_gaussian():
    rng = np.random.default_rng(2)
    eta = np.array([-2.0, -1.0, -3.0, -2.4])
    z = np.array([0.2, 0.1, -0.1, -0.2])
    draws = np.array([draw_beta0(rng, eta, z, 0.4) for _ in range(50_000)])
    target = stats.norm(loc=np.mean(eta - z), scale=np.sqrt(0.4 / 4))
    assert stats.kstest(draws, target.cdf).pvalue > 1e-3


def test_fit_is_deterministic_for_a_seed():
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    cfg = ModelConfig(**SHORT)
    first, second = fit_standard(recs, g, cfg), fit_standard(recs, g, cfg)
    np.testing.assert_array_equal(first.pi, second.pi)
    np.testing.assert_array_equal(first.tau2, second.tau2)
    other = fit_standard(recs, g, cfg.model_copy(update={"seed": 8}))
    assert not np.array_equal(first.pi, other.pi)


def test_draw_shapes_and_metadata():
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    before = chains_completed_total.value
    fit = fit_standard(recs, g, ModelConfig(**{**SHORT, "thin": 3}))
    assert fit.n_draws == 100
    assert fit.pi.shape == (100, 5)
    assert fit.region_ids == g.node_ids
    assert ((fit.pi > 0) & (fit.pi < 1)).all()
    meta = fit.metadata
    assert meta.key == "standard:s|2010"
    assert meta.graph_digest == g.digest()
    assert meta.stall_count == 0 and meta.constrained_updates == 0
    assert len(meta.acceptance_rates) == 5
    assert {"ess_beta0", "rhat_tau2", "min_ess_pi", "max_rhat_pi"} <= set(meta.diagnostics)
    assert chains_completed_total.value == before + 1
    np.testing.assert_array_equal(fit.region_draws("r3"), fit.pi[:, 3])
    with pytest.raises(DataValidationError):
        fit.region_draws("nope")


@pytest.mark.parametrize("z_update", ["block", "sweep"])
def test_spatial_effects_sum_to_zero_per_component(z_update):
    g = build_graph(
        [("a", "b"), ("b", "c"), ("c", "a"), ("d", "e")], ["a", "b", "c", "d", "e", "f"]
    )
    recs = _records(g, [4, 9, 2, 7, 1, 3], [50, 80, 30, 60, 20, 40])
    fit = fit_standard(recs, g, ModelConfig(**SHORT, z_update=z_update))
    np.testing.assert_allclose(fit.z[:, :3].sum(axis=1), 0.0, atol=1e-8)
    np.testing.assert_allclose(fit.z[:, 3:5].sum(axis=1), 0.0, atol=1e-8)
    assert (fit.z[:, 5] == 0.0).all()


def test_proposal_scales_frozen_after_burn_in():
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    meta = fit_standard(recs, g, ModelConfig(**SHORT)).metadata
    assert meta.burn_in_scales == meta.proposal_scales
    assert all(0.0 <= a <= 1.0 for a in meta.acceptance_rates)


def test_relabelling_regions_permutes_the_draws():
    ids = ["d", "a", "e", "c", "b"]
    g = build_graph([("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("a", "e")], ids)
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    cfg = ModelConfig(**SHORT)
    fit = fit_standard(recs, g, cfg)
    order = ["b", "e", "a", "d", "c"]
    shuffled = fit_standard(list(reversed(recs)), g.permuted(order), cfg)
    for region in ids:
        np.testing.assert_array_equal(fit.region_draws(region), shuffled.region_draws(region))
    np.testing.assert_array_equal(fit.beta0, shuffled.beta0)


def test_all_zero_counts_stay_finite_and_small():
    g = _path_graph()
    fit = fit_standard(_records(g, [0] * 5, [100] * 5), g, ModelConfig(**SHORT))
    assert np.isfinite(fit.pi).all()
    assert (np.median(fit.pi, axis=0) < 0.05).all()


def test_zero_trial_regions_are_recorded_and_smoothed():
    g = _path_graph()
    recs = [r for r in _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70]) if r.region_id != "r2"]
    fit = fit_standard(recs, g, ModelConfig(**SHORT))
    assert fit.metadata.zero_trial == ("r2",)
    assert np.isfinite(fit.region_draws("r2")).all()


def test_restricted_draws_respect_the_bound():
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    cfg = ModelConfig(**SHORT, restriction_bound=5.0)
    fit = fit_restricted(recs, g, cfg)
    assert (fit.a0_hat < 5.0).all()
    recomputed = a_hat_binomial_array(fit.beta0, fit.sigma2, fit.tau2, 3)
    assert (recomputed < 5.0).all()
    assert fit.metadata.model == "restricted"
    assert fit.metadata.constrained_updates == 3 * 300


def test_inactive_bound_reproduces_the_standard_chain():
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    standard = fit_standard(recs, g, ModelConfig(**SHORT))
    loose = fit_restricted(recs, g, ModelConfig(**SHORT, restriction_bound=1e9))
    np.testing.assert_array_equal(standard.pi, loose.pi)
    np.testing.assert_array_equal(standard.sigma2, loose.sigma2)
    assert loose.metadata.stall_count == 0


def test_restriction_lowers_informativeness_on_pennsylvania_counts():
    recs, g = _pa_cell()
    base = {"total_iterations": 1000, "burn_in": 500, "thin": 1, "adapt_window": 50, "seed": 2010}
    standard = fit_standard(recs, g, ModelConfig(**base))
    restricted = fit_restricted(recs, g, ModelConfig(**base, restriction_bound=5.0))
    assert restricted.a0_hat.max() < 5.0
    assert np.median(standard.a0_hat) > 5.0


def test_stalled_constraint_aborts_the_chain(caplog):
    g = _path_graph()
    recs = _records(g, [10] * 5, [100] * 5)
    cfg = ModelConfig(
        total_iterations=200,
        burn_in=50,
        thin=1,
        adapt_window=10,
        max_rejections=5,
        restriction_bound=1e-6,
        fixed_beta0=-2.2,
        fixed_tau2=0.01,
    )
    with (
        caplog.at_level(logging.DEBUG, logger="reliable_rates.model.sampler"),
        pytest.raises(SamplerDiagnosticError, match="stalled"),
    ):
        fit_restricted(recs, g, cfg)
    stalls = [r for r in caplog.records if r.getMessage() == "constraint_stall"]
    assert stalls
    assert {r.parameter for r in stalls} == {"sigma2"}
    assert stalls[0].stratum == "s" and stalls[0].year == 2010


def test_chain_logs_name_the_stratum_and_year(caplog):
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70], stratum="black", year=2012)
    with caplog.at_level(logging.INFO, logger="reliable_rates.model.sampler"):
        fit_standard(recs, g, ModelConfig(**SHORT))
    events = {r.getMessage(): r for r in caplog.records}
    for name in ("chain_start", "burn_in_complete", "chain_done"):
        assert events[name].chain == "standard:black|2012"
        assert events[name].stratum == "black"
        assert events[name].year == 2012


def test_non_finite_state_is_a_sampler_error(monkeypatch):
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    monkeypatch.setattr(sampler_module, "draw_sigma2", lambda *args: float("nan"))
    with pytest.raises(SamplerDiagnosticError, match="non-finite"):
        fit_standard(recs, g, ModelConfig(**SHORT))


def test_fit_entry_points_check_the_config():
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    with pytest.raises(ConfigError):
        fit_standard(recs, g, ModelConfig(**SHORT, restriction_bound=5.0))
    with pytest.raises(ConfigError):
        fit_restricted(recs, g, ModelConfig(**SHORT))
    tight = ModelConfig(**SHORT, restriction_bound=5.0, fixed_sigma2=0.001, fixed_tau2=0.001)
    with pytest.raises(ConfigError, match="fixed variances"):
        fit_restricted(recs, g, tight)


def test_fit_rejects_inconsistent_records():
    g = _path_graph()
    recs = _records(g, [3, 8, 1, 12, 5], [60, 90, 40, 110, 70])
    with pytest.raises(DataValidationError, match="unknown node"):
        fit_standard([*recs, CountRecord("elsewhere", "s", 2010, 1, 10)], g, ModelConfig(**SHORT))
    with pytest.raises(DataValidationError, match="duplicate"):
        fit_standard([*recs, recs[0]], g, ModelConfig(**SHORT))
    with pytest.raises(DataValidationError, match="several stratum-years"):
        fit_standard([*recs[:4], CountRecord("r4", "s", 2011, 1, 10)], g, ModelConfig(**SHORT))
    single = build_graph([], ["only"])
    with pytest.raises(DataValidationError, match="two regions"):
        fit_standard([CountRecord("only", "s", 2010, 1, 10)], single, ModelConfig(**SHORT))


def test_model_config_validates_schedule():
    with pytest.raises(pydantic.ValidationError):
        ModelConfig(total_iterations=100, burn_in=100)
    with pytest.raises(pydantic.ValidationError):
        ModelConfig(total_iterations=100, burn_in=95, thin=10)
    cfg = ModelConfig(total_iterations=100, burn_in=50, thin=10)
    assert cfg.retained_draws == 5
    assert not cfg.restricted


def test_two_region_posterior_matches_quadrature():
    g = build_graph([("a", "b")], ["a", "b"])
    y, n = (5, 12), (50, 60)
    beta0, sigma2, tau2 = -1.8, 0.1, 0.4
    cfg = ModelConfig(
        total_iterations=40_000,
        burn_in=2_000,
        thin=1,
        seed=3,
        fixed_beta0=beta0,
        fixed_sigma2=sigma2,
        fixed_tau2=tau2,
    )
    fit = fit_standard(_records(g, y, n), g, cfg)
    oracle = quadrature_posterior_2node(y, n, beta0, sigma2, tau2, tol=1e-8)
    for j in range(2):
        assert fit.pi[:, j].mean() == pytest.approx(oracle.mean[j], abs=0.005)
        assert fit.pi[:, j].var() == pytest.approx(oracle.variance[j], rel=0.10)
