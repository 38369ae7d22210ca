from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from pyramid_mining.errors import TooFewWins
from pyramid_mining.generator import build_generator
from pyramid_mining.metrics import chain_metrics
from pyramid_mining.model import DetainSchedule, ModelParams
from pyramid_mining.simulation import (
    SimConfig,
    SimEstimate,
    estimate_absorption_time,
    estimate_metrics,
    estimate_stationary,
    run_episode,
    sample_absorption_times,
    sample_ph_absorption_times,
    simulate,
)
from pyramid_mining.stationary import stationary
from pyramid_mining.transient import PhRepresentation, Pool


def test_honest_only_network():
    p = ModelParams(alpha_tilde=0.0, gamma=0.0)  # a = 0, outside the validated region
    rng = np.random.default_rng(1)
    for _ in range(200):
        rec = run_episode(p, rng)
        assert rec.winner is Pool.HONEST and rec.main_length == 2 and rec.orphan_length == 0


def test_win_probability_without_advantage():
    p = ModelParams(gamma=0.0, efficiency_ratio=0.0, detain=DetainSchedule((1.0,)))
    ref = chain_metrics(stationary(build_generator(p))).p_h
    est = estimate_metrics(SimConfig(params=p, seed=5, episodes=1_000_000, replications=4))
    assert abs(est["p_h"].z_score(ref)) < 3


@pytest.fixture(scope="module")
def standard_run():
    cfg = SimConfig(params=ModelParams(), seed=11, episodes=300_000, replications=3)
    return cfg, simulate(cfg)


def test_root_occupancy(standard_run, default_pi):
    cfg, run = standard_run
    est = estimate_metrics(cfg, run)["pi_root"]
    assert abs(est.z_score(default_pi.pi_root)) < 3


def test_histogram_normalized_and_reachable(standard_run, default_pi):
    cfg, run = standard_run
    hist = estimate_stationary(cfg, run)
    assert hist.total() == pytest.approx(1.0, abs=1e-12)
    assert hist.probability(3, cfg.params.detain.cutoff + 1) == 0.0
    assert hist.probability(0, -1) == 0.0 and hist.probability(1, -2) == 0.0
    # a well-populated state lands near its stationary probability
    ref = default_pi.level(1)[default_pi.gen.layout.index(1, 0)]
    assert hist.probability(1, 0) == pytest.approx(ref, rel=0.03)


def test_profits_match(standard_run, default_params):
    from pyramid_mining.rewards import profit_report

    cfg, run = standard_run
    est = estimate_metrics(cfg, run)
    rep = profit_report(stationary(build_generator(default_params)), default_params)
    assert est["r_honest"].mean == pytest.approx(rep.r_honest, rel=0.02)
    assert est["r_dishonest"].mean == pytest.approx(rep.r_dishonest, rel=0.02)


def test_exponential_absorption():
    rate = 2.5
    ph = PhRepresentation(
        omega=np.ones(1), sub_gen=sp.csr_matrix([[-rate]]), exit=np.array([rate]), states=np.zeros((1, 2), dtype=int)
    )
    x = sample_ph_absorption_times(ph, 50_000, seed=2)
    assert abs(x.mean() - 1 / rate) < 3 * x.std() / np.sqrt(x.size)


def test_dishonest_pegging_time(default_params):
    from pyramid_mining.transient import build_ph, ph_moment
    from pyramid_mining.model import TruncationConfig

    ref = ph_moment(build_ph(build_generator(default_params), TruncationConfig(max_level=4), "dishonest"), 1)
    est = estimate_absorption_time(SimConfig(params=default_params, seed=3, episodes=50_000), "dishonest")
    assert abs(est.z_score(ref)) < 3


def test_censoring_drops_runs(default_params):
    cfg = SimConfig(params=default_params, seed=1, episodes=40)
    x = sample_absorption_times(cfg, "dishonest")
    assert x.size == 40 and np.all(x > 0)


def test_too_few_samples():
    with pytest.raises(TooFewWins):
        SimEstimate(name="x", mean=1.0, std_error=0.1, n=10)


def test_worker_count_does_not_change_results():
    cfg = SimConfig(params=ModelParams(), seed=9, episodes=20_000, replications=5, batches=10)
    a, b = simulate(cfg), simulate(replace(cfg, workers=4))
    assert np.array_equal(a.stats, b.stats) and np.array_equal(a.hist, b.hist)


def test_seed_changes_results():
    cfg = SimConfig(params=ModelParams(), seed=9, episodes=5_000, batches=10)
    assert not np.array_equal(simulate(cfg).stats, simulate(replace(cfg, seed=10)).stats)


@pytest.mark.parametrize("kwargs", [dict(replications=0), dict(episodes=2, replications=3), dict(batches=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(params=ModelParams(), **kwargs)
