import numpy as np
import pytest
from hypothesis import given, settings

from conftest import valid_params
from pyramid_mining.generator import build_generator
from pyramid_mining.metrics import (
    average_lengths,
    chain_metrics,
    dense_state_sums,
    metrics_from_sums,
    pegged_rates,
    ratios,
    state_sums,
    win_probabilities,
)
from pyramid_mining.model import DetainSchedule, ModelParams, TruncationConfig
from pyramid_mining.simulation import SimConfig, estimate_metrics
from pyramid_mining.stationary import dense_oracle, stationary

# standard point, level sums from the dense oracle with 800 levels
FROZEN = {
    "p_h": 0.4784066875531599,
    "l_m": 3.646657543283944,
    "l_o": 3.2495355707330376,
    "upsilon_m": 9.925164691029545,
    "phi": 0.8910997350759502,
    "psi": 0.982211078170823,
}


def _metrics(**kwargs):
    return chain_metrics(stationary(build_generator(ModelParams(**kwargs))))


@pytest.mark.parametrize("name", sorted(FROZEN))
def test_standard_point_values(default_pi, name):
    assert getattr(chain_metrics(default_pi), name) == pytest.approx(FROZEN[name], rel=1e-9)


def test_closed_sums_match_dense_restatement():
    p = ModelParams(gamma=3.0, efficiency_ratio=0.9, detain=DetainSchedule((0.4, 0.7, 1.0)))
    gen = build_generator(p)
    x, lay = dense_oracle(gen, TruncationConfig(max_level=800))
    dense = dense_state_sums(x, lay.states(), p.detain.by_lead())
    closed = state_sums(stationary(gen))
    for field in ("honest", "honest_main", "dishonest", "dishonest_main", "dishonest_pegged", "dishonest_orphan"):
        assert getattr(closed, field) == pytest.approx(getattr(dense, field), rel=1e-9)


def test_honest_dominates_without_advantage():
    p_h, p_d = win_probabilities(stationary(build_generator(ModelParams(alpha_tilde=1.0, gamma=0.0, efficiency_ratio=0.0))))
    assert p_h > 0.9 and p_h + p_d == pytest.approx(1.0, abs=1e-15)


def test_pegged_orphan_rate_is_mu_times_length(default_pi):
    up_m, up_o = pegged_rates(default_pi)
    _, l_o, *_ = average_lengths(default_pi)
    assert up_o == 3.0 * l_o


def test_certain_pegging_collapses_rates_and_ratios():
    m = _metrics(detain=DetainSchedule((1.0,)))
    assert m.upsilon_m == pytest.approx(3.0 * m.l_m, rel=1e-14)
    assert m.phi == pytest.approx(m.psi, rel=1e-14)


def test_ratios_helper(default_pi):
    m = chain_metrics(default_pi)
    assert ratios(default_pi) == (m.phi, m.psi)


def test_metrics_from_sums_round_trip(default_pi):
    assert metrics_from_sums(state_sums(default_pi), 3.0) == chain_metrics(default_pi)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(valid_params())
def test_waste_bounds(p):
    m = chain_metrics(stationary(build_generator(p)))
    assert m.p_h + m.p_d == pytest.approx(1.0, abs=1e-12)
    assert 0 < m.l_m_h - m.l_o_h < 2
    assert m.l_m > m.l_o > 0
    assert m.l_m - m.l_o < 2 * m.p_h + m.lambda_cap * m.p_d
    assert m.upsilon_o == pytest.approx(p.mu * m.l_o, rel=1e-14)


@pytest.mark.parametrize("gamma, ratio", [(0.5, 0.5), (5.0, 0.5), (8.5, 0.9)])
def test_simulator_agreement(gamma, ratio):
    p = ModelParams(gamma=gamma, efficiency_ratio=ratio)
    m = chain_metrics(stationary(build_generator(p)))
    est = estimate_metrics(SimConfig(params=p, seed=17, episodes=200_000, replications=2))
    assert abs(est["p_h"].z_score(m.p_h)) < 3
    for name in ("l_m", "l_o", "upsilon_m"):
        assert est[name].mean == pytest.approx(getattr(m, name), rel=0.02)
