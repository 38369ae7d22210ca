from dataclasses import replace

import pytest
from hypothesis import given, settings

from conftest import valid_params
from pyramid_mining.errors import HonestProfitZero
from pyramid_mining.generator import build_generator
from pyramid_mining.model import ModelParams
from pyramid_mining.rewards import (
    _ratios,
    closed_revenue_sums,
    direct_revenue_sums,
    economic_ratios,
    operation_threshold,
    profit_dishonest,
    profit_honest,
    profit_report,
    state_reward,
)
from pyramid_mining.stationary import stationary

# standard point, revenue sums from the dense oracle with 800 levels
R_HONEST = -12.670210945635507
R_DISHONEST = -9.1959577845603

FREE = dict(block_reward=0.0, fee=0.0, electric_price=0.0, admin_price=0.0)


def test_standard_point_profits(default_pi, default_params):
    assert profit_honest(default_pi, default_params) == pytest.approx(R_HONEST, rel=1e-10)
    assert profit_dishonest(default_pi, default_params) == pytest.approx(R_DISHONEST, rel=1e-10)


def test_zero_prices_give_zero_profit(default_pi):
    p = ModelParams(**FREE)
    assert profit_honest(default_pi, p) == 0.0
    assert profit_dishonest(default_pi, p) == 0.0


def test_zero_costs_give_zero_threshold(default_pi):
    assert operation_threshold(default_pi, ModelParams(electric_price=0.0, admin_price=0.0)) == 0.0


def test_ratio_is_one_for_symmetric_pools(default_pi):
    # alpha + gamma == beta - gamma sits on the excluded gamma bound; the ratio only needs the scale
    p = ModelParams(alpha_tilde=10.0, beta=28.0, gamma=9.0)
    s = direct_revenue_sums(default_pi)
    im, _, _ = _ratios(s, p, 2.5, 2.5)
    assert im == 1.0


def test_ratio_approaches_constant_when_costs_vanish():
    p = ModelParams(block_reward=1e6, fee=0.0, electric_price=1.0, admin_price=1.0)
    pi = stationary(build_generator(p))
    im, tau, constant = economic_ratios(pi, p)
    assert abs(im - constant) / constant < 1e-3
    assert tau == constant


def test_ratio_undefined_when_honest_loses_money(default_pi, default_params):
    with pytest.raises(HonestProfitZero):
        economic_ratios(default_pi, default_params)
    rep = profit_report(default_pi, default_params)
    assert rep.ratio_im != rep.ratio_im and rep.ratio_im_error == "HonestProfitZero"
    assert rep.ratio_tau > 1


@pytest.mark.parametrize("field, values", [("block_reward", (0.1, 1.0, 9.0)), ("electric_price", (0.0, 0.7, 4.0))])
def test_profits_affine_in_prices(default_pi, default_params, field, values):
    for profit in (profit_honest, profit_dishonest):
        ys = [profit(default_pi, replace(default_params, **{field: v})) for v in values]
        slope1 = (ys[1] - ys[0]) / (values[1] - values[0])
        slope2 = (ys[2] - ys[0]) / (values[2] - values[0])
        assert slope1 == pytest.approx(slope2, rel=1e-12, abs=1e-12)


def test_state_reward_sign_convention(default_params):
    p = default_params
    assert state_reward(p, "honest", 4, -2) == 4 * 3.0 * 1.0 - 23.0
    assert state_reward(p, "honest", 4, 0) == -23.0
    assert state_reward(p, "dishonest", 3, 2) == pytest.approx(5 * 3.0 * 0.8 - p.dishonest_cost_rate)
    with pytest.raises(ValueError):
        state_reward(p, "miner", 0, 1)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(valid_params())
def test_direct_and_closed_forms_agree(p):
    pi = stationary(build_generator(p))
    d, c = direct_revenue_sums(pi), closed_revenue_sums(pi)
    assert c.honest == pytest.approx(d.honest, rel=1e-10)
    assert c.dishonest == pytest.approx(d.dishonest, rel=1e-10)


@settings(max_examples=50, deadline=None, derandomize=True)
@given(valid_params())
def test_threshold_separates_profitable_region(p):
    pi = stationary(build_generator(p))
    v = operation_threshold(pi, p)
    above = replace(p, block_reward=1.01 * v, fee=0.0)
    below = replace(p, block_reward=0.99 * v, fee=0.0)
    assert profit_honest(pi, above) > 0 and profit_dishonest(pi, above) > 0
    assert min(profit_honest(pi, below), profit_dishonest(pi, below)) <= 0
