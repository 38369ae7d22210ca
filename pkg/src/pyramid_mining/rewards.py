"""Long-run average profits of the two pools and derived economic ratios.

Each pool earns ``r_B + r_F`` per pegged block and pays running costs in
proportion to its net mining rate.  Revenue accrues in the fork-ending
states: an honest win at ``(k, -2)`` pegs ``k`` blocks at rate ``mu``; a
dishonest chain leading by ``l`` at level ``k`` pegs ``k + l`` blocks at
rate ``mu * p_l``.

Two evaluations of the revenue sums are kept side by side.  The direct
sum walks the levels one by one and is the reference; the closed matrix
form (selector vectors combined with ``(I - R)^{-1}`` and ``(I - R)^{-2}``)
must agree with it, which guards the index bookkeeping of the selectors.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FormMismatch, HonestProfitZero
from .model import ModelParams
from .stationary import PyramidStationary

__all__ = [
    "RevenueSums",
    "ProfitReport",
    "state_reward",
    "direct_revenue_sums",
    "closed_revenue_sums",
    "profit_honest",
    "profit_dishonest",
    "operation_threshold",
    "economic_ratios",
    "profit_report",
]

FORM_TOL = 1e-10


@dataclass(frozen=True)
class RevenueSums:
    """``honest = sum_k k pi(k,-2)``, ``dishonest = sum sum p_l (k+l) pi(k,k+l)``."""

    honest: float
    dishonest: float


def state_reward(params: ModelParams, pool: str, level: int, lead: int) -> float:
    """Reward rate earned by ``pool`` while the process sits in ``(level, lead)``."""
    r = params.reward
    if pool == "honest":
        gain = level * params.mu * r if (lead == -2 and level >= 2) else 0.0
        return gain - params.honest_cost_rate
    if pool == "dishonest":
        gain = (level + lead) * params.mu * params.detain.prob(lead) * r if lead >= 2 else 0.0
        return gain - params.dishonest_cost_rate
    raise ValueError(f"pool must be 'honest' or 'dishonest', got {pool!r}")


def direct_revenue_sums(pi: PyramidStationary, tol: float = 1e-17) -> RevenueSums:
    """Revenue sums by walking levels until the remaining mass is below ``tol``."""
    lay = pi.gen.layout
    p = pi.gen.rates.detain.by_lead()
    honest = 0.0
    dishonest = 0.0
    for k, v in ((0, pi.pi0), (1, pi.pi1)):
        leads = lay.leads(k)
        for lead, x in zip(leads, v):
            if lead >= 2:
                dishonest += p[lead] * (k + lead) * x
    leads = lay.leads(2)
    sel = leads >= 2
    weights = p[leads[sel]]
    R = pi.R
    v = pi.pi2
    k = 2
    while True:
        honest += k * v[0]
        dishonest += float((weights * (k + leads[sel]) * v[sel]).sum())
        v = v @ R
        k += 1
        if v.sum() * k < tol or k > 10_000_000:
            break
    return RevenueSums(honest=float(honest), dishonest=float(dishonest))


def closed_revenue_sums(pi: PyramidStationary) -> RevenueSums:
    """Revenue sums through selector vectors and the Neumann series."""
    gen = pi.gen
    lay = gen.layout
    N = pi.rates.neumann
    p = gen.rates.detain.by_lead()

    e1 = np.zeros(lay.size(2))
    e1[0] = 1.0
    honest = float((e1 * (pi.pi1 @ pi.R_tilde @ (N + N @ N))).sum())

    def selector(level: int) -> tuple[np.ndarray, np.ndarray]:
        # p_bar_k = const + level * slope, aligned with the phases of a level
        leads = lay.leads(level)
        on = leads >= 2
        pl = np.where(on, p[np.where(on, leads, 0)], 0.0)
        return pl * leads, pl

    const0, slope0 = selector(0)
    const1, slope1 = selector(1)
    const2, slope2 = selector(2)
    pi0 = pi.pi_root * (gen.q_root_0 @ np.linalg.inv(-gen.q00))
    tail0 = pi.pi1 @ pi.R_tilde @ N
    tail1 = pi.pi1 @ pi.R_tilde @ (N + N @ N)
    dishonest = (
        (const0 * pi0).sum()
        + ((const1 + slope1) * pi.pi1).sum()
        + (const2 * tail0).sum()
        + (slope2 * tail1).sum()
    )
    return RevenueSums(honest=honest, dishonest=float(dishonest))


def _checked_sums(pi: PyramidStationary) -> RevenueSums:
    direct = direct_revenue_sums(pi)
    closed = closed_revenue_sums(pi)
    for name in ("honest", "dishonest"):
        d, c = getattr(direct, name), getattr(closed, name)
        if abs(d - c) > FORM_TOL * max(1.0, abs(d)):
            raise FormMismatch(f"{name} revenue: direct sum {d!r} vs closed form {c!r}")
    return direct


def profit_honest(pi: PyramidStationary, params: ModelParams) -> float:
    """``R_H = mu (r_B + r_F) sum_k k pi(k,-2) - (c_E + c_A)(beta - gamma)``."""
    s = _checked_sums(pi)
    return params.mu * params.reward * s.honest - params.honest_cost_rate


def profit_dishonest(pi: PyramidStationary, params: ModelParams) -> float:
    """``R_D = mu (r_B + r_F) sum sum p_l (k+l) pi(k,k+l) - (alpha+gamma)[c_E + c_A(1+R)]``."""
    s = _checked_sums(pi)
    return params.mu * params.reward * s.dishonest - params.dishonest_cost_rate


def _threshold(s: RevenueSums, params: ModelParams) -> float:
    honest = params.honest_cost_rate / (params.mu * s.honest)
    dishonest = params.dishonest_cost_rate / (params.mu * s.dishonest)
    return max(honest, dishonest)


def operation_threshold(pi: PyramidStationary, params: ModelParams) -> float:
    """Smallest ``r_B + r_F`` above which both pools are profitable."""
    return _threshold(_checked_sums(pi), params)


def _ratios(s: RevenueSums, params: ModelParams, r_h: float, r_d: float) -> tuple[float, float, float]:
    scale = (params.beta - params.gamma) / (params.alpha_tilde + params.gamma)
    tau = scale * (params.mu * s.dishonest) / (params.mu * s.honest)
    constant = scale * s.dishonest / s.honest
    if not r_h > 0:
        raise HonestProfitZero(f"honest profit {r_h!r} is not positive")
    return scale * r_d / r_h, tau, constant


def economic_ratios(pi: PyramidStationary, params: ModelParams) -> tuple[float, float, float]:
    """``(advantage ratio, pegged-rate ratio tau, constant C)``.

    The advantage ratio is the dishonest-to-honest profit ratio per unit net
    mining rate.  ``tau`` compares pegged-block rates per unit net mining
    rate; ``C`` is the limit of the advantage ratio as costs vanish relative
    to rewards.

    Raises
    ------
    HonestProfitZero
        If ``R_H <= 0``.
    """
    s = _checked_sums(pi)
    r_h = params.mu * params.reward * s.honest - params.honest_cost_rate
    r_d = params.mu * params.reward * s.dishonest - params.dishonest_cost_rate
    return _ratios(s, params, r_h, r_d)


@dataclass(frozen=True)
class ProfitReport:
    """Profits and ratios at one parameter point.

    ``ratio_im`` is ``nan`` and ``ratio_im_error`` names the reason when the
    honest profit is not positive.
    """

    r_honest: float
    r_dishonest: float
    threshold_v: float
    ratio_im: float
    ratio_tau: float
    constant_c: float
    ratio_im_error: str = ""

    def as_dict(self) -> dict[str, float | str]:
        return asdict(self)


def profit_report(pi: PyramidStationary, params: ModelParams) -> ProfitReport:
    s = _checked_sums(pi)
    r_h = params.mu * params.reward * s.honest - params.honest_cost_rate
    r_d = params.mu * params.reward * s.dishonest - params.dishonest_cost_rate
    error = ""
    try:
        im, tau, constant = _ratios(s, params, r_h, r_d)
    except HonestProfitZero:
        scale = (params.beta - params.gamma) / (params.alpha_tilde + params.gamma)
        im, tau, constant = math.nan, scale * s.dishonest / s.honest, scale * s.dishonest / s.honest
        error = "HonestProfitZero"
    return ProfitReport(
        r_honest=r_h,
        r_dishonest=r_d,
        threshold_v=_threshold(s, params),
        ratio_im=im,
        ratio_tau=tau,
        constant_c=constant,
        ratio_im_error=error,
    )
