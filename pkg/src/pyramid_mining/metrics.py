"""Orphan-block performance measures of the stationary pyramid process.

Two families of states end a fork:

* honest-win states ``(k, lead=-2)`` for ``k >= 2``, whose main chain has
  ``k`` blocks and whose orphan chain has ``k - 2``;
* dishonest-win states ``(k, lead=l)`` for ``l >= 2``, whose main chain has
  ``k + l`` blocks and whose orphan chain has ``k``.

Every measure is a ratio or weighted combination of a few stationary sums
over these states, which ``StateSums`` collects in closed form.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ZeroDenominator
from .stationary import PyramidStationary

__all__ = [
    "StateSums",
    "ChainMetrics",
    "state_sums",
    "win_probabilities",
    "average_lengths",
    "pegged_rates",
    "ratios",
    "chain_metrics",
]


@dataclass(frozen=True)
class StateSums:
    """Stationary sums over the fork-ending states.

    Attributes
    ----------
    honest : float
        ``sum_k pi(k, -2)``.
    honest_main : float
        ``sum_k k pi(k, -2)``.
    honest_orphan : float
        ``sum_k (k - 2) pi(k, -2)``.
    dishonest : float
        ``sum_k sum_{l>=2} pi(k, l)``.
    dishonest_main : float
        ``sum_k sum_{l>=2} (k + l) pi(k, l)``.
    dishonest_pegged : float
        ``sum_k sum_{l>=2} (k + l) p_l pi(k, l)``.
    dishonest_orphan : float
        ``sum_k sum_{l>=2} k pi(k, l)``.
    """

    honest: float
    honest_main: float
    honest_orphan: float
    dishonest: float
    dishonest_main: float
    dishonest_pegged: float
    dishonest_orphan: float


def state_sums(pi: PyramidStationary) -> StateSums:
    """Closed-form state sums; level tails go through ``N`` and ``N + N^2``."""
    lay = pi.gen.layout
    p = pi.gen.rates.detain.by_lead()
    s0 = pi.tail_sum(2)
    s1 = pi.level_weighted_tail

    dishonest = dishonest_main = dishonest_pegged = dishonest_orphan = 0.0
    for level, mass, weighted in ((0, pi.pi0, None), (1, pi.pi1, None), (2, s0, s1)):
        leads = lay.leads(level)
        sel = leads >= 2
        l = leads[sel].astype(float)
        m = mass[sel]
        # k * pi summed over levels: level * mass for the boundary levels
        km = weighted[sel] if weighted is not None else level * m
        dishonest += m.sum()
        dishonest_main += (km + l * m).sum()
        dishonest_pegged += (p[leads[sel]] * (km + l * m)).sum()
        dishonest_orphan += km.sum()

    honest = float(s0[0])
    honest_main = float(s1[0])
    return StateSums(
        honest=honest,
        honest_main=honest_main,
        honest_orphan=honest_main - 2.0 * honest,
        dishonest=float(dishonest),
        dishonest_main=float(dishonest_main),
        dishonest_pegged=float(dishonest_pegged),
        dishonest_orphan=float(dishonest_orphan),
    )


@dataclass(frozen=True)
class ChainMetrics:
    """Win probabilities, chain lengths, pegged rates and their ratios.

    The conditional lengths ``l_m_h`` etc. are the unnormalized sums
    (``l_m_h = sum_k k pi(k, -2)``), not conditional expectations.
    """

    p_h: float
    p_d: float
    l_m: float
    l_o: float
    l_m_h: float
    l_m_d: float
    l_o_h: float
    l_o_d: float
    upsilon_m: float
    upsilon_o: float
    phi: float
    psi: float
    lambda_cap: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _win(s: StateSums) -> tuple[float, float]:
    total = s.honest + s.dishonest
    if not total > 0:
        raise ZeroDenominator("no stationary mass on fork-ending states")
    p_h = s.honest / total
    return p_h, 1.0 - p_h


def win_probabilities(pi: PyramidStationary) -> tuple[float, float]:
    """``(P_H, P_D)``: shares of fork-ending mass on honest and dishonest wins."""
    return _win(state_sums(pi))


def _lengths(s: StateSums) -> tuple[float, float, float, float, float, float]:
    p_h, p_d = _win(s)
    l_m = p_h * s.honest_main + p_d * s.dishonest_main
    l_o = p_h * s.honest_orphan + p_d * s.dishonest_orphan
    return l_m, l_o, s.honest_main, s.dishonest_main, s.honest_orphan, s.dishonest_orphan


def average_lengths(pi: PyramidStationary) -> tuple[float, float, float, float, float, float]:
    """``(L_M, L_O, L_M^H, L_M^D, L_O^H, L_O^D)``."""
    return _lengths(state_sums(pi))


def _pegged(s: StateSums, mu: float) -> tuple[float, float]:
    p_h, p_d = _win(s)
    l_o = p_h * s.honest_orphan + p_d * s.dishonest_orphan
    upsilon_m = mu * (p_h * s.honest_main + p_d * s.dishonest_pegged)
    return upsilon_m, mu * l_o


def pegged_rates(pi: PyramidStationary) -> tuple[float, float]:
    """``(Upsilon_M, Upsilon_O)``: pegged main-chain and removed orphan rates."""
    return _pegged(state_sums(pi), pi.gen.rates.mu)


def ratios(pi: PyramidStationary) -> tuple[float, float]:
    """``(phi, psi) = (L_O / L_M, Upsilon_O / Upsilon_M)``."""
    m = chain_metrics(pi)
    return m.phi, m.psi


def metrics_from_sums(s: StateSums, mu: float) -> ChainMetrics:
    p_h, p_d = _win(s)
    l_m, l_o, l_m_h, l_m_d, l_o_h, l_o_d = _lengths(s)
    upsilon_m, upsilon_o = _pegged(s, mu)
    if l_m == 0 or upsilon_m == 0:
        raise ZeroDenominator("main chain has zero length")
    return ChainMetrics(
        p_h=p_h,
        p_d=p_d,
        l_m=l_m,
        l_o=l_o,
        l_m_h=l_m_h,
        l_m_d=l_m_d,
        l_o_h=l_o_h,
        l_o_d=l_o_d,
        upsilon_m=upsilon_m,
        upsilon_o=upsilon_o,
        phi=l_o / l_m,
        psi=upsilon_o / upsilon_m,
        lambda_cap=s.dishonest_main,
    )


def chain_metrics(pi: PyramidStationary) -> ChainMetrics:
    """All measures at once."""
    return metrics_from_sums(state_sums(pi), pi.gen.rates.mu)


def dense_state_sums(x: np.ndarray, states: np.ndarray, p_by_lead: np.ndarray) -> StateSums:
    """Same sums evaluated term by term on an explicit state vector.

    ``states`` is the ``(n, 2)`` array of ``(level, lead)`` matching ``x``.
    """
    k = states[:, 0].astype(float)
    l = states[:, 1]
    h = (l == -2)
    d = (l >= 2)
    pd = p_by_lead[np.where(d, l, 0)]
    return StateSums(
        honest=float(x[h].sum()),
        honest_main=float((k[h] * x[h]).sum()),
        honest_orphan=float(((k[h] - 2) * x[h]).sum()),
        dishonest=float(x[d].sum()),
        dishonest_main=float(((k[d] + l[d]) * x[d]).sum()),
        dishonest_pegged=float(((k[d] + l[d]) * pd[d] * x[d]).sum()),
        dishonest_orphan=float((k[d] * x[d]).sum()),
    )
