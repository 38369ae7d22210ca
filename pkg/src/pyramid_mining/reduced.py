"""One-dimensional approximations that track only the lead.

Dropping the honest level from the pyramid process leaves a chain on the
lead alone.  Three variants keep the lowest lead reachable at levels 0, 1
and ``>= 2`` (``E0``, ``E1``, ``E2``), and two more model instantaneous
pegging (``mu`` infinite): the general no-latency chain and its four-state
special case with ``p_2 = 1``.

Above lead 1 every chain is a birth-death segment that closes at the detain
cutoff, so its stationary vector is a product of scalar rate ratios
``r_k = psi_k / psi_{k-1}``.  These are the minimal nonnegative solution of
``up_{k-1} - d_k r_k + b r_k r_{k+1} = 0`` and come from a backward sweep,
confirmed by a monotone fixed-point iteration started at zero.  The few
boundary states are then fixed by a small linear system.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import HonestProfitZero, NoConvergence, SingularBoundary
from .model import DetainSchedule, ModelParams, derive_rates
from .stationary import null_vector

__all__ = [
    "Variant",
    "ReducedChain",
    "RateSequence",
    "RelativeProfits",
    "build_reduced",
    "solve_rate_sequence",
    "stationary_reduced",
    "relative_profits",
    "no_latency_p2_closed_form",
    "dense_reduced",
    "ratio_or_raise",
]

log = logging.getLogger(__name__)

ROOT = "root"


class Variant(str, Enum):
    E0 = "e0"
    E1 = "e1"
    E2 = "e2"
    MU_INFINITY = "nolatency"
    MU_INFINITY_P2 = "nolatency-p2"

    @property
    def no_latency(self) -> bool:
        return self in (Variant.MU_INFINITY, Variant.MU_INFINITY_P2)


@dataclass(frozen=True)
class ReducedChain:
    """Generator of a lead-only chain.

    ``states`` lists ``"root"`` first and then leads in increasing order.
    ``tail`` holds the positions of the birth-death segment above the anchor
    (lead 1), with ``tail_up[i]`` the rate into ``tail[i]`` from the state
    below it and ``tail_exit[i]`` its total exit rate.
    """

    variant: Variant
    params: ModelParams
    a: float
    b: float
    mu: float
    detain: DetainSchedule
    states: tuple
    Q: np.ndarray
    tail_up: np.ndarray
    tail_exit: np.ndarray

    def pos(self, state) -> int:
        return self.states.index(state)

    @property
    def anchor(self) -> int:
        return self.pos(1)

    @property
    def tail(self) -> list[int]:
        start = self.anchor + 1
        return list(range(start, start + self.tail_up.size))

    @property
    def boundary(self) -> list[int]:
        return list(range(self.anchor + 1))

    @property
    def first_rate_index(self) -> int:
        """Index of the first rate ratio in the conventional numbering."""
        return 1 if self.variant.no_latency else 2


def build_reduced(params: ModelParams, variant: Variant | str) -> ReducedChain:
    """Generator of the chosen lead-only chain.

    The ``nolatency-p2`` variant always uses ``p_2 = 1`` regardless of the
    schedule in ``params``.
    """
    variant = Variant(variant)
    detain = DetainSchedule((1.0,)) if variant is Variant.MU_INFINITY_P2 else params.detain
    rates = derive_rates(replace(params, detain=detain))
    a, b, mu = rates.a, rates.b, rates.mu
    K = detain.cutoff

    if variant.no_latency:
        leads = list(range(-1, K))
    else:
        lowest = {Variant.E0: 0, Variant.E1: -1, Variant.E2: -2}[variant]
        leads = list(range(lowest, K + 1))
    states = (ROOT, *leads)
    n = len(states)
    Q = np.zeros((n, n))
    ix = {s: i for i, s in enumerate(states)}

    def add(src, dst, rate):
        if rate:
            Q[ix[src], ix[dst]] += rate

    if variant is Variant.E0:
        add(ROOT, 1, a)
        add(0, 1, a)
    elif variant is Variant.E1:
        add(ROOT, -1, b)
        add(ROOT, 1, a)
        add(-1, 0, a)
        add(0, -1, b)
        add(0, 1, a)
    elif variant is Variant.E2:
        add(ROOT, -1, b)
        add(ROOT, 1, a)
        add(-2, ROOT, mu)
        add(-2, -1, a)
        add(-1, -2, b)
        add(-1, 0, a)
        add(0, -1, b)
        add(0, 1, a)
    else:
        add(ROOT, -1, b)
        add(ROOT, 1, a)
        # honest block at lead -1 reaches lead -2 and pegs at once
        add(-1, ROOT, b)
        add(-1, 0, a)
        add(0, -1, b)
        add(0, 1, a)

    up, exits = [], []
    if variant.no_latency:
        # dishonest block at lead k reaches k + 1 and pegs with p_{k+1}
        for k in range(1, K):
            p = detain.prob(k + 1)
            add(k, ROOT, a * p)
            add(k, k - 1, b)
            if k + 1 < K:
                add(k, k + 1, a * (1.0 - p))
        for k in range(2, K):
            up.append(a * (1.0 - detain.prob(k)))
            exits.append(a + b)
    else:
        add(1, 0, b)
        add(1, 2, a)
        for k in range(2, K + 1):
            p = detain.prob(k)
            add(k, ROOT, mu * p)
            add(k, k - 1, b)
            if k < K:
                add(k, k + 1, a * (1.0 - p))
            up.append(a if k == 2 else a * (1.0 - detain.prob(k - 1)))
            exits.append(rates.xi(k))

    Q[np.arange(n), np.arange(n)] = 0.0
    Q[np.arange(n), np.arange(n)] = -Q.sum(axis=1)
    return ReducedChain(
        variant=variant,
        params=params,
        a=a,
        b=b,
        mu=mu,
        detain=detain,
        states=states,
        Q=Q,
        tail_up=np.array(up, dtype=float),
        tail_exit=np.array(exits, dtype=float),
    )


@dataclass(frozen=True)
class RateSequence:
    """Rate ratios ``R_first, R_first+1, ...`` with diagnostics."""

    first: int
    values: np.ndarray
    residual: float
    iterations: int

    def __getitem__(self, k: int) -> float:
        i = k - self.first
        if not 0 <= i < self.values.size:
            raise KeyError(f"no rate R_{k}")
        return float(self.values[i])


def _rate_map(r: np.ndarray, up: np.ndarray, exit_: np.ndarray, b: float) -> np.ndarray:
    nxt = np.append(r[1:], 0.0)
    return up / (exit_ - b * nxt)


def solve_rate_sequence(chain: ReducedChain, max_iter: int = 100_000, tol: float = 1e-12) -> RateSequence:
    """Minimal nonnegative rate ratios of the chain's birth-death segment.

    A backward sweep from the cutoff gives the solution directly; a
    fixed-point iteration from zero must climb monotonically to the same
    values, which certifies minimality.
    """
    up, exit_, b = chain.tail_up, chain.tail_exit, chain.b
    m = up.size
    if m == 0:
        return RateSequence(first=chain.first_rate_index, values=np.zeros(0), residual=0.0, iterations=0)

    backward = np.zeros(m)
    nxt = 0.0
    for i in range(m - 1, -1, -1):
        backward[i] = up[i] / (exit_[i] - b * nxt)
        nxt = backward[i]

    r = np.zeros(m)
    for it in range(1, max_iter + 1):
        new = _rate_map(r, up, exit_, b)
        if np.any(new < r - 1e-15 * np.maximum(1.0, r)):
            raise NoConvergence("fixed-point iterates are not monotone")
        done = np.max(np.abs(new - r)) <= 1e-16 * max(1.0, float(np.max(new)))
        r = new
        if done:
            break
    else:
        raise NoConvergence(f"no convergence after {max_iter} iterations")

    if np.max(np.abs(r - backward)) > tol * max(1.0, float(np.max(backward))):
        raise NoConvergence("fixed point disagrees with the backward sweep")
    nxt = np.append(r[1:], 0.0)
    residual = float(np.max(np.abs(up - exit_ * r + b * r * nxt)))
    scale = max(1.0, float(np.max(exit_)))
    if residual > tol * scale:
        raise NoConvergence(f"residual {residual:.3g} exceeds tolerance")
    if np.any(r >= 1.0):
        log.debug("rate ratios reach %.4g (>= 1) for %s", float(r.max()), chain.variant.value)
    return RateSequence(first=chain.first_rate_index, values=r, residual=residual, iterations=it)


def no_latency_p2_closed_form(a: float, b: float) -> np.ndarray:
    """Stationary vector of the four-state no-latency chain with ``p_2 = 1``.

    Order: root, lead -1, lead 0, lead 1.

    Examples
    --------
    >>> no_latency_p2_closed_form(3.0, 1.0)
    array([0.3125, 0.125 , 0.1875, 0.375 ])
    """
    s = a + b
    return np.array([(a * a + b * b) / (2 * s * s), b / (2 * s), a * b / (s * s), a / (2 * s)])


def stationary_reduced(chain: ReducedChain, rates: RateSequence | None = None) -> np.ndarray:
    """Stationary vector ``Psi`` ordered like ``chain.states``."""
    if chain.variant is Variant.MU_INFINITY_P2:
        return no_latency_p2_closed_form(chain.a, chain.b)
    if rates is None:
        rates = solve_rate_sequence(chain)

    n = len(chain.states)
    bnd = chain.boundary
    tail = chain.tail
    # psi = E y: boundary states free, tail states proportional to the anchor
    E = np.zeros((len(bnd), n))
    E[np.arange(len(bnd)), bnd] = 1.0
    E[chain.anchor, tail] = np.cumprod(rates.values)
    # balance at every boundary state plus normalization
    lhs = np.vstack([(E @ chain.Q[:, bnd]).T, E.sum(axis=1)[None, :]])
    rhs = np.zeros(lhs.shape[0])
    rhs[-1] = 1.0
    y, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if rank < len(bnd):
        raise SingularBoundary(f"boundary system has rank {rank} < {len(bnd)}")
    if np.max(np.abs(lhs @ y - rhs)) > 1e-10:
        raise SingularBoundary("boundary system is inconsistent")
    psi = y @ E
    if np.any(psi < -1e-12):
        raise SingularBoundary(f"negative stationary entry {psi.min():.3g}")
    psi = np.where(psi < 0.0, 0.0, psi)
    return psi / psi.sum()


def dense_reduced(chain: ReducedChain) -> np.ndarray:
    """Oracle: stationary vector by a generic linear solve."""
    return null_vector(chain.Q)


@dataclass(frozen=True)
class RelativeProfits:
    """Per-pool relative profits, their weighted total and the advantage ratio."""

    r_h_rel: float
    r_d_rel: float
    r_total: float
    ratio: float
    rho_honest: float
    rho_dishonest: float
    ratio_error: str = ""


def relative_profits(chain: ReducedChain, psi: np.ndarray, params: ModelParams | None = None) -> RelativeProfits:
    """Relative long-run profits of the lead-only chain.

    With latency, an honest win pegs two blocks from lead ``-2`` at rate
    ``mu`` and a dishonest chain pegs ``k`` blocks from lead ``k`` at rate
    ``mu p_k``.  Without latency, honest wins happen at rate ``b`` from lead
    ``-1`` and dishonest pegs of ``k + 1`` blocks at rate ``a p_{k+1}`` from
    lead ``k``.  Variants without a lead ``-2`` state have no honest win
    state, so their honest revenue and weight are zero.
    """
    params = chain.params if params is None else params
    r = params.reward
    a, b, mu = chain.a, chain.b, chain.mu
    ix = {s: i for i, s in enumerate(chain.states)}
    leads = [s for s in chain.states if s != ROOT]

    if chain.variant.no_latency:
        honest_mass = psi[ix[-1]]
        honest_rev = b * honest_mass * 2.0 * r
        win_leads = [k for k in leads if k >= 1]
        dishonest_mass = sum(psi[ix[k]] for k in win_leads)
        dishonest_rev = a * r * sum(psi[ix[k]] * chain.detain.prob(k + 1) * (k + 1) for k in win_leads)
    else:
        honest_mass = psi[ix[-2]] if -2 in ix else 0.0
        honest_rev = honest_mass * 2.0 * mu * r
        win_leads = [k for k in leads if k >= 2]
        dishonest_mass = sum(psi[ix[k]] for k in win_leads)
        dishonest_rev = mu * r * sum(psi[ix[k]] * chain.detain.prob(k) * k for k in win_leads)

    r_h = honest_rev - params.honest_cost_rate
    r_d = dishonest_rev - params.dishonest_cost_rate
    if chain.variant is Variant.MU_INFINITY_P2:
        rho1, rho2 = b / (a + b), a / (a + b)
    else:
        total = honest_mass + dishonest_mass
        rho1, rho2 = honest_mass / total, dishonest_mass / total

    error = ""
    if r_h > 0:
        ratio = (params.beta - params.gamma) / (params.alpha_tilde + params.gamma) * r_d / r_h
    else:
        ratio = math.nan
        error = HonestProfitZero.__name__
    return RelativeProfits(
        r_h_rel=float(r_h),
        r_d_rel=float(r_d),
        r_total=float(rho1 * r_h + rho2 * r_d),
        ratio=float(ratio),
        rho_honest=float(rho1),
        rho_dishonest=float(rho2),
        ratio_error=error,
    )


def ratio_or_raise(profits: RelativeProfits) -> float:
    """The advantage ratio, raising when it is undefined."""
    if profits.ratio_error:
        raise HonestProfitZero(f"honest relative profit {profits.r_h_rel!r} is not positive")
    return profits.ratio
