"""Phase-type view of the time until a fork is pegged.

Making the root absorbing turns the pyramid process into an absorbing
chain whose absorption time is phase-type.  Two versions are built:

* honest (``T``): only the honest branch pegs, from lead ``-2`` at rate
  ``mu``; the dishonest pool never pegs and its lead is unbounded, so a lead
  cap with reflection is applied;
* dishonest (``S``): only the dishonest branch pegs, from lead ``l >= 2`` at
  rate ``mu p_l``; at lead ``-2`` the honest branch cannot peg.

Levels ``>= 2`` are homogeneous in both chains, so folding every level
above ``L`` into level ``L`` leaves the absorption time unchanged.

Sparse matrices (scipy.sparse) are used here because the honest chain needs
a lead cap of a few thousand phases per level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.stats import poisson

from . import _kernels
from ._accel import NUMBA_ENABLED
from .errors import DefectiveAbsorption, NoConvergence, SingularSubGenerator
from .generator import PyramidGenerator
from .model import ModelParams, TruncationConfig
from .stationary import PyramidStationary

__all__ = [
    "Pool",
    "InitChoice",
    "PhRepresentation",
    "TransientProfit",
    "build_ph",
    "build_ph_honest",
    "build_ph_dishonest",
    "honest_lead_cap",
    "ph_moment",
    "ph_moments",
    "poisson_weights",
    "certified_moments",
    "expm_left_action",
    "expected_renewals",
    "transient_profit",
]

MAX_LEAD_CAP = 200_000
UNIFORMIZATION_EPS = 1e-12


class Pool(str, Enum):
    HONEST = "honest"
    DISHONEST = "dishonest"


class InitChoice(str, Enum):
    RACE = "race"
    STATIONARY = "stationary"
    DIAGONAL = "diagonal"


@dataclass(frozen=True)
class PhRepresentation:
    """Initial vector, sub-generator and exit rates of a phase-type law.

    ``states[i]`` is the ``(level, lead)`` of transient phase ``i``.
    """

    omega: np.ndarray
    sub_gen: sp.csr_matrix
    exit: np.ndarray
    states: np.ndarray
    pool: Pool | None = None

    @property
    def size(self) -> int:
        return self.omega.size

    def q_star(self) -> sp.csr_matrix:
        """Generator of the renewal phase process, ``T + exit omega``."""
        return (self.sub_gen + sp.csr_matrix(np.outer(self.exit, self.omega))).tocsr()

    def state_index(self) -> dict[tuple[int, int], int]:
        return {(int(k), int(l)): i for i, (k, l) in enumerate(self.states)}


def honest_lead_cap(gen: PyramidGenerator, tail_tol: float) -> int:
    """Lead cap for the honest chain.

    The lead above lead ``-2`` moves up at rate ``a`` and down at rate ``b``,
    so reaching lead ``M`` has probability of order ``(a/b)**M``.  The cap
    makes that smaller than ``tail_tol`` with three extra digits of margin.
    """
    a, b = gen.rates.a, gen.rates.b
    if a >= b:
        raise DefectiveAbsorption(
            f"a={a} >= b={b}: honest absorption is not certain; pass max_lead explicitly"
        )
    cap = math.ceil(math.log(tail_tol * 1e-3) / math.log(a / b))
    cap = max(cap, gen.cutoff, 8)
    if cap > MAX_LEAD_CAP:
        raise DefectiveAbsorption(f"a/b={a / b:.6f} too close to 1 (lead cap {cap})")
    return cap


def _absorbing_chain(gen: PyramidGenerator, pool: Pool, max_level: int, max_lead: int):
    """Transient states, sparse sub-generator and exit vector."""
    a, b, mu = gen.rates.a, gen.rates.b, gen.rates.mu
    detain = gen.rates.detain
    honest = pool is Pool.HONEST
    top = max_lead if honest else gen.cutoff

    states = []
    for k in range(max_level + 1):
        lo = 1 if k == 0 else (-1 if k == 1 else -2)
        states.extend((k, l) for l in range(lo, top + 1))
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    exit_ = np.zeros(n)

    def move(i, dst, rate):
        if rate > 0:
            rows.append(i)
            cols.append(index[dst])
            vals.append(rate)
            diag[i] -= rate

    for i, (k, l) in enumerate(states):
        down_level = min(k + 1, max_level)
        if l == -2:
            move(i, (k, -1), a)
            if honest:
                exit_[i] = mu
                diag[i] -= mu
            continue
        if honest or l < 2:
            if l < top:
                move(i, (k, l + 1), a)
            move(i, (down_level, l - 1), b)
            continue
        p = detain.prob(l)
        if l < top:
            move(i, (k, l + 1), a * (1.0 - p))
        move(i, (down_level, l - 1), b)
        exit_[i] = mu * p
        diag[i] -= mu * p

    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(diag)
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    T.sum_duplicates()
    T.sort_indices()
    return np.array(states, dtype=int), T, exit_


def _initial_vector(
    states: np.ndarray,
    gen: PyramidGenerator,
    init: InitChoice,
    pi: PyramidStationary | None,
    max_level: int,
) -> np.ndarray:
    index = {(int(k), int(l)): i for i, (k, l) in enumerate(states)}
    omega = np.zeros(len(states))
    if init is InitChoice.RACE:
        a, b = gen.rates.a, gen.rates.b
        omega[index[(0, 1)]] = a / (a + b)
        omega[index[(1, -1)]] = b / (a + b)
        return omega
    if pi is None:
        raise ValueError(f"init choice {init.value!r} needs the stationary distribution")
    lay = gen.layout
    vectors = pi.levels(max_level - 1) + [pi.tail_sum(max_level)]
    if init is InitChoice.STATIONARY:
        for k, v in enumerate(vectors):
            for lead, x in zip(lay.leads(k), v):
                omega[index[(k, int(lead))]] = x
        return omega / (1.0 - pi.pi_root)
    for k, v in enumerate(vectors):
        if k >= 1:
            omega[index[(k, 0)]] = v[lay.index(k, 0)]
    return omega / omega.sum()


def build_ph(
    gen: PyramidGenerator,
    trunc: TruncationConfig,
    pool: Pool | str,
    init: InitChoice | str = InitChoice.RACE,
    pi: PyramidStationary | None = None,
) -> PhRepresentation:
    """Phase-type representation of the pegging time for ``pool``.

    Parameters
    ----------
    gen : PyramidGenerator
    trunc : TruncationConfig
        ``max_level`` folds higher levels in; ``max_lead`` caps the honest
        chain's lead (chosen from ``tail_tol`` when ``None``).
    pool : {"honest", "dishonest"}
    init : {"race", "stationary", "diagonal"}
        ``race`` starts at (0, 1) or (1, -1) with probabilities
        ``a/(a+b)`` and ``b/(a+b)``; ``stationary`` uses the stationary
        vector off the root; ``diagonal`` uses the stationary mass on the
        tied states ``(k, 0)``, ``k >= 1``.
    pi : PyramidStationary, optional
        Required for the stationary-based initial vectors.
    """
    pool = Pool(pool)
    init = InitChoice(init)
    if pool is Pool.HONEST:
        cap = trunc.max_lead if trunc.max_lead is not None else honest_lead_cap(gen, trunc.tail_tol)
        cap = max(cap, gen.cutoff)
    else:
        cap = gen.cutoff
    states, T, exit_ = _absorbing_chain(gen, pool, trunc.max_level, cap)
    omega = _initial_vector(states, gen, init, pi, trunc.max_level)
    return PhRepresentation(omega=omega, sub_gen=T, exit=exit_, states=states, pool=pool)


def build_ph_honest(gen, trunc, init=InitChoice.RACE, pi=None) -> PhRepresentation:
    return build_ph(gen, trunc, Pool.HONEST, init, pi)


def build_ph_dishonest(gen, trunc, init=InitChoice.RACE, pi=None) -> PhRepresentation:
    return build_ph(gen, trunc, Pool.DISHONEST, init, pi)


def ph_moments(ph: PhRepresentation, order: int) -> np.ndarray:
    """Raw moments ``1..order`` via ``(-1)^k k! omega T^{-k} e``."""
    if order < 1:
        raise ValueError("moment order must be >= 1")
    try:
        lu = splu(ph.sub_gen.tocsc())
    except RuntimeError as exc:
        raise SingularSubGenerator(str(exc)) from exc
    y = np.ones(ph.size)
    out = np.empty(order)
    for k in range(1, order + 1):
        y = lu.solve(y)
        if not np.all(np.isfinite(y)):
            raise SingularSubGenerator("non-finite solve")
        out[k - 1] = (-1) ** k * math.factorial(k) * float(ph.omega @ y)
    return out


def ph_moment(ph: PhRepresentation, k: int) -> float:
    """``k``-th raw moment of the absorption time."""
    return float(ph_moments(ph, k)[-1])


def certified_moments(
    gen: PyramidGenerator,
    trunc: TruncationConfig,
    pool: Pool | str,
    init: InitChoice | str = InitChoice.RACE,
    pi: PyramidStationary | None = None,
    order: int = 2,
) -> np.ndarray:
    """Moments accepted only if doubling the truncation leaves them stable.

    Both the level cutoff and, for the honest chain, the lead cap are
    doubled; the relative change must stay within ``tail_tol``.
    """
    base = build_ph(gen, trunc, pool, init, pi)
    m1 = ph_moments(base, order)
    cap = int(base.states[:, 1].max())
    wider = TruncationConfig(
        max_level=2 * trunc.max_level,
        tail_tol=trunc.tail_tol,
        max_lead=2 * cap if Pool(pool) is Pool.HONEST else trunc.max_lead,
    )
    m2 = ph_moments(build_ph(gen, wider, pool, init, pi), order)
    change = np.max(np.abs(m2 - m1) / np.abs(m2))
    if change > trunc.tail_tol:
        raise NoConvergence(f"moments moved by {change:.3g} under truncation doubling")
    return m1


def poisson_weights(mean: float, eps: float = UNIFORMIZATION_EPS) -> np.ndarray:
    """Poisson probabilities ``0..n`` with right tail below ``eps``."""
    if mean == 0.0:
        return np.ones(1)
    n = int(poisson.isf(eps, mean)) + 1
    return poisson.pmf(np.arange(n + 1), mean)


def expm_left_action(
    ph: PhRepresentation, t: float, x0: np.ndarray | None = None, steady_tol: float = 1e-15
) -> np.ndarray:
    """``x0 exp(Q* t)`` for the renewal generator ``Q* = T + exit omega``.

    Uniformization with rate ``max |T_ii|``; the Poisson series is cut when
    its right tail drops below 1e-12, or earlier once the iterates stop
    changing by more than ``steady_tol``.
    """
    x0 = ph.omega if x0 is None else np.asarray(x0, dtype=float)
    if t == 0.0:
        return x0.copy()
    T = ph.sub_gen
    lam = float(np.max(-T.diagonal()))
    weights = poisson_weights(lam * t)
    # sum of the weights actually used; the tail cut stays below 1e-12
    weights = weights / weights.sum() * (1.0 - poisson.sf(weights.size - 1, lam * t))
    Tt = T.T.tocsr()
    Tt.sort_indices()
    if NUMBA_ENABLED:
        return _kernels.uniformized_left_action(
            Tt.indptr, Tt.indices, Tt.data, ph.exit, ph.omega, lam, weights, x0, steady_tol
        )
    x = x0.copy()
    out = weights[0] * x
    remaining = 1.0 - weights[0]
    for w in weights[1:]:
        nxt = x + (Tt @ x + (x @ ph.exit) * ph.omega) / lam
        change = np.max(np.abs(nxt - x))
        x = nxt
        if change < steady_tol:
            return out + remaining * x
        remaining -= w
        out += w * x
    return out


def expected_renewals(ph: PhRepresentation, t: float, mean: float | None = None) -> float:
    """``E[N(t)] = (t / E[chi]) omega exp(Q* t) e``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0.0:
        return 0.0
    mean = ph_moment(ph, 1) if mean is None else mean
    return t / mean * float(expm_left_action(ph, t).sum())


@dataclass(frozen=True)
class TransientProfit:
    horizon: float
    expected_renewals: float
    profit: float


def transient_profit(
    ph: PhRepresentation, params: ModelParams, pool: Pool | str, t: float, mean: float | None = None
) -> TransientProfit:
    """Mining profit over ``[0, t)``: ``(r_B + r_F) E[N(t)]`` minus running cost."""
    pool = Pool(pool)
    renewals = expected_renewals(ph, t, mean)
    cost = params.honest_cost_rate if pool is Pool.HONEST else params.dishonest_cost_rate
    return TransientProfit(horizon=t, expected_renewals=renewals, profit=renewals * params.reward - t * cost)
