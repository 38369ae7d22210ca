"""Seeded discrete-event simulation of the mining race.

The event engine follows the generator rows state by state: from each
``(level, lead)`` it draws the holding time from the total exit rate and
the next event in proportion to the competing rates.  Running many
root-to-root cycles (episodes) gives long-run estimates of the stationary
quantities; separate absorbing regimes give pegging-time samples.

Estimates carry batch-means standard errors.  Episodes are split into
independent replications, each with its own seed spawned from the master
seed, and replications are combined in index order so results do not
depend on how many worker threads ran them.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels as K
from .errors import TooFewWins
from .model import ModelParams, TruncationConfig, derive_rates
from .transient import PhRepresentation, Pool

__all__ = [
    "Regime",
    "SimConfig",
    "SimEstimate",
    "EpisodeRecord",
    "OccupancyHistogram",
    "run_episode",
    "simulate",
    "estimate_metrics",
    "estimate_stationary",
    "estimate_absorption_time",
    "sample_absorption_times",
    "sample_ph_absorption_times",
    "estimate_renewals",
]

MIN_SAMPLES = 30
MAX_EVENTS = 10_000_000


class Regime(str, Enum):
    FULL = "full"
    NO_LATENCY = "no_latency"


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    params : ModelParams
    seed : int
        Master seed; replication ``r`` uses the ``r``-th spawned child.
    episodes : int
        Total number of root-to-root cycles (or absorption samples).
    replications : int
        Independent streams the episodes are split across.
    batches : int
        Batches per replication for the batch-means standard error.
    regime : Regime
        ``full`` uses finite ``mu``; ``no_latency`` pegs instantly.
    workers : int
        Threads used to run replications; does not affect results.
    trunc : TruncationConfig
        ``max_level`` bounds the level axis of the occupancy histogram.
    """

    params: ModelParams
    seed: int = 0
    episodes: int = 100_000
    replications: int = 1
    batches: int = 100
    regime: Regime = Regime.FULL
    workers: int = 1
    trunc: TruncationConfig = field(default_factory=TruncationConfig)

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.episodes < self.replications:
            raise ValueError("need at least one episode per replication")
        if self.batches < 1:
            raise ValueError("batches must be >= 1")

    def streams(self) -> list[np.random.Generator]:
        children = np.random.SeedSequence(self.seed).spawn(self.replications)
        return [np.random.Generator(np.random.PCG64(c)) for c in children]

    def split(self) -> list[int]:
        """Episodes per replication, as even as possible."""
        q, r = divmod(self.episodes, self.replications)
        return [q + (i < r) for i in range(self.replications)]


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo estimate with its standard error and sample size."""

    name: str
    mean: float
    std_error: float
    n: int

    def __post_init__(self):
        if self.n < MIN_SAMPLES:
            raise TooFewWins(f"{self.name}: only {self.n} samples (need {MIN_SAMPLES})")
        if not self.std_error >= 0:
            raise ValueError(f"{self.name}: negative standard error")

    def z_score(self, reference: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == reference else math.inf
        return (self.mean - reference) / self.std_error


@dataclass(frozen=True)
class EpisodeRecord:
    winner: Pool
    main_length: int
    orphan_length: int
    elapsed: float
    pegged_blocks: int


def _engine_args(params: ModelParams):
    rates = derive_rates(params)
    p = params.detain.by_lead()
    return rates.a, rates.b, rates.mu, p, params.detain.cutoff


def run_episode(params: ModelParams, rng: np.random.Generator, regime: Regime | str = Regime.FULL) -> EpisodeRecord:
    """Simulate one fork from the root until a branch is pegged."""
    a, b, mu, p, cutoff = _engine_args(params)
    code = K.FULL if Regime(regime) is Regime.FULL else K.NO_LATENCY
    acc = np.zeros(K.N_STATS)
    winner, main, orphan, elapsed = K.episode(
        a, b, mu, p, cutoff, code, 0, 0, rng, acc, np.zeros((1, 1)), False, MAX_EVENTS
    )
    return EpisodeRecord(
        winner=Pool.HONEST if winner == K.HONEST_WIN else Pool.DISHONEST,
        main_length=int(main),
        orphan_length=int(orphan),
        elapsed=float(elapsed),
        pegged_blocks=int(main),
    )


@dataclass(frozen=True)
class SimulationRun:
    """Raw output: per-batch statistics and the occupancy histogram."""

    config: SimConfig
    stats: np.ndarray
    hist: np.ndarray

    def totals(self) -> np.ndarray:
        return self.stats.sum(axis=0)


def _replicate(config: SimConfig, rng: np.random.Generator, n_episodes: int):
    a, b, mu, p, cutoff = _engine_args(config.params)
    code = K.FULL if config.regime is Regime.FULL else K.NO_LATENCY
    stats = np.zeros((config.batches, K.N_STATS))
    hist = np.zeros((config.trunc.max_level + 1, cutoff + 3))
    K.run_batches(a, b, mu, p, cutoff, code, rng, n_episodes, stats, hist, True, MAX_EVENTS)
    return stats, hist


def simulate(config: SimConfig) -> SimulationRun:
    """Run all replications and stack their batch statistics in order."""
    jobs = list(zip(config.streams(), config.split()))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda j: _replicate(config, *j), jobs))
    else:
        results = [_replicate(config, *j) for j in jobs]
    stats = np.vstack([s for s, _ in results])
    hist = np.sum([h for _, h in results], axis=0)
    return SimulationRun(config=config, stats=stats, hist=hist)


def _ratio_estimate(name: str, f, stats: np.ndarray) -> SimEstimate:
    """Point estimate ``f(total sums)`` with a batch-means standard error."""
    point = f(stats.sum(axis=0))
    per_batch = np.array([f(row) for row in stats])
    n = per_batch.size
    se = float(per_batch.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return SimEstimate(name=name, mean=float(point), std_error=se, n=n)


def estimate_metrics(config: SimConfig, run: SimulationRun | None = None) -> dict[str, SimEstimate]:
    """Long-run estimates comparable with the analytic chain metrics and profits.

    Occupancy-based quantities (win probabilities, lengths) use time-averaged
    state occupancy; pegged-block throughputs and profits count pegging
    events.
    """
    run = simulate(config) if run is None else run
    params = config.params
    mu, r = params.mu, params.reward
    cost_h, cost_d = params.honest_cost_rate, params.dishonest_cost_rate

    if config.regime is Regime.NO_LATENCY:
        return _no_latency_estimates(config, run)

    def p_h(s):
        return s[K.H_MASS] / (s[K.H_MASS] + s[K.D_MASS])

    def l_m(s):
        ph = p_h(s)
        return (ph * s[K.H_LEVEL] + (1 - ph) * s[K.D_MAIN]) / s[K.TIME]

    def l_o(s):
        ph = p_h(s)
        return (ph * (s[K.H_LEVEL] - 2 * s[K.H_MASS]) + (1 - ph) * s[K.D_ORPHAN]) / s[K.TIME]

    def upsilon_m(s):
        # each pool's pegged-block throughput, weighted by its win probability
        ph = p_h(s)
        return (ph * s[K.H_BLOCKS] + (1 - ph) * s[K.D_BLOCKS]) / s[K.TIME]

    funcs = {
        "pi_root": lambda s: s[K.ROOT_TIME] / s[K.TIME],
        "p_h": p_h,
        "p_d": lambda s: 1.0 - p_h(s),
        "l_m": l_m,
        "l_o": l_o,
        "l_m_h": lambda s: s[K.H_LEVEL] / s[K.TIME],
        "l_o_h": lambda s: (s[K.H_LEVEL] - 2 * s[K.H_MASS]) / s[K.TIME],
        "l_m_d": lambda s: s[K.D_MAIN] / s[K.TIME],
        "l_o_d": lambda s: s[K.D_ORPHAN] / s[K.TIME],
        "upsilon_m": upsilon_m,
        "upsilon_o": lambda s: mu * l_o(s),
        "phi": lambda s: l_o(s) / l_m(s),
        "psi": lambda s: mu * l_o(s) / upsilon_m(s),
        "r_honest": lambda s: r * s[K.H_BLOCKS] / s[K.TIME] - cost_h,
        "r_dishonest": lambda s: r * s[K.D_BLOCKS] / s[K.TIME] - cost_d,
        "honest_win_share": lambda s: s[K.H_WINS] / (s[K.H_WINS] + s[K.D_WINS]),
    }
    return {name: _ratio_estimate(name, f, run.stats) for name, f in funcs.items()}


def _no_latency_estimates(config: SimConfig, run: SimulationRun) -> dict[str, SimEstimate]:
    params = config.params
    r = params.reward
    cost_h, cost_d = params.honest_cost_rate, params.dishonest_cost_rate
    funcs = {
        "psi_root": lambda s: s[K.ROOT_TIME] / s[K.TIME],
        # honest wins pay two blocks, dishonest pegs pay the lead
        "r_h_rel": lambda s: 2 * r * s[K.H_WINS] / s[K.TIME] - cost_h,
        "r_d_rel": lambda s: r * s[K.D_LEAD_BLOCKS] / s[K.TIME] - cost_d,
        "honest_win_share": lambda s: s[K.H_WINS] / (s[K.H_WINS] + s[K.D_WINS]),
    }
    return {name: _ratio_estimate(name, f, run.stats) for name, f in funcs.items()}


@dataclass(frozen=True)
class OccupancyHistogram:
    """Time-average occupancy of the root and each ``(level, lead)``.

    The last level row collects every level at or above it.  ``array`` has
    lead columns ``-2..K``.
    """

    root: float
    array: np.ndarray
    cutoff: int

    def probability(self, level: int, lead: int) -> float:
        if level == 0 and lead == 0:
            return self.root
        if level < 0 or not -2 <= lead <= self.cutoff:
            return 0.0
        row = min(level, self.array.shape[0] - 1)
        return float(self.array[row, lead + 2])

    def total(self) -> float:
        return float(self.root + self.array.sum())

    def by_lead(self) -> np.ndarray:
        """Occupancy summed over levels, lead columns ``-2..K``."""
        return self.array.sum(axis=0)


def estimate_stationary(config: SimConfig, run: SimulationRun | None = None) -> OccupancyHistogram:
    """Time-weighted state occupancy, normalized to total 1."""
    run = simulate(config) if run is None else run
    hist = run.hist.copy()
    root = hist[0, 2]
    hist[0, 2] = 0.0
    total = root + hist.sum()
    return OccupancyHistogram(root=float(root / total), array=hist / total, cutoff=config.params.detain.cutoff)


def sample_absorption_times(config: SimConfig, pool: Pool | str) -> np.ndarray:
    """Pegging times of ``pool`` from the race start, censored runs dropped.

    Only ``pool`` may peg: in the honest regime the dishonest pool never
    pegs (its lead is unbounded), in the dishonest regime the honest branch
    cannot peg from lead ``-2``.
    """
    pool = Pool(pool)
    a, b, mu, p, cutoff = _engine_args(config.params)
    code = K.HONEST_ABSORBING if pool is Pool.HONEST else K.DISHONEST_ABSORBING
    parts = []
    for rng, n in zip(config.streams(), config.split()):
        out = np.empty(n)
        K.absorption_times(a, b, mu, p, cutoff, code, rng, n, MAX_EVENTS, out)
        parts.append(out)
    samples = np.concatenate(parts)
    kept = samples[np.isfinite(samples)]
    if kept.size < MIN_SAMPLES:
        raise TooFewWins(f"only {kept.size} of {samples.size} runs reached a {pool.value} peg")
    return kept


def estimate_absorption_time(config: SimConfig, pool: Pool | str) -> SimEstimate:
    """Mean pegging time of ``pool`` with its standard error."""
    x = sample_absorption_times(config, pool)
    return SimEstimate(
        name=f"chi_{Pool(pool).value}", mean=float(x.mean()), std_error=float(x.std(ddof=1) / math.sqrt(x.size)), n=x.size
    )


def _ph_arrays(ph: PhRepresentation):
    T = ph.sub_gen.tocsr().copy()
    total = -T.diagonal()
    T.setdiag(0.0)
    T.eliminate_zeros()
    T.sort_indices()
    return T.indptr, T.indices, T.data, ph.exit, total


def sample_ph_absorption_times(ph: PhRepresentation, n: int, seed: int) -> np.ndarray:
    """Absorption times drawn directly from a phase-type representation."""
    indptr, indices, rates, exit_, total = _ph_arrays(ph)
    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.empty(n)
    return K.ph_absorption_times(indptr, indices, rates, exit_, total, np.cumsum(ph.omega), rng, out)


def ph_stationary_phase(ph: PhRepresentation) -> np.ndarray:
    """Stationary vector of the renewal phase process ``T + exit omega``."""
    import scipy.sparse as sp
    from scipy.sparse.linalg import spsolve

    Q = ph.q_star().T.tolil()
    Q[0, :] = 1.0
    rhs = np.zeros(ph.size)
    rhs[0] = 1.0
    v = spsolve(sp.csc_matrix(Q), rhs)
    v = np.where(v < 0, 0.0, v)
    return v / v.sum()


def estimate_renewals(ph: PhRepresentation, t: float, n: int, seed: int, start: str = "stationary") -> SimEstimate:
    """Monte Carlo mean of the renewal count in ``[0, t)``.

    ``start="stationary"`` draws the first phase from the stationary vector
    of the phase process, so renewals occur at constant rate
    ``1 / E[chi]``; ``start="omega"`` starts fresh from ``omega``.
    """
    indptr, indices, rates, exit_, total = _ph_arrays(ph)
    first = ph_stationary_phase(ph) if start == "stationary" else ph.omega
    rng = np.random.Generator(np.random.PCG64(seed))
    out = np.empty(n, dtype=np.int64)
    K.ph_renewal_counts(
        indptr, indices, rates, exit_, total, np.cumsum(ph.omega), np.cumsum(first), t, rng, out
    )
    return SimEstimate(
        name="renewals", mean=float(out.mean()), std_error=float(out.std(ddof=1) / math.sqrt(n)), n=n
    )
