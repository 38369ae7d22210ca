"""Hot loops: event-driven simulation and uniformization.

Every function here is plain Python over numpy arrays and scalars and is
compiled with numba when available (see ``_accel``).  Random numbers come
from a ``numpy.random.Generator`` passed in, which numba supports natively,
so compiled and interpreted runs consume the same stream.
"""
from __future__ import annotations

import numpy as np

from ._accel import jit

# regimes of the event engine
FULL = 0
HONEST_ABSORBING = 1
DISHONEST_ABSORBING = 2
NO_LATENCY = 3

# columns of the per-batch statistics table
TIME = 0
ROOT_TIME = 1
H_MASS = 2
H_LEVEL = 3
D_MASS = 4
D_MAIN = 5
D_PEGGED = 6
D_ORPHAN = 7
H_WINS = 8
H_BLOCKS = 9
H_ORPHANS = 10
D_WINS = 11
D_BLOCKS = 12
D_ORPHANS = 13
EPISODES = 14
D_LEAD_BLOCKS = 15
EVENTS = 16
N_STATS = 17

HONEST_WIN = 0
DISHONEST_WIN = 1
CENSORED = 2


@jit
def _occupy(level, lead, dt, p, acc, hist, track):
    if lead == -2 and level >= 2:
        acc[H_MASS] += dt
        acc[H_LEVEL] += dt * level
    elif lead >= 2:
        w = level + lead
        acc[D_MASS] += dt
        acc[D_MAIN] += dt * w
        acc[D_PEGGED] += dt * w * p[lead]
        acc[D_ORPHAN] += dt * level
    if track:
        row = min(level, hist.shape[0] - 1)
        hist[row, lead + 2] += dt


@jit
def episode(a, b, mu, p, K, regime, start_level, start_lead, rng, acc, hist, track, max_events):
    """Simulate one fork from ``(start_level, start_lead)`` until it resolves.

    ``start_lead == 0`` with ``start_level == 0`` means the root.  Returns
    ``(winner, main_length, orphan_length, elapsed)``; occupancy integrals
    and event counts are added to ``acc`` (and to ``hist`` when ``track``).
    """
    level = start_level
    lead = start_lead
    root = level == 0 and lead == 0
    elapsed = 0.0
    events = 0
    while True:
        if events >= max_events:
            return CENSORED, 0, 0, elapsed
        events += 1
        acc[EVENTS] += 1.0
        if root:
            total = a + b
            dt = rng.exponential(1.0) / total
            elapsed += dt
            acc[ROOT_TIME] += dt
            if rng.random() * total < a:
                level, lead = 0, 1
            else:
                level, lead = 1, -1
            root = False
            continue

        if regime == NO_LATENCY:
            total = a + b
            dt = rng.exponential(1.0) / total
            elapsed += dt
            if track:
                hist[min(level, hist.shape[0] - 1), lead + 2] += dt
            if rng.random() * total < a:
                lead += 1
                if lead >= 2 and (lead >= K or rng.random() < p[lead]):
                    acc[D_WINS] += 1.0
                    acc[D_BLOCKS] += level + lead
                    acc[D_ORPHANS] += level
                    acc[D_LEAD_BLOCKS] += lead
                    return DISHONEST_WIN, level + lead, level, elapsed
            else:
                level += 1
                lead -= 1
                if lead == -2:
                    acc[H_WINS] += 1.0
                    acc[H_BLOCKS] += level
                    acc[H_ORPHANS] += level - 2
                    return HONEST_WIN, level, level - 2, elapsed
            continue

        # rates out of the current state
        up = a
        down = b
        peg = 0.0
        if lead == -2 and level >= 2:
            down = 0.0
            peg = mu if regime != DISHONEST_ABSORBING else 0.0
        elif lead >= 2 and regime != HONEST_ABSORBING:
            pl = p[lead] if lead <= K else 1.0
            up = a * (1.0 - pl)
            peg = mu * pl
        total = up + down + peg
        dt = rng.exponential(1.0) / total
        elapsed += dt
        if regime == FULL:
            _occupy(level, lead, dt, p, acc, hist, track)
        u = rng.random() * total
        if u < up:
            lead += 1
        elif u < up + down:
            level += 1
            lead -= 1
        elif lead == -2:
            acc[H_WINS] += 1.0
            acc[H_BLOCKS] += level
            acc[H_ORPHANS] += level - 2
            return HONEST_WIN, level, level - 2, elapsed
        else:
            acc[D_WINS] += 1.0
            acc[D_BLOCKS] += level + lead
            acc[D_ORPHANS] += level
            acc[D_LEAD_BLOCKS] += lead
            return DISHONEST_WIN, level + lead, level, elapsed


@jit
def run_batches(a, b, mu, p, K, regime, rng, n_episodes, stats, hist, track, max_events):
    """Simulate ``n_episodes`` root-to-root cycles into ``stats`` rows.

    Episodes are assigned to consecutive batches of (almost) equal size.
    """
    n_batches = stats.shape[0]
    for e in range(n_episodes):
        acc = stats[(e * n_batches) // n_episodes]
        start = acc[ROOT_TIME]
        winner, main, orphan, elapsed = episode(
            a, b, mu, p, K, regime, 0, 0, rng, acc, hist, track, max_events
        )
        acc[TIME] += elapsed
        acc[EPISODES] += 1.0
        if track:
            hist[0, 2] += acc[ROOT_TIME] - start
    return stats


@jit
def absorption_times(a, b, mu, p, K, regime, rng, n, max_events, out):
    """Times to absorption from the race start, ``nan`` when censored."""
    acc = np.zeros(N_STATS)
    hist = np.zeros((1, 1))
    w = a / (a + b)
    for r in range(n):
        if rng.random() < w:
            lvl, ld = 0, 1
        else:
            lvl, ld = 1, -1
        winner, main, orphan, elapsed = episode(
            a, b, mu, p, K, regime, lvl, ld, rng, acc, hist, False, max_events
        )
        out[r] = np.nan if winner == CENSORED else elapsed
    return out


@jit
def ph_absorption_times(indptr, indices, rates, exit_rate, total, omega_cdf, rng, out):
    """Absorption times of a phase-type law with CSR transition rates."""
    for r in range(out.size):
        s = np.searchsorted(omega_cdf, rng.random() * omega_cdf[-1], side="right")
        t = 0.0
        while True:
            t += rng.exponential(1.0) / total[s]
            u = rng.random() * total[s]
            if u < exit_rate[s]:
                break
            u -= exit_rate[s]
            nxt = indices[indptr[s + 1] - 1]
            for j in range(indptr[s], indptr[s + 1]):
                if u < rates[j]:
                    nxt = indices[j]
                    break
                u -= rates[j]
            s = nxt
        out[r] = t
    return out


@jit
def ph_renewal_counts(indptr, indices, rates, exit_rate, total, omega_cdf, start_cdf, horizon, rng, out):
    """Renewals in ``[0, horizon)`` of a phase-type renewal process.

    The first phase is drawn from ``start_cdf``; after each absorption the
    process restarts from ``omega_cdf``.
    """
    for r in range(out.size):
        s = np.searchsorted(start_cdf, rng.random() * start_cdf[-1], side="right")
        t = 0.0
        count = 0
        while True:
            t += rng.exponential(1.0) / total[s]
            if t >= horizon:
                break
            u = rng.random() * total[s]
            if u < exit_rate[s]:
                count += 1
                s = np.searchsorted(omega_cdf, rng.random() * omega_cdf[-1], side="right")
                continue
            u -= exit_rate[s]
            nxt = indices[indptr[s + 1] - 1]
            for j in range(indptr[s], indptr[s + 1]):
                if u < rates[j]:
                    nxt = indices[j]
                    break
                u -= rates[j]
            s = nxt
        out[r] = count
    return out


@jit
def uniformized_left_action(tt_indptr, tt_indices, tt_data, exit_rate, omega, lam, weights, x0, steady_tol):
    """``x0 exp(Q t)`` for ``Q = T + exit omega`` by uniformization.

    ``tt_*`` is the CSR form of ``T`` transposed, so row ``j`` lists the
    rates into state ``j``.  ``weights[n]`` is the Poisson probability of
    ``n`` jumps at rate ``lam * t``.  Every 32 steps the iterate is compared
    with its predecessor; once they differ by less than ``steady_tol`` (sup
    norm) the chain has reached its stationary vector and the remaining
    weight is added in one step.
    """
    n = x0.size
    exits = np.flatnonzero(exit_rate)
    x = x0.copy()
    out = weights[0] * x
    nxt = np.empty(n)
    remaining = 1.0 - weights[0]
    inv = 1.0 / lam
    for k in range(1, weights.size):
        flow = 0.0
        for i in exits:
            flow += x[i] * exit_rate[i]
        w = weights[k]
        check = (k & 31) == 0
        change = 0.0
        for j in range(n):
            acc = x[j] * lam + flow * omega[j]
            for q in range(tt_indptr[j], tt_indptr[j + 1]):
                acc += tt_data[q] * x[tt_indices[q]]
            v = acc * inv
            nxt[j] = v
            out[j] += w * v
            if check:
                d = abs(v - x[j])
                if d > change:
                    change = d
        x, nxt = nxt, x
        remaining -= w
        if check and change < steady_tol:
            for j in range(n):
                out[j] += remaining * x[j]
            return out
    return out
