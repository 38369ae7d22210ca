"""Model parameters, validation, derived rates and truncation policy.

The dishonest pool mines at net rate ``alpha_tilde``, the honest pool at
``beta``; ``gamma`` miners defect from the honest to the dishonest side, and
the dishonest pool's efficiency is scaled by ``1 + efficiency_ratio``.  The
two effective mining rates that drive every generator are

    a = (alpha_tilde + gamma) * (1 + efficiency_ratio)
    b = beta - gamma

Default values are the standard experiment configuration used throughout
the tests and the CLI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BadDetainSchedule,
    GammaOutOfRange,
    NonPositiveRate,
    ParameterError,
    Violation,
)

__all__ = [
    "DetainSchedule",
    "ModelParams",
    "ValidatedParams",
    "DerivedRates",
    "TruncationConfig",
    "validate",
    "derive_rates",
    "gamma_upper_bound",
]


@dataclass(frozen=True)
class DetainSchedule:
    """Pegging probabilities ``p_2, ..., p_K`` of a dishonest chain leading by k.

    When the dishonest branch leads by ``k >= 2`` blocks it pegs its chain
    with probability ``p_k`` and otherwise keeps mining.  The last entry must
    be exactly 1, which caps the lead at ``K``.

    Parameters
    ----------
    probs : sequence of float
        ``(p_2, ..., p_K)``.

    Examples
    --------
    >>> s = DetainSchedule((0.8, 1.0))
    >>> s.cutoff, s.prob(2), s.prob(7)
    (3, 0.8, 1.0)
    """

    probs: tuple[float, ...] = (0.8, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @property
    def cutoff(self) -> int:
        """Largest reachable lead ``K``."""
        return len(self.probs) + 1

    def prob(self, k: int) -> float:
        """Return ``p_k``; leads beyond the cutoff always peg."""
        if k < 2:
            raise ValueError(f"detain probabilities start at k=2, got k={k}")
        if k > self.cutoff:
            return 1.0
        return self.probs[k - 2]

    def by_lead(self) -> np.ndarray:
        """Array ``p`` with ``p[l] = p_l`` for ``l in 0..K`` (zero below 2)."""
        out = np.zeros(self.cutoff + 1)
        out[2:] = self.probs
        return out

    def violations(self) -> list[Violation]:
        found = []
        if len(self.probs) == 0:
            found.append(Violation("BadDetainSchedule", "schedule is empty"))
            return found
        for k, p in enumerate(self.probs, start=2):
            if not (0.0 <= p <= 1.0):
                found.append(Violation("BadDetainSchedule", f"p_{k}={p} outside [0, 1]"))
        if self.probs[-1] != 1.0:
            found.append(
                Violation("BadDetainSchedule", f"last probability p_{self.cutoff} must be exactly 1")
            )
        return found


@dataclass(frozen=True)
class ModelParams:
    """Physical and economic parameters of the selfish-mining model."""

    alpha_tilde: float = 10.0
    beta: float = 28.0
    gamma: float = 5.0
    efficiency_ratio: float = 0.5
    mu: float = 3.0
    detain: DetainSchedule = field(default_factory=DetainSchedule)
    block_reward: float = 0.5
    fee: float = 0.5
    electric_price: float = 0.5
    admin_price: float = 0.5

    @property
    def reward(self) -> float:
        """Revenue per pegged block, ``r_B + r_F``."""
        return self.block_reward + self.fee

    @property
    def honest_cost_rate(self) -> float:
        """``(c_E + c_A)(beta - gamma)``."""
        return (self.electric_price + self.admin_price) * (self.beta - self.gamma)

    @property
    def dishonest_cost_rate(self) -> float:
        """``(alpha_tilde + gamma)[c_E + c_A(1 + R)]``."""
        return (self.alpha_tilde + self.gamma) * (
            self.electric_price + self.admin_price * (1.0 + self.efficiency_ratio)
        )


# Validation returns its input; the alias marks signatures that expect it.
ValidatedParams = ModelParams


def gamma_upper_bound(alpha_tilde: float, beta: float) -> float:
    """Strict upper bound on the jumping rate, ``(beta - alpha_tilde) / 2``."""
    return (beta - alpha_tilde) / 2.0


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate(params: ModelParams) -> ValidatedParams:
    """Check every constraint on ``params``.

    Raises
    ------
    ParameterError
        Subclass chosen by the first violation (``GammaOutOfRange``,
        ``NonPositiveRate`` or ``BadDetainSchedule``); ``.violations`` lists
        all of them.
    """
    found: list[Violation] = []
    for name in ("alpha_tilde", "beta", "mu"):
        v = getattr(params, name)
        if not _finite(v) or v <= 0:
            found.append(Violation("NonPositiveRate", f"{name}={v} must be > 0"))
    for name in ("efficiency_ratio", "block_reward", "fee", "electric_price", "admin_price"):
        v = getattr(params, name)
        if not _finite(v) or v < 0:
            found.append(Violation("NonPositiveRate", f"{name}={v} must be >= 0"))
    if _finite(params.alpha_tilde) and _finite(params.beta) and params.alpha_tilde >= params.beta:
        found.append(
            Violation(
                "GammaOutOfRange",
                f"alpha_tilde={params.alpha_tilde} must be below beta={params.beta}",
            )
        )
    g = params.gamma
    if not _finite(g) or g < 0:
        found.append(Violation("GammaOutOfRange", f"gamma={g} must be >= 0"))
    else:
        bound = gamma_upper_bound(params.alpha_tilde, params.beta)
        if g >= bound:
            found.append(
                Violation("GammaOutOfRange", f"gamma={g} must be < (beta - alpha_tilde)/2 = {bound}")
            )
    found.extend(params.detain.violations())
    if found:
        kind = {
            "GammaOutOfRange": GammaOutOfRange,
            "NonPositiveRate": NonPositiveRate,
            "BadDetainSchedule": BadDetainSchedule,
        }.get(found[0].code, ParameterError)
        raise kind(found)
    return params


@dataclass(frozen=True)
class DerivedRates:
    """Effective mining rates ``a``, ``b`` and the detained exit rates ``xi_k``."""

    a: float
    b: float
    mu: float
    detain: DetainSchedule

    @property
    def cutoff(self) -> int:
        return self.detain.cutoff

    def xi(self, k: int) -> float:
        """Total exit rate of a detained state with lead ``k >= 2``."""
        p = self.detain.prob(k)
        return self.a * (1.0 - p) + self.b + self.mu * p

    @property
    def xi_all(self) -> np.ndarray:
        """``(xi_2, ..., xi_K)``."""
        return np.array([self.xi(k) for k in range(2, self.cutoff + 1)])


def derive_rates(params: ModelParams) -> DerivedRates:
    """Compute ``a``, ``b`` and ``xi_k`` from raw or validated parameters."""
    a = (params.alpha_tilde + params.gamma) * (1.0 + params.efficiency_ratio)
    b = params.beta - params.gamma
    return DerivedRates(a=a, b=b, mu=params.mu, detain=params.detain)


@dataclass(frozen=True)
class TruncationConfig:
    """Level cutoff and tolerances for oracle solves and absorbing chains.

    Parameters
    ----------
    max_level : int
        Highest honest level ``L`` kept explicitly; everything above is
        folded into level ``L``.
    tail_tol : float
        Tolerance for tail and convergence checks.
    max_lead : int, optional
        Lead cap for the honest absorbing chain, whose lead is otherwise
        unbounded.  ``None`` picks one from ``tail_tol``.
    """

    max_level: int = 60
    tail_tol: float = 1e-10
    max_lead: int | None = None

    def __post_init__(self):
        if int(self.max_level) != self.max_level or self.max_level < 4:
            raise ValueError(f"max_level must be an integer >= 4, got {self.max_level}")
        if not self.tail_tol > 0:
            raise ValueError(f"tail_tol must be > 0, got {self.tail_tol}")
        if self.max_lead is not None and self.max_lead < 2:
            raise ValueError(f"max_lead must be >= 2, got {self.max_lead}")


def schedule(probs: Sequence[float]) -> DetainSchedule:
    """Shorthand constructor used by the CLI and tests."""
    return DetainSchedule(tuple(probs))
