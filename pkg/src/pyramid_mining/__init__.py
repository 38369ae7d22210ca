"""Markov-chain analysis and simulation of selfish mining with a
two-block leading rule: matrix-geometric stationary solution, chain and
profit metrics, phase-type pegging times, reduced lead-only chains and a
seeded Monte Carlo oracle.
"""
from . import errors
from .errors import ParameterError, PyramidMiningError
from .generator import PyramidGenerator, build_generator
from .metrics import ChainMetrics, chain_metrics
from .model import DerivedRates, DetainSchedule, ModelParams, TruncationConfig, derive_rates, validate
from .reduced import Variant, build_reduced, relative_profits, stationary_reduced
from .rewards import ProfitReport, profit_report
from .stationary import PyramidStationary, dense_oracle, stationary
from .transient import build_ph, expected_renewals, ph_moments, transient_profit

__version__ = "0.1.0"


def solve(params: ModelParams | None = None) -> PyramidStationary:
    """Validate ``params`` (defaults if omitted) and return the stationary distribution."""
    return stationary(build_generator(validate(params or ModelParams())))
