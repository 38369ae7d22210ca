from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from pyramid_mining.generator import build_generator
from pyramid_mining.model import DetainSchedule, ModelParams
from pyramid_mining.stationary import stationary

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def default_params() -> ModelParams:
    return ModelParams()


@pytest.fixture(scope="session")
def default_pi(default_params):
    return stationary(build_generator(default_params))


@st.composite
def valid_params(draw, max_cutoff: int = 4) -> ModelParams:
    """Parameter points inside the validated region, with varied detain schedules."""
    alpha = draw(st.floats(0.5, 20.0))
    gap = draw(st.floats(1.0, 30.0))
    beta = alpha + gap
    gamma = draw(st.floats(0.0, 0.95)) * gap / 2.0
    ratio = draw(st.floats(0.0, 1.5))
    mu = draw(st.floats(0.5, 10.0))
    cutoff = draw(st.integers(2, max_cutoff))
    probs = tuple(draw(st.floats(0.05, 0.95)) for _ in range(cutoff - 2)) + (1.0,)
    return ModelParams(
        alpha_tilde=alpha,
        beta=beta,
        gamma=gamma,
        efficiency_ratio=ratio,
        mu=mu,
        detain=DetainSchedule(probs),
        block_reward=draw(st.floats(0.1, 20.0)),
        fee=draw(st.floats(0.0, 5.0)),
        electric_price=draw(st.floats(0.01, 5.0)),
        admin_price=draw(st.floats(0.01, 5.0)),
    )


def grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid with exact decimal steps."""
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 10)
