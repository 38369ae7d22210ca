"""Flat ``key = value`` experiment configuration.

Example::

    # Part of a profit sweep
    alpha_tilde = 10
    beta = 28
    detain_probs = 0.8, 1
    sweep = gamma 5 8.5 10
    sweep2 = efficiency_ratio 0.5 0.9 3

Blank lines and ``#`` comments are ignored.  Every key is typed; unknown
keys, duplicates and malformed values raise ``ConfigParseError`` with the
line number.  ``format_config`` writes the resolved configuration back in
the same syntax, and parsing that text reproduces the configuration
exactly (floats are written with ``repr``).
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigParseError, InvalidSweep
from .model import DetainSchedule, ModelParams, TruncationConfig

__all__ = ["SweepSpec", "ExperimentConfig", "parse_config", "load_config", "format_config", "MODEL_KEYS"]

MODEL_KEYS = (
    "alpha_tilde",
    "beta",
    "gamma",
    "efficiency_ratio",
    "mu",
    "block_reward",
    "fee",
    "electric_price",
    "admin_price",
)


@dataclass(frozen=True)
class SweepSpec:
    """``steps`` evenly spaced values of ``name`` from ``start`` to ``stop``."""

    name: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.name not in MODEL_KEYS:
            raise InvalidSweep(f"cannot sweep {self.name!r}; choose one of {', '.join(MODEL_KEYS)}")
        if self.steps < 1:
            raise InvalidSweep(f"sweep over {self.name} needs at least one step")
        if self.steps == 1 and self.start != self.stop:
            raise InvalidSweep(f"single-step sweep over {self.name} needs start == stop")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def text(self) -> str:
        return f"{self.name} {self.start!r} {self.stop!r} {self.steps}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment settings; defaults give the standard parameter point."""

    alpha_tilde: float = 10.0
    beta: float = 28.0
    gamma: float = 5.0
    efficiency_ratio: float = 0.5
    mu: float = 3.0
    detain_probs: tuple[float, ...] = (0.8, 1.0)
    block_reward: float = 0.5
    fee: float = 0.5
    electric_price: float = 0.5
    admin_price: float = 0.5
    sweep: SweepSpec | None = None
    sweep2: SweepSpec | None = None
    out: str = "-"
    seed: int = 0
    episodes: int = 100_000
    replications: int = 1
    batches: int = 100
    workers: int = 1
    max_level: int = 60
    ph_max_level: int = 4
    tail_tol: float = 1e-10
    rtol: float = 0.02

    def params(self, **overrides) -> ModelParams:
        values = {k: getattr(self, k) for k in MODEL_KEYS}
        values.update(overrides)
        return ModelParams(detain=DetainSchedule(tuple(self.detain_probs)), **values)

    def trunc(self) -> TruncationConfig:
        return TruncationConfig(max_level=self.max_level, tail_tol=self.tail_tol)

    def ph_trunc(self) -> TruncationConfig:
        return TruncationConfig(max_level=self.ph_max_level, tail_tol=self.tail_tol)

    def sweep_points(self) -> list[dict[str, float]]:
        """Sweep points in row order, the first sweep varying slowest."""
        if self.sweep is None:
            if self.sweep2 is not None:
                raise InvalidSweep("sweep2 given without sweep")
            return [{}]
        if self.sweep2 is not None and self.sweep2.name == self.sweep.name:
            raise InvalidSweep(f"both sweeps vary {self.sweep.name}")
        outer = [{self.sweep.name: float(v)} for v in self.sweep.values()]
        if self.sweep2 is None:
            return outer
        return [{**o, self.sweep2.name: float(v)} for o in outer for v in self.sweep2.values()]


_FLOAT_KEYS = {f.name for f in fields(ExperimentConfig) if f.type == "float"}
_INT_KEYS = {f.name for f in fields(ExperimentConfig) if f.type == "int"}
_KNOWN = {f.name for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str, lineno: int):
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key == "detain_probs":
            items = [s for s in raw.replace(",", " ").split()]
            if not items:
                raise ValueError("empty list")
            return tuple(float(s) for s in items)
        if key in ("sweep", "sweep2"):
            parts = raw.split()
            if len(parts) != 4:
                raise ValueError("expected 'name start stop steps'")
            return SweepSpec(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
        if key == "out":
            return raw
    except InvalidSweep:
        raise
    except ValueError as exc:
        raise ConfigParseError(f"line {lineno}: bad value for {key}: {raw!r} ({exc})") from None
    raise ConfigParseError(f"line {lineno}: unknown key {key!r}")


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse configuration text on top of ``base`` (defaults if omitted)."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigParseError(f"line {lineno}: expected 'key = value'")
        if key not in _KNOWN:
            raise ConfigParseError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigParseError(f"line {lineno}: duplicate key {key!r}")
        if raw == "none" and key in ("sweep", "sweep2"):
            values[key] = None
            continue
        values[key] = _parse_value(key, raw, lineno)
    return replace(base or ExperimentConfig(), **values)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _format_value(value) -> str:
    if isinstance(value, SweepSpec):
        return value.text()
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: ExperimentConfig) -> list[str]:
    """``key = value`` lines for every setting, in declaration order."""
    return [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
