"""Compiled kernels against the interpreted fallback, each in a fresh interpreter."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from pyramid_mining._accel import DISABLE_ENV

PROBE = r"""
import json, sys
from pyramid_mining import _accel
from pyramid_mining.cli import main
from pyramid_mining.generator import build_generator
from pyramid_mining.model import ModelParams, TruncationConfig
from pyramid_mining.simulation import sample_ph_absorption_times
from pyramid_mining.transient import build_ph_dishonest, expm_left_action

out = sys.argv[1]
main(["simulate", "--seed", "42", "--episodes", "5000", "--replications", "2", "--workers", "2", "--out", out])
ph = build_ph_dishonest(build_generator(ModelParams()), TruncationConfig(max_level=4))
x = expm_left_action(ph, 3.0)
draws = sample_ph_absorption_times(ph, 2000, seed=7)
json.dump({"numba": _accel.NUMBA_ENABLED, "x": x.tolist(), "draws": draws.tolist()}, sys.stdout)
"""


def probe(tmp_path, disable: bool):
    env = dict(os.environ)
    env.pop(DISABLE_ENV, None)
    if disable:
        env[DISABLE_ENV] = "1"
    out = tmp_path / f"sim-{int(disable)}.csv"
    res = subprocess.run([sys.executable, "-c", PROBE, str(out)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout), out.read_text()


@pytest.fixture(scope="module")
def both(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("accel")
    return probe(tmp, False), probe(tmp, True)


def test_flag_selects_backend(both):
    (fast, _), (slow, _) = both
    assert fast["numba"] is True and slow["numba"] is False


def test_simulator_output_is_bit_identical(both):
    (_, fast_csv), (_, slow_csv) = both
    strip = lambda text: [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert strip(fast_csv) == strip(slow_csv)


def test_ph_sampler_is_bit_identical(both):
    (fast, _), (slow, _) = both
    assert fast["draws"] == slow["draws"]


def test_uniformization_agrees(both):
    (fast, _), (slow, _) = both
    np.testing.assert_allclose(fast["x"], slow["x"], rtol=0, atol=1e-14)
    assert sum(fast["x"]) == pytest.approx(1.0, abs=1e-12)
