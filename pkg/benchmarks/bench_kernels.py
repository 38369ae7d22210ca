"""Compiled kernels against the interpreted fallback.

Each backend runs in its own interpreter because the backend is fixed at
import time by ``PYRAMID_MINING_DISABLE_NUMBA``.  The first call of every
kernel is timed separately so numba compilation is not counted.

    python3 benchmarks/bench_kernels.py [--episodes N] [--repeat R]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CHILD = "--child"


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(episodes: int, repeat: int) -> dict:
    from pyramid_mining import _accel
    from pyramid_mining.generator import build_generator
    from pyramid_mining.model import ModelParams, TruncationConfig
    from pyramid_mining.simulation import SimConfig, estimate_renewals, simulate
    from pyramid_mining.transient import build_ph_dishonest, expm_left_action, ph_moment

    params = ModelParams()
    ph = build_ph_dishonest(build_generator(params), TruncationConfig(max_level=4))
    mean = ph_moment(ph, 1)
    cases = {
        "simulate": lambda: simulate(SimConfig(params, seed=1, episodes=episodes)),
        "renewals": lambda: estimate_renewals(ph, 20 * mean, 2000, seed=1),
        "uniformize": lambda: expm_left_action(ph, 10 * mean),
    }
    out = {"numba": _accel.NUMBA_ENABLED, "phases": ph.size}
    for name, fn in cases.items():
        t0 = time.perf_counter()
        fn()
        out[f"{name}_first"] = time.perf_counter() - t0
        out[name] = _best(fn, repeat)
    return out


def run(disable: bool, episodes: int, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("PYRAMID_MINING_DISABLE_NUMBA", None)
    if disable:
        env["PYRAMID_MINING_DISABLE_NUMBA"] = "1"
    cmd = [sys.executable, __file__, CHILD, "--episodes", str(episodes), "--repeat", str(repeat)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument(CHILD, action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("--episodes", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if args.child:
        json.dump(child(args.episodes, args.repeat), sys.stdout)
        return
    fast = run(False, args.episodes, args.repeat)
    slow = run(True, args.episodes, args.repeat)
    print(f"episodes={args.episodes} repeat={args.repeat} phases={fast['phases']}")
    print(f"{'kernel':<12}{'numba s':>10}{'compile s':>11}{'fallback s':>12}{'speedup':>9}")
    for name in ("simulate", "renewals", "uniformize"):
        compile_s = fast[f"{name}_first"] - fast[name]
        print(f"{name:<12}{fast[name]:>10.4f}{compile_s:>11.3f}{slow[name]:>12.4f}{slow[name] / fast[name]:>9.1f}")


if __name__ == "__main__":
    main()
