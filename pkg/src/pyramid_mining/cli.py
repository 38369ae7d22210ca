"""Command-line front end writing CSV tables.

Every table starts with ``# key = value`` comment lines holding the full
resolved configuration and the subcommand flags, followed by a header row.
Numbers are written with ``repr`` (shortest round-trip form, ``.`` as the
decimal point), so identical inputs give byte-identical files.

Failures print one line ``error: <ErrorName>: <message>`` on stderr and
exit with status 2; a ``compare`` that finds a discrepancy exits with 1.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import reduced as rd
from .config import MODEL_KEYS, ExperimentConfig, format_config, load_config
from .errors import PyramidMiningError, SchemaMismatch
from .generator import build_generator
from .metrics import chain_metrics
from .model import ModelParams, validate
from .rewards import profit_report
from .simulation import SimConfig, estimate_metrics, estimate_stationary, simulate
from .stationary import stationary
from .transient import build_ph, ph_moment, transient_profit

__all__ = ["main", "build_parser", "compare_tables"]

PARAM_COLUMNS = (*MODEL_KEYS, "detain_probs")
SWEEP_TARGETS = ("metrics", "rewards", "approx")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


class Table:
    """Rows of one CSV artifact with its comment header."""

    def __init__(self, columns: Sequence[str], comments: Iterable[str] = ()):
        self.columns = list(columns)
        self.comments = list(comments)
        self.rows: list[list[str]] = []

    def add(self, values: Sequence) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append([_fmt(v) for v in values])

    def render(self) -> str:
        buf = io.StringIO()
        for line in self.comments:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    def write(self, out: str) -> None:
        text = self.render()
        if out == "-":
            sys.stdout.write(text)
        else:
            Path(out).write_text(text, encoding="utf-8")


def read_table(path: str) -> tuple[list[str], list[dict[str, str]]]:
    """Header and rows of a CSV written by this tool (comment lines skipped)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader.fieldnames or []), list(reader)


def _param_values(p: ModelParams) -> list:
    return [getattr(p, k) for k in MODEL_KEYS] + [" ".join(repr(float(x)) for x in p.detain.probs)]


def _header(cfg: ExperimentConfig, args: argparse.Namespace) -> list[str]:
    flags = [f"{k} = {_fmt(v)}" for k, v in sorted(vars(args).items()) if k not in ("config", "func") and v is not None]
    return ["config:", *format_config(cfg), "flags:", *flags]


# -- per-point evaluators -----------------------------------------------------


def _metrics_row(cfg: ExperimentConfig, p: ModelParams, args) -> tuple[list[str], list]:
    m = chain_metrics(stationary(build_generator(validate(p))))
    d = m.as_dict()
    return list(d), list(d.values()), ""


def _rewards_row(cfg: ExperimentConfig, p: ModelParams, args) -> tuple[list[str], list]:
    rep = profit_report(stationary(build_generator(validate(p))), p)
    cols = ["r_honest", "r_dishonest", "threshold_v", "ratio_im", "ratio_tau", "constant_c"]
    return cols, [getattr(rep, c) for c in cols], rep.ratio_im_error


def _approx_row(cfg: ExperimentConfig, p: ModelParams, args) -> tuple[list[str], list]:
    chain = rd.build_reduced(validate(p), args.variant)
    psi = rd.stationary_reduced(chain)
    prof = rd.relative_profits(chain, psi)
    cols = ["r_h_rel", "r_d_rel", "r_total", "ratio", "rho_honest", "rho_dishonest"]
    return cols, [getattr(prof, c) for c in cols], prof.ratio_error


EVALUATORS: dict[str, Callable] = {"metrics": _metrics_row, "rewards": _rewards_row, "approx": _approx_row}


def _evaluate(target: str, cfg: ExperimentConfig, p: ModelParams, args):
    try:
        cols, vals, note = EVALUATORS[target](cfg, p, args)
        # a named note marks a value that is undefined at this point (nan)
        return cols, vals, f"undefined: {note}" if note else "ok"
    except PyramidMiningError as exc:
        return None, None, f"warning: {_describe(exc)}"


def _point_table(target: str, cfg: ExperimentConfig, args, points: list[dict[str, float]]) -> Table:
    params = [cfg.params(**pt) for pt in points]
    jobs = [(target, cfg, p, args) for p in params]
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda j: _evaluate(*j), jobs))
    else:
        results = [_evaluate(*j) for j in jobs]
    cols = next((c for c, _, _ in results if c is not None), None)
    if cols is None:
        cols = EVALUATORS[target](cfg, ModelParams(), args)[0]
    table = Table(["point", *PARAM_COLUMNS, *cols, "status"], _header(cfg, args))
    for i, (p, (_, vals, status)) in enumerate(zip(params, results)):
        vals = vals if vals is not None else [math.nan] * len(cols)
        table.add([i, *_param_values(p), *vals, status])
    return table


def _fail_on_warning(table: Table) -> None:
    status = table.rows[0][-1]
    if status.startswith("warning: "):
        name, _, message = status[len("warning: "):].partition(": ")
        raise _Surfaced(name, message)


def _describe(exc: Exception) -> str:
    """``Name: message`` without repeating the name when the message leads with it."""
    name, text = type(exc).__name__, str(exc)
    prefix = f"{name}: "
    return f"{name}: {text[len(prefix):] if text.startswith(prefix) else text}"


class _Surfaced(Exception):
    def __init__(self, name: str, message: str):
        super().__init__(message)
        self.name = name


def _point_text(cfg: ExperimentConfig) -> str:
    return " ".join(f"{k}={_fmt(getattr(cfg, k))}" for k in MODEL_KEYS) + " detain_probs=" + ",".join(
        repr(float(x)) for x in cfg.detain_probs
    )


# -- subcommands ----------------------------------------------------------------


def cmd_solve(cfg: ExperimentConfig, args) -> int:
    p = validate(cfg.params())
    gen = build_generator(p)
    pi = stationary(gen)
    if args.dump_blocks:
        dump = Table(["block", "row", "col", "value"], _header(cfg, args))
        for t in gen.triples():
            dump.add(t)
        dump.write(args.dump_blocks)
    levels = args.levels if args.levels is not None else pi.levels_for_mass(cfg.tail_tol * 1e-3)
    table = Table(["level", "lead", "probability"], _header(cfg, args))
    for row in pi.rows(levels):
        table.add(row)
    table.write(cfg.out)
    return 0


def _single(target: str):
    def run(cfg: ExperimentConfig, args) -> int:
        table = _point_table(target, cfg, args, [{}])
        _fail_on_warning(table)
        table.write(cfg.out)
        return 0

    return run


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    points = cfg.sweep_points()
    table = _point_table(args.target, cfg, args, points)
    table.write(cfg.out)
    return 0


def _time_grid(args, mean: float) -> list[float]:
    if args.times:
        return [float(t) for t in args.times.replace(",", " ").split()]
    return [mean * m for m in (0.5, 1, 2, 5, 10, 20, 50, 100)]


def cmd_transient(cfg: ExperimentConfig, args) -> int:
    p = validate(cfg.params())
    gen = build_generator(p)
    pi = stationary(gen) if args.init == "stationary" or args.init == "diagonal" else None
    ph = build_ph(gen, cfg.ph_trunc(), args.pool, args.init, pi)
    mean = ph_moment(ph, 1)
    table = Table(["t", "expected_renewals", "profit"], [*_header(cfg, args), f"mean_pegging_time = {mean!r}"])
    for t in _time_grid(args, mean):
        tp = transient_profit(ph, p, args.pool, t, mean)
        table.add([tp.horizon, tp.expected_renewals, tp.profit])
    table.write(cfg.out)
    return 0


def cmd_approx(cfg: ExperimentConfig, args) -> int:
    p = validate(cfg.params())
    chain = rd.build_reduced(p, args.variant)
    psi = rd.stationary_reduced(chain)
    prof = rd.relative_profits(chain, psi)
    table = Table(["kind", "name", "value"], _header(cfg, args))
    for state, v in zip(chain.states, psi):
        table.add(["psi", state, float(v)])
    for k, v in prof.__dict__.items():
        if k != "ratio_error":
            table.add(["profit", k, v])
    table.add(["profit", "status", prof.ratio_error or "ok"])
    table.write(cfg.out)
    return 0


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    p = validate(cfg.params())
    sim = SimConfig(
        params=p,
        seed=cfg.seed,
        episodes=cfg.episodes,
        replications=cfg.replications,
        batches=cfg.batches,
        regime=args.regime,
        workers=cfg.workers,
        trunc=cfg.trunc(),
    )
    run = simulate(sim)
    table = Table(["name", "mean", "std_error", "n"], _header(cfg, args))
    for est in estimate_metrics(sim, run).values():
        table.add([est.name, est.mean, est.std_error, est.n])
    if args.regime == "full":
        table.add(["pi_sum", estimate_stationary(sim, run).total(), 0.0, sim.batches * sim.replications])
    table.write(cfg.out)
    return 0


def _metric_map(path: str) -> dict[str, tuple[float, float]]:
    """``name -> (value, std_error)`` from a long or a single-row wide table."""
    cols, rows = read_table(path)
    if "name" in cols and ("mean" in cols or "value" in cols):
        key = "mean" if "mean" in cols else "value"
        out = {}
        for r in rows:
            try:
                out[r["name"]] = (float(r[key]), float(r.get("std_error") or 0.0))
            except ValueError:
                continue
        return out
    if len(rows) != 1:
        raise SchemaMismatch(f"{path}: expected a long table or exactly one data row, found {len(rows)} rows")
    out = {}
    for c in cols:
        if c in PARAM_COLUMNS or c in ("point", "status"):
            continue
        try:
            out[c] = (float(rows[0][c]), 0.0)
        except ValueError:
            continue
    return out


def compare_tables(reference: str, estimate: str, rtol: float, zmax: float = 4.0) -> tuple[Table, bool]:
    """Per-metric z-scores and relative errors of ``estimate`` against ``reference``."""
    ref, est = _metric_map(reference), _metric_map(estimate)
    names = [n for n in ref if n in est]
    if not names:
        raise SchemaMismatch(f"no metric names in common between {reference} and {estimate}")
    table = Table(["name", "reference", "estimate", "std_error", "z", "rel_error", "status"])
    ok = True
    for n in names:
        (r, se_r), (e, se_e) = ref[n], est[n]
        diff = e - r
        se = math.hypot(se_r, se_e)
        if diff == 0 or (math.isnan(r) and math.isnan(e)):
            z, rel = 0.0, 0.0
        else:
            z = diff / se if se > 0 else math.copysign(math.inf, diff)
            rel = abs(diff) / abs(r) if r != 0 else math.inf
        good = abs(z) <= zmax and rel <= rtol
        ok &= good
        table.add([n, r, e, se, z, rel, "ok" if good else "fail"])
    return table, ok


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    table, ok = compare_tables(args.reference, args.estimate, args.rtol if args.rtol is not None else cfg.rtol)
    table.comments = _header(cfg, args)
    table.write(cfg.out)
    return 0 if ok else 1


# -- argument handling ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--out", help="output CSV path, '-' for stdout")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="threads for sweep points or replications")

    parser = argparse.ArgumentParser(prog="pyramid-mining", description="Selfish-mining Markov model toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="stationary distribution rows")
    s.add_argument("--levels", type=int, help="highest level written (default: tail below tail_tol/1000)")
    s.add_argument("--dump-blocks", metavar="PATH", help="also write generator blocks as (block,row,col,value)")
    s.set_defaults(func=cmd_solve)

    for name in ("metrics", "rewards"):
        s = sub.add_parser(name, parents=[common], help=f"{name} at one parameter point")
        s.set_defaults(func=_single(name), variant=None)

    s = sub.add_parser("transient", parents=[common], help="expected renewals and profit over time")
    s.add_argument("--pool", choices=("honest", "dishonest"), default="honest")
    s.add_argument("--init", choices=("race", "stationary", "diagonal"), default="race")
    s.add_argument("--times", help="comma-separated horizons (default: multiples of the mean pegging time)")
    s.add_argument("--levels", type=int, help="level cutoff of the absorbing chain (overrides ph_max_level)")
    s.set_defaults(func=cmd_transient)

    s = sub.add_parser("approx", parents=[common], help="lead-only reduced chains")
    s.add_argument("--variant", choices=[v.value for v in rd.Variant], default="nolatency")
    s.set_defaults(func=cmd_approx)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates")
    s.add_argument("--episodes", type=int)
    s.add_argument("--replications", type=int)
    s.add_argument("--regime", choices=("full", "no_latency"), default="full")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", parents=[common], help="evaluate a target over the configured sweeps")
    s.add_argument("target", choices=SWEEP_TARGETS)
    s.add_argument("--variant", choices=[v.value for v in rd.Variant], default="nolatency")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("compare", parents=[common], help="z-scores of an estimate table against a reference")
    s.add_argument("reference")
    s.add_argument("estimate")
    s.add_argument("--rtol", type=float, help="relative error bound (default: config rtol)")
    s.set_defaults(func=cmd_compare)
    return parser


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    for flag in ("out", "seed", "workers", "episodes", "replications"):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[flag] = v
    if args.command == "transient" and args.levels is not None:
        overrides["ph_max_level"] = args.levels
    return replace(cfg, **overrides)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
    except (PyramidMiningError, ValueError) as exc:
        print(f"error: {_describe(exc)}", file=sys.stderr)
        return 2
    try:
        return args.func(cfg, args)
    except _Surfaced as exc:
        print(f"error: {exc.name}: {exc} [point: {_point_text(cfg)}]", file=sys.stderr)
    except (PyramidMiningError, ValueError) as exc:
        print(f"error: {_describe(exc)} [point: {_point_text(cfg)}]", file=sys.stderr)
    except OSError as exc:
        print(f"error: {_describe(exc)}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
