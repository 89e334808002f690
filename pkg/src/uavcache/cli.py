"""Command-line entry point: ``uavcache {run,summarize,oracle-check,dump-state}``.

Every flag can also come from an environment variable named ``UAVCACHE_``
plus the flag in upper case (``--reps`` -> ``UAVCACHE_REPS``). Flags win over
the environment, which wins over the config file's ``experiment`` section.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import harness
from .config import Config, load_config
from .errors import UavCacheError, UsageError

ENV_PREFIX = "UAVCACHE_"


def parse_sweep(text: str):
    """``"H=60,80,100"`` -> ``("H", (60.0, 80.0, 100.0))``."""
    axis, sep, values = text.partition("=")
    if not sep or not values:
        raise UsageError(f"--sweep expects AXIS=v1,v2,..., got {text!r}")
    try:
        return axis.strip(), tuple(float(v) for v in values.split(","))
    except ValueError as exc:
        raise UsageError(f"bad sweep value in {text!r}") from exc


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _config(args) -> Config:
    path = args.config or _env("config")
    return load_config(path) if path else Config()


def _common(p, out_default):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--out", help=f"output directory (default {out_default})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavcache", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run a replicated sweep and write CSVs")
    _common(p, "results/")
    p.add_argument("--sweep", help="AXIS=v1,v2,... with AXIS in " + ",".join(harness.AXES))
    p.add_argument("--algos", help="comma list from " + ",".join(harness.ALGORITHMS))
    p.add_argument("--reps", type=int, help="replications per point")
    p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("summarize", help="aggregate a results CSV")
    p.add_argument("results", nargs="?", help="results.csv (default <out>/results.csv)")
    p.add_argument("--out", help="directory holding results.csv")

    p = sub.add_parser("oracle-check", help="compare against exhaustive search on small instances")
    _common(p, "none")
    p.add_argument("--count", type=int, default=20, help="number of seeds")
    p.add_argument("--tol", type=float, default=0.05)

    p = sub.add_parser("dump-state", help="solve one instance and dump its state")
    _common(p, "state/")
    p.add_argument("--algo", default="proposed", choices=harness.ALGORITHMS)
    return parser


def cmd_run(args) -> int:
    config = _config(args)
    overrides = {}
    sweep = args.sweep or _env("sweep")
    if sweep:
        overrides["axis"], overrides["values"] = parse_sweep(sweep)
    algos = args.algos or _env("algos")
    if algos:
        overrides["algorithms"] = tuple(a.strip() for a in algos.split(",") if a.strip())
    for name, cast in (("reps", int), ("seed", int), ("workers", int)):
        value = getattr(args, name)
        value = value if value is not None else _env(name)
        if value is not None:
            key = {"reps": "replications", "seed": "base_seed"}.get(name, name)
            overrides[key] = cast(value)
    plan = harness.ExperimentPlan.from_config(config, **overrides)
    out = Path(args.out or _env("out", "results"))
    outcome = harness.run(plan)
    paths = harness.write_outputs(plan, outcome, out)
    print(f"{len(outcome.rows)} cells -> {paths['results']}")
    for r in outcome.failures:
        print(f"FAILED {plan.axis}={r['value']} {r['algorithm']} r={r['replication']}: {r['error']}",
              file=sys.stderr)
    if outcome.failures:
        print(f"{len(outcome.failures)} of {len(outcome.rows)} cells failed", file=sys.stderr)
    return outcome.exit_code


def cmd_summarize(args) -> int:
    path = args.results or Path(args.out or _env("out", "results")) / "results.csv"
    rows = harness.read_csv(path)
    summary = harness.summarize(rows)
    dest = harness.write_csv(Path(path).with_name("summary.csv"), summary, harness.SUMMARY_COLUMNS)
    for s in summary:
        print(f"{s['axis']}={harness.fmt(s['value']):>8} {s['algorithm']:<9} n={s['n']:<3} "
              f"mos={s['avg_mos_mean']:.4f}±{s['avg_mos_std']:.4f} "
              f"offload={s['offload_ratio_mean']:.3f}")
    print(f"-> {dest}")
    return 0


def cmd_oracle_check(args) -> int:
    config = _config(args)
    base = args.seed if args.seed is not None else int(_env("seed", 0))
    rows = harness.oracle_check(config, range(base, base + args.count), args.tol)
    for r in rows:
        flag = "ok " if r["ok"] else "GAP"
        print(f"{flag} seed={r['seed']:<4} proposed={r['proposed']:.4f} oracle={r['oracle']:.4f} "
              f"gap={r['gap']:.4f} iters={r['iterations']}")
    out = args.out or _env("out")
    if out:
        harness.write_csv(Path(out) / "oracle_check.csv", rows,
                          ("seed", "proposed", "oracle", "gap", "iterations", "ok"))
    return 0 if all(r["ok"] for r in rows) else 1


def cmd_dump_state(args) -> int:
    config = _config(args)
    seed = args.seed if args.seed is not None else int(_env("seed", config.seed))
    problem, state, trace = harness.solve(config, args.algo, seed)
    paths = harness.dump_state(problem, state, trace, Path(args.out or _env("out", "state")))
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


COMMANDS = {"run": cmd_run, "summarize": cmd_summarize, "oracle-check": cmd_oracle_check,
            "dump-state": cmd_dump_state}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except UavCacheError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
