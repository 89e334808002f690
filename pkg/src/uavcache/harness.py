"""Replicated parameter sweeps and their CSV artifacts.

A plan sweeps one axis of the network config over a list of values and runs
every (point, algorithm, replication) cell. Replication ``r`` uses the same
seed at every point, so differences between points are paired comparisons.

Artifacts written by :func:`write_outputs`:

* ``results.csv``: one row per cell, deterministic (no timings)
* ``timings.csv``: wall-clock per cell
* ``summary.csv``: mean and population std per (point, algorithm)
* ``manifest.json``: config digest, seeds, library versions
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, association, joint, qoe
from .config import Config
from .errors import ConfigError, UsageError
from .problem import build_problem

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ALGORITHMS = ("proposed", "classic", "random", "oracle")
# axis name -> (network field, scale applied to the given value)
AXES = {
    "cache_bits": ("cache_bits", 1.0),
    "H": ("cache_bits", 1e6),  # Mbits
    "K": ("K", 1),
    "height": ("height", 1.0),
    "h": ("height", 1.0),
    "zipf_gamma": ("zipf_gamma", 1.0),
    "gamma": ("zipf_gamma", 1.0),
}
METRICS = ("avg_mos", "offload_ratio", "objective", "outer_iterations")
RESULT_COLUMNS = ("schema_version", "axis", "value", "algorithm", "replication", "seed",
                  *METRICS, "status", "error")
SUMMARY_COLUMNS = ("schema_version", "axis", "value", "algorithm", "n",
                   *(f"{m}_{s}" for m in METRICS for s in ("mean", "std")))
ORACLE_CAP = 1e8


def replication_seed(base_seed: int, replication: int) -> int:
    """``base_seed`` XOR a stable 63-bit hash of the replication index."""
    digest = hashlib.blake2b(f"replication:{replication}".encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "big")) & ((1 << 63) - 1)


def apply_axis(config: Config, axis: str, value) -> Config:
    name, scale = AXES[axis]
    if name == "height":
        return config.replace_network(height=(float(value), float(value)))
    if name == "K":
        if float(value) != int(value):
            raise ConfigError(f"K must be an integer, got {value!r}")
        return config.replace_network(K=int(value))
    return config.replace_network(**{name: float(value) * scale})


@dataclass(frozen=True)
class ExperimentPlan:
    config: Config = field(default_factory=Config)
    axis: str = "H"
    values: tuple = (100.0,)
    algorithms: tuple = ("proposed", "classic", "random")
    replications: int = 1
    base_seed: int = 1
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {sorted(AXES)}")
        if not self.values:
            raise ConfigError("a sweep needs at least one value")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if self.replications < 1 or self.workers < 1:
            raise ConfigError("replications and workers must be >= 1")
        # building every point validates the axis values up front
        points = [self.point_config(v) for v in self.values]
        if "oracle" in self.algorithms:
            for v, cfg in zip(self.values, points):
                net = cfg.network
                size = joint.oracle_size(net.N, net.M, net.K)
                if size > ORACLE_CAP:
                    raise ConfigError(
                        f"oracle at {self.axis}={v} needs {size:.3g} configurations "
                        f"(cap {ORACLE_CAP:.3g})")

    def point_config(self, value) -> Config:
        return apply_axis(self.config, self.axis, value)

    def cells(self):
        for value in self.values:
            for algorithm in self.algorithms:
                for r in range(self.replications):
                    yield value, algorithm, r

    @classmethod
    def from_config(cls, config: Config, **overrides) -> "ExperimentPlan":
        section = dict(config.experiment)
        section.update({k: v for k, v in overrides.items() if v is not None})
        section.setdefault("base_seed", config.seed)
        known = {f.name for f in dataclasses.fields(cls)} - {"config"}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(config=config, **section)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "values": list(self.values),
            "algorithms": list(self.algorithms),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "seeds": [replication_seed(self.base_seed, r) for r in range(self.replications)],
        }


def solve(config: Config, algorithm: str, seed: int):
    """Build the instance for ``seed`` and run one algorithm on it.

    Returns ``(problem, state, trace)``; ``trace`` is None except for ``proposed``.
    """
    problem = build_problem(config, seed)
    trace = None
    if algorithm == "proposed":
        params = joint.JointParams.from_dict(config.joint, config.association)
        state, trace = joint.optimize(problem, params)
    elif algorithm == "classic":
        state = joint.baseline_classic(problem)
    elif algorithm == "random":
        state = joint.baseline_random(problem, seed)
    elif algorithm == "oracle":
        state = joint.exhaustive_oracle(problem, cap=ORACLE_CAP)
    else:
        raise UsageError(f"unknown algorithm {algorithm!r}")
    return problem, state, trace


def run_cell(plan: ExperimentPlan, value, algorithm: str, replication: int) -> tuple[dict, float]:
    seed = replication_seed(plan.base_seed, replication)
    row = {"schema_version": SCHEMA_VERSION, "axis": plan.axis, "value": value,
           "algorithm": algorithm, "replication": replication, "seed": seed}
    start = time.perf_counter()
    try:
        problem, state, trace = solve(plan.point_config(value), algorithm, seed)
        row.update(qoe.metrics(problem, state))
        row["outer_iterations"] = trace.iterations if trace is not None else 0
        row.update(status="ok", error="")
    except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the sweep
        log.debug("cell %s=%s %s r=%d failed\n%s", plan.axis, value, algorithm, replication,
                  traceback.format_exc())
        row.update({m: math.nan for m in METRICS})
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row, time.perf_counter() - start


def _run_packed(args):
    return run_cell(*args)


@dataclass
class RunOutcome:
    rows: list
    timings: list

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r["status"] != "ok"]

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


def _sort_key(row):
    return (float(row["value"]), ALGORITHMS.index(row["algorithm"]), row["replication"])


def run(plan: ExperimentPlan) -> RunOutcome:
    jobs = [(plan, v, a, r) for v, a, r in plan.cells()]
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            out = list(pool.map(_run_packed, jobs, chunksize=1))
    else:
        out = [_run_packed(job) for job in jobs]
    pairs = sorted(out, key=lambda p: _sort_key(p[0]))
    rows = [p[0] for p in pairs]
    timings = [{"axis": r["axis"], "value": r["value"], "algorithm": r["algorithm"],
                "replication": r["replication"], "runtime_s": t} for r, t in pairs]
    return RunOutcome(rows, timings)


def summarize(rows) -> list:
    """Mean and population std of every metric per (axis, value, algorithm)."""
    rows = [r for r in rows if r.get("status", "ok") == "ok"]
    if not rows:
        raise UsageError("nothing to summarize: no successful result rows")
    groups: dict = {}
    for r in rows:
        key = (r["axis"], float(r["value"]), r["algorithm"])
        groups.setdefault(key, []).append(r)
    out = []
    order = sorted(groups, key=lambda k: (k[0], k[1], ALGORITHMS.index(k[2]) if k[2] in ALGORITHMS else 99, k[2]))
    for key in order:
        members = groups[key]
        rec = {"schema_version": SCHEMA_VERSION, "axis": key[0], "value": key[1],
               "algorithm": key[2], "n": len(members)}
        for m in METRICS:
            vals = np.array([float(r[m]) for r in members])
            rec[f"{m}_mean"] = float(vals.mean())
            rec[f"{m}_std"] = float(vals.std())
        out.append(rec)
    return out


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def write_csv(path, rows, columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c, "")) for c in columns])
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and rows[0].get("schema_version") != str(SCHEMA_VERSION):
        raise UsageError(f"{path}: unsupported schema_version {rows[0].get('schema_version')!r}")
    for r in rows:
        r["replication"] = int(r["replication"])
        for m in METRICS:
            r[m] = float(r[m])
    return rows


def manifest(plan: ExperimentPlan, outcome: RunOutcome | None = None) -> dict:
    data = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config_sha256": plan.config.digest(),
        "config": plan.config.to_dict(),
        "plan": plan.to_dict(),
        "versions": {"python": platform.python_version(), "numpy": np.__version__},
        "rng": "numpy PCG64, SeedSequence([seed, stream])",
    }
    if outcome is not None:
        data["cells"] = len(outcome.rows)
        data["failures"] = [{k: r[k] for k in ("value", "algorithm", "replication", "error")}
                            for r in outcome.failures]
    return data


def write_outputs(plan: ExperimentPlan, outcome: RunOutcome, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": write_csv(out / "results.csv", outcome.rows, RESULT_COLUMNS),
        "timings": write_csv(out / "timings.csv", outcome.timings,
                             ("axis", "value", "algorithm", "replication", "runtime_s")),
    }
    ok = [r for r in outcome.rows if r["status"] == "ok"]
    if ok:
        paths["summary"] = write_csv(out / "summary.csv", summarize(ok), SUMMARY_COLUMNS)
    paths["manifest"] = out / "manifest.json"
    paths["manifest"].write_text(json.dumps(manifest(plan, outcome), indent=2, sort_keys=True, default=str) + "\n")
    return paths


def dump_state(problem, state, trace, out_dir, dual_trace=None) -> dict:
    """Write a solution and its diagnostics as plain CSV files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cand = problem.scenario.candidates
    users = problem.scenario.users
    paths = {}
    paths["deployment"] = write_csv(out / "deployment.csv", [
        {"uav_id": m, "candidate_id": int(n), "x": cand[n, 0], "y": cand[n, 1], "z": cand[n, 2]}
        for m, n in enumerate(state.deployment)], ("uav_id", "candidate_id", "x", "y", "z"))
    paths["caches"] = write_csv(out / "caches.csv", [
        {"uav_id": int(m), "content_id": int(f)} for m, f in zip(*np.nonzero(state.caches))],
        ("uav_id", "content_id"))
    access, backhaul = qoe.delays(problem, state)
    user_mos = qoe.user_mos(problem, state, clamp=problem.mos.clamp)
    paths["associations"] = write_csv(out / "associations.csv", [
        {"user_id": k, "uav_id": int(state.association[k]), "x": users[k, 0], "y": users[k, 1],
         "content_id": int(problem.requests.request[k]),
         "cache_hit": bool(state.caches[state.association[k], problem.requests.request[k]]),
         "access_delay_s": access[k], "backhaul_delay_s": backhaul[k], "mos": user_mos[k]}
        for k in range(problem.K)],
        ("user_id", "uav_id", "x", "y", "content_id", "cache_hit", "access_delay_s",
         "backhaul_delay_s", "mos"))
    pl = problem.links.pl_access
    paths["pathloss"] = write_csv(out / "pathloss.csv", [
        {"candidate_id": n, "user_id": k, "pathloss_db": pl[n, k], "los": bool(problem.links.los_access[n, k])}
        for n in range(problem.N) for k in range(problem.K)],
        ("candidate_id", "user_id", "pathloss_db", "los"))
    if trace is not None:
        paths["joint_trace"] = write_csv(out / "joint_trace.csv", list(trace.rows()), (
            "iteration", "objective", "after_deployment", "after_caching", "after_association",
            "swaps", "relocations", "wall_clock_s"))
        paths["swap_log"] = write_csv(out / "swap_log.csv", [
            {"iteration": it, "uav_id": rec.m, "partner": rec.partner, "vacant": rec.vacant,
             "utility_before": rec.before[0], "utility_after": rec.after[0], "objective": rec.objective}
            for it, rec in trace.swap_log],
            ("iteration", "uav_id", "partner", "vacant", "utility_before", "utility_after", "objective"))
        dual_trace = trace.dual_trace if dual_trace is None else dual_trace
    if dual_trace is None:
        dual_trace = association.solve(problem, state).trace
    paths["dual_trace"] = write_csv(out / "dual_trace.csv", dual_trace,
                                    ("t", "L_alpha", "L_t", "eps_t", "primal_objective"))
    return paths


def oracle_check(config: Config, seeds, tolerance: float = 0.05) -> list:
    """Proposed vs exhaustive average MOS (unclamped) on each seed."""
    rows = []
    for seed in seeds:
        problem, state, trace = solve(config, "proposed", seed)
        best = joint.exhaustive_oracle(problem, cap=ORACLE_CAP)
        prop = qoe.average_mos(problem, state, clamp=False)
        orc = qoe.average_mos(problem, best, clamp=False)
        rows.append({"seed": seed, "proposed": prop, "oracle": orc, "gap": orc - prop,
                     "iterations": trace.iterations, "ok": orc - prop <= tolerance})
    return rows
