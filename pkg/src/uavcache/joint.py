"""Alternating joint optimisation of deployment, caching and association.

Also hosts the two reference strategies (``classic``: spread deployment,
most-popular caching, max-SINR access; ``random``) and an exhaustive search
over deployments and associations for small instances.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import association, caching, deployment, qoe
from .config import coerce_fields
from .errors import CapacityError, UavCacheError
from .model import SolutionState, grid_shape, rng_stream


class StageError(UavCacheError):
    def __init__(self, stage, cause):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class JointParams:
    delta: float = 1e-3
    max_outer: int = 50
    guard_externality: bool = True
    max_swaps: int | None = None
    # joint relocation search after the swap stage; 0 disables it
    refine_passes: int = 20
    refine_dual_iter: int = 100
    dual: association.DualParams = field(default_factory=association.DualParams)

    @classmethod
    def from_dict(cls, section: dict | None, dual: dict | None = None) -> "JointParams":
        section = coerce_fields(cls, dict(section or {}))
        section.pop("dual", None)
        return replace(cls(), dual=association.dual_params_from(dual), **section)


@dataclass
class JointTrace:
    objective: list = field(default_factory=list)  # MOS(l); entry 0 is the initial solution
    stages: list = field(default_factory=list)  # per iteration: (after deployment, caching, association)
    wall_clock: list = field(default_factory=list)
    swaps: list = field(default_factory=list)
    relocations: list = field(default_factory=list)
    swap_log: list = field(default_factory=list)  # (iteration, SwapRecord)
    dual_trace: list = field(default_factory=list)  # iterations of the last association solve
    dual_capped: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.stages)

    @property
    def converged_at(self) -> int:
        """First iteration from which the objective no longer moved."""
        final = self.objective[-1]
        for l in range(1, len(self.objective)):
            if all(abs(v - final) == 0.0 for v in self.objective[l:]):
                return l
        return len(self.objective) - 1

    def is_monotone(self, tol=1e-9) -> bool:
        seq = [self.objective[0]]
        for st in self.stages:
            seq.extend(st)
        return all(b >= a - tol * max(1.0, abs(a)) for a, b in zip(seq, seq[1:]))

    def rows(self):
        for l, st in enumerate(self.stages, start=1):
            yield {
                "iteration": l,
                "objective": self.objective[l],
                "after_deployment": st[0],
                "after_caching": st[1],
                "after_association": st[2],
                "swaps": self.swaps[l - 1],
                "relocations": self.relocations[l - 1],
                "wall_clock_s": self.wall_clock[l - 1],
            }


def max_sinr_association(problem, deployment_vec) -> np.ndarray:
    # the strongest received signal also has the largest SINR
    return np.argmax(problem.rx_access[np.asarray(deployment_vec)], axis=0)


def spread_deployment(problem, M: int) -> np.ndarray:
    """Place UAVs near the centres of an even M-cell grid over the region."""
    width, height = problem.scenario.region
    cols, rows = grid_shape(M, (width, height))
    cand = problem.scenario.candidates[:, :2]
    taken = []
    for i in range(M):
        target = np.array([((i % cols) + 0.5) * width / cols, ((i // cols) + 0.5) * height / rows])
        dist = np.linalg.norm(cand - target, axis=1)
        dist[taken] = np.inf
        taken.append(int(np.argmin(dist)))
    return np.array(taken, dtype=np.int64)


def initial_solution(problem) -> SolutionState:
    M = problem.M
    empty = np.zeros((M, problem.F), dtype=bool)
    rough = spread_deployment(problem, M)
    state = SolutionState(rough, empty, max_sinr_association(problem, rough))
    dep = deployment.gs_initialize(problem, state)
    return SolutionState(dep, empty, max_sinr_association(problem, dep))


def _reoptimize(problem, state, dual):
    state = state.replace(caches=caching.greedy_place(problem, state))
    state = state.replace(association=association.solve(problem, state, dual).association)
    return state.replace(caches=caching.greedy_place(problem, state))


def relocation_neighbours(deployment_vec, N: int):
    """Every deployment reachable by moving one UAV (exchanging if occupied)."""
    dep = np.asarray(deployment_vec)
    for m in range(len(dep)):
        for n in range(N):
            if n == dep[m]:
                continue
            new = dep.copy()
            hosted = np.flatnonzero(dep == n)
            if hosted.size:
                new[hosted[0]] = dep[m]
            new[m] = n
            yield new


def refine_deployment(problem, state: SolutionState, params: "JointParams"):
    """Best-improvement search over single relocations, each scored after
    re-running caching and association.

    Swap matching scores moves with the association frozen, which misses
    placements that only pay off once users and caches follow. Returns the
    improved state and the number of accepted relocations.
    """
    screen = replace(params.dual, max_iter=min(params.refine_dual_iter, params.dual.max_iter))
    current = qoe.objective(problem, state)
    accepted = 0
    for _ in range(params.refine_passes):
        best_val, best = current, None
        for dep in relocation_neighbours(state.deployment, problem.N):
            cand = _reoptimize(problem, state.replace(deployment=dep), screen)
            val = qoe.objective(problem, cand)
            if val > best_val + 1e-9 * max(1.0, abs(best_val)):
                best_val, best = val, cand
        if best is None:
            break
        state, current = best, best_val
        accepted += 1
    return state, accepted


def _stage(name, fn):
    try:
        return fn()
    except CapacityError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage tag
        raise StageError(name, exc) from exc


def optimize(problem, params: JointParams = JointParams(), initial: SolutionState | None = None):
    """Alternate deployment, caching and association until the objective settles.

    Each stage's result is kept only if it does not lower the objective, so
    the trace is monotone. Returns ``(state, trace)``.
    """
    if params.delta <= 0:
        raise ValueError("convergence gap must be positive")
    state = initial_solution(problem) if initial is None else initial
    current = qoe.objective(problem, state)
    trace = JointTrace(objective=[current])
    start = time.perf_counter()

    def keep(candidate, value):
        nonlocal state, current
        if value >= current:
            state, current = candidate, value
        return current

    for _ in range(params.max_outer):
        res = _stage("deployment", lambda: deployment.swap_match(
            problem, state, params.max_swaps, params.guard_externality))
        cand = state.replace(deployment=res.deployment)
        after_dep = keep(cand, qoe.objective(problem, cand))
        moved = 0
        if params.refine_passes > 0:
            cand, moved = _stage("deployment", lambda: refine_deployment(problem, state, params))
            after_dep = keep(cand, qoe.objective(problem, cand))

        caches = _stage("caching", lambda: caching.greedy_place(problem, state))
        cand = state.replace(caches=caches)
        after_cache = keep(cand, qoe.objective(problem, cand))

        assoc = _stage("association", lambda: association.solve(problem, state, params.dual))
        cand = state.replace(association=assoc.association)
        after_assoc = keep(cand, qoe.objective(problem, cand))

        trace.stages.append((after_dep, after_cache, after_assoc))
        trace.objective.append(current)
        trace.swaps.append(res.swaps)
        trace.swap_log.extend((trace.iterations, rec) for rec in res.log)
        trace.dual_trace = assoc.trace
        trace.relocations.append(moved)
        trace.dual_capped.append(assoc.capped)
        trace.wall_clock.append(time.perf_counter() - start)
        if abs(trace.objective[-1] - trace.objective[-2]) < params.delta:
            break
    return state, trace


def baseline_classic(problem) -> SolutionState:
    dep = spread_deployment(problem, problem.M)
    return SolutionState(dep, caching.popular_place(problem, problem.M), max_sinr_association(problem, dep))


def baseline_random(problem, seed: int) -> SolutionState:
    """Uniformly random deployment, association and caches.

    Caches are drawn last from the same stream so that, for a fixed seed,
    deployment and association do not depend on the cache capacity.
    """
    rng = rng_stream(seed, "baseline")
    M, F = problem.M, problem.F
    dep = rng.permutation(problem.N)[:M]
    assoc = rng.integers(0, M, size=problem.K)
    caches = np.zeros((M, F), dtype=bool)
    c = min(problem.capacity, F)
    for m in range(M):
        caches[m, rng.permutation(F)[:c]] = True
    return SolutionState(dep, caches, assoc)


def oracle_size(N: int, M: int, K: int) -> int:
    return math.perm(N, M) * M ** K


def exhaustive_oracle(problem, cap: float = 1e8, block: int = 1 << 15) -> SolutionState:
    """Global maximiser over all injective deployments and all associations.

    For each (deployment, association) the optimal caches are the per-UAV
    top-k contents by gain, so caching need not be enumerated.
    """
    M, N, K, F = problem.M, problem.N, problem.K, problem.F
    size = oracle_size(N, M, K)
    if size > cap:
        raise CapacityError(
            f"exhaustive search needs {size:.3g} configurations (cap {cap:.3g}); "
            "reduce K, N or M")
    c = min(problem.capacity, F)
    req = problem.requests.request
    users = np.arange(K)
    empty = np.zeros((M, F), dtype=bool)
    full = np.ones((M, F), dtype=bool)
    best_val, best = -np.inf, None
    for perm in itertools.permutations(range(N), M):
        dep = np.array(perm, dtype=np.int64)
        probe = SolutionState(dep, empty, np.zeros(K, dtype=np.int64))
        ln_miss = np.log(association.utility_matrix(problem, probe))
        ln_hit = np.log(association.utility_matrix(problem, probe.replace(caches=full)))
        gain = ln_hit - ln_miss
        for assoc in association.iter_assignments(M, K, block):
            rows = len(assoc)
            base = ln_miss[assoc, users].sum(axis=1)
            loads = np.stack([(assoc == m).sum(axis=1) for m in range(M)], axis=1)
            val = base - association._xlogx(loads).sum(axis=1)
            if c > 0:
                G = np.zeros((rows, M, F))
                idx = np.arange(rows)
                for k in range(K):
                    G[idx, assoc[:, k], req[k]] += gain[assoc[:, k], k]
                top = np.partition(G, F - c, axis=2)[:, :, F - c:] if c < F else G
                val = val + top.sum(axis=(1, 2))
            i = int(np.argmax(val))
            if val[i] > best_val:
                best_val, best = float(val[i]), (dep, assoc[i].copy())
    dep, assoc = best
    state = SolutionState(dep, empty, assoc)
    return state.replace(caches=caching.exact_place(problem, state))
