"""UAV placement by one-to-one matching of UAVs to candidate locations.

A UAV's utility is the summed (unclamped) MOS of its users at its current
location; a location's utility is that of the UAV it hosts, or 0 if vacant.
Because interference depends on where every other UAV sits, utilities carry
externalities, so the matching is refined by swaps rather than by preference
lists alone.

Two swap kinds are tried:

* UAV-UAV exchange: approved when no one of the four agents loses and at
  least one gains. The set of occupied locations is unchanged, so only the two
  UAVs' users are affected.
* UAV-to-vacancy move: approved when the moving UAV's utility strictly rises.
  With ``guard_externality`` (default) the move must also not lower the
  network-wide objective, since vacating and occupying locations changes the
  interference seen by everyone else.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import qoe
from .errors import SwapLimitError
from .model import SolutionState

TOL = 1e-9


@dataclass(frozen=True)
class Matching:
    phi: np.ndarray  # (M,) candidate of each UAV
    N: int

    @property
    def inverse(self) -> np.ndarray:
        inv = np.full(self.N, -1, dtype=np.int64)
        inv[self.phi] = np.arange(len(self.phi))
        return inv

    def is_valid(self) -> bool:
        return len(np.unique(self.phi)) == len(self.phi) and bool(((self.phi >= 0) & (self.phi < self.N)).all())


@dataclass(frozen=True)
class SwapRecord:
    m: int
    partner: int  # UAV index for exchanges, candidate index for vacancy moves
    vacant: bool
    before: tuple
    after: tuple
    objective: float


@dataclass
class SwapResult:
    deployment: np.ndarray
    log: list = field(default_factory=list)
    checks: int = 0

    @property
    def swaps(self) -> int:
        return len(self.log)


def _user_mos(problem, state, deployment):
    return qoe.user_mos(problem, state.replace(deployment=deployment), clamp=False)


def uav_utilities(problem, state: SolutionState, deployment=None) -> np.ndarray:
    dep = state.deployment if deployment is None else deployment
    per_user = _user_mos(problem, state, dep)
    return np.bincount(state.association, weights=per_user, minlength=state.M)


def utility_of(problem, state: SolutionState, m: int) -> float:
    return float(uav_utilities(problem, state)[m])


def utility_location(problem, state: SolutionState, n: int) -> float:
    hosted = np.flatnonzero(state.deployment == n)
    if hosted.size == 0:
        return 0.0
    return utility_of(problem, state, int(hosted[0]))


def snr_utility_table(problem, state: SolutionState) -> np.ndarray:
    """``U[m, n]``: utility of UAV ``m`` at candidate ``n`` ignoring interference."""
    ch = problem.channel
    se = np.log2(1.0 + problem.rx_access / ch.noise_access_w)  # (N, K)
    se_bh = problem.backhaul_se  # (N,)
    load = state.load
    req = problem.requests.request
    s, c1, c2 = problem.s, problem.mos.c1, problem.mos.c2
    table = np.zeros((state.M, problem.N))
    for m in range(state.M):
        users = np.flatnonzero(state.association == m)
        if users.size == 0:
            continue
        miss = ~state.caches[m, req[users]]
        d = load[m] * s / (ch.bandwidth * se[:, users])
        d = d + np.where(miss[None, :], load[m] * s / (ch.backhaul_bandwidth * se_bh[:, None]), 0.0)
        table[m] = (c1 * np.log(1.0 / d) + c2).sum(axis=1)
    return table


def gs_initialize(problem, state: SolutionState) -> np.ndarray:
    """Deferred acceptance with candidates proposing to UAVs.

    Both sides rank by the interference-free utility table; each UAV keeps the
    best proposal so far. Ties go to the lower index.
    """
    U = snr_utility_table(problem, state)
    M, N = U.shape
    order = [sorted(range(M), key=lambda m, n=n: (-U[m, n], m)) for n in range(N)]
    next_pick = [0] * N
    holder = [-1] * M
    free = deque(range(N))
    while free:
        n = free.popleft()
        if next_pick[n] >= M:
            continue
        m = order[n][next_pick[n]]
        next_pick[n] += 1
        cur = holder[m]
        if cur < 0:
            holder[m] = n
        elif (U[m, n], -n) > (U[m, cur], -cur):
            holder[m] = n
            free.append(cur)
        else:
            free.append(n)
    return np.array(holder, dtype=np.int64)


def classical_blocking_pairs(U: np.ndarray, deployment) -> list:
    """Pairs ``(m, n)`` that would both rather be matched to each other."""
    dep = np.asarray(deployment)
    M, N = U.shape
    holder = np.full(N, -1)
    holder[dep] = np.arange(M)
    pairs = []
    for m in range(M):
        for n in range(N):
            if n == dep[m] or not U[m, n] > U[m, dep[m]]:
                continue
            if holder[n] < 0 or U[m, n] > U[holder[n], n]:
                pairs.append((m, n))
    return pairs


def _evaluate_exchange(problem, state, dep, m, m2, util=None):
    util = uav_utilities(problem, state, dep) if util is None else util
    new = dep.copy()
    new[m], new[m2] = dep[m2], dep[m]
    per_user = _user_mos(problem, state, new)
    new_util = np.bincount(state.association, weights=per_user, minlength=state.M)
    # agents: m, m2, the location m leaves (now hosting m2), the one m2 leaves
    before = (util[m], util[m2], util[m], util[m2])
    after = (new_util[m], new_util[m2], new_util[m2], new_util[m])
    return new, before, after, float(per_user.sum())


def is_blocking_pair(problem, state: SolutionState, m: int, m2: int) -> bool:
    if m == m2:
        raise ValueError("a UAV cannot swap with itself")
    _, before, after, _ = _evaluate_exchange(problem, state, state.deployment.copy(), m, m2)
    return _approves(before, after)


def _approves(before, after) -> bool:
    pairs = list(zip(before, after))
    no_loss = all(a >= b - TOL * max(1.0, abs(b)) for b, a in pairs)
    gain = any(a > b + TOL * max(1.0, abs(b)) for b, a in pairs)
    return no_loss and gain


def _evaluate_move(problem, state, dep, m, n, util=None, total=None):
    if util is None or total is None:
        per_user = _user_mos(problem, state, dep)
        util = np.bincount(state.association, weights=per_user, minlength=state.M)
        total = float(per_user.sum())
    new = dep.copy()
    new[m] = n
    per_user = _user_mos(problem, state, new)
    new_util = np.bincount(state.association, weights=per_user, minlength=state.M)
    return new, (util[m], total), (new_util[m], float(per_user.sum()))


def approves_move(problem, state: SolutionState, m: int, n: int, guard_externality=True) -> bool:
    """Whether UAV ``m`` relocating to the vacant candidate ``n`` is approved."""
    if (state.deployment == n).any():
        raise ValueError(f"candidate {n} is occupied")
    _, before, after = _evaluate_move(problem, state, state.deployment.copy(), m, n)
    return _move_ok(before, after, guard_externality)


def _move_ok(before, after, guard) -> bool:
    (u0, g0), (u1, g1) = before, after
    if not u1 > u0 + TOL * max(1.0, abs(u0)):
        return False
    return not guard or g1 >= g0 - TOL * max(1.0, abs(g0))


def blocking_pairs(problem, state: SolutionState, guard_externality=True) -> list:
    """Every approved exchange or vacancy move from ``state``; empty means stable."""
    dep = state.deployment.copy()
    found = []
    M = len(dep)
    for m in range(M):
        for m2 in range(m + 1, M):
            _, before, after, _ = _evaluate_exchange(problem, state, dep, m, m2)
            if _approves(before, after):
                found.append((m, m2, False))
    occupied = set(dep.tolist())
    for m in range(M):
        for n in range(problem.N):
            if n in occupied:
                continue
            _, before, after = _evaluate_move(problem, state, dep, m, n)
            if _move_ok(before, after, guard_externality):
                found.append((m, n, True))
    return found


def swap_match(problem, state: SolutionState, max_swaps=None, guard_externality=True) -> SwapResult:
    """Apply approved swaps, first-found first, until a full scan approves none.

    Starts from ``state.deployment``. A pair that has swapped is barred from
    swapping again until the network objective strictly improves.
    """
    M, N = state.M, problem.N
    max_swaps = 10 * M * N if max_swaps is None else max_swaps
    dep = state.deployment.copy()
    result = SwapResult(dep)
    per_user = _user_mos(problem, state, dep)
    best_total = float(per_user.sum())
    barred = set()
    progressed = True
    while progressed:
        progressed = False
        for m in range(M):
            partners = [(m2, False) for m2 in range(M) if m2 != m]
            partners += [(n, True) for n in range(N)]
            for partner, vacant in partners:
                if vacant and (dep == partner).any():
                    continue
                key = (m, partner, True) if vacant else (min(m, partner), max(m, partner), False)
                if key in barred:
                    continue
                result.checks += 1
                if vacant:
                    new, before, after = _evaluate_move(problem, state, dep, m, partner)
                    ok = _move_ok(before, after, guard_externality)
                    total = after[1]
                else:
                    new, before, after, total = _evaluate_exchange(problem, state, dep, m, partner)
                    ok = _approves(before, after)
                if not ok:
                    continue
                dep = new
                result.log.append(SwapRecord(m, int(partner), vacant, tuple(map(float, before)),
                                             tuple(map(float, after)), total))
                if total > best_total + TOL * max(1.0, abs(best_total)):
                    barred.clear()
                best_total = max(best_total, total)
                barred.add(key)
                progressed = True
                if len(result.log) > max_swaps:
                    raise SwapLimitError(f"swap matching exceeded {max_swaps} swaps", result.log)
    result.deployment = dep
    return result
