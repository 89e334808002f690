"""Cache placement: greedy marginal-gain selection and an exact oracle.

With deployment and association fixed, each user requests exactly one content,
so caching content ``f`` at UAV ``m`` adds the same amount to the
objective whatever else is cached there. Greedy is therefore exact here, and
``exact_place`` is a plain per-UAV top-k on that constant gain.
"""
from __future__ import annotations

import numpy as np

from . import qoe
from .errors import StateError
from .model import SolutionState


def cache_objective(problem, state: SolutionState, caches=None) -> float:
    """Sum of ``ln(1/D)`` over users; the set function being maximised."""
    if caches is not None:
        state = state.replace(caches=caches)
    return float(qoe.q_values(problem, state).sum())


def gain_table(problem, state: SolutionState) -> np.ndarray:
    """``gain[m, f]``: objective increase from caching ``f`` at ``m`` (0 if already cached)."""
    access, backhaul = qoe.delays(problem, state.replace(caches=np.zeros_like(state.caches)))
    per_user = np.log(access + backhaul) - np.log(access)
    gain = np.zeros(state.caches.shape)
    np.add.at(gain, (state.association, problem.requests.request), per_user)
    gain[state.caches] = 0.0
    return gain


def marginal_gain(problem, state: SolutionState, m: int, f: int) -> float:
    if state.caches[m, f]:
        raise StateError(f"content {f} is already cached at UAV {m}")
    users = (state.association == m) & (problem.requests.request == f)
    if not users.any():
        return 0.0
    before = qoe.q_values(problem, state)[users].sum()
    caches = state.caches.copy()
    caches[m, f] = True
    after = qoe.q_values(problem, state.replace(caches=caches))[users].sum()
    return float(after - before)


def greedy_place(problem, state: SolutionState, capacity=None, recompute=False) -> np.ndarray:
    """Fill every UAV cache by repeatedly adding the best remaining content.

    Starts from empty caches. Stops for a UAV once its capacity is used or no
    remaining content has positive gain. ``recompute=True`` re-evaluates every
    marginal gain after each insertion instead of reusing the gain table.
    """
    capacity = problem.capacity if capacity is None else capacity
    M, F = state.caches.shape
    caches = np.zeros((M, F), dtype=bool)
    current = state.replace(caches=caches)
    gains = gain_table(problem, current)
    for m in range(M):
        for _ in range(min(capacity, F)):
            if recompute:
                row = np.array([
                    0.0 if caches[m, f] else marginal_gain(problem, current, m, f) for f in range(F)
                ])
            else:
                row = np.where(caches[m], -np.inf, gains[m])
            best = int(np.argmax(row))  # first max => lowest index on ties
            if not row[best] > 0.0:
                break
            caches[m, best] = True
            current = state.replace(caches=caches)
    return caches


def exact_place(problem, state: SolutionState, capacity=None) -> np.ndarray:
    """Per-UAV top-``capacity`` contents by gain; ties go to the lower content index."""
    capacity = problem.capacity if capacity is None else capacity
    gains = gain_table(problem, state.replace(caches=np.zeros_like(state.caches)))
    caches = np.zeros(gains.shape, dtype=bool)
    for m, row in enumerate(gains):
        order = np.lexsort((np.arange(len(row)), -row))
        picked = [f for f in order[:capacity] if row[f] > 0.0]
        caches[m, picked] = True
    return caches


def popular_place(problem, M: int, capacity=None) -> np.ndarray:
    """Every UAV caches the globally most popular contents."""
    capacity = problem.capacity if capacity is None else capacity
    caches = np.zeros((M, problem.F), dtype=bool)
    caches[:, :min(capacity, problem.F)] = True
    return caches
