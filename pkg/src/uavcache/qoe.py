"""Content delay, MOS and the network-level metrics.

Solvers work with the unclamped per-user score ``Q = ln(1/D)``; the total
unclamped MOS is ``K*C2 + C1*sum(Q)``. Reported MOS is clamped to [1, 5].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import access_sinr, spectral_efficiency
from .config import MosParams
from .errors import DomainError, EvaluationError, StateError
from .model import SolutionState


@dataclass(frozen=True)
class DelayBreakdown:
    access_s: float
    backhaul_s: float

    @property
    def total_s(self) -> float:
        return self.access_s + self.backhaul_s


def link_efficiencies(problem, deployment):
    """Access spectral efficiency ``(M, K)`` and backhaul efficiency ``(M,)``."""
    se_access = spectral_efficiency(access_sinr(problem.links, problem.channel, deployment))
    se_backhaul = problem.backhaul_se[np.asarray(deployment)]
    if (se_backhaul <= 0).any():
        raise EvaluationError("zero backhaul spectral efficiency (SINR underflow)")
    return se_access, se_backhaul


def delays(problem, state: SolutionState):
    """Access and backhaul delay (s) of every user at its serving UAV."""
    se_access, se_backhaul = link_efficiencies(problem, state.deployment)
    users = np.arange(problem.K)
    serving = state.association
    load = state.load[serving]
    hit = state.caches[serving, problem.requests.request]
    s = problem.s
    access = load * s / (problem.channel.bandwidth * se_access[serving, users])
    backhaul = np.where(hit, 0.0, load * s / (problem.channel.backhaul_bandwidth * se_backhaul[serving]))
    return access, backhaul


def delay(problem, state: SolutionState, k: int) -> DelayBreakdown:
    if not 0 <= k < problem.K:
        raise StateError(f"user {k} does not exist")
    access, backhaul = delays(problem, state)
    return DelayBreakdown(float(access[k]), float(backhaul[k]))


def mos(d, p: MosParams = MosParams(), clamp=None):
    """MOS of a delay (``DelayBreakdown`` or seconds); ``clamp`` defaults to ``p.clamp``."""
    total = d.total_s if isinstance(d, DelayBreakdown) else np.asarray(d, dtype=float)
    if np.any(np.asarray(total) <= 0):
        raise DomainError("MOS needs a strictly positive delay")
    score = p.c1 * np.log(1.0 / total) + p.c2
    if p.clamp if clamp is None else clamp:
        score = np.clip(score, 1.0, 5.0)
    return float(score) if np.ndim(score) == 0 else score


def q_values(problem, state: SolutionState) -> np.ndarray:
    access, backhaul = delays(problem, state)
    return -np.log(access + backhaul)


def user_mos(problem, state: SolutionState, clamp=False) -> np.ndarray:
    access, backhaul = delays(problem, state)
    return mos(access + backhaul, problem.mos, clamp=clamp)


def objective(problem, state: SolutionState) -> float:
    """Total unclamped MOS over all users."""
    return float(problem.K * problem.mos.c2 + problem.mos.c1 * q_values(problem, state).sum())


def average_mos(problem, state: SolutionState, clamp=None) -> float:
    clamp = problem.mos.clamp if clamp is None else clamp
    return float(np.mean(user_mos(problem, state, clamp=clamp)))


def offloading_ratio(state: SolutionState, requests) -> float:
    hit = state.caches[state.association, requests.request]
    return float(hit.mean())


def metrics(problem, state: SolutionState) -> dict:
    return {
        "avg_mos": average_mos(problem, state),
        "offload_ratio": offloading_ratio(state, problem.requests),
        "objective": objective(problem, state),
    }
