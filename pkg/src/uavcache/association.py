"""User association by Lagrange dual decomposition of the load coupling.

With deployment and caching fixed, user ``k`` served by UAV ``m`` scores
``ln(T[m, k] / w[m])`` where ``w[m]`` is the UAV load and ``T`` does not
depend on load. Relaxing ``sum_k a[m, k] = w[m]`` with multipliers ``alpha``
gives the dual

    L(alpha) = sum_k max_m (ln T[m, k] - alpha[m]) + sum_m exp(alpha[m] - 1)

minimised by a projected subgradient method whose step follows a target-level
rule with an adaptive aspiration offset ``eps``. Multipliers are projected
onto ``[0, 1 + ln K]``; the upper end cannot cut off the minimiser because
there ``exp(alpha - 1)`` equals a load of at most ``K``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import qoe
from .config import coerce_fields
from .errors import CapacityError, EvaluationError
from .model import SolutionState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DualParams:
    lam: float = 1.0
    eps0: float = 0.1
    beta: float = 0.5
    rho: float = 1.5
    eps_floor: float = 1e-3
    max_iter: int = 500
    rel_tol: float = 1e-6
    # "previous": grow eps whenever the dual value is no worse than at the
    # previous iterate; "target": grow it only once the level L(t) is reached
    eps_rule: str = "previous"

    def __post_init__(self):
        if not 0.0 < self.lam < 2.0:
            raise ValueError("step scale lambda must lie in (0, 2)")
        if not 0.0 < self.beta < 1.0 or self.rho <= 1.0:
            raise ValueError("need 0 < beta < 1 and rho > 1")
        if self.eps0 <= 0 or self.eps_floor <= 0:
            raise ValueError("aspiration offsets must be positive")
        if self.eps_rule not in ("target", "previous"):
            raise ValueError(f"unknown eps_rule {self.eps_rule!r}")


@dataclass(frozen=True)
class DualState:
    alpha: np.ndarray
    w: np.ndarray
    t: int = 0
    eps: float = 0.1
    L_best: float = np.inf
    L_prev: float = np.nan
    target: float = np.nan

    @classmethod
    def initial(cls, M: int, params: DualParams = DualParams()) -> "DualState":
        alpha = np.zeros(M)
        return cls(alpha=alpha, w=np.exp(alpha - 1.0), eps=params.eps0)


@dataclass
class AssociationResult:
    association: np.ndarray
    objective: float
    trace: list = field(default_factory=list)
    converged: bool = False
    capped: bool = False


def utility_matrix(problem, state: SolutionState) -> np.ndarray:
    """Load-free delivery speed ``T[m, k] = w[m] / D[m, k]`` for every UAV-user pair."""
    se_access, se_backhaul = qoe.link_efficiencies(problem, state.deployment)
    s = problem.s
    miss = ~state.caches[:, problem.requests.request]  # (M, K)
    per_bit = s / (problem.channel.bandwidth * se_access)
    per_bit = per_bit + np.where(miss, s / (problem.channel.backhaul_bandwidth * se_backhaul[:, None]), 0.0)
    T = 1.0 / per_bit
    if not np.all(np.isfinite(T)) or (T <= 0).any():
        raise EvaluationError("non-positive delivery rate in utility matrix")
    return T


def assign_step(lnT: np.ndarray, alpha) -> np.ndarray:
    return np.argmax(lnT - np.asarray(alpha)[:, None], axis=0)


def _xlogx(w):
    w = np.asarray(w, dtype=float)
    return w * np.log(np.where(w > 0, w, 1.0))


def dual_value(lnT: np.ndarray, alpha, assoc, w) -> float:
    alpha = np.asarray(alpha, dtype=float)
    M, K = lnT.shape
    w = np.asarray(w, dtype=float)
    load = np.bincount(assoc, minlength=M)
    gain = lnT[assoc, np.arange(K)].sum()
    return float(gain - _xlogx(w).sum() - alpha @ (load - w))


def primal_value(lnT: np.ndarray, assoc) -> float:
    M, K = lnT.shape
    load = np.bincount(assoc, minlength=M)
    return float(lnT[assoc, np.arange(K)].sum() - _xlogx(load).sum())


def update_multipliers(ds: DualState, lnT: np.ndarray, assoc, params: DualParams = DualParams()):
    """One dual iteration given the users' choice ``assoc`` at ``ds.alpha``.

    Returns ``(next_state, subgradient_norm)``; a zero norm means the loads
    already match the supply and ``alpha`` is left unchanged.
    """
    M = lnT.shape[0]
    alpha = ds.alpha
    with np.errstate(over="raise"):
        w = np.exp(alpha - 1.0)
    L = dual_value(lnT, alpha, assoc, w)
    eps = ds.eps
    if ds.t > 0:
        reference = ds.target if params.eps_rule == "target" else ds.L_prev
        eps = params.rho * eps if L <= reference else max(params.beta * eps, params.eps_floor)
    L_best = min(ds.L_best, L)
    target = L_best - eps
    sub = w - np.bincount(assoc, minlength=M)
    norm2 = float(sub @ sub)
    if norm2 == 0.0:
        new_alpha = alpha
    else:
        step = params.lam * (L - target) / norm2
        # the dual minimiser has exp(alpha - 1) equal to a load <= K
        upper = 1.0 + np.log(max(lnT.shape[1], 1))
        new_alpha = np.clip(alpha - step * sub, 0.0, upper)
    nxt = DualState(alpha=new_alpha, w=w, t=ds.t + 1, eps=eps, L_best=L_best, L_prev=L, target=target)
    return nxt, float(np.sqrt(norm2))


def solve(problem, state: SolutionState, params: DualParams = DualParams(),
          ds0: DualState | None = None) -> AssociationResult:
    """Run the dual iterations and return the best primal association seen.

    The incoming association is the first primal candidate, so the result is
    never worse than the input.
    """
    lnT = np.log(utility_matrix(problem, state))
    return solve_lnT(lnT, state.association, params, ds0)


def solve_lnT(lnT, initial_assoc, params: DualParams = DualParams(), ds0=None) -> AssociationResult:
    M = lnT.shape[0]
    ds = ds0 or DualState.initial(M, params)
    best = np.asarray(initial_assoc).copy()
    best_val = primal_value(lnT, best)
    trace = []
    zero_run = 0
    converged = False
    for _ in range(params.max_iter):
        assoc = assign_step(lnT, ds.alpha)
        val = primal_value(lnT, assoc)
        if val > best_val:
            best, best_val = assoc, val
        prev_L = ds.L_prev
        ds, norm = update_multipliers(ds, lnT, assoc, params)
        trace.append({
            "t": ds.t - 1,
            "L_alpha": ds.L_prev,
            "L_t": ds.target,
            "eps_t": ds.eps,
            "primal_objective": val,
        })
        zero_run = zero_run + 1 if norm == 0.0 else 0
        if zero_run >= 2 or M == 1:
            converged = True
            break
        if np.isfinite(prev_L) and abs(ds.L_prev - prev_L) < params.rel_tol * max(abs(prev_L), 1e-12):
            converged = True
            break
    capped = not converged
    if capped:
        log.debug("dual association hit the %d-iteration cap", params.max_iter)
    return AssociationResult(best, best_val, trace, converged, capped)


def dual_params_from(section: dict | None) -> DualParams:
    return replace(DualParams(), **coerce_fields(DualParams, dict(section or {})))


def iter_assignments(M: int, K: int, chunk: int = 1 << 16):
    """Yield every association in ``[0, M)^K`` in lexicographic order, in blocks."""
    total = M ** K
    powers = M ** np.arange(K - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (codes[:, None] // powers[None, :]) % M


def brute_force_lnT(lnT: np.ndarray, cap: float = 2e7):
    M, K = lnT.shape
    if float(M) ** K > cap:
        raise CapacityError(f"{M}^{K} associations exceed the enumeration cap {cap:g}")
    best_val, best = -np.inf, None
    cols = np.arange(K)
    for block in iter_assignments(M, K):
        gain = lnT[block, cols].sum(axis=1)
        loads = np.stack([(block == m).sum(axis=1) for m in range(M)], axis=1)
        vals = gain - _xlogx(loads).sum(axis=1)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best = float(vals[i]), block[i].copy()
    return best, best_val


def brute_force_association(problem, state: SolutionState, cap: float = 2e7) -> np.ndarray:
    lnT = np.log(utility_matrix(problem, state))
    return brute_force_lnT(lnT, cap)[0]
