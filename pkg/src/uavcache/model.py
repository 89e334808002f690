"""World state: scenario geometry, content library, requests and decision variables.

Randomness comes from numpy's PCG64 bit generator. Each stochastic subsystem
draws from its own stream, derived as ``SeedSequence([seed, stream_id])``, so
adding draws to one subsystem never shifts another.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig
from .errors import ConfigError, DomainError, StateError

STREAM_IDS = {
    "users": 1,
    "candidates": 2,
    "requests": 3,
    "los": 4,
    "shadow": 5,
    "baseline": 6,
}

SEED_MASK = (1 << 64) - 1


def rng_stream(seed: int, name: str) -> np.random.Generator:
    if name not in STREAM_IDS:
        raise KeyError(f"unknown random stream {name!r}")
    ss = np.random.SeedSequence([int(seed) & SEED_MASK, STREAM_IDS[name]])
    return np.random.Generator(np.random.PCG64(ss))


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def grid_shape(n: int, region: tuple[float, float]) -> tuple[int, int]:
    """Near-square factorization ``(cols, rows)`` of ``n``; more cells go on the longer side."""
    best = (n, 1)
    for b in range(1, int(np.sqrt(n)) + 1):
        if n % b == 0:
            best = (n // b, b)
    big, small = best
    return (big, small) if region[0] >= region[1] else (small, big)


@dataclass(frozen=True)
class Scenario:
    users: np.ndarray  # (K, 3)
    candidates: np.ndarray  # (N, 3)
    mbs_position: np.ndarray  # (3,)
    region: tuple[float, float]
    rng_seed: int

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def N(self) -> int:
        return len(self.candidates)

    @property
    def center(self) -> np.ndarray:
        return np.array([self.region[0] / 2.0, self.region[1] / 2.0, 0.0])


def generate_scenario(config: NetworkConfig, seed: int) -> Scenario:
    """Users uniform over the region; one candidate per grid sub-area.

    The MBS sits at ground level ``mbs_distance`` meters from the region center
    along +x.
    """
    if not isinstance(config, NetworkConfig):
        raise ConfigError("generate_scenario expects a NetworkConfig")
    width, height = config.region
    users_rng = rng_stream(seed, "users")
    users = np.zeros((config.K, 3))
    users[:, 0] = users_rng.uniform(0.0, width, config.K)
    users[:, 1] = users_rng.uniform(0.0, height, config.K)

    cols, rows = grid_shape(config.N, config.region)
    cell_w, cell_h = width / cols, height / rows
    cand_rng = rng_stream(seed, "candidates")
    idx = np.arange(config.N)
    col, row = idx % cols, idx // cols
    candidates = np.empty((config.N, 3))
    candidates[:, 0] = (col + cand_rng.uniform(0.0, 1.0, config.N)) * cell_w
    candidates[:, 1] = (row + cand_rng.uniform(0.0, 1.0, config.N)) * cell_h
    lo, hi = config.height
    candidates[:, 2] = cand_rng.uniform(lo, hi, config.N) if hi > lo else lo

    mbs = np.array([width / 2.0 + config.mbs_distance, height / 2.0, 0.0])
    return Scenario(
        users=_frozen(users),
        candidates=_frozen(candidates),
        mbs_position=_frozen(mbs),
        region=(float(width), float(height)),
        rng_seed=int(seed),
    )


def zipf_popularity(F: int, gamma: float) -> np.ndarray:
    if int(F) != F or F < 1:
        raise DomainError(f"content count must be >= 1, got {F!r}")
    if gamma < 0:
        raise DomainError(f"Zipf exponent must be >= 0, got {gamma!r}")
    weights = 1.0 / np.arange(1, int(F) + 1, dtype=float) ** gamma
    return weights / weights.sum()


@dataclass(frozen=True)
class ContentLibrary:
    F: int
    size_bits: float
    zipf_gamma: float
    popularity: np.ndarray

    @classmethod
    def from_config(cls, config: NetworkConfig) -> "ContentLibrary":
        return cls.zipf(config.F, config.content_bits, config.zipf_gamma)

    @classmethod
    def zipf(cls, F: int, size_bits: float, gamma: float) -> "ContentLibrary":
        return cls(int(F), float(size_bits), float(gamma), _frozen(zipf_popularity(F, gamma)))


@dataclass(frozen=True)
class RequestAssignment:
    request: np.ndarray  # (K,) content index per user, 0-based

    @property
    def K(self) -> int:
        return len(self.request)

    def matrix(self, F: int) -> np.ndarray:
        q = np.zeros((self.K, F), dtype=bool)
        q[np.arange(self.K), self.request] = True
        return q


def generate_requests(library: ContentLibrary, K: int, seed: int) -> RequestAssignment:
    if int(K) != K or K < 1:
        raise DomainError(f"user count must be >= 1, got {K!r}")
    rng = rng_stream(seed, "requests")
    req = rng.choice(library.F, size=int(K), p=library.popularity)
    return RequestAssignment(_frozen(req, dtype=np.int64))


@dataclass(frozen=True)
class SolutionState:
    """Decision variables in index form.

    ``deployment[m]`` is the candidate hosting UAV ``m``, ``caches[m, f]``
    marks content ``f`` cached at UAV ``m`` and ``association[k]`` is the UAV
    serving user ``k``.
    """

    deployment: np.ndarray
    caches: np.ndarray
    association: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "deployment", _frozen(self.deployment, np.int64))
        object.__setattr__(self, "caches", _frozen(self.caches, bool))
        object.__setattr__(self, "association", _frozen(self.association, np.int64))

    @property
    def M(self) -> int:
        return len(self.deployment)

    @property
    def load(self) -> np.ndarray:
        return np.bincount(self.association, minlength=self.M)

    def replace(self, deployment=None, caches=None, association=None) -> "SolutionState":
        return SolutionState(
            self.deployment if deployment is None else deployment,
            self.caches if caches is None else caches,
            self.association if association is None else association,
        )

    def to_matrices(self, N: int):
        M, F = self.caches.shape
        K = len(self.association)
        X = np.zeros((M, N), dtype=int)
        X[np.arange(M), self.deployment] = 1
        A = np.zeros((M, K), dtype=int)
        A[self.association, np.arange(K)] = 1
        return X, self.caches.astype(int), A

    @classmethod
    def from_matrices(cls, X, U, A, capacity: int) -> "SolutionState":
        validate_matrices(X, U, A, capacity)
        X, A = np.asarray(X), np.asarray(A)
        return cls(X.argmax(axis=1), np.asarray(U).astype(bool), A.argmax(axis=0))


def validate_matrices(X, U, A, capacity: int) -> None:
    """Raise StateError unless the 0/1 matrices satisfy every feasibility constraint."""
    X, U, A = (np.asarray(v) for v in (X, U, A))
    if X.ndim != 2 or U.ndim != 2 or A.ndim != 2:
        raise StateError("X, U, A must be 2-D")
    M = X.shape[0]
    if U.shape[0] != M or A.shape[0] != M:
        raise StateError("X, U, A disagree on the number of UAVs")
    for name, mat in (("X", X), ("U", U), ("A", A)):
        if not np.isin(mat, (0, 1)).all():
            raise StateError(f"{name} must be binary")
    if (X.sum(axis=1) != 1).any():
        raise StateError("every UAV must occupy exactly one candidate")
    if (X.sum(axis=0) > 1).any():
        raise StateError("two UAVs share a candidate location")
    if (A.sum(axis=0) != 1).any():
        raise StateError("every user must be associated with exactly one UAV")
    if (U.sum(axis=1) > capacity).any():
        raise StateError(f"a UAV caches more than {capacity} contents")


def validate_state(state: SolutionState, N: int, K: int, F: int, capacity: int) -> None:
    dep, caches, assoc = state.deployment, state.caches, state.association
    M = len(dep)
    if M < 1 or dep.ndim != 1:
        raise StateError("deployment must be a non-empty vector")
    if caches.shape != (M, F):
        raise StateError(f"caches must have shape {(M, F)}, got {caches.shape}")
    if assoc.shape != (K,):
        raise StateError(f"association must have shape {(K,)}, got {assoc.shape}")
    if ((dep < 0) | (dep >= N)).any():
        raise StateError("deployment refers to a non-existent candidate")
    if len(np.unique(dep)) != M:
        raise StateError("two UAVs share a candidate location")
    if ((assoc < 0) | (assoc >= M)).any():
        raise StateError("association refers to a non-existent UAV")
    if (caches.sum(axis=1) > capacity).any():
        raise StateError(f"a UAV caches more than {capacity} contents")
