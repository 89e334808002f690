import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from uavcache.channel import LinkTable
from uavcache.config import ChannelParams, MosParams, NetworkConfig
from uavcache.model import ContentLibrary, RequestAssignment, Scenario, SolutionState
from uavcache.problem import Problem, build_problem

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

OFF = ChannelParams(shadowing="off")


def small_net(**kw):
    base = dict(M=3, N=6, K=8, F=10, cache_bits=20e6)
    base.update(kw)
    return NetworkConfig(**base)


def table_problem(pl_access, pl_backhaul, request, M, F=None, capacity=2, channel=OFF, gamma=1.0):
    """Problem over a hand-written pathloss table (dB); geometry is a placeholder."""
    pl_access = np.asarray(pl_access, dtype=float)
    pl_backhaul = np.asarray(pl_backhaul, dtype=float)
    N, K = pl_access.shape
    request = np.asarray(request, dtype=np.int64)
    F = int(request.max()) + 1 if F is None else F
    users = np.zeros((K, 3))
    users[:, 0] = np.arange(K)
    cand = np.zeros((N, 3))
    cand[:, 0] = np.arange(N)
    cand[:, 2] = 50.0
    scenario = Scenario(users, cand, np.array([1000.0, 0.0, 0.0]), (float(K) + 1, 1.0), 0)
    links = LinkTable(pl_access, pl_backhaul, np.ones(pl_access.shape, bool), np.ones(N, bool))
    return Problem(scenario, ContentLibrary.zipf(F, 10e6, gamma), RequestAssignment(request), links,
                   channel, MosParams(), M, capacity)


def random_table_problem(rng, M, N, K, F, capacity):
    pl = rng.uniform(70.0, 110.0, size=(N, K))
    bh = rng.uniform(95.0, 125.0, size=N)
    req = rng.integers(0, F, size=K)
    return table_problem(pl, bh, req, M, F=F, capacity=capacity)


def random_state(rng, problem):
    dep = rng.permutation(problem.N)[:problem.M]
    caches = np.zeros((problem.M, problem.F), bool)
    for m in range(problem.M):
        caches[m, rng.permutation(problem.F)[:rng.integers(0, problem.capacity + 1)]] = True
    return SolutionState(dep, caches, rng.integers(0, problem.M, size=problem.K))


@pytest.fixture
def reduced():
    return build_problem(small_net(), 0, channel=OFF)


@pytest.fixture
def full_k10():
    return build_problem(NetworkConfig(K=10), 2)
