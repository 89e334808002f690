import itertools

import numpy as np
import pytest

from conftest import OFF, small_net, table_problem
from uavcache import caching, channel, joint, qoe
from uavcache.config import NetworkConfig
from uavcache.errors import CapacityError
from uavcache.model import SolutionState, validate_state
from uavcache.problem import build_problem


def test_optimize_trace_and_validity(full_k10):
    state, trace = joint.optimize(full_k10)
    validate_state(state, full_k10.N, full_k10.K, full_k10.F, full_k10.capacity)
    assert trace.is_monotone()
    assert trace.iterations <= 10
    assert trace.objective[-1] == pytest.approx(qoe.objective(full_k10, state))
    rows = list(trace.rows())
    assert len(rows) == trace.iterations and rows[0]["iteration"] == 1
    assert abs(trace.objective[-1] - trace.objective[-2]) < 1e-3


def test_single_uav_single_candidate():
    prob = build_problem(NetworkConfig(M=1, N=1, K=4, F=5, cache_bits=20e6), 0)
    state, trace = joint.optimize(prob)
    assert state.deployment.tolist() == [0] and state.association.tolist() == [0] * 4
    assert trace.converged_at == 1 and trace.iterations <= 2


def test_stage_failure_is_tagged(monkeypatch, reduced):
    def boom(*a, **k):
        raise RuntimeError("no")
    monkeypatch.setattr(caching, "greedy_place", boom)
    with pytest.raises(joint.StageError) as info:
        joint.optimize(reduced, joint.JointParams(refine_passes=0))
    assert info.value.stage == "caching"
    assert isinstance(info.value.cause, RuntimeError)
    # with refinement on, the relocation search re-runs caching inside the deployment stage
    with pytest.raises(joint.StageError) as info:
        joint.optimize(reduced)
    assert info.value.stage == "deployment"


def test_delta_must_be_positive(reduced):
    with pytest.raises(ValueError):
        joint.optimize(reduced, joint.JointParams(delta=0.0))


def test_params_from_dict():
    p = joint.JointParams.from_dict({"delta": "1.0e-4", "max_outer": 7}, {"max_iter": 30})
    assert p.delta == 1e-4 and p.max_outer == 7 and p.dual.max_iter == 30


def test_without_refinement_still_monotone(reduced):
    state, trace = joint.optimize(reduced, joint.JointParams(refine_passes=0))
    assert trace.is_monotone() and sum(trace.relocations) == 0


def test_classic_association_is_max_sinr(full_k10):
    state = joint.baseline_classic(full_k10)
    sinr = channel.access_sinr(full_k10.links, full_k10.channel, state.deployment)
    assert np.array_equal(state.association, sinr.argmax(axis=0))
    assert state.caches[:, :full_k10.capacity].all() and not state.caches[:, full_k10.capacity:].any()


def test_classic_matches_exact_when_popularity_degenerates():
    prob = build_problem(NetworkConfig(K=20, zipf_gamma=60.0), 1)
    assert set(prob.requests.request.tolist()) == {0}
    state = joint.baseline_classic(prob)
    exact = caching.exact_place(prob, state)
    assert qoe.objective(prob, state) == pytest.approx(qoe.objective(prob, state.replace(caches=exact)))


def test_random_baseline_valid_and_deterministic(reduced):
    a, b = joint.baseline_random(reduced, 5), joint.baseline_random(reduced, 5)
    validate_state(a, reduced.N, reduced.K, reduced.F, reduced.capacity)
    assert np.array_equal(a.deployment, b.deployment) and np.array_equal(a.caches, b.caches)


def test_random_offloading_expectation_uniform_popularity():
    net = NetworkConfig(M=2, N=4, K=10, F=10, cache_bits=30e6, zipf_gamma=0.0)
    prob = build_problem(net, 0, channel=OFF)
    ratios = []
    for seed in range(1000):
        # requests are i.i.d. uniform, so draw them fresh alongside each random state
        from uavcache.model import ContentLibrary, generate_requests
        req = generate_requests(ContentLibrary.from_config(net), net.K, seed)
        ratios.append(qoe.offloading_ratio(joint.baseline_random(prob, seed), req))
    assert np.mean(ratios) == pytest.approx(3 / 10, abs=0.015)


def test_baseline_ordering_in_the_mean():
    cls, rnd = [], []
    for seed in range(30):
        prob = build_problem(NetworkConfig(), seed)
        cls.append(qoe.objective(prob, joint.baseline_classic(prob)))
        rnd.append(qoe.objective(prob, joint.baseline_random(prob, seed)))
    assert np.mean(rnd) <= np.mean(cls)


def test_proposed_beats_classic_per_replication():
    for seed in range(3):
        prob = build_problem(NetworkConfig(K=30), seed)
        state, _ = joint.optimize(prob)
        assert qoe.objective(prob, state) >= qoe.objective(prob, joint.baseline_classic(prob))


def test_oracle_matches_hand_enumeration():
    pl = [[80.0, 95.0], [92.0, 78.0]]
    prob = table_problem(pl, [105.0, 100.0], [0, 1], M=1, F=2, capacity=1)
    best = -np.inf
    for n in range(2):
        for assoc in itertools.product(range(1), repeat=2):
            for f in range(2):
                caches = np.zeros((1, 2), bool)
                caches[0, f] = True
                s = SolutionState([n], caches, list(assoc))
                best = max(best, qoe.objective(prob, s))
    orc = joint.exhaustive_oracle(prob)
    assert qoe.objective(prob, orc) == pytest.approx(best)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_oracle_dominates_and_is_feasible(seed):
    prob = build_problem(small_net(K=6), seed, channel=OFF)
    orc = joint.exhaustive_oracle(prob)
    validate_state(orc, prob.N, prob.K, prob.F, prob.capacity)
    state, _ = joint.optimize(prob)
    assert qoe.objective(prob, orc) >= qoe.objective(prob, state) - 1e-9
    for _ in range(20):
        rnd = joint.baseline_random(prob, seed * 100 + _)
        rnd = rnd.replace(caches=caching.exact_place(prob, rnd))
        assert qoe.objective(prob, orc) >= qoe.objective(prob, rnd) - 1e-9


def test_oracle_capacity_error(full_k10):
    with pytest.raises(CapacityError, match="reduce"):
        joint.exhaustive_oracle(full_k10)
    assert joint.oracle_size(6, 3, 8) == 120 * 3 ** 8


def test_relocation_neighbours():
    nbrs = [tuple(d) for d in joint.relocation_neighbours(np.array([0, 2]), 4)]
    assert len(nbrs) == 6 and len(set(nbrs)) == 5  # both "exchange" moves give (2, 0)
    assert all(len(set(d)) == 2 for d in nbrs)
