import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state, random_table_problem, table_problem
from uavcache import association as asc
from uavcache import qoe
from uavcache.errors import CapacityError
from uavcache.model import SolutionState

lnT_matrices = st.integers(0, 2**32 - 1).map(
    lambda s: np.random.default_rng(s).normal(0.0, 2.0, size=(int(np.random.default_rng(s).integers(1, 4)),
                                                                int(np.random.default_rng(s).integers(1, 7)))))


def test_utility_matrix_cached_value(reduced):
    state = SolutionState(np.arange(3), np.ones((3, 10), bool), np.zeros(8, int))
    se_a, _ = qoe.link_efficiencies(reduced, state.deployment)
    T = asc.utility_matrix(reduced, state)
    np.testing.assert_allclose(T, reduced.channel.bandwidth * se_a / reduced.s, rtol=1e-12)


def test_utility_matrix_fast_backhaul_limit():
    # as the backhaul link improves, an uncached request approaches the cached T
    state = SolutionState([0], [[False]], [0])
    hit = asc.utility_matrix(table_problem([[80.0]], [100.0], [0], M=1, F=1), state.replace(caches=[[True]]))[0, 0]
    miss = [asc.utility_matrix(table_problem([[80.0]], [pl], [0], M=1, F=1), state)[0, 0]
            for pl in (100.0, 50.0, 0.0, -100.0, -250.0)]
    assert all(a < b < hit for a, b in zip(miss, miss[1:]))
    assert miss[-1] == pytest.approx(hit, rel=0.2)


@given(st.integers(0, 2**32 - 1))
def test_utility_times_delay_over_load_is_one(seed):
    rng = np.random.default_rng(seed)
    prob = random_table_problem(rng, 3, 5, 7, 4, 2)
    state = random_state(rng, prob)
    T = asc.utility_matrix(prob, state)
    access, backhaul = qoe.delays(prob, state)
    w = state.load[state.association]
    np.testing.assert_allclose(T[state.association, np.arange(prob.K)] * (access + backhaul) / w, 1.0, rtol=1e-12)


def test_assign_step_examples():
    lnT = np.random.default_rng(0).normal(size=(1, 5))
    assert asc.assign_step(lnT, [0.3]).tolist() == [0] * 5
    lnT = np.random.default_rng(1).normal(size=(3, 6))
    assert np.array_equal(asc.assign_step(lnT, [0.7] * 3), lnT.argmax(axis=0))
    assert asc.assign_step(np.zeros((2, 1)), [0, 0]).tolist() == [0]  # tie -> lowest index


@given(lnT_matrices, st.floats(-5, 5))
def test_assign_step_shift_invariance(lnT, shift):
    alpha = np.linspace(0, 1, lnT.shape[0])
    assert np.array_equal(asc.assign_step(lnT, alpha), asc.assign_step(lnT, alpha + shift))


def test_demand_response_is_monotone():
    lnT = np.random.default_rng(5).normal(size=(3, 30))
    counts = [np.sum(asc.assign_step(lnT, [a, 0.2, 0.4]) == 0) for a in np.linspace(-3, 3, 61)]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_dual_value_examples():
    assert asc.dual_value(np.array([[1.0]]), [0.0], np.array([0]), np.array([1.0])) == pytest.approx(1.0)
    lnT = np.random.default_rng(2).normal(size=(2, 4))
    assoc = np.array([0, 1, 1, 0])
    w = np.bincount(assoc, minlength=2).astype(float)
    for alpha in ([0, 0], [3, -1]):
        assert asc.dual_value(lnT, alpha, assoc, w) == pytest.approx(asc.primal_value(lnT, assoc))


@given(st.integers(0, 2**32 - 1))
def test_weak_duality(seed):
    rng = np.random.default_rng(seed)
    M, K = int(rng.integers(1, 4)), int(rng.integers(1, 7))
    lnT = rng.normal(size=(M, K))
    _, best = asc.brute_force_lnT(lnT)
    alpha = rng.uniform(-1, 3, size=M)
    a = asc.assign_step(lnT, alpha)
    L = asc.dual_value(lnT, alpha, a, np.exp(alpha - 1))
    assert L >= best - 1e-9


def test_update_multipliers_fixed_point_and_one():
    lnT = np.zeros((2, 2))
    ds = asc.DualState(alpha=np.array([1.0, 1.0]), w=np.ones(2))
    nxt, norm = asc.update_multipliers(ds, lnT, np.array([0, 1]))
    assert norm == 0.0 and np.array_equal(nxt.alpha, ds.alpha)
    assert nxt.w.tolist() == [1.0, 1.0]


def test_eps_grows_on_improvement_and_decays_otherwise():
    p = asc.DualParams()
    lnT = np.random.default_rng(3).normal(size=(2, 5))
    ds = asc.DualState(alpha=np.zeros(2), w=np.exp(-np.ones(2)), t=1, eps=0.4, L_best=100.0, L_prev=100.0)
    nxt, _ = asc.update_multipliers(ds, lnT, asc.assign_step(lnT, ds.alpha), p)
    assert nxt.eps == pytest.approx(0.4 * p.rho)
    ds = asc.DualState(alpha=np.zeros(2), w=np.exp(-np.ones(2)), t=1, eps=0.4, L_best=-100.0, L_prev=-100.0)
    nxt, _ = asc.update_multipliers(ds, lnT, asc.assign_step(lnT, ds.alpha), p)
    assert nxt.eps == pytest.approx(0.4 * p.beta)
    ds = asc.DualState(alpha=np.zeros(2), w=np.exp(-np.ones(2)), t=1, eps=1.5e-3, L_best=-100.0, L_prev=-100.0)
    assert asc.update_multipliers(ds, lnT, asc.assign_step(lnT, ds.alpha), p)[0].eps == p.eps_floor


def test_dual_params_validation():
    for bad in (dict(lam=2.0), dict(beta=1.0), dict(rho=1.0), dict(eps_floor=0.0), dict(eps_rule="x")):
        with pytest.raises(ValueError):
            asc.DualParams(**bad)
    assert asc.dual_params_from({"max_iter": "50"}).max_iter == 50


def test_single_uav_converges_immediately():
    res = asc.solve_lnT(np.random.default_rng(0).normal(size=(1, 4)), np.zeros(4, int))
    assert res.converged and len(res.trace) == 1 and res.association.tolist() == [0] * 4


def test_two_uav_six_user_fixture_within_two_percent():
    lnT = np.random.default_rng(11).normal(0.5, 1.0, size=(2, 6))
    _, best = asc.brute_force_lnT(lnT)
    res = asc.solve_lnT(lnT, lnT.argmax(axis=0))
    assert res.objective >= best - 0.02 * abs(best)


@given(st.integers(0, 2**32 - 1))
def test_solve_never_worse_than_input_and_trace_sane(seed):
    rng = np.random.default_rng(seed)
    lnT = rng.normal(size=(int(rng.integers(2, 4)), int(rng.integers(2, 7))))
    start = rng.integers(0, lnT.shape[0], size=lnT.shape[1])
    res = asc.solve_lnT(lnT, start, asc.DualParams(max_iter=80))
    assert res.objective >= asc.primal_value(lnT, start)
    assert res.objective == pytest.approx(asc.primal_value(lnT, res.association))
    L = [row["L_alpha"] for row in res.trace]
    running = np.minimum.accumulate(L)
    assert np.all(np.diff(running) <= 0)
    assert set(res.trace[0]) == {"t", "L_alpha", "L_t", "eps_t", "primal_objective"}


def test_brute_force_examples():
    lnT = np.array([[0.2], [1.5], [0.7]])
    assert asc.brute_force_lnT(lnT)[0].tolist() == [1]
    a, _ = asc.brute_force_lnT(np.zeros((2, 2)))
    assert sorted(a.tolist()) == [0, 1]
    with pytest.raises(CapacityError):
        asc.brute_force_lnT(np.zeros((3, 20)))


def test_brute_force_association_reevaluates(reduced):
    state = SolutionState(np.arange(3), np.zeros((3, 10), bool), np.zeros(8, int))
    a = asc.brute_force_association(reduced, state)
    best = qoe.q_values(reduced, state.replace(association=a)).sum()
    for trial in np.random.default_rng(0).integers(0, 3, size=(200, 8)):
        assert qoe.q_values(reduced, state.replace(association=trial)).sum() <= best + 1e-9
    lnT = np.log(asc.utility_matrix(reduced, state))
    assert asc.primal_value(lnT, a) == pytest.approx(best)


def test_iter_assignments_is_complete():
    rows = np.concatenate(list(asc.iter_assignments(3, 4, chunk=7)))
    assert len(rows) == 81 and len({tuple(r) for r in rows}) == 81
