import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_table_problem, table_problem
from uavcache import deployment as dp
from uavcache import qoe
from uavcache.errors import SwapLimitError
from uavcache.model import SolutionState


def _state(problem, dep, assoc, caches=None):
    caches = np.zeros((len(dep), problem.F), bool) if caches is None else caches
    return SolutionState(dep, caches, assoc)


def test_matching_inverse():
    m = dp.Matching(np.array([2, 0]), 4)
    assert m.inverse.tolist() == [1, -1, 0, -1] and m.is_valid()
    assert not dp.Matching(np.array([1, 1]), 4).is_valid()


def test_gs_trivial_cases():
    one = table_problem([[80.0]], [100.0], [0], M=1, F=1)
    assert dp.gs_initialize(one, _state(one, [0], [0])).tolist() == [0]
    two = table_problem([[90.0], [80.0]], [100.0, 100.0], [0], M=1, F=1)
    U = dp.snr_utility_table(two, _state(two, [0], [0]))
    assert U[0, 1] > U[0, 0]
    assert dp.gs_initialize(two, _state(two, [0], [0])).tolist() == [1]


@given(st.integers(0, 2**32 - 1))
def test_gs_has_no_classical_blocking_pair(seed):
    rng = np.random.default_rng(seed)
    prob = random_table_problem(rng, 2, 3, 6, 4, 1)
    state = _state(prob, [0, 1], rng.integers(0, 2, 6))
    dep = dp.gs_initialize(prob, state)
    assert len(set(dep.tolist())) == 2
    assert dp.classical_blocking_pairs(dp.snr_utility_table(prob, state), dep) == []


def test_utilities(reduced):
    state = _state(reduced, [0, 1, 2], np.array([0, 0, 1, 1, 0, 1, 0, 1]))
    assert dp.utility_of(reduced, state, 2) == 0.0
    assert dp.utility_location(reduced, state, 5) == 0.0
    total = sum(dp.utility_of(reduced, state, m) for m in range(3))
    assert total == pytest.approx(qoe.objective(reduced, state))
    per_user = qoe.user_mos(reduced, state)
    assert dp.utility_of(reduced, state, 0) == pytest.approx(per_user[state.association == 0].sum())
    assert dp.utility_location(reduced, state, 1) == pytest.approx(dp.utility_of(reduced, state, 1))


def test_blocking_pair_fixtures():
    # users 0,1 belong to UAV 0 but sit next to candidate 1, and vice versa
    pl = [[100.0, 100.0, 75.0, 75.0], [75.0, 75.0, 100.0, 100.0]]
    prob = table_problem(pl, [100.0, 100.0], [0, 0, 0, 0], M=2, F=1)
    crossed = _state(prob, [0, 1], [0, 0, 1, 1])
    assert dp.is_blocking_pair(prob, crossed, 0, 1)
    # both UAVs' users are near candidate 1: the swap helps one and hurts the other
    pl = [[100.0, 100.0, 100.0, 100.0], [75.0, 75.0, 76.0, 76.0]]
    prob = table_problem(pl, [100.0, 100.0], [0, 0, 0, 0], M=2, F=1)
    assert not dp.is_blocking_pair(prob, _state(prob, [0, 1], [0, 0, 1, 1]), 0, 1)
    flat = table_problem(np.full((2, 4), 80.0), [100.0, 100.0], [0] * 4, M=2, F=1)
    assert not dp.is_blocking_pair(flat, _state(flat, [0, 1], [0, 0, 1, 1]), 0, 1)
    with pytest.raises(ValueError):
        dp.is_blocking_pair(flat, _state(flat, [0, 1], [0, 0, 1, 1]), 1, 1)


def test_vacancy_move():
    pl = [[100.0, 100.0], [70.0, 70.0], [100.0, 100.0]]
    prob = table_problem(pl, [100.0] * 3, [0, 0], M=1, F=1)
    state = _state(prob, [0], [0, 0])
    assert dp.approves_move(prob, state, 0, 1)
    assert not dp.approves_move(prob, state, 0, 2)  # pure tie is rejected
    with pytest.raises(ValueError):
        dp.approves_move(prob, state, 0, 0)
    res = dp.swap_match(prob, state)
    assert res.deployment.tolist() == [1] and res.swaps == 1 and res.log[0].vacant


def test_stable_input_is_fixed_point(reduced):
    state = _state(reduced, [0, 1, 2], np.arange(8) % 3)
    first = dp.swap_match(reduced, state)
    again = dp.swap_match(reduced, state.replace(deployment=first.deployment))
    assert again.swaps == 0 and np.array_equal(again.deployment, first.deployment)


@given(st.integers(0, 2**32 - 1))
def test_swap_match_ends_in_an_enumerated_local_optimum(seed):
    rng = np.random.default_rng(seed)
    prob = random_table_problem(rng, 2, 4, 8, 4, 1)
    start = _state(prob, [0, 1], rng.integers(0, 2, 8))
    gs = dp.gs_initialize(prob, start)
    state = start.replace(deployment=gs)
    res = dp.swap_match(prob, state)
    stable = set()
    for perm in itertools.permutations(range(4), 2):
        if not dp.blocking_pairs(prob, state.replace(deployment=np.array(perm))):
            stable.add(perm)
    assert tuple(res.deployment.tolist()) in stable
    final = qoe.objective(prob, state.replace(deployment=res.deployment))
    assert final >= qoe.objective(prob, state) - 1e-9


@given(st.integers(0, 2**32 - 1))
def test_swap_log_properties(seed):
    rng = np.random.default_rng(seed)
    prob = random_table_problem(rng, 3, 6, 9, 4, 1)
    state = _state(prob, rng.permutation(6)[:3], rng.integers(0, 3, 9))
    res = dp.swap_match(prob, state)
    assert dp.blocking_pairs(prob, state.replace(deployment=res.deployment)) == []
    assert res.swaps <= 10 * 3 * 6
    objs = [qoe.objective(prob, state)] + [r.objective for r in res.log]
    assert all(b >= a - 1e-9 * max(1, abs(a)) for a, b in zip(objs, objs[1:]))
    for r in res.log:
        if not r.vacant:
            assert all(a >= b - 1e-9 * max(1, abs(b)) for b, a in zip(r.before, r.after))
        assert r.after[0] > r.before[0] or not r.vacant
    # no pair repeats between strict objective improvements
    seen, best = set(), objs[0]
    for r in res.log:
        key = (r.m, r.partner, True) if r.vacant else (min(r.m, r.partner), max(r.m, r.partner), False)
        assert key not in seen
        if r.objective > best + 1e-9 * max(1, abs(best)):
            seen.clear()
        seen.add(key)
        best = max(best, r.objective)


def test_swap_limit_error_carries_log():
    pl = [[100.0, 100.0], [70.0, 70.0], [60.0, 60.0]]
    prob = table_problem(pl, [100.0] * 3, [0, 0], M=1, F=1)
    with pytest.raises(SwapLimitError) as info:
        dp.swap_match(prob, _state(prob, [0], [0, 0]), max_swaps=0)
    assert len(info.value.log) == 1
