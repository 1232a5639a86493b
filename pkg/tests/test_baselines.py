import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverplan.baselines import (SearchSpaceTooLarge, brute_force_solve, nearest_neighbor_solve, random_solve,
                                 search_space_size)
from coverplan.instance import CostConfig, Instance, ScanAction, cost_of_solution, generate_instance

from conftest import line_instance


def enumerate_round_robin(inst, cfg=CostConfig()):
    """Independent exhaustive search: every permutation and every corner/pattern tuple, scored by cost_of_solution."""
    best = math.inf
    choices = list(itertools.product(range(4), range(cfg.patterns)))
    for perm in itertools.permutations(range(inst.n)):
        for cz in itertools.product(choices, repeat=inst.n):
            tours = [[] for _ in range(inst.m)]
            for t, (j, (k, z)) in enumerate(zip(perm, cz)):
                tours[t % inst.m].append(ScanAction(j, k, z))
            best = min(best, cost_of_solution(inst, tours, cfg))
    return best


def test_single_area_all_eight_actions():
    inst = Instance(agents=[[0.1, 0.2]], centers=[[0.5, 0.5]], radii=[0.02])
    sol = brute_force_solve(inst)
    options = [cost_of_solution(inst, [[ScanAction(0, k, z)]]) for k in range(4) for z in range(2)]
    assert len(options) == 8
    assert sol.total_cost == pytest.approx(min(options), abs=1e-12)
    # the nearest corner, and pattern 0 on the tie
    assert sol.tours == [[ScanAction(0, 0, 0)]]


@pytest.mark.parametrize("seed,n,m", [(0, 2, 1), (1, 3, 1), (2, 3, 2), (3, 2, 2)])
def test_matches_independent_enumeration(seed, n, m):
    inst = generate_instance(seed, n, m)
    assert brute_force_solve(inst).total_cost == pytest.approx(enumerate_round_robin(inst), abs=1e-12)


def test_line_instance_visits_near_area_first():
    sol = brute_force_solve(line_instance())
    assert [a.area for a in sol.tours[0]] == [0, 1]


def test_symmetric_tie_keeps_lexicographic_first():
    inst = Instance(agents=[[0.5, 0.5]], centers=[[0.3, 0.5], [0.7, 0.5]], radii=[0.02, 0.02])
    sol = brute_force_solve(inst)
    mirrored = brute_force_solve(Instance(agents=[[0.5, 0.5]], centers=[[0.7, 0.5], [0.3, 0.5]], radii=[0.02, 0.02]))
    assert sol.total_cost == pytest.approx(mirrored.total_cost, abs=1e-12)
    assert sol.tours[0][0].area == 0


@pytest.mark.parametrize("seed", range(5))
def test_pruning_does_not_change_optimum(seed):
    inst = generate_instance(seed, 3, 2)
    a = brute_force_solve(inst, prune=True)
    b = brute_force_solve(inst, prune=False)
    assert a.total_cost == b.total_cost and a.tours == b.tours


def test_partitions_never_worse_than_round_robin():
    for seed in range(4):
        inst = generate_instance(seed, 3, 2)
        free = brute_force_solve(inst, partitions=True)
        assert free.total_cost <= brute_force_solve(inst).total_cost + 1e-12
        assert sorted(a.area for t in free.tours for a in t) == [0, 1, 2]


def test_partitions_can_leave_an_agent_idle():
    # both areas sit next to agent 0; agent 1 is far away
    inst = Instance(agents=[[0.3, 0.5], [0.95, 0.05]], centers=[[0.25, 0.5], [0.35, 0.5]], radii=[0.02, 0.02])
    sol = brute_force_solve(inst, partitions=True)
    assert len(sol.tours[1]) == 0 and len(sol.tours[0]) == 2


def test_cap_is_enforced():
    assert search_space_size(8, 1, 2) == math.factorial(8) * 8 ** 8
    with pytest.raises(SearchSpaceTooLarge) as err:
        brute_force_solve(generate_instance(0, 8, 1))
    assert err.value.leaves > err.value.cap


def test_nearest_neighbor_hand_example():
    inst = line_instance()
    sol = nearest_neighbor_solve(inst)
    assert sol.tours == [[ScanAction(0, 0, 0), ScanAction(1, 3, 0)]]
    # two lanes of 0.04 plus one 0.04 turn per area
    expected = math.hypot(0.23, 0.02) + 0.12 + 0.5 + 0.12
    assert sol.total_cost == pytest.approx(expected, abs=1e-12)


def test_nearest_neighbor_round_robin_sizes():
    inst = generate_instance(4, 40, 5)
    sol = nearest_neighbor_solve(inst)
    assert [len(t) for t in sol.tours] == [8] * 5


def test_random_solve_deterministic_and_feasible():
    inst = generate_instance(5, 10, 3)
    a, b = random_solve(inst, 7), random_solve(inst, 7)
    assert a.tours == b.tours
    assert sorted(x.area for t in a.tours for x in t) == list(range(10))
    assert random_solve(inst, 8).tours != a.tours


def test_random_mean_not_below_oracle():
    inst = generate_instance(6, 3, 1)
    optimum = brute_force_solve(inst).total_cost
    rng = np.random.default_rng(0)
    assert np.mean([random_solve(inst, rng).total_cost for _ in range(200)]) >= optimum


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 3))
def test_every_solver_bounded_below_by_oracle(seed, n):
    inst = generate_instance(seed, n, 1)
    optimum = brute_force_solve(inst).total_cost
    assert nearest_neighbor_solve(inst).total_cost >= optimum - 1e-12
    assert random_solve(inst, seed).total_cost >= optimum - 1e-12
