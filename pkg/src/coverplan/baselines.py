"""Reference solvers: exact search for tiny instances, nearest neighbour, uniform random."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .instance import CostConfig, Instance, ScanAction, Solution, cost_of_solution, scan_tables

DEFAULT_CAP = 10**7


class SearchSpaceTooLarge(ValueError):
    def __init__(self, leaves: int, cap: int):
        super().__init__(f"search space of {leaves:.3e} leaves exceeds the cap of {cap:.0e}")
        self.leaves = leaves
        self.cap = cap


def search_space_size(n: int, m: int, patterns: int, partitions: bool = False) -> int:
    """Number of complete action sequences the oracle would enumerate."""
    leaves = math.factorial(n) * (4 * patterns) ** n
    if partitions:
        leaves *= math.comb(n + m - 1, m - 1)
    return leaves


def _tours_from_sequence(sequence, m, agent_of_step):
    tours = [[] for _ in range(m)]
    for t, action in enumerate(sequence):
        tours[agent_of_step[t]].append(action)
    return tours


def _search(instance, cost_config, agent_of_step, prune):
    """Depth-first search over (area, corner, pattern) sequences in lexicographic order."""
    n, m = instance.n, instance.m
    corners = instance.corners
    lengths, ends = scan_tables(instance, cost_config)
    p = cost_config.patterns
    best = [math.inf, None]
    sequence: list[ScanAction] = []
    used = [False] * n
    positions = [instance.agents[a] for a in range(m)]

    def visit(t, cost):
        if prune and cost >= best[0]:
            return
        if t == n:
            if cost < best[0]:
                best[0], best[1] = cost, list(sequence)
            return
        a = agent_of_step[t]
        pos = positions[a]
        for j in range(n):
            if used[j]:
                continue
            used[j] = True
            for k in range(4):
                step = math.hypot(*(corners[j, k] - pos)) + lengths[j]
                for z in range(p):
                    sequence.append(ScanAction(j, k, z))
                    positions[a] = corners[j, ends[j, k, z]]
                    visit(t + 1, cost + step)
                    sequence.pop()
            positions[a] = pos
            used[j] = False

    visit(0, 0.0)
    return best[0], best[1]


def brute_force_solve(instance: Instance, cost_config: CostConfig = CostConfig(), cap: int = DEFAULT_CAP,
                      prune: bool = True, partitions: bool = False) -> Solution:
    """Exact minimum-cost solution by exhaustive search.

    By default the agent of each step is fixed round-robin (step t belongs to
    agent t mod m), as in the learned policy. ``partitions=True`` instead tries
    every split of the n steps into consecutive per-agent blocks, which with
    free area ordering covers every feasible solution. ``prune=False`` disables
    branch-and-bound and visits every leaf. Ties keep the lexicographically
    smallest action sequence.
    """
    n, m = instance.n, instance.m
    leaves = search_space_size(n, m, cost_config.patterns, partitions)
    if leaves > cap:
        raise SearchSpaceTooLarge(leaves, cap)

    if not partitions:
        order = [t % m for t in range(n)]
        cost, seq = _search(instance, cost_config, order, prune)
        tours = _tours_from_sequence(seq, m, order)
        return Solution(tours, cost_of_solution(instance, tours, cost_config))

    best_cost, best_tours = math.inf, None
    # block sizes (c_0..c_{m-1}) summing to n, in lexicographic order
    for cuts in itertools.combinations_with_replacement(range(n + 1), m - 1):
        sizes = np.diff((0, *cuts, n))
        order = [a for a, c in enumerate(sizes) for _ in range(c)]
        cost, seq = _search(instance, cost_config, order, prune)
        if cost < best_cost:
            best_cost, best_tours = cost, _tours_from_sequence(seq, m, order)
    return Solution(best_tours, cost_of_solution(instance, best_tours, cost_config))


def nearest_neighbor_solve(instance: Instance, cost_config: CostConfig = CostConfig()) -> Solution:
    """Round-robin greedy: each agent takes the unassigned area with the nearest corner."""
    n, m = instance.n, instance.m
    corners = instance.corners
    lengths, ends = scan_tables(instance, cost_config)
    # all patterns of a square scan the same length, so the tie rule picks pattern 0
    free = np.ones(n, dtype=bool)
    positions = instance.agents.copy()
    tours = [[] for _ in range(m)]
    for t in range(n):
        a = t % m
        dist = np.linalg.norm(corners - positions[a], axis=-1)  # (n, 4)
        dist[~free] = np.inf
        j, k = np.unravel_index(np.argmin(dist), dist.shape)
        z = 0
        tours[a].append(ScanAction(int(j), int(k), z))
        free[j] = False
        positions[a] = corners[j, ends[j, k, z]]
    return Solution(tours, cost_of_solution(instance, tours, cost_config))


def random_solve(instance: Instance, rng, cost_config: CostConfig = CostConfig()) -> Solution:
    """Uniform area, corner and pattern at every round-robin sub-step."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n, m = instance.n, instance.m
    free = list(range(n))
    tours = [[] for _ in range(m)]
    for t in range(n):
        j = free.pop(int(rng.integers(len(free))))
        k = int(rng.integers(4))
        z = int(rng.integers(cost_config.patterns))
        tours[t % m].append(ScanAction(j, k, z))
    return Solution(tours, cost_of_solution(instance, tours, cost_config))
