# %% [markdown]
# # Reference solvers
# Exact search is only feasible for a handful of areas. Nearest neighbour
# and uniform random decoding give cheap points of comparison at any size.

# %%
import numpy as np

from coverplan.baselines import brute_force_solve, nearest_neighbor_solve, random_solve, search_space_size
from coverplan.instance import generate_instance

for n in range(1, 6):
    print(f"{n} areas, 1 agent: {search_space_size(n, 1, 2):,} leaves")

# %%
gaps = []
for seed in range(20):
    inst = generate_instance(seed, 4, 1)
    best = brute_force_solve(inst).total_cost
    nn = nearest_neighbor_solve(inst).total_cost
    rnd = np.mean([random_solve(inst, r).total_cost for r in range(20)])
    gaps.append(((nn - best) / best, (rnd - best) / best))
gaps = np.array(gaps)
print(f"nearest neighbour mean gap {gaps[:, 0].mean():+.2%}, random mean gap {gaps[:, 1].mean():+.2%}")

# %% [markdown]
# With more agents the exact search can also choose how many areas each
# agent takes instead of the fixed round-robin split.

# %%
inst = generate_instance(3, 4, 2)
print("round robin", round(brute_force_solve(inst).total_cost, 4))
print("free split ", round(brute_force_solve(inst, partitions=True).total_cost, 4))
