# %% [markdown]
# # Instances and scan geometry
# An instance is a set of square areas in the unit square plus the start
# positions of the agents. Each area is covered by a lawnmower sweep that
# starts in one of its four corners and runs along x (pattern 0) or y (pattern 1).

# %%
import numpy as np

from coverplan.instance import CostConfig, ScanAction, cost_of_solution, generate_instance, scan_path

inst = generate_instance(seed=7, n=12, m=3)
print(inst.n, "areas,", inst.m, "agents")
print("agent starts\n", inst.agents)
print("first area corners (counterclockwise from lower left)\n", inst.corners[0])

# %% [markdown]
# The sweep width sets the number of lanes. A 0.04 wide square with width
# 0.02 needs two lanes, so the sweep returns to the start side.

# %%
cfg = CostConfig(sweep_width=0.02)
for corner in range(4):
    for pattern in range(2):
        length, end = scan_path(inst, 0, corner, pattern, cfg)
        print(f"corner {corner} pattern {pattern}: length {length:.4f}, ends at {np.round(end, 4)}")

# %% [markdown]
# The objective sums travel to each chosen start corner and the sweep
# lengths over all agents. Here every agent scans its areas in index order.

# %%
tours = [[ScanAction(j, 0, 0) for j in range(a, inst.n, inst.m)] for a in range(inst.m)]
print("total cost", round(cost_of_solution(inst, tours, cfg), 4))
