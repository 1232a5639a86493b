# %% [markdown]
# # A short training run
# REINFORCE with a moving-average baseline on 12 areas and 3 agents. This is
# a tiny budget with a small model. The held-out greedy cost drops epoch by
# epoch but stays well above nearest neighbour. Beating it takes the full
# 10 x 10,000 run used by the acceptance tests.

# %%
import numpy as np

from coverplan.ablation import greedy_mean, heldout_set
from coverplan.baselines import nearest_neighbor_solve
from coverplan.instance import CostConfig
from coverplan.model import ModelConfig
from coverplan.training import TrainConfig, train

heldout = heldout_set(100, 12, 3)
nn = np.mean([nearest_neighbor_solve(i).total_cost for i in heldout])
config = TrainConfig(n_range=(12, 12), m_range=(3, 3), epochs=3, instances_per_epoch=512, batch_size=32,
                     optimizer="adam", learning_rate=1e-3,
                     model=ModelConfig(dim=32, heads=4, corner_dim=32, pattern_dim=32))
curve = []
result = train(config, on_epoch_end=lambda epoch, policy: curve.append(greedy_mean(policy, heldout, CostConfig())))

# %%
for row, held in zip(result.metrics, curve):
    print(f"epoch {row['epoch']}: sampled {row['mean_cost']:.4f}, held-out greedy {held:.4f}")
print(f"nearest neighbour on the same set {nn:.4f}")
