# %% [markdown]
# # Decoding with the policy
# The policy embeds areas and agents with gated graph convolutions, then
# builds tours one agent at a time: pick an area, a start corner, a pattern.

# %%
import time

from coverplan.instance import generate_instance
from coverplan.model import ModelConfig, Policy
from coverplan.rollout import best_of_samples, rollout

policy = Policy(ModelConfig(), seed=0).eval()
print(f"{policy.parameter_count():,} parameters")

inst = generate_instance(11, 40, 5)
t0 = time.perf_counter()
sol, trace = rollout(inst, policy, "greedy")
print(f"greedy cost {sol.total_cost:.4f} in {1000 * (time.perf_counter() - t0):.0f} ms")
print("areas per agent", [len(t) for t in sol.tours])

# %% [markdown]
# Every step keeps the log-probability of each of its three choices.

# %%
for rec in trace.records[:5]:
    print(rec.agent, tuple(rec.action), [round(x, 3) for x in rec.log_probs])

# %%
best, _ = best_of_samples(inst, policy, samples=16, seed=0)
print(f"best of 16 samples {best.total_cost:.4f}")
