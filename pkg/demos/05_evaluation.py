# %% [markdown]
# # Optimality gaps
# Gaps are reported per instance against a reference solver: nearest
# neighbour, the exact oracle on tiny sizes, or costs imported from CSV.

# %%
from coverplan.evaluation import PUBLISHED_RESULTS, comparison_table, gap_report, reference_costs, summary_text
from coverplan.instance import generate_instance
from coverplan.model import ModelConfig, Policy
from coverplan.rollout import batch_rollout

instances = [generate_instance(s, 4, 1) for s in range(30)]
policy = Policy(ModelConfig(dim=32, heads=4, corner_dim=32, pattern_dim=32), seed=0).eval()
costs = {i: sol.total_cost for i, (sol, _) in enumerate(batch_rollout(instances, policy))}

report = gap_report(costs, reference_costs(instances, "oracle"))
print(summary_text(report, "untrained policy", "oracle"))

# %% [markdown]
# Published means for larger sizes are kept as constants for side-by-side tables.

# %%
print(comparison_table(PUBLISHED_RESULTS[(40, 5)]))
