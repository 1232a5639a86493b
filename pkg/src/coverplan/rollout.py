"""Round-robin autoregressive construction of multi-agent scan tours."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .decoder import gather_rows, select_action
from .encoder import encode_agents, encode_nodes
from .instance import CostConfig, Instance, ScanAction, Solution, cost_of_solution, scan_tables
from .model import Policy


class BatchError(ValueError):
    pass


@dataclass
class StepRecord:
    agent: int
    action: ScanAction
    log_probs: tuple[float, float, float]  # area, corner, pattern


@dataclass
class RolloutTrace:
    records: list[StepRecord]
    total_cost: float
    instance: Instance
    mode: str

    @property
    def log_prob(self) -> float:
        return float(sum(sum(r.log_probs) for r in self.records))


@dataclass
class BatchRollout:
    """Raw batched result; ``log_probs`` keeps the autograd graph."""

    actions: np.ndarray  # (B, n, 3)
    agent_order: np.ndarray  # (n,)
    log_probs: torch.Tensor  # (B, n, 3)
    costs: np.ndarray  # (B,) float64

    @property
    def trajectory_log_probs(self) -> torch.Tensor:
        return self.log_probs.sum(dim=(1, 2))


class InstanceBatch:
    """Stacked arrays of same-size instances."""

    def __init__(self, instances: Sequence[Instance], cost_config: CostConfig, dtype=torch.float32):
        if not instances:
            raise BatchError("empty batch")
        sizes = {(inst.n, inst.m) for inst in instances}
        if len(sizes) != 1:
            raise BatchError(f"instances of different sizes in one batch: {sorted(sizes)}")
        self.instances = list(instances)
        self.n, self.m = instances[0].n, instances[0].m
        self.cost_config = cost_config
        self.dtype = dtype
        tables = [scan_tables(inst, cost_config) for inst in instances]
        self.scan_lengths = np.stack([t[0] for t in tables])  # (B, n)
        self.end_corner = torch.from_numpy(np.stack([t[1] for t in tables]))  # (B, n, 4, p)
        self.corners_np = np.stack([inst.corners for inst in instances])  # (B, n, 4, 2)
        self.agents_np = np.stack([inst.agents for inst in instances])  # (B, m, 2)

        as_t = lambda a: torch.as_tensor(a, dtype=dtype)  # noqa: E731
        self.features = as_t(np.stack([inst.features for inst in instances]))
        self.centers = as_t(np.stack([inst.centers for inst in instances]))
        self.adjacency = as_t(np.stack([inst.adjacency for inst in instances]))
        self.corners = as_t(self.corners_np)

    def __len__(self):
        return len(self.instances)


def run_policy(
    policy: Policy,
    batch: InstanceBatch,
    mode: str = "greedy",
    rngs: Sequence[np.random.Generator] | None = None,
    forced: np.ndarray | None = None,
    reencode: str = "round",
) -> BatchRollout:
    """Decode all ``n`` sub-steps for a batch.

    ``reencode`` is "round" (agent encoder re-run on current positions after each
    full round of m sub-steps) or "substep" (after every sub-step).
    ``forced`` (B, n, 3) replays given actions and only evaluates their log-probs.
    """
    if reencode not in ("round", "substep"):
        raise ValueError(f"reencode must be 'round' or 'substep', got {reencode!r}")
    if mode == "sample" and forced is None and (rngs is None or len(rngs) != len(batch)):
        raise ValueError("sampling needs one generator per instance")
    B, n, m = len(batch), batch.n, batch.m
    dtype = batch.dtype
    rows = torch.arange(B)
    rows_np = np.arange(B)

    nodes = encode_nodes(policy.nodes, batch.features, batch.centers, batch.adjacency)
    node_h = nodes.h
    graph_mean = node_h.mean(1)
    start_agents = encode_agents(policy.agents, torch.as_tensor(batch.agents_np, dtype=dtype)).h
    current_agents = start_agents

    positions = batch.agents_np.copy()
    available = torch.ones(B, n, dtype=torch.bool)
    first_area = torch.zeros(B, dtype=torch.long)
    last_area = torch.zeros(B, dtype=torch.long)
    current_area = torch.zeros(B, m, dtype=torch.long)
    has_area = torch.zeros(B, m, dtype=torch.bool)
    costs = np.zeros(B)
    actions = np.zeros((B, n, 3), dtype=np.int64)
    agent_order = np.arange(n) % m
    log_probs = []

    def endpoints(area, corner):
        ends = batch.end_corner[rows, area, corner]  # (B, p)
        return batch.corners[rows[:, None], area[:, None], ends]

    for t in range(n):
        alpha = t % m
        if t > 0 and (reencode == "substep" or alpha == 0):
            current_agents = encode_agents(policy.agents, torch.tensor(positions, dtype=dtype)).h
        defined = torch.full((B,), t > 0)
        context_args = (
            graph_mean,
            (gather_rows(node_h, first_area), defined) if t > 0 else None,
            (gather_rows(node_h, last_area), defined) if t > 0 else None,
            start_agents[:, alpha],
            current_agents[:, alpha],
            (gather_rows(node_h, current_area[:, alpha].clone()), has_area[:, alpha].clone()),
        )
        uniforms = None
        if mode == "sample" and forced is None:
            uniforms = np.stack([g.random(3) for g in rngs])
        step_actions, step_lp = select_action(
            policy.decoder, context_args, node_h, available.clone(),
            torch.tensor(positions[:, alpha], dtype=dtype), batch.corners, endpoints, mode,
            uniforms=uniforms, forced=None if forced is None else forced[:, t],
        )
        log_probs.append(step_lp)
        a = step_actions.numpy()
        actions[:, t] = a
        j, k, z = a[:, 0], a[:, 1], a[:, 2]
        if not bool(available[rows, step_actions[:, 0]].all()):
            raise ValueError(f"step {t}: an already assigned area was selected")

        start = batch.corners_np[rows_np, j, k]
        costs += np.hypot(*(start - positions[:, alpha]).T) + batch.scan_lengths[rows_np, j]
        end = batch.end_corner.numpy()[rows_np, j, k, z]
        positions[:, alpha] = batch.corners_np[rows_np, j, end]

        area_t = step_actions[:, 0]
        available[rows, area_t] = False
        if t == 0:
            first_area = area_t
        last_area = area_t
        current_area[:, alpha] = area_t
        has_area[:, alpha] = True

    return BatchRollout(actions, agent_order, torch.stack(log_probs, dim=1), costs)


def to_solutions(batch: InstanceBatch, result: BatchRollout, mode: str, check: bool = True):
    """Split a batched result into per-instance (Solution, RolloutTrace) pairs."""
    out = []
    lp = result.log_probs.detach().double().cpu().numpy()
    for b, inst in enumerate(batch.instances):
        tours: list[list[ScanAction]] = [[] for _ in range(inst.m)]
        records = []
        for t, alpha in enumerate(result.agent_order):
            action = ScanAction(*map(int, result.actions[b, t]))
            tours[alpha].append(action)
            records.append(StepRecord(int(alpha), action, tuple(map(float, lp[b, t]))))
        cost = float(result.costs[b])
        if check:
            recomputed = cost_of_solution(inst, tours, batch.cost_config)
            if abs(recomputed - cost) > 1e-9:
                raise AssertionError(f"incremental cost {cost} != recomputed {recomputed}")
        out.append((Solution(tours, cost), RolloutTrace(records, cost, inst, mode)))
    return out


def instance_rng(batch_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([batch_seed, index]))


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def rollout(instance: Instance, policy: Policy, mode: str = "greedy", rng=None,
            cost_config: CostConfig = CostConfig(), reencode: str = "round"):
    """Decode one instance; returns ``(Solution, RolloutTrace)``."""
    batch = InstanceBatch([instance], cost_config, policy.dtype)
    rngs = [_as_generator(rng)] if mode == "sample" else None
    with torch.no_grad():
        result = run_policy(policy, batch, mode, rngs, reencode=reencode)
    return to_solutions(batch, result, mode)[0]


def batch_rollout(instances: Sequence[Instance], policy: Policy, mode: str = "greedy", seed: int = 0,
                  cost_config: CostConfig = CostConfig(), reencode: str = "round", chunk: int = 256):
    """Decode many instances; each owns the RNG stream ``instance_rng(seed, index)``.

    In training mode all instances must share (n, m). In eval mode mixed sizes
    are grouped and results come back in input order.
    """
    instances = list(instances)
    if not instances:
        raise BatchError("empty batch")
    sizes = {(inst.n, inst.m) for inst in instances}
    if policy.training and len(sizes) > 1:
        raise BatchError(f"training-mode batch mixes sizes {sorted(sizes)}")
    results: list = [None] * len(instances)
    groups: dict = {}
    for i, inst in enumerate(instances):
        groups.setdefault((inst.n, inst.m), []).append(i)
    with torch.no_grad():
        for idx in groups.values():
            step = len(idx) if policy.training else chunk
            for lo in range(0, len(idx), step):
                part = idx[lo:lo + step]
                batch = InstanceBatch([instances[i] for i in part], cost_config, policy.dtype)
                rngs = [instance_rng(seed, i) for i in part] if mode == "sample" else None
                res = run_policy(policy, batch, mode, rngs, reencode=reencode)
                for i, pair in zip(part, to_solutions(batch, res, mode)):
                    results[i] = pair
    return results


def best_of_samples(instance: Instance, policy: Policy, samples: int, seed: int = 0,
                    cost_config: CostConfig = CostConfig(), reencode: str = "round"):
    """Draw ``samples`` trajectories in one eval-mode batch and keep the cheapest.

    Sample ``s`` uses the stream ``instance_rng(seed, s)``; ties keep the lowest ``s``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    was_training = policy.training
    policy.eval()
    batch = InstanceBatch([instance] * samples, cost_config, policy.dtype)
    with torch.no_grad():
        result = run_policy(policy, batch, "sample", [instance_rng(seed, s) for s in range(samples)],
                            reencode=reencode)
    policy.train(was_training)
    pairs = to_solutions(batch, result, "sample")
    return pairs[int(np.argmin(result.costs))]
