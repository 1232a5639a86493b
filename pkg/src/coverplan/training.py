"""Policy-gradient training (REINFORCE and PPO) of the full policy."""

from __future__ import annotations

import copy
import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .decoder import NonFiniteLogitsError
from .instance import CostConfig, generate_instance
from .model import ModelConfig, Policy
from .rollout import BatchRollout, InstanceBatch, instance_rng, run_policy

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "mean_cost", "baseline", "grad_norm", "wallclock_s")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    algorithm: str = "reinforce"
    batch_size: int = 128
    instances_per_epoch: int = 1280
    epochs: int = 10
    learning_rate: float = 1e-4
    optimizer: str = "sgd"
    n_range: tuple[int, int] = (35, 100)
    m_range: tuple[int, int] = (5, 10)
    baseline: str = "ema"
    ema_beta: float = 0.8
    epsilon: float = 0.2
    inner_epochs: int = 3
    max_grad_norm: float | None = 1.0
    seed: int = 0
    varying_start_locations: bool = True
    agents_encoder_enabled: bool = True
    reencode: str = "round"
    log_wallclock: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)
    cost: CostConfig = field(default_factory=CostConfig)

    def __post_init__(self):
        if self.algorithm not in ("reinforce", "ppo"):
            raise ValueError(f"algorithm must be 'reinforce' or 'ppo', got {self.algorithm!r}")
        if self.baseline not in ("ema", "greedy-rollout"):
            raise ValueError(f"baseline must be 'ema' or 'greedy-rollout', got {self.baseline!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        for name in ("batch_size", "instances_per_epoch", "inner_epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or not self.learning_rate > 0:
            raise ValueError("epochs must be >= 0 and learning_rate > 0")
        if not 0 < self.epsilon:
            raise ValueError("epsilon must be positive")
        if not 0 <= self.ema_beta < 1:
            raise ValueError("ema_beta must lie in [0, 1)")
        lo, hi = self.m_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad m_range {self.m_range}")
        if not any(self.n_range[0] <= k * m <= self.n_range[1] for m in range(lo, hi + 1) for k in range(1, self.n_range[1] + 1)):
            raise ValueError(f"n_range {self.n_range} holds no multiple of any m in {self.m_range}")
        if self.model.agents_encoder != self.agents_encoder_enabled:
            self.model = replace(self.model, agents_encoder=self.agents_encoder_enabled)


# ---------------------------------------------------------------------------
# baselines


@dataclass
class BaselineState:
    kind: str = "ema"
    beta: float = 0.8
    value: float | None = None
    frozen: Policy | None = None


def update_baseline(state: BaselineState, batch_costs) -> BaselineState:
    """Exponential moving average of batch-mean cost; initialized by the first batch."""
    mean = float(np.mean(batch_costs))
    if state.value is None:
        state.value = mean
    else:
        state.value = state.beta * state.value + (1 - state.beta) * mean
    return state


def freeze_policy(policy: Policy) -> Policy:
    frozen = copy.deepcopy(policy)
    frozen.eval()
    for p in frozen.parameters():
        p.requires_grad_(False)
    return frozen


def greedy_costs(policy: Policy, batch: InstanceBatch, reencode: str = "round") -> np.ndarray:
    was_training = policy.training
    policy.eval()
    with torch.no_grad():
        costs = run_policy(policy, batch, "greedy", reencode=reencode).costs
    policy.train(was_training)
    return costs


def baseline_values(state: BaselineState, batch: InstanceBatch, costs, reencode="round") -> np.ndarray:
    """Per-instance baseline b(s) for the current batch (updates the EMA first)."""
    if state.kind == "greedy-rollout":
        if state.frozen is None:
            raise TrainingError("greedy-rollout baseline has no frozen policy")
        return greedy_costs(state.frozen, batch, reencode)
    update_baseline(state, costs)
    return np.full(len(costs), state.value)


# ---------------------------------------------------------------------------
# objectives


def reinforce_loss(result: BatchRollout, baseline, mode: str = "sample") -> torch.Tensor:
    """Surrogate whose gradient is mean((L - b) * grad log p(pi|s))."""
    if mode != "sample":
        raise TrainingError("REINFORCE needs sampled trajectories; greedy traces give a biased, degenerate gradient")
    lp = result.trajectory_log_probs
    advantage = torch.as_tensor(result.costs - np.asarray(baseline, dtype=np.float64), dtype=lp.dtype)
    return (advantage * lp).mean()


def ppo_objective(new_log_probs: torch.Tensor, old_log_probs: torch.Tensor, costs, baseline,
                  epsilon: float) -> torch.Tensor:
    """Clipped surrogate with advantage b(s) - L(pi) (to be maximized).

    Log-probs are per trajectory, so the ratio is the product over every stage
    of every sub-step.
    """
    ratio = torch.exp(new_log_probs - old_log_probs.detach())
    if not bool(torch.isfinite(ratio).all()):
        raise TrainingError("non-finite probability ratio")
    advantage = torch.as_tensor(np.asarray(baseline, dtype=np.float64) - np.asarray(costs), dtype=ratio.dtype)
    clipped = torch.clamp(ratio, 1 - epsilon, 1 + epsilon)
    return torch.minimum(ratio * advantage, clipped * advantage).mean()


def flat_grad(policy: Policy) -> torch.Tensor:
    return torch.cat([
        (p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1) for p in policy.parameters()
    ])


# ---------------------------------------------------------------------------
# data


def sample_size(rng: np.random.Generator, n_range, m_range) -> tuple[int, int]:
    """Uniform m, then n uniform over the multiples of m inside n_range."""
    while True:
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        choices = [k * m for k in range(1, n_range[1] // m + 1) if k * m >= n_range[0]]
        if choices:
            return int(rng.choice(choices)), m


def make_batch_instances(batch_seed: int, size: int, n: int, m: int, varying_start: bool):
    """Instances of one batch; with fixed starts every instance shares the agent positions."""
    agents = None
    if not varying_start:
        agents = generate_instance(batch_seed, 1, m).agents
    seeds = np.random.SeedSequence(batch_seed).generate_state(size)
    return [generate_instance(int(s), n, m, agents=agents) for s in seeds]


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    policy: Policy
    metrics: list[dict]


def _make_optimizer(config: TrainConfig, policy: Policy):
    if config.optimizer == "adam":
        return torch.optim.Adam(policy.parameters(), lr=config.learning_rate)
    return torch.optim.SGD(policy.parameters(), lr=config.learning_rate)


def _step(policy, optimizer, loss, max_grad_norm, batch_seed):
    if not bool(torch.isfinite(loss)):
        raise TrainingError(f"non-finite loss {loss.item()} on batch seed {batch_seed}")
    optimizer.zero_grad()
    loss.backward()
    norm = torch.nn.utils.clip_grad_norm_(policy.parameters(), max_grad_norm or math.inf)
    if not bool(torch.isfinite(norm)):
        raise TrainingError(f"non-finite gradient on batch seed {batch_seed}")
    optimizer.step()
    return float(norm)


def train_batch(policy, optimizer, config: TrainConfig, baseline: BaselineState, instances, batch_seed):
    """One update on one batch; returns (mean cost, mean baseline, grad norm)."""
    batch = InstanceBatch(instances, config.cost, policy.dtype)
    rngs = [instance_rng(batch_seed, i) for i in range(len(instances))]
    policy.train()
    try:
        result = run_policy(policy, batch, "sample", rngs, reencode=config.reencode)
    except NonFiniteLogitsError as exc:
        raise TrainingError(f"{exc} on batch seed {batch_seed}") from exc
    b = baseline_values(baseline, batch, result.costs, config.reencode)

    if config.algorithm == "reinforce":
        norm = _step(policy, optimizer, reinforce_loss(result, b), config.max_grad_norm, batch_seed)
    else:
        old = result.trajectory_log_probs.detach()
        new = result.trajectory_log_probs
        norms = []
        for inner in range(config.inner_epochs):
            if inner > 0:
                new = run_policy(policy, batch, "sample", forced=result.actions,
                                 reencode=config.reencode).trajectory_log_probs
            objective = ppo_objective(new, old, result.costs, b, config.epsilon)
            norms.append(_step(policy, optimizer, -objective, config.max_grad_norm, batch_seed))
        norm = float(np.mean(norms))
    return float(result.costs.mean()), float(np.mean(b)), norm


def train(config: TrainConfig, out_dir=None, policy: Policy | None = None,
          on_epoch_end: Callable[[int, Policy], None] | None = None) -> TrainResult:
    """Train a policy; writes ``metrics.csv`` and ``checkpoint_epoch{k}.bin`` under ``out_dir``.

    Every random draw derives from ``config.seed``: model init, instance
    generation and sampling, so reruns reproduce the metrics exactly.
    """
    torch.manual_seed(config.seed)
    policy = policy or Policy(config.model, seed=config.seed)
    optimizer = _make_optimizer(config, policy)
    baseline = BaselineState(config.baseline, config.ema_beta)
    if config.baseline == "greedy-rollout":
        baseline.frozen = freeze_policy(policy)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(policy, out / "checkpoint_epoch0.bin")
        metrics_file = open(out / "metrics.csv", "w", newline="")
        writer = csv.writer(metrics_file)
        writer.writerow(METRIC_COLUMNS)

    size_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    metrics = []
    start = time.perf_counter()
    try:
        for epoch in range(1, config.epochs + 1):
            costs, bases, norms = [], [], []
            n_batches = math.ceil(config.instances_per_epoch / config.batch_size)
            for k in range(n_batches):
                size = min(config.batch_size, config.instances_per_epoch - k * config.batch_size)
                n, m = sample_size(size_rng, config.n_range, config.m_range)
                batch_seed = int(np.random.SeedSequence([config.seed, epoch, k]).generate_state(1)[0])
                instances = make_batch_instances(batch_seed, size, n, m, config.varying_start_locations)
                c, b, g = train_batch(policy, optimizer, config, baseline, instances, batch_seed)
                costs.append(c)
                bases.append(b)
                norms.append(g)
            if config.baseline == "greedy-rollout":
                baseline.frozen = freeze_policy(policy)
            row = {
                "epoch": epoch,
                "mean_cost": float(np.mean(costs)),
                "baseline": float(np.mean(bases)),
                "grad_norm": float(np.mean(norms)),
                "wallclock_s": time.perf_counter() - start if config.log_wallclock else None,
            }
            metrics.append(row)
            log.info("epoch %d mean cost %.4f baseline %.4f grad norm %.4f", epoch, row["mean_cost"],
                     row["baseline"], row["grad_norm"])
            if out is not None:
                writer.writerow([epoch, repr(row["mean_cost"]), repr(row["baseline"]), repr(row["grad_norm"]),
                                 "" if row["wallclock_s"] is None else f"{row['wallclock_s']:.3f}"])
                metrics_file.flush()
                save_checkpoint(policy, out / f"checkpoint_epoch{epoch}.bin")
            if on_epoch_end is not None:
                on_epoch_end(epoch, policy)
    finally:
        if out is not None:
            metrics_file.close()
    if out is not None:
        save_checkpoint(policy, out / "checkpoint.bin")
    return TrainResult(policy, metrics)
