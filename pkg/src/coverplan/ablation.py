"""Paired training runs that differ in a single switch."""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import nearest_neighbor_solve
from .instance import generate_instance
from .rollout import batch_rollout
from .training import TrainConfig, train

STUDIES = {
    # arm name -> config overrides
    "agents-encoder": {"enabled": {"agents_encoder_enabled": True}, "disabled": {"agents_encoder_enabled": False}},
    "start-locations": {"varying": {"varying_start_locations": True}, "fixed": {"varying_start_locations": False}},
}


def heldout_set(count: int, n: int, m: int, seed: int = 10**6):
    return [generate_instance(seed + i, n, m) for i in range(count)]


def greedy_mean(policy, instances, cost_config) -> float:
    was_training = policy.training
    policy.eval()
    cost = float(np.mean([s.total_cost for s, _ in batch_rollout(instances, policy, cost_config=cost_config)]))
    policy.train(was_training)
    return cost


def run_arm(config: TrainConfig, heldout, out_dir=None):
    """Train one arm, evaluating greedy held-out cost after every epoch."""
    nn_mean = float(np.mean([nearest_neighbor_solve(i, config.cost).total_cost for i in heldout]))
    curve = []

    def hook(epoch, policy):
        c = greedy_mean(policy, heldout, config.cost)
        curve.append({"epoch": epoch, "heldout_mean_cost": c, "gap_vs_nn": (c - nn_mean) / nn_mean})

    result = train(config, out_dir, on_epoch_end=hook)
    return result, curve, nn_mean


def run_study(study: str, config: TrainConfig, heldout, out_dir) -> dict:
    """Train both arms with identical seeds; write per-arm metrics, curves.csv and report.txt."""
    if study not in STUDIES:
        raise ValueError(f"unknown study {study!r}; choose from {sorted(STUDIES)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arms = {}
    for arm, overrides in STUDIES[study].items():
        cfg = replace(config, **overrides)
        _, curve, nn_mean = run_arm(cfg, heldout, out / arm)
        arms[arm] = curve

    with open(out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "arm", "heldout_mean_cost", "gap_vs_nn"])
        for arm, curve in arms.items():
            for row in curve:
                w.writerow([row["epoch"], arm, repr(row["heldout_mean_cost"]), repr(row["gap_vs_nn"])])

    (first, a), (second, b) = arms.items()
    final_a = a[-1]["heldout_mean_cost"] if a else float("nan")
    final_b = b[-1]["heldout_mean_cost"] if b else float("nan")
    report = {
        "study": study,
        "arms": list(arms),
        "nn_mean": nn_mean,
        f"{first}_final_cost": final_a,
        f"{second}_final_cost": final_b,
        # relative change of the second arm's final held-out cost against the first
        "relative_delta": (final_b - final_a) / final_a if a else float("nan"),
    }
    with open(out / "report.txt", "w") as fh:
        for k, v in report.items():
            fh.write(f"{k}: {v}\n")
    report["curves"] = arms
    return report
