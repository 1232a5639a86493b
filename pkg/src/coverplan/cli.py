"""Command-line entry point: generate, train, solve, eval, ablate.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .ablation import STUDIES, heldout_set, run_study
from .checkpoint import CheckpointError, load_checkpoint
from .evaluation import (PRESETS, PUBLISHED_RESULTS, comparison_table, gap_report, read_cost_csv,
                         reference_costs, summary_text)
from .instance import (CostConfig, FeasibilityError, GenerationError, ParseError, ValidationError,
                       generate_instance, read_instances, read_solutions, write_instances, write_solutions)
from .model import ModelConfig
from .rollout import best_of_samples, rollout
from .training import TrainConfig, TrainingError, train

OUTPUT_ENV = "COVERPLAN_OUTPUT_DIR"
log = logging.getLogger("coverplan")


class UsageError(ValueError):
    pass


def output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "."))


def resolve(path: str | None, default: str) -> Path:
    return Path(path) if path else output_dir() / default


def instance_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)] if count else []


def parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(",")
    return int(lo), int(hi or lo)


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    n, m = PRESETS[args.preset] if args.preset else (None, None)
    n = args.areas if args.areas is not None else n
    m = args.agents if args.agents is not None else m
    if n is None or m is None:
        raise UsageError("give --preset or both --areas and --agents")
    if args.training_mode and n % m:
        raise UsageError(f"training data needs areas to be a multiple of agents, got {n} areas / {m} agents")
    mode = "full" if args.adjacency == "full" else int(args.adjacency)
    instances = [generate_instance(s, n, m, adjacency_mode=mode) for s in instance_seeds(args.seed, args.count)]
    out = resolve(args.out, "instances.jsonl")
    write_instances(out, instances)
    print(f"wrote {len(instances)} instances ({n} areas, {m} agents) to {out}")
    return 0


def train_config_from_args(args) -> TrainConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values = json.load(fh)
        known = {f.name for f in fields(TrainConfig)}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        if "model" in values:
            values["model"] = ModelConfig(**values["model"])
        if "cost" in values:
            values["cost"] = CostConfig(**values["cost"])
        for key in ("n_range", "m_range"):
            if key in values:
                values[key] = tuple(values[key])
    flag_map = {
        "algorithm": args.algorithm, "epochs": args.epochs, "instances_per_epoch": args.instances_per_epoch,
        "batch_size": args.batch_size, "learning_rate": args.lr, "optimizer": args.optimizer,
        "baseline": args.baseline, "seed": args.seed,
        "n_range": parse_range(args.areas) if args.areas else None,
        "m_range": parse_range(args.agents) if args.agents else None,
    }
    values.update({k: v for k, v in flag_map.items() if v is not None})
    if args.no_agents_encoder:
        values["agents_encoder_enabled"] = False
    if args.fixed_start_locations:
        values["varying_start_locations"] = False
    if args.no_wallclock:
        values["log_wallclock"] = False
    model = values.get("model", ModelConfig())
    model_flags = {"dim": args.dim, "layers": args.layers, "heads": args.heads}
    model_flags = {k: v for k, v in model_flags.items() if v is not None}
    if model_flags:
        values["model"] = ModelConfig(**{**model.to_dict(), **model_flags})
    return TrainConfig(**values)


def cmd_train(args) -> int:
    config = train_config_from_args(args)
    out = resolve(args.out, "run")
    result = train(config, out)
    print(f"trained {config.epochs} epochs; checkpoint at {out / 'checkpoint.bin'}; "
          f"{result.policy.parameter_count()} parameters")
    return 0


def cmd_solve(args) -> int:
    policy = load_checkpoint(args.checkpoint)
    policy.eval()
    cost_config = CostConfig(args.sweep_width, policy.config.patterns)
    instances = read_instances(args.instances)
    seeds = instance_seeds(args.seed, len(instances))
    solutions, times = [], []
    for i, inst in enumerate(instances):
        t0 = time.perf_counter()
        if args.mode == "greedy":
            sol, _ = rollout(inst, policy, "greedy", cost_config=cost_config)
        else:
            sol, _ = best_of_samples(inst, policy, args.samples, seed=seeds[i],
                                     cost_config=cost_config)
        times.append(time.perf_counter() - t0)
        solutions.append(sol)
    out = resolve(args.out, "solutions.jsonl")
    write_solutions(out, solutions)
    timing = Path(args.timing) if args.timing else out.with_suffix(".timing.csv")
    with open(timing, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id", "cost", "time_s"])
        for i, (sol, t) in enumerate(zip(solutions, times)):
            w.writerow([i, repr(sol.total_cost), f"{t:.6f}"])
    print(f"solved {len(solutions)} instances, mean cost {np.mean([s.total_cost for s in solutions]):.4f}, "
          f"mean time {np.mean(times):.4f}s -> {out}")
    return 0


def cmd_eval(args) -> int:
    records = read_solutions(args.solutions)
    costs = {(i if i is not None else k): s.total_cost for k, (i, s) in enumerate(records)}
    times = read_cost_csv(args.timing)[1] if args.timing else {}
    if args.reference in ("nn", "oracle"):
        if not args.instances:
            raise UsageError(f"--reference {args.reference} needs --instances")
        instances = read_instances(args.instances)
        references = reference_costs(instances, args.reference, CostConfig(args.sweep_width))
        ref_label = args.reference
    else:
        references, ref_times = read_cost_csv(args.reference)
        ref_label = Path(args.reference).stem
    report = gap_report(costs, references, times)
    prefix = resolve(args.out, "eval")
    report.write_csv(f"{prefix}_gaps.csv")
    text = summary_text(report, args.label, ref_label)
    if args.size:
        n, m = parse_range(args.size)
        if (n, m) in PUBLISHED_RESULTS:
            text += "\n\npublished means for this size:\n" + comparison_table(PUBLISHED_RESULTS[(n, m)])
    Path(f"{prefix}_summary.txt").write_text(text + "\n")
    print(text)
    return 0


def cmd_ablate(args) -> int:
    config = train_config_from_args(args)
    n, m = config.n_range[0], config.m_range[0]
    heldout = heldout_set(args.heldout, n, m)
    report = run_study(args.study, config, heldout, resolve(args.out, f"ablate_{args.study}"))
    first, second = report["arms"]
    print(f"{args.study}: {first} final {report[f'{first}_final_cost']:.4f}, "
          f"{second} final {report[f'{second}_final_cost']:.4f}, relative delta {report['relative_delta']:+.3%}")
    return 0


# ---------------------------------------------------------------------------


def _train_flags(p):
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--algorithm", choices=["reinforce", "ppo"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--instances-per-epoch", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--baseline", choices=["ema", "greedy-rollout"])
    p.add_argument("--areas", help="area-count range 'lo,hi' (single value for fixed)")
    p.add_argument("--agents", help="agent-count range 'lo,hi'")
    p.add_argument("--dim", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-agents-encoder", action="store_true")
    p.add_argument("--fixed-start-locations", action="store_true")
    p.add_argument("--no-wallclock", action="store_true", help="leave wallclock_s empty for byte-reproducible logs")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coverplan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write random instances")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1280)
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--areas", type=int)
    g.add_argument("--agents", type=int)
    g.add_argument("--adjacency", default="full", help="'full' or k for k-nearest neighbours")
    g.add_argument("--training-mode", action="store_true", help="require areas to be a multiple of agents")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a policy")
    _train_flags(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="decode instances with a trained policy")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--instances", required=True)
    s.add_argument("--mode", choices=["greedy", "sample"], default="greedy")
    s.add_argument("--samples", type=int, default=16)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sweep-width", type=float, default=CostConfig.sweep_width)
    s.add_argument("--timing")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="optimality gaps against a reference")
    e.add_argument("--solutions", required=True)
    e.add_argument("--reference", required=True, help="nn, oracle, or a CSV of instance_id,cost[,time_s]")
    e.add_argument("--instances")
    e.add_argument("--timing", help="timing CSV written by solve")
    e.add_argument("--label", default="policy")
    e.add_argument("--size", help="'areas,agents' to append published means for that size")
    e.add_argument("--sweep-width", type=float, default=CostConfig.sweep_width)
    e.add_argument("--out", help="output prefix")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="paired trainings differing in one switch")
    a.add_argument("--study", choices=sorted(STUDIES), required=True)
    a.add_argument("--heldout", type=int, default=500)
    _train_flags(a)
    a.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValidationError, ParseError, FeasibilityError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GenerationError, TrainingError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
