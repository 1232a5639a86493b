"""Optimality-gap reports against heuristic, exact or imported reference costs."""

from __future__ import annotations

import csv
import logging
import statistics
from dataclasses import dataclass

import numpy as np

from .baselines import brute_force_solve, nearest_neighbor_solve
from .instance import CostConfig, Instance

log = logging.getLogger(__name__)

# Published mean tour lengths [m] and mean solve times [s] per (areas, agents)
# for third-party solvers and the reference learned policy; comparison constants only.
PUBLISHED_RESULTS = {
    (24, 4): {"LKH3": (5.9028, 1.159), "CPLEX": (8.3154, 123.75), "learned": (5.0628, 0.0029)},
    (40, 5): {"LKH3": (7.4732, 2.276), "CPLEX": (11.0650, 101.25), "learned": (6.5128, 0.0061)},
    (72, 8): {"LKH3": (11.5958, 46.097), "CPLEX": (12.7275, 123.75), "learned": (9.1108, 0.0166)},
    (180, 12): {"LKH3": (24.3931, 152.20), "CPLEX": (20.3547, 405.0), "learned": (14.8783, 0.0872)},
}

PRESETS = {"in1": (40, 5), "in2": (72, 8), "out1": (24, 4), "out2": (120, 12), "out2-180": (180, 12)}


def optimality_gap(cost: float, reference: float) -> float:
    return (cost - reference) / reference


def reference_costs(instances: list[Instance], kind: str, cost_config: CostConfig = CostConfig()) -> dict[int, float]:
    if kind == "nn":
        solver = lambda inst: nearest_neighbor_solve(inst, cost_config)  # noqa: E731
    elif kind == "oracle":
        solver = lambda inst: brute_force_solve(inst, cost_config)  # noqa: E731
    else:
        raise ValueError(f"unknown reference solver {kind!r}")
    return {i: solver(inst).total_cost for i, inst in enumerate(instances)}


def read_cost_csv(path) -> tuple[dict[int, float], dict[int, float]]:
    """Read ``instance_id,cost[,time_s]`` rows; returns (costs, times)."""
    costs, times = {}, {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"instance_id", "cost"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns instance_id,cost[,time_s]")
        for row in reader:
            i = int(row["instance_id"])
            costs[i] = float(row["cost"])
            if row.get("time_s"):
                times[i] = float(row["time_s"])
    return costs, times


@dataclass
class GapReport:
    rows: list[dict]
    missing: list[int]

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r["gap"] for r in self.rows])

    def summary(self) -> dict:
        gaps = self.gaps
        times = [r["time_s"] for r in self.rows if r.get("time_s") is not None]
        return {
            "count": len(self.rows),
            "missing": len(self.missing),
            "mean_gap": float(gaps.mean()) if len(gaps) else float("nan"),
            "median_gap": float(np.median(gaps)) if len(gaps) else float("nan"),
            "std_gap": float(gaps.std()) if len(gaps) else float("nan"),
            "mean_cost": float(np.mean([r["cost"] for r in self.rows])) if self.rows else float("nan"),
            "mean_reference": float(np.mean([r["reference"] for r in self.rows])) if self.rows else float("nan"),
            "mean_time_s": statistics.fmean(times) if times else None,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance_id", "cost", "reference", "gap", "time_s"])
            for r in self.rows:
                w.writerow([r["instance_id"], repr(r["cost"]), repr(r["reference"]), repr(r["gap"]),
                            "" if r.get("time_s") is None else repr(r["time_s"])])


def gap_report(costs: dict[int, float], references: dict[int, float], times: dict[int, float] | None = None) -> GapReport:
    """Per-instance gaps (cost - ref) / ref; instances lacking a reference are excluded with a warning."""
    times = times or {}
    rows, missing = [], []
    for i in sorted(costs):
        if i not in references:
            missing.append(i)
            continue
        rows.append({"instance_id": i, "cost": costs[i], "reference": references[i],
                     "gap": optimality_gap(costs[i], references[i]), "time_s": times.get(i)})
    if missing:
        log.warning("no reference cost for instances %s; excluded from the report", missing)
    return GapReport(rows, missing)


def format_table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[c if isinstance(c, str) else f"{c:.4f}" if isinstance(c, float) else str(c) for c in r]
                        for r in rows]
    widths = [max(len(row[k]) for row in cells) for k in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def summary_text(report: GapReport, label: str = "solver", reference_label: str = "reference") -> str:
    s = report.summary()
    header = ["solver", "mu [m]", "mu_time [s]", "mean gap", "median gap", "std gap", "count"]
    mt = "-" if s["mean_time_s"] is None else s["mean_time_s"]
    rows = [
        [label, s["mean_cost"], mt, s["mean_gap"], s["median_gap"], s["std_gap"], s["count"]],
        [reference_label, s["mean_reference"], "-", 0.0, 0.0, 0.0, s["count"]],
    ]
    text = format_table(header, rows)
    if report.missing:
        text += f"\nexcluded (no reference): {report.missing}"
    return text


def comparison_table(columns: dict[str, tuple[float, float | None]]) -> str:
    """One row per solver with mean tour length and mean time, as in a published comparison."""
    rows = [[name, mu, "-" if t is None else t] for name, (mu, t) in columns.items()]
    return format_table(["solver", "mu [m]", "mu_time [s]"], rows)
