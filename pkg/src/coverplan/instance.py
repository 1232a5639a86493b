"""Problem domain: square areas, agents, boustrophedon scans and the tour-length objective."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

RADIUS_MIN = 0.01
RADIUS_MAX = 0.03
MAX_ATTEMPTS = 10_000
FEATURE_DIM = 8

# counterclockwise from (-,-): (-,-), (+,-), (+,+), (-,+)
CORNER_SIGNS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
# corner index after mirroring along x / along y
_FLIP_X = (1, 0, 3, 2)
_FLIP_Y = (3, 2, 1, 0)


class GenerationError(RuntimeError):
    pass


class FeasibilityError(ValueError):
    def __init__(self, message, missing=(), duplicates=()):
        super().__init__(message)
        self.missing = list(missing)
        self.duplicates = list(duplicates)


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class CostConfig:
    sweep_width: float = 0.02
    patterns: int = 2

    def __post_init__(self):
        if not self.sweep_width > 0:
            raise ValueError(f"sweep_width must be positive, got {self.sweep_width}")
        if self.patterns not in (1, 2):
            # only the two axis-aligned sweep directions are defined
            raise ValueError(f"patterns must be 1 or 2, got {self.patterns}")


class ScanAction(NamedTuple):
    area: int
    corner: int
    pattern: int


@dataclass
class Solution:
    tours: list[list[ScanAction]]
    total_cost: float

    def actions(self) -> Iterator[ScanAction]:
        for tour in self.tours:
            yield from tour


AdjacencyMode = Union[str, int]


@dataclass(eq=False)
class Instance:
    """A map of ``m`` agent start points and ``n`` axis-aligned square areas.

    ``agents`` is (m, 2), ``centers`` is (n, 2), ``radii`` is (n,) half-side lengths.
    The adjacency matrix is derived from the centers according to ``adjacency_mode``
    ("full" or an integer k for symmetrized k-nearest neighbours).
    """

    agents: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    seed: int | None = None
    adjacency_mode: AdjacencyMode = "full"
    adjacency: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.agents = np.asarray(self.agents, dtype=np.float64).reshape(-1, 2)
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        self.radii = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        if len(self.radii) != len(self.centers):
            raise ValidationError("centers and radii lengths differ")
        if self.adjacency is None:
            self.adjacency = build_adjacency(self.centers, self.adjacency_mode)

    @property
    def n(self) -> int:
        return len(self.centers)

    @property
    def m(self) -> int:
        return len(self.agents)

    @property
    def corners(self) -> np.ndarray:
        """(n, 4, 2) corner coordinates in the fixed counterclockwise order."""
        return self.centers[:, None, :] + self.radii[:, None, None] * CORNER_SIGNS[None]

    @property
    def features(self) -> np.ndarray:
        """(n, 8) flattened corner coordinates, the per-area input features."""
        return self.corners.reshape(self.n, FEATURE_DIM)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.adjacency_mode == other.adjacency_mode
            and np.array_equal(self.agents, other.agents)
            and np.array_equal(self.centers, other.centers)
            and np.array_equal(self.radii, other.radii)
            and np.array_equal(self.adjacency, other.adjacency)
        )


# ---------------------------------------------------------------------------
# geometry


def _area_overlaps(center, radius, centers, radii) -> bool:
    if len(centers) == 0:
        return False
    reach = radius + radii
    d = np.abs(centers - center)
    return bool(np.any((d[:, 0] < reach) & (d[:, 1] < reach)))


def _covers_point(center, radius, points) -> bool:
    if len(points) == 0:
        return False
    d = np.abs(points - center)
    return bool(np.any((d[:, 0] <= radius) & (d[:, 1] <= radius)))


def generate_instance(
    seed: int,
    n: int,
    m: int,
    agents: np.ndarray | None = None,
    adjacency_mode: AdjacencyMode = "full",
    max_attempts: int = MAX_ATTEMPTS,
) -> Instance:
    """Rejection-sample ``m`` agents and ``n`` non-overlapping squares in the unit square.

    Passing ``agents`` fixes the start positions (used for fixed-start training);
    the areas are then still drawn from ``seed``.
    """
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)

    if agents is None:
        placed = np.empty((0, 2))
        for a in range(m):
            for _ in range(max_attempts):
                p = rng.uniform(0.0, 1.0, size=2)
                if not np.any(np.all(placed == p, axis=1)):
                    break
            else:
                raise GenerationError(f"could not place agent {a} after {max_attempts} attempts")
            placed = np.vstack([placed, p])
        agents = placed
    else:
        agents = np.asarray(agents, dtype=np.float64).reshape(m, 2)

    centers = np.empty((0, 2))
    radii = np.empty(0)
    for i in range(n):
        for _ in range(max_attempts):
            c = rng.uniform(0.0, 1.0, size=2)
            r = rng.uniform(RADIUS_MIN, RADIUS_MAX)
            if np.any(c - r < 0.0) or np.any(c + r > 1.0):
                continue
            if _area_overlaps(c, r, centers, radii) or _covers_point(c, r, agents):
                continue
            break
        else:
            raise GenerationError(f"could not place area {i} after {max_attempts} attempts")
        centers = np.vstack([centers, c])
        radii = np.append(radii, r)

    return Instance(agents, centers, radii, seed=seed, adjacency_mode=adjacency_mode)


def build_adjacency(centers: np.ndarray, k_nearest: AdjacencyMode = "full") -> np.ndarray:
    """Distance-weighted area graph: complete, or symmetrized k-nearest neighbours."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    n = len(centers)
    dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    if k_nearest == "full" or n <= 1:
        keep = ~np.eye(n, dtype=bool)
    else:
        k = int(k_nearest)
        if not 1 <= k <= n - 1:
            raise ValueError(f"k_nearest must lie in [1, {n - 1}], got {k}")
        order = np.argsort(dist + np.diag(np.full(n, np.inf)), axis=1, kind="stable")
        keep = np.zeros((n, n), dtype=bool)
        keep[np.arange(n)[:, None], order[:, :k]] = True
        keep |= keep.T
    return np.where(keep, dist, 0.0)


def lane_count(side: float, sweep_width: float) -> int:
    # 1e-9 guards against s/w landing just above an integer through rounding
    return max(1, math.ceil(side / sweep_width - 1e-9))


def scan_length(radius: float, cost_config: CostConfig) -> float:
    side = 2.0 * radius
    lanes = lane_count(side, cost_config.sweep_width)
    if lanes == 1:
        return side
    gap = side / (lanes - 1)
    return lanes * side + (lanes - 1) * gap


def scan_end_corner(corner: int, pattern: int, lanes: int) -> int:
    """Corner index where a boustrophedon scan ends.

    Pattern 0 runs lanes along x stacked in y, pattern 1 the transpose. The
    sweep axis coordinate flips on an odd lane count; the stacking axis flips
    whenever there is more than one lane.
    """
    along, across = (_FLIP_X, _FLIP_Y) if pattern == 0 else (_FLIP_Y, _FLIP_X)
    end = corner
    if lanes % 2 == 1:
        end = along[end]
    if lanes > 1:
        end = across[end]
    return end


def scan_path(instance: Instance, area: int, corner: int, pattern: int, cost_config: CostConfig):
    """Return ``(length, end_point)`` of scanning ``area`` from ``corner`` with ``pattern``."""
    if not 0 <= corner < 4:
        raise IndexError(f"corner {corner} out of range")
    if not 0 <= pattern < cost_config.patterns:
        raise IndexError(f"pattern {pattern} out of range")
    r = float(instance.radii[area])
    lanes = lane_count(2.0 * r, cost_config.sweep_width)
    end = scan_end_corner(corner, pattern, lanes)
    return scan_length(r, cost_config), instance.corners[area, end].copy()


def scan_tables(instance: Instance, cost_config: CostConfig):
    """Per-area scan lengths (n,) and end-corner lookup (n, 4, p)."""
    lengths = np.array([scan_length(r, cost_config) for r in instance.radii])
    ends = np.empty((instance.n, 4, cost_config.patterns), dtype=np.int64)
    for j, r in enumerate(instance.radii):
        lanes = lane_count(2.0 * r, cost_config.sweep_width)
        for k in range(4):
            for z in range(cost_config.patterns):
                ends[j, k, z] = scan_end_corner(k, z, lanes)
    return lengths, ends


# ---------------------------------------------------------------------------
# objective


def check_feasible(n: int, tours: Iterable[Sequence[ScanAction]]) -> None:
    counts = np.zeros(n, dtype=np.int64)
    out_of_range = []
    for tour in tours:
        for action in tour:
            if 0 <= action.area < n:
                counts[action.area] += 1
            else:
                out_of_range.append(action.area)
    missing = np.flatnonzero(counts == 0).tolist()
    duplicates = np.flatnonzero(counts > 1).tolist()
    if missing or duplicates or out_of_range:
        raise FeasibilityError(
            f"infeasible solution: missing areas {missing}, duplicated areas {duplicates}"
            + (f", unknown areas {out_of_range}" if out_of_range else ""),
            missing=missing,
            duplicates=duplicates + out_of_range,
        )


def tour_costs(instance: Instance, tours: Sequence[Sequence[ScanAction]], cost_config: CostConfig) -> list[float]:
    corners = instance.corners
    lengths, ends = scan_tables(instance, cost_config)
    costs = []
    for agent, tour in enumerate(tours):
        pos = instance.agents[agent]
        total = 0.0
        for j, k, z in tour:
            if not 0 <= k < 4 or not 0 <= z < cost_config.patterns:
                raise IndexError(f"action {(j, k, z)} has an out-of-range corner or pattern")
            total += float(np.hypot(*(corners[j, k] - pos))) + lengths[j]
            pos = corners[j, ends[j, k, z]]
        costs.append(total)
    return costs


def cost_of_solution(instance: Instance, solution, cost_config: CostConfig = CostConfig()) -> float:
    """Total travel plus scan length over all agents. Accepts a Solution or a list of tours."""
    tours = solution.tours if isinstance(solution, Solution) else solution
    if len(tours) > instance.m:
        raise FeasibilityError(f"{len(tours)} tours for {instance.m} agents")
    check_feasible(instance.n, tours)
    return float(sum(tour_costs(instance, tours, cost_config)))


# ---------------------------------------------------------------------------
# serialization: JSON lines, one record per instance / solution


def instance_record(instance: Instance) -> dict:
    mode = instance.adjacency_mode
    return {
        "seed": instance.seed,
        "m": instance.m,
        "n": instance.n,
        "agents": instance.agents.tolist(),
        "areas": np.column_stack([instance.centers, instance.radii]).tolist(),
        "adjacency_mode": "full" if mode == "full" else "knn",
        "k": None if mode == "full" else int(mode),
    }


def serialize_instance(instance: Instance) -> str:
    return json.dumps(instance_record(instance), separators=(",", ":"))


def validate_instance(instance: Instance) -> None:
    """Check the invariants of a generated instance; raises ValidationError."""
    if instance.m < 1:
        raise ValidationError("instance needs at least one agent")
    pts = np.concatenate([instance.agents, instance.centers])
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(instance.radii)):
        raise ValidationError("non-finite coordinate")
    for i, r in enumerate(instance.radii):
        if not RADIUS_MIN <= r <= RADIUS_MAX:
            raise ValidationError(f"area {i}: radius {r} outside [{RADIUS_MIN}, {RADIUS_MAX}]")
    if np.any(instance.agents < 0) or np.any(instance.agents > 1):
        raise ValidationError("agent outside the unit square")
    corners = instance.corners
    if np.any(corners < 0) or np.any(corners > 1):
        bad = np.flatnonzero(np.any((corners < 0) | (corners > 1), axis=(1, 2)))
        raise ValidationError(f"areas {bad.tolist()} extend outside the unit square")
    for i in range(instance.n):
        c, r = instance.centers[i], instance.radii[i]
        if _area_overlaps(c, r, instance.centers[i + 1:], instance.radii[i + 1:]):
            raise ValidationError(f"area {i} overlaps another area")
        if _covers_point(c, r, instance.agents):
            raise ValidationError(f"area {i} covers an agent start point")
    adj = instance.adjacency
    if not np.array_equal(adj, adj.T) or np.any(np.diag(adj) != 0) or np.any(adj < 0):
        raise ValidationError("adjacency must be symmetric, nonnegative, zero diagonal")


def _field(record, name, lineno):
    try:
        return record[name]
    except (KeyError, TypeError):
        raise ParseError(f"line {lineno}: missing field {name!r}") from None


def parse_instance(text: str, lineno: int = 1, validate: bool = True) -> Instance:
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: malformed record ({exc.msg} at column {exc.colno})") from None
    if not isinstance(record, dict):
        raise ParseError(f"line {lineno}: record must be an object")
    seed = _field(record, "seed", lineno)
    m = _field(record, "m", lineno)
    n = _field(record, "n", lineno)
    try:
        agents = np.array(_field(record, "agents", lineno), dtype=np.float64).reshape(-1, 2)
        areas = np.array(_field(record, "areas", lineno), dtype=np.float64).reshape(-1, 3)
    except ValueError as exc:
        raise ParseError(f"line {lineno}: bad coordinate array ({exc})") from None
    if len(agents) != m:
        raise ParseError(f"line {lineno}: field 'agents' has {len(agents)} entries, expected m={m}")
    if len(areas) != n:
        raise ParseError(f"line {lineno}: field 'areas' has {len(areas)} entries, expected n={n}")
    mode = _field(record, "adjacency_mode", lineno)
    if mode == "full":
        adjacency_mode: AdjacencyMode = "full"
    elif mode == "knn":
        adjacency_mode = int(_field(record, "k", lineno))
    else:
        raise ParseError(f"line {lineno}: field 'adjacency_mode' must be 'full' or 'knn', got {mode!r}")
    instance = Instance(agents, areas[:, :2], areas[:, 2], seed=seed, adjacency_mode=adjacency_mode)
    if validate:
        try:
            validate_instance(instance)
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return instance


def write_instances(path, instances: Iterable[Instance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(serialize_instance(inst) + "\n")


def read_instances(path, validate: bool = True) -> list[Instance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                out.append(parse_instance(line, lineno, validate=validate))
    return out


def serialize_solution(solution: Solution, instance_id: int | None = None) -> str:
    record = {
        "instance_id": instance_id,
        "tours": [[list(map(int, a)) for a in tour] for tour in solution.tours],
        "total_cost": float(solution.total_cost),
    }
    return json.dumps(record, separators=(",", ":"))


def parse_solution(text: str, lineno: int = 1) -> tuple[int | None, Solution]:
    try:
        record = json.loads(text)
        tours = [[ScanAction(*map(int, a)) for a in tour] for tour in record["tours"]]
        return record.get("instance_id"), Solution(tours, float(record["total_cost"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"line {lineno}: malformed solution record ({exc})") from None


def write_solutions(path, solutions: Iterable[Solution], ids: Iterable[int] | None = None) -> None:
    solutions = list(solutions)
    ids = list(range(len(solutions))) if ids is None else list(ids)
    with open(path, "w", encoding="utf-8") as fh:
        for i, sol in zip(ids, solutions):
            fh.write(serialize_solution(sol, i) + "\n")


def read_solutions(path) -> list[tuple[int | None, Solution]]:
    with open(path, encoding="utf-8") as fh:
        return [parse_solution(line, k) for k, line in enumerate(fh, start=1) if line.strip()]
