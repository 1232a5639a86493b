import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverplan.instance import (CostConfig, FeasibilityError, GenerationError, Instance, ParseError, ScanAction,
                                Solution, ValidationError, build_adjacency, cost_of_solution, generate_instance,
                                parse_instance, read_instances, scan_path, serialize_instance, validate_instance,
                                write_instances)


def square(center, radius=0.02, agents=((0.0, 0.0),)):
    return Instance(agents=list(agents), centers=[center], radii=[radius])


# --- generation --------------------------------------------------------------

def test_generate_benchmark_size():
    inst = generate_instance(7, 40, 5)
    assert inst.n == 40 and inst.m == 5
    assert inst.corners.shape == (40, 4, 2)
    validate_instance(inst)


def test_generate_minimal():
    inst = generate_instance(0, 1, 1)
    assert inst.n == 1 and inst.m == 1
    validate_instance(inst)


def test_generation_is_deterministic():
    a = serialize_instance(generate_instance(3, 24, 4))
    b = serialize_instance(generate_instance(3, 24, 4))
    assert a == b
    assert a != serialize_instance(generate_instance(4, 24, 4))


def test_generation_bounds_over_many_instances():
    for seed in range(1000):
        inst = generate_instance(seed, 24, 4)
        validate_instance(inst)
        assert np.all((inst.radii >= 0.01) & (inst.radii <= 0.03))
        assert len(np.unique(inst.agents, axis=0)) == 4


def test_generation_failure_names_entity():
    with pytest.raises(GenerationError, match=r"area \d+"):
        generate_instance(0, 2000, 2, max_attempts=5)


def test_fixed_agents_are_kept():
    agents = np.array([[0.5, 0.5], [0.1, 0.9]])
    inst = generate_instance(5, 10, 2, agents=agents)
    assert np.array_equal(inst.agents, agents)
    validate_instance(inst)


def test_corner_order_counterclockwise():
    inst = square((0.5, 0.5), 0.02)
    expected = [[0.48, 0.48], [0.52, 0.48], [0.52, 0.52], [0.48, 0.52]]
    np.testing.assert_allclose(inst.corners[0], expected)
    assert inst.features.shape == (1, 8)


# --- adjacency ---------------------------------------------------------------

def test_knn_adjacency_collinear():
    centers = [[0.0, 0.5], [0.1, 0.5], [0.3, 0.5]]
    adj = build_adjacency(centers, 1)
    edges = {(i, j) for i in range(3) for j in range(i + 1, 3) if adj[i, j] > 0}
    assert edges == {(0, 1), (1, 2)}
    assert adj[0, 1] == pytest.approx(0.1) and adj[1, 2] == pytest.approx(0.2)
    np.testing.assert_array_equal(adj, adj.T)


def test_full_adjacency_positive_off_diagonal():
    inst = generate_instance(1, 6, 2)
    adj = build_adjacency(inst.centers, "full")
    off = ~np.eye(6, dtype=bool)
    assert np.all(adj[off] > 0) and np.all(np.diag(adj) == 0)


def test_single_area_adjacency():
    np.testing.assert_array_equal(build_adjacency([[0.5, 0.5]], "full"), np.zeros((1, 1)))


# --- scan geometry -------------------------------------------------------------

def test_scan_single_lane():
    inst = square((0.5, 0.5), 0.02)
    cfg = CostConfig(sweep_width=0.04)
    for k, opposite in [(0, 1), (1, 0), (2, 3), (3, 2)]:
        length, end = scan_path(inst, 0, k, 0, cfg)
        assert length == pytest.approx(0.04)
        np.testing.assert_allclose(end, inst.corners[0, opposite])


def test_scan_two_lanes():
    inst = square((0.5, 0.5), 0.02)
    length, end = scan_path(inst, 0, 0, 0, CostConfig(sweep_width=0.02))
    assert length == pytest.approx(0.12)
    # same x, opposite y
    np.testing.assert_allclose(end, inst.corners[0, 3])
    _, end_y = scan_path(inst, 0, 0, 1, CostConfig(sweep_width=0.02))
    np.testing.assert_allclose(end_y, inst.corners[0, 1])


def test_scan_three_lanes():
    inst = square((0.5, 0.5), 0.02)
    length, end = scan_path(inst, 0, 0, 0, CostConfig(sweep_width=0.015))
    assert length == pytest.approx(0.16)
    # odd lane count: opposite x and opposite y
    np.testing.assert_allclose(end, inst.corners[0, 2])


@settings(max_examples=200, deadline=None)
@given(radius=st.floats(0.01, 0.03), width=st.floats(0.002, 0.1), corner=st.integers(0, 3), pattern=st.integers(0, 1))
def test_scan_end_is_corner_and_length_bounded(radius, width, corner, pattern):
    inst = square((0.5, 0.5), radius)
    length, end = scan_path(inst, 0, corner, pattern, CostConfig(sweep_width=width))
    assert any(np.array_equal(end, c) for c in inst.corners[0])
    assert length >= 2 * radius - 1e-15


# --- objective -------------------------------------------------------------------

def test_cost_single_lane_example():
    inst = square((0.12, 0.12), 0.02)
    cost = cost_of_solution(inst, Solution([[ScanAction(0, 0, 0)]], 0.0), CostConfig(sweep_width=0.04))
    assert cost == pytest.approx(math.sqrt(0.02) + 0.04, abs=1e-12)
    assert cost == pytest.approx(0.181421, abs=1e-6)


def test_cost_empty():
    inst = Instance(agents=[[0.0, 0.0]], centers=np.empty((0, 2)), radii=np.empty(0))
    assert cost_of_solution(inst, [[]]) == 0.0


def test_cost_rejects_duplicates_and_missing():
    inst = generate_instance(2, 3, 1)
    with pytest.raises(FeasibilityError) as err:
        cost_of_solution(inst, [[ScanAction(0, 0, 0), ScanAction(0, 1, 0), ScanAction(1, 0, 0)]])
    assert err.value.duplicates == [0] and err.value.missing == [2]


def test_cost_invariant_under_agent_relabeling():
    inst = generate_instance(9, 6, 3)
    tours = [[ScanAction(0, 0, 0), ScanAction(3, 2, 1)], [ScanAction(1, 1, 0), ScanAction(4, 3, 0)],
             [ScanAction(2, 2, 1), ScanAction(5, 0, 1)]]
    perm = [2, 0, 1]
    relabeled = Instance(inst.agents[perm], inst.centers, inst.radii)
    assert cost_of_solution(relabeled, [tours[p] for p in perm]) == pytest.approx(cost_of_solution(inst, tours))


# --- serialization -----------------------------------------------------------------

def test_round_trip(tmp_path):
    inst = generate_instance(7, 40, 5)
    assert parse_instance(serialize_instance(inst)) == inst
    knn = generate_instance(8, 12, 3, adjacency_mode=3)
    path = tmp_path / "x.jsonl"
    write_instances(path, [inst, knn])
    assert read_instances(path) == [inst, knn]


def test_truncated_record():
    text = serialize_instance(generate_instance(7, 5, 2))
    with pytest.raises(ParseError, match="line 4"):
        parse_instance(text[: len(text) // 2], lineno=4)


def test_missing_field():
    with pytest.raises(ParseError, match="'areas'"):
        parse_instance('{"seed":1,"m":1,"n":1,"agents":[[0.1,0.1]]}')


def test_radius_out_of_range():
    inst = Instance(agents=[[0.1, 0.1]], centers=[[0.5, 0.5]], radii=[0.5])
    with pytest.raises(ValidationError, match="radius"):
        parse_instance(serialize_instance(inst))


def test_overlap_rejected():
    inst = Instance(agents=[[0.1, 0.1]], centers=[[0.5, 0.5], [0.52, 0.5]], radii=[0.02, 0.02])
    with pytest.raises(ValidationError, match="overlaps"):
        validate_instance(inst)
