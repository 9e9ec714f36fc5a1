import math

import pytest
from hypothesis import given, strategies as st

from conftest import make_instance
from fsta.model import (
    DistanceMode,
    Node,
    Instance,
    Solution,
    Variant,
    ViolationKind,
    canonical_edge,
    check_feasibility,
    depot_edges,
    edge_diff,
    edge_set,
    evaluate_objective,
    route_schedule,
)


def test_euclidean_distance():
    inst = make_instance(Variant.CVRP, [(0, 0), (3, 4)], [0, 1], 10.0)
    assert inst.distance(0, 1) == 5.0
    assert inst.distance(1, 1) == 0.0


def test_rounded_int_distance():
    inst = make_instance(
        Variant.CVRP, [(0, 0), (1, 1)], [0, 1], 10.0, mode=DistanceMode.ROUNDED_INT
    )
    assert inst.distance(0, 1) == 1.0  # sqrt(2) rounds to 1


def test_objective_sums_route_legs(square_cvrp):
    sol = Solution(((1, 2), (3, 4)))
    expected = (
        square_cvrp.distance(0, 1)
        + square_cvrp.distance(1, 2)
        + square_cvrp.distance(2, 0)
        + square_cvrp.distance(0, 3)
        + square_cvrp.distance(3, 4)
        + square_cvrp.distance(4, 0)
    )
    assert evaluate_objective(square_cvrp, sol) == pytest.approx(expected)


def test_schedule_waits_for_window_open():
    inst = make_instance(
        Variant.VRPTW,
        [(0, 0), (1, 0)],
        [0, 1],
        10.0,
        services=[0.0, 0.5],
        tws=[(0, math.inf), (5.0, 9.0)],
    )
    sched = route_schedule(inst, (1,))
    arrival, start = sched[0]
    assert arrival == pytest.approx(1.0)
    assert start == pytest.approx(5.0)


def test_capacity_violation_detected(square_cvrp):
    sol = Solution(((1, 2, 3, 4, 1),))  # duplicate also trips coverage
    with pytest.raises(ValueError):
        sol.validate_structure(square_cvrp)
    report = check_feasibility(square_cvrp, Solution(((1, 2, 3, 4),)))
    assert report.feasible  # load 4 == capacity
    tight = make_instance(
        Variant.CVRP,
        [(0.5, 0.5), (0, 0), (1, 0), (1, 1), (0, 1)],
        [0, 1, 1, 1, 1],
        3.0,
    )
    report = check_feasibility(tight, Solution(((1, 2, 3, 4),)))
    assert not report.feasible
    assert any(v[1] is ViolationKind.CAPACITY_EXCEEDED for v in report.violations)


def test_time_window_violation():
    inst = make_instance(
        Variant.VRPTW,
        [(0, 0), (2, 0), (1, 0)],
        [0, 1, 1],
        10.0,
        tws=[(0, math.inf), (0.0, 10.0), (0.0, 1.5)],
    )
    report = check_feasibility(inst, Solution(((1, 2),)))
    assert not report.feasible
    assert any(v[1] is ViolationKind.TIME_WINDOW_MISSED for v in report.violations)
    report = check_feasibility(inst, Solution(((2, 1),)))
    assert report.feasible


def test_backhaul_order():
    inst = make_instance(
        Variant.VRPB,
        [(0, 0), (1, 0), (2, 0)],
        [0, 1, 1],
        10.0,
        backhauls=[False, True, False],
    )
    report = check_feasibility(inst, Solution(((1, 2),)))
    assert any(v[1] is ViolationKind.BACKHAUL_ORDER for v in report.violations)
    assert check_feasibility(inst, Solution(((2, 1),))).feasible


def test_pdp_load_swing():
    coords = [(0, 0), (1, 0), (2, 0), (3, 0)]
    inst = make_instance(Variant.ONE_PDP, coords, [0, 2, -4, 4], 4.0)
    # prefix loads 2, -2, 2: swing 4 fits capacity 4 with a free start load
    assert check_feasibility(inst, Solution(((1, 2, 3),))).feasible
    # order 1, 3, 2 gives prefix loads 2, 6, 2: swing 6 exceeds capacity
    assert not check_feasibility(inst, Solution(((1, 3, 2),))).feasible


def test_coverage_violation(square_cvrp):
    report = check_feasibility(square_cvrp, Solution(((1, 2),)))
    assert any(v[1] is ViolationKind.CUSTOMER_COVERAGE for v in report.violations)


def test_instance_validation_rejects_bad_depot():
    with pytest.raises(ValueError):
        Instance(
            Variant.CVRP,
            [Node(0, 0, demand=1.0), Node(1, 0, demand=1.0)],
            10.0,
            DistanceMode.EUCLIDEAN,
        )


def test_edge_helpers():
    sol = Solution(((1, 2, 3), (4,)))
    es = edge_set(sol)
    assert es == {(0, 1), (1, 2), (2, 3), (0, 3), (0, 4)}
    assert depot_edges(sol) == {(0, 1), (0, 3), (0, 4)}
    other = Solution(((1, 3, 2), (4,)))
    assert edge_diff(sol, other) == {(1, 2), (0, 3), (1, 3), (0, 2)}
    with pytest.raises(ValueError):
        canonical_edge(2, 2)


@given(st.permutations(list(range(1, 8))), st.integers(1, 3))
def test_edge_set_counts(perm, n_routes):
    cut = max(1, len(perm) // n_routes)
    routes = [tuple(perm[i : i + cut]) for i in range(0, len(perm), cut)]
    sol = Solution(tuple(routes))
    es = edge_set(sol)
    assert all(i < j for i, j in es)
    assert len(es) <= sum(len(r) + 1 for r in routes)
