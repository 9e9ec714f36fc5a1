import math
import random

import pytest

from conftest import make_instance
from fsta.backbone import MoveBudget, ProblemView, solve_warm
from fsta.gen_io import GenSpec, SweepParams, generate, initial_solution_sweep
from fsta.model import (
    DistanceMode,
    Solution,
    Variant,
    check_feasibility,
    depot_edges,
    edge_set,
    evaluate_objective,
)
from fsta.reduction import (
    HyperKind,
    Segment,
    aggregate_segment,
    build_reduced,
    partition_segments,
    recover,
    reduced_objective,
    verify_theorem,
)
from fsta.segmenter import RandomPolicy


def _line_instance(variant, demands, **kw):
    coords = [(float(i), 0.0) for i in range(len(demands))]
    return make_instance(variant, coords, demands, kw.pop("capacity", 100.0), **kw)


# ---------------------------------------------------------------------------
# Partitioning


def test_partition_cut_in_middle():
    inst = _line_instance(Variant.CVRP, [0, 1, 1, 1, 1])
    sol = Solution(((1, 2, 3, 4),))
    unstable = frozenset({(2, 3)}) | depot_edges(sol)
    segs = partition_segments(sol, unstable, inst)
    assert [s.node_indices for s in segs] == [(1, 2), (3, 4)]


def test_partition_all_edges_unstable():
    inst = _line_instance(Variant.CVRP, [0, 1, 1, 1])
    sol = Solution(((1, 2), (3,)))
    segs = partition_segments(sol, edge_set(sol), inst)
    assert sorted(s.node_indices for s in segs) == [(1,), (2,), (3,)]


def test_partition_depot_edges_only():
    inst = _line_instance(Variant.CVRP, [0, 1, 1, 1])
    sol = Solution(((1, 2), (3,)))
    segs = partition_segments(sol, depot_edges(sol), inst)
    assert sorted(s.node_indices for s in segs) == [(1, 2), (3,)]


def test_partition_rejects_foreign_edge():
    sol = Solution(((1, 2),))
    with pytest.raises(ValueError):
        partition_segments(sol, frozenset({(1, 5)}) | depot_edges(sol))


def test_partition_cuts_vrpb_boundary():
    inst = _line_instance(
        Variant.VRPB, [0, 1, 1, 1], backhauls=[False, False, True, True]
    )
    sol = Solution(((1, 2, 3),))
    segs = partition_segments(sol, depot_edges(sol), inst)
    assert sorted(s.node_indices for s in segs) == [(1,), (2, 3)]


# ---------------------------------------------------------------------------
# Aggregation


def test_cvrp_pair_demand_split():
    inst = _line_instance(Variant.CVRP, [0, 2, 3, 4])
    seg = Segment(0, 0, 2, (1, 2, 3))
    hypers = aggregate_segment(inst, seg)
    assert [h.kind for h in hypers] == [HyperKind.PAIR_HEAD, HyperKind.PAIR_TAIL]
    assert [h.demand for h in hypers] == [4.5, 4.5]


def test_singleton_passthrough():
    inst = _line_instance(Variant.CVRP, [0, 2])
    hypers = aggregate_segment(inst, Segment(0, 0, 0, (1,)))
    assert len(hypers) == 1 and hypers[0].kind is HyperKind.PASSTHROUGH
    assert hypers[0].demand == 2


def test_vrptw_single_backward_recursion():
    # A(tw=[2,10], s=1) at x=1, B(tw=[5,9], s=1) at x=3 -> dist(A,B)=2.
    # Frozen oracle (forward simulation over arrival grid): the aggregate
    # clears in max(t, 2) - t + 4 time units, window [2, 6], service 4.
    inst = make_instance(
        Variant.VRPTW,
        [(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)],
        [0, 1, 1],
        10.0,
        services=[0.0, 1.0, 1.0],
        tws=[(0, math.inf), (2.0, 10.0), (5.0, 9.0)],
    )
    hypers = aggregate_segment(inst, Segment(0, 0, 1, (1, 2)))
    assert len(hypers) == 1
    h = hypers[0]
    assert h.kind is HyperKind.SINGLE
    assert h.tw_open == pytest.approx(2.0)
    assert h.tw_close == pytest.approx(6.0)
    assert h.service_time == pytest.approx(4.0)
    assert h.in_xy == (1.0, 0.0) and h.out_xy == (3.0, 0.0)


def test_vrptw_pair_on_temporal_infeasibility():
    # B closes before A opens plus travel: aggregated window is empty.
    inst = make_instance(
        Variant.VRPTW,
        [(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)],
        [0, 1, 1],
        10.0,
        services=[0.0, 1.0, 1.0],
        tws=[(0, math.inf), (8.0, 10.0), (5.0, 9.0)],
    )
    hypers = aggregate_segment(inst, Segment(0, 0, 1, (1, 2)))
    assert [h.kind for h in hypers] == [HyperKind.PAIR_HEAD, HyperKind.PAIR_TAIL]
    head, tail = hypers
    assert head.tw_open == 0.0 and head.service_time == 0.0
    assert tail.tw_open == pytest.approx(8.0) and tail.tw_close == math.inf


def test_vrpb_single():
    inst = _line_instance(
        Variant.VRPB, [0, 2, 3], backhauls=[False, True, True]
    )
    hypers = aggregate_segment(inst, Segment(0, 0, 1, (1, 2)))
    assert len(hypers) == 1
    assert hypers[0].demand == 5 and hypers[0].is_backhaul


def test_vrpb_mixed_segment_rejected():
    inst = _line_instance(
        Variant.VRPB, [0, 2, 3], backhauls=[False, False, True]
    )
    with pytest.raises(ValueError):
        aggregate_segment(inst, Segment(0, 0, 1, (1, 2)))


def test_pdp_triple_demands():
    # Demands [3, -5, 4]: prefix loads (3, -2, 2), min -2, max 3.
    # Frozen oracle (running-load feasibility range): head -2, mid 5, tail -1.
    inst = _line_instance(Variant.ONE_PDP, [0, 3, -5, 4], capacity=20.0)
    hypers = aggregate_segment(inst, Segment(0, 0, 2, (1, 2, 3)))
    assert [h.kind for h in hypers] == [
        HyperKind.TRIPLE_HEAD,
        HyperKind.TRIPLE_MID,
        HyperKind.TRIPLE_TAIL,
    ]
    assert [h.demand for h in hypers] == [-2, 5, -1]
    alt = aggregate_segment(
        inst, Segment(0, 0, 2, (1, 2, 3)), pdp_table_formula=True
    )
    assert [h.demand for h in alt] == [-2, 5, 1]
    assert sum(h.demand for h in hypers) == 3 + (-5) + 4  # load conservation


# ---------------------------------------------------------------------------
# Reduced problem, offset, recovery


def test_identity_reduction():
    inst = generate(GenSpec(Variant.CVRP, 12, 20.0, seed=3))
    sol = initial_solution_sweep(
        inst, SweepParams(k_veh=2, alpha_init=0.6), MoveBudget(max_moves=50, seed=0)
    )
    reduced, red_sol, rmap = build_reduced(inst, sol, edge_set(sol))
    assert reduced.n_customers == inst.n_customers
    assert rmap.objective_offset == 0.0
    assert red_sol.routes == sol.routes
    assert recover(red_sol, rmap).routes == sol.routes


def test_depot_only_cvrp_pairs():
    inst = generate(GenSpec(Variant.CVRP, 10, 30.0, seed=4))
    sol = initial_solution_sweep(
        inst, SweepParams(k_veh=2, alpha_init=0.6), MoveBudget(max_moves=50, seed=0)
    )
    multi = [r for r in sol.routes if len(r) >= 2]
    reduced, _, _ = build_reduced(inst, sol, depot_edges(sol))
    expected = sum(2 if len(r) >= 2 else 1 for r in sol.routes)
    assert reduced.n_customers == expected
    assert len(multi) >= 1  # the case exercises pair aggregation


def test_cvrp_pair_reversal_recovers_reversed_segment():
    inst = _line_instance(Variant.CVRP, [0, 1, 1, 1, 1], capacity=10.0)
    sol = Solution(((1, 2, 3, 4),))
    reduced, red_sol, rmap = build_reduced(inst, sol, depot_edges(sol))
    assert red_sol.routes == ((1, 2),)
    flipped = recover(Solution(((2, 1),)), rmap)
    assert flipped.routes == ((4, 3, 2, 1),)


def test_offset_identity_random_cases():
    rng = random.Random(0)
    for case in range(40):
        variant = rng.choice(list(Variant))
        inst = generate(GenSpec(variant, rng.randint(6, 16), 25.0, seed=case))
        sol = initial_solution_sweep(
            inst, SweepParams(k_veh=3, alpha_init=0.5), MoveBudget(max_moves=60, seed=case)
        )
        unstable = RandomPolicy(rng.uniform(0.2, 0.9), seed=case).detect(inst, sol)
        reduced, red_sol, rmap = build_reduced(inst, sol, unstable)
        f_red = reduced_objective(reduced, red_sol)
        f_orig = evaluate_objective(inst, sol)
        assert abs(f_orig - (f_red + rmap.objective_offset)) <= 1e-9
        # and after re-optimizing the reduced problem
        view = ProblemView.from_reduced(reduced)
        better, _ = solve_warm(view, red_sol, MoveBudget(max_moves=50, seed=case))
        recovered = recover(better, rmap)
        assert check_feasibility(inst, recovered).feasible
        assert abs(
            evaluate_objective(inst, recovered)
            - (reduced_objective(reduced, better) + rmap.objective_offset)
        ) <= 1e-9


def test_rounded_int_offset_exact():
    spec = GenSpec(Variant.CVRP, 10, 20.0, seed=9)
    base = generate(spec)
    from fsta.model import Instance

    inst = Instance(
        Variant.CVRP,
        [type(n)(n.x * 100, n.y * 100, n.demand) for n in base.nodes],
        base.capacity,
        DistanceMode.ROUNDED_INT,
        id="rounded",
    )
    sol = initial_solution_sweep(
        inst, SweepParams(k_veh=2, alpha_init=0.6), MoveBudget(max_moves=50, seed=0)
    )
    unstable = RandomPolicy(0.5, seed=1).detect(inst, sol)
    reduced, red_sol, rmap = build_reduced(inst, sol, unstable)
    f_red = reduced_objective(reduced, red_sol)
    assert evaluate_objective(inst, sol) == f_red + rmap.objective_offset


def test_verify_theorem_examples():
    inst = generate(GenSpec(Variant.CVRP, 6, 15.0, seed=1))
    sol = initial_solution_sweep(
        inst, SweepParams(k_veh=2, alpha_init=0.6), MoveBudget(max_moves=50, seed=0)
    )
    unstable = RandomPolicy(0.5, seed=2).detect(inst, sol)
    report = verify_theorem(inst, sol, unstable, trials=200, seed=0)
    assert report.ok and report.solutions_checked > 0

    tw = generate(GenSpec(Variant.VRPTW, 8, 15.0, seed=2))
    sol = initial_solution_sweep(
        tw, SweepParams(k_veh=2, alpha_init=0.6), MoveBudget(max_moves=50, seed=0)
    )
    report = verify_theorem(
        tw, sol, RandomPolicy(0.4, seed=3).detect(tw, sol), trials=200, seed=0
    )
    assert report.ok

    pdp = generate(GenSpec(Variant.ONE_PDP, 8, 15.0, seed=3))
    sol = initial_solution_sweep(
        pdp, SweepParams(k_veh=2, alpha_init=0.6), MoveBudget(max_moves=50, seed=0)
    )
    report = verify_theorem(
        pdp, sol, RandomPolicy(0.4, seed=4).detect(pdp, sol), trials=200, seed=0
    )
    assert report.ok
