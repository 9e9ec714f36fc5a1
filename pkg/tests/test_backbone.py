import random

import pytest

from conftest import brute_force_cvrp, make_instance
from fsta.backbone import (
    MoveBudget,
    ProblemView,
    local_search,
    lns_step,
    solve_warm,
    view_check_feasibility,
)
from fsta.gen_io import GenSpec, SweepParams, generate, initial_solution_sweep
from fsta.model import Solution, Variant, depot_edges, evaluate_objective
from fsta.reduction import build_reduced
from fsta.segmenter import RandomPolicy


def _singletons(instance):
    return Solution(tuple((c,) for c in range(1, instance.n_customers + 1)))


def test_budget_requires_a_bound():
    with pytest.raises(ValueError):
        MoveBudget()


def test_zero_moves_returns_start(square_cvrp):
    view = ProblemView.from_instance(square_cvrp)
    start = _singletons(square_cvrp)
    out, stats = solve_warm(view, start, MoveBudget(max_moves=0, seed=0))
    assert out.routes == start.routes
    assert stats.moves_applied == 0


def test_infeasible_start_rejected():
    inst = make_instance(
        Variant.CVRP, [(0, 0), (1, 0), (2, 0)], [0, 2, 2], 3.0
    )
    view = ProblemView.from_instance(inst)
    with pytest.raises(ValueError):
        local_search(view, Solution(((1, 2),)), MoveBudget(max_moves=10, seed=0))


def test_local_search_monotone_and_deterministic():
    inst = generate(GenSpec(Variant.CVRP, 30, 20.0, seed=5))
    view = ProblemView.from_instance(inst)
    start = _singletons(inst)
    f0 = evaluate_objective(inst, start)
    out1, _ = solve_warm(view, start, MoveBudget(max_moves=500, seed=42), mode="lns")
    out2, _ = solve_warm(view, start, MoveBudget(max_moves=500, seed=42), mode="lns")
    assert out1.routes == out2.routes
    assert evaluate_objective(inst, out1) <= f0


def test_uncrosses_crossing_edges():
    # Two crossing routes over a square are strictly improvable.
    coords = [(0.5, 0.5), (0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]
    inst = make_instance(Variant.CVRP, coords, [0, 1, 1, 1, 1], 4.0)
    start = Solution(((1, 2), (3, 4)))
    view = ProblemView.from_instance(inst)
    out, _ = local_search(view, start, MoveBudget(max_moves=100, seed=0))
    best, _ = brute_force_cvrp(inst)
    assert evaluate_objective(inst, out) == pytest.approx(best)


def test_matches_brute_force_on_small_cases():
    rng = random.Random(7)
    hits = 0
    for case in range(20):
        n = rng.randint(5, 7)
        inst = generate(GenSpec(Variant.CVRP, n, 12.0, seed=case + 100))
        start = _singletons(inst)
        view = ProblemView.from_instance(inst)
        out, _ = solve_warm(view, start, MoveBudget(max_moves=1000, seed=case), mode="lns")
        f = evaluate_objective(inst, out)
        best, _ = brute_force_cvrp(inst)
        assert f >= best - 1e-9
        if f <= best * 1.02 + 1e-9:
            hits += 1
    assert hits >= 18


def test_forced_arcs_preserved():
    inst = generate(GenSpec(Variant.CVRP, 12, 20.0, seed=6))
    sol = initial_solution_sweep(
        inst, SweepParams(k_veh=2, alpha_init=0.6), MoveBudget(max_moves=50, seed=0)
    )
    reduced, red_sol, rmap = build_reduced(inst, sol, depot_edges(sol))
    view = ProblemView.from_reduced(reduced)
    out, _ = solve_warm(view, red_sol, MoveBudget(max_moves=300, seed=1), mode="lns")
    assert view_check_feasibility(view, out).feasible  # includes forced arcs
    succ = {}
    for route in out.routes:
        for a, b in zip(route, route[1:]):
            succ[a] = b
    for a, b in reduced.forced_arcs:
        ok = succ.get(a) == b or (
            frozenset((a, b)) in reduced.reversible_arcs and succ.get(b) == a
        )
        assert ok


def test_lns_step_never_worsens():
    inst = generate(GenSpec(Variant.CVRP, 40, 25.0, seed=8))
    view = ProblemView.from_instance(inst)
    current = _singletons(inst)
    f = evaluate_objective(inst, current)
    for k in range(30):
        current, _ = lns_step(view, current, 3, MoveBudget(max_moves=40, seed=k))
        f_new = evaluate_objective(inst, current)
        assert f_new <= f + 1e-9
        f = f_new


def test_vrptw_and_pdp_feasibility_preserved():
    for variant in (Variant.VRPTW, Variant.VRPB, Variant.ONE_PDP):
        inst = generate(GenSpec(variant, 20, 15.0, seed=11))
        start = _singletons(inst)
        view = ProblemView.from_instance(inst)
        out, _ = solve_warm(view, start, MoveBudget(max_moves=400, seed=2), mode="lns")
        assert view_check_feasibility(view, out).feasible
        from fsta.model import check_feasibility

        assert check_feasibility(inst, out).feasible


def test_objective_trace_nonincreasing():
    inst = generate(GenSpec(Variant.CVRP, 30, 20.0, seed=12))
    view = ProblemView.from_instance(inst)
    _, stats = solve_warm(
        view, _singletons(inst), MoveBudget(max_moves=300, seed=3), mode="lns"
    )
    objs = [f for _, f in stats.objective_trace]
    assert objs == sorted(objs, reverse=True)
