"""Iterative re-optimization loop, route-pair subproblems, training-trace
export, redundancy profiling, and segmenter evaluation."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .backbone import MoveBudget, ProblemView, solve_warm
from .model import (
    Edge,
    EdgeSet,
    Instance,
    Solution,
    check_feasibility,
    depot_edges,
    edge_diff,
    edge_set,
    evaluate_objective,
)
from .reduction import build_reduced, recover, reduced_objective
from .segmenter import RandomPolicy, score


class LoopError(RuntimeError):
    """Raised when an iteration fails; carries the partial run stats."""

    def __init__(self, message: str, stats: "RunStats"):
        super().__init__(message)
        self.stats = stats


@dataclass
class LoopConfig:
    segmenter: object  # any policy with .detect(instance, solution)
    backbone_mode: str = "ls"  # "ls" or "lns"
    moves_per_iter: Optional[int] = 1000
    time_limit_ms: Optional[int] = None
    max_iters: Optional[int] = None
    oracle_free_time: bool = False
    record_stats: bool = True
    neighborhood_routes: int = 3
    stall_limit: int = 30
    perturbation_rounds: int = 0
    widen_rate: float = 0.2
    seed: int = 0
    score_oracle: Optional[object] = None  # policy scored against per iteration

    def __post_init__(self) -> None:
        if self.time_limit_ms is None and self.max_iters is None:
            raise ValueError("set at least one of time_limit_ms / max_iters")


@dataclass
class RunStats:
    records: list[dict] = field(default_factory=list)
    fallback_iterations: int = 0
    final_objective: float = 0.0


def _iter_seed(base: int, iteration: int) -> int:
    return (base * 1_000_003 + iteration) % (2**63)


def _iter_budget(cfg: LoopConfig, iteration: int, remaining_ms: Optional[float]) -> MoveBudget:
    millis = None
    if remaining_ms is not None:
        millis = max(1, int(remaining_ms))
    return MoveBudget(cfg.moves_per_iter, millis, seed=_iter_seed(cfg.seed, iteration))


def run_fsta_loop(instance: Instance, init: Solution, cfg: LoopConfig) -> tuple[Solution, RunStats]:
    """Detect unstable edges, reduce, re-optimize, recover, adopt — repeat
    until the iteration or wall budget runs out."""
    report = check_feasibility(instance, init)
    if not report.feasible:
        raise ValueError(f"infeasible initial solution: {report.violations[:3]}")
    stats = RunStats(final_objective=evaluate_objective(instance, init))
    current = init
    t0 = time.monotonic()
    free = 0.0
    it = 0
    stalls = 0
    while True:
        elapsed = (time.monotonic() - t0) * 1000.0 - free
        if cfg.max_iters is not None and it >= cfg.max_iters:
            break
        if cfg.time_limit_ms is not None and elapsed >= cfg.time_limit_ms:
            break
        seg_t = time.monotonic()
        try:
            unstable = cfg.segmenter.detect(instance, current)
        except Exception as exc:
            raise LoopError(f"segmenter failed at iteration {it}: {exc}", stats) from exc
        seg_ms = (time.monotonic() - seg_t) * 1000.0
        if cfg.oracle_free_time:
            free += seg_ms

        recall = tnr = None
        if cfg.score_oracle is not None:
            oracle_t = time.monotonic()
            oracle_set = cfg.score_oracle.detect(instance, current)
            universe = edge_set(current) | depot_edges(current)
            s = score(unstable, oracle_set, universe)
            recall, tnr = s.recall, s.tnr
            free += (time.monotonic() - oracle_t) * 1000.0

        if not (unstable - depot_edges(current)):
            stats.fallback_iterations += 1
            fallback = RandomPolicy(0.2, seed=_iter_seed(cfg.seed, it) + 1)
            unstable = fallback.detect(instance, current)
        if stalls > 0:
            # The detected region yielded nothing last iteration; widen the
            # unstable set so the reduced search space grows (up to the full
            # problem under persistent stalls).
            widen = RandomPolicy(
                min(1.0, cfg.widen_rate * stalls), seed=_iter_seed(cfg.seed, it) + 2
            )
            unstable = unstable | widen.detect(instance, current)

        remaining = None
        if cfg.time_limit_ms is not None:
            remaining = cfg.time_limit_ms - ((time.monotonic() - t0) * 1000.0 - free)
            if remaining <= 0:
                break
        try:
            reduced, red_start, rmap = build_reduced(instance, current, unstable)
            view = ProblemView.from_reduced(reduced)
            red_sol, _ = solve_warm(
                view,
                red_start,
                _iter_budget(cfg, it, remaining),
                mode=cfg.backbone_mode,
                neighborhood_routes=cfg.neighborhood_routes,
                stall_limit=cfg.stall_limit,
                perturbation_rounds=cfg.perturbation_rounds,
            )
            recovered = recover(red_sol, rmap)
        except LoopError:
            raise
        except Exception as exc:
            raise LoopError(f"backbone failed at iteration {it}: {exc}", stats) from exc

        # Defense-in-depth guard: recovery must be feasible and match the
        # affine objective identity before adoption.
        guard = check_feasibility(instance, recovered)
        if not guard.feasible:
            raise LoopError(
                f"recovered solution infeasible at iteration {it}: {guard.violations[:3]}",
                stats,
            )
        full_obj = evaluate_objective(instance, recovered)
        red_obj = reduced_objective(reduced, red_sol)
        if abs(full_obj - (red_obj + rmap.objective_offset)) > 1e-6:
            raise LoopError(f"objective offset identity broken at iteration {it}", stats)

        cur_edges = edge_set(current)
        changed = len(edge_diff(current, recovered) & cur_edges) / len(cur_edges)
        if full_obj < stats.final_objective - 1e-9:
            stalls = 0
        else:
            stalls += 1
        current = recovered
        stats.final_objective = full_obj
        if cfg.record_stats:
            stats.records.append(
                {
                    "iter": it,
                    "elapsed_ms": round((time.monotonic() - t0) * 1000.0 - free, 3),
                    "objective": full_obj,
                    "size_ratio": reduced.n_customers / instance.n_customers,
                    "recall": recall,
                    "tnr": tnr,
                    "changed_frac": changed,
                }
            )
        it += 1
    return current, stats


def run_plain_loop(instance: Instance, init: Solution, cfg: LoopConfig) -> tuple[Solution, RunStats]:
    """Iterated backbone on the full problem, with the same per-iteration
    seeding and budget shape as the reduced loop (the paired-comparison arm)."""
    report = check_feasibility(instance, init)
    if not report.feasible:
        raise ValueError(f"infeasible initial solution: {report.violations[:3]}")
    stats = RunStats(final_objective=evaluate_objective(instance, init))
    view = ProblemView.from_instance(instance)
    current = init
    t0 = time.monotonic()
    it = 0
    while True:
        elapsed = (time.monotonic() - t0) * 1000.0
        if cfg.max_iters is not None and it >= cfg.max_iters:
            break
        if cfg.time_limit_ms is not None and elapsed >= cfg.time_limit_ms:
            break
        remaining = None
        if cfg.time_limit_ms is not None:
            remaining = cfg.time_limit_ms - elapsed
            if remaining <= 0:
                break
        improved, _ = solve_warm(
            view,
            current,
            _iter_budget(cfg, it, remaining),
            mode=cfg.backbone_mode,
            neighborhood_routes=cfg.neighborhood_routes,
            stall_limit=cfg.stall_limit,
            perturbation_rounds=cfg.perturbation_rounds,
        )
        cur_edges = edge_set(current)
        changed = len(edge_diff(current, improved) & cur_edges) / len(cur_edges)
        current = improved
        obj = evaluate_objective(instance, current)
        stats.final_objective = obj
        if cfg.record_stats:
            stats.records.append(
                {
                    "iter": it,
                    "elapsed_ms": round((time.monotonic() - t0) * 1000.0, 3),
                    "objective": obj,
                    "size_ratio": 1.0,
                    "recall": None,
                    "tnr": None,
                    "changed_frac": changed,
                }
            )
        it += 1
    return current, stats


# ---------------------------------------------------------------------------
# Route-pair subproblems


@dataclass
class Subproblem:
    route_pair: tuple[int, int]
    instance: Instance
    solution: Solution
    node_map: list[int]  # sub-instance index -> original node index


def _route_centroid(instance: Instance, route) -> tuple[float, float]:
    xs = [instance.nodes[c].x for c in route]
    ys = [instance.nodes[c].y for c in route]
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def _make_subproblem(instance: Instance, solution: Solution, pair: tuple[int, int]) -> Subproblem:
    route_idxs = [pair[0]] if pair[0] == pair[1] else [pair[0], pair[1]]
    customers = sorted(c for r in route_idxs for c in solution.routes[r])
    node_map = [0] + customers
    remap = {orig: sub for sub, orig in enumerate(node_map)}
    nodes = [instance.nodes[i] for i in node_map]
    sub_instance = Instance(
        instance.variant,
        nodes,
        instance.capacity,
        instance.distance_mode,
        id=f"{instance.id}#r{pair[0]}-{pair[1]}",
    )
    routes = tuple(
        tuple(remap[c] for c in solution.routes[r]) for r in route_idxs
    )
    return Subproblem(pair, sub_instance, Solution(routes), node_map)


def decompose_subproblems(instance: Instance, solution: Solution) -> list[Subproblem]:
    """Pair each route with its nearest route by centroid distance and cut
    out the corresponding two-route sub-instances (deduplicated)."""
    routes = solution.routes
    if not routes:
        raise ValueError("empty solution")
    if len(routes) == 1:
        return [_make_subproblem(instance, solution, (0, 0))]
    centroids = [_route_centroid(instance, r) for r in routes]
    pairs: set[tuple[int, int]] = set()
    for r in range(len(routes)):
        best = None
        best_d = None
        for s in range(len(routes)):
            if s == r:
                continue
            dx = centroids[r][0] - centroids[s][0]
            dy = centroids[r][1] - centroids[s][1]
            d = dx * dx + dy * dy
            if best_d is None or d < best_d or (d == best_d and s < best):
                best, best_d = s, d
        pairs.add((min(r, best), max(r, best)))
    return [_make_subproblem(instance, solution, p) for p in sorted(pairs)]


# ---------------------------------------------------------------------------
# Trace export


@dataclass
class TraceRecord:
    instance_id: str
    iteration: int
    subproblem_id: str
    route_pair: tuple[int, int]
    nar_labels: dict[int, int]
    ar_sequences: list[dict]  # {"nodes": [...], "stages": ["d","i",...], "end": True}
    improvement: float

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "iteration": self.iteration,
            "subproblem_id": self.subproblem_id,
            "route_pair": list(self.route_pair),
            "nar_labels": {str(k): v for k, v in sorted(self.nar_labels.items())},
            "ar_sequences": self.ar_sequences,
            "improvement": self.improvement,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceRecord":
        return cls(
            d["instance_id"],
            d["iteration"],
            d["subproblem_id"],
            tuple(d["route_pair"]),
            {int(k): v for k, v in d["nar_labels"].items()},
            d["ar_sequences"],
            d["improvement"],
        )


@dataclass
class TraceConfig:
    t_is: int = 40
    moves_per_iter: int = 1000
    backbone_mode: str = "lns"
    eta_improv: float = 0.0
    alpha_ac: float = 0.0
    seed: int = 0


def _components(nodes: set[int], edges: EdgeSet) -> list[tuple[set[int], set[Edge]]]:
    """Connected components of an edge set.  The depot is treated as a cut
    vertex: every route touches node 0, so traversing through it would fuse
    unrelated changes into one giant component.  Depot edges are assigned to
    the component of their customer endpoint."""
    customers = {v for v in nodes if v != 0}
    adj: dict[int, list[int]] = {v: [] for v in customers}
    for i, j in edges:
        if i != 0 and j != 0:
            adj[i].append(j)
            adj[j].append(i)
    seen: set[int] = set()
    comps = []
    for start in sorted(customers):
        if start in seen:
            continue
        comp = set()
        stack = [start]
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(adj[v])
        seen |= comp
        comp_edges = {e for e in edges if e[0] in comp or e[1] in comp}
        if any(0 in e for e in comp_edges):
            comp = comp | {0}
        comps.append((comp, comp_edges))
    return comps


def _alternating_trail(
    deleted: set[Edge], inserted: set[Edge]
) -> Optional[tuple[list[int], list[str]]]:
    """Backtracking search for a trail covering every component edge,
    alternating deleted/inserted and starting on a deleted edge from the
    lowest-index node incident to one. Neighbors are tried lowest first."""
    all_edges = deleted | inserted
    starts = sorted({v for e in deleted for v in e})
    if not starts or inserted | deleted != all_edges:
        return None
    adj: dict[int, list[int]] = {}
    for i, j in all_edges:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    for v in adj:
        adj[v].sort()

    total = len(all_edges)

    def extend(node: int, stage: str, used: set[Edge], path: list[int], stages: list[str]):
        if len(used) == total:
            return path, stages
        pool = deleted if stage == "d" else inserted
        for nxt in adj.get(node, ()):
            e = (node, nxt) if node < nxt else (nxt, node)
            if e in used or e not in pool:
                continue
            used.add(e)
            path.append(nxt)
            stages.append(stage)
            hit = extend(nxt, "i" if stage == "d" else "d", used, path, stages)
            if hit is not None:
                return hit
            used.remove(e)
            path.pop()
            stages.pop()
        return None

    start = starts[0]
    hit = extend(start, "d", set(), [start], [])
    if hit is None:
        return None
    path, stages = hit[0][:], hit[1][:]
    if len(path) > 1 and path[-1] == path[0]:
        path = path[:-1]  # closed trail: the final edge wraps to the start
    return path, stages


def export_traces(
    runs: Iterable[tuple[Instance, Solution]], cfg: TraceConfig
) -> tuple[list[TraceRecord], int]:
    """Run the backbone iteratively on each (instance, initial solution)
    pair and emit per-iteration node labels and alternating delete/insert
    sequences for route-pair subproblems. Returns (records, count of
    components skipped because no alternating trail covers them)."""
    rng = random.Random(cfg.seed)
    records: list[TraceRecord] = []
    skipped = 0
    for instance, init in runs:
        view = ProblemView.from_instance(instance)
        current = init
        for it in range(cfg.t_is):
            budget = MoveBudget(cfg.moves_per_iter, seed=_iter_seed(cfg.seed, it))
            improved, _ = solve_warm(view, current, budget, mode=cfg.backbone_mode)
            prev_edges = edge_set(current)
            next_edges = edge_set(improved)
            diff = prev_edges ^ next_edges
            improvement = evaluate_objective(instance, current) - evaluate_objective(
                instance, improved
            )
            if not diff or improvement < cfg.eta_improv:
                current = improved
                continue
            deleted = prev_edges - next_edges
            inserted = next_edges - prev_edges

            route_of: dict[int, int] = {}
            for r, route in enumerate(current.routes):
                for c in route:
                    route_of[c] = r

            subs = decompose_subproblems(instance, current)
            sub_records: list[TraceRecord] = []
            for sub in subs:
                members = set(sub.node_map)
                local_diff = {
                    e for e in diff if e[0] in members and e[1] in members
                }
                incident = {v for e in local_diff for v in e}
                labels = {
                    c: (1 if c in incident else 0)
                    for c in sub.node_map
                    if c != 0
                }
                sub_records.append(
                    TraceRecord(
                        instance.id,
                        it,
                        sub.instance.id,
                        sub.route_pair,
                        labels,
                        [],
                        improvement,
                    )
                )

            emit_ar = rng.random() < cfg.alpha_ac
            v_unstable = {v for e in diff for v in e}
            for comp_nodes, comp_edges in _components(v_unstable, diff):
                spanned = {route_of[v] for v in comp_nodes if v != 0}
                if len(spanned) > 2:
                    continue
                owner = None
                for rec in sub_records:
                    if spanned <= set(rec.route_pair):
                        owner = rec
                        break
                if owner is None:
                    skipped += 1
                    continue
                trail = _alternating_trail(
                    comp_edges & deleted, comp_edges & inserted
                )
                if trail is None:
                    skipped += 1
                    continue
                if emit_ar:
                    owner.ar_sequences.append(
                        {"nodes": trail[0], "stages": trail[1], "end": True}
                    )
            records.extend(r for r in sub_records if any(r.nar_labels.values()) or r.ar_sequences)
            current = improved
    return records, skipped


# ---------------------------------------------------------------------------
# Redundancy profiling and segmenter evaluation


def measure_redundancy(
    instance: Instance,
    init: Solution,
    steps: int,
    moves_per_iter: int = 1000,
    backbone_mode: str = "lns",
    stall_limit: int = 30,
    seed: int = 0,
) -> list[float]:
    """Fraction of solution edges changed by each backbone step."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    view = ProblemView.from_instance(instance)
    current = init
    fractions = []
    for it in range(steps):
        budget = MoveBudget(moves_per_iter, seed=_iter_seed(seed, it))
        improved, _ = solve_warm(
            view, current, budget, mode=backbone_mode, stall_limit=stall_limit
        )
        cur_edges = edge_set(current)
        fractions.append(len(edge_diff(current, improved) & cur_edges) / len(cur_edges))
        current = improved
    return fractions


def eval_segmenter(
    runs: Iterable[tuple[Instance, Solution]],
    policy,
    oracle,
    iters: int,
    moves_per_iter: int = 1000,
    backbone_mode: str = "ls",
    seed: int = 0,
) -> tuple[dict, list[RunStats]]:
    """Score a detection policy against the lookahead oracle on identical
    solver states while running the reduced loop under the policy."""
    all_stats = []
    recalls, tnrs, ratios = [], [], []
    for instance, init in runs:
        cfg = LoopConfig(
            segmenter=policy,
            backbone_mode=backbone_mode,
            moves_per_iter=moves_per_iter,
            max_iters=iters,
            oracle_free_time=True,
            seed=seed,
            score_oracle=oracle,
        )
        _, stats = run_fsta_loop(instance, init, cfg)
        all_stats.append(stats)
        for rec in stats.records:
            if rec["recall"] is not None:
                recalls.append(rec["recall"])
                tnrs.append(rec["tnr"])
            ratios.append(rec["size_ratio"])

    def _mean(xs):
        return sum(xs) / len(xs) if xs else None

    aggregate = {
        "recall": _mean(recalls),
        "tnr": _mean(tnrs),
        "size_ratio": _mean(ratios),
        "iterations": sum(len(s.records) for s in all_stats),
    }
    return aggregate, all_stats
