"""Segment-and-aggregate problem reduction.

Cuts the unstable edges of a solution, collapses each remaining run of
consecutive customers into one, two, or three hypernodes depending on the
variant, and builds a reduced problem whose improvement maps back to the
original problem through an exact affine objective offset.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .model import (
    EPS,
    INF,
    DistanceMode,
    EdgeSet,
    Instance,
    Solution,
    Variant,
    canonical_edge,
    check_feasibility,
    depot_edges,
    edge_set,
    evaluate_objective,
)


@dataclass(frozen=True)
class Segment:
    route_index: int
    start_pos: int
    end_pos: int  # inclusive
    node_indices: tuple[int, ...]


class HyperKind(str, Enum):
    PASSTHROUGH = "passthrough"
    SINGLE = "single"
    PAIR_HEAD = "pair_head"
    PAIR_TAIL = "pair_tail"
    TRIPLE_HEAD = "triple_head"
    TRIPLE_MID = "triple_mid"
    TRIPLE_TAIL = "triple_tail"


@dataclass(frozen=True)
class Hypernode:
    kind: HyperKind
    in_xy: tuple[float, float]
    out_xy: tuple[float, float]
    demand: float
    tw_open: float = 0.0
    tw_close: float = INF
    service_time: float = 0.0
    is_backhaul: bool = False
    nodes: tuple[int, ...] = ()  # original nodes this hypernode stands for


def partition_segments(
    solution: Solution,
    unstable: EdgeSet,
    instance: Optional[Instance] = None,
) -> list[Segment]:
    """Cut every unstable edge; return the maximal stable runs per route.

    Depot edges are always treated as cut. For VRPB instances the edge
    between a linehaul and a backhaul customer is cut as well, so every
    segment is single-typed.
    """
    solution_edges = edge_set(solution)
    bad = unstable - solution_edges
    if bad:
        raise ValueError(f"unstable edges not in solution: {sorted(bad)[:5]}")
    cut = set(unstable) | set(depot_edges(solution))
    if instance is not None and instance.variant is Variant.VRPB:
        for route in solution.routes:
            for a, b in zip(route, route[1:]):
                if instance.nodes[a].is_backhaul != instance.nodes[b].is_backhaul:
                    cut.add(canonical_edge(a, b))

    segments: list[Segment] = []
    for r, route in enumerate(solution.routes):
        start = 0
        for pos in range(len(route)):
            last = pos == len(route) - 1
            if last or canonical_edge(route[pos], route[pos + 1]) in cut:
                segments.append(
                    Segment(r, start, pos, tuple(route[start : pos + 1]))
                )
                start = pos + 1
    return segments


def _vrptw_recursion(
    instance: Instance, nodes: tuple[int, ...]
) -> tuple[float, float, float]:
    """Backward aggregation of time windows and service over a segment.

    Returns (tl_bar, tr_bar, s_bar) for the segment's first node.
    """
    k = len(nodes) - 1
    last = instance.nodes[nodes[k]]
    tl, tr, s = last.tw_open, last.tw_close, last.service_time
    for m in range(k - 1, -1, -1):
        node = instance.nodes[nodes[m]]
        s_star = node.service_time + instance.distance(nodes[m], nodes[m + 1])
        tl = max(node.tw_open, tl - s_star)
        tr = min(node.tw_close, tr - s_star)
        s = s + s_star
    return tl, tr, s


def aggregate_segment(
    instance: Instance,
    segment: Segment,
    cvrp_single: bool = False,
    pdp_table_formula: bool = False,
) -> list[Hypernode]:
    nodes = segment.node_indices
    first, last = instance.nodes[nodes[0]], instance.nodes[nodes[-1]]
    in_xy = (first.x, first.y)
    out_xy = (last.x, last.y)

    if len(nodes) == 1:
        return [
            Hypernode(
                HyperKind.PASSTHROUGH,
                in_xy,
                in_xy,
                first.demand,
                first.tw_open,
                first.tw_close,
                first.service_time,
                first.is_backhaul,
                nodes,
            )
        ]

    total_demand = sum(instance.nodes[c].demand for c in nodes)
    variant = instance.variant

    if variant is Variant.CVRP:
        if cvrp_single:
            return [
                Hypernode(HyperKind.SINGLE, in_xy, out_xy, total_demand, nodes=nodes)
            ]
        half = total_demand / 2.0
        return [
            Hypernode(HyperKind.PAIR_HEAD, in_xy, in_xy, half, nodes=nodes),
            Hypernode(HyperKind.PAIR_TAIL, out_xy, out_xy, half, nodes=nodes),
        ]

    if variant is Variant.VRPTW:
        tl, tr, s_bar = _vrptw_recursion(instance, nodes)
        if tl <= tr + EPS:
            return [
                Hypernode(
                    HyperKind.SINGLE, in_xy, out_xy, total_demand, tl, tr, s_bar,
                    nodes=nodes,
                )
            ]
        half = total_demand / 2.0
        return [
            Hypernode(
                HyperKind.PAIR_HEAD, in_xy, in_xy, half, 0.0, tr, 0.0, nodes=nodes
            ),
            Hypernode(
                HyperKind.PAIR_TAIL, out_xy, out_xy, half, tl, INF, s_bar, nodes=nodes
            ),
        ]

    if variant is Variant.VRPB:
        flags = {instance.nodes[c].is_backhaul for c in nodes}
        if len(flags) > 1:
            raise ValueError(
                f"segment {nodes} mixes linehaul and backhaul customers"
            )
        return [
            Hypernode(
                HyperKind.SINGLE,
                in_xy,
                out_xy,
                total_demand,
                is_backhaul=first.is_backhaul,
                nodes=nodes,
            )
        ]

    # 1-VRPPD: running prefix sums over the segment.
    prefix = 0.0
    d_min = 0.0
    d_max = 0.0
    for c in nodes:
        prefix += instance.nodes[c].demand
        d_min = min(d_min, prefix)
        d_max = max(d_max, prefix)
    d_total = prefix
    tail = d_total - d_max - d_min if pdp_table_formula else d_total - d_max
    return [
        Hypernode(HyperKind.TRIPLE_HEAD, in_xy, in_xy, d_min, nodes=nodes),
        Hypernode(HyperKind.TRIPLE_MID, in_xy, in_xy, d_max - d_min, nodes=nodes),
        Hypernode(HyperKind.TRIPLE_TAIL, out_xy, out_xy, tail, nodes=nodes),
    ]


@dataclass
class ReducedProblem:
    variant: Variant
    capacity: float
    distance_mode: DistanceMode
    hypernodes: list[Hypernode]  # index 0 is the depot
    forced_arcs: list[tuple[int, int]]
    reversible_arcs: set[frozenset[int]]  # forced pairs traversable both ways
    internal_dist: dict[tuple[int, int], float]
    _mid_nodes: set[int] = field(default_factory=set)

    def __post_init__(self) -> None:
        self._mid_nodes = {
            i
            for i, h in enumerate(self.hypernodes)
            if h.kind is HyperKind.TRIPLE_MID
        }

    @property
    def n_customers(self) -> int:
        return len(self.hypernodes) - 1

    def dist(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        d = self.internal_dist.get((i, j))
        if d is not None:
            return d
        if i in self._mid_nodes or j in self._mid_nodes:
            return INF
        ax, ay = self.hypernodes[i].out_xy
        bx, by = self.hypernodes[j].in_xy
        d = math.hypot(ax - bx, ay - by)
        if self.distance_mode is DistanceMode.ROUNDED_INT:
            return float(math.floor(d + 0.5))
        return d


@dataclass(frozen=True)
class RecoveryGroup:
    hyper_indices: tuple[int, ...]  # chain order within the reduced problem
    original_nodes: tuple[int, ...]
    reversible: bool


@dataclass
class RecoveryMap:
    groups: list[RecoveryGroup]
    group_of: dict[int, int]  # hypernode index -> group index
    objective_offset: float


def build_reduced(
    instance: Instance,
    solution: Solution,
    unstable: EdgeSet,
    cvrp_single: bool = False,
    pdp_table_formula: bool = False,
) -> tuple[ReducedProblem, Solution, RecoveryMap]:
    segments = partition_segments(solution, unstable, instance)
    # Stable indexing: order segments by their smallest original node so
    # that an all-singleton reduction is the identity relabeling.
    segments = sorted(segments, key=lambda s: min(s.node_indices))

    depot = instance.nodes[0]
    hypernodes: list[Hypernode] = [
        Hypernode(
            HyperKind.PASSTHROUGH,
            (depot.x, depot.y),
            (depot.x, depot.y),
            0.0,
            nodes=(0,),
        )
    ]
    forced_arcs: list[tuple[int, int]] = []
    reversible: set[frozenset[int]] = set()
    internal: dict[tuple[int, int], float] = {}
    groups: list[RecoveryGroup] = []
    group_of: dict[int, int] = {}
    seg_chain: dict[tuple[int, int], tuple[int, ...]] = {}
    offset = 0.0

    for seg in segments:
        hs = aggregate_segment(instance, seg, cvrp_single, pdp_table_formula)
        idx = tuple(range(len(hypernodes), len(hypernodes) + len(hs)))
        hypernodes.extend(hs)
        intra = sum(
            instance.distance(a, b)
            for a, b in zip(seg.node_indices, seg.node_indices[1:])
        )
        if len(hs) == 1:
            offset += intra
        elif hs[0].kind is HyperKind.PAIR_HEAD:
            if instance.variant is Variant.CVRP:
                internal_d = instance.distance(seg.node_indices[0], seg.node_indices[-1])
                reversible.add(frozenset(idx))
                internal[(idx[0], idx[1])] = internal_d
                internal[(idx[1], idx[0])] = internal_d
            else:  # VRPTW pair, direction-forced, zero internal distance
                internal_d = 0.0
                internal[(idx[0], idx[1])] = 0.0
            forced_arcs.append((idx[0], idx[1]))
            offset += intra - internal_d
        else:  # triple
            forced_arcs.append((idx[0], idx[1]))
            forced_arcs.append((idx[1], idx[2]))
            internal[(idx[0], idx[1])] = 0.0
            internal[(idx[1], idx[2])] = 0.0
            offset += intra
        gi = len(groups)
        groups.append(
            RecoveryGroup(idx, seg.node_indices, frozenset(idx) in reversible)
        )
        for h in idx:
            group_of[h] = gi
        seg_chain[(seg.route_index, seg.start_pos)] = idx

    reduced = ReducedProblem(
        instance.variant,
        instance.capacity,
        instance.distance_mode,
        hypernodes,
        forced_arcs,
        reversible,
        internal,
    )

    # Reduced solution mirrors the original route / segment order.
    by_route: dict[int, list[tuple[int, tuple[int, ...]]]] = {}
    for (r, start), idx in seg_chain.items():
        by_route.setdefault(r, []).append((start, idx))
    routes = []
    for r in range(len(solution.routes)):
        chain: list[int] = []
        for _, idx in sorted(by_route[r]):
            chain.extend(idx)
        routes.append(tuple(chain))
    reduced_solution = Solution(tuple(routes))
    rmap = RecoveryMap(groups, group_of, offset)
    return reduced, reduced_solution, rmap


def recover(reduced_solution: Solution, rmap: RecoveryMap) -> Solution:
    routes = []
    for route in reduced_solution.routes:
        expanded: list[int] = []
        pos = 0
        while pos < len(route):
            g = rmap.groups[rmap.group_of[route[pos]]]
            chain = route[pos : pos + len(g.hyper_indices)]
            if tuple(chain) == g.hyper_indices:
                expanded.extend(g.original_nodes)
            elif g.reversible and tuple(chain) == tuple(reversed(g.hyper_indices)):
                expanded.extend(reversed(g.original_nodes))
            else:
                raise ValueError(
                    f"forced chain {g.hyper_indices} broken in reduced route {route}"
                )
            pos += len(g.hyper_indices)
        routes.append(tuple(expanded))
    return Solution(tuple(routes))


def reduced_objective(reduced: ReducedProblem, solution: Solution) -> float:
    total = 0.0
    for route in solution.routes:
        prev = 0
        for h in route:
            total += reduced.dist(prev, h)
            prev = h
        total += reduced.dist(prev, 0)
    return total


@dataclass
class TheoremReport:
    solutions_checked: int
    pairs_checked: int
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _enumerate_unit_solutions(
    rmap: RecoveryMap, limit: int
) -> Optional[list[Solution]]:
    """All reduced solutions as ordered routes over recovery groups.

    Returns None when the enumeration would exceed `limit`.
    """
    n = len(rmap.groups)
    orient = [2 if g.reversible else 1 for g in rmap.groups]
    total = math.factorial(n) * (2 ** max(0, n - 1))
    for o in orient:
        total *= o
    if total > limit:
        return None
    out = []
    for perm in itertools.permutations(range(n)):
        for splits in itertools.product([0, 1], repeat=n - 1):
            for flips in itertools.product(*[range(orient[g]) for g in perm]):
                routes: list[list[int]] = [[]]
                for pos, g in enumerate(perm):
                    if pos > 0 and splits[pos - 1]:
                        routes.append([])
                    chain = rmap.groups[g].hyper_indices
                    routes[-1].extend(
                        reversed(chain) if flips[pos] else chain
                    )
                out.append(Solution(tuple(tuple(r) for r in routes)))
    return out


def _random_unit_solution(rmap: RecoveryMap, rng: random.Random) -> Solution:
    n = len(rmap.groups)
    perm = list(range(n))
    rng.shuffle(perm)
    routes: list[list[int]] = [[]]
    for pos, g in enumerate(perm):
        if pos > 0 and rng.random() < 0.5:
            routes.append([])
        chain = rmap.groups[g].hyper_indices
        if rmap.groups[g].reversible and rng.random() < 0.5:
            chain = tuple(reversed(chain))
        routes[-1].extend(chain)
    return Solution(tuple(tuple(r) for r in routes))


def verify_theorem(
    instance: Instance,
    solution: Solution,
    unstable: EdgeSet,
    trials: int = 500,
    seed: int = 0,
    enumeration_limit: int = 5000,
) -> TheoremReport:
    """Check feasibility transfer and objective-order preservation.

    Enumerates all reduced solutions when small enough, otherwise samples
    random ones; every reduced-feasible solution must recover to a feasible
    original solution, and objective order must carry over.
    """
    from .backbone import ProblemView, view_check_feasibility

    reduced, _, rmap = build_reduced(instance, solution, unstable)
    view = ProblemView.from_reduced(reduced)

    candidates = _enumerate_unit_solutions(rmap, enumeration_limit)
    rng = random.Random(seed)
    if candidates is None:
        candidates = [_random_unit_solution(rmap, rng) for _ in range(trials)]

    report = TheoremReport(0, 0)
    feasible: list[tuple[float, float]] = []  # (reduced obj, original obj)
    for cand in candidates:
        if not view_check_feasibility(view, cand).feasible:
            continue
        report.solutions_checked += 1
        f_red = reduced_objective(reduced, cand)
        original = recover(cand, rmap)
        orig_report = check_feasibility(instance, original)
        if not orig_report.feasible:
            report.violations.append(
                f"recovered solution infeasible: {orig_report.violations[:2]}"
            )
            continue
        f_orig = evaluate_objective(instance, original)
        if abs(f_orig - (f_red + rmap.objective_offset)) > 1e-6:
            report.violations.append(
                f"offset identity broken: {f_orig} != {f_red} + {rmap.objective_offset}"
            )
        feasible.append((f_red, f_orig))

    if len(feasible) >= 2:
        n_pairs = min(trials, len(feasible) * (len(feasible) - 1) // 2)
        for _ in range(n_pairs):
            (f1r, f1o), (f2r, f2o) = rng.sample(feasible, 2)
            report.pairs_checked += 1
            if f1r <= f2r and f1o > f2o + 1e-6:
                report.violations.append(
                    f"order violated: reduced {f1r} <= {f2r} but original {f1o} > {f2o}"
                )
    return report
