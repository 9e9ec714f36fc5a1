"""Warm-start local-search / LNS backbone.

Operates uniformly on original instances and reduced problems through a
ProblemView, keeps forced hypernode chains intact by moving them as atomic
units, and never returns a worse solution than its start.
"""

from __future__ import annotations

import math
import time
import random
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    EPS,
    INF,
    FeasibilityReport,
    Instance,
    Solution,
    Variant,
    ViolationKind,
)
from .reduction import ReducedProblem

NEIGHBOR_LIST_THRESHOLD = 200
NEIGHBOR_K = 20


@dataclass
class MoveBudget:
    max_moves: Optional[int] = None
    max_millis: Optional[int] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_moves is None and self.max_millis is None:
            raise ValueError("at least one of max_moves / max_millis must be set")


@dataclass
class SearchStats:
    moves_applied: int = 0
    moves_evaluated: int = 0
    objective_trace: list[tuple[float, float]] = field(default_factory=list)


class ProblemView:
    """Uniform solver-facing interface over Instance or ReducedProblem."""

    def __init__(
        self,
        variant: Variant,
        capacity: float,
        n_customers: int,
        demands: list[float],
        tws: list[tuple[float, float]],
        services: list[float],
        backhauls: list[bool],
        xys: list[tuple[float, float]],
        dist_fn,
        symmetric: bool,
        forced_succ: dict[int, int],
        reversible_arcs: set[frozenset[int]],
    ):
        self.variant = variant
        self.capacity = capacity
        self.n_customers = n_customers
        self._demands = demands
        self._tws = tws
        self._services = services
        self._backhauls = backhauls
        self._xys = xys
        self.symmetric = symmetric
        self.forced_succ = forced_succ
        self.forced_pred = {b: a for a, b in forced_succ.items()}
        self.reversible_arcs = reversible_arcs
        n = n_customers + 1
        if n <= 1200:
            self._matrix = [[dist_fn(i, j) for j in range(n)] for i in range(n)]
            self.dist = lambda i, j: self._matrix[i][j]
        else:
            self._matrix = None
            self.dist = dist_fn

    def demand(self, i: int) -> float:
        return self._demands[i]

    def tw(self, i: int) -> tuple[float, float]:
        return self._tws[i]

    def service(self, i: int) -> float:
        return self._services[i]

    def is_backhaul(self, i: int) -> bool:
        return self._backhauls[i]

    def xy(self, i: int) -> tuple[float, float]:
        return self._xys[i]

    @classmethod
    def from_instance(cls, instance: Instance) -> "ProblemView":
        nodes = instance.nodes
        return cls(
            instance.variant,
            instance.capacity,
            instance.n_customers,
            [n.demand for n in nodes],
            [(n.tw_open, n.tw_close) for n in nodes],
            [n.service_time for n in nodes],
            [n.is_backhaul for n in nodes],
            [(n.x, n.y) for n in nodes],
            instance.distance,
            True,
            {},
            set(),
        )

    @classmethod
    def from_reduced(cls, reduced: ReducedProblem) -> "ProblemView":
        hs = reduced.hypernodes
        symmetric = all(h.in_xy == h.out_xy for h in hs) and all(
            reduced.internal_dist.get((b, a)) == d
            for (a, b), d in reduced.internal_dist.items()
        )
        return cls(
            reduced.variant,
            reduced.capacity,
            reduced.n_customers,
            [h.demand for h in hs],
            [(h.tw_open, h.tw_close) for h in hs],
            [h.service_time for h in hs],
            [h.is_backhaul for h in hs],
            [
                ((ix + ox) / 2.0, (iy + oy) / 2.0)
                for (ix, iy), (ox, oy) in ((h.in_xy, h.out_xy) for h in hs)
            ],
            reduced.dist,
            symmetric,
            dict(reduced.forced_arcs),
            set(reduced.reversible_arcs),
        )


def view_route_schedule(view: ProblemView, route) -> list[tuple[float, float]]:
    out = []
    t = 0.0
    prev = 0
    for c in route:
        arrival = t + view.dist(prev, c)
        start = max(arrival, view.tw(c)[0])
        out.append((arrival, start))
        t = start + view.service(c)
        prev = c
    return out


def view_route_feasible(view: ProblemView, route) -> bool:
    """Per-variant feasibility of one route's node sequence."""
    C = view.capacity
    if view.variant in (Variant.CVRP, Variant.VRPTW):
        if sum(view.demand(c) for c in route) > C + EPS:
            return False
    if view.variant is Variant.VRPTW:
        t = 0.0
        prev = 0
        for c in route:
            arrival = t + view.dist(prev, c)
            tl, tr = view.tw(c)
            start = arrival if arrival >= tl else tl
            if start > tr + EPS:
                return False
            t = start + view.service(c)
            prev = c
    elif view.variant is Variant.VRPB:
        seen_backhaul = False
        line = 0.0
        back = 0.0
        for c in route:
            if view.is_backhaul(c):
                seen_backhaul = True
                back += view.demand(c)
            else:
                if seen_backhaul:
                    return False
                line += view.demand(c)
        if line > C + EPS or back > C + EPS:
            return False
    elif view.variant is Variant.ONE_PDP:
        prefix = 0.0
        d_min = 0.0
        d_max = 0.0
        for c in route:
            prefix += view.demand(c)
            if prefix < d_min:
                d_min = prefix
            elif prefix > d_max:
                d_max = prefix
        # A feasible start load exists iff the load swing fits the capacity.
        if d_max - d_min > C + EPS:
            return False
    return True


def view_check_feasibility(view: ProblemView, solution: Solution) -> FeasibilityReport:
    """Full feasibility report including coverage and forced-arc checks."""
    report = FeasibilityReport()
    seen: set[int] = set()
    for r, route in enumerate(solution.routes):
        if not route:
            report.add(r, ViolationKind.CUSTOMER_COVERAGE, "empty route")
        for c in route:
            if c == 0 or c > view.n_customers or c in seen:
                report.add(r, ViolationKind.CUSTOMER_COVERAGE, f"bad visit {c}")
            seen.add(c)
        if not view_route_feasible(view, route):
            kind = {
                Variant.CVRP: ViolationKind.CAPACITY_EXCEEDED,
                Variant.VRPTW: ViolationKind.TIME_WINDOW_MISSED,
                Variant.VRPB: ViolationKind.BACKHAUL_ORDER,
                Variant.ONE_PDP: ViolationKind.LOAD_EXCEEDED,
            }[view.variant]
            report.add(r, kind, "route constraint violated")
    if len(seen) != view.n_customers:
        report.add(-1, ViolationKind.CUSTOMER_COVERAGE, "missing customers")
    succ: dict[int, int] = {}
    for route in solution.routes:
        for a, b in zip(route, route[1:]):
            succ[a] = b
    for a, b in view.forced_succ.items():
        if succ.get(a) != b and not (
            frozenset((a, b)) in view.reversible_arcs and succ.get(b) == a
        ):
            report.add(-1, ViolationKind.CUSTOMER_COVERAGE, f"forced arc {a}->{b} broken")
    return report


class _Unit:
    __slots__ = ("nodes", "reversible", "demand", "cost_fwd", "cost_rev")

    def __init__(self, view: ProblemView, nodes: tuple[int, ...]):
        self.nodes = nodes
        self.reversible = len(nodes) == 1 or (
            len(nodes) == 2 and frozenset(nodes) in view.reversible_arcs
        )
        self.demand = sum(view.demand(c) for c in nodes)
        self.cost_fwd = sum(view.dist(a, b) for a, b in zip(nodes, nodes[1:]))
        rev = tuple(reversed(nodes))
        self.cost_rev = sum(view.dist(a, b) for a, b in zip(rev, rev[1:]))


def _build_units(view: ProblemView, solution: Solution) -> tuple[list[_Unit], list[list[list]]]:
    """Group forced chains into atomic units and express routes as slot lists.

    A slot is [unit_index, reversed_flag].
    """
    units: list[_Unit] = []
    unit_of: dict[int, int] = {}
    routes: list[list[list]] = []
    for route in solution.routes:
        slots: list[list] = []
        i = 0
        while i < len(route):
            chain = [route[i]]
            while (
                i + len(chain) < len(route)
                and view.forced_succ.get(chain[-1]) == route[i + len(chain)]
            ):
                chain.append(route[i + len(chain)])
            # Reversed traversal of a reversible pair.
            rev = False
            if (
                len(chain) == 1
                and i + 1 < len(route)
                and view.forced_succ.get(route[i + 1]) == route[i]
                and frozenset((route[i], route[i + 1])) in view.reversible_arcs
            ):
                chain = [route[i + 1], route[i]]
                rev = True
            key = tuple(chain)
            if key not in unit_of:
                unit_of[key] = len(units)
                units.append(_Unit(view, key))
            slots.append([unit_of[key], rev])
            i += len(chain)
        routes.append(slots)
    return units, routes


class Searcher:
    """Single run of local search / LNS over one (view, start) pair."""

    def __init__(self, view: ProblemView, start: Solution, budget: MoveBudget):
        self.view = view
        self.budget = budget
        self.rng = random.Random(budget.seed)
        self.stats = SearchStats()
        self.t0 = time.monotonic()
        self._free_time = 0.0
        self.units, self.routes = _build_units(view, start)
        self.route_costs = [self._route_cost(r) for r in self.routes]
        self.route_loads = [
            sum(self.units[u].demand for u, _ in r) for r in self.routes
        ]
        self.objective = sum(self.route_costs)
        self._neighbors: Optional[list[list[int]]] = None
        if view.n_customers > NEIGHBOR_LIST_THRESHOLD:
            self._neighbors = self._build_neighbors()
        self._record()

    # -- bookkeeping ---------------------------------------------------

    def elapsed_ms(self) -> float:
        return (time.monotonic() - self.t0 - self._free_time) * 1000.0

    def exhausted(self) -> bool:
        b = self.budget
        if b.max_moves is not None and self.stats.moves_applied >= b.max_moves:
            return True
        if b.max_millis is not None and self.elapsed_ms() >= b.max_millis:
            return True
        return False

    def _record(self) -> None:
        self.stats.objective_trace.append((self.elapsed_ms(), self.objective))

    def _build_neighbors(self) -> list[list[int]]:
        n = self.view.n_customers + 1
        xys = [self.view.xy(i) for i in range(n)]
        out = []
        for i in range(n):
            xi, yi = xys[i]
            order = sorted(
                (j for j in range(1, n) if j != i),
                key=lambda j: (xys[j][0] - xi) ** 2 + (xys[j][1] - yi) ** 2,
            )
            out.append(order[:NEIGHBOR_K])
        return out

    # -- geometry of slots ---------------------------------------------

    def _in_node(self, slot) -> int:
        unit = self.units[slot[0]]
        return unit.nodes[-1] if slot[1] else unit.nodes[0]

    def _out_node(self, slot) -> int:
        unit = self.units[slot[0]]
        return unit.nodes[0] if slot[1] else unit.nodes[-1]

    def _internal_cost(self, slot) -> float:
        unit = self.units[slot[0]]
        return unit.cost_rev if slot[1] else unit.cost_fwd

    def _route_cost(self, slots) -> float:
        d = self.view.dist
        total = 0.0
        prev = 0
        for slot in slots:
            total += d(prev, self._in_node(slot)) + self._internal_cost(slot)
            prev = self._out_node(slot)
        return total + d(prev, 0)

    def _route_nodes(self, slots) -> list[int]:
        out: list[int] = []
        for u, rev in slots:
            nodes = self.units[u].nodes
            out.extend(reversed(nodes) if rev else nodes)
        return out

    def solution(self) -> Solution:
        return Solution(
            tuple(tuple(self._route_nodes(r)) for r in self.routes if r)
        )

    # -- move machinery -------------------------------------------------

    def _apply_routes(self, changes: dict[int, list]) -> None:
        for r, slots in changes.items():
            self.routes[r] = slots
        for r in changes:
            self.route_costs[r] = self._route_cost(self.routes[r])
            self.route_loads[r] = sum(self.units[u].demand for u, _ in self.routes[r])
        self.objective = sum(self.route_costs)
        self.stats.moves_applied += 1
        self._record()

    def _compact(self) -> None:
        """Drop emptied routes. Only safe between passes, when no active
        route-index set is outstanding."""
        keep = [i for i, r in enumerate(self.routes) if r]
        self.routes = [self.routes[i] for i in keep]
        self.route_costs = [self.route_costs[i] for i in keep]
        self.route_loads = [self.route_loads[i] for i in keep]

    def _routes_feasible(self, changes: dict[int, list]) -> bool:
        for slots in changes.values():
            if slots and not view_route_feasible(self.view, self._route_nodes(slots)):
                return False
        return True

    def _try(self, changes: dict[int, list], delta: float) -> bool:
        if delta >= -1e-9:
            return False
        if not self._routes_feasible(changes):
            return False
        self._apply_routes(changes)
        return True

    def _quick_capacity_ok(self, route_idx: int, extra: float) -> bool:
        if self.view.variant in (Variant.CVRP, Variant.VRPTW):
            return self.route_loads[route_idx] + extra <= self.view.capacity + EPS
        return True

    def _candidate_routes(self, r1: int, slot) -> list[int]:
        if self._neighbors is None:
            return list(range(len(self.routes)))
        near: set[int] = {r1}
        slot_nodes = set(self.units[slot[0]].nodes)
        member = self._route_membership()
        for node in self.units[slot[0]].nodes:
            for nb in self._neighbors[node]:
                if nb not in slot_nodes and nb in member:
                    near.add(member[nb])
        return sorted(near)

    def _route_membership(self) -> dict[int, int]:
        member: dict[int, int] = {}
        for r, slots in enumerate(self.routes):
            for u, _ in slots:
                for node in self.units[u].nodes:
                    member[node] = r
        return member

    # -- operators ------------------------------------------------------

    def _pass_relocate(self, active) -> bool:
        d = self.view.dist
        improved = False
        for r1 in range(len(self.routes)):
            if active is not None and r1 not in active:
                continue
            p = 0
            while p < len(self.routes[r1]):
                if self.exhausted():
                    return improved
                slots1 = self.routes[r1]
                slot = slots1[p]
                unit = self.units[slot[0]]
                prev_out = self._out_node(slots1[p - 1]) if p > 0 else 0
                next_in = self._in_node(slots1[p + 1]) if p + 1 < len(slots1) else 0
                remove_delta = (
                    d(prev_out, next_in)
                    - d(prev_out, self._in_node(slot))
                    - d(self._out_node(slot), next_in)
                    - self._internal_cost(slot)
                )
                applied = False
                for r2 in self._candidate_routes(r1, slot):
                    if active is not None and r2 not in active:
                        continue
                    if r2 != r1 and not self._quick_capacity_ok(r2, unit.demand):
                        continue
                    base = self.routes[r2] if r2 != r1 else slots1[:p] + slots1[p + 1 :]
                    if r2 == r1 and len(base) == 0:
                        continue
                    for q in range(len(base) + 1):
                        if r2 == r1 and q == p:
                            continue
                        b_prev = self._out_node(base[q - 1]) if q > 0 else 0
                        b_next = self._in_node(base[q]) if q < len(base) else 0
                        orients = (False, True) if unit.reversible and len(unit.nodes) > 1 else (False,)
                        for rev in orients:
                            cand = [slot[0], rev]
                            self.stats.moves_evaluated += 1
                            delta = remove_delta + (
                                d(b_prev, self._in_node(cand))
                                + self._internal_cost(cand)
                                + d(self._out_node(cand), b_next)
                                - d(b_prev, b_next)
                            )
                            if delta < -1e-9:
                                new2 = base[:q] + [cand] + base[q:]
                                if r2 == r1:
                                    changes = {r1: new2}
                                else:
                                    changes = {r1: slots1[:p] + slots1[p + 1 :], r2: new2}
                                if self._try(changes, delta):
                                    improved = True
                                    applied = True
                                    break
                        if applied:
                            break
                    if applied:
                        break
                if not applied:
                    p += 1
                # After applying, the same position holds a new slot; rescan it.
        return improved

    def _pass_swap(self, active) -> bool:
        d = self.view.dist
        improved = False
        r1 = 0
        while r1 < len(self.routes):
            if active is not None and r1 not in active:
                r1 += 1
                continue
            p = 0
            while p < len(self.routes[r1]):
                if self.exhausted():
                    return improved
                applied = False
                for r2 in range(r1, len(self.routes)):
                    if active is not None and r2 not in active:
                        continue
                    q_start = p + 1 if r2 == r1 else 0
                    for q in range(q_start, len(self.routes[r2])):
                        self.stats.moves_evaluated += 1
                        delta = self._swap_delta(r1, p, r2, q)
                        if delta < -1e-9:
                            changes = self._swap_changes(r1, p, r2, q)
                            if self._try(changes, delta):
                                improved = True
                                applied = True
                                break
                    if applied:
                        break
                p += 1
            r1 += 1
        return improved

    def _swap_changes(self, r1, p, r2, q) -> dict[int, list]:
        if r1 == r2:
            slots = list(self.routes[r1])
            slots[p], slots[q] = slots[q], slots[p]
            return {r1: slots}
        a = list(self.routes[r1])
        b = list(self.routes[r2])
        a[p], b[q] = b[q], a[p]
        return {r1: a, r2: b}

    def _swap_delta(self, r1, p, r2, q) -> float:
        changes = self._swap_changes(r1, p, r2, q)
        new = sum(self._route_cost(s) for s in changes.values())
        old = sum(self.route_costs[r] for r in changes)
        return new - old

    def _pass_two_opt(self, active) -> bool:
        if not self.view.symmetric:
            return False
        improved = False
        d = self.view.dist
        for r in range(len(self.routes)):
            if active is not None and r not in active:
                continue
            again = True
            while again:
                again = False
                slots = self.routes[r]
                n = len(slots)
                for i in range(n - 1):
                    if self.exhausted():
                        return improved
                    for j in range(i + 1, n):
                        if not all(self.units[slots[t][0]].reversible for t in range(i, j + 1)):
                            break
                        a = self._out_node(slots[i - 1]) if i > 0 else 0
                        b = self._in_node(slots[j + 1]) if j + 1 < n else 0
                        self.stats.moves_evaluated += 1
                        new_first = [slots[j][0], not slots[j][1]]
                        new_last = [slots[i][0], not slots[i][1]]
                        delta = (
                            d(a, self._in_node(new_first))
                            + d(self._out_node(new_last), b)
                            - d(a, self._in_node(slots[i]))
                            - d(self._out_node(slots[j]), b)
                        )
                        if delta < -1e-9:
                            rev = [[u, not f] for u, f in reversed(slots[i : j + 1])]
                            cand = slots[:i] + rev + slots[j + 1 :]
                            if self._try({r: cand}, delta):
                                improved = True
                                again = True
                                break
                    if again:
                        break
        return improved

    def _pass_two_opt_star(self, active) -> bool:
        d = self.view.dist
        improved = False
        r1 = 0
        while r1 < len(self.routes):
            if active is not None and r1 not in active:
                r1 += 1
                continue
            applied = False
            for r2 in range(r1 + 1, len(self.routes)):
                if active is not None and r2 not in active:
                    continue
                s1, s2 = self.routes[r1], self.routes[r2]
                for i in range(len(s1) + 1):
                    if self.exhausted():
                        return improved
                    a_out = self._out_node(s1[i - 1]) if i > 0 else 0
                    t1_in = self._in_node(s1[i]) if i < len(s1) else 0
                    for j in range(len(s2) + 1):
                        if i == len(s1) and j == len(s2):
                            continue
                        b_out = self._out_node(s2[j - 1]) if j > 0 else 0
                        t2_in = self._in_node(s2[j]) if j < len(s2) else 0
                        self.stats.moves_evaluated += 1
                        delta = (
                            d(a_out, t2_in) + d(b_out, t1_in)
                            - d(a_out, t1_in) - d(b_out, t2_in)
                        )
                        if delta < -1e-9:
                            changes = {r1: s1[:i] + s2[j:], r2: s2[:j] + s1[i:]}
                            if self._try(changes, delta):
                                improved = True
                                applied = True
                                break
                    if applied:
                        break
                if applied:
                    break
            if not applied:
                r1 += 1
        return improved

    # -- top-level strategies -------------------------------------------

    _OPERATORS = ("_pass_relocate", "_pass_swap", "_pass_two_opt", "_pass_two_opt_star")

    def local_search(self, active: Optional[set[int]] = None) -> None:
        while not self.exhausted():
            if active is None:
                self._compact()
            any_improved = False
            for op in self._OPERATORS:
                if self.exhausted():
                    break
                if getattr(self, op)(active):
                    any_improved = True
            if not any_improved:
                break

    def _route_centroid(self, slots) -> tuple[float, float]:
        xs = ys = 0.0
        count = 0
        for u, _ in slots:
            for node in self.units[u].nodes:
                x, y = self.view.xy(node)
                xs += x
                ys += y
                count += 1
        return xs / count, ys / count

    def perturb(self, strength: int) -> bool:
        """Relocate up to `strength` random units to random feasible slots in
        other routes, accepted regardless of cost.  Escape move for iterated
        search; does not count against the move budget."""
        done = 0
        for _ in range(strength * 10):
            if done >= strength:
                break
            self._compact()
            if len(self.routes) < 2:
                break
            r1 = self.rng.randrange(len(self.routes))
            r2 = self.rng.randrange(len(self.routes))
            if r1 == r2 or not self.routes[r1]:
                continue
            p = self.rng.randrange(len(self.routes[r1]))
            slot = self.routes[r1][p]
            if not self._quick_capacity_ok(r2, self.units[slot[0]].demand):
                continue
            q = self.rng.randint(0, len(self.routes[r2]))
            changes = {
                r1: self.routes[r1][:p] + self.routes[r1][p + 1 :],
                r2: self.routes[r2][:q] + [slot] + self.routes[r2][q:],
            }
            if not self._routes_feasible(changes):
                continue
            for r, slots in changes.items():
                self.routes[r] = slots
                self.route_costs[r] = self._route_cost(slots)
                self.route_loads[r] = sum(
                    self.units[u].demand for u, _ in slots
                )
            self.objective = sum(self.route_costs)
            done += 1
        return done > 0

    def lns_step(self, neighborhood_routes: int) -> bool:
        self._compact()
        before = self.objective
        m = len(self.routes)
        if m <= neighborhood_routes:
            self.local_search(None)
        else:
            seed_route = self.rng.randrange(m)
            cx, cy = self._route_centroid(self.routes[seed_route])
            order = sorted(
                range(m),
                key=lambda r: (
                    (self._route_centroid(self.routes[r])[0] - cx) ** 2
                    + (self._route_centroid(self.routes[r])[1] - cy) ** 2
                ),
            )
            active = set(order[:neighborhood_routes])
            active.add(seed_route)
            self.local_search(active)
        return self.objective < before - 1e-9


def local_search(
    view: ProblemView,
    start: Solution,
    budget: MoveBudget,
    active_routes: Optional[set[int]] = None,
) -> tuple[Solution, SearchStats]:
    report = view_check_feasibility(view, start)
    if not report.feasible:
        raise ValueError(f"infeasible start: {report.violations[:3]}")
    searcher = Searcher(view, start, budget)
    searcher.local_search(active_routes)
    return searcher.solution(), searcher.stats


def lns_step(
    view: ProblemView,
    start: Solution,
    neighborhood_routes: int,
    budget: MoveBudget,
) -> tuple[Solution, SearchStats]:
    report = view_check_feasibility(view, start)
    if not report.feasible:
        raise ValueError(f"infeasible start: {report.violations[:3]}")
    searcher = Searcher(view, start, budget)
    searcher.lns_step(neighborhood_routes)
    return searcher.solution(), searcher.stats


def solve_warm(
    view: ProblemView,
    start: Solution,
    budget: MoveBudget,
    mode: str = "ls",
    neighborhood_routes: int = 3,
    stall_limit: int = 30,
    perturbation_rounds: int = 0,
) -> tuple[Solution, SearchStats]:
    """Dispatch wrapper: 'ls' runs plain local search, 'lns' loops
    neighborhood steps until the budget or a stall limit is hit.  With
    `perturbation_rounds > 0`, each stalled-out search is followed by a
    random perturbation and another round, and the best solution seen is
    returned (iterated local search)."""
    if mode not in ("ls", "lns"):
        raise ValueError(f"unknown mode: {mode}")
    report = view_check_feasibility(view, start)
    if not report.feasible:
        raise ValueError(f"infeasible start: {report.violations[:3]}")
    searcher = Searcher(view, start, budget)
    if mode == "ls":
        searcher.local_search(None)
        return searcher.solution(), searcher.stats
    best_sol = searcher.solution()
    best_obj = searcher.objective
    stalls = 0
    rounds = perturbation_rounds
    while not searcher.exhausted():
        if searcher.lns_step(neighborhood_routes):
            stalls = 0
            if searcher.objective < best_obj - 1e-9:
                best_obj = searcher.objective
                best_sol = searcher.solution()
        else:
            stalls += 1
            if stalls >= stall_limit:
                if rounds <= 0 or not searcher.perturb(3):
                    break
                rounds -= 1
                stalls = 0
    return best_sol, searcher.stats
