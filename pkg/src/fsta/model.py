"""Core routing problem and solution representations.

Instances, solutions, per-variant feasibility checking, objective
evaluation, and undirected edge-set algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

INF = math.inf

# Absolute tolerance for all real-valued feasibility comparisons.
EPS = 1e-9

# Distance matrices are cached only below this node count.
MATRIX_CACHE_LIMIT = 2000


class Variant(str, Enum):
    CVRP = "cvrp"
    VRPTW = "vrptw"
    VRPB = "vrpb"
    ONE_PDP = "1pdp"


class DistanceMode(str, Enum):
    EUCLIDEAN = "euclidean_f64"
    ROUNDED_INT = "rounded_int"


@dataclass(frozen=True)
class Node:
    x: float
    y: float
    demand: float = 0.0
    service_time: float = 0.0
    tw_open: float = 0.0
    tw_close: float = INF
    is_backhaul: bool = False


class Instance:
    """A variant-tagged routing instance. Node 0 is the depot."""

    def __init__(
        self,
        variant: Variant,
        nodes: Iterable[Node],
        capacity: float,
        distance_mode: DistanceMode = DistanceMode.EUCLIDEAN,
        id: str = "instance",
    ):
        self.variant = Variant(variant)
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.capacity = float(capacity)
        self.distance_mode = DistanceMode(distance_mode)
        self.id = id
        self._matrix: Optional[list[list[float]]] = None
        self._validate()

    def _validate(self) -> None:
        if len(self.nodes) < 2:
            raise ValueError("instance needs a depot and at least one customer")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        depot = self.nodes[0]
        if depot.demand != 0 or depot.service_time != 0 or depot.is_backhaul:
            raise ValueError("depot must have zero demand/service and no backhaul flag")
        for i, node in enumerate(self.nodes[1:], start=1):
            d = node.demand
            if self.variant is Variant.ONE_PDP:
                if d == 0 or abs(d) > self.capacity:
                    raise ValueError(f"node {i}: demand must be nonzero with |d| <= C")
            else:
                if not (0 < d <= self.capacity):
                    raise ValueError(f"node {i}: demand must satisfy 0 < d <= C")
            if self.variant is Variant.VRPTW:
                if node.tw_open > node.tw_close:
                    raise ValueError(f"node {i}: empty time window")
            elif node.service_time != 0:
                raise ValueError(f"node {i}: service time only meaningful for VRPTW")
            if node.is_backhaul and self.variant is not Variant.VRPB:
                raise ValueError(f"node {i}: backhaul flag only meaningful for VRPB")

    @property
    def n_customers(self) -> int:
        return len(self.nodes) - 1

    def _raw_distance(self, i: int, j: int) -> float:
        a, b = self.nodes[i], self.nodes[j]
        d = math.hypot(a.x - b.x, a.y - b.y)
        if self.distance_mode is DistanceMode.ROUNDED_INT:
            return float(math.floor(d + 0.5))
        return d

    def distance(self, i: int, j: int) -> float:
        if not (0 <= i < len(self.nodes) and 0 <= j < len(self.nodes)):
            raise IndexError(f"node index out of range: ({i}, {j})")
        if len(self.nodes) <= MATRIX_CACHE_LIMIT:
            if self._matrix is None:
                n = len(self.nodes)
                self._matrix = [
                    [self._raw_distance(a, b) for b in range(n)] for a in range(n)
                ]
            return self._matrix[i][j]
        return self._raw_distance(i, j)


@dataclass(frozen=True)
class Solution:
    """Ordered routes of customer indices; the depot is implicit at both ends."""

    routes: tuple[tuple[int, ...], ...]

    @staticmethod
    def from_routes(routes: Iterable[Iterable[int]]) -> "Solution":
        return Solution(tuple(tuple(r) for r in routes))

    def validate_structure(self, instance: Instance) -> None:
        seen: set[int] = set()
        for r, route in enumerate(self.routes):
            if not route:
                raise ValueError(f"route {r} is empty")
            for c in route:
                if c == 0:
                    raise ValueError(f"route {r} contains the depot")
                if not (1 <= c <= instance.n_customers):
                    raise ValueError(f"route {r}: customer {c} out of range")
                if c in seen:
                    raise ValueError(f"customer {c} visited more than once")
                seen.add(c)
        missing = set(range(1, instance.n_customers + 1)) - seen
        if missing:
            raise ValueError(f"customers not visited: {sorted(missing)}")


class ViolationKind(str, Enum):
    CAPACITY_EXCEEDED = "CapacityExceeded"
    TIME_WINDOW_MISSED = "TimeWindowMissed"
    BACKHAUL_ORDER = "BackhaulOrder"
    NEGATIVE_LOAD = "NegativeLoad"
    LOAD_EXCEEDED = "LoadExceeded"
    CUSTOMER_COVERAGE = "CustomerCoverage"


@dataclass
class FeasibilityReport:
    violations: list[tuple[int, ViolationKind, str]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def add(self, route_index: int, kind: ViolationKind, detail: str) -> None:
        self.violations.append((route_index, kind, detail))


def evaluate_objective(instance: Instance, solution: Solution) -> float:
    solution.validate_structure(instance)
    total = 0.0
    for route in solution.routes:
        prev = 0
        for c in route:
            total += instance.distance(prev, c)
            prev = c
        total += instance.distance(prev, 0)
    return total


def route_schedule(instance: Instance, route: Iterable[int]) -> list[tuple[float, float]]:
    """Forward VRPTW schedule: list of (arrival, service_start) per customer.

    The vehicle leaves the depot at time 0; waiting before a window opens
    is allowed.
    """
    out = []
    t = 0.0
    prev = 0
    for c in route:
        arrival = t + instance.distance(prev, c)
        start = max(arrival, instance.nodes[c].tw_open)
        out.append((arrival, start))
        t = start + instance.nodes[c].service_time
        prev = c
    return out


def check_feasibility(instance: Instance, solution: Solution) -> FeasibilityReport:
    report = FeasibilityReport()
    try:
        solution.validate_structure(instance)
    except ValueError as exc:
        report.add(-1, ViolationKind.CUSTOMER_COVERAGE, str(exc))
        return report

    C = instance.capacity
    for r, route in enumerate(solution.routes):
        if instance.variant in (Variant.CVRP, Variant.VRPTW):
            load = sum(instance.nodes[c].demand for c in route)
            if load > C + EPS:
                report.add(r, ViolationKind.CAPACITY_EXCEEDED, f"load {load} > {C}")
        if instance.variant is Variant.VRPTW:
            for c, (_, start) in zip(route, route_schedule(instance, route)):
                if start > instance.nodes[c].tw_close + EPS:
                    report.add(
                        r,
                        ViolationKind.TIME_WINDOW_MISSED,
                        f"node {c}: service at {start} > {instance.nodes[c].tw_close}",
                    )
        elif instance.variant is Variant.VRPB:
            seen_backhaul = False
            line_load = 0.0
            back_load = 0.0
            for c in route:
                node = instance.nodes[c]
                if node.is_backhaul:
                    seen_backhaul = True
                    back_load += node.demand
                else:
                    if seen_backhaul:
                        report.add(
                            r,
                            ViolationKind.BACKHAUL_ORDER,
                            f"linehaul {c} after a backhaul customer",
                        )
                    line_load += node.demand
            if line_load > C + EPS:
                report.add(r, ViolationKind.CAPACITY_EXCEEDED, f"linehaul load {line_load} > {C}")
            if back_load > C + EPS:
                report.add(r, ViolationKind.CAPACITY_EXCEEDED, f"backhaul load {back_load} > {C}")
        elif instance.variant is Variant.ONE_PDP:
            prefix = 0.0
            min_prefix = 0.0
            for c in route:
                prefix += instance.nodes[c].demand
                min_prefix = min(min_prefix, prefix)
            # Minimal feasible start load; the start load itself is free.
            start_load = max(0.0, -min_prefix)
            load = start_load
            for c in route:
                load += instance.nodes[c].demand
                if load < -EPS:
                    report.add(r, ViolationKind.NEGATIVE_LOAD, f"load {load} after node {c}")
                if load > C + EPS:
                    report.add(r, ViolationKind.LOAD_EXCEEDED, f"load {load} after node {c}")
    return report


Edge = tuple[int, int]
EdgeSet = frozenset[Edge]


def canonical_edge(i: int, j: int) -> Edge:
    if i == j:
        raise ValueError(f"self-loop edge ({i}, {j})")
    return (i, j) if i < j else (j, i)


def edge_set(solution: Solution) -> EdgeSet:
    edges: set[Edge] = set()
    for route in solution.routes:
        prev = 0
        for c in route:
            edges.add(canonical_edge(prev, c))
            prev = c
        edges.add(canonical_edge(prev, 0))
    return frozenset(edges)


def depot_edges(solution: Solution) -> EdgeSet:
    edges: set[Edge] = set()
    for route in solution.routes:
        edges.add(canonical_edge(0, route[0]))
        edges.add(canonical_edge(0, route[-1]))
    return frozenset(edges)


def edge_diff(a: Solution, b: Solution) -> EdgeSet:
    return edge_set(a) ^ edge_set(b)
