"""Instance generation, CVRPLib-subset parsing, the angular-sweep initial
solution, and all text file formats."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .model import (
    INF,
    DistanceMode,
    Instance,
    Node,
    Solution,
    Variant,
    check_feasibility,
    evaluate_objective,
)


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Generation


@dataclass
class GenSpec:
    variant: Variant
    n_customers: int
    capacity: float
    demand_model: str = "uniform_1_9"  # or "skewed_hetero"
    spatial: str = "uniform_square"  # or "clustered"
    n_clusters: int = 7
    cluster_sigma: float = 0.05
    # VRPTW window parameters (declared defaults, not benchmark-derived).
    tw_horizon: float = 18.0
    tw_width_min: float = 0.5
    tw_width_max: float = 2.0
    service_time: float = 0.2
    backhaul_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_customers < 1:
            raise ValueError("n_customers must be >= 1")
        if self.spatial not in ("uniform_square", "clustered"):
            raise ValueError(f"unknown spatial model: {self.spatial}")
        if self.demand_model not in ("uniform_1_9", "skewed_hetero"):
            raise ValueError(f"unknown demand model: {self.demand_model}")
        if self.spatial == "clustered" and self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")


def _draw_demands(rng: np.random.Generator, spec: GenSpec) -> np.ndarray:
    if spec.demand_model == "uniform_1_9":
        d = rng.integers(1, 10, size=spec.n_customers).astype(float)
    else:
        values = np.array([1, 2, 8, 9, 3, 4, 5, 6, 7], dtype=float)
        probs = np.array([0.2] * 4 + [0.04] * 5)
        d = rng.choice(values, size=spec.n_customers, p=probs)
    return np.minimum(d, spec.capacity)


def generate(spec: GenSpec) -> Instance:
    """Deterministic instance draw for the given spec and seed."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_customers
    if spec.spatial == "uniform_square":
        coords = rng.uniform(0.0, 1.0, size=(n + 1, 2))
    else:
        depot = rng.uniform(0.0, 1.0, size=(1, 2))
        centers = rng.uniform(0.0, 1.0, size=(spec.n_clusters, 2))
        assign = rng.integers(0, spec.n_clusters, size=n)
        scatter = rng.normal(0.0, spec.cluster_sigma, size=(n, 2))
        pts = np.clip(centers[assign] + scatter, 0.0, 1.0)
        coords = np.vstack([depot, pts])

    demands = _draw_demands(rng, spec)
    if spec.variant is Variant.ONE_PDP:
        signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        demands = demands * signs
    backhauls = (
        rng.random(n) < spec.backhaul_fraction
        if spec.variant is Variant.VRPB
        else np.zeros(n, dtype=bool)
    )

    nodes = [Node(float(coords[0][0]), float(coords[0][1]))]
    for i in range(n):
        x, y = float(coords[i + 1][0]), float(coords[i + 1][1])
        if spec.variant is Variant.VRPTW:
            d0 = math.hypot(x - nodes[0].x, y - nodes[0].y)
            width = float(rng.uniform(spec.tw_width_min, spec.tw_width_max))
            lo = d0
            hi = max(lo, spec.tw_horizon - d0 - spec.service_time)
            center = float(rng.uniform(lo, hi))
            tw_open = max(0.0, center - width / 2.0)
            tw_close = center + width / 2.0
            nodes.append(
                Node(x, y, float(demands[i]), spec.service_time, tw_open, tw_close)
            )
        else:
            nodes.append(
                Node(x, y, float(demands[i]), is_backhaul=bool(backhauls[i]))
            )
    return Instance(
        spec.variant,
        nodes,
        spec.capacity,
        DistanceMode.EUCLIDEAN,
        id=f"{spec.variant.value}-n{n}-s{spec.seed}",
    )


# ---------------------------------------------------------------------------
# Angular-sweep initial solution


@dataclass
class SweepParams:
    k_veh: int = 6
    alpha_init: float = 0.95

    def __post_init__(self) -> None:
        if self.k_veh < 1:
            raise ValueError("k_veh must be >= 1")
        if not (0 < self.alpha_init <= 1):
            raise ValueError("alpha_init must lie in (0, 1]")


def initial_solution_sweep(instance: Instance, params: SweepParams, backbone_budget) -> Solution:
    """Angular grouping around the depot followed by a per-group backbone run.

    Groups are capped near alpha_init * k_veh * C total demand; each group
    starts as singleton routes (always feasible) and is improved
    independently by the backbone restricted to its own routes.
    """
    from .backbone import MoveBudget, ProblemView, local_search

    depot = instance.nodes[0]
    customers = list(range(1, instance.n_customers + 1))
    angles = {
        c: math.atan2(instance.nodes[c].y - depot.y, instance.nodes[c].x - depot.x)
        for c in customers
    }
    ref = angles[customers[0]]
    order = sorted(customers, key=lambda c: ((angles[c] - ref) % (2 * math.pi), c))

    target = params.alpha_init * params.k_veh * instance.capacity
    groups: list[list[int]] = [[]]
    load = 0.0
    for c in order:
        d = abs(instance.nodes[c].demand)
        if groups[-1] and load + d > target:
            groups.append([])
            load = 0.0
        groups[-1].append(c)
        load += d

    solution = Solution(tuple((c,) for g in groups for c in g))
    view = ProblemView.from_instance(instance)
    for group in groups:
        members = set(group)
        active = {
            r
            for r, route in enumerate(solution.routes)
            if members.intersection(route)
        }
        budget = MoveBudget(
            backbone_budget.max_moves,
            backbone_budget.max_millis,
            seed=backbone_budget.seed,
        )
        solution, _ = local_search(view, solution, budget, active_routes=active)
    report = check_feasibility(instance, solution)
    if not report.feasible:
        raise RuntimeError(f"sweep produced infeasible solution: {report.violations[:3]}")
    return solution


# ---------------------------------------------------------------------------
# Number formatting shared by the text formats


def _fmt(v: float) -> str:
    if v == INF:
        return "inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


# ---------------------------------------------------------------------------
# Native instance document


def write_instance(instance: Instance) -> str:
    lines = [
        f"instance {instance.id}",
        f"variant {instance.variant.value}",
        f"capacity {_fmt(instance.capacity)}",
        f"distance_mode {instance.distance_mode.value}",
        f"nodes {len(instance.nodes)}",
    ]
    for i, n in enumerate(instance.nodes):
        lines.append(
            f"{i} {_fmt(n.x)} {_fmt(n.y)} {_fmt(n.demand)} {_fmt(n.service_time)} "
            f"{_fmt(n.tw_open)} {_fmt(n.tw_close)} {1 if n.is_backhaul else 0}"
        )
    return "\n".join(lines) + "\n"


def read_instance(text: str) -> Instance:
    lines = text.splitlines()
    header: dict[str, str] = {}
    idx = 0
    for idx, line in enumerate(lines):
        parts = line.split(maxsplit=1)
        if len(parts) != 2:
            raise ParseError(f"line {idx + 1}: malformed header line {line!r}")
        key, value = parts
        header[key] = value
        if key == "nodes":
            break
    else:
        raise ParseError("missing 'nodes' header line")
    for key in ("instance", "variant", "capacity", "distance_mode", "nodes"):
        if key not in header:
            raise ParseError(f"missing header field {key!r}")
    count = int(header["nodes"])
    nodes = []
    for offset in range(count):
        ln = idx + 1 + offset
        if ln >= len(lines):
            raise ParseError(f"line {ln + 1}: expected {count} node lines")
        parts = lines[ln].split()
        if len(parts) != 8:
            raise ParseError(f"line {ln + 1}: expected 8 fields, got {len(parts)}")
        if int(parts[0]) != offset:
            raise ParseError(f"line {ln + 1}: node index {parts[0]} out of order")
        nodes.append(
            Node(
                float(parts[1]),
                float(parts[2]),
                float(parts[3]),
                float(parts[4]),
                float(parts[5]),
                float(parts[6]),
                parts[7] == "1",
            )
        )
    return Instance(
        Variant(header["variant"]),
        nodes,
        float(header["capacity"]),
        DistanceMode(header["distance_mode"]),
        id=header["instance"],
    )


# ---------------------------------------------------------------------------
# Solution document


def write_solution(instance: Instance, solution: Solution) -> str:
    lines = [f"objective {repr(evaluate_objective(instance, solution))}"]
    for r, route in enumerate(solution.routes):
        body = " ".join(str(c) for c in route)
        lines.append(f"route {r}: 0 {body} 0")
    return "\n".join(lines) + "\n"


def read_solution(text: str, instance: Optional[Instance] = None) -> Solution:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or not lines[0].startswith("objective "):
        raise ParseError("solution document must start with an objective line")
    routes = []
    for ln, line in enumerate(lines[1:], start=2):
        head, _, body = line.partition(":")
        if not head.startswith("route"):
            raise ParseError(f"line {ln}: expected a route line, got {line!r}")
        try:
            visits = [int(v) for v in body.split()]
        except ValueError as exc:
            raise ParseError(f"line {ln}: malformed route body") from exc
        if len(visits) < 3 or visits[0] != 0 or visits[-1] != 0:
            raise ParseError(f"line {ln}: route must be depot-delimited")
        routes.append(tuple(visits[1:-1]))
    solution = Solution(tuple(routes))
    if instance is not None:
        solution.validate_structure(instance)
    return solution


# ---------------------------------------------------------------------------
# Prediction document


def write_prediction(instance: Instance, pairs: Iterable[tuple[int, int]]) -> str:
    lines = [f"instance {instance.id}"]
    for i, j in sorted(tuple(sorted(p)) for p in pairs):
        lines.append(f"unstable {i} {j}")
    return "\n".join(lines) + "\n"


def read_prediction(text: str, instance: Optional[Instance] = None) -> set[tuple[int, int]]:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or not lines[0].startswith("instance "):
        raise ParseError("prediction document must start with an instance line")
    pairs: set[tuple[int, int]] = set()
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3 or parts[0] != "unstable":
            raise ParseError(f"line {ln}: expected 'unstable <i> <j>'")
        try:
            i, j = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ParseError(f"line {ln}: malformed node indices") from exc
        if instance is not None:
            top = instance.n_customers
            if not (0 <= i <= top and 0 <= j <= top):
                raise ParseError(f"line {ln}: node index out of range")
        pairs.add((min(i, j), max(i, j)))
    return pairs


# ---------------------------------------------------------------------------
# Trace stream (line-delimited JSON records)


def write_trace(records: Iterable[dict]) -> str:
    import json

    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def read_trace(text: str) -> list[dict]:
    import json

    out = []
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {ln}: invalid trace record") from exc
        for key in ("instance_id", "iteration", "nar_labels", "ar_sequences"):
            if key not in rec:
                raise ParseError(f"line {ln}: trace record missing {key!r}")
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# CVRPLib subset (EUC_2D only)


def parse_cvrplib(text: str) -> Instance:
    lines = text.splitlines()
    header: dict[str, str] = {}
    coords: dict[int, tuple[float, float]] = {}
    demands: dict[int, float] = {}
    depot_ids: list[int] = []
    section = None
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line == "EOF":
            continue
        upper = line.split(":")[0].strip().upper()
        if upper in ("NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"):
            section = upper
            continue
        if section is None:
            if ":" not in line:
                raise ParseError(f"line {ln}: malformed header line {line!r}")
            key, _, value = line.partition(":")
            header[key.strip().upper()] = value.strip()
        elif section == "NODE_COORD_SECTION":
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"line {ln}: NODE_COORD_SECTION expects 'id x y'")
            coords[int(parts[0])] = (float(parts[1]), float(parts[2]))
        elif section == "DEMAND_SECTION":
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"line {ln}: DEMAND_SECTION expects 'id demand'")
            demands[int(parts[0])] = float(parts[1])
        elif section == "DEPOT_SECTION":
            value = int(line)
            if value != -1:
                depot_ids.append(value)

    for key in ("NAME", "DIMENSION", "CAPACITY", "EDGE_WEIGHT_TYPE"):
        if key not in header:
            raise ParseError(f"missing section: {key}")
    if header["EDGE_WEIGHT_TYPE"] != "EUC_2D":
        raise ParseError(
            f"unsupported EDGE_WEIGHT_TYPE: {header['EDGE_WEIGHT_TYPE']} (only EUC_2D)"
        )
    dim = int(header["DIMENSION"])
    if len(coords) != dim:
        raise ParseError(
            f"DIMENSION {dim} does not match NODE_COORD_SECTION count {len(coords)}"
        )
    if len(demands) != dim:
        raise ParseError(
            f"DIMENSION {dim} does not match DEMAND_SECTION count {len(demands)}"
        )
    if not depot_ids:
        raise ParseError("missing section: DEPOT_SECTION")
    depot = depot_ids[0]
    if demands.get(depot, 0) != 0:
        raise ParseError(f"depot {depot} has nonzero demand")

    order = [depot] + [i for i in sorted(coords) if i != depot]
    nodes = [
        Node(coords[i][0], coords[i][1], demands[i]) for i in order
    ]
    return Instance(
        Variant.CVRP,
        nodes,
        float(header["CAPACITY"]),
        DistanceMode.ROUNDED_INT,
        id=header["NAME"],
    )


def write_cvrplib(instance: Instance) -> str:
    if instance.variant is not Variant.CVRP:
        raise ValueError("CVRPLib export supports CVRP instances only")
    lines = [
        f"NAME : {instance.id}",
        "TYPE : CVRP",
        f"DIMENSION : {len(instance.nodes)}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        f"CAPACITY : {_fmt(instance.capacity)}",
        "NODE_COORD_SECTION",
    ]
    for i, n in enumerate(instance.nodes, start=1):
        lines.append(f"{i} {_fmt(n.x)} {_fmt(n.y)}")
    lines.append("DEMAND_SECTION")
    for i, n in enumerate(instance.nodes, start=1):
        lines.append(f"{i} {_fmt(n.demand)}")
    lines.extend(["DEPOT_SECTION", "1", "-1", "EOF"])
    return "\n".join(lines) + "\n"
