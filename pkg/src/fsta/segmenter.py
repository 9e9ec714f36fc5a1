"""Unstable-edge detection policies and segmenter scoring.

Policies mark a subset of the current solution's edges for re-optimization;
depot edges are always included so every route keeps a valid depot
attachment after cutting.
"""

from __future__ import annotations

import os
import random
import select
import subprocess
from dataclasses import dataclass
from typing import Optional

from .backbone import MoveBudget, ProblemView, solve_warm
from .model import (
    EdgeSet,
    Instance,
    Solution,
    canonical_edge,
    depot_edges,
    edge_diff,
    edge_set,
)
from . import gen_io


class SegmenterError(Exception):
    pass


class RandomPolicy:
    """Marks each non-depot solution edge independently with fixed probability."""

    def __init__(self, fraction: float, seed: int = 0):
        if not (0 < fraction <= 1):
            raise ValueError("fraction must lie in (0, 1]")
        self.fraction = fraction
        self.rng = random.Random(seed)

    def detect(self, instance: Instance, solution: Solution, backbone=None) -> EdgeSet:
        depot = depot_edges(solution)
        marked = {
            e
            for e in sorted(edge_set(solution) - depot)
            if self.rng.random() < self.fraction
        }
        return frozenset(marked) | depot


class GeometricPolicy:
    """Heuristic stand-in for a learned segmenter.

    Node internality is the fraction of a node's k nearest neighbors lying
    on the same route; an edge is marked unstable when either endpoint's
    internality falls below the threshold (nodes where routes interleave).
    """

    def __init__(self, k_nn: int = 15, internality_threshold: float = 0.8):
        if k_nn < 1:
            raise ValueError("k_nn must be >= 1")
        self.k_nn = k_nn
        self.threshold = internality_threshold

    def detect(self, instance: Instance, solution: Solution, backbone=None) -> EdgeSet:
        route_of: dict[int, int] = {}
        for r, route in enumerate(solution.routes):
            for c in route:
                route_of[c] = r
        customers = sorted(route_of)
        internality: dict[int, float] = {}
        for c in customers:
            near = sorted(
                (o for o in customers if o != c),
                key=lambda o: instance.distance(c, o),
            )[: self.k_nn]
            if not near:
                internality[c] = 1.0
                continue
            same = sum(1 for o in near if route_of[o] == route_of[c])
            internality[c] = same / len(near)
        depot = depot_edges(solution)
        marked = {
            (i, j)
            for (i, j) in edge_set(solution) - depot
            if internality[i] < self.threshold or internality[j] < self.threshold
        }
        return frozenset(marked) | depot


class OraclePolicy:
    """Lookahead oracle: one budgeted backbone step ahead, diffed edges."""

    def __init__(
        self,
        lookahead_budget: MoveBudget,
        mode: str = "lns",
        stall_limit: int = 30,
        perturbation_rounds: int = 0,
    ):
        self.lookahead_budget = lookahead_budget
        self.mode = mode
        self.stall_limit = stall_limit
        self.perturbation_rounds = perturbation_rounds
        self._calls = 0

    def detect(self, instance: Instance, solution: Solution, backbone=None) -> EdgeSet:
        budget = MoveBudget(
            self.lookahead_budget.max_moves,
            self.lookahead_budget.max_millis,
            seed=self.lookahead_budget.seed + self._calls,
        )
        self._calls += 1
        view = backbone if backbone is not None else ProblemView.from_instance(instance)
        ahead, _ = solve_warm(
            view,
            solution,
            budget,
            mode=self.mode,
            stall_limit=self.stall_limit,
            perturbation_rounds=self.perturbation_rounds,
        )
        changed = edge_diff(solution, ahead) & edge_set(solution)
        return changed | depot_edges(solution)


class ExternalFilePolicy:
    """Reads an externally produced prediction document on every call."""

    def __init__(self, path: str):
        self.path = path

    def detect(self, instance: Instance, solution: Solution, backbone=None) -> EdgeSet:
        with open(self.path) as f:
            pairs = gen_io.read_prediction(f.read(), instance)
        marked = {canonical_edge(i, j) for i, j in pairs} & edge_set(solution)
        return frozenset(marked) | depot_edges(solution)


class ExternalSubprocessPolicy:
    """Line protocol with a child process over its standard streams.

    Per call: `BEGIN <instance-id> <iteration>`, the solution document
    verbatim, `END`; the child answers `unstable <i> <j>` lines and `DONE`.
    """

    def __init__(self, command: list[str] | str, timeout: float = 30.0):
        self.command = command
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._buf = b""
        self._iteration = 0

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                shell=isinstance(self.command, str),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
            self._buf = b""
        return self._proc

    def _read_line(self, proc: subprocess.Popen) -> str:
        # Buffer raw bytes ourselves: select() on the fd would miss data a
        # buffered reader had already slurped past the first line.
        while b"\n" not in self._buf:
            ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
            if not ready:
                proc.kill()
                raise SegmenterError(
                    f"external segmenter timed out after {self.timeout}s"
                )
            chunk = os.read(proc.stdout.fileno(), 65536)
            if not chunk:
                raise SegmenterError("external segmenter closed its output stream")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode().strip()

    def detect(self, instance: Instance, solution: Solution, backbone=None) -> EdgeSet:
        proc = self._ensure_proc()
        payload = gen_io.write_solution(instance, solution)
        msg = f"BEGIN {instance.id} {self._iteration}\n" + payload
        if not payload.endswith("\n"):
            msg += "\n"
        msg += "END\n"
        proc.stdin.write(msg.encode())
        proc.stdin.flush()
        self._iteration += 1
        pairs: set[tuple[int, int]] = set()
        while True:
            line = self._read_line(proc)
            if line == "DONE":
                break
            parts = line.split()
            if len(parts) != 3 or parts[0] != "unstable":
                raise SegmenterError(f"protocol violation: {line!r}")
            try:
                pairs.add(canonical_edge(int(parts[1]), int(parts[2])))
            except ValueError as exc:
                raise SegmenterError(f"protocol violation: {line!r}") from exc
        marked = pairs & edge_set(solution)
        return frozenset(marked) | depot_edges(solution)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)


def make_policy(spec: str, seed: int = 0):
    """Build a policy from its CLI spec string.

    Forms: random:F | geometric:K:T | oracle:M | external-file:PATH |
    external-cmd:CMD
    """
    kind, _, rest = spec.partition(":")
    if kind == "random":
        return RandomPolicy(float(rest), seed=seed)
    if kind == "geometric":
        k, _, t = rest.partition(":")
        return GeometricPolicy(int(k or 15), float(t or 0.8))
    if kind == "oracle":
        return OraclePolicy(MoveBudget(max_moves=int(rest or 2000), seed=seed))
    if kind == "external-file":
        return ExternalFilePolicy(rest)
    if kind == "external-cmd":
        return ExternalSubprocessPolicy(rest)
    raise SegmenterError(f"unknown segmenter spec: {spec}")


@dataclass
class SegmenterScore:
    recall: float
    tnr: float
    predicted_count: int
    oracle_count: int


def score(predicted: EdgeSet, oracle: EdgeSet, universe: EdgeSet) -> SegmenterScore:
    if not predicted <= universe or not oracle <= universe:
        raise ValueError("predicted and oracle sets must be subsets of the universe")
    recall = (
        len(predicted & oracle) / len(oracle) if oracle else 1.0
    )
    stable_pred = universe - predicted
    stable_oracle = universe - oracle
    tnr = (
        len(stable_pred & stable_oracle) / len(stable_oracle)
        if stable_oracle
        else 1.0
    )
    return SegmenterScore(recall, tnr, len(predicted), len(oracle))
