"""Segment-and-aggregate decomposition engine for iterative re-optimization
of vehicle routing problems (CVRP, VRPTW, VRPB, single-commodity PDP)."""

from .backbone import MoveBudget, ProblemView, SearchStats, lns_step, local_search, solve_warm
from .driver import (
    LoopConfig,
    RunStats,
    TraceConfig,
    TraceRecord,
    decompose_subproblems,
    eval_segmenter,
    export_traces,
    measure_redundancy,
    run_fsta_loop,
    run_plain_loop,
)
from .gen_io import (
    GenSpec,
    SweepParams,
    generate,
    initial_solution_sweep,
    parse_cvrplib,
    read_instance,
    read_prediction,
    read_solution,
    read_trace,
    write_cvrplib,
    write_instance,
    write_prediction,
    write_solution,
    write_trace,
)
from .model import (
    DistanceMode,
    FeasibilityReport,
    Instance,
    Node,
    Solution,
    Variant,
    check_feasibility,
    depot_edges,
    edge_diff,
    edge_set,
    evaluate_objective,
)
from .reduction import (
    Hypernode,
    RecoveryMap,
    ReducedProblem,
    Segment,
    aggregate_segment,
    build_reduced,
    partition_segments,
    recover,
    reduced_objective,
    verify_theorem,
)
from .segmenter import (
    GeometricPolicy,
    OraclePolicy,
    RandomPolicy,
    SegmenterScore,
    make_policy,
    score,
)

__all__ = [name for name in dir() if not name.startswith("_")]
