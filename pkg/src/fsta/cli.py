"""Command-line surface: instance generation, solving, the reduced
re-optimization loop, labeling, trace export, profiling, and parsing."""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from . import driver, gen_io
from .backbone import MoveBudget, ProblemView, solve_warm
from .model import Instance, Variant, evaluate_objective
from .reduction import verify_theorem
from .segmenter import OraclePolicy, make_policy


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_instance(path: str) -> Instance:
    text = Path(path).read_text()
    if text.lstrip().startswith("NAME"):
        return gen_io.parse_cvrplib(text)
    return gen_io.read_instance(text)


def _gen_spec(args) -> gen_io.GenSpec:
    return gen_io.GenSpec(
        Variant(args.variant),
        args.n,
        args.capacity,
        demand_model=args.demand_model,
        spatial=args.spatial,
        seed=args.seed,
    )


def _initial(instance: Instance, seed: int) -> "gen_io.Solution":
    params = gen_io.SweepParams()
    budget = MoveBudget(max_moves=500, seed=seed)
    return gen_io.initial_solution_sweep(instance, params, budget)


def _stats_lines(stats: driver.RunStats) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in stats.records)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", default="cvrp", choices=[v.value for v in Variant])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--capacity", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--demand-model", default="uniform_1_9")
    p.add_argument("--spatial", default="uniform_square")
    p.add_argument("--instance", help="read this instance file instead of generating")
    p.add_argument("--out", default=None)


def _add_budget(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backbone", default="ls", choices=["ls", "lns"])
    p.add_argument("--moves-per-iter", type=int, default=1000)
    p.add_argument("--time-limit-ms", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)


def _get_instance(args) -> Instance:
    if args.instance:
        return _load_instance(args.instance)
    return gen_io.generate(_gen_spec(args))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fsta")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an instance document")
    _add_common(p)

    p = sub.add_parser("solve", help="run the backbone on the full problem")
    _add_common(p)
    _add_budget(p)
    p.add_argument("--stats", default=None)

    p = sub.add_parser("fsta-run", help="run the reduced re-optimization loop")
    _add_common(p)
    _add_budget(p)
    p.add_argument(
        "--segmenter",
        default="oracle:200",
        help="random:F | geometric:K:T | oracle:M | external-file:PATH | external-cmd:\"CMD\"",
    )
    p.add_argument("--oracle-free-time", action="store_true")
    p.add_argument("--stats", default=None)

    p = sub.add_parser("oracle-label", help="write the lookahead oracle's edge set")
    _add_common(p)
    _add_budget(p)

    p = sub.add_parser("export-traces", help="export node labels and move sequences")
    _add_common(p)
    _add_budget(p)
    p.add_argument("--count", type=int, default=1, help="number of generated instances")
    p.add_argument("--t-is", type=int, default=40)
    p.add_argument("--eta-improv", type=float, default=0.0)
    p.add_argument("--alpha-ac", type=float, default=0.0)
    p.add_argument("--trace", default=None)

    p = sub.add_parser("eval-segmenter", help="score a policy against the oracle")
    _add_common(p)
    _add_budget(p)
    p.add_argument("--segmenter", default="geometric:15:0.8")
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--stats", default=None)

    p = sub.add_parser("redundancy", help="changed-edge fraction per backbone step")
    _add_common(p)
    _add_budget(p)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--stats", default=None)

    p = sub.add_parser("verify-theorem", help="feasibility/order-preservation check")
    _add_common(p)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--unstable-fraction", type=float, default=0.4)

    p = sub.add_parser("parse", help="parse an instance file and echo it canonically")
    p.add_argument("path")
    p.add_argument("--format", default="native", choices=["native", "cvrplib"])
    p.add_argument("--out", default=None)

    args = parser.parse_args(argv)

    if args.command == "generate":
        instance = _get_instance(args)
        _write(args.out, gen_io.write_instance(instance))
        return 0

    if args.command == "parse":
        text = Path(args.path).read_text()
        if args.format == "cvrplib" or text.lstrip().startswith("NAME"):
            instance = gen_io.parse_cvrplib(text)
            _write(args.out, gen_io.write_cvrplib(instance))
        else:
            instance = gen_io.read_instance(text)
            _write(args.out, gen_io.write_instance(instance))
        return 0

    instance = _get_instance(args)

    if args.command == "solve":
        init = _initial(instance, args.seed)
        cfg = driver.LoopConfig(
            segmenter=None,
            backbone_mode=args.backbone,
            moves_per_iter=args.moves_per_iter,
            time_limit_ms=args.time_limit_ms,
            max_iters=args.iters if (args.iters or args.time_limit_ms) else 1,
            seed=args.seed,
        )
        best, stats = driver.run_plain_loop(instance, init, cfg)
        if args.stats:
            _write(args.stats, _stats_lines(stats))
        _write(args.out, gen_io.write_solution(instance, best))
        return 0

    if args.command == "fsta-run":
        init = _initial(instance, args.seed)
        cfg = driver.LoopConfig(
            segmenter=make_policy(args.segmenter, args.seed),
            backbone_mode=args.backbone,
            moves_per_iter=args.moves_per_iter,
            time_limit_ms=args.time_limit_ms,
            max_iters=args.iters if (args.iters or args.time_limit_ms) else 10,
            oracle_free_time=args.oracle_free_time,
            seed=args.seed,
        )
        best, stats = driver.run_fsta_loop(instance, init, cfg)
        if args.stats:
            _write(args.stats, _stats_lines(stats))
        _write(args.out, gen_io.write_solution(instance, best))
        return 0

    if args.command == "oracle-label":
        init = _initial(instance, args.seed)
        policy = OraclePolicy(
            MoveBudget(args.moves_per_iter, args.time_limit_ms, seed=args.seed),
            mode=args.backbone,
        )
        unstable = policy.detect(instance, init)
        _write(args.out, gen_io.write_prediction(instance, unstable))
        return 0

    if args.command == "export-traces":
        runs = []
        for k in range(args.count):
            spec = _gen_spec(args)
            spec.seed = args.seed + k
            inst = instance if args.instance and k == 0 else gen_io.generate(spec)
            runs.append((inst, _initial(inst, spec.seed)))
        cfg = driver.TraceConfig(
            t_is=args.t_is,
            moves_per_iter=args.moves_per_iter,
            backbone_mode=args.backbone,
            eta_improv=args.eta_improv,
            alpha_ac=args.alpha_ac,
            seed=args.seed,
        )
        records, skipped = driver.export_traces(runs, cfg)
        _write(args.trace or args.out, gen_io.write_trace(r.to_dict() for r in records))
        print(f"records {len(records)} skipped_components {skipped}", file=sys.stderr)
        return 0

    if args.command == "eval-segmenter":
        runs = []
        for k in range(args.count):
            spec = _gen_spec(args)
            spec.seed = args.seed + k
            inst = gen_io.generate(spec)
            runs.append((inst, _initial(inst, spec.seed)))
        policy = make_policy(args.segmenter, args.seed)
        oracle = OraclePolicy(MoveBudget(args.moves_per_iter, seed=args.seed + 7919))
        aggregate, all_stats = driver.eval_segmenter(
            runs,
            policy,
            oracle,
            iters=args.iters or 10,
            moves_per_iter=args.moves_per_iter,
            backbone_mode=args.backbone,
            seed=args.seed,
        )
        if args.stats:
            _write(
                args.stats,
                "".join(_stats_lines(s) for s in all_stats),
            )
        _write(args.out, json.dumps(aggregate, sort_keys=True) + "\n")
        return 0

    if args.command == "redundancy":
        init = _initial(instance, args.seed)
        fractions = driver.measure_redundancy(
            instance,
            init,
            steps=args.steps,
            moves_per_iter=args.moves_per_iter,
            backbone_mode=args.backbone,
            seed=args.seed,
        )
        lines = "".join(
            json.dumps({"iter": i, "changed_frac": f}) + "\n"
            for i, f in enumerate(fractions)
        )
        _write(args.stats or args.out, lines)
        med = statistics.median(fractions[1:]) if len(fractions) > 1 else fractions[0]
        print(f"median_changed_frac {med:.4f}", file=sys.stderr)
        return 0

    if args.command == "verify-theorem":
        from .segmenter import RandomPolicy

        init = _initial(instance, args.seed)
        policy = RandomPolicy(args.unstable_fraction, seed=args.seed)
        unstable = policy.detect(instance, init)
        report = verify_theorem(instance, init, unstable, trials=args.trials, seed=args.seed)
        print(
            f"checked {report.pairs_checked} pairs, "
            f"violations {len(report.violations)}"
        )
        for v in report.violations[:5]:
            print(f"  {v}")
        return 0 if not report.violations else 1

    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
