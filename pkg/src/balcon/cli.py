"""Command-line entry point.

Subcommands: solve, generate, oracle, export-ilp, eval, sweep.  Results go
to files or stdout, diagnostics to stderr; exit status 0 on success, 1 on
usage errors, 2 on rejected input (malformed or infeasible instances, oracle
size refusals).

Memory is counted in abstract units with 1 unit = 1 MiB, so ``--mph``
accepts raw units or a binary suffix: 1TiB = 2**20 units.  ``--mph inf``
selects pure bin-packing mode.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from .datagen import GenConfig, GenerationError, generate_instance
from .evaluate import (
    ALGORITHMS,
    evaluate_instance,
    mean_gap,
    mph_sweep,
    performance_profile,
    write_gaps_csv,
    write_profile_csv,
    write_sweep_csv,
)
from .ilp import ModelKind, SolutionError, emit_model, lp_suffix, read_solution
from .model import (
    InfeasibleInstanceError,
    InstanceFormatError,
    ObjectiveWeights,
    ResourceVec,
    instance_with_mapping,
    load_instance,
    save_instance,
)
from .classify import DEFAULT_ALPHA
from .oracle import OracleLimits, OracleSizeError, brute_force_optimal
from .sercon import SerconOriginalParams, sercon_modified, sercon_original
from .solver import (
    DEFAULT_FORCE_STEP_LIMIT,
    DEFAULT_REPEAT_LIMIT,
    SolverParams,
    balcon,
)

__all__ = ["main", "entry_point", "parse_mph"]

_MPH_UNITS = {
    "KiB": Fraction(1, 1024),
    "MiB": Fraction(1),
    "GiB": Fraction(1024),
    "TiB": Fraction(1 << 20),
}


def parse_mph(text: str) -> Fraction | float:
    t = text.strip()
    if t.lower() in ("inf", "infinity"):
        return math.inf
    match = re.fullmatch(r"(\d+(?:\.\d+)?)(KiB|MiB|GiB|TiB)?", t)
    if match is None:
        raise ValueError(f"bad mph value {text!r}: expected units, a KiB/MiB/GiB/TiB suffix, or 'inf'")
    value = Fraction(match.group(1))
    if match.group(2):
        value *= _MPH_UNITS[match.group(2)]
    return value


def _parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad rational value {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; rejected inputs exit 2 elsewhere
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mph", type=parse_mph, default=math.inf,
                        help="migration budget per released host (units, KiB/MiB/GiB/TiB suffix, or 'inf')")
    parser.add_argument("--alpha", type=_parse_fraction, default=DEFAULT_ALPHA,
                        help="balanced/lopsided threshold (default 0.95)")
    parser.add_argument("--force-steps", type=int, default=DEFAULT_FORCE_STEP_LIMIT,
                        help=f"force-step budget per release attempt (default {DEFAULT_FORCE_STEP_LIMIT})")
    parser.add_argument("--gamma", type=int, default=DEFAULT_REPEAT_LIMIT,
                        help=f"max consecutive choices of one destination host (default {DEFAULT_REPEAT_LIMIT})")


def _solver_params(args) -> SolverParams:
    return SolverParams(
        weights=ObjectiveWeights.from_mph(args.mph),
        alpha=args.alpha,
        force_step_limit=args.force_steps,
        repeat_limit=args.gamma,
    )


def _emit_instance(inst, path: str | None) -> None:
    if path:
        save_instance(inst, path)
    else:
        from .model import instance_to_dict

        json.dump(instance_to_dict(inst), sys.stdout, indent=1)
        sys.stdout.write("\n")


def _report_dict(report) -> dict:
    def num(x):
        if x == math.inf:
            return "inf"
        if isinstance(x, Fraction):
            return str(x) if x.denominator != 1 else int(x)
        return x

    return {
        "algorithm": report.algorithm,
        "active_hosts": report.active_hosts,
        "migrated_mem": report.migrated_mem,
        "objective": num(report.objective),
        "force_steps": report.force_steps,
        "wall_time": report.wall_time,
        "attempts": [
            {
                "host": a.host,
                "accepted": a.accepted,
                "released": a.released,
                "force_steps": a.force_steps,
                "class_counts": a.class_counts,
            }
            for a in report.attempts
        ],
    }


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    params = _solver_params(args)
    trace = None
    if args.verbose:
        trace = lambda event: print(json.dumps(event), file=sys.stderr)
    if args.algo == "balcon":
        mapping, report = balcon(inst, params, trace=trace)
    elif args.algo == "sercon-mod":
        mapping, report = sercon_modified(inst, params)
    else:
        sp = SerconOriginalParams(
            max_total_migrations=args.max_migrations,
            min_migration_efficiency=args.min_efficiency,
        )
        mapping, report = sercon_original(inst, params, sp)
    _emit_instance(instance_with_mapping(inst, mapping), args.output)
    if args.report:
        Path(args.report).write_text(json.dumps(_report_dict(report), indent=1) + "\n")
    summary = _report_dict(report)
    summary.pop("attempts")
    print(json.dumps(summary), file=sys.stderr)
    return 0


def cmd_generate(args) -> int:
    cfg = GenConfig(
        seed=args.seed,
        num_hosts=args.hosts,
        host_capacity=ResourceVec(args.cpu, args.mem),
        num_flavors=args.flavors,
        target_fill=args.fill,
        mode=args.mode,
    )
    inst = generate_instance(cfg)
    _emit_instance(inst, args.output)
    print(
        json.dumps({"hosts": len(inst.hosts), "vms": len(inst.vms), "flavors": len(inst.flavors)}),
        file=sys.stderr,
    )
    return 0


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    limits = OracleLimits(args.max_vms, args.max_hosts, args.node_budget)
    result = brute_force_optimal(inst, ObjectiveWeights.from_mph(args.mph), limits)
    _emit_instance(instance_with_mapping(inst, result.mapping), args.output)
    obj = result.objective
    print(
        json.dumps(
            {
                "objective": str(obj) if isinstance(obj, Fraction) and obj.denominator != 1 else int(obj),
                "active_hosts": result.mapping.active_count(),
                "explored": result.explored,
            }
        ),
        file=sys.stderr,
    )
    return 0


_MODEL_CHOICES = {
    "alloc": [ModelKind.ALLOCATION],
    "flow": [ModelKind.FLAVOR_FLOW],
    "flowlb": [ModelKind.RELAXED_FLAVOR_FLOW],
    "all": list(ModelKind),
}


def cmd_export_ilp(args) -> int:
    inst = load_instance(args.instance)
    weights = ObjectiveWeights.from_mph(args.mph)
    stem = Path(args.instance).stem
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for kind in _MODEL_CHOICES[args.model]:
        path = out_dir / f"{stem}{lp_suffix(kind)}"
        with open(path, "w") as fh:
            counts = emit_model(kind, inst, weights, fh)
        print(
            json.dumps(
                {
                    "model": kind.value,
                    "file": str(path),
                    "variables": counts.variables,
                    "constraints": counts.constraints,
                }
            ),
            file=sys.stderr,
        )
    return 0


def _algo_list(text: str) -> list[str]:
    names = [a.strip() for a in text.split(",") if a.strip()]
    for name in names:
        if name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
    return names


def _eval_worker(payload):
    path, algorithms, params, lb_text = payload
    inst = load_instance(path)
    lb_obj = None
    if lb_text is not None:
        lb_obj = read_solution(
            ModelKind.RELAXED_FLAVOR_FLOW, inst, lb_text, params.weights
        ).objective
    return evaluate_instance(Path(path).stem, inst, algorithms, params, lb_objective=lb_obj)


def cmd_eval(args) -> int:
    params = _solver_params(args)
    payloads = []
    for path in args.instances:
        lb_text = None
        if args.lb_dir:
            lb_path = Path(args.lb_dir) / f"{Path(path).stem}.flowlb.sol"
            if lb_path.exists():
                lb_text = lb_path.read_text()
        payloads.append((path, args.algos, params, lb_text))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            per_instance = list(pool.map(_eval_worker, payloads))
    else:
        per_instance = [_eval_worker(p) for p in payloads]
    records = [r for batch in per_instance for r in batch]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_gaps_csv(records, out_dir / "gaps.csv")
    thresholds = [Fraction(i, 20) for i in range(21)]
    write_profile_csv(performance_profile(records, thresholds), out_dir / "profile.csv")
    mg = mean_gap(records, non_trivial_only=not args.include_trivial)
    print(
        json.dumps(
            {
                "instances": len(args.instances),
                "records": len(records),
                "mean_gap": None if mg is None else float(mg),
            }
        ),
        file=sys.stderr,
    )
    return 0


def _sweep_worker(payload):
    inst, algorithms, mph, params = payload
    return mph_sweep(inst, algorithms, [mph], base_params=params)


def cmd_sweep(args) -> int:
    inst = load_instance(args.instance)
    params = _solver_params(args)
    grid = [parse_mph(v) for v in args.grid.split(",") if v.strip()]
    payloads = [(inst, args.algos, mph, params) for mph in grid]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            batches = list(pool.map(_sweep_worker, payloads))
    else:
        batches = [_sweep_worker(p) for p in payloads]
    points = [p for batch in batches for p in batch]
    write_sweep_csv(points, args.output)
    print(json.dumps({"points": len(points), "file": args.output}), file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="balcon", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[], help="run a consolidation heuristic")
    p.add_argument("instance")
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default="balcon")
    _add_solver_flags(p)
    p.add_argument("--max-migrations", type=int, default=None,
                   help="sercon-orig: total migration budget")
    p.add_argument("--min-efficiency", type=_parse_fraction, default=Fraction(0),
                   help="sercon-orig: migration efficiency threshold")
    p.add_argument("-o", "--output", default=None, help="result mapping JSON (default stdout)")
    p.add_argument("--report", default=None, help="write the full run report JSON here")
    p.add_argument("-v", "--verbose", action="store_true", help="per-step trace on stderr")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="generate a synthetic instance")
    p.add_argument("--mode", choices=("lopsided", "uniform"), default="lopsided")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--hosts", type=int, required=True)
    p.add_argument("--cpu", type=int, default=16, help="host cpu capacity (default 16)")
    p.add_argument("--mem", type=int, default=32, help="host mem capacity in units (default 32)")
    p.add_argument("--flavors", type=int, default=30)
    p.add_argument("--fill", type=float, default=0.9)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("oracle", help="exact optimum for a tiny instance")
    p.add_argument("instance")
    p.add_argument("--mph", type=parse_mph, default=math.inf)
    p.add_argument("--max-vms", type=int, default=OracleLimits.max_vms)
    p.add_argument("--max-hosts", type=int, default=OracleLimits.max_hosts)
    p.add_argument("--node-budget", type=int, default=OracleLimits.node_budget)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export-ilp", help="emit LP-format integer programs")
    p.add_argument("instance")
    p.add_argument("--model", choices=sorted(_MODEL_CHOICES), default="all")
    p.add_argument("--mph", type=parse_mph, default=math.inf)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_export_ilp)

    p = sub.add_parser("eval", help="gap records and performance profile over instances")
    p.add_argument("instances", nargs="+")
    p.add_argument("--algos", type=_algo_list, default=list(ALGORITHMS))
    _add_solver_flags(p)
    p.add_argument("--lb-dir", default=None,
                   help="directory with <instance>.flowlb.sol lower-bound dumps")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--include-trivial", action="store_true",
                   help="include no-improvement instances in the mean gap")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep the migration budget on one instance")
    p.add_argument("instance")
    p.add_argument("--grid", required=True, help="comma-separated mph values, e.g. 0,4,1GiB,inf")
    p.add_argument("--algos", type=_algo_list, default=["balcon", "sercon-mod"])
    _add_solver_flags(p)
    p.add_argument("-o", "--output", default="sweep.csv")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 1
    try:
        return args.func(args)
    except (
        InstanceFormatError,
        InfeasibleInstanceError,
        OracleSizeError,
        GenerationError,
        SolutionError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
