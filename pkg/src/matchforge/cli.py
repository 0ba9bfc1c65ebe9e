"""Command-line entry point: ``matchforge <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 infeasible, 3 solver failure.
Every subcommand reads and writes explicit paths; nothing depends on cwd state.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .blocking import count_blocking_pairs, rural_hospitals_audit
from .core import (dump_instance, load_instance, read_matching, total_travel,
                   validate_instance, write_matching)
from .da import program_proposing_da, student_proposing_da
from .errors import Infeasible, InfeasibleConfig, MatchforgeError, SolverFailure
from .exact import solve_exact
from .forward import WeightTriple
from .inverse import load_cost_vector, recover_cost, save_cost_vector
from .metrics import compute_metrics, emit_csv, emit_json, report_to_json
from .synth import GenConfig, gen_residency_instance, gen_school_instance
from . import pipeline

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _weights(text: str) -> WeightTriple:
    try:
        return WeightTriple.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="random seed (default 0)")
    p.add_argument("--jobs", type=int, default=d(None),
                   help="worker processes for sweeps (default: available cores)")
    p.add_argument("--time-limit", type=float, default=d(None),
                   help="per-solve time limit in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="matchforge",
                     description="Stable matching, inverse cost recovery and "
                                 "blocking-pair trade-off assignment.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic instance")
    p.add_argument("--config", help="JSON file of generator settings; flags override it")
    p.add_argument("--students", type=int, default=None, help="default 1000")
    p.add_argument("--schools", type=int, default=None, help="default 20")
    p.add_argument("--capacity-factor", type=float, default=None, help="default 1.0")
    p.add_argument("--mu", type=float, default=None, help="default 0.75")
    p.add_argument("--phi", type=_floats, default=None, help="comma-separated phi values")
    p.add_argument("--rank-range", type=_ints, default=None, help="min,max list length")
    p.add_argument("--couples", type=int, default=None,
                   help="number of coupled applicants (even); >0 builds a residency instance")
    p.add_argument("--literal-distance-sign", action="store_true", default=None,
                   help="add distance to utilities instead of closeness")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("da", parents=[common], help="run deferred acceptance")
    p.add_argument("instance")
    p.add_argument("--proposer", choices=("student", "program"), default="student")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("audit", parents=[common],
                       help="count blocking pairs of a matching; optional rural-hospitals check")
    p.add_argument("instance")
    p.add_argument("matching")
    p.add_argument("--rural-hospitals", action="store_true")
    p.add_argument("-o", "--output", help="write the blocking report as JSON")

    p = sub.add_parser("exact", parents=[common], help="exact MIP with a blocking-pair budget")
    p.add_argument("instance")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--min-matched", type=int, default=None,
                   help="default: DA matched count")
    p.add_argument("--formulation", choices=("direct", "chain"), default="chain")
    p.add_argument("--max-pairs", type=int, default=5000)
    p.add_argument("-o", "--output")

    p = sub.add_parser("inverse", parents=[common], help="recover the stability cost vector")
    p.add_argument("instance")
    p.add_argument("--reference", help="stable matching CSV (default: student-proposing DA)")
    p.add_argument("--lambda-reg", type=float, default=1.0)
    p.add_argument("--prior", choices=("uniform", "distance"), default="uniform")
    p.add_argument("--surrogate", choices=("squared_l2", "l1"), default=None)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("assign", parents=[common], help="forward multi-objective assignment")
    p.add_argument("instance")
    p.add_argument("--cost-vector", required=True)
    p.add_argument("--mode", choices=("school", "residency"), default="school")
    p.add_argument("--travel-target", type=float, default=None,
                   help="total travel cap in miles (default: DA travel)")
    p.add_argument("--couples-target", type=int, default=None,
                   help="minimum co-located couples (default: DA count)")
    p.add_argument("--weights", type=_weights, default=None,
                   help="l1,l2,l3; omitted means grid search")
    p.add_argument("--grid-levels", type=_floats, default=None,
                   help="levels of the weight cube (default 0,0.25,0.5,0.75,1)")
    p.add_argument("--min-matched", type=int, default=None, help="default: DA matched count")
    p.add_argument("--reference", help="stable matching CSV used for defaults")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--report", help="write metrics JSON here")

    p = sub.add_parser("sweep", parents=[common], help="trade-off sweep to CSV")
    p.add_argument("instance")
    p.add_argument("--kind", choices=("travel", "min-matched", "couples"), default="travel")
    p.add_argument("--values", type=_floats, default=None,
                   help="absolute targets (miles, counts)")
    p.add_argument("--fractions", type=_floats, default=None,
                   help="travel targets as fractions of DA travel")
    p.add_argument("--cost-vector", default=None)
    p.add_argument("--grid-levels", type=_floats, default=None)
    p.add_argument("--min-matched", type=int, default=None)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("compare", parents=[common], help="exact vs inverse pipeline table")
    p.add_argument("instance")
    p.add_argument("--budgets", type=_ints, default=None, help="absolute budgets")
    p.add_argument("--budget-fractions", type=_floats, default=None,
                   help="budgets as fractions of admissible pairs")
    p.add_argument("--grid-levels", type=_floats, default=None)
    p.add_argument("--formulation", choices=("direct", "chain"), default="chain")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("report", parents=[common], help="metrics of a matching")
    p.add_argument("instance")
    p.add_argument("matching")
    p.add_argument("--baseline", help="matching CSV for travel reduction")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-o", "--output")
    return parser


# ------------------------------------------------------------------ handlers
def _instance(path):
    return validate_instance(load_instance(path))


def _grid(levels):
    return None if levels is None else pipeline.weight_grid(levels)


def _limit(args, default=pipeline.DEFAULT_SOLVE_LIMIT):
    return default if args.time_limit is None else args.time_limit


GEN_FLAGS = {"students": "n_applicants", "schools": "n_programs",
             "capacity_factor": "total_capacity_factor", "mu": "mu", "phi": "phi_values",
             "rank_range": "rank_range", "couples": "couples_count",
             "literal_distance_sign": "literal_distance_sign"}


def gen_config(args) -> GenConfig:
    """Defaults, then the ``--config`` file, then explicit flags."""
    settings = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            settings = json.load(fh)
        unknown = set(settings) - set(GenConfig.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown generator settings: {sorted(unknown)}")
    for flag, key in GEN_FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            settings[key] = val
    if "seed" not in settings or args.seed != 0:
        settings["seed"] = args.seed
    for key in ("phi_values", "rank_range"):
        if key in settings:
            settings[key] = tuple(settings[key])
    if "rank_range" not in settings:
        m = settings.get("n_programs", GenConfig.n_programs)
        settings["rank_range"] = (min(2, m), min(9, m))
    if len(settings["rank_range"]) != 2:
        raise UsageError("--rank-range takes two integers")
    return GenConfig(**settings)


def cmd_gen(args) -> int:
    cfg = gen_config(args)
    inst = gen_residency_instance(cfg) if cfg.couples_count else gen_school_instance(cfg)
    dump_instance(inst, args.output)
    return EXIT_OK


def cmd_da(args) -> int:
    inst = _instance(args.instance)
    fn = student_proposing_da if args.proposer == "student" else program_proposing_da
    write_matching(inst, fn(inst), args.output)
    return EXIT_OK


def cmd_audit(args) -> int:
    inst = _instance(args.instance)
    rep = count_blocking_pairs(inst, read_matching(inst, args.matching))
    out = rep.to_json_dict(inst)
    if args.rural_hospitals:
        rh = rural_hospitals_audit(inst)
        out["rural_hospitals"] = {"same_matched_set": rh.same_matched_set,
                                  "same_fills": rh.same_fills,
                                  "same_undercapacity_rosters": rh.same_undercapacity_rosters}
    print(f"bp_count {rep.count}")
    print(f"bp_pct {100.0 * rep.pct_of_admissible:.6g}")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(json.dumps(out, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_exact(args) -> int:
    inst = _instance(args.instance)
    n = student_proposing_da(inst).matched_count if args.min_matched is None else args.min_matched
    res = solve_exact(inst, args.budget, n, time_limit=args.time_limit,
                      max_pairs=args.max_pairs, formulation=args.formulation)
    print(f"travel {res.travel:.6g}")
    print(f"bp_count {res.report.count}")
    if res.timed_out:
        print("warning: time limit reached; returning the incumbent", file=sys.stderr)
    if args.output:
        write_matching(inst, res.matching, args.output)
    return EXIT_OK


def cmd_inverse(args) -> int:
    inst = _instance(args.instance)
    ref = read_matching(inst, args.reference) if args.reference else student_proposing_da(inst)
    cv = recover_cost(inst, ref, lambda_reg=args.lambda_reg, prior=args.prior,
                      surrogate=args.surrogate, time_limit=args.time_limit)
    save_cost_vector(inst, cv, args.output)
    return EXIT_OK


def cmd_assign(args) -> int:
    inst = _instance(args.instance)
    ref = read_matching(inst, args.reference) if args.reference else None
    cv = load_cost_vector(inst, args.cost_vector)
    res = pipeline.run_pipeline(inst, mode=args.mode, travel_target=args.travel_target,
                                  couples_target=args.couples_target, n_min=args.min_matched,
                                  weights=args.weights, grid=_grid(args.grid_levels),
                                  x_ref=ref, cost=cv, time_limit=_limit(args), jobs=args.jobs)
    write_matching(inst, res.matching, args.output)
    if args.report:
        emit_json(res.metrics, args.report)
    print(f"weights {res.weights}")
    print(f"bp_count {res.metrics.bp_count}")
    print(f"avg_travel_miles {res.metrics.avg_travel_miles:.6g}")
    if res.timed_out:
        print("warning: time limit reached; returning the incumbent", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    inst = _instance(args.instance)
    ref = student_proposing_da(inst)
    cv = load_cost_vector(inst, args.cost_vector) if args.cost_vector else None
    common = dict(grid=_grid(args.grid_levels), x_ref=ref, cost=cv, time_limit=_limit(args),
                  jobs=args.jobs)
    if args.kind == "travel":
        if args.values is not None:
            targets = args.values
        else:
            targets = pipeline.travel_grid(inst, ref, args.fractions or [1.0, 0.99, 0.98, 0.97, 0.95])
        rows = pipeline.sweep_travel(inst, targets, n_min=args.min_matched, **common)
    elif args.kind == "min-matched":
        if args.values is None:
            raise UsageError("--kind min-matched needs --values")
        rows = pipeline.sweep_min_matched(inst, [int(v) for v in args.values], **common)
    else:
        if args.values is None:
            raise UsageError("--kind couples needs --values")
        rows = pipeline.sweep_couples(inst, [int(v) for v in args.values],
                                      n_min=args.min_matched, **common)
    emit_csv(rows, pipeline.SWEEP_COLUMNS, args.output)
    return EXIT_OK


def cmd_compare(args) -> int:
    inst = _instance(args.instance)
    if args.budgets is not None:
        budgets = args.budgets
    else:
        fr = args.budget_fractions or [0.0, 0.02, 0.05, 0.10]
        budgets = [int(round(f * inst.n_pairs)) for f in fr]
    rows = pipeline.compare_exact_inverse(inst, budgets, grid=_grid(args.grid_levels),
                                          exact_time_limit=args.time_limit,
                                          time_limit=_limit(args),
                                          formulation=args.formulation, jobs=args.jobs)
    emit_csv(rows, pipeline.COMPARE_COLUMNS, args.output)
    return EXIT_OK


def cmd_report(args) -> int:
    inst = _instance(args.instance)
    m = read_matching(inst, args.matching)
    base = read_matching(inst, args.baseline) if args.baseline else None
    rep = compute_metrics(inst, m, baseline=base)
    if args.format == "json":
        text = report_to_json(rep)
        if args.output:
            emit_json(rep, args.output)
        else:
            sys.stdout.write(text)
    else:
        row = rep.to_json_dict()
        row["rank_histogram"] = " ".join(f"{k}:{v}" for k, v in row["rank_histogram"].items())
        cols = list(row)
        if args.output:
            emit_csv([row], cols, args.output)
        else:
            from .metrics import table_to_csv
            sys.stdout.write(table_to_csv([row], cols))
    return EXIT_OK


HANDLERS = {"gen": cmd_gen, "da": cmd_da, "audit": cmd_audit, "exact": cmd_exact,
            "inverse": cmd_inverse, "assign": cmd_assign, "sweep": cmd_sweep,
            "compare": cmd_compare, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"matchforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleConfig as exc:
        print(f"matchforge {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Infeasible as exc:
        print(f"matchforge {args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverFailure as exc:
        print(f"matchforge {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (MatchforgeError, OSError, ValueError, KeyError) as exc:
        print(f"matchforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
