"""Command-line interface.

Subcommands: ``plan`` (run the cut loop and write report/plan JSON),
``certify`` (exhaustive extreme-point check of a saved plan), ``simulate``
(Monte Carlo metrics for a saved plan), ``dump-sets`` (audit dump of the
built uncertainty sets).

Exit codes: 0 success, 2 parse error, 3 validation error, 4 infeasible,
5 backend error, 6 iteration limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .ccg import CcgConfig, run
from .errors import (BackendError, InputError, RobexError, ValidationError)
from .master import MasterOptions, SystemIndex
from .oracle import certify_plan
from .simulate import ScenarioConfig, evaluate
from .solver import SolveParams
from .subproblems import jsonl_logger
from .uncertainty import (build_slotted_model, build_uncertainty,
                          equal_slot_durations)

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_INFEASIBLE = 4
EXIT_BACKEND = 5
EXIT_ITERATION_LIMIT = 6


def _uncertainty_args(p: argparse.ArgumentParser):
    p.add_argument("--slots", type=int, default=12,
                   help="number of equal-duration curve slots (default 12)")
    p.add_argument("--growth", type=float, default=0.0,
                   help="yearly growth applied to a base-year curve")
    p.add_argument("--error-fraction", type=float, default=0.05,
                   help="level half-width as a fraction of the slot level")
    p.add_argument("--budget", type=int, default=1,
                   help="per-slot cardinality budget on deviating buses")


def _solver_args(p: argparse.ArgumentParser):
    p.add_argument("--rel-gap", type=float, default=1e-6)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--threads", type=int, default=1)


def _load_inputs(args):
    system = io.load_system(args.system)
    curves = io.load_curves(args.curves)
    years = list(system.horizon.years)
    if "per_year" in curves:
        per_year = curves["per_year"]
        missing = [y for y in years if y not in per_year]
        if missing:
            raise InputError(f"curve file lacks years {missing}")
        some = next(iter(per_year.values()))
        hours = len(next(iter(some.values())).values)
        durations = equal_slot_durations(hours, args.slots)
        loads = build_slotted_model({}, years, durations, per_year=per_year)
    else:
        base = curves["base"]
        hours = len(next(iter(base.values())).values)
        durations = equal_slot_durations(hours, args.slots)
        loads = build_slotted_model(base, years, durations,
                                    growth_rate=args.growth)
    unc = build_uncertainty(loads, args.error_fraction, np.asarray(args.budget))
    return system, loads, unc


def _cmd_plan(args) -> int:
    system, loads, unc = _load_inputs(args)
    options = MasterOptions(enable_lines=not args.no_lines,
                            enable_gens=not args.no_gens,
                            enable_facts=not args.no_facts)
    config = CcgConfig(
        tolerance=args.tolerance, max_iterations=args.max_iter, mode=args.mode,
        options=options,
        solver=SolveParams(time_limit=args.time_limit, rel_gap=args.rel_gap,
                           threads=args.threads),
        workers=args.workers, dump_lp_dir=args.dump_lp)
    log = jsonl_logger(args.verdict_log) if args.verdict_log else None
    try:
        report = run(system, loads, unc, config, log=log)
    finally:
        if log is not None:
            log.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.save_report(report, out / "report.json")
    if report.plan is not None:
        io.save_plan(report.plan, out / "plan.json")
    print(f"termination: {report.termination}")
    print(f"iterations: {len(report.iterations)}  "
          f"cuts: {report.num_level_cuts} level / {report.num_ramp_cuts} ramp")
    if report.breakdown is not None:
        print()
        print(io.cost_table(report.breakdown))
        idx = SystemIndex(system, loads, options)
        print()
        print(io.build_schedule_table(report.plan, idx))
    if report.termination == "infeasible":
        return EXIT_INFEASIBLE
    if report.termination == "iteration-limit":
        return EXIT_ITERATION_LIMIT
    return 0


def _cmd_certify(args) -> int:
    system, loads, unc = _load_inputs(args)
    plan = io.load_plan(args.plan)
    idx = SystemIndex(system, loads)
    verdicts = certify_plan(idx, plan, unc, system.horizon.recourse_budget,
                            cap=args.cap)
    payload = {}
    worst = 0.0
    for name, v in verdicts.items():
        payload[name] = {"violation": v.violation,
                         "points_enumerated": v.points_enumerated}
        worst = max(worst, v.violation)
        print(f"{name:15s} violation {v.violation:.6g} "
              f"({v.points_enumerated} points)")
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1))
    print("plan is robust-feasible" if worst <= args.tolerance
          else "plan VIOLATES robustness")
    return 0


def _cmd_simulate(args) -> int:
    system, loads, unc = _load_inputs(args)
    plan = io.load_plan(args.plan)
    idx = SystemIndex(system, loads)
    config = ScenarioConfig(count=args.scenarios, seed=args.seed,
                            shedding_price=args.shedding_price,
                            include_ramp=not args.level_only,
                            reoptimize_commitment=args.reoptimize_commitment)
    metrics = evaluate(idx, plan, unc, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(metrics.to_dict(), indent=1))
    io.write_scenario_csv(metrics.per_scenario, out / "scenarios.csv")
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    io.write_per_year_csv(metrics.per_year, plots / "per_year.csv")
    for key, val in metrics.to_dict().items():
        print(f"{key:5s} {val:.6g}")
    return 0


def _cmd_dump_sets(args) -> int:
    system, loads, unc = _load_inputs(args)
    payload = io.uncertainty_to_dict(loads, unc)
    text = json.dumps(payload, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robex",
        description="robust coordinated transmission/generation/FACTS "
                    "expansion planning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run the planning loop")
    p.add_argument("--system", required=True)
    p.add_argument("--curves", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["M1", "M2", "M3"], default="M3")
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-lines", action="store_true")
    p.add_argument("--no-gens", action="store_true")
    p.add_argument("--no-facts", action="store_true")
    p.add_argument("--dump-lp", default=None,
                   help="directory for per-iteration master LP dumps")
    p.add_argument("--verdict-log", default=None,
                   help="JSON-lines file for per-slot check verdicts")
    _uncertainty_args(p)
    _solver_args(p)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("certify", help="exhaustively check a saved plan")
    p.add_argument("--system", required=True)
    p.add_argument("--curves", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--cap", type=int, default=10 ** 6)
    _uncertainty_args(p)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("simulate", help="Monte Carlo validation of a saved plan")
    p.add_argument("--system", required=True)
    p.add_argument("--curves", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenarios", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shedding-price", type=float, default=7e-3,
                   help="currency per MWh; bundled data is in M$, so the "
                        "default is $7,000/MWh")
    p.add_argument("--level-only", action="store_true",
                   help="dispatch level scenarios alone (no ramp stage)")
    p.add_argument("--reoptimize-commitment", action="store_true")
    _uncertainty_args(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("dump-sets", help="dump the built uncertainty sets")
    p.add_argument("--system", required=True)
    p.add_argument("--curves", required=True)
    p.add_argument("--out", default=None)
    _uncertainty_args(p)
    p.set_defaults(func=_cmd_dump_sets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InputError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except RobexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
