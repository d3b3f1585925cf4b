"""Cut-generation driver: alternate master solves with worst-case checks,
feeding each violated deviation point back as a new recourse block, until
every check clears the tolerance.

The three checks run in a fixed sequence each round (level slack, then the
recourse-cost budget, then ramp slack); any violation restarts the
sequence from a fresh master solve. Mode M1 solves the master once with no
checks, M2 hedges level deviations only, M3 hedges both sets. Finite
convergence follows from the finite extreme-point families: the stall
guard aborts if a check ever returns an already-used point while still
claiming a violation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalStallError
from .master import (CostBreakdown, CutPoint, MasterOptions, Plan,
                     build_master, extract_plan)
from .solver import SolveParams, SolveStatus, solve
from .subproblems import (all_slot_contexts, run_level_recourse,
                          run_level_slack, run_ramp_slack)
from .uncertainty import KIND_LEVEL, KIND_RAMP, SlottedLoadModel, UncertaintyModel

MODES = ("M1", "M2", "M3")


@dataclass
class CcgConfig:
    tolerance: float = 1e-3
    max_iterations: int = 50
    mode: str = "M3"
    options: MasterOptions = field(default_factory=MasterOptions)
    solver: SolveParams = field(default_factory=SolveParams)
    workers: int = 1          # >1 solves slot subproblems in parallel
    budget_form: str = "exact"
    multi_cut: bool = False   # one cut covering every violating slot
    dump_lp_dir: str | None = None    # write each master as LP text here

    def __post_init__(self):
        if self.tolerance <= 0:
            raise InputError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}")


@dataclass
class IterationRecord:
    index: int
    mp_objective: float
    violations: dict[str, float | None]
    cut_added: str | None         # check that produced the cut, or None
    mp_seconds: float
    check_seconds: float

    def to_dict(self) -> dict:
        return {"iteration": self.index, "mp_objective": self.mp_objective,
                "violations": self.violations, "cut_added": self.cut_added,
                "mp_seconds": self.mp_seconds,
                "check_seconds": self.check_seconds}


@dataclass
class CcgReport:
    termination: str              # converged | infeasible | iteration-limit
    plan: Plan | None
    breakdown: CostBreakdown | None
    objective: float | None
    iterations: list[IterationRecord]
    cuts: list[CutPoint]

    @property
    def num_level_cuts(self) -> int:
        return sum(1 for c in self.cuts if c.kind == KIND_LEVEL)

    @property
    def num_ramp_cuts(self) -> int:
        return sum(1 for c in self.cuts if c.kind == KIND_RAMP)


def run(system, loads: SlottedLoadModel, unc: UncertaintyModel,
        config: CcgConfig | None = None, log=None) -> CcgReport:
    """Run the loop to convergence, infeasibility, or the iteration cap."""
    config = config or CcgConfig()
    cuts: list[CutPoint] = []
    records: list[IterationRecord] = []
    prev_obj = -np.inf
    plan = breakdown = None
    objective = None

    for it in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        model, mv = build_master(system, loads, tuple(cuts), config.options)
        if config.dump_lp_dir:
            from pathlib import Path
            from .solver import write_lp
            out = Path(config.dump_lp_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"master_iter{it}.lp").write_text(write_lp(model))
        res = solve(model, config.solver)
        mp_secs = time.perf_counter() - t0
        if res.status == SolveStatus.INFEASIBLE:
            records.append(IterationRecord(it, float("nan"), {}, None, mp_secs, 0.0))
            return CcgReport("infeasible", None, None, None, records, cuts)
        if res.status not in (SolveStatus.OPTIMAL, SolveStatus.LIMIT):
            raise InputError(f"master solve ended with status {res.status}")
        objective = float(res.objective)
        slack = 1e-6 * max(1.0, abs(prev_obj))
        if objective < prev_obj - slack:
            raise NumericalStallError(
                f"master objective regressed from {prev_obj} to {objective} "
                f"after adding a cut")
        prev_obj = max(prev_obj, objective)
        plan, breakdown = extract_plan(res, mv)

        if config.mode == "M1":
            records.append(IterationRecord(it, objective, {}, None, mp_secs, 0.0))
            return CcgReport("converged", plan, breakdown, objective, records, cuts)

        t1 = time.perf_counter()
        contexts = all_slot_contexts(mv.idx, plan, unc)
        violations: dict[str, float | None] = {
            "level_slack": None, "level_recourse": None, "ramp_slack": None}

        v1 = run_level_slack(contexts, config.solver, config.workers, log)
        violations["level_slack"] = v1.violation
        if v1.violation > config.tolerance:
            _add_cut(cuts, KIND_LEVEL, _cut_point(v1, config), it, config)
            records.append(IterationRecord(it, objective, violations,
                                           "level_slack", mp_secs,
                                           time.perf_counter() - t1))
            continue

        v2 = run_level_recourse(contexts, system.horizon.recourse_budget,
                                slack_verdict=v1, tolerance=config.tolerance,
                                params=config.solver, workers=config.workers,
                                log=log)
        violations["level_recourse"] = v2.violation
        if v2.violation > config.tolerance:
            _add_cut(cuts, KIND_LEVEL, v2.worst_point, it, config)
            records.append(IterationRecord(it, objective, violations,
                                           "level_recourse", mp_secs,
                                           time.perf_counter() - t1))
            continue

        if config.mode == "M3":
            v3 = run_ramp_slack(contexts, config.solver, config.workers, log)
            violations["ramp_slack"] = v3.violation
            if v3.violation > config.tolerance:
                _add_cut(cuts, KIND_RAMP, _cut_point(v3, config), it, config)
                records.append(IterationRecord(it, objective, violations,
                                               "ramp_slack", mp_secs,
                                               time.perf_counter() - t1))
                continue

        records.append(IterationRecord(it, objective, violations, None,
                                       mp_secs, time.perf_counter() - t1))
        return CcgReport("converged", plan, breakdown, objective, records, cuts)

    return CcgReport("iteration-limit", plan, breakdown, objective, records, cuts)


def _cut_point(verdict, config: CcgConfig):
    if config.multi_cut:
        return verdict.combined_point(config.tolerance)
    return verdict.worst_point


def _add_cut(cuts: list[CutPoint], kind: str, point, iteration: int,
             config: CcgConfig):
    for cut in cuts:
        if cut.kind == kind and np.allclose(cut.point.epsilon, point.epsilon,
                                            rtol=1e-9, atol=1e-9):
            raise NumericalStallError(
                f"check returned an already-used {kind} deviation point at "
                f"iteration {iteration} while still reporting a violation; "
                f"likely solver tolerance noise near {config.tolerance:g}")
    cuts.append(CutPoint(kind, point, iteration))
