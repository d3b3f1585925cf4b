"""Brute-force reference evaluator.

Enumerates every extreme point of a deviation set and solves the inner
re-dispatch LP directly, one plain LP per point. Exact up to LP tolerance,
so it certifies both the dualized subproblem reformulation and finished
plans on instances small enough to enumerate. Statistical validation of
larger instances is the simulator's job, not this module's.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationTooLarge
from .master import Plan, SystemIndex
from .solver import SolveParams
from .subproblems import (OBJ_RECOURSE, OBJ_SLACK, SlotContext,
                          all_slot_contexts, build_slot_lp, solve_inner_lp)
from .uncertainty import (DEFAULT_ENUMERATION_CAP, KIND_LEVEL, KIND_RAMP,
                          UncertaintyModel, UncertainPoint,
                          enumerate_extreme_points)

log = logging.getLogger(__name__)


@dataclass
class OracleVerdict:
    violation: float
    worst_point: UncertainPoint | None
    points_enumerated: int


def brute_force(ctx: SlotContext, kind: str, objective: str,
                cap: int = DEFAULT_ENUMERATION_CAP,
                params: SolveParams | None = None) -> OracleVerdict:
    """Worst case over one slot's extreme points by direct enumeration.

    Ties go to the first maximizer in enumeration order, which is
    lexicographic and deterministic.
    """
    points = enumerate_extreme_points(ctx.unc, kind, ctx.y, ctx.h, cap=cap)
    slot_lp = build_slot_lp(ctx, objective, ramp_tether=(kind == KIND_RAMP))
    best_val = -np.inf
    best_point = None
    for n, point in enumerate(points):
        eps = point.epsilon[:, ctx.y, ctx.h]
        val = solve_inner_lp(slot_lp, eps, params)
        if val > best_val:
            best_val = val
            best_point = point
        if n and n % 1000 == 0:
            log.info("slot (%d,%d): %d/%d points", ctx.y, ctx.h, n, len(points))
    if objective == OBJ_SLACK:
        best_val = max(0.0, best_val)
    return OracleVerdict(float(best_val), best_point, len(points))


def certify_plan(idx: SystemIndex, plan: Plan, unc: UncertaintyModel,
                 recourse_budget: float,
                 cap: int = DEFAULT_ENUMERATION_CAP,
                 params: SolveParams | None = None) -> dict[str, OracleVerdict]:
    """Exhaustively check a plan against all three robustness criteria.

    Returns one verdict per check ('level_slack', 'level_recourse',
    'ramp_slack'); the plan is robust-feasible iff every violation is
    (numerically) zero. Refuses rather than samples when the enumeration
    cap would be exceeded, so a passing certificate is exact.
    """
    contexts = all_slot_contexts(idx, plan, unc)
    total = 0
    for ctx in contexts:
        n_level = len(enumerate_extreme_points(ctx.unc, KIND_LEVEL, ctx.y, ctx.h,
                                               cap=cap))
        n_ramp = len(enumerate_extreme_points(ctx.unc, KIND_RAMP, ctx.y, ctx.h,
                                              cap=cap))
        total += 2 * n_level + n_ramp
        if total > cap:
            raise EnumerationTooLarge(
                f"certification needs > {cap} inner LP solves")

    out: dict[str, OracleVerdict] = {}
    worst = OracleVerdict(0.0, None, 0)
    for ctx in contexts:
        v = brute_force(ctx, KIND_LEVEL, OBJ_SLACK, cap, params)
        worst = OracleVerdict(max(worst.violation, v.violation),
                              v.worst_point if v.violation > worst.violation
                              else worst.worst_point,
                              worst.points_enumerated + v.points_enumerated)
    out["level_slack"] = worst

    if np.isfinite(recourse_budget):
        total_cost = 0.0
        eps = np.zeros(unc.shape)
        n_pts = 0
        for ctx in contexts:
            v = brute_force(ctx, KIND_LEVEL, OBJ_RECOURSE, cap, params)
            total_cost += v.violation
            if v.worst_point is not None:
                eps += v.worst_point.epsilon
            n_pts += v.points_enumerated
        out["level_recourse"] = OracleVerdict(
            max(0.0, total_cost - recourse_budget),
            UncertainPoint(KIND_LEVEL, eps), n_pts)
    else:
        out["level_recourse"] = OracleVerdict(0.0, None, 0)

    worst = OracleVerdict(0.0, None, 0)
    for ctx in contexts:
        v = brute_force(ctx, KIND_RAMP, OBJ_SLACK, cap, params)
        worst = OracleVerdict(max(worst.violation, v.violation),
                              v.worst_point if v.violation > worst.violation
                              else worst.worst_point,
                              worst.points_enumerated + v.points_enumerated)
    out["ramp_slack"] = worst
    return out
