"""Worst-case subproblems for a fixed plan.

For each (year, slot) the plan must accommodate every deviation in the
uncertainty sets. Three checks run against a candidate plan:

* level slack: over the budgeted level-deviation polytope, maximize the
  least total imbalance (nonnegative per-bus slacks) the network cannot
  absorb by re-dispatch. Zero means every level deviation is feasible.
* level recourse cost: once physically feasible, the worst-case cheapest
  re-dispatch cost delta, summed over all slots (the budget row is the
  only horizon coupling, so per-slot maxima add), minus the allowed
  recourse budget.
* ramp slack: over the ramp box, the same slack measure but with
  re-dispatch tethered to the base dispatch by generator ramp limits.

Each inner min is an LP whose optimum is a convex function of the
deviation, so the outer max is attained at an extreme point of the set.
The max-min collapses to a single MILP by LP duality: deviations enter
only balance-row right-hand sides, so the bilinear dual terms involve one
balance dual times one selection binary and linearize exactly with big-M
envelopes. The slack objective bounds those duals by 1 through the slack
columns themselves; the recourse objective uses a computed bound with a
certificate check at every solve.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DualBoundTooTight, InputError, PreconditionError
from .master import Plan, SystemIndex
from .solver import INF, LinearModel, SolveParams, SolveStatus, solve
from .uncertainty import (KIND_LEVEL, KIND_RAMP, UncertaintyModel,
                          UncertainPoint)

OBJ_SLACK = "slack"
OBJ_RECOURSE = "recourse"


@dataclass
class SlotContext:
    """Everything one (year, slot) subproblem needs from the fixed plan."""
    idx: SystemIndex
    unc: UncertaintyModel
    y: int
    h: int
    lines: list            # (corridor, k) in service this year
    facts: list            # (corridor, k, type index) installed this year
    status_existing: np.ndarray       # [G]
    base_existing: np.ndarray         # [G]
    status_new: dict               # bus -> [S, W]
    base_new: dict                 # bus -> [S, W]
    loads: np.ndarray              # [system bus] MW
    half: np.ndarray               # [loads bus] level half-width
    budget: int
    ramp_lo: np.ndarray            # [loads bus]
    ramp_hi: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.idx.durations[self.h])


def slot_context(idx: SystemIndex, plan: Plan, unc: UncertaintyModel,
                 y: int, h: int) -> SlotContext:
    lines = []
    facts = []
    for c in idx.corridors:
        act = plan.line_active[c.id]
        for k in range(act.shape[1]):
            if act[y, k]:
                lines.append((c, k))
        fct = plan.facts_active[c.id]
        for k in range(fct.shape[1]):
            for mt in range(fct.shape[2]):
                if fct[y, k, mt]:
                    facts.append((c, k, mt))
    status_new = {bus: plan.status_new[bus][y, h] for bus in idx.gen_buses}
    base_new = {bus: plan.dispatch_new[bus][y, h] for bus in idx.gen_buses}
    loads = np.array([idx.load_at(b.id, y, h) for b in idx.buses])
    return SlotContext(
        idx=idx, unc=unc, y=y, h=h, lines=lines, facts=facts,
        status_existing=plan.status_existing[:, y, h].copy(),
        base_existing=plan.dispatch_existing[:, y, h].copy(),
        status_new=status_new, base_new=base_new, loads=loads,
        half=unc.level_halfwidth[:, y, h].copy(),
        budget=int(unc.level_budget[y, h]),
        ramp_lo=unc.ramp_lower[:, y, h].copy(),
        ramp_hi=unc.ramp_upper[:, y, h].copy(),
    )


def all_slot_contexts(idx: SystemIndex, plan: Plan,
                      unc: UncertaintyModel) -> list[SlotContext]:
    return [slot_context(idx, plan, unc, y, h)
            for y in range(len(idx.years)) for h in range(idx.num_slots)]


@dataclass
class SubproblemVerdict:
    violation: float
    worst_point: UncertainPoint | None
    per_slot: dict = field(default_factory=dict)     # (y, h) -> slot value
    slot_points: dict = field(default_factory=dict)  # (y, h) -> maximizer

    def combined_point(self, tolerance: float) -> UncertainPoint | None:
        """One deviation point covering every slot above the tolerance
        (slots never interact, so their maximizers superpose)."""
        if self.worst_point is None:
            return None
        eps = np.zeros_like(self.worst_point.epsilon)
        hit = False
        for key, val in self.per_slot.items():
            if val > tolerance and key in self.slot_points:
                eps += self.slot_points[key].epsilon
                hit = True
        if not hit:
            return self.worst_point
        return UncertainPoint(self.worst_point.kind, eps)


# --- inner LP in matrix form -------------------------------------------------


@dataclass
class SlotLP:
    """min c.x + c0 s.t. eq rows = rhs (+ eps on balance rows), ub rows <= rhs,
    lb <= x <= ub. Deviations enter only balance-row right-hand sides;
    ``bal_row[loads bus]`` maps each curve-carrying bus to its row."""
    col_names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    c: np.ndarray
    c0: float
    eq_rows: list[list[tuple[int, float]]]
    eq_rhs: np.ndarray
    ub_rows: list[list[tuple[int, float]]]
    ub_rhs: np.ndarray
    bal_row: dict[int, int]

    def to_linear_model(self, eps: np.ndarray | None = None) -> LinearModel:
        m = LinearModel("slot")
        for j, name in enumerate(self.col_names):
            m.add_variable(name, self.lb[j], self.ub[j])
        rhs = self.eq_rhs.copy()
        if eps is not None:
            for row_bus, r in self.bal_row.items():
                rhs[r] += eps[row_bus]
        for row, b in zip(self.eq_rows, rhs):
            m.add_constraint(row, "=", b)
        for row, b in zip(self.ub_rows, self.ub_rhs):
            m.add_constraint(row, "<=", b)
        m.set_objective({j: v for j, v in enumerate(self.c) if v},
                        minimize=True, constant=self.c0)
        return m


def build_slot_lp(ctx: SlotContext, objective: str,
                  ramp_tether: bool = False) -> SlotLP:
    """Assemble one slot's re-dispatch LP against the fixed plan.

    Unbuilt lines and devices are dropped (their flow is identically zero
    once the integer decisions are fixed), so in-service lines carry exact
    flow-angle equalities instead of disjunctive rows. With ``ramp_tether``
    each unit's output is additionally confined to a ramp band around its
    base dispatch. The slack objective adds a +/- imbalance pair per bus;
    the recourse objective prices re-dispatch at the same discounted
    marginal cost the planning objective uses.
    """
    idx = ctx.idx
    with_slack = objective == OBJ_SLACK
    names: list[str] = []
    lb: list[float] = []
    ub: list[float] = []
    c: list[float] = []

    def col(name, lo, hi, cost=0.0):
        names.append(name)
        lb.append(lo)
        ub.append(hi)
        c.append(cost)
        return len(names) - 1

    d = ctx.duration
    disc_e = idx.year_discount(ctx.y, 0)
    disc_n = idx.year_discount(ctx.y, idx.horizon.gen_lead_years)
    c0 = 0.0

    pg_e = []
    for g, gen in enumerate(idx.gens):
        v = float(ctx.status_existing[g])
        lo, hi = gen.p_min * v, gen.p_max * v
        if ramp_tether:
            lo = max(lo, ctx.base_existing[g] - gen.ramp_down)
            hi = min(hi, ctx.base_existing[g] + gen.ramp_up)
        cost = 0.0 if with_slack else d * disc_e * gen.cost_marginal
        if not with_slack:
            c0 -= d * disc_e * gen.cost_marginal * ctx.base_existing[g]
        pg_e.append(col(f"pg[{gen.id}]", lo, hi, cost))

    pg_n = {}
    for bus in idx.gen_buses:
        arr = np.zeros(ctx.status_new[bus].shape, dtype=int)
        for s in range(arr.shape[0]):
            for w, gt in enumerate(idx.gen_types):
                v = float(ctx.status_new[bus][s, w])
                lo, hi = gt.p_min * v, gt.p_max * v
                base = ctx.base_new[bus][s, w]
                if ramp_tether:
                    lo = max(lo, base - gt.ramp_down)
                    hi = min(hi, base + gt.ramp_up)
                cost = 0.0 if with_slack else d * disc_n * gt.cost_marginal
                if not with_slack:
                    c0 -= d * disc_n * gt.cost_marginal * base
                arr[s, w] = col(f"pgn[{bus},{s},{w}]", lo, hi, cost)
        pg_n[bus] = arr

    theta = {b.id: col(f"th[{b.id}]", -idx.horizon.theta_max, idx.horizon.theta_max)
             for b in idx.buses}
    pf = {}
    facts_on_line: dict[tuple[str, int], list[int]] = {}
    for cor, k, mt in ctx.facts:
        ft = idx.facts_types[mt]
        j = col(f"pf[{cor.id},{k},{mt}]", -ft.capacity, ft.capacity)
        pf[(cor.id, k, mt)] = j
        facts_on_line.setdefault((cor.id, k), []).append(j)
    pl = {}
    for cor, k in ctx.lines:
        bound = cor.line_capacity + sum(
            idx.facts_types[mt].capacity for cc, kk, mt in ctx.facts
            if cc.id == cor.id and kk == k)
        pl[(cor.id, k)] = col(f"pl[{cor.id},{k}]", -bound, bound)

    sp = sm = None
    if with_slack:
        sp = [col(f"s+[{b.id}]", 0.0, INF, 1.0) for b in idx.buses]
        sm = [col(f"s-[{b.id}]", 0.0, INF, 1.0) for b in idx.buses]

    eq_rows: list[list[tuple[int, float]]] = []
    eq_rhs: list[float] = []
    ub_rows: list[list[tuple[int, float]]] = []
    ub_rhs: list[float] = []
    bal_row: dict[int, int] = {}

    # nodal balance: generation + device injections + slack = load + flows out
    for i, b in enumerate(idx.buses):
        row: list[tuple[int, float]] = []
        for g, gen in enumerate(idx.gens):
            if gen.bus == b.id:
                row.append((pg_e[g], 1.0))
        if b.id in pg_n:
            row += [(int(j), 1.0) for j in pg_n[b.id].ravel()]
        for (cor, k) in ctx.lines:
            if cor.from_bus == b.id:
                row.append((pl[(cor.id, k)], -1.0))
            elif cor.to_bus == b.id:
                row.append((pl[(cor.id, k)], 1.0))
        for (cor, k, mt) in ctx.facts:
            j = pf[(cor.id, k, mt)]
            if cor.from_bus == b.id:
                row.append((j, 1.0))
            elif cor.to_bus == b.id:
                row.append((j, -1.0))
        if with_slack:
            row.append((sp[i], 1.0))
            row.append((sm[i], -1.0))
        r = len(eq_rows)
        eq_rows.append(row)
        eq_rhs.append(float(ctx.loads[i]))
        loads_row = idx.load_row[b.id]
        if loads_row is not None:
            bal_row[loads_row] = r

    # in-service lines follow the flow-angle equality; capacity is offset
    # by the device injection on the line
    for cor, k in ctx.lines:
        xpu = cor.reactance / idx.system.base_mva
        j = pl[(cor.id, k)]
        eq_rows.append([(theta[cor.from_bus], 1.0), (theta[cor.to_bus], -1.0),
                        (j, -xpu)])
        eq_rhs.append(0.0)
        devices = facts_on_line.get((cor.id, k), [])
        cap_row = [(j, 1.0)] + [(jj, -1.0) for jj in devices]
        ub_rows.append(cap_row)
        ub_rhs.append(cor.line_capacity)
        ub_rows.append([(jj, -vv) for jj, vv in cap_row])
        ub_rhs.append(cor.line_capacity)

    return SlotLP(names, np.array(lb), np.array(ub), np.array(c), c0,
                  eq_rows, np.array(eq_rhs), ub_rows, np.array(ub_rhs), bal_row)


def solve_inner_lp(slot_lp: SlotLP, eps: np.ndarray | None,
                   params: SolveParams | None = None) -> float:
    """Cost of the inner re-dispatch LP at a fixed deviation (+inf when
    physically infeasible, which slack objectives rule out)."""
    res = solve(slot_lp.to_linear_model(eps), params)
    if res.status == SolveStatus.OPTIMAL:
        return float(res.objective)
    if res.status == SolveStatus.INFEASIBLE:
        return float("inf")
    raise InputError(f"inner LP ended with status {res.status}")


# --- dual MILP ---------------------------------------------------------------


def recourse_dual_bound(idx: SystemIndex, unc: UncertaintyModel) -> float:
    """Big-M bound on balance duals under the recourse-cost objective:
    (max discounted marginal cost) x (peak load + worst total half-width)
    x (longest slot). Generous by construction; certified at each solve."""
    mc = 0.0
    for y in range(len(idx.years)):
        de = idx.year_discount(y, 0)
        dn = idx.year_discount(y, idx.horizon.gen_lead_years)
        for gen in idx.gens:
            mc = max(mc, gen.cost_marginal * de)
        for gt in idx.gen_types:
            mc = max(mc, gt.cost_marginal * dn)
    peak = float(np.max(np.sum(idx.loads.levels, axis=0), initial=0.0))
    half = float(np.max(np.sum(unc.level_halfwidth, axis=0), initial=0.0))
    dmax = float(np.max(idx.durations))
    return max(1.0, mc * (peak + half) * dmax)


@dataclass
class _DualHandles:
    """Variable indices of one slot's dual block inside a shared model."""
    objective: dict[int, float]
    constant: float
    mu: list[int]
    bounded_rows: set[int]
    q: float
    z_plus: dict[int, int]
    z_minus: dict[int, int]
    z_corner: dict[int, int]
    active: list[int]


def _append_dual_block(m: LinearModel, ctx: SlotContext, kind: str,
                       objective: str, budget_form: str = "exact",
                       dual_bound: float | None = None,
                       tag: str = "") -> _DualHandles:
    """Write one slot's dualized worst-case block into ``m``.

    Returns the block's (maximization) objective terms and the handles
    needed to read back the achieving deviation.
    """
    ramp_tether = kind == KIND_RAMP
    slot_lp = build_slot_lp(ctx, objective, ramp_tether=ramp_tether)
    if objective == OBJ_SLACK:
        q = 1.0
    elif objective == OBJ_RECOURSE:
        q = dual_bound if dual_bound is not None else recourse_dual_bound(ctx.idx, ctx.unc)
    else:
        raise InputError(f"unknown objective {objective!r}")

    if kind == KIND_LEVEL:
        active = [i for i in range(len(ctx.half)) if ctx.half[i] > 0]
        r_card = min(ctx.budget, len(active))
    elif kind == KIND_RAMP:
        active = [i for i in range(len(ctx.ramp_lo))
                  if ctx.ramp_hi[i] > ctx.ramp_lo[i]]
        r_card = None
    else:
        raise InputError(f"unknown uncertainty kind {kind!r}")
    bounded_rows = {slot_lp.bal_row[i] for i in active}

    n_eq, n_ub, ncol = len(slot_lp.eq_rows), len(slot_lp.ub_rows), len(slot_lp.col_names)
    mu = [m.add_variable(f"mu{r}{tag}", -q if r in bounded_rows else -INF,
                         q if r in bounded_rows else INF)
          for r in range(n_eq)]
    nu = [m.add_variable(f"nu{r}{tag}", -INF, 0.0) for r in range(n_ub)]
    pi_lo = {j: m.add_variable(f"dl{j}{tag}", 0.0, INF)
             for j in range(ncol) if slot_lp.lb[j] > -INF}
    pi_up = {j: m.add_variable(f"du{j}{tag}", -INF, 0.0)
             for j in range(ncol) if slot_lp.ub[j] < INF}

    # dual feasibility, one equality per primal column
    cols: list[list[tuple[int, float]]] = [[] for _ in range(ncol)]
    for r, row in enumerate(slot_lp.eq_rows):
        for j, v in row:
            cols[j].append((mu[r], v))
    for r, row in enumerate(slot_lp.ub_rows):
        for j, v in row:
            cols[j].append((nu[r], v))
    for j in range(ncol):
        row = cols[j]
        if j in pi_lo:
            row.append((pi_lo[j], 1.0))
        if j in pi_up:
            row.append((pi_up[j], 1.0))
        m.add_constraint(row, "=", float(slot_lp.c[j]))

    obj: dict[int, float] = {}

    def add_obj(var, coef):
        if coef:
            obj[var] = obj.get(var, 0.0) + coef

    for r in range(n_eq):
        add_obj(mu[r], float(slot_lp.eq_rhs[r]))
    for r in range(n_ub):
        add_obj(nu[r], float(slot_lp.ub_rhs[r]))
    for j, var in pi_lo.items():
        add_obj(var, float(slot_lp.lb[j]))
    for j, var in pi_up.items():
        add_obj(var, float(slot_lp.ub[j]))

    def mccormick(prod, muvar, zvar):
        """prod = mu * z exactly, given mu in [-q, q] and z binary."""
        m.add_constraint([(prod, 1.0), (zvar, -q)], "<=", 0.0)
        m.add_constraint([(prod, 1.0), (zvar, q)], ">=", 0.0)
        m.add_constraint([(prod, 1.0), (muvar, -1.0), (zvar, -q)], ">=", -q)
        m.add_constraint([(prod, 1.0), (muvar, -1.0), (zvar, q)], "<=", q)

    z_plus: dict[int, int] = {}
    z_minus: dict[int, int] = {}
    z_corner: dict[int, int] = {}
    if kind == KIND_LEVEL:
        for i in active:
            row_r = slot_lp.bal_row[i]
            zp = m.add_variable(f"z+{i}{tag}", 0.0, 1.0, integer=True)
            zm = m.add_variable(f"z-{i}{tag}", 0.0, 1.0, integer=True)
            z_plus[i], z_minus[i] = zp, zm
            m.add_constraint([(zp, 1.0), (zm, 1.0)], "<=", 1.0)
            wp = m.add_variable(f"w+{i}{tag}", -q, q)
            wm = m.add_variable(f"w-{i}{tag}", -q, q)
            mccormick(wp, mu[row_r], zp)
            mccormick(wm, mu[row_r], zm)
            add_obj(wp, float(ctx.half[i]))
            add_obj(wm, -float(ctx.half[i]))
        if active:
            sel = [(z_plus[i], 1.0) for i in active] \
                + [(z_minus[i], 1.0) for i in active]
            if budget_form == "exact":
                m.add_constraint(sel, "=", float(r_card))
            elif budget_form == "atmost":
                m.add_constraint(sel, "<=", float(min(ctx.budget, len(active))))
            else:
                raise InputError(f"unknown budget form {budget_form!r}")
    else:
        for i in active:
            row_r = slot_lp.bal_row[i]
            z = m.add_variable(f"z{i}{tag}", 0.0, 1.0, integer=True)
            z_corner[i] = z
            w = m.add_variable(f"w{i}{tag}", -q, q)
            mccormick(w, mu[row_r], z)
            add_obj(mu[row_r], float(ctx.ramp_lo[i]))
            add_obj(w, float(ctx.ramp_hi[i] - ctx.ramp_lo[i]))

    return _DualHandles(obj, slot_lp.c0, mu, bounded_rows, q,
                        z_plus, z_minus, z_corner, active)


def _certify_duals(res, handles: _DualHandles, objective: str):
    if objective != OBJ_RECOURSE:
        return
    for r in handles.bounded_rows:
        if abs(res.x[handles.mu[r]]) >= handles.q * (1.0 - 1e-7):
            raise DualBoundTooTight(
                f"balance dual at its bound {handles.q:g}; re-run with a "
                f"larger dual_bound (e.g. {10 * handles.q:g})")


def _read_point(res, handles: _DualHandles, ctx: SlotContext,
                kind: str) -> UncertainPoint:
    eps = np.zeros(ctx.unc.shape)
    if kind == KIND_LEVEL:
        for i in handles.active:
            sign = round(res.x[handles.z_plus[i]]) - round(res.x[handles.z_minus[i]])
            eps[i, ctx.y, ctx.h] = sign * ctx.half[i]
    else:
        for i in range(len(ctx.ramp_lo)):
            eps[i, ctx.y, ctx.h] = ctx.ramp_lo[i]
        for i in handles.active:
            eps[i, ctx.y, ctx.h] = (ctx.ramp_hi[i] if round(res.x[handles.z_corner[i]])
                                    else ctx.ramp_lo[i])
    return UncertainPoint(kind, eps)


def dualize_and_solve(ctx: SlotContext, kind: str, objective: str,
                      budget_form: str = "exact",
                      params: SolveParams | None = None,
                      dual_bound: float | None = None,
                      ) -> tuple[float, UncertainPoint]:
    """Single-level MILP for one slot's worst case: the optimum and the
    achieving deviation (zeros outside this slot)."""
    m = LinearModel(f"dual[{kind},{objective},{ctx.y},{ctx.h}]")
    handles = _append_dual_block(m, ctx, kind, objective, budget_form,
                                 dual_bound)
    m.set_objective(handles.objective, minimize=False, constant=handles.constant)
    res = solve(m, params)
    if res.status != SolveStatus.OPTIMAL:
        raise InputError(
            f"dual reformulation ended with status {res.status} ({res.message})")
    _certify_duals(res, handles, objective)
    return float(res.objective), _read_point(res, handles, ctx, kind)


def solve_monolithic(contexts: list[SlotContext], kind: str, objective: str,
                     params: SolveParams | None = None) -> float:
    """All slots in one MILP (no temporal decomposition); the reference the
    per-slot path is tested against. Its optimum is the sum over slots of
    the per-slot worst cases because the blocks share nothing."""
    m = LinearModel(f"monolithic[{kind},{objective}]")
    obj: dict[int, float] = {}
    const = 0.0
    for ctx in contexts:
        handles = _append_dual_block(m, ctx, kind, objective,
                                     tag=f"[{ctx.y},{ctx.h}]")
        const += handles.constant
        for var, coef in handles.objective.items():
            obj[var] = obj.get(var, 0.0) + coef
    m.set_objective(obj, minimize=False, constant=const)
    res = solve(m, params)
    if res.status != SolveStatus.OPTIMAL:
        raise InputError(f"monolithic subproblem status {res.status}")
    return float(res.objective)


# --- per-slot fronts and horizon aggregation ---------------------------------


def worst_level_slack(ctx: SlotContext, params: SolveParams | None = None,
                      ) -> SubproblemVerdict:
    """Largest unabsorbable imbalance over the level set in one slot."""
    val, point = dualize_and_solve(ctx, KIND_LEVEL, OBJ_SLACK, params=params)
    val = max(0.0, val)
    return SubproblemVerdict(val, point, {(ctx.y, ctx.h): val})


def worst_ramp_slack(ctx: SlotContext, params: SolveParams | None = None,
                     ) -> SubproblemVerdict:
    """Largest unabsorbable imbalance over the ramp box in one slot."""
    val, point = dualize_and_solve(ctx, KIND_RAMP, OBJ_SLACK, params=params)
    val = max(0.0, val)
    return SubproblemVerdict(val, point, {(ctx.y, ctx.h): val})


def worst_level_recourse(ctx: SlotContext, params: SolveParams | None = None,
                         dual_bound: float | None = None,
                         ) -> tuple[float, UncertainPoint]:
    """Signed worst-case re-dispatch cost delta for one slot."""
    return dualize_and_solve(ctx, KIND_LEVEL, OBJ_RECOURSE, params=params,
                             dual_bound=dual_bound)


def _slot_map(contexts, fn, workers: int = 1):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, contexts))
    return [fn(ctx) for ctx in contexts]


def run_level_slack(contexts: list[SlotContext],
                    params: SolveParams | None = None, workers: int = 1,
                    log=None) -> SubproblemVerdict:
    """Horizon verdict: any slot failing suffices, so the violation is the
    worst slot's and the returned point deviates only in that slot."""
    results = _slot_map(contexts, lambda c: worst_level_slack(c, params), workers)
    return _aggregate_max(contexts, results, "level_slack", log)


def run_ramp_slack(contexts: list[SlotContext],
                   params: SolveParams | None = None, workers: int = 1,
                   log=None) -> SubproblemVerdict:
    results = _slot_map(contexts, lambda c: worst_ramp_slack(c, params), workers)
    return _aggregate_max(contexts, results, "ramp_slack", log)


def _aggregate_max(contexts, results, tag, log) -> SubproblemVerdict:
    per_slot = {}
    slot_points = {}
    best_val = 0.0
    best_point = None
    for ctx, verdict in zip(contexts, results):
        val = verdict.violation
        per_slot[(ctx.y, ctx.h)] = val
        slot_points[(ctx.y, ctx.h)] = verdict.worst_point
        if log is not None:
            log({"check": tag, "year": ctx.y, "slot": ctx.h, "violation": val,
                 "worst_point": _point_summary(verdict.worst_point, ctx)})
        if val > best_val:
            best_val = val
            best_point = verdict.worst_point
    if best_point is None:
        kind = KIND_LEVEL if tag == "level_slack" else KIND_RAMP
        best_point = UncertainPoint(kind, np.zeros(contexts[0].unc.shape))
    return SubproblemVerdict(best_val, best_point, per_slot, slot_points)


def _point_summary(point: UncertainPoint | None, ctx: SlotContext):
    if point is None:
        return None
    vec = point.epsilon[:, ctx.y, ctx.h]
    return {ctx.unc.bus_ids[i]: float(v) for i, v in enumerate(vec) if v}


def run_level_recourse(contexts: list[SlotContext], recourse_budget: float,
                       slack_verdict: SubproblemVerdict | None = None,
                       tolerance: float = 1e-3,
                       params: SolveParams | None = None, workers: int = 1,
                       log=None) -> SubproblemVerdict:
    """Horizon recourse-cost verdict: per-slot worst deltas add, then the
    allowance is subtracted and the result clamped at zero.

    Requires the physical check to have passed first; the no-slack inner
    LPs are only guaranteed feasible then. An infinite allowance makes the
    check vacuous and no subproblem is solved.
    """
    if slack_verdict is not None and slack_verdict.violation > tolerance:
        raise PreconditionError(
            "recourse-cost check called while level slack is "
            f"{slack_verdict.violation:g} > {tolerance:g}")
    if not np.isfinite(recourse_budget):
        zero = UncertainPoint(KIND_LEVEL, np.zeros(contexts[0].unc.shape))
        return SubproblemVerdict(0.0, zero, {})
    results = _slot_map(contexts, lambda c: worst_level_recourse(c, params), workers)
    per_slot = {}
    total = 0.0
    eps = np.zeros(contexts[0].unc.shape)
    for ctx, (val, point) in zip(contexts, results):
        per_slot[(ctx.y, ctx.h)] = val
        total += val
        eps += point.epsilon
        if log is not None:
            log({"check": "level_recourse", "year": ctx.y, "slot": ctx.h,
                 "worst_cost_delta": val})
    violation = max(0.0, total - recourse_budget)
    return SubproblemVerdict(violation, UncertainPoint(KIND_LEVEL, eps), per_slot)


def jsonl_logger(path):
    """Append-mode JSON-lines writer usable as the ``log`` callback."""
    handle = open(path, "a", encoding="utf-8")

    def write(record: dict):
        handle.write(json.dumps(record) + "\n")
        handle.flush()

    write.close = handle.close
    return write
