"""Master problem: multi-year investment + base-case operation MILP.

First-stage decisions are which lines / FACTS devices / generators to have
in service in each year (with lead times pushing their discounted payment
earlier) and hourly-slot unit commitment; the continuous part is the
base-case DC dispatch. Every accumulated worst-case deviation point grows
the model with a duplicated recourse dispatch block: level-deviation blocks
additionally respect the horizon-wide recourse-cost budget, ramp-deviation
blocks are tethered to the base dispatch by generator ramp limits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegralityError, InputError
from .solver import INF, LinearModel, SolveResult, SolveStatus
from .system import PlanningSystem
from .uncertainty import KIND_LEVEL, KIND_RAMP, SlottedLoadModel, UncertainPoint

ROUND_TOL = 1e-4  # how far a binary may sit from {0,1} before rounding is suspect


@dataclass
class MasterOptions:
    enable_lines: bool = True
    enable_gens: bool = True
    enable_facts: bool = True


@dataclass(frozen=True)
class CutPoint:
    """One deviation extreme point carried into the master as a new
    recourse block."""
    kind: str                 # KIND_LEVEL or KIND_RAMP
    point: UncertainPoint
    iteration: int


@dataclass
class CostBreakdown:
    line_invest: float = 0.0
    facts_invest: float = 0.0
    gen_invest: float = 0.0
    base_operation: float = 0.0

    @property
    def invest(self) -> float:
        return self.line_invest + self.facts_invest + self.gen_invest

    @property
    def total(self) -> float:
        return self.invest + self.base_operation

    def to_dict(self) -> dict:
        return {"line_invest": self.line_invest, "facts_invest": self.facts_invest,
                "gen_invest": self.gen_invest, "invest": self.invest,
                "base_operation": self.base_operation, "total": self.total}


@dataclass
class Plan:
    """All first-stage decisions plus the base-case dispatch.

    line_active / facts_active include pre-existing assets; arrays are
    indexed [year, k(, type)] per corridor and [year, slot(, unit, type)]
    for commitment and dispatch.
    """
    line_active: dict[str, np.ndarray]       # cid -> [Y, K] 0/1
    facts_active: dict[str, np.ndarray]      # cid -> [Y, K, M] 0/1
    gen_built: dict[str, np.ndarray]         # bus -> [Y, S, W] 0/1
    status_existing: np.ndarray              # [G, Y, H] 0/1
    status_new: dict[str, np.ndarray]        # bus -> [Y, H, S, W] 0/1
    dispatch_existing: np.ndarray             # [G, Y, H] MW
    dispatch_new: dict[str, np.ndarray]       # bus -> [Y, H, S, W] MW


class SystemIndex:
    """Pre-computed index sets shared by the master, the slot subproblems,
    and the simulator. Line slot k < min_lines is an existing line (fixed
    in service); candidate corridors add free slots up to max_lines."""

    def __init__(self, system: PlanningSystem, loads: SlottedLoadModel,
                 options: MasterOptions | None = None):
        options = options or MasterOptions()
        self.system = system
        self.loads = loads
        self.options = options
        self.horizon = system.horizon
        self.buses = list(system.buses)
        self.bus_pos = {b.id: i for i, b in enumerate(self.buses)}
        self.corridors = list(system.corridors)
        self.cor_pos = {c.id: i for i, c in enumerate(self.corridors)}
        self.gens = list(system.existing_generators)
        self.gen_types = list(system.generator_types)
        self.facts_types = list(system.facts_types)
        self.years = list(self.horizon.years)
        self.num_slots = loads.num_slots
        self.durations = np.asarray(loads.slot_durations, dtype=float)

        line_cands = set(system.candidate_line_corridors) if options.enable_lines else set()
        facts_cands = set(system.candidate_facts_corridors) if options.enable_facts else set()
        self.num_line_slots: dict[str, int] = {}
        self.free_line_slots: dict[str, list[int]] = {}
        self.facts_corridors: list[str] = []
        for c in self.corridors:
            k_total = c.max_lines if c.id in line_cands else c.min_lines
            self.num_line_slots[c.id] = k_total
            self.free_line_slots[c.id] = list(range(c.min_lines, k_total))
            if c.id in facts_cands and self.facts_types:
                self.facts_corridors.append(c.id)

        self.gen_buses: list[str] = []
        if options.enable_gens and self.gen_types:
            self.gen_buses = [b for b in system.candidate_gen_buses
                              if system.bus_by_id()[b].max_new_generators > 0]
        self.gen_slots = {b: system.bus_by_id()[b].max_new_generators
                          for b in self.gen_buses}

        # loads row per system bus (None when the bus carries no curve)
        self.load_row = {bid: (loads.bus_ids.index(bid) if bid in loads.bus_ids else None)
                         for bid in self.bus_pos}

    def load_at(self, bus_id: str, y: int, h: int) -> float:
        row = self.load_row[bus_id]
        if row is None or not self.buses[self.bus_pos[bus_id]].has_load:
            return 0.0
        return float(self.loads.levels[row, y, h])

    def eps_at(self, point: UncertainPoint, bus_id: str, y: int, h: int) -> float:
        row = self.load_row[bus_id]
        return float(point.epsilon[row, y, h]) if row is not None else 0.0

    def year_discount(self, y_idx: int, lead: int = 0) -> float:
        return self.horizon.discount(self.years[y_idx], lead)

    def op_weight_existing(self, y_idx: int, h_idx: int) -> float:
        """Hours-weighted discount applied to an existing generator's cost."""
        return self.durations[h_idx] * self.year_discount(y_idx, 0)

    def op_weight_new(self, y_idx: int, h_idx: int) -> float:
        return self.durations[h_idx] * self.year_discount(y_idx, self.horizon.gen_lead_years)


class MasterVars:
    """Variable-index bookkeeping for one built master model."""

    def __init__(self, idx: SystemIndex):
        self.idx = idx
        self.line: dict[tuple[str, int, int], int] = {}     # (cid, y, k) -> var
        self.facts: dict[tuple[str, int, int, int], int] = {}
        self.gen: dict[tuple[str, int, int, int], int] = {}
        self.v_exist: dict[tuple[int, int, int], int] = {}
        self.v_new: dict[tuple[str, int, int, int, int], int] = {}
        self.blocks: list[dict] = []    # block 0 = base case, then one per cut

    def line_value(self, x, cid: str, y: int, k: int) -> float:
        c = self.idx.corridors[self.idx.cor_pos[cid]]
        if k < c.min_lines:
            return 1.0
        key = (cid, y, k)
        return float(x[self.line[key]]) if key in self.line else 0.0


def build_master(system: PlanningSystem, loads: SlottedLoadModel,
                 cuts: tuple[CutPoint, ...] = (),
                 options: MasterOptions | None = None,
                 ) -> tuple[LinearModel, MasterVars]:
    """Assemble the MILP: structural build logic, base-case dispatch for
    every (year, slot), objective, and one recourse block per cut."""
    options = options or MasterOptions()
    idx = SystemIndex(system, loads, options)
    if list(loads.years) != idx.years:
        raise InputError(f"load years {loads.years} do not match horizon {idx.years}")
    m = LinearModel("master")
    mv = MasterVars(idx)
    hz = idx.horizon
    ny, nh = len(idx.years), idx.num_slots

    _add_build_variables(m, mv)
    _add_commitment_variables(m, mv)
    base = _add_dispatch_block(m, mv, tag="base", eps=None)
    mv.blocks.append(base)
    _add_objective(m, mv, base)

    for t, cut in enumerate(cuts):
        tag = f"cut{t}"
        block = _add_dispatch_block(m, mv, tag=tag, eps=cut.point)
        mv.blocks.append(block)
        if cut.kind == KIND_LEVEL:
            if np.isfinite(hz.recourse_budget):
                row = []
                for y in range(ny):
                    for h in range(nh):
                        for g, gen in enumerate(idx.gens):
                            w8 = idx.op_weight_existing(y, h) * gen.cost_marginal
                            row.append((block["pg_e"][g, y, h], w8))
                            row.append((base["pg_e"][g, y, h], -w8))
                        for bus in idx.gen_buses:
                            for s in range(idx.gen_slots[bus]):
                                for w, gt in enumerate(idx.gen_types):
                                    w8 = idx.op_weight_new(y, h) * gt.cost_marginal
                                    row.append((block["pg_n"][bus][y, h, s, w], w8))
                                    row.append((base["pg_n"][bus][y, h, s, w], -w8))
                m.add_constraint(row, "<=", hz.recourse_budget,
                                 name=f"{tag}_recourse_budget")
        elif cut.kind == KIND_RAMP:
            for y in range(ny):
                for h in range(nh):
                    for g, gen in enumerate(idx.gens):
                        a, b = block["pg_e"][g, y, h], base["pg_e"][g, y, h]
                        m.add_constraint([(a, 1.0), (b, -1.0)], "<=", gen.ramp_up)
                        m.add_constraint([(b, 1.0), (a, -1.0)], "<=", gen.ramp_down)
                    for bus in idx.gen_buses:
                        for s in range(idx.gen_slots[bus]):
                            for w, gt in enumerate(idx.gen_types):
                                a = block["pg_n"][bus][y, h, s, w]
                                b = base["pg_n"][bus][y, h, s, w]
                                m.add_constraint([(a, 1.0), (b, -1.0)], "<=", gt.ramp_up)
                                m.add_constraint([(b, 1.0), (a, -1.0)], "<=", gt.ramp_down)
        else:
            raise InputError(f"unknown cut kind {cut.kind!r}")
    return m, mv


def _add_build_variables(m: LinearModel, mv: MasterVars):
    idx = mv.idx
    hz = idx.horizon
    ny = len(idx.years)
    nm = len(idx.facts_types)

    # new lines: binary per (corridor, year, free slot); zero before the
    # first year construction can finish, monotone across years,
    # lower-numbered slots fill first
    for c in idx.corridors:
        for k in idx.free_line_slots[c.id]:
            for y, year in enumerate(idx.years):
                buildable = year >= hz.base_year + hz.line_lead_years
                v = m.add_variable(f"nl[{c.id},{year},{k}]", 0.0,
                                   1.0 if buildable else 0.0, integer=True)
                mv.line[(c.id, y, k)] = v
        for k in idx.free_line_slots[c.id]:
            for y in range(1, ny):
                m.add_constraint([(mv.line[(c.id, y, k)], 1.0),
                                  (mv.line[(c.id, y - 1, k)], -1.0)], ">=", 0.0)
            if k - 1 in idx.free_line_slots[c.id]:
                for y in range(ny):
                    m.add_constraint([(mv.line[(c.id, y, k)], 1.0),
                                      (mv.line[(c.id, y, k - 1)], -1.0)], "<=", 0.0)

    # FACTS: binary per (corridor, year, line slot, device type); at most
    # one device per line slot, corridor count no larger than the line
    # count, per-type sequential fill, monotone across years
    for cid in idx.facts_corridors:
        c = idx.corridors[idx.cor_pos[cid]]
        kk = idx.num_line_slots[cid]
        for k in range(kk):
            for mt in range(nm):
                for y, year in enumerate(idx.years):
                    v = m.add_variable(f"nf[{cid},{year},{k},{mt}]", 0.0, 1.0,
                                       integer=True)
                    mv.facts[(cid, y, k, mt)] = v
        for y in range(ny):
            for k in range(kk):
                m.add_constraint([(mv.facts[(cid, y, k, mt)], 1.0)
                                  for mt in range(nm)], "<=", 1.0)
                if k >= 1:
                    for mt in range(nm):
                        m.add_constraint([(mv.facts[(cid, y, k, mt)], 1.0),
                                          (mv.facts[(cid, y, k - 1, mt)], -1.0)],
                                         "<=", 0.0)
            count = [(mv.facts[(cid, y, k, mt)], 1.0)
                     for k in range(kk) for mt in range(nm)]
            for k in idx.free_line_slots[cid]:
                count.append((mv.line[(cid, y, k)], -1.0))
            m.add_constraint(count, "<=", float(c.min_lines))
        for y in range(1, ny):
            for k in range(kk):
                for mt in range(nm):
                    m.add_constraint([(mv.facts[(cid, y, k, mt)], 1.0),
                                      (mv.facts[(cid, y - 1, k, mt)], -1.0)],
                                     ">=", 0.0)

    # new generators: binary per (bus, year, unit slot, type); one type per
    # slot, per-type sequential fill, monotone, zero before construction
    # can finish
    for bus in idx.gen_buses:
        ns = idx.gen_slots[bus]
        nw = len(idx.gen_types)
        for s in range(ns):
            for w in range(nw):
                for y, year in enumerate(idx.years):
                    buildable = year >= hz.base_year + hz.gen_lead_years
                    v = m.add_variable(f"ng[{bus},{year},{s},{w}]", 0.0,
                                       1.0 if buildable else 0.0, integer=True)
                    mv.gen[(bus, y, s, w)] = v
        for y in range(ny):
            for s in range(ns):
                m.add_constraint([(mv.gen[(bus, y, s, w)], 1.0)
                                  for w in range(nw)], "<=", 1.0)
                if s >= 1:
                    for w in range(nw):
                        m.add_constraint([(mv.gen[(bus, y, s, w)], 1.0),
                                          (mv.gen[(bus, y, s - 1, w)], -1.0)],
                                         "<=", 0.0)
        for y in range(1, ny):
            for s in range(ns):
                for w in range(nw):
                    m.add_constraint([(mv.gen[(bus, y, s, w)], 1.0),
                                      (mv.gen[(bus, y - 1, s, w)], -1.0)], ">=", 0.0)


def _add_commitment_variables(m: LinearModel, mv: MasterVars):
    idx = mv.idx
    ny, nh = len(idx.years), idx.num_slots
    for g in range(len(idx.gens)):
        for y in range(ny):
            for h in range(nh):
                mv.v_exist[(g, y, h)] = m.add_variable(
                    f"v[{idx.gens[g].id},{y},{h}]", 0.0, 1.0, integer=True)
    for bus in idx.gen_buses:
        for y in range(ny):
            for h in range(nh):
                for s in range(idx.gen_slots[bus]):
                    for w in range(len(idx.gen_types)):
                        v = m.add_variable(f"vn[{bus},{y},{h},{s},{w}]",
                                           0.0, 1.0, integer=True)
                        mv.v_new[(bus, y, h, s, w)] = v
                        # dispatchable only once installed
                        m.add_constraint([(v, 1.0), (mv.gen[(bus, y, s, w)], -1.0)],
                                         "<=", 0.0)


def _add_dispatch_block(m: LinearModel, mv: MasterVars, tag: str,
                        eps: UncertainPoint | None) -> dict:
    """One full network/dispatch variable block over every (year, slot).

    The base block (eps None) and each cut block share the build and
    commitment binaries; only the continuous operation layer duplicates.
    """
    idx = mv.idx
    sysm = idx.system
    hz = idx.horizon
    ny, nh = len(idx.years), idx.num_slots
    theta_max = hz.theta_max
    big_m = 2.0 * theta_max
    ng = len(idx.gens)

    pg_e = np.zeros((ng, ny, nh), dtype=int)
    pg_n = {bus: np.zeros((ny, nh, idx.gen_slots[bus], len(idx.gen_types)), dtype=int)
            for bus in idx.gen_buses}
    block = {"tag": tag, "pg_e": pg_e, "pg_n": pg_n}

    facts_cap = {mt.type_id: mt.capacity for mt in idx.facts_types}
    max_facts_cap = max(facts_cap.values(), default=0.0)

    for y in range(ny):
        for h in range(nh):
            sfx = f"{tag},{y},{h}"
            for g, gen in enumerate(idx.gens):
                pg_e[g, y, h] = m.add_variable(f"pg[{gen.id},{sfx}]", 0.0, gen.p_max)
            for bus in idx.gen_buses:
                for s in range(idx.gen_slots[bus]):
                    for w, gt in enumerate(idx.gen_types):
                        pg_n[bus][y, h, s, w] = m.add_variable(
                            f"pgn[{bus},{s},{w},{sfx}]", 0.0, gt.p_max)
            th = {b.id: m.add_variable(f"th[{b.id},{sfx}]", -theta_max, theta_max)
                  for b in idx.buses}
            pc = {}
            pl = {}
            pf = {}
            for c in idx.corridors:
                kk = idx.num_line_slots[c.id]
                has_facts = c.id in idx.facts_corridors
                fbound = max_facts_cap if has_facts else 0.0
                pc[c.id] = m.add_variable(f"pc[{c.id},{sfx}]", -INF, INF)
                for k in range(kk):
                    pl[(c.id, k)] = m.add_variable(
                        f"pl[{c.id},{k},{sfx}]",
                        -(c.line_capacity + fbound), c.line_capacity + fbound)
                    if has_facts:
                        for mt, ft in enumerate(idx.facts_types):
                            pf[(c.id, k, mt)] = m.add_variable(
                                f"pf[{c.id},{k},{mt},{sfx}]",
                                -ft.capacity, ft.capacity)

            # corridor flow = sum of line flows
            for c in idx.corridors:
                row = [(pc[c.id], 1.0)]
                row += [(pl[(c.id, k)], -1.0) for k in range(idx.num_line_slots[c.id])]
                m.add_constraint(row, "=", 0.0, name=f"agg[{c.id},{sfx}]")

            # per line: disjunctive DC flow and capacity (offset by the
            # device injection on that line)
            for c in idx.corridors:
                xpu = c.reactance / sysm.base_mva
                for k in range(idx.num_line_slots[c.id]):
                    flow = pl[(c.id, k)]
                    dc = [(th[c.from_bus], 1.0), (th[c.to_bus], -1.0), (flow, -xpu)]
                    cap = [(flow, 1.0)]
                    if c.id in idx.facts_corridors:
                        for mt in range(len(idx.facts_types)):
                            cap.append((pf[(c.id, k, mt)], -1.0))
                    if k < c.min_lines:
                        m.add_constraint(dc, "=", 0.0)
                        m.add_constraint(cap, "<=", c.line_capacity)
                        m.add_constraint([(i, -v) for i, v in cap], "<=", c.line_capacity)
                    else:
                        nl = mv.line[(c.id, y, k)]
                        m.add_constraint(dc + [(nl, big_m)], "<=", big_m)
                        m.add_constraint([(i, -v) for i, v in dc] + [(nl, big_m)],
                                         "<=", big_m)
                        m.add_constraint(cap + [(nl, -c.line_capacity)], "<=", 0.0)
                        m.add_constraint([(i, -v) for i, v in cap]
                                         + [(nl, -c.line_capacity)], "<=", 0.0)

            # device injection allowed only where a device is installed
            for cid in idx.facts_corridors:
                for k in range(idx.num_line_slots[cid]):
                    for mt, ft in enumerate(idx.facts_types):
                        nf = mv.facts[(cid, y, k, mt)]
                        var = pf[(cid, k, mt)]
                        m.add_constraint([(var, 1.0), (nf, -ft.capacity)], "<=", 0.0)
                        m.add_constraint([(var, -1.0), (nf, -ft.capacity)], "<=", 0.0)

            # nodal balance with the device modeled as equal-and-opposite
            # injections at the corridor ends
            for b in idx.buses:
                row = []
                for g, gen in enumerate(idx.gens):
                    if gen.bus == b.id:
                        row.append((pg_e[g, y, h], 1.0))
                if b.id in idx.gen_buses:
                    for s in range(idx.gen_slots[b.id]):
                        for w in range(len(idx.gen_types)):
                            row.append((pg_n[b.id][y, h, s, w], 1.0))
                for c in idx.corridors:
                    if c.from_bus == b.id:
                        row.append((pc[c.id], -1.0))
                    elif c.to_bus == b.id:
                        row.append((pc[c.id], 1.0))
                for (cid, k, mt), var in pf.items():
                    c = idx.corridors[idx.cor_pos[cid]]
                    if c.from_bus == b.id:
                        row.append((var, 1.0))
                    elif c.to_bus == b.id:
                        row.append((var, -1.0))
                rhs = idx.load_at(b.id, y, h)
                if eps is not None:
                    rhs += idx.eps_at(eps, b.id, y, h)
                m.add_constraint(row, "=", rhs, name=f"bal[{b.id},{sfx}]")

            # dispatch inside committed capacity
            for g, gen in enumerate(idx.gens):
                v = mv.v_exist[(g, y, h)]
                m.add_constraint([(pg_e[g, y, h], 1.0), (v, -gen.p_max)], "<=", 0.0)
                m.add_constraint([(pg_e[g, y, h], -1.0), (v, gen.p_min)], "<=", 0.0)
            for bus in idx.gen_buses:
                for s in range(idx.gen_slots[bus]):
                    for w, gt in enumerate(idx.gen_types):
                        v = mv.v_new[(bus, y, h, s, w)]
                        pv = pg_n[bus][y, h, s, w]
                        m.add_constraint([(pv, 1.0), (v, -gt.p_max)], "<=", 0.0)
                        m.add_constraint([(pv, -1.0), (v, gt.p_min)], "<=", 0.0)
    return block


def _add_objective(m: LinearModel, mv: MasterVars, base: dict):
    idx = mv.idx
    hz = idx.horizon
    ny, nh = len(idx.years), idx.num_slots
    # investment: pay c * (n_y - n_{y-1}) discounted back to the year the
    # money is spent (lead years before entering service)
    for (cid, y, k), var in mv.line.items():
        c = idx.corridors[idx.cor_pos[cid]]
        coef = c.line_cost * idx.year_discount(y, hz.line_lead_years)
        if y + 1 < ny:
            coef -= c.line_cost * idx.year_discount(y + 1, hz.line_lead_years)
        m.add_objective_term(var, coef)
    for (cid, y, k, mt), var in mv.facts.items():
        ft = idx.facts_types[mt]
        coef = ft.invest_cost * idx.year_discount(y, 0)
        if y + 1 < ny:
            coef -= ft.invest_cost * idx.year_discount(y + 1, 0)
        m.add_objective_term(var, coef)
    for (bus, y, s, w), var in mv.gen.items():
        gt = idx.gen_types[w]
        coef = gt.invest_cost * idx.year_discount(y, hz.gen_lead_years)
        if y + 1 < ny:
            coef -= gt.invest_cost * idx.year_discount(y + 1, hz.gen_lead_years)
        m.add_objective_term(var, coef)
    # base-case operation
    for y in range(ny):
        for h in range(nh):
            for g, gen in enumerate(idx.gens):
                w8 = idx.op_weight_existing(y, h)
                m.add_objective_term(mv.v_exist[(g, y, h)], w8 * gen.cost_fixed)
                m.add_objective_term(base["pg_e"][g, y, h], w8 * gen.cost_marginal)
            for bus in idx.gen_buses:
                for s in range(idx.gen_slots[bus]):
                    for w, gt in enumerate(idx.gen_types):
                        w8 = idx.op_weight_new(y, h)
                        m.add_objective_term(mv.v_new[(bus, y, h, s, w)],
                                             w8 * gt.cost_fixed)
                        m.add_objective_term(base["pg_n"][bus][y, h, s, w],
                                             w8 * gt.cost_marginal)
    m.minimize = True


def extract_plan(result: SolveResult, mv: MasterVars) -> tuple[Plan, CostBreakdown]:
    """Round binaries, re-check the structural invariants, and recompute
    the cost breakdown from the rounded values."""
    if result.status not in (SolveStatus.OPTIMAL, SolveStatus.LIMIT) or result.x is None:
        raise InputError(f"cannot extract a plan from status {result.status}")
    x = result.x
    idx = mv.idx
    ny, nh = len(idx.years), idx.num_slots
    ng = len(idx.gens)
    nm = len(idx.facts_types)
    nw = len(idx.gen_types)

    def as_bin(var: int) -> int:
        return 1 if x[var] >= 0.5 else 0

    line_active = {}
    for c in idx.corridors:
        kk = idx.num_line_slots[c.id]
        arr = np.zeros((ny, kk), dtype=np.int8)
        arr[:, : c.min_lines] = 1
        for k in idx.free_line_slots[c.id]:
            for y in range(ny):
                arr[y, k] = as_bin(mv.line[(c.id, y, k)])
        line_active[c.id] = arr

    facts_active = {}
    for c in idx.corridors:
        kk = idx.num_line_slots[c.id]
        arr = np.zeros((ny, kk, nm), dtype=np.int8)
        if c.id in idx.facts_corridors:
            for y in range(ny):
                for k in range(kk):
                    for mt in range(nm):
                        arr[y, k, mt] = as_bin(mv.facts[(c.id, y, k, mt)])
        facts_active[c.id] = arr

    gen_built = {}
    status_new = {}
    dispatch_new = {}
    base = mv.blocks[0]
    for bus in idx.gen_buses:
        ns = idx.gen_slots[bus]
        built = np.zeros((ny, ns, nw), dtype=np.int8)
        stat = np.zeros((ny, nh, ns, nw), dtype=np.int8)
        disp = np.zeros((ny, nh, ns, nw))
        for y in range(ny):
            for s in range(ns):
                for w in range(nw):
                    built[y, s, w] = as_bin(mv.gen[(bus, y, s, w)])
                    for h in range(nh):
                        stat[y, h, s, w] = as_bin(mv.v_new[(bus, y, h, s, w)])
                        disp[y, h, s, w] = x[base["pg_n"][bus][y, h, s, w]]
        gen_built[bus] = built
        status_new[bus] = stat
        dispatch_new[bus] = disp

    status_existing = np.zeros((ng, ny, nh), dtype=np.int8)
    dispatch_existing = np.zeros((ng, ny, nh))
    for g in range(ng):
        for y in range(ny):
            for h in range(nh):
                status_existing[g, y, h] = as_bin(mv.v_exist[(g, y, h)])
                dispatch_existing[g, y, h] = x[base["pg_e"][g, y, h]]

    plan = Plan(line_active, facts_active, gen_built, status_existing,
                status_new, dispatch_existing, dispatch_new)
    check_plan_invariants(plan, idx)
    breakdown = plan_cost(plan, idx)
    if result.objective is not None:
        ref = max(1.0, abs(result.objective))
        if abs(breakdown.total - result.objective) > 1e-4 * ref + (result.gap or 0.0) * ref:
            raise IntegralityError(
                f"rounded cost {breakdown.total} deviates from solver "
                f"objective {result.objective}")
    return plan, breakdown


def check_plan_invariants(plan: Plan, idx: SystemIndex, tol: float = 1e-5):
    """Monotone service flags, sequential fill, one type per slot,
    commitment coupling, and dispatch-in-capacity; raises on violation."""
    for cid, arr in plan.line_active.items():
        if np.any(np.diff(arr, axis=0) < 0):
            raise IntegralityError(f"corridor {cid}: line retired mid-horizon")
        if np.any(np.diff(arr, axis=1) > 0):
            raise IntegralityError(f"corridor {cid}: line slots not filled in order")
    for cid, arr in plan.facts_active.items():
        if np.any(np.diff(arr, axis=0) < 0):
            raise IntegralityError(f"corridor {cid}: device removed mid-horizon")
        if np.any(np.diff(arr, axis=1) > 0):
            raise IntegralityError(f"corridor {cid}: device slots not filled in order")
        if np.any(arr.sum(axis=2) > 1):
            raise IntegralityError(f"corridor {cid}: more than one device on a line")
        lines = plan.line_active[cid].sum(axis=1)
        if np.any(arr.sum(axis=(1, 2)) > lines):
            raise IntegralityError(f"corridor {cid}: more devices than lines")
    for bus, arr in plan.gen_built.items():
        if np.any(np.diff(arr, axis=0) < 0):
            raise IntegralityError(f"bus {bus}: generator retired mid-horizon")
        if np.any(np.diff(arr, axis=1) > 0):
            raise IntegralityError(f"bus {bus}: generator slots not filled in order")
        if np.any(arr.sum(axis=2) > 1):
            raise IntegralityError(f"bus {bus}: more than one type in a unit slot")
        stat = plan.status_new[bus]   # [Y,H,S,W] vs built [Y,S,W]
        if np.any(stat > arr[:, None, :, :]):
            raise IntegralityError(f"bus {bus}: unit committed before installation")
    for g, gen in enumerate(idx.gens):
        stat = plan.status_existing[g].astype(float)
        disp = plan.dispatch_existing[g]
        if np.any(disp > gen.p_max * stat + tol) or np.any(disp < gen.p_min * stat - tol):
            raise IntegralityError(f"generator {gen.id}: dispatch outside capacity")
    for bus in idx.gen_buses:
        stat = plan.status_new[bus].astype(float)
        disp = plan.dispatch_new[bus]
        for w, gt in enumerate(idx.gen_types):
            d, s = disp[..., w], stat[..., w]
            if np.any(d > gt.p_max * s + tol) or np.any(d < gt.p_min * s - tol):
                raise IntegralityError(f"bus {bus}: new-unit dispatch outside capacity")


def plan_cost(plan: Plan, idx: SystemIndex) -> CostBreakdown:
    """Recompute the discounted cost breakdown from plan values."""
    hz = idx.horizon
    ny, nh = len(idx.years), idx.num_slots
    bd = CostBreakdown()
    for c in idx.corridors:
        arr = plan.line_active[c.id].astype(float)
        prev = np.zeros(arr.shape[1])
        prev[: c.min_lines] = 1.0
        for y in range(ny):
            added = arr[y] - prev
            bd.line_invest += c.line_cost * added.sum() * idx.year_discount(y, hz.line_lead_years)
            prev = arr[y]
    for cid, arr in plan.facts_active.items():
        prev = np.zeros(arr.shape[1:])
        for y in range(ny):
            added = arr[y].astype(float) - prev
            for mt, ft in enumerate(idx.facts_types):
                bd.facts_invest += ft.invest_cost * added[:, mt].sum() * idx.year_discount(y, 0)
            prev = arr[y].astype(float)
    for bus, arr in plan.gen_built.items():
        prev = np.zeros(arr.shape[1:])
        for y in range(ny):
            added = arr[y].astype(float) - prev
            for w, gt in enumerate(idx.gen_types):
                bd.gen_invest += gt.invest_cost * added[:, w].sum() * idx.year_discount(y, hz.gen_lead_years)
            prev = arr[y].astype(float)
    for y in range(ny):
        for h in range(nh):
            for g, gen in enumerate(idx.gens):
                w8 = idx.op_weight_existing(y, h)
                bd.base_operation += w8 * (gen.cost_fixed * plan.status_existing[g, y, h]
                                           + gen.cost_marginal * plan.dispatch_existing[g, y, h])
            for bus in idx.gen_buses:
                w8 = idx.op_weight_new(y, h)
                for s in range(idx.gen_slots[bus]):
                    for w, gt in enumerate(idx.gen_types):
                        bd.base_operation += w8 * (
                            gt.cost_fixed * plan.status_new[bus][y, h, s, w]
                            + gt.cost_marginal * plan.dispatch_new[bus][y, h, s, w])
    return bd
