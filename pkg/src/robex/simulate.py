"""Monte Carlo validation of a fixed plan.

Samples in-set level and ramp scenarios, dispatches each against the
plan's frozen builds and unit commitment with priced load shedding, and
reports expected-cost and reliability metrics:

* ETC / EOC / ELC: expected total, operation, and load-shedding cost over
  the horizon (discounted like the planning objective);
* HLC: the highest shedding cost any single scenario incurred;
* EENS: expected energy not supplied, MWh per year;
* LOLH: expected hours per year containing shedding.

A scenario pair is dispatched as one LP per (year, slot): stage 1 serves
the level-scenario load, stage 2 serves the ramp-scenario load, and the
two stages are linked by generator ramp limits. Shedding (and a symmetric
dump term that keeps minimum-output units feasible under low-load draws)
is priced; only shedding counts toward ELC/EENS/LOLH.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .master import Plan, SystemIndex
from .solver import INF, LinearModel, SolveParams, SolveStatus, solve
from .uncertainty import (KIND_LEVEL, KIND_RAMP, UncertaintyModel,
                          UncertainPoint)

LOL_THRESHOLD = 1e-6   # MW below which shedding is LP noise, not lost load


@dataclass
class ScenarioConfig:
    """count scenarios from one master seed; the price is per MWh in the
    same currency unit the system's cost data uses (the bundled example is
    in M$, so $7,000/MWh enters as 7e-3)."""
    count: int = 1000
    seed: int = 0
    shedding_price: float = 7000.0
    include_ramp: bool = True
    reoptimize_commitment: bool = False
    solver: SolveParams = field(default_factory=SolveParams)

    def __post_init__(self):
        if self.count < 1:
            raise InputError("scenario count must be >= 1")
        if self.shedding_price <= 0:
            raise InputError("shedding price must be > 0")


@dataclass
class SimulationMetrics:
    etc: float
    eoc: float
    elc: float
    hlc: float
    eens: float     # MWh per year
    lolh: float     # hours per year
    per_scenario: list[dict] = field(default_factory=list)
    per_year: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ETC": self.etc, "EOC": self.eoc, "ELC": self.elc,
                "HLC": self.hlc, "EENS": self.eens, "LOLH": self.lolh}


def _scenario_rngs(config: ScenarioConfig) -> list[np.random.Generator]:
    seq = np.random.SeedSequence(config.seed)
    return [np.random.default_rng(child) for child in seq.spawn(config.count)]


def sample_level(unc: UncertaintyModel, rng: np.random.Generator) -> UncertainPoint:
    """One level-deviation draw: per bus a normal with sd equal to the
    half-width, truncated by rejection to the half-width interval; when a
    (year, slot) draw overshoots the cardinality budget, the whole slot
    vector is scaled back onto the budget surface so every sample stays
    in-set.
    """
    half = unc.level_halfwidth
    eps = np.zeros(unc.shape)
    mask = half > 0
    n = int(mask.sum())
    if n:
        draws = rng.normal(0.0, 1.0, size=n)
        bad = np.abs(draws) > 1.0
        while bad.any():
            draws[bad] = rng.normal(0.0, 1.0, size=int(bad.sum()))
            bad = np.abs(draws) > 1.0
        eps[mask] = draws * half[mask]
    nb, ny, ns = unc.shape
    for y in range(ny):
        for s in range(ns):
            m = mask[:, y, s]
            if not m.any():
                continue
            used = float(np.sum(np.abs(eps[m, y, s]) / half[m, y, s]))
            budget = float(unc.level_budget[y, s])
            if used > budget:
                eps[:, y, s] *= 0.0 if budget == 0 else budget / used
    return UncertainPoint(KIND_LEVEL, eps)


def sample_ramp(unc: UncertaintyModel, rng: np.random.Generator) -> UncertainPoint:
    """One ramp draw, uniform over the per-bus box."""
    u = rng.uniform(0.0, 1.0, size=unc.shape)
    eps = unc.ramp_lower + u * (unc.ramp_upper - unc.ramp_lower)
    return UncertainPoint(KIND_RAMP, eps)


def _stage_columns(m: LinearModel, idx: SystemIndex, plan: Plan, y: int,
                   h: int, tag: str, price_w: float, free_status: bool):
    """One dispatch stage's variables for slot (y, h): generation bounded
    by the plan's commitment, in-service flows/angles/injections, and
    priced shed/dump pairs. Returns handles for rows and the objective."""
    gens = {}
    obj = []
    for g, gen in enumerate(idx.gens):
        v = float(plan.status_existing[g, y, h])
        if free_status:
            vv = m.add_variable(f"v[{gen.id},{tag}]", 0.0, 1.0, integer=True)
            j = m.add_variable(f"pg[{gen.id},{tag}]", 0.0, gen.p_max)
            m.add_constraint([(j, 1.0), (vv, -gen.p_max)], "<=", 0.0)
            m.add_constraint([(j, -1.0), (vv, gen.p_min)], "<=", 0.0)
            gens[("e", g)] = (j, vv)
        else:
            j = m.add_variable(f"pg[{gen.id},{tag}]", gen.p_min * v, gen.p_max * v)
            gens[("e", g)] = (j, None)
    for bus in idx.gen_buses:
        built = plan.gen_built[bus]
        for s in range(built.shape[1]):
            for w, gt in enumerate(idx.gen_types):
                if free_status:
                    if not built[y, s, w]:
                        continue
                    vv = m.add_variable(f"vn[{bus},{s},{w},{tag}]", 0.0, 1.0,
                                        integer=True)
                    j = m.add_variable(f"pgn[{bus},{s},{w},{tag}]", 0.0, gt.p_max)
                    m.add_constraint([(j, 1.0), (vv, -gt.p_max)], "<=", 0.0)
                    m.add_constraint([(j, -1.0), (vv, gt.p_min)], "<=", 0.0)
                    gens[("n", bus, s, w)] = (j, vv)
                else:
                    v = float(plan.status_new[bus][y, h, s, w])
                    j = m.add_variable(f"pgn[{bus},{s},{w},{tag}]",
                                       gt.p_min * v, gt.p_max * v)
                    gens[("n", bus, s, w)] = (j, None)

    theta = {b.id: m.add_variable(f"th[{b.id},{tag}]",
                                  -idx.horizon.theta_max, idx.horizon.theta_max)
             for b in idx.buses}
    lines = []
    facts = []
    for c in idx.corridors:
        act = plan.line_active[c.id]
        fct = plan.facts_active[c.id]
        for k in range(act.shape[1]):
            if not act[y, k]:
                continue
            devices = []
            for mt in range(fct.shape[2]):
                if fct[y, k, mt]:
                    ft = idx.facts_types[mt]
                    jf = m.add_variable(f"pf[{c.id},{k},{mt},{tag}]",
                                        -ft.capacity, ft.capacity)
                    devices.append(jf)
            bound = c.line_capacity + sum(idx.facts_types[mt].capacity
                                          for mt in range(fct.shape[2])
                                          if fct[y, k, mt])
            jl = m.add_variable(f"pl[{c.id},{k},{tag}]", -bound, bound)
            cap = [(jl, 1.0)] + [(jf, -1.0) for jf in devices]
            m.add_constraint(cap, "<=", c.line_capacity)
            m.add_constraint([(jj, -vv) for jj, vv in cap], "<=", c.line_capacity)
            xpu = c.reactance / idx.system.base_mva
            m.add_constraint([(theta[c.from_bus], 1.0), (theta[c.to_bus], -1.0),
                              (jl, -xpu)], "=", 0.0)
            lines.append((c, jl))
            facts.extend((c, jf) for jf in devices)

    shed = [m.add_variable(f"shed[{b.id},{tag}]", 0.0, INF) for b in idx.buses]
    dump = [m.add_variable(f"dump[{b.id},{tag}]", 0.0, INF) for b in idx.buses]
    for j in shed:
        obj.append((j, price_w))
    for j in dump:
        obj.append((j, price_w))
    return {"gens": gens, "theta": theta, "lines": lines, "facts": facts,
            "shed": shed, "dump": dump, "obj": obj}


def _stage_balance(m: LinearModel, idx: SystemIndex, stage: dict,
                   load: np.ndarray):
    for i, b in enumerate(idx.buses):
        row = []
        for key, (j, _) in stage["gens"].items():
            if (key[0] == "e" and idx.gens[key[1]].bus == b.id) or \
               (key[0] == "n" and key[1] == b.id):
                row.append((j, 1.0))
        for c, jl in stage["lines"]:
            if c.from_bus == b.id:
                row.append((jl, -1.0))
            elif c.to_bus == b.id:
                row.append((jl, 1.0))
        for c, jf in stage["facts"]:
            if c.from_bus == b.id:
                row.append((jf, 1.0))
            elif c.to_bus == b.id:
                row.append((jf, -1.0))
        row.append((stage["shed"][i], 1.0))
        row.append((stage["dump"][i], -1.0))
        m.add_constraint(row, "=", float(load[i]))


def dispatch_slot(idx: SystemIndex, plan: Plan, y: int, h: int,
                  level_eps: np.ndarray, ramp_eps: np.ndarray | None,
                  config: ScenarioConfig) -> dict:
    """Dispatch one (year, slot) against a scenario (pair).

    Returns the slot's discounted operation cost (stage-1 fuel plus the
    plan's commitment cost), discounted shedding cost, shed energy in MWh,
    and whether lost load occurred. With ``ramp_eps`` a second stage serves
    the ramp-scenario load, linked to stage 1 by generator ramp limits.
    """
    d = float(idx.durations[h])
    disc_e = idx.year_discount(y, 0)
    disc_n = idx.year_discount(y, idx.horizon.gen_lead_years)
    price_w = d * disc_e * config.shedding_price
    base_load = np.array([idx.load_at(b.id, y, h) for b in idx.buses])

    def bus_eps(vec):
        out = np.zeros(len(idx.buses))
        for i, b in enumerate(idx.buses):
            row = idx.load_row[b.id]
            if row is not None:
                out[i] = vec[row]
        return out

    m = LinearModel(f"dispatch[{y},{h}]")
    st1 = _stage_columns(m, idx, plan, y, h, "s1", price_w,
                         config.reoptimize_commitment)
    _stage_balance(m, idx, st1, base_load + bus_eps(level_eps))
    stages = [st1]
    if ramp_eps is not None:
        st2 = _stage_columns(m, idx, plan, y, h, "s2", price_w,
                             config.reoptimize_commitment)
        _stage_balance(m, idx, st2, base_load + bus_eps(ramp_eps))
        stages.append(st2)
        for key, (j1, _) in st1["gens"].items():
            j2 = st2["gens"][key][0]
            if key[0] == "e":
                gen = idx.gens[key[1]]
                ru, rd = gen.ramp_up, gen.ramp_down
            else:
                gt = idx.gen_types[key[3]]
                ru, rd = gt.ramp_up, gt.ramp_down
            m.add_constraint([(j2, 1.0), (j1, -1.0)], "<=", ru)
            m.add_constraint([(j1, 1.0), (j2, -1.0)], "<=", rd)

    obj: dict[int, float] = {}
    commit_cost = 0.0
    for stage_n, stage in enumerate(stages):
        for key, (j, vv) in stage["gens"].items():
            if key[0] == "e":
                w8 = d * disc_e * idx.gens[key[1]].cost_marginal
                fixed = d * disc_e * idx.gens[key[1]].cost_fixed
                status = plan.status_existing[key[1], y, h]
            else:
                gt = idx.gen_types[key[3]]
                w8 = d * disc_n * gt.cost_marginal
                fixed = d * disc_n * gt.cost_fixed
                status = plan.status_new[key[1]][y, h, key[2], key[3]]
            obj[j] = obj.get(j, 0.0) + w8
            if vv is not None:
                obj[vv] = obj.get(vv, 0.0) + fixed
            elif stage_n == 0:
                commit_cost += fixed * float(status)
        for j, w8 in stage["obj"]:
            obj[j] = obj.get(j, 0.0) + w8
    m.set_objective(obj, minimize=True)
    res = solve(m, config.solver)
    if res.status != SolveStatus.OPTIMAL:
        raise InputError(f"scenario dispatch at ({y},{h}) ended {res.status}")
    x = res.x

    op_cost = commit_cost
    for key, (j, vv) in st1["gens"].items():
        if key[0] == "e":
            w8 = d * disc_e * idx.gens[key[1]].cost_marginal
            fixed = d * disc_e * idx.gens[key[1]].cost_fixed
        else:
            gt = idx.gen_types[key[3]]
            w8 = d * disc_n * gt.cost_marginal
            fixed = d * disc_n * gt.cost_fixed
        op_cost += w8 * x[j]
        if vv is not None:
            op_cost += fixed * x[vv]
    shed_mw = 0.0
    for stage in stages:
        shed_mw += float(sum(x[j] for j in stage["shed"]))
    shed_cost = price_w * shed_mw
    return {"op_cost": op_cost, "shed_cost": shed_cost,
            "shed_energy": d * shed_mw,
            "lol_hours": d if shed_mw > LOL_THRESHOLD else 0.0}


def evaluate(idx: SystemIndex, plan: Plan, unc: UncertaintyModel,
             config: ScenarioConfig) -> SimulationMetrics:
    """Dispatch ``config.count`` seeded scenario (pairs) and fold the
    per-scenario costs into the expectation metrics. Identical config and
    inputs give bit-identical metrics; ``per_year`` carries year-resolved
    expectations for plotting."""
    ny, nh = len(idx.years), idx.num_slots
    rows: list[dict] = []
    per_year = [{"year": idx.years[y], "eoc": 0.0, "elc": 0.0, "eens": 0.0,
                 "lolh": 0.0} for y in range(ny)]
    for n, rng in enumerate(_scenario_rngs(config)):
        level = sample_level(unc, rng)
        ramp = sample_ramp(unc, rng) if config.include_ramp else None
        op = shed_cost = energy = hours = 0.0
        for y in range(ny):
            for h in range(nh):
                out = dispatch_slot(
                    idx, plan, y, h, level.epsilon[:, y, h],
                    ramp.epsilon[:, y, h] if ramp is not None else None,
                    config)
                op += out["op_cost"]
                shed_cost += out["shed_cost"]
                energy += out["shed_energy"]
                hours += out["lol_hours"]
                per_year[y]["eoc"] += out["op_cost"] / config.count
                per_year[y]["elc"] += out["shed_cost"] / config.count
                per_year[y]["eens"] += out["shed_energy"] / config.count
                per_year[y]["lolh"] += out["lol_hours"] / config.count
        rows.append({"scenario": n, "op_cost": op, "shed_cost": shed_cost,
                     "total_cost": op + shed_cost, "shed_energy": energy,
                     "lol_hours": hours})
    eoc = float(np.mean([r["op_cost"] for r in rows]))
    elc = float(np.mean([r["shed_cost"] for r in rows]))
    hlc = float(np.max([r["shed_cost"] for r in rows]))
    eens = float(np.mean([r["shed_energy"] for r in rows])) / ny
    lolh = float(np.mean([r["lol_hours"] for r in rows])) / ny
    metrics = SimulationMetrics(eoc + elc, eoc, elc, hlc, eens, lolh, rows)
    metrics.per_year = per_year
    return metrics


def scenario_points(unc: UncertaintyModel, config: ScenarioConfig,
                    ) -> list[tuple[UncertainPoint, UncertainPoint | None]]:
    """The exact deviation draws :func:`evaluate` would dispatch; exposed
    so in-set membership can be asserted independently."""
    out = []
    for rng in _scenario_rngs(config):
        level = sample_level(unc, rng)
        ramp = sample_ramp(unc, rng) if config.include_ramp else None
        out.append((level, ramp))
    return out
