"""Shared toy systems and a seeded random-instance generator.

The toys mirror the worked micro-examples used throughout the test suite;
the generator produces small instances (<= 3 buses, <= 3 uncertain buses,
<= 4 slots) on which extreme-point enumeration is cheap, in two families:

* "covered": every load bus has local generation covering load plus the
  worst deviation, so the no-slack re-dispatch LP is feasible for every
  deviation and the recourse-cost check is well defined;
* "tight": import-limited load buses where worst-case deviations can
  exceed deliverable capacity, exercising nonzero slack verdicts.
"""

from __future__ import annotations

import numpy as np

from robex.master import MasterOptions, SystemIndex, build_master, extract_plan
from robex.solver import SolveParams, SolveStatus, solve
from robex.system import (Bus, Corridor, ExistingGenerator, FactsType,
                          GeneratorType, Horizon, PlanningSystem)
from robex.uncertainty import SlottedLoadModel, UncertaintyModel


def two_bus_system(line_capacity=60.0, ramp=30.0, **horizon_kw):
    """Remote generator feeding one load bus over a single line."""
    horizon_kw.setdefault("base_year", 1)
    horizon_kw.setdefault("num_years", 1)
    return PlanningSystem(
        buses=(Bus("b1", False, 0), Bus("b2", True, 0)),
        corridors=(Corridor("b1-b2", "b1", "b2", 0.2, line_capacity, 1, 2, 10.0),),
        existing_generators=(
            ExistingGenerator("g1", "b1", 0.0, 100.0, ramp, ramp, 0.0, 2e-5),),
        generator_types=(), facts_types=(),
        candidate_gen_buses=(), candidate_line_corridors=(),
        candidate_facts_corridors=(),
        horizon=Horizon(**horizon_kw))


def one_bus_system(p_max=100.0, ramp_up=10.0, ramp_down=40.0,
                   marginal=10.0, **horizon_kw):
    horizon_kw.setdefault("base_year", 1)
    horizon_kw.setdefault("num_years", 1)
    return PlanningSystem(
        buses=(Bus("b1", True, 0),),
        corridors=(),
        existing_generators=(
            ExistingGenerator("g1", "b1", 0.0, p_max, ramp_up, ramp_down,
                              0.0, marginal),),
        generator_types=(), facts_types=(),
        candidate_gen_buses=(), candidate_line_corridors=(),
        candidate_facts_corridors=(),
        horizon=Horizon(**horizon_kw))


def flat_loads(bus_levels: dict[str, float], years=(1,), durations=(100,),
               num_slots=None) -> SlottedLoadModel:
    """Constant per-bus levels replicated over every (year, slot)."""
    durations = np.asarray(durations, dtype=int)
    ns = len(durations)
    bus_ids = sorted(bus_levels)
    levels = np.zeros((len(bus_ids), len(years), ns))
    for b, bus in enumerate(bus_ids):
        levels[b, :, :] = bus_levels[bus]
    events = [[[np.zeros(0) for _ in range(ns)] for _ in years] for _ in bus_ids]
    return SlottedLoadModel(bus_ids, list(years), durations, levels, events)


def uniform_uncertainty(loads: SlottedLoadModel, halfwidth: dict[str, float],
                        budget: int, ramp_lo: dict[str, float] | None = None,
                        ramp_hi: dict[str, float] | None = None) -> UncertaintyModel:
    nb, ny, ns = loads.levels.shape
    half = np.zeros((nb, ny, ns))
    lo = np.zeros((nb, ny, ns))
    hi = np.zeros((nb, ny, ns))
    for b, bus in enumerate(loads.bus_ids):
        half[b] = halfwidth.get(bus, 0.0)
        if ramp_lo:
            lo[b] = ramp_lo.get(bus, 0.0)
        if ramp_hi:
            hi[b] = ramp_hi.get(bus, 0.0)
    return UncertaintyModel(list(loads.bus_ids), list(loads.years), half,
                            np.full((ny, ns), budget, dtype=int), lo, hi)


def solve_plan(system, loads, options: MasterOptions | None = None,
               rel_gap: float = 1e-6):
    """Deterministic master solve + plan extraction, for fixtures."""
    model, mv = build_master(system, loads, options=options)
    res = solve(model, SolveParams(rel_gap=rel_gap))
    if res.status != SolveStatus.OPTIMAL:
        raise RuntimeError(f"fixture master not solvable: {res.status}")
    plan, bd = extract_plan(res, mv)
    return plan, bd, mv.idx


# --- random instance battery --------------------------------------------------


def random_instance(rng: np.random.Generator, family: str):
    """One seeded instance: (system, loads, uncertainty, plan, idx).

    family "covered" keeps every deviation physically absorbable (local
    generation covers load + worst deviation); family "tight" limits
    imports so slack verdicts go positive.
    """
    n_buses = int(rng.integers(2, 4))
    n_years = int(rng.integers(1, 3))
    n_slots = int(rng.integers(1, 3)) if n_years == 2 else int(rng.integers(1, 5))
    bus_ids = [f"b{i+1}" for i in range(n_buses)]
    budget = int(rng.integers(0, 3))
    frac = float(rng.choice([0.05, 0.1, 0.2]))

    levels = np.zeros((n_buses, n_years, n_slots))
    for b in range(n_buses):
        if b == 0:
            continue   # bus 1 is the generation hub
        peak = float(rng.uniform(30, 90))
        for y in range(n_years):
            vals = np.sort(rng.uniform(0.4, 1.0, size=n_slots))[::-1]
            levels[b, y, :] = peak * vals * (1.05 ** y)
    half = frac * levels
    hi = rng.uniform(0.0, 0.25, size=levels.shape) * levels
    lo = -rng.uniform(0.0, 0.25, size=levels.shape) * levels

    years = list(range(1, n_years + 1))
    durations = np.full(n_slots, 10, dtype=int)
    events = [[[np.zeros(0) for _ in range(n_slots)] for _ in years]
              for _ in bus_ids]
    loads = SlottedLoadModel(bus_ids, years, durations, levels.copy(), events)
    unc = UncertaintyModel(bus_ids, years, half,
                           np.full((n_years, n_slots), budget, dtype=int),
                           lo, hi)

    buses = [Bus(bus_ids[0], False, 0)]
    gens = [ExistingGenerator("hub", bus_ids[0], 0.0, 500.0,
                              float(rng.uniform(10, 60)),
                              float(rng.uniform(10, 60)), 0.0,
                              float(rng.uniform(5, 15)))]
    corridors = []
    for b in range(1, n_buses):
        worst = float(levels[b].max() * (1 + frac) + hi[b].max())
        if family == "covered":
            cap = float(rng.uniform(0.2, 0.8) * worst)
            gens.append(ExistingGenerator(
                f"loc{b}", bus_ids[b], 0.0, worst * 1.2,
                float(rng.uniform(2, 12)), float(rng.uniform(2, 12)),
                0.0, float(rng.uniform(20, 40))))
        else:
            # imports cover the base level but not always the deviations
            cap = float(levels[b].max() * rng.uniform(1.0, 1.0 + frac))
        buses.append(Bus(bus_ids[b], True, 0))
        corridors.append(Corridor(f"{bus_ids[0]}-{bus_ids[b]}", bus_ids[0],
                                  bus_ids[b], float(rng.uniform(0.2, 0.6)),
                                  cap, 1, 1, 10.0))
    system = PlanningSystem(
        buses=tuple(buses), corridors=tuple(corridors),
        existing_generators=tuple(gens), generator_types=(), facts_types=(),
        candidate_gen_buses=(), candidate_line_corridors=(),
        candidate_facts_corridors=(),
        horizon=Horizon(base_year=1, num_years=n_years, discount_rate=0.05,
                        recourse_budget=float(rng.uniform(50, 5000))))
    plan, _, idx = solve_plan(system, loads)
    return system, loads, unc, plan, idx


def random_expandable_instance(rng: np.random.Generator):
    """A tiny instance with candidate assets, for end-to-end loop tests."""
    load_peak = float(rng.uniform(50, 80))
    cap = float(rng.uniform(0.62, 0.75) * load_peak)
    frac = 0.1
    system = PlanningSystem(
        buses=(Bus("b1", False, 0), Bus("b2", True, 1)),
        corridors=(Corridor("b1-b2", "b1", "b2", 0.3, cap, 1, 3,
                            float(rng.uniform(5, 15))),),
        existing_generators=(
            ExistingGenerator("g1", "b1", 0.0, 400.0,
                              float(rng.uniform(4, 9)),
                              float(rng.uniform(4, 9)), 0.0, 10.0),),
        generator_types=(GeneratorType("gt", 0.0, float(rng.uniform(20, 40)),
                                       50.0, 50.0, float(rng.uniform(5, 20)),
                                       0.0, 25.0),),
        facts_types=(FactsType("ft", float(rng.uniform(5, 15)),
                               float(rng.uniform(1, 4))),),
        candidate_gen_buses=("b2",),
        candidate_line_corridors=("b1-b2",),
        candidate_facts_corridors=("b1-b2",),
        horizon=Horizon(base_year=1, num_years=2, discount_rate=0.08,
                        recourse_budget=float(rng.uniform(1000, 20000))))
    n_slots = 2
    levels = np.zeros((1, 2, n_slots))
    for y in range(2):
        vals = np.sort(rng.uniform(0.5, 1.0, size=n_slots))[::-1]
        levels[0, y, :] = load_peak * vals * (1.06 ** y)
    half = frac * levels
    hi = rng.uniform(0.05, 0.2, size=levels.shape) * levels
    lo = -rng.uniform(0.05, 0.2, size=levels.shape) * levels
    loads = SlottedLoadModel(["b2"], [1, 2], np.array([10, 10]), levels,
                             [[[np.zeros(0)] * n_slots for _ in range(2)]])
    unc = UncertaintyModel(["b2"], [1, 2], half,
                           np.ones((2, n_slots), dtype=int), lo, hi)
    return system, loads, unc
