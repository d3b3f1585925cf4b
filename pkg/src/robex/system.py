"""Static network description: buses, corridors, generators, FACTS catalog,
and the planning horizon.

All objects are frozen dataclasses; a :class:`PlanningSystem` is safe to
share read-only across threads. :func:`validate` returns a report of
invariant violations instead of raising, so callers can show everything
wrong with a data file at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

HALF_PI = math.pi / 2.0

# devices install in the year they are paid for; not configurable
FACTS_LEAD_YEARS = 0


@dataclass(frozen=True)
class Bus:
    id: str
    has_load: bool = False
    max_new_generators: int = 0


@dataclass(frozen=True)
class Corridor:
    id: str
    from_bus: str
    to_bus: str
    reactance: float          # per-unit on the system base
    line_capacity: float      # MW per line
    min_lines: int            # existing line count
    max_lines: int
    line_cost: float          # currency per new line


@dataclass(frozen=True)
class ExistingGenerator:
    id: str
    bus: str
    p_min: float
    p_max: float
    ramp_up: float            # MW per hour, re-dispatch headroom
    ramp_down: float
    cost_fixed: float         # currency per committed hour
    cost_marginal: float      # currency per MWh


@dataclass(frozen=True)
class GeneratorType:
    type_id: str
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    invest_cost: float
    cost_fixed: float
    cost_marginal: float


@dataclass(frozen=True)
class FactsType:
    type_id: str
    capacity: float           # MW injection bound
    invest_cost: float


@dataclass(frozen=True)
class Horizon:
    base_year: int = 1
    num_years: int = 1
    discount_rate: float = 0.0
    line_lead_years: int = 0
    gen_lead_years: int = 0
    theta_max: float = HALF_PI          # radians
    recourse_budget: float = float("inf")  # currency cap on re-dispatch cost

    @property
    def years(self) -> range:
        return range(self.base_year, self.base_year + self.num_years)

    def discount(self, year: int, lead: int = 0) -> float:
        """1/(1+D)^(year - base - lead): money spent ``lead`` years before
        the year an asset enters service."""
        return 1.0 / (1.0 + self.discount_rate) ** (year - self.base_year - lead)


@dataclass(frozen=True)
class PlanningSystem:
    buses: tuple[Bus, ...]
    corridors: tuple[Corridor, ...]
    existing_generators: tuple[ExistingGenerator, ...]
    generator_types: tuple[GeneratorType, ...]
    facts_types: tuple[FactsType, ...]
    candidate_gen_buses: tuple[str, ...]
    candidate_line_corridors: tuple[str, ...]
    candidate_facts_corridors: tuple[str, ...]
    horizon: Horizon
    base_mva: float = 100.0   # converts per-unit reactance against MW flows
    name: str = "system"

    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    def corridor_by_id(self) -> dict[str, Corridor]:
        return {c.id: c for c in self.corridors}

    def bus_by_id(self) -> dict[str, Bus]:
        return {b.id: b for b in self.buses}


def validate(system: PlanningSystem) -> list[str]:
    """Check every structural invariant; return one message per violation.

    An empty report means the system is safe for model construction. Load
    buses unreachable over the existing (min_lines >= 1) network are only a
    warning: the plan may build the missing corridor.
    """
    report: list[str] = []
    bus_ids = [b.id for b in system.buses]
    seen = set()
    for b in system.buses:
        if b.id in seen:
            report.append(f"bus {b.id}: duplicate id")
        seen.add(b.id)
        if b.max_new_generators < 0:
            report.append(f"bus {b.id}: max_new_generators < 0")
    bus_set = set(bus_ids)

    cor_seen = set()
    for c in system.corridors:
        if c.id in cor_seen:
            report.append(f"corridor {c.id}: duplicate id")
        cor_seen.add(c.id)
        if c.from_bus == c.to_bus:
            report.append(f"corridor {c.id}: from_bus == to_bus")
        for end in (c.from_bus, c.to_bus):
            if end not in bus_set:
                report.append(f"corridor {c.id}: unknown bus {end}")
        if c.min_lines < 0:
            report.append(f"corridor {c.id}: min_lines < 0")
        if c.min_lines > c.max_lines:
            report.append(f"corridor {c.id}: min_lines > max_lines")
        if c.reactance <= 0:
            report.append(f"corridor {c.id}: reactance must be > 0")
        if c.line_capacity <= 0:
            report.append(f"corridor {c.id}: line_capacity must be > 0")
        if c.line_cost < 0:
            report.append(f"corridor {c.id}: line_cost < 0")

    gen_seen = set()
    for g in system.existing_generators:
        if g.id in gen_seen:
            report.append(f"generator {g.id}: duplicate id")
        gen_seen.add(g.id)
        if g.bus not in bus_set:
            report.append(f"generator {g.id}: unknown bus {g.bus}")
        if not 0 <= g.p_min <= g.p_max:
            report.append(f"generator {g.id}: requires 0 <= p_min <= p_max")
        if g.ramp_up < 0 or g.ramp_down < 0:
            report.append(f"generator {g.id}: ramp limits must be >= 0")

    type_seen = set()
    for w in system.generator_types:
        if w.type_id in type_seen:
            report.append(f"generator type {w.type_id}: duplicate id")
        type_seen.add(w.type_id)
        if not 0 <= w.p_min <= w.p_max:
            report.append(f"generator type {w.type_id}: requires 0 <= p_min <= p_max")
        if w.invest_cost < 0:
            report.append(f"generator type {w.type_id}: invest_cost < 0")
        if w.ramp_up < 0 or w.ramp_down < 0:
            report.append(f"generator type {w.type_id}: ramp limits must be >= 0")

    facts_seen = set()
    for m in system.facts_types:
        if m.type_id in facts_seen:
            report.append(f"facts type {m.type_id}: duplicate id")
        facts_seen.add(m.type_id)
        if m.capacity <= 0:
            report.append(f"facts type {m.type_id}: capacity must be > 0")
        if m.invest_cost < 0:
            report.append(f"facts type {m.type_id}: invest_cost < 0")

    for bid in system.candidate_gen_buses:
        if bid not in bus_set:
            report.append(f"candidate gen bus {bid}: unresolved reference")
    for cid in system.candidate_line_corridors:
        if cid not in cor_seen:
            report.append(f"candidate line corridor {cid}: unresolved reference")
    for cid in system.candidate_facts_corridors:
        if cid not in cor_seen:
            report.append(f"candidate facts corridor {cid}: unresolved reference")

    h = system.horizon
    if h.num_years < 1:
        report.append("horizon: num_years < 1")
    if h.discount_rate < 0:
        report.append("horizon: discount_rate < 0")
    if h.line_lead_years < 0 or h.gen_lead_years < 0:
        report.append("horizon: lead years must be >= 0")
    if h.theta_max <= 0:
        report.append("horizon: theta_max must be > 0")
    if h.recourse_budget < 0:
        report.append("horizon: recourse_budget < 0")
    if system.base_mva <= 0:
        report.append("system: base_mva must be > 0")

    if not report:
        _warn_if_disconnected(system)
    return report


def _warn_if_disconnected(system: PlanningSystem):
    """Union-find over corridors that already have a line."""
    parent = {b.id: b.id for b in system.buses}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in system.corridors:
        if c.min_lines >= 1:
            parent[find(c.from_bus)] = find(c.to_bus)
    load_roots = {find(b.id) for b in system.buses if b.has_load}
    if len(load_roots) > 1:
        warnings.warn(
            "load buses are not connected by the existing network; "
            "feasibility depends on candidate lines", stacklevel=3)
