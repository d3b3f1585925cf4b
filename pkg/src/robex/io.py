"""File formats: system JSON, hourly-curve CSV, plan/report/metrics JSON.

All structured data is JSON; bulk hourly series are CSV. Power is MW
throughout; costs use one consistent currency unit (the bundled example is
denominated in M$). The system schema is documented field-by-field in the
README and enforced here with errors that name the offending entity.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .ccg import CcgReport
from .errors import InputError, ValidationError
from .master import CostBreakdown, Plan, SystemIndex
from .system import (Bus, Corridor, ExistingGenerator, FactsType,
                     GeneratorType, Horizon, PlanningSystem, validate)
from .uncertainty import HourlyCurve, SlottedLoadModel, UncertaintyModel


def bundled_path(name: str) -> Path:
    """Path of a data file shipped inside the package."""
    return Path(resources.files("robex").joinpath("data", name))


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise InputError(f"{context}: missing field {key!r}")
    return obj[key]


def load_system(path) -> PlanningSystem:
    """Parse and validate a system JSON file; any invariant violation is a
    hard error carrying the full report."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc
    return system_from_dict(raw, context=str(path))


def system_from_dict(raw: dict, context: str = "system") -> PlanningSystem:
    buses = tuple(
        Bus(id=str(_require(b, "id", f"{context} bus")),
            has_load=bool(b.get("has_load", False)),
            max_new_generators=int(b.get("max_new_generators", 0)))
        for b in _require(raw, "buses", context))
    corridors = tuple(
        Corridor(id=str(_require(c, "id", f"{context} corridor")),
                 from_bus=str(_require(c, "from_bus", f"corridor {c.get('id')}")),
                 to_bus=str(_require(c, "to_bus", f"corridor {c.get('id')}")),
                 reactance=float(_require(c, "reactance", f"corridor {c.get('id')}")),
                 line_capacity=float(_require(c, "line_capacity", f"corridor {c.get('id')}")),
                 min_lines=int(c.get("min_lines", 0)),
                 max_lines=int(_require(c, "max_lines", f"corridor {c.get('id')}")),
                 line_cost=float(c.get("line_cost", 0.0)))
        for c in _require(raw, "corridors", context))
    gens = tuple(
        ExistingGenerator(id=str(g.get("id", f"gen{i}")),
                          bus=str(_require(g, "bus", f"{context} generator {i}")),
                          p_min=float(g.get("p_min", 0.0)),
                          p_max=float(_require(g, "p_max", f"generator {g.get('id', i)}")),
                          ramp_up=float(_require(g, "ramp_up", f"generator {g.get('id', i)}")),
                          ramp_down=float(_require(g, "ramp_down", f"generator {g.get('id', i)}")),
                          cost_fixed=float(g.get("cost_fixed", 0.0)),
                          cost_marginal=float(_require(g, "cost_marginal",
                                                       f"generator {g.get('id', i)}")))
        for i, g in enumerate(raw.get("existing_generators", [])))
    gen_types = tuple(
        GeneratorType(type_id=str(_require(w, "type_id", f"{context} generator type")),
                      p_min=float(w.get("p_min", 0.0)),
                      p_max=float(_require(w, "p_max", f"generator type {w.get('type_id')}")),
                      ramp_up=float(_require(w, "ramp_up", f"generator type {w.get('type_id')}")),
                      ramp_down=float(_require(w, "ramp_down", f"generator type {w.get('type_id')}")),
                      invest_cost=float(_require(w, "invest_cost", f"generator type {w.get('type_id')}")),
                      cost_fixed=float(w.get("cost_fixed", 0.0)),
                      cost_marginal=float(_require(w, "cost_marginal",
                                                   f"generator type {w.get('type_id')}")))
        for w in raw.get("generator_types", []))
    facts_types = tuple(
        FactsType(type_id=str(_require(m, "type_id", f"{context} facts type")),
                  capacity=float(_require(m, "capacity", f"facts type {m.get('type_id')}")),
                  invest_cost=float(_require(m, "invest_cost", f"facts type {m.get('type_id')}")))
        for m in raw.get("facts_types", []))
    h = _require(raw, "horizon", context)
    horizon = Horizon(
        base_year=int(h.get("base_year", 1)),
        num_years=int(_require(h, "num_years", f"{context} horizon")),
        discount_rate=float(h.get("discount_rate", 0.0)),
        line_lead_years=int(h.get("line_lead_years", 0)),
        gen_lead_years=int(h.get("gen_lead_years", 0)),
        theta_max=float(h.get("theta_max", Horizon.theta_max)),
        recourse_budget=float(h.get("recourse_budget", float("inf"))))
    system = PlanningSystem(
        buses=buses, corridors=corridors, existing_generators=gens,
        generator_types=gen_types, facts_types=facts_types,
        candidate_gen_buses=tuple(raw.get("candidate_gen_buses", [])),
        candidate_line_corridors=tuple(raw.get("candidate_line_corridors", [])),
        candidate_facts_corridors=tuple(raw.get("candidate_facts_corridors", [])),
        horizon=horizon,
        base_mva=float(raw.get("base_mva", 100.0)),
        name=str(raw.get("name", "system")))
    report = validate(system)
    if report:
        raise ValidationError(report)
    return system


def load_curves(path) -> dict:
    """Read hourly net-load curves.

    Header ``hour,<bus>,...`` gives base-year curves (one row per hour,
    contiguous from 1); header ``year,hour,<bus>,...`` gives one curve per
    (year, bus). Negative net load is legal and only warned about.
    Returns {"base": {bus: HourlyCurve}} or {"per_year": {year: {...}}}.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [c.strip() for c in header]
        rows = list(reader)
    if not rows:
        raise InputError(f"{path}: no data rows")
    if header[0] == "hour":
        buses = header[1:]
        values = _parse_rows(path, rows, len(header))
        _check_hours(path, [int(v[0]) for v in values])
        data = {bus: np.array([v[j + 1] for v in values])
                for j, bus in enumerate(buses)}
        _warn_negative(path, data)
        return {"base": {bus: HourlyCurve(bus, 0, arr) for bus, arr in data.items()}}
    if header[:2] == ["year", "hour"]:
        buses = header[2:]
        values = _parse_rows(path, rows, len(header))
        per_year: dict[int, dict[str, HourlyCurve]] = {}
        years = sorted({int(v[0]) for v in values})
        for year in years:
            sub = [v for v in values if int(v[0]) == year]
            _check_hours(path, [int(v[1]) for v in sub])
            data = {bus: np.array([v[j + 2] for v in sub])
                    for j, bus in enumerate(buses)}
            _warn_negative(path, data)
            per_year[year] = {bus: HourlyCurve(bus, year, arr)
                              for bus, arr in data.items()}
        return {"per_year": per_year}
    raise InputError(f"{path}: header must start with 'hour' or 'year,hour'")


def _parse_rows(path, rows, width):
    out = []
    for n, row in enumerate(rows, start=2):
        if len(row) != width:
            raise InputError(f"{path}: line {n}: expected {width} cells, got {len(row)}")
        try:
            out.append([float(c) for c in row])
        except ValueError as exc:
            raise InputError(f"{path}: line {n}: non-numeric cell ({exc})") from exc
    return out


def _check_hours(path, hours):
    expect = list(range(1, len(hours) + 1))
    if hours != expect:
        raise InputError(f"{path}: hours must run contiguously from 1")


def _warn_negative(path, data):
    import warnings
    for bus, arr in data.items():
        if np.any(arr < 0):
            warnings.warn(f"{path}: bus {bus} has negative net load "
                          "(renewables exceed demand)", stacklevel=3)


# --- plan / report / metrics serialization -----------------------------------


def _pack(arr: np.ndarray) -> dict:
    # flat storage + explicit shape: nested lists silently drop trailing
    # dimensions when an intermediate axis has size 0
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def _unpack(raw: dict, dtype) -> np.ndarray:
    return np.array(raw["data"], dtype=dtype).reshape(raw["shape"])


def plan_to_dict(plan: Plan) -> dict:
    return {
        "line_active": {cid: _pack(arr) for cid, arr in plan.line_active.items()},
        "facts_active": {cid: _pack(arr) for cid, arr in plan.facts_active.items()},
        "gen_built": {bus: _pack(arr) for bus, arr in plan.gen_built.items()},
        "status_existing": _pack(plan.status_existing),
        "status_new": {bus: _pack(arr) for bus, arr in plan.status_new.items()},
        "dispatch_existing": _pack(plan.dispatch_existing),
        "dispatch_new": {bus: _pack(arr) for bus, arr in plan.dispatch_new.items()},
    }


def plan_from_dict(raw: dict) -> Plan:
    return Plan(
        line_active={c: _unpack(a, np.int8) for c, a in raw["line_active"].items()},
        facts_active={c: _unpack(a, np.int8) for c, a in raw["facts_active"].items()},
        gen_built={b: _unpack(a, np.int8) for b, a in raw["gen_built"].items()},
        status_existing=_unpack(raw["status_existing"], np.int8),
        status_new={b: _unpack(a, np.int8) for b, a in raw["status_new"].items()},
        dispatch_existing=_unpack(raw["dispatch_existing"], float),
        dispatch_new={b: _unpack(a, float) for b, a in raw["dispatch_new"].items()},
    )


def save_plan(plan: Plan, path):
    Path(path).write_text(json.dumps(plan_to_dict(plan)))


def load_plan(path) -> Plan:
    return plan_from_dict(json.loads(Path(path).read_text()))


def report_to_dict(report: CcgReport, breakdown: CostBreakdown | None = None) -> dict:
    bd = breakdown if breakdown is not None else report.breakdown
    return {
        "termination": report.termination,
        "objective": report.objective,
        "breakdown": bd.to_dict() if bd is not None else None,
        "num_level_cuts": report.num_level_cuts,
        "num_ramp_cuts": report.num_ramp_cuts,
        "iterations": [r.to_dict() for r in report.iterations],
        "cuts": [{"kind": c.kind, "iteration": c.iteration} for c in report.cuts],
        "plan": plan_to_dict(report.plan) if report.plan is not None else None,
    }


def save_report(report: CcgReport, path):
    Path(path).write_text(json.dumps(report_to_dict(report), indent=1))


def uncertainty_to_dict(loads: SlottedLoadModel, unc: UncertaintyModel) -> dict:
    """Audit dump of the built sets, keyed by bus/year/slot."""
    out = {"slot_durations": loads.slot_durations.tolist(),
           "years": list(loads.years), "buses": list(unc.bus_ids),
           "levels": {}, "level_halfwidth": {}, "level_budget": {},
           "ramp_lower": {}, "ramp_upper": {}}
    for b, bus in enumerate(unc.bus_ids):
        out["levels"][bus] = loads.levels[b].tolist()
        out["level_halfwidth"][bus] = unc.level_halfwidth[b].tolist()
        out["ramp_lower"][bus] = unc.ramp_lower[b].tolist()
        out["ramp_upper"][bus] = unc.ramp_upper[b].tolist()
    out["level_budget"] = unc.level_budget.tolist()
    return out


def write_scenario_csv(rows: list[dict], path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["scenario", "op_cost", "shed_cost",
                                                "total_cost", "shed_energy",
                                                "lol_hours"])
        writer.writeheader()
        writer.writerows(rows)


def write_per_year_csv(per_year: list[dict], path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["year", "eoc", "elc", "eens", "lolh"])
        writer.writeheader()
        writer.writerows(per_year)


def build_schedule_table(plan: Plan, idx: SystemIndex) -> str:
    """Human-readable build schedule, one row per asset class per year."""
    lines = []
    years = idx.years
    header = "asset      " + "".join(f"{y:>12}" for y in years)
    lines.append(header)
    lines.append("-" * len(header))
    row = ["line       "]
    for y in range(len(years)):
        added = []
        for cid, arr in sorted(plan.line_active.items()):
            c = idx.corridors[idx.cor_pos[cid]]
            prev = arr[y - 1] if y else np.array(
                [1 if k < c.min_lines else 0 for k in range(arr.shape[1])])
            n_new = int(arr[y].sum() - prev.sum())
            added += [cid] * n_new
        row.append(f"{' '.join(added) if added else '-':>12}")
    lines.append("".join(row))
    row = ["facts      "]
    for y in range(len(years)):
        added = []
        for cid, arr in sorted(plan.facts_active.items()):
            prev = arr[y - 1] if y else np.zeros(arr.shape[1:], dtype=np.int8)
            diff = arr[y] - prev
            for k in range(diff.shape[0]):
                for mt in range(diff.shape[1]):
                    if diff[k, mt] > 0:
                        added.append(f"{cid}({idx.facts_types[mt].type_id})")
        row.append(f"{' '.join(added) if added else '-':>12}")
    lines.append("".join(row))
    row = ["generator  "]
    for y in range(len(years)):
        added = []
        for bus, arr in sorted(plan.gen_built.items()):
            prev = arr[y - 1] if y else np.zeros(arr.shape[1:], dtype=np.int8)
            diff = arr[y] - prev
            for s in range(diff.shape[0]):
                for w in range(diff.shape[1]):
                    if diff[s, w] > 0:
                        added.append(f"{bus}({idx.gen_types[w].type_id})")
        row.append(f"{' '.join(added) if added else '-':>12}")
    lines.append("".join(row))
    return "\n".join(lines)


def cost_table(breakdown: CostBreakdown) -> str:
    rows = [("Line", breakdown.line_invest), ("FACTS", breakdown.facts_invest),
            ("Generator", breakdown.gen_invest), ("Investment", breakdown.invest),
            ("Operation", breakdown.base_operation), ("Total", breakdown.total)]
    width = max(len(n) for n, _ in rows)
    return "\n".join(f"{n:<{width}}  {v:12.4f}" for n, v in rows)
