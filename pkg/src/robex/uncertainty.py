"""From raw hourly net-load curves to the stepwise slot model and the two
uncertainty sets the robust plan hedges against.

The pipeline has four steps per (bus, year):

1. turn the hourly curve into hour-to-hour ramp events, each attached to
   the hour the ramp starts from;
2. sort the hours into a descending duration curve, carrying the attached
   events along;
3. average the sorted levels inside user-chosen slot durations, pooling the
   events of each slot;
4. derive per-slot deviation bounds: a symmetric half-width proportional to
   the slot level (with a per-slot cardinality budget across buses), and a
   ramp box spanning the worst observed up/down events of the slot.

Levels carry a *level* deviation set (budgeted polytope) and ramps a *ramp*
deviation set (box). Both are polytopes whose worst cases sit on the
extreme points enumerated here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationTooLarge, InputError

KIND_LEVEL = "level"
KIND_RAMP = "ramp"

DEFAULT_ENUMERATION_CAP = 10 ** 6


@dataclass(frozen=True)
class HourlyCurve:
    """One bus-year of hourly net load (demand minus renewable infeed).

    8760 values for real data; any length >= 2 works for tests. Negative
    values are legal (renewables exceeding demand).
    """
    bus: str
    year: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 2:
            raise InputError(f"curve {self.bus}/{self.year}: need >= 2 hourly values")
        if not np.all(np.isfinite(vals)):
            raise InputError(f"curve {self.bus}/{self.year}: non-finite values")


@dataclass(frozen=True)
class RampEvent:
    start_level: float
    delta: float              # next hour minus this hour, signed


def extract_ramp_events(curve: HourlyCurve) -> list[RampEvent]:
    """One event per adjacent hour pair; the final hour starts no ramp."""
    v = curve.values
    return [RampEvent(float(v[t]), float(v[t + 1] - v[t])) for t in range(len(v) - 1)]


@dataclass(frozen=True)
class DurationCurve:
    """Hours sorted by non-increasing level, each carrying the ramp delta
    attached to it before sorting (NaN for the hour that had none)."""
    levels: np.ndarray
    deltas: np.ndarray        # aligned with levels; NaN = no event


def build_duration_curve(curve: HourlyCurve) -> DurationCurve:
    v = curve.values
    deltas = np.full(len(v), np.nan)
    deltas[:-1] = np.diff(v)
    # stable descending sort: sort ascending on -level keeps original hour
    # order among ties
    order = np.argsort(-v, kind="stable")
    return DurationCurve(levels=v[order], deltas=deltas[order])


@dataclass
class SlottedLoadModel:
    """Stepwise duration-curve levels and pooled ramp events.

    ``levels[b, y, s]`` is the mean net load of slot ``s`` (ordered from
    the heaviest-loaded hours down), lasting ``slot_durations[s]`` hours.
    ``ramp_events[b][y][s]`` holds the signed deltas pooled into the slot.
    """
    bus_ids: list[str]
    years: list[int]
    slot_durations: np.ndarray                  # hours per slot, sums to H
    levels: np.ndarray                          # [bus, year, slot]
    ramp_events: list[list[list[np.ndarray]]]   # [bus][year][slot] -> deltas

    @property
    def num_slots(self) -> int:
        return len(self.slot_durations)

    def bus_index(self, bus: str) -> int:
        return self.bus_ids.index(bus)

    def year_index(self, year: int) -> int:
        return self.years.index(year)


def discretize(curve: DurationCurve, slot_durations) -> tuple[np.ndarray, list[np.ndarray]]:
    """Average sorted levels per slot; pool the attached ramp deltas.

    Returns (slot level means, per-slot delta arrays). Durations must be
    positive integers summing to the curve length.
    """
    durations = np.asarray(slot_durations, dtype=int)
    if np.any(durations < 1):
        raise InputError("slot durations must be >= 1 hour")
    if durations.sum() != len(curve.levels):
        raise InputError(
            f"slot durations sum to {durations.sum()}, curve has {len(curve.levels)} hours")
    levels = np.empty(len(durations))
    events: list[np.ndarray] = []
    start = 0
    for s, d in enumerate(durations):
        stop = start + d
        levels[s] = curve.levels[start:stop].mean()
        attached = curve.deltas[start:stop]
        events.append(attached[~np.isnan(attached)].copy())
        start = stop
    return levels, events


def equal_slot_durations(num_hours: int, num_slots: int) -> np.ndarray:
    """Split ``num_hours`` into ``num_slots`` near-equal integer durations
    (earlier slots take the remainder)."""
    if not 1 <= num_slots <= num_hours:
        raise InputError(f"cannot cut {num_hours} hours into {num_slots} slots")
    base, extra = divmod(num_hours, num_slots)
    return np.array([base + (1 if s < extra else 0) for s in range(num_slots)])


def build_slotted_model(curves: dict[str, HourlyCurve], years: list[int],
                        slot_durations, growth_rate: float = 0.0,
                        per_year: dict[int, dict[str, HourlyCurve]] | None = None,
                        ) -> SlottedLoadModel:
    """Run steps 1-3 for every (bus, year).

    Either ``per_year`` supplies one curve per (year, bus), or ``curves``
    holds base-year curves that are scaled by (1+growth)^(y - first year) —
    scaling the raw curve scales the levels and every ramp delta alike.
    """
    bus_ids = sorted(per_year[years[0]] if per_year else curves)
    durations = np.asarray(slot_durations, dtype=int)
    ns = len(durations)
    levels = np.zeros((len(bus_ids), len(years), ns))
    events: list[list[list[np.ndarray]]] = []
    for b, bus in enumerate(bus_ids):
        per_bus = []
        for y, year in enumerate(years):
            if per_year is not None:
                curve = per_year[year][bus]
            else:
                scale = (1.0 + growth_rate) ** (year - years[0])
                base = curves[bus]
                curve = HourlyCurve(bus, year, base.values * scale)
            lv, ev = discretize(build_duration_curve(curve), durations)
            levels[b, y, :] = lv
            per_bus.append(ev)
        events.append(per_bus)
    return SlottedLoadModel(bus_ids, list(years), durations, levels, events)


@dataclass
class UncertaintyModel:
    """Per-slot deviation bounds for both sets.

    level_halfwidth[b, y, s] >= 0 bounds |level deviation| at a bus; the
    integer level_budget[y, s] caps how many buses may deviate at full
    width simultaneously. ramp_lower <= 0 <= ramp_upper bound the signed
    hourly ramp deviation per bus; the base point (zero deviation) is
    always inside both sets.
    """
    bus_ids: list[str]
    years: list[int]
    level_halfwidth: np.ndarray     # [bus, year, slot]
    level_budget: np.ndarray        # [year, slot], integer
    ramp_lower: np.ndarray          # [bus, year, slot] <= 0
    ramp_upper: np.ndarray          # [bus, year, slot] >= 0

    def __post_init__(self):
        if np.any(self.level_halfwidth < 0):
            raise InputError("level half-widths must be >= 0")
        if np.any(self.level_budget < 0):
            raise InputError("level budgets must be >= 0")
        if not np.issubdtype(np.asarray(self.level_budget).dtype, np.integer):
            raise InputError("level budgets must be integers")
        if np.any(self.ramp_lower > 0) or np.any(self.ramp_upper < 0):
            raise InputError("ramp bounds must satisfy lower <= 0 <= upper")

    @property
    def shape(self):
        return self.level_halfwidth.shape

    def uncertain_buses(self, year_idx: int, slot_idx: int) -> np.ndarray:
        """Indices of buses with a nonzero level half-width in the slot."""
        return np.nonzero(self.level_halfwidth[:, year_idx, slot_idx] > 0)[0]

    def effective_budget(self, year_idx: int, slot_idx: int) -> int:
        n = len(self.uncertain_buses(year_idx, slot_idx))
        return int(min(self.level_budget[year_idx, slot_idx], n))


@dataclass(frozen=True)
class UncertainPoint:
    """One deviation realization over the full (bus, year, slot) grid."""
    kind: str                   # KIND_LEVEL or KIND_RAMP
    epsilon: np.ndarray         # [bus, year, slot], MW

    def __post_init__(self):
        if self.kind not in (KIND_LEVEL, KIND_RAMP):
            raise InputError(f"unknown uncertainty kind {self.kind!r}")
        object.__setattr__(self, "epsilon", np.asarray(self.epsilon, dtype=float))


def build_ldcu(model: SlottedLoadModel, error_fraction: float,
               budgets) -> tuple[np.ndarray, np.ndarray]:
    """Level half-widths as a fraction of each slot level magnitude, plus
    the per-(year, slot) budget (a scalar broadcasts)."""
    if error_fraction < 0:
        raise InputError("error_fraction must be >= 0")
    half = error_fraction * np.abs(model.levels)
    ny, ns = len(model.years), model.num_slots
    b = np.asarray(budgets)
    if b.ndim == 0:
        budget = np.full((ny, ns), int(b), dtype=int)
    else:
        budget = b.astype(int)
        if budget.shape != (ny, ns):
            raise InputError(f"budget shape {budget.shape} != ({ny}, {ns})")
    if np.any(np.asarray(budgets, dtype=float) != budget):
        raise InputError("level budgets must be integral")
    if np.any(budget < 0):
        raise InputError("level budgets must be >= 0")
    return half, budget


def build_hlru(model: SlottedLoadModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot ramp boxes from the pooled events.

    The box always contains 0 (upper clamped up to 0, lower down to 0) so
    the base case stays inside the set; empty slots get [0, 0].
    """
    nb, ny, ns = model.levels.shape
    lower = np.zeros((nb, ny, ns))
    upper = np.zeros((nb, ny, ns))
    for b in range(nb):
        for y in range(ny):
            for s in range(ns):
                ev = model.ramp_events[b][y][s]
                if ev.size:
                    upper[b, y, s] = max(0.0, float(ev.max()))
                    lower[b, y, s] = min(0.0, float(ev.min()))
    return lower, upper


def build_uncertainty(model: SlottedLoadModel, error_fraction: float,
                      budgets) -> UncertaintyModel:
    half, budget = build_ldcu(model, error_fraction, budgets)
    lower, upper = build_hlru(model)
    return UncertaintyModel(list(model.bus_ids), list(model.years),
                            half, budget, lower, upper)


def contains(model: UncertaintyModel, point: UncertainPoint,
             tol: float = 1e-9) -> bool:
    """Membership test with a small numeric slack.

    Buses with a zero half-width must not deviate and contribute nothing
    to the budget sum.
    """
    eps = point.epsilon
    if eps.shape != model.shape:
        raise InputError(f"epsilon shape {eps.shape} != model shape {model.shape}")
    scale = 1.0 + tol
    if point.kind == KIND_LEVEL:
        half = model.level_halfwidth
        if np.any(np.abs(eps) > half * scale + tol):
            return False
        nb, ny, ns = model.shape
        for y in range(ny):
            for s in range(ns):
                ub = model.uncertain_buses(y, s)
                used = 0.0
                if ub.size:
                    used = np.sum(np.abs(eps[ub, y, s]) / half[ub, y, s])
                if used > model.level_budget[y, s] + tol * max(1.0, ub.size):
                    return False
        return True
    lo, hi = model.ramp_lower, model.ramp_upper
    span = np.maximum(1.0, hi - lo)
    return bool(np.all(eps >= lo - tol * span) and np.all(eps <= hi + tol * span))


def enumerate_extreme_points(model: UncertaintyModel, kind: str,
                             year_idx: int, slot_idx: int,
                             cap: int = DEFAULT_ENUMERATION_CAP,
                             ) -> list[UncertainPoint]:
    """All vertices of the chosen set restricted to one (year, slot); the
    rest of the grid stays at zero.

    Level set: every vector with exactly min(budget, #uncertain buses)
    components at +/- their half-width (just the zero point when the
    budget is 0). Ramp set: every corner of the box, branching only on
    buses whose box is not the single point {0} (or a single value).
    Points come out in deterministic lexicographic order.
    """
    nb, ny, ns = model.shape
    points: list[UncertainPoint] = []
    if kind == KIND_LEVEL:
        active = model.uncertain_buses(year_idx, slot_idx)
        r = model.effective_budget(year_idx, slot_idx)
        if r == 0:
            return [UncertainPoint(kind, np.zeros(model.shape))]
        count = math.comb(len(active), r) * 2 ** r
        if count > cap:
            raise EnumerationTooLarge(
                f"{count} level extreme points exceed cap {cap}")
        half = model.level_halfwidth[:, year_idx, slot_idx]
        for support in itertools.combinations(active, r):
            for signs in itertools.product((1.0, -1.0), repeat=r):
                eps = np.zeros(model.shape)
                for b, sg in zip(support, signs):
                    eps[b, year_idx, slot_idx] = sg * half[b]
                points.append(UncertainPoint(kind, eps))
        return points
    if kind == KIND_RAMP:
        lo = model.ramp_lower[:, year_idx, slot_idx]
        hi = model.ramp_upper[:, year_idx, slot_idx]
        branch = np.nonzero(hi > lo)[0]
        count = 2 ** len(branch)
        if count > cap:
            raise EnumerationTooLarge(
                f"{count} ramp box corners exceed cap {cap}")
        for corner in itertools.product((0, 1), repeat=len(branch)):
            eps = np.zeros(model.shape)
            eps[:, year_idx, slot_idx] = lo   # degenerate boxes sit at lo == hi
            for b, c in zip(branch, corner):
                eps[b, year_idx, slot_idx] = hi[b] if c else lo[b]
            points.append(UncertainPoint(kind, eps))
        return points
    raise InputError(f"unknown uncertainty kind {kind!r}")
