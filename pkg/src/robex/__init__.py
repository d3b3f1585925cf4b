"""Robust coordinated transmission / generation / FACTS expansion planning.

Builds level- and ramp-deviation uncertainty sets from hourly net-load
curves, solves the two-stage robust planning MILP by iterating a master
problem against dualized per-slot worst-case subproblems, certifies plans
by exhaustive extreme-point enumeration, and validates them by Monte Carlo
dispatch simulation.
"""

from .ccg import CcgConfig, CcgReport, run
from .master import (CostBreakdown, CutPoint, MasterOptions, Plan,
                     SystemIndex, build_master, extract_plan)
from .oracle import OracleVerdict, brute_force, certify_plan
from .solver import LinearModel, SolveParams, SolveResult, SolveStatus, solve
from .system import (Bus, Corridor, ExistingGenerator, FactsType,
                     GeneratorType, Horizon, PlanningSystem, validate)
from .uncertainty import (HourlyCurve, KIND_LEVEL, KIND_RAMP, RampEvent,
                          SlottedLoadModel, UncertaintyModel, UncertainPoint,
                          build_duration_curve, build_hlru, build_ldcu,
                          build_slotted_model, build_uncertainty, contains,
                          discretize, enumerate_extreme_points,
                          equal_slot_durations, extract_ramp_events)

__version__ = "0.1.0"
