import numpy as np
import pytest

from robex.errors import DualBoundTooTight, PreconditionError
from robex.oracle import brute_force
from robex.subproblems import (OBJ_RECOURSE, OBJ_SLACK, all_slot_contexts,
                               build_slot_lp, dualize_and_solve,
                               run_level_recourse, run_level_slack,
                               run_ramp_slack, slot_context, solve_inner_lp,
                               solve_monolithic, worst_level_recourse)
from robex.uncertainty import KIND_LEVEL, KIND_RAMP, contains

from helpers import (flat_loads, one_bus_system, random_instance, solve_plan,
                     two_bus_system, uniform_uncertainty)


def _two_bus_ctx(line_capacity=60.0, half=20.0, budget=1):
    sysm = two_bus_system(line_capacity=line_capacity)
    loads = flat_loads({"b2": 50.0}, durations=(4,))
    unc = uniform_uncertainty(loads, {"b2": half}, budget)
    plan, _, idx = solve_plan(sysm, loads)
    return slot_context(idx, plan, unc, 0, 0), unc


def _one_bus_ctx(recourse_budget=1500.0, half=2.0, ramp_lo=-30.0, ramp_hi=15.0):
    sysm = one_bus_system(p_max=100.0, ramp_up=10.0, ramp_down=40.0,
                          marginal=10.0, recourse_budget=recourse_budget)
    loads = flat_loads({"b1": 50.0}, durations=(100,))
    unc = uniform_uncertainty(loads, {"b1": half}, 1,
                              ramp_lo={"b1": ramp_lo}, ramp_hi={"b1": ramp_hi})
    plan, _, idx = solve_plan(sysm, loads)
    return slot_context(idx, plan, unc, 0, 0), idx, plan, unc


# --- level slack ----------------------------------------------------------------


def test_level_slack_line_limited():
    # +20 MW at the load bus needs 70 MW of import over a 60 MW line
    ctx, _ = _two_bus_ctx(line_capacity=60.0)
    val, point = dualize_and_solve(ctx, KIND_LEVEL, OBJ_SLACK)
    assert val == pytest.approx(10.0, abs=1e-6)
    assert point.epsilon[0, 0, 0] == pytest.approx(20.0)


def test_level_slack_vanishes_with_larger_line():
    ctx, _ = _two_bus_ctx(line_capacity=80.0)
    val, _ = dualize_and_solve(ctx, KIND_LEVEL, OBJ_SLACK)
    assert val == pytest.approx(0.0, abs=1e-9)


def test_level_slack_budget_zero():
    ctx, _ = _two_bus_ctx(line_capacity=60.0, budget=0)
    val, point = dualize_and_solve(ctx, KIND_LEVEL, OBJ_SLACK)
    assert val == pytest.approx(0.0, abs=1e-9)
    assert not point.epsilon.any()


def test_level_slack_matches_enumeration():
    ctx, _ = _two_bus_ctx()
    verdict = brute_force(ctx, KIND_LEVEL, OBJ_SLACK)
    val, _ = dualize_and_solve(ctx, KIND_LEVEL, OBJ_SLACK)
    assert val == pytest.approx(verdict.violation, abs=1e-6)
    assert verdict.points_enumerated == 2


# --- recourse cost ----------------------------------------------------------------


def test_recourse_worst_delta():
    # 10 /MWh marginal, 100 h slot, 2 MW worst increase: 2000 re-dispatch cost
    ctx, idx, plan, unc = _one_bus_ctx()
    val, point = worst_level_recourse(ctx)
    assert val == pytest.approx(2000.0, abs=1e-5)
    assert point.epsilon[0, 0, 0] == pytest.approx(2.0)


def test_recourse_aggregation_subtracts_allowance():
    ctx, idx, plan, unc = _one_bus_ctx(recourse_budget=1500.0)
    verdict = run_level_recourse([ctx], 1500.0)
    assert verdict.violation == pytest.approx(500.0, abs=1e-5)


def test_recourse_vacuous_when_unlimited():
    ctx, idx, plan, unc = _one_bus_ctx(recourse_budget=float("inf"))
    verdict = run_level_recourse([ctx], float("inf"))
    assert verdict.violation == 0.0
    assert verdict.per_slot == {}


def test_recourse_zero_halfwidths():
    ctx, idx, plan, unc = _one_bus_ctx(half=0.0)
    val, _ = worst_level_recourse(ctx)
    assert val == pytest.approx(0.0, abs=1e-9)


def test_recourse_two_slots_add():
    # two identical 100 h slots, worst 2000 each, allowance 3000: excess 1000
    sysm = one_bus_system(p_max=100.0, marginal=10.0, recourse_budget=3000.0)
    loads = flat_loads({"b1": 50.0}, durations=(100, 100))
    unc = uniform_uncertainty(loads, {"b1": 2.0}, 1)
    plan, _, idx = solve_plan(sysm, loads)
    ctxs = all_slot_contexts(idx, plan, unc)
    verdict = run_level_recourse(ctxs, 3000.0)
    assert verdict.violation == pytest.approx(1000.0, abs=1e-5)
    assert contains(unc, verdict.worst_point)


def test_recourse_requires_slack_pass():
    ctx, _ = _two_bus_ctx(line_capacity=60.0)
    slack = run_level_slack([ctx])
    with pytest.raises(PreconditionError):
        run_level_recourse([ctx], 100.0, slack_verdict=slack)


def test_recourse_matches_enumeration():
    ctx, *_ = _one_bus_ctx()
    verdict = brute_force(ctx, KIND_LEVEL, OBJ_RECOURSE)
    val, _ = worst_level_recourse(ctx)
    assert val == pytest.approx(verdict.violation, abs=1e-6)


# --- ramp slack ----------------------------------------------------------------


def test_ramp_slack_limited_by_ramp_rate():
    # +15 MW swing against a 10 MW/h ramp-up: 5 MW unabsorbable
    ctx, *_ = _one_bus_ctx()
    val, point = dualize_and_solve(ctx, KIND_RAMP, OBJ_SLACK)
    assert val == pytest.approx(5.0, abs=1e-6)
    assert point.epsilon[0, 0, 0] == pytest.approx(15.0)


def test_ramp_slack_zero_box():
    ctx, *_ = _one_bus_ctx(ramp_lo=0.0, ramp_hi=0.0)
    val, _ = dualize_and_solve(ctx, KIND_RAMP, OBJ_SLACK)
    assert val == pytest.approx(0.0, abs=1e-9)


def test_ramp_slack_ample_headroom():
    ctx, *_ = _one_bus_ctx(ramp_lo=-8.0, ramp_hi=9.0)
    # ramp_up 10 >= 9 and ramp_down 40 >= 8, capacity ample
    val, _ = dualize_and_solve(ctx, KIND_RAMP, OBJ_SLACK)
    assert val == pytest.approx(0.0, abs=1e-9)
    verdict = brute_force(ctx, KIND_RAMP, OBJ_SLACK)
    assert verdict.violation == pytest.approx(0.0, abs=1e-9)


def test_ramp_slack_matches_enumeration():
    ctx, *_ = _one_bus_ctx()
    verdict = brute_force(ctx, KIND_RAMP, OBJ_SLACK)
    val, _ = dualize_and_solve(ctx, KIND_RAMP, OBJ_SLACK)
    assert val == pytest.approx(verdict.violation, abs=1e-6)
    assert verdict.points_enumerated == 2


# --- aggregation ----------------------------------------------------------------


def test_max_aggregation_keeps_binding_slot_only():
    sysm = two_bus_system(line_capacity=60.0, num_years=1)
    loads = flat_loads({"b2": 50.0}, durations=(2, 2))
    loads.levels[0, 0, 1] = 30.0    # second slot has headroom
    unc = uniform_uncertainty(loads, {"b2": 20.0}, 1)
    plan, _, idx = solve_plan(sysm, loads)
    ctxs = all_slot_contexts(idx, plan, unc)
    verdict = run_level_slack(ctxs)
    assert verdict.violation == pytest.approx(10.0, abs=1e-6)
    assert verdict.per_slot[(0, 0)] == pytest.approx(10.0, abs=1e-6)
    assert verdict.per_slot[(0, 1)] == pytest.approx(0.0, abs=1e-9)
    # returned deviation only touches the binding slot
    assert verdict.worst_point.epsilon[0, 0, 0] != 0.0
    assert verdict.worst_point.epsilon[0, 0, 1] == 0.0


def test_combined_point_superposes_violating_slots():
    sysm = two_bus_system(line_capacity=60.0)
    loads = flat_loads({"b2": 50.0}, durations=(2, 2))
    unc = uniform_uncertainty(loads, {"b2": 20.0}, 1)
    plan, _, idx = solve_plan(sysm, loads)
    verdict = run_level_slack(all_slot_contexts(idx, plan, unc))
    combined = verdict.combined_point(1e-3)
    assert combined.epsilon[0, 0, 0] == pytest.approx(20.0)
    assert combined.epsilon[0, 0, 1] == pytest.approx(20.0)


def test_all_verdict_points_in_set():
    ctx, unc = _two_bus_ctx()
    verdict = run_level_slack([ctx])
    assert contains(unc, verdict.worst_point)
    verdict = run_ramp_slack([ctx])
    assert contains(unc, verdict.worst_point)


# --- dual reformulation properties ----------------------------------------------


def test_budget_forms_agree():
    rng = np.random.default_rng(17)
    for i in range(8):
        system, loads, unc, plan, idx = random_instance(
            rng, "covered" if i % 2 else "tight")
        for ctx in all_slot_contexts(idx, plan, unc):
            exact, _ = dualize_and_solve(ctx, KIND_LEVEL, OBJ_SLACK,
                                         budget_form="exact")
            atmost, _ = dualize_and_solve(ctx, KIND_LEVEL, OBJ_SLACK,
                                          budget_form="atmost")
            assert exact == pytest.approx(atmost, abs=1e-6)


def test_monotone_in_set_size():
    # enlarging any bound never decreases the violation
    base_ctx, _ = _two_bus_ctx(line_capacity=60.0, half=10.0)
    base_val, _ = dualize_and_solve(base_ctx, KIND_LEVEL, OBJ_SLACK)
    grown_ctx, _ = _two_bus_ctx(line_capacity=60.0, half=25.0)
    grown_val, _ = dualize_and_solve(grown_ctx, KIND_LEVEL, OBJ_SLACK)
    assert grown_val >= base_val - 1e-9


def test_parallel_slot_solving_matches_serial():
    sysm = two_bus_system(line_capacity=60.0)
    loads = flat_loads({"b2": 50.0}, durations=(1, 1, 1, 1))
    unc = uniform_uncertainty(loads, {"b2": 20.0}, 1)
    plan, _, idx = solve_plan(sysm, loads)
    ctxs = all_slot_contexts(idx, plan, unc)
    serial = run_level_slack(ctxs, workers=1)
    parallel = run_level_slack(ctxs, workers=4)
    assert serial.violation == pytest.approx(parallel.violation, abs=1e-12)
    assert serial.per_slot == parallel.per_slot


def test_dual_bound_certificate_fires_when_too_small():
    ctx, *_ = _one_bus_ctx()
    with pytest.raises(DualBoundTooTight):
        dualize_and_solve(ctx, KIND_LEVEL, OBJ_RECOURSE, dual_bound=1.0)


def test_monolithic_equals_slot_sum():
    rng = np.random.default_rng(23)
    for i in range(4):
        system, loads, unc, plan, idx = random_instance(
            rng, "tight" if i % 2 else "covered")
        ctxs = all_slot_contexts(idx, plan, unc)
        for kind in (KIND_LEVEL, KIND_RAMP):
            mono = solve_monolithic(ctxs, kind, OBJ_SLACK)
            per = sum(max(0.0, dualize_and_solve(c, kind, OBJ_SLACK)[0])
                      for c in ctxs)
            assert mono == pytest.approx(per, abs=1e-6)


def test_inner_lp_reports_infeasible_as_inf():
    # no-slack LP with a deviation beyond deliverable capacity
    ctx, _ = _two_bus_ctx(line_capacity=60.0)
    slot_lp = build_slot_lp(ctx, OBJ_RECOURSE)
    assert solve_inner_lp(slot_lp, np.array([20.0])) == np.inf
    assert solve_inner_lp(slot_lp, np.array([5.0])) < np.inf
