import numpy as np
import pytest

from robex.errors import EnumerationTooLarge, InputError
from robex.uncertainty import (HourlyCurve, KIND_LEVEL, KIND_RAMP,
                               SlottedLoadModel, UncertaintyModel,
                               UncertainPoint, build_duration_curve,
                               build_hlru, build_ldcu, build_slotted_model,
                               build_uncertainty, contains, discretize,
                               enumerate_extreme_points,
                               equal_slot_durations, extract_ramp_events)


def curve(values, bus="b", year=1):
    return HourlyCurve(bus, year, np.asarray(values, dtype=float))


# --- ramp events --------------------------------------------------------------


def test_ramp_events_definition():
    events = extract_ramp_events(curve([5, 3, 8, 6]))
    assert [(e.start_level, e.delta) for e in events] == [(5, -2), (3, 5), (8, -2)]


def test_ramp_events_constant_curve():
    events = extract_ramp_events(curve([4, 4, 4]))
    assert [(e.start_level, e.delta) for e in events] == [(4, 0), (4, 0)]


def test_ramp_events_increasing():
    events = extract_ramp_events(curve([1, 2, 3]))
    assert all(e.delta == 1 for e in events)


def test_too_short_curve_rejected():
    with pytest.raises(InputError):
        curve([1])


def test_nonfinite_curve_rejected():
    with pytest.raises(InputError):
        curve([1, np.nan])


# --- duration curve -----------------------------------------------------------


def test_duration_curve_sorting_and_attachment():
    dc = build_duration_curve(curve([5, 3, 8, 6]))
    assert dc.levels.tolist() == [8, 6, 5, 3]
    assert dc.deltas[0] == -2          # the 8 started a -2 ramp
    assert np.isnan(dc.deltas[1])      # final hour carried no event
    assert dc.deltas[2] == -2
    assert dc.deltas[3] == 5


def test_sorted_input_unchanged():
    dc = build_duration_curve(curve([9, 7, 4]))
    assert dc.levels.tolist() == [9, 7, 4]


def test_ties_preserved():
    dc = build_duration_curve(curve([7, 7]))
    assert dc.levels.tolist() == [7, 7]


def test_multiset_preserved_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        vals = rng.uniform(-10, 100, size=int(rng.integers(2, 50)))
        dc = build_duration_curve(curve(vals))
        assert sorted(dc.levels.tolist()) == sorted(vals.tolist())


# --- discretization -----------------------------------------------------------


def test_discretize_worked_example():
    dc = build_duration_curve(curve([5, 3, 8, 6]))
    levels, events = discretize(dc, [2, 2])
    assert levels.tolist() == [7, 4]
    assert sorted(events[0].tolist()) == [-2]
    assert sorted(events[1].tolist()) == [-2, 5]


def test_discretize_single_slot_is_global_mean():
    dc = build_duration_curve(curve([5, 3, 8, 6]))
    levels, _ = discretize(dc, [4])
    assert levels.tolist() == [5.5]


def test_discretize_unit_slots_identity():
    dc = build_duration_curve(curve([5, 3, 8, 6]))
    levels, _ = discretize(dc, [1, 1, 1, 1])
    assert levels.tolist() == [8, 6, 5, 3]


def test_discretize_duration_mismatch():
    dc = build_duration_curve(curve([5, 3, 8, 6]))
    with pytest.raises(InputError):
        discretize(dc, [2, 3])


def test_energy_consistency_random_curves():
    rng = np.random.default_rng(11)
    for _ in range(5):
        vals = rng.uniform(0, 1000, size=100_000)
        c = curve(vals)
        durations = equal_slot_durations(len(vals), int(rng.integers(1, 13)))
        levels, _ = discretize(build_duration_curve(c), durations)
        assert np.dot(levels, durations) == pytest.approx(vals.sum(), rel=1e-9)


def test_slot_levels_non_increasing():
    rng = np.random.default_rng(5)
    vals = rng.uniform(0, 50, size=200)
    loads = build_slotted_model({"b": curve(vals)}, [1],
                                equal_slot_durations(200, 7))
    assert np.all(np.diff(loads.levels[0, 0]) <= 1e-12)


def test_growth_scales_levels_and_ramps():
    vals = [5.0, 3.0, 8.0, 6.0]
    loads = build_slotted_model({"b": curve(vals)}, [1, 2], [2, 2],
                                growth_rate=0.1)
    assert loads.levels[0, 1] == pytest.approx(1.1 * loads.levels[0, 0])
    for s in range(2):
        np.testing.assert_allclose(loads.ramp_events[0][1][s],
                                   1.1 * np.asarray(loads.ramp_events[0][0][s]))


# --- set construction ---------------------------------------------------------


def _loads_one_slot(level=7.0):
    return build_slotted_model({"b": curve([level, level])}, [1], [2])


def test_ldcu_halfwidth_fraction():
    loads = _loads_one_slot(7.0)
    half, budget = build_ldcu(loads, 0.05, np.asarray(1))
    assert half[0, 0, 0] == pytest.approx(0.35)
    assert budget[0, 0] == 1


def test_ldcu_zero_fraction_collapses():
    loads = _loads_one_slot()
    half, _ = build_ldcu(loads, 0.0, np.asarray(1))
    assert np.all(half == 0)


def test_ldcu_negative_fraction_rejected():
    with pytest.raises(InputError):
        build_ldcu(_loads_one_slot(), -0.1, np.asarray(1))


def test_ldcu_fractional_budget_rejected():
    with pytest.raises(InputError):
        build_ldcu(_loads_one_slot(), 0.05, np.asarray(1.5))


def test_hlru_bounds_from_events():
    dc = build_duration_curve(curve([5, 3, 8, 6]))
    levels, events = discretize(dc, [2, 2])
    loads = SlottedLoadModel(["b"], [1], np.array([2, 2]),
                             levels.reshape(1, 1, 2),
                             [[[events[0], events[1]]]])
    lo, hi = build_hlru(loads)
    assert lo[0, 0, 0] == -2 and hi[0, 0, 0] == 0     # only a -2 event
    assert lo[0, 0, 1] == -2 and hi[0, 0, 1] == 5


def test_hlru_empty_slot_gets_zero_box():
    loads = flat = SlottedLoadModel(["b"], [1], np.array([2]),
                                    np.full((1, 1, 1), 4.0),
                                    [[[np.zeros(0)]]])
    lo, hi = build_hlru(loads)
    assert lo[0, 0, 0] == 0 and hi[0, 0, 0] == 0


# --- membership ---------------------------------------------------------------


def _model(halves, budget, lo=None, hi=None):
    halves = np.asarray(halves, dtype=float).reshape(-1, 1, 1)
    nb = halves.shape[0]
    zeros = np.zeros((nb, 1, 1))
    return UncertaintyModel([f"b{i}" for i in range(nb)], [1], halves,
                            np.full((1, 1), budget, dtype=int),
                            np.asarray(lo, dtype=float).reshape(-1, 1, 1)
                            if lo is not None else zeros,
                            np.asarray(hi, dtype=float).reshape(-1, 1, 1)
                            if hi is not None else zeros)


def point(kind, values):
    return UncertainPoint(kind, np.asarray(values, dtype=float).reshape(-1, 1, 1))


def test_budget_zero_contains_only_origin():
    m = _model([10.0, 10.0], budget=0)
    assert contains(m, point(KIND_LEVEL, [0, 0]))
    assert not contains(m, point(KIND_LEVEL, [1, 0]))


def test_full_width_single_bus_within_budget_one():
    m = _model([10.0, 20.0], budget=1)
    assert contains(m, point(KIND_LEVEL, [10, 0]))
    assert not contains(m, point(KIND_LEVEL, [10, 1]))


def test_ramp_above_bound_rejected():
    m = _model([0.0], budget=0, lo=[-5.0], hi=[3.0])
    assert contains(m, point(KIND_RAMP, [3.0]))
    assert not contains(m, point(KIND_RAMP, [3.1]))


def test_dimension_mismatch_raises():
    m = _model([10.0], budget=1)
    with pytest.raises(InputError):
        contains(m, point(KIND_LEVEL, [0, 0]))


def test_zero_halfwidth_requires_zero_component():
    m = _model([0.0, 10.0], budget=2)
    assert not contains(m, point(KIND_LEVEL, [0.5, 0]))


# --- extreme points -----------------------------------------------------------


def test_level_extremes_budget_one():
    m = _model([10.0, 20.0], budget=1)
    pts = enumerate_extreme_points(m, KIND_LEVEL, 0, 0)
    got = sorted(tuple(p.epsilon.ravel()) for p in pts)
    assert got == sorted([(10, 0), (-10, 0), (0, 20), (0, -20)])


def test_level_extremes_budget_two():
    m = _model([10.0, 20.0], budget=2)
    pts = enumerate_extreme_points(m, KIND_LEVEL, 0, 0)
    assert len(pts) == 4
    assert all(abs(p.epsilon[0, 0, 0]) == 10 and abs(p.epsilon[1, 0, 0]) == 20
               for p in pts)


def test_ramp_extremes_are_box_corners():
    m = _model([0, 0], budget=0, lo=[-2.0, -1.0], hi=[3.0, 4.0])
    pts = enumerate_extreme_points(m, KIND_RAMP, 0, 0)
    got = sorted(tuple(p.epsilon.ravel()) for p in pts)
    assert got == sorted([(-2, -1), (-2, 4), (3, -1), (3, 4)])


def test_budget_zero_single_zero_point():
    m = _model([10.0], budget=0)
    pts = enumerate_extreme_points(m, KIND_LEVEL, 0, 0)
    assert len(pts) == 1 and not pts[0].epsilon.any()


def test_every_extreme_point_is_contained():
    rng = np.random.default_rng(9)
    for _ in range(10):
        nb = int(rng.integers(1, 4))
        halves = rng.uniform(0, 5, size=nb)
        halves[rng.uniform(size=nb) < 0.3] = 0.0
        lo = -rng.uniform(0, 3, size=nb)
        hi = rng.uniform(0, 3, size=nb)
        m = _model(halves, budget=int(rng.integers(0, nb + 1)), lo=lo, hi=hi)
        for kind in (KIND_LEVEL, KIND_RAMP):
            for p in enumerate_extreme_points(m, kind, 0, 0):
                assert contains(m, p)


def test_enumeration_cap():
    m = _model([1.0] * 3, budget=3)
    with pytest.raises(EnumerationTooLarge):
        enumerate_extreme_points(m, KIND_LEVEL, 0, 0, cap=7)


def test_linear_worst_case_attained_at_extremes():
    # worst case of random linear functions over the budgeted set matches
    # dense random sampling of the set
    rng = np.random.default_rng(21)
    halves = np.array([4.0, 7.0, 2.0])
    m = _model(halves, budget=2)
    pts = enumerate_extreme_points(m, KIND_LEVEL, 0, 0)
    for _ in range(10):
        c = rng.normal(size=3)
        best_ext = max(float(c @ p.epsilon[:, 0, 0]) for p in pts)
        # dense in-set samples: random signs/magnitudes rescaled to budget
        samples = rng.uniform(-1, 1, size=(4000, 3)) * halves
        scale = np.abs(samples / halves).sum(axis=1)
        samples[scale > 2] *= (2 / scale[scale > 2])[:, None]
        best_samp = float((samples @ c).max())
        assert best_ext >= best_samp - 1e-9


def test_build_uncertainty_shapes():
    loads = build_slotted_model({"a": curve([3, 1, 2, 4]),
                                 "b": curve([1, 2, 3, 4])}, [1, 2], [2, 2],
                                growth_rate=0.0)
    unc = build_uncertainty(loads, 0.1, np.asarray(1))
    assert unc.shape == (2, 2, 2)
    assert np.all(unc.ramp_lower <= 0) and np.all(unc.ramp_upper >= 0)
