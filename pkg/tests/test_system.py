import dataclasses
import warnings

import numpy as np
import pytest

from robex.master import build_master
from robex.solver import solve
from robex.system import (Bus, Corridor, ExistingGenerator, Horizon,
                          PlanningSystem, validate)

from helpers import flat_loads, two_bus_system


def test_well_formed_two_bus_passes():
    assert validate(two_bus_system()) == []


def test_min_lines_above_max_lines_reported():
    sysm = two_bus_system()
    bad = dataclasses.replace(sysm.corridors[0], min_lines=2, max_lines=1)
    sysm = dataclasses.replace(sysm, corridors=(bad,))
    report = validate(sysm)
    assert any("min_lines > max_lines" in v for v in report)
    assert any("b1-b2" in v for v in report)


def test_unresolved_facts_candidate_reported():
    sysm = dataclasses.replace(two_bus_system(),
                               candidate_facts_corridors=("nope",))
    report = validate(sysm)
    assert any("unresolved" in v and "nope" in v for v in report)


def test_duplicate_bus_id_reported():
    sysm = two_bus_system()
    sysm = dataclasses.replace(sysm, buses=sysm.buses + (Bus("b1"),))
    assert any("duplicate" in v for v in validate(sysm))


def test_negative_reactance_and_capacity_reported():
    sysm = two_bus_system()
    bad = dataclasses.replace(sysm.corridors[0], reactance=-0.1,
                              line_capacity=0.0)
    report = validate(dataclasses.replace(sysm, corridors=(bad,)))
    assert any("reactance" in v for v in report)
    assert any("line_capacity" in v for v in report)


def test_validate_is_pure():
    sysm = two_bus_system()
    assert validate(sysm) == validate(sysm)


def test_disconnected_load_bus_warns_but_passes():
    sysm = PlanningSystem(
        buses=(Bus("a", True), Bus("b", True)),
        corridors=(Corridor("a-b", "a", "b", 0.3, 50.0, 0, 1, 5.0),),
        existing_generators=(ExistingGenerator("g", "a", 0, 100, 5, 5, 0, 1.0),),
        generator_types=(), facts_types=(),
        candidate_gen_buses=(), candidate_line_corridors=("a-b",),
        candidate_facts_corridors=(),
        horizon=Horizon(num_years=1))
    with pytest.warns(UserWarning, match="not connected"):
        assert validate(sysm) == []


def test_horizon_discount():
    h = Horizon(base_year=1, num_years=5, discount_rate=0.1, line_lead_years=1)
    # in-service year 3, paid one year earlier: one discounting period
    assert h.discount(3, lead=1) == pytest.approx(1 / 1.1)
    assert h.discount(1, lead=0) == 1.0


def test_validated_system_builds_without_index_errors():
    # fuzz: random perturbations that keep invariants must never crash
    # model construction downstream
    rng = np.random.default_rng(7)
    for _ in range(10):
        cap = float(rng.uniform(20, 120))
        ramp = float(rng.uniform(1, 50))
        sysm = two_bus_system(line_capacity=cap, ramp=ramp)
        assert validate(sysm) == []
        loads = flat_loads({"b2": float(rng.uniform(5, 90))},
                           durations=(int(rng.integers(1, 200)),))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, mv = build_master(sysm, loads)
            solve(model)
