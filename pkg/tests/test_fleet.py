import random

import pytest
from hypothesis import given, strategies as st

from cyres.errors import BadConfig, InconsistentPerf, UnknownVehicle
from cyres.fleet import VehicleState, build_fleet, fleet_performance, set_vehicle_state


def test_round_robin_layout():
    assert [v.variant for v in build_fleet(6, 3).vehicles] == [0, 1, 2, 0, 1, 2]


def test_single_variant_fleet_is_homogeneous():
    assert {v.variant for v in build_fleet(5, 1).vehicles} == {0}


def test_more_variants_than_vehicles_rejected():
    with pytest.raises(BadConfig):
        build_fleet(4, 5)


def test_seeded_random_needs_rng_and_is_reproducible():
    with pytest.raises(BadConfig):
        build_fleet(6, 2, "seeded_random")
    a = build_fleet(12, 3, "seeded_random", random.Random(1)).variant_assignment
    b = build_fleet(12, 3, "seeded_random", random.Random(1)).variant_assignment
    assert a == b
    assert sorted(a.values()) == [0] * 4 + [1] * 4 + [2] * 4


@given(st.integers(1, 60), st.data())
def test_variant_counts_balanced(n, data):
    v = data.draw(st.integers(1, n))
    fleet = build_fleet(n, v, "seeded_random", random.Random(n))
    counts = [sum(1 for x in fleet.vehicles if x.variant == k) for k in range(v)]
    assert max(counts) - min(counts) <= 1


def test_performance_means():
    fleet = build_fleet(2, 1)
    assert fleet_performance(fleet) == 1.0
    set_vehicle_state(fleet, 1, VehicleState.INFECTED, 0.0, "x")
    assert fleet_performance(fleet) == 0.5
    fleet = build_fleet(4, 1)
    for vid in (2, 3):
        set_vehicle_state(fleet, vid, VehicleState.INFECTED, 0.2, "x")
    assert fleet_performance(fleet) == pytest.approx(0.6, abs=1e-15)


def test_set_state_contract():
    fleet = build_fleet(10, 1)
    set_vehicle_state(fleet, 3, VehicleState.INFECTED, 0.2, "x")
    assert fleet[3].perf == 0.2 and fleet.dirty
    with pytest.raises(InconsistentPerf):
        set_vehicle_state(fleet, 3, VehicleState.HEALTHY, 0.9)
    with pytest.raises(InconsistentPerf):
        set_vehicle_state(fleet, 3, VehicleState.CONTAINED, 1.0, "x")
    with pytest.raises(UnknownVehicle):
        set_vehicle_state(fleet, 99, VehicleState.INFECTED, 0.2, "x")


@given(st.lists(st.floats(0, 0.999), min_size=1, max_size=30))
def test_performance_bounded(levels):
    fleet = build_fleet(len(levels) + 1, 1)
    for i, p in enumerate(levels):
        set_vehicle_state(fleet, i, VehicleState.INFECTED, p, "x")
    assert 0.0 <= fleet_performance(fleet) <= 1.0
