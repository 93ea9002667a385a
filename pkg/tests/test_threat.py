import heapq
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_scenario
from cyres.engine import INF, EventKind, derive_seed
from cyres.errors import BadConfig, NotSusceptible, ValidationError
from cyres.fleet import VehicleState
from cyres.runner import run_shadow
from cyres.threat import Threat, seed_infection, shadow_propagation_time
from cyres.world import Mode, World


def test_profile_validation():
    with pytest.raises(BadConfig):
        Threat("x", ((1, 0.5),))
    with pytest.raises(BadConfig):
        Threat("x", ((0, 0.5), (0, 0.4)))
    with pytest.raises(BadConfig):
        Threat("x", ((0, 0.5), (1, 0.6)))
    with pytest.raises(BadConfig):
        Threat("x", ((0, 1.0),))


def test_seed_outside_susceptible_set():
    sc = make_scenario(fleet={"n": 4, "variants": 2},
                       threats=[{"id": "x", "stages": [[0, 0.5]], "susceptible_variants": [0]}])
    world = World(sc)
    with pytest.raises(NotSusceptible):
        seed_infection(world, sc.threats[0], [1], 0.0)


def test_stage_zero_applies_at_seeding():
    sc = make_scenario(threats=[{"id": "x", "stages": [[0, 0.5]]}])
    world = World(sc)
    seed_infection(world, sc.threats[0], [2], 0.0)
    assert world.fleet[2].perf == 0.5
    assert world.fleet[2].state is VehicleState.INFECTED


def test_staged_profile_steps_fleet_performance():
    sc = make_scenario(threats=[{"id": "x", "stages": [[0, 0.6], [2, 0.2]],
                                 "seeding": {"at": 1, "targets": [0]}}],
                       run={"horizon": 6, "dt": 0.5}, monitors={"anomaly_rate": 0})
    trace = World(sc).run()
    assert trace.value_at(0.99) == 1.0
    assert trace.value_at(1.0) == pytest.approx(0.9, abs=1e-15)
    assert trace.value_at(2.99) == pytest.approx(0.9, abs=1e-15)
    assert trace.value_at(3.0) == pytest.approx(0.8, abs=1e-15)


def test_zero_beta_never_schedules_contacts():
    sc = make_scenario(threats=[{"id": "x", "stages": [[0, 0.5]], "beta": 0}], run={"horizon": 20})
    world = World(sc, 3, Mode.SHADOW)
    world.sim.keep_history = True
    world.run()
    contacts = [e for e in world.sim.processed if e.kind is EventKind.INFECTION and e.payload["source"] is not None]
    assert contacts == []
    assert len(world.infections) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**40))
def test_variant_gate_holds_for_any_seed(seed):
    sc = make_scenario(fleet={"n": 10, "variants": 2},
                       threats=[{"id": "x", "stages": [[0, 0.5]], "beta": 5, "susceptible_variants": [0]}],
                       run={"horizon": 10})
    world = World(sc, seed, Mode.SHADOW)
    world.run()
    assert all(world.fleet[r.vehicle].variant == 0 for r in world.infections)


def test_fast_spread_saturates_small_fleet():
    sc = make_scenario(fleet={"n": 3}, threats=[{"id": "x", "stages": [[0, 0.5]], "beta": 20}],
                       run={"horizon": 10})
    for seed in range(100):
        world = World(sc, seed, Mode.SHADOW)
        world.run()
        assert world.fleet.count(VehicleState.INFECTED) == 3, seed


def test_no_spread_means_zero_propagation_time():
    sc = make_scenario(threats=[{"id": "x", "stages": [[0, 0.5]]}])
    assert shadow_propagation_time(sc, 1) == 0.0


def test_nothing_infected_means_infinite_propagation_time():
    assert shadow_propagation_time(make_scenario(), 0) == INF


def test_containment_bound_in_shadow():
    sc = make_scenario(fleet={"n": 16, "variants": 4},
                       threats=[{"id": "x", "stages": [[0, 0.5]], "beta": 10, "susceptible_variants": [2]}],
                       run={"horizon": 10})
    for seed in range(20):
        shadow = run_shadow(sc, seed)
        assert shadow.world.peak_compromised <= 4
        assert all(shadow.world.fleet[r.vehicle].variant == 2 for r in shadow.world.infections)


def _hand_stepped_t_prop(seed: int, n: int, beta: float, horizon: float) -> float:
    """Independent replay of the contact process on a single-variant fleet."""
    rng = random.Random(derive_seed(seed, "propagation"))
    infected = {0}
    seq = 0
    heap = [(rng.expovariate(beta), seq, 0)]
    peak_time, first = 0.0, 0.0
    while heap:
        at, _, src = heapq.heappop(heap)
        if at > horizon:
            break
        target = rng.randrange(n)
        if target not in infected:
            infected.add(target)
            peak_time = at
            seq += 1
            heapq.heappush(heap, (at + rng.expovariate(beta), seq, target))
        seq += 1
        heapq.heappush(heap, (at + rng.expovariate(beta), seq, src))
    return peak_time - first


def test_propagation_time_matches_hand_stepped_chain():
    sc = make_scenario(fleet={"n": 3}, threats=[{"id": "x", "stages": [[0, 0.5]], "beta": 1.0,
                                                 "seeding": {"at": 0, "targets": [0]}}],
                       run={"horizon": 50})
    for seed in (1, 2, 3, 11):
        assert shadow_propagation_time(sc, seed) == _hand_stepped_t_prop(seed, 3, 1.0, 50)


def _adaptation_world(tau, seed):
    sc = make_scenario(fleet={"n": 10}, threats=[{"id": "x", "stages": [[0, 0.5]], "beta": 3,
                                                  "seeding": {"at": 0, "targets": [0]}}],
                       updates={"period": 5, "adaptation_delay": tau},
                       run={"horizon": 9.9})
    world = World(sc, seed, Mode.SHADOW)
    world.run()
    return world


def test_adaptation_window_blocks_new_infections():
    reentered = 0
    for seed in range(20):
        world = _adaptation_world(3, seed)
        times = [r.infected_at for r in world.infections]
        assert not any(5 < t < 8 for t in times)
        assert all(r.bound_generation == 1 for r in world.infections if r.infected_at >= 8)
        reentered += any(t == 8 for t in times)
    assert reentered == 20


def test_infinite_adaptation_delay_disables_threat():
    for seed in range(10):
        world = _adaptation_world("inf", seed)
        assert all(r.infected_at < 5 for r in world.infections)
        assert world.fleet.count(VehicleState.INFECTED) == 0


def test_zero_adaptation_delay_resumes_immediately():
    world = _adaptation_world(0, 4)
    assert any(r.infected_at == 5 and r.bound_generation == 1 for r in world.infections)


def test_seeding_after_horizon_rejected():
    with pytest.raises(ValidationError):
        make_scenario(threats=[{"id": "x", "stages": [[0, 0.5]], "seeding": {"at": 20}}])
