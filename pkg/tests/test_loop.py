import random
import statistics

import pytest

from conftest import make_scenario
from cyres.engine import PerformanceTrace
from cyres.errors import NoCandidates, UntrustedUpdate
from cyres.fleet import VehicleState
from cyres.loop import (KnowledgeBase, MonitorConfig, launch_deployment, monitor_and_maybe_withdraw,
                        plan_response, proactive_update_tick, sample_detection, sample_understanding)
from cyres.runner import run_scenario
from cyres.threat import Threat
from cyres.world import World

STAGED = [[0, 0.8], [1, 0.55], [2, 0.3]]


def _threat(**kw):
    return Threat("x", ((0, 0.5),), **kw)


def test_no_monitors_never_detect():
    det = sample_detection(_threat(), MonitorConfig(), 0.0, random.Random(0))
    assert det.kind == "NeverDetected"


def test_certain_pre_event_block():
    sc = make_scenario(threats=[{"id": "x", "stages": STAGED, "signature_known": True, "seeding": {"at": 1}}],
                       monitors={"signature_rate": 1, "pre_event_probability": 1.0})
    result = run_scenario(sc, 0)
    assert set(result.trace.values) == {1.0}
    assert result.report is None
    assert result.log.actions() == ["block_pre_event"]


def test_detection_latency_mean():
    # signature monitoring only sees known signatures; no pre-event block here
    monitors = MonitorConfig(signature_rate=0.5, anomaly_rate=0.5, pre_event_probability=0.0)
    threat = _threat(signature_known=True)
    lat = [sample_detection(threat, monitors, 2.0, random.Random(seed)).at - 2.0 for seed in range(1000)]
    assert statistics.fmean(lat) == pytest.approx(1.0, rel=0.10)


def test_signature_rate_needs_known_signature():
    monitors = MonitorConfig(signature_rate=0.5, anomaly_rate=0.5)
    assert monitors.combined_rate(False) == 0.5
    assert monitors.combined_rate(True) == 1.0


def test_understanding_latency():
    kb = KnowledgeBase()
    t = _threat()
    assert sample_understanding(t, kb, 4.0) == 4.0
    kb.record("x", kappa=0.0)
    assert sample_understanding(t, kb, 4.0) == 0.0
    kb.record("x", kappa=0.25)
    assert sample_understanding(t, kb, 4.0) == 1.0


def test_knowledge_base_is_versioned():
    kb = KnowledgeBase()
    kb.record("s", kappa=0.25)
    kb.record("s", candidate="c1")
    kb.record("s", efficacy=0.7)
    versions = kb.history("s")
    assert [v.version for v in versions] == [0, 1, 2]
    assert versions[0].candidate is None and versions[-1].candidate == "c1"


# --- planning -------------------------------------------------------------

def _planning_world(candidates, beta=3.0):
    sc = make_scenario(
        fleet={"n": 20},
        threats=[{"id": "x", "stages": [[0, 0.3]], "beta": beta, "seeding": {"at": 0, "targets": [0, 1]}}],
        candidates=candidates,
        run={"horizon": 30, "dt": 0.25},
    )
    world = World(sc, 5)
    world.sim.run_until(0.5, world)
    return world


def test_single_candidate_still_predicted():
    world = _planning_world([{"id": "c", "kind": "Contain", "deploy_rate": 10, "containment_level": 0.6}])
    chosen, ranking, predictions = plan_response(world, "x", world.scenario.candidates, 2.0)
    assert chosen.id == "c"
    assert len(predictions["c"]) > 1
    assert world.deployments == []


def test_choice_depends_on_horizon():
    world = _planning_world([
        {"id": "patch", "kind": "FullPatch", "deploy_rate": 20, "prep_delay": 2},
        {"id": "contain", "kind": "Contain", "deploy_rate": 20, "containment_level": 0.6},
    ])
    short, _, _ = plan_response(world, "x", world.scenario.candidates, 1.0)
    long, _, _ = plan_response(world, "x", world.scenario.candidates, 20.0)
    assert short.id == "contain"
    assert long.id == "patch"


def test_equal_scores_prefer_lower_prep_delay():
    world = _planning_world([
        {"id": "a", "kind": "Contain", "deploy_rate": 5, "containment_level": 0.6, "prep_delay": 1},
        {"id": "b", "kind": "Contain", "deploy_rate": 5, "containment_level": 0.6, "prep_delay": 0},
    ], beta=0.0)
    # a horizon shorter than either batch spacing leaves both predictions flat
    chosen, ranking, _ = plan_response(world, "x", world.scenario.candidates, 0.1)
    assert ranking[0][1] == ranking[1][1]
    assert chosen.id == "b"


def test_no_candidates():
    world = _planning_world([])
    with pytest.raises(NoCandidates):
        plan_response(world, "x", [], 1.0)


# --- deployment -----------------------------------------------------------

def _deploy_world(kind="Contain", level=0.6, infected=5, rate=2.0):
    """Five seeded vehicles (or a late seeding when ``infected`` is 0) and no monitors."""
    cand = {"id": "r", "kind": kind, "deploy_rate": rate}
    if kind != "FullPatch":
        cand["containment_level"] = level
    seeding = {"at": 0, "targets": list(range(infected))} if infected else {"at": 9, "targets": [0]}
    sc = make_scenario(fleet={"n": 8}, threats=[{"id": "x", "stages": [[0, 0.3]], "seeding": seeding}],
                       candidates=[cand], run={"horizon": 10, "dt": 0.5})
    return World(sc, 0), sc.candidates[0]


def test_deploy_rate_spacing():
    world, cand = _deploy_world()
    dep = launch_deployment(world, "x", cand, 1.0)
    world.sim.run_until(10, world)
    assert [t for *_, t in dep.treated] == [1.5, 2.0, 2.5, 3.0, 3.5]
    assert dep.complete_at - dep.start == 2.5


def test_empty_target_set_completes_at_start():
    world, cand = _deploy_world(infected=0)
    dep = launch_deployment(world, "x", cand, 1.0)
    world.sim.run_until(10, world)
    assert dep.complete_at == 1.0 and dep.treated == []


def test_partial_patch_sets_exact_level():
    world, cand = _deploy_world(kind="PartialPatch", level=0.6)
    launch_deployment(world, "x", cand, 0.5)
    world.sim.run_until(10, world)
    assert [v.perf for v in world.fleet.vehicles[:5]] == [0.6] * 5
    assert all(v.state is VehicleState.CONTAINED for v in world.fleet.vehicles[:5])


# --- withdrawal -----------------------------------------------------------

def test_matching_prediction_is_kept():
    world, cand = _deploy_world()
    world.sim.run_until(0.5, world)
    dep = launch_deployment(world, "x", cand, 0.5)
    dep.prediction = PerformanceTrace([(0.0, world.performance())])
    assert monitor_and_maybe_withdraw(world, dep, 0.05, 1.0) == "Kept"
    dep.prediction = PerformanceTrace([(0.0, 1.0)])
    assert monitor_and_maybe_withdraw(world, dep, 1.0, 0.0) == "Kept"


def test_silent_failure_is_withdrawn_and_replaced():
    sc = make_scenario(
        fleet={"n": 4},
        threats=[{"id": "x", "stages": [[0, 0.4]], "seeding": {"at": 0, "targets": [0, 1, 2, 3]}}],
        monitors={"fixed_delay": 0.5},
        understanding={"base_delay": 0.5},
        candidates=[
            {"id": "broken", "kind": "Contain", "deploy_rate": 8, "containment_level": 0.9, "silent_failure": True},
            {"id": "backup", "kind": "Contain", "deploy_rate": 8, "containment_level": 0.7},
        ],
        response={"plan_horizon": 5, "epsilon": 0.05, "withdraw_dwell": 1.0},
        run={"horizon": 10, "dt": 0.25},
    )
    result = run_scenario(sc, 0)
    actions = result.log.actions()
    assert "withdraw" in actions and "choose_replacement" in actions
    withdraw = next(e for e in result.log.entries if e.action == "withdraw")
    replacement = next(e for e in result.log.entries if e.action == "choose_replacement")
    assert withdraw.payload["candidate"] == "broken"
    assert replacement.payload["chosen"] == "backup"
    assert withdraw.seq < replacement.seq
    # batches every 0.125 from t=1; monitoring runs on 0.25 ticks, so the
    # shortfall is first seen at 1.25 and the dwell of 1.0 ends at 2.25
    assert withdraw.at == 2.25
    assert result.world.incidents["x"].failed == ["broken"]
    assert result.world.kb.lookup("x").failed == ("broken",)
    assert result.trace.samples[-1][1] == pytest.approx(0.7)


# --- proactive updates ----------------------------------------------------

def test_updates_disabled():
    sc = make_scenario(run={"horizon": 12})
    world = World(sc)
    world.run()
    assert {v.generation for v in world.fleet.vehicles} == {0}


def test_update_ticks():
    sc = make_scenario(updates={"period": 5}, run={"horizon": 12})
    result = run_scenario(sc, 0)
    updates = [e for e in result.log.entries if e.action == "update"]
    assert [e.at for e in updates] == [5.0, 10.0]
    assert {v.generation for v in result.world.fleet.vehicles} == {2}


def test_untrusted_update_refused():
    sc = make_scenario(updates={"period": 5, "trusted": False}, run={"horizon": 12})
    world = World(sc)
    with pytest.raises(UntrustedUpdate):
        proactive_update_tick(world, 5, 5.0)
    assert {v.generation for v in world.fleet.vehicles} == {0}
    assert world.log.actions() == ["update_refused"]
    result = run_scenario(sc, 0)
    assert result.log.actions() == ["update_refused", "update_refused"]
