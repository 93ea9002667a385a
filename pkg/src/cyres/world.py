"""Mutable state of one run and the event dispatch that drives it."""

from __future__ import annotations

import copy
import enum
import math

from . import loop, threat as threat_ops
from .decision_log import DecisionLog, NullLog
from .engine import EventKind, PerformanceTrace, SimEvent, Simulation
from .errors import UntrustedUpdate
from .fleet import build_fleet, fleet_performance
from .loop import Deployment, Incident, KnowledgeBase
from .scenario import Scenario
from .threat import InfectionRecord, ThreatRuntime


class Mode(enum.Enum):
    FULL = "full"          # complete response loop
    SHADOW = "shadow"      # no detection, no response
    PREDICT = "predict"    # only rollouts already in flight or scripted by the planner


class World:
    def __init__(self, scenario: Scenario, seed: int | None = None, mode: Mode = Mode.FULL):
        self.scenario = scenario
        self.mode = mode
        self.seed = scenario.run.seed if seed is None else seed
        self.sim = Simulation(self.seed, scenario.run.dt)
        self.log: DecisionLog = DecisionLog() if mode is Mode.FULL else NullLog()
        self.kb = KnowledgeBase()
        self.incidents: dict[str, Incident] = {}
        self.deployments: list[Deployment] = []
        self.infections: list[InfectionRecord] = []
        prop = self.sim.rng["propagation"]
        fc = scenario.fleet
        self.fleet = build_fleet(fc.n, fc.variants, fc.assignment, prop)
        self.threats: dict[str, ThreatRuntime] = {}
        for t in scenario.threats:
            if t.seeding.targets is not None:
                targets = list(t.seeding.targets)
            else:
                pool = [v.id for v in self.fleet.vehicles if t.susceptible(v.variant)]
                targets = sorted(prop.sample(pool, min(t.seeding.count, len(pool))))
            tau = t.adaptation_delay if t.adaptation_delay is not None else scenario.updates.adaptation_delay
            self.threats[t.id] = ThreatRuntime(t, tau, targets)
            if t.signature_known and t.key not in self.kb:
                self.kb.record(t.key, kappa=scenario.understanding.kappa)
            self.sim.schedule(t.seeding.at, EventKind.INFECTION, threat=t.id, source=None)
        if scenario.updates.period > 0:
            self.sim.schedule(scenario.updates.period, EventKind.PROACTIVE_UPDATE, k=1)
        self.compromised_history: list[tuple[float, int]] = [(0.0, 0)]
        self.peak_compromised = 0

    # --- engine protocol --------------------------------------------------

    def performance(self) -> float:
        return fleet_performance(self.fleet)

    def take_dirty(self) -> bool:
        if not self.fleet.dirty:
            return False
        self.fleet.dirty = False
        count = sum(1 for v in self.fleet.vehicles if v.compromised)
        if count != self.compromised_history[-1][1]:
            self.compromised_history.append((self.sim.now, count))
        self.peak_compromised = max(self.peak_compromised, count)
        return True

    def handle(self, event: SimEvent) -> None:
        kind = event.kind
        full = self.mode is Mode.FULL
        if kind is EventKind.INFECTION:
            if event.payload["source"] is None:
                self._seed(event.payload["threat"])
            else:
                threat_ops.propagation_step(self, event)
        elif kind is EventKind.STAGE_ADVANCE:
            threat_ops.advance_stage(self, event)
        elif kind is EventKind.ATTACKER_ADAPTED:
            if threat_ops.on_attacker_adapted(self, event) and full:
                loop.on_threat_reactivated(self, event.payload["threat"])
        elif kind is EventKind.PROACTIVE_UPDATE:
            try:
                loop.proactive_update_tick(self, self.scenario.updates.period, self.sim.now, event.payload["k"])
            except UntrustedUpdate:
                pass
        elif kind is EventKind.DETECTION_CHECK:
            if full:
                loop.handle_detection(self, event)
        elif kind is EventKind.UNDERSTANDING_DONE:
            if full:
                loop.handle_understanding(self, event)
        elif kind is EventKind.DEPLOY_BATCH:
            if self.mode is not Mode.SHADOW:
                loop.handle_deploy_batch(self, event)
        elif kind is EventKind.WITHDRAW_CHECK:
            if full:
                loop.handle_withdraw_check(self, event)

    def _seed(self, threat_id: str) -> None:
        runtime = self.threats[threat_id]
        threat_ops.check_susceptible(self.fleet, runtime.threat, runtime.seed_targets)
        if self.mode is Mode.FULL:
            incident = loop.open_incident(self, runtime.threat)
            if incident.blocked:
                return
        threat_ops.seed_infection(self, runtime.threat, runtime.seed_targets, self.sim.now)

    # --- helpers ----------------------------------------------------------

    def next_tick(self, t: float, strictly_after: bool = False) -> float:
        k = math.ceil(t / self.sim.dt - 1e-9)
        tick = self.sim.tick_time(k)
        while tick < t or (strictly_after and tick <= t):
            k += 1
            tick = self.sim.tick_time(k)
        return tick

    def clone_for_prediction(self) -> World:
        """Independent copy in PREDICT mode; random streams continue from the current state."""
        memo = {id(self.scenario): self.scenario, id(self.log): NullLog()}
        for frozen in (*self.scenario.threats, *self.scenario.candidates):
            memo[id(frozen)] = frozen
        clone = copy.deepcopy(self, memo)
        clone.mode = Mode.PREDICT
        return clone

    def run(self) -> PerformanceTrace:
        return self.sim.run_until(self.scenario.run.horizon, self)
