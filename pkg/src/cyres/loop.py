"""The operational response loop.

Monitoring raises a detection, diagnostics works out the cause (faster on a
knowledge-base hit), candidate responses are each played forward on a
cloned world, the best one is rolled out at a bounded rate, and the
rollout is watched against its prediction and withdrawn if it falls short.
Periodic proactive updates run alongside. Every action lands in the
decision log.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .engine import INF, EventKind, PerformanceTrace, SimEvent
from .errors import BadConfig, NoCandidates, UntrustedUpdate
from .fleet import VehicleState, fleet_performance, set_vehicle_state
from .metrics import IncidentTimeline, resilience_integral
from .threat import Threat, on_generation_change, schedule_contact, schedule_stage

if TYPE_CHECKING:
    from .world import World


# --- configuration --------------------------------------------------------

@dataclass(frozen=True)
class MonitorConfig:
    signature_rate: float = 0.0
    anomaly_rate: float = 0.0
    specification_rate: float = 0.0
    pre_event_probability: float = 0.5
    # scripted monitor: detect exactly this long after seeding
    fixed_delay: float | None = None

    def __post_init__(self) -> None:
        if min(self.signature_rate, self.anomaly_rate, self.specification_rate) < 0:
            raise BadConfig("detection rates must be >= 0")
        if not 0.0 <= self.pre_event_probability <= 1.0:
            raise BadConfig("pre_event_probability must be in [0, 1]")
        if self.fixed_delay is not None and self.fixed_delay < 0:
            raise BadConfig("fixed_delay must be >= 0")

    def combined_rate(self, signature_known: bool) -> float:
        return self.signature_rate * signature_known + self.anomaly_rate + self.specification_rate


class CandidateKind(enum.Enum):
    CONTAIN = "Contain"
    PARTIAL_PATCH = "PartialPatch"
    FULL_PATCH = "FullPatch"


@dataclass(frozen=True)
class ResponseCandidate:
    id: str
    kind: CandidateKind
    deploy_rate: float
    containment_level: float = 1.0
    prep_delay: float = 0.0
    urgency: str = "planned"
    # fault injection: rollout reports success but changes nothing
    silent_failure: bool = False

    def __post_init__(self) -> None:
        if self.deploy_rate <= 0:
            raise BadConfig(f"candidate {self.id}: deploy_rate must be > 0")
        if self.prep_delay < 0:
            raise BadConfig(f"candidate {self.id}: prep_delay must be >= 0")
        if self.kind is CandidateKind.FULL_PATCH:
            if self.containment_level != 1.0:
                raise BadConfig(f"candidate {self.id}: FullPatch implies containment_level 1.0")
        elif not 0.0 <= self.containment_level < 1.0:
            raise BadConfig(f"candidate {self.id}: containment_level must lie in [0, 1)")

    @property
    def treated_perf(self) -> float:
        return 1.0 if self.kind is CandidateKind.FULL_PATCH else self.containment_level


@dataclass(frozen=True)
class UnderstandingConfig:
    base_delay: float = 1.0
    kappa: float = 0.25
    # delay = base_delay * U(1 - jitter, 1 + jitter)
    jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.base_delay < 0:
            raise BadConfig("base_delay must be >= 0")
        if not 0.0 <= self.kappa <= 1.0:
            raise BadConfig("kappa must be in [0, 1]")
        if not 0.0 <= self.jitter <= 1.0:
            raise BadConfig("jitter must be in [0, 1]")


@dataclass(frozen=True)
class ResponseConfig:
    plan_horizon: float = 10.0
    epsilon: float = 0.05
    withdraw_dwell: float = 1.0

    def __post_init__(self) -> None:
        if self.plan_horizon <= 0:
            raise BadConfig("plan_horizon must be > 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise BadConfig("epsilon must be in [0, 1]")
        if self.withdraw_dwell <= 0:
            raise BadConfig("withdraw_dwell must be > 0")


@dataclass(frozen=True)
class UpdateConfig:
    period: float = 0.0
    trusted: bool = True
    adaptation_delay: float = INF

    def __post_init__(self) -> None:
        if self.period < 0:
            raise BadConfig("update period must be >= 0")
        if self.adaptation_delay < 0:
            raise BadConfig("adaptation_delay must be >= 0")


# --- knowledge base -------------------------------------------------------

@dataclass(frozen=True)
class KnowledgeEntry:
    signature: str
    version: int
    kappa: float
    candidate: str | None = None
    efficacy: float | None = None
    failed: tuple[str, ...] = ()


class KnowledgeBase:
    """Central store of known threats; every change appends a new version."""

    def __init__(self) -> None:
        self._versions: dict[str, list[KnowledgeEntry]] = {}

    def __contains__(self, signature: str) -> bool:
        return signature in self._versions

    def lookup(self, signature: str) -> KnowledgeEntry | None:
        versions = self._versions.get(signature)
        return versions[-1] if versions else None

    def history(self, signature: str) -> tuple[KnowledgeEntry, ...]:
        return tuple(self._versions.get(signature, ()))

    def record(self, signature: str, kappa: float | None = None, **changes) -> KnowledgeEntry:
        current = self.lookup(signature)
        if current is None:
            if kappa is None:
                raise ValueError("a new knowledge entry needs kappa")
            entry = KnowledgeEntry(signature, 0, kappa, **changes)
        else:
            fields = {**current.__dict__, **changes, "version": current.version + 1}
            if kappa is not None:
                fields["kappa"] = kappa
            entry = KnowledgeEntry(**fields)
        if not 0.0 <= entry.kappa <= 1.0:
            raise ValueError("kappa must be in [0, 1]")
        self._versions.setdefault(signature, []).append(entry)
        return entry


# --- run-time records -----------------------------------------------------

@dataclass(frozen=True)
class Detection:
    kind: str  # BlockedPreEvent | DetectedAt | NeverDetected
    at: float | None = None


@dataclass
class Deployment:
    id: int
    threat: str
    candidate: ResponseCandidate
    start: float
    role: str = "initial"
    prediction: PerformanceTrace | None = None
    monitor_until: float = -INF
    started: bool = False
    active: bool = False
    monitoring: bool = False
    withdrawn: bool = False
    complete_at: float | None = None
    # (vehicle, stage, infected_at, epoch after treatment, treated at)
    treated: list[tuple[int, int, float, int, float]] = field(default_factory=list)
    treated_keys: set[tuple[int, int]] = field(default_factory=set)
    breach_start: float | None = None
    last_batch: float | None = None


@dataclass
class Incident:
    threat: str
    signature: str
    timeline: IncidentTimeline = field(default_factory=IncidentTimeline)
    blocked: bool = False
    detection: Detection | None = None
    detection_deferred: bool = False
    kb_hit: bool = False
    understanding_latency: float | None = None
    ranking: list[tuple[str, float]] = field(default_factory=list)
    predictions: dict[str, PerformanceTrace] = field(default_factory=dict)
    chosen: str | None = None
    failed: list[str] = field(default_factory=list)
    deployments: list[int] = field(default_factory=list)


# --- detection and understanding -----------------------------------------

def sample_detection(threat: Threat, monitors: MonitorConfig, seeded_at: float, rng: random.Random) -> Detection:
    if threat.signature_known and rng.random() < monitors.pre_event_probability:
        return Detection("BlockedPreEvent", seeded_at)
    if monitors.fixed_delay is not None:
        return Detection("DetectedAt", seeded_at + monitors.fixed_delay)
    rate = monitors.combined_rate(threat.signature_known)
    if rate <= 0:
        return Detection("NeverDetected")
    return Detection("DetectedAt", seeded_at + rng.expovariate(rate))


def sample_understanding(threat: Threat, kb: KnowledgeBase, base_delay: float) -> float:
    """Understanding latency: ``base_delay`` scaled by kappa on a knowledge-base hit."""
    if base_delay < 0:
        raise ValueError("base_delay must be >= 0")
    entry = kb.lookup(threat.key)
    return base_delay * entry.kappa if entry is not None else base_delay


def draw_base_delay(world: World, threat: Threat) -> float:
    # forked per signature: a threat's intrinsic difficulty is fixed for a seed
    cfg = world.scenario.understanding
    u = world.sim.rng.fork("understanding", threat.key).random()
    return cfg.base_delay * (1.0 + cfg.jitter * (2.0 * u - 1.0))


def open_incident(world: World, threat: Threat) -> Incident:
    """Called at seeding time in full mode. May block the threat pre-event."""
    incident = Incident(threat.id, threat.key)
    world.incidents[threat.id] = incident
    det = sample_detection(threat, world.scenario.monitors, world.sim.now, world.sim.rng["detection"])
    incident.detection = det
    if det.kind == "BlockedPreEvent":
        incident.blocked = True
        world.log.append(world.sim.now, "Monitor", "block_pre_event",
                         {"threat": threat.id, "signature": threat.key})
        return incident
    incident.timeline.t_start = world.sim.now
    if det.kind == "DetectedAt":
        world.sim.schedule(det.at, EventKind.DETECTION_CHECK, threat=threat.id)
    return incident


def active_count(world: World, threat_id: str) -> int:
    return sum(1 for v in world.fleet.vehicles if v.compromised and v.threat == threat_id)


def handle_detection(world: World, event: SimEvent) -> None:
    incident = world.incidents[event.payload["threat"]]
    if incident.timeline.t_detect is not None:
        return
    threat = world.threats[incident.threat].threat
    if active_count(world, threat.id) == 0:
        # hazard only runs while something is infected; resume on re-entry
        incident.detection_deferred = True
        return
    now = world.sim.now
    incident.timeline.t_detect = now
    incident.kb_hit = threat.key in world.kb
    latency = sample_understanding(threat, world.kb, draw_base_delay(world, threat))
    incident.understanding_latency = latency
    world.log.append(now, "Monitor", "detect", {
        "threat": threat.id,
        "signature": threat.key,
        "infected": active_count(world, threat.id),
        "kb_hit": incident.kb_hit,
    })
    world.sim.schedule(now + latency, EventKind.UNDERSTANDING_DONE, threat=threat.id)


def on_threat_reactivated(world: World, threat_id: str) -> None:
    """Resume a detection that was deferred while the threat had no foothold."""
    incident = world.incidents.get(threat_id)
    if incident is None or not incident.detection_deferred:
        return
    incident.detection_deferred = False
    threat = world.threats[threat_id].threat
    monitors = world.scenario.monitors
    now = world.sim.now
    if monitors.fixed_delay is not None:
        at = now + monitors.fixed_delay
    else:
        at = now + world.sim.rng.exponential("detection", monitors.combined_rate(threat.signature_known))
    if math.isfinite(at):
        world.sim.schedule(at, EventKind.DETECTION_CHECK, threat=threat_id)


# --- planning -------------------------------------------------------------

def predict(world: World, threat_id: str, candidate: ResponseCandidate, start: float,
            horizon: float) -> PerformanceTrace:
    """Forward-simulate ``candidate`` on a clone of ``world`` for ``horizon`` time units."""
    clone = world.clone_for_prediction()
    launch_deployment(clone, threat_id, candidate, start, role="predicted")
    return clone.sim.run_until(clone.sim.now + horizon, clone)


def plan_response(world: World, threat_id: str, candidates: Sequence[ResponseCandidate],
                  horizon: float, earliest: float | None = None):
    """Rank candidates by predicted normalized resilience over ``horizon``.

    Returns ``(chosen, ranking, predictions)`` where ``ranking`` lists
    ``(candidate id, predicted score)`` best first. Ties go to the lower
    prep delay, then the lexicographically smaller id.
    """
    if not candidates:
        raise NoCandidates("no response candidates configured")
    now = world.sim.now
    base = now if earliest is None else earliest
    scored = []
    predictions = {}
    for cand in candidates:
        start = max(now, base + cand.prep_delay)
        trace = predict(world, threat_id, cand, start, horizon)
        predictions[cand.id] = trace
        _, score = resilience_integral(trace, now, now + horizon)
        scored.append((cand, score))
    scored.sort(key=lambda cs: (-cs[1], cs[0].prep_delay, cs[0].id))
    ranking = [(c.id, s) for c, s in scored]
    return scored[0][0], ranking, predictions


def handle_understanding(world: World, event: SimEvent) -> None:
    incident = world.incidents[event.payload["threat"]]
    threat = world.threats[incident.threat].threat
    now = world.sim.now
    incident.timeline.t_understand = now
    world.log.append(now, "Diagnostics", "understand", {
        "threat": threat.id,
        "latency": incident.understanding_latency,
        "kb_hit": incident.kb_hit,
    })
    candidates = world.scenario.candidates
    cfg = world.scenario.response
    try:
        chosen, ranking, predictions = plan_response(world, threat.id, candidates, cfg.plan_horizon)
    except NoCandidates:
        world.log.append(now, "Diagnostics", "no_candidates", {"threat": threat.id})
        world.kb.record(threat.key, kappa=world.scenario.understanding.kappa)
        return
    incident.ranking = ranking
    incident.predictions = predictions
    incident.chosen = chosen.id
    world.log.append(now, "Diagnostics", "choose", {
        "threat": threat.id,
        "chosen": chosen.id,
        "urgency": chosen.urgency,
        "ranking": [[cid, score] for cid, score in ranking],
    })
    world.kb.record(threat.key, kappa=world.scenario.understanding.kappa, candidate=chosen.id)
    dep = launch_deployment(world, threat.id, chosen, now + chosen.prep_delay)
    dep.prediction = predictions[chosen.id]
    dep.monitor_until = now + cfg.plan_horizon
    if chosen.kind is not CandidateKind.FULL_PATCH:
        fixes = [c for c in candidates if c.kind is CandidateKind.FULL_PATCH]
        if fixes:
            fix = min(fixes, key=lambda c: (c.prep_delay, c.id))
            launch_deployment(world, threat.id, fix, now + fix.prep_delay, role="followup")


# --- deployment -----------------------------------------------------------

def launch_deployment(world: World, threat_id: str, candidate: ResponseCandidate, start: float,
                      role: str = "initial") -> Deployment:
    dep = Deployment(len(world.deployments), threat_id, candidate, max(start, world.sim.now), role)
    world.deployments.append(dep)
    incident = world.incidents.get(threat_id)
    if incident is not None and role != "predicted":
        incident.deployments.append(dep.id)
    world.sim.schedule(dep.start, EventKind.DEPLOY_BATCH, deployment=dep.id, k=0)
    return dep


def _targets(world: World, dep: Deployment) -> list[int]:
    want = (VehicleState.INFECTED, VehicleState.CONTAINED) if dep.candidate.kind is CandidateKind.FULL_PATCH \
        else (VehicleState.INFECTED,)
    return [v.id for v in world.fleet.vehicles
            if v.state in want and v.threat == dep.threat and v.treated_by != dep.id
            and (v.id, v.epoch) not in dep.treated_keys]


def _treat(world: World, dep: Deployment, vid: int) -> None:
    v = world.fleet[vid]
    snapshot_stage, snapshot_infected_at = v.stage, v.infected_at
    # a silent failure is invisible to the planner's rollouts
    works = not dep.candidate.silent_failure or world.mode.value == "predict"
    if works:
        cand = dep.candidate
        if cand.kind is CandidateKind.FULL_PATCH:
            set_vehicle_state(world.fleet, vid, VehicleState.PATCHED, 1.0, dep.threat)
        else:
            set_vehicle_state(world.fleet, vid, VehicleState.CONTAINED, cand.containment_level, dep.threat,
                              snapshot_stage)
        v.epoch += 1
        v.treated_by = dep.id
        if v.paused_at is None:
            v.paused_at = world.sim.now
    dep.treated.append((vid, snapshot_stage, snapshot_infected_at, v.epoch, world.sim.now))
    dep.treated_keys.add((vid, v.epoch))


def deploy_step(world: World, dep: Deployment, k: int) -> None:
    """Batch ``k`` of a rollout; batch 0 marks the start.

    Batches fall at ``start + k / rate``. Each treats the accumulated
    allowance ``floor(rate * elapsed)`` minus what was already treated, so
    fractional progress carries between batches.
    """
    now = world.sim.now
    cand = dep.candidate
    incident = world.incidents.get(dep.threat)
    timeline = incident.timeline if incident is not None and dep.role != "predicted" else None
    if k == 0:
        for other in world.deployments:
            # a permanent fix supersedes a still-running interim measure
            if (cand.kind is CandidateKind.FULL_PATCH and other.threat == dep.threat and other.active
                    and other.candidate.kind is not CandidateKind.FULL_PATCH):
                other.active = False
                other.monitoring = False
        dep.started = dep.active = True
        if timeline is not None and timeline.t_deploy_start is None:
            timeline.t_deploy_start = now
        world.log.append(now, "Deployer", "deploy_start",
                         {"deployment": dep.id, "candidate": cand.id, "role": dep.role})
        if dep.prediction is not None:
            dep.monitoring = True
            world.sim.schedule(world.next_tick(now), EventKind.WITHDRAW_CHECK, deployment=dep.id)
    elif not dep.active:
        return
    targets = _targets(world, dep)
    if k > 0 and targets:
        due = math.floor(cand.deploy_rate * (now - dep.start) + 1e-9) - len(dep.treated)
        batch = targets[:max(due, 0)]
        for vid in batch:
            _treat(world, dep, vid)
        dep.last_batch = now
        world.log.append(now, "Deployer", "deploy_batch",
                         {"deployment": dep.id, "batch": k, "treated": batch})
        targets = _targets(world, dep)
    if not targets:
        _complete(world, dep, timeline)
        return
    world.sim.schedule(dep.start + (k + 1) / cand.deploy_rate, EventKind.DEPLOY_BATCH,
                       deployment=dep.id, k=k + 1)


def _complete(world: World, dep: Deployment, timeline: IncidentTimeline | None) -> None:
    now = world.sim.now
    dep.active = False
    dep.complete_at = now
    if dep.last_batch is None:
        dep.last_batch = now
    world.log.append(now, "Deployer", "deploy_complete",
                     {"deployment": dep.id, "candidate": dep.candidate.id, "treated": len(dep.treated)})
    if timeline is not None:
        if dep.candidate.kind is CandidateKind.FULL_PATCH:
            if timeline.t_deploy_full_complete is None:
                timeline.t_deploy_full_complete = now
        elif timeline.t_deploy_partial_complete is None and timeline.t_deploy_full_complete is None:
            timeline.t_deploy_partial_complete = now
    if dep.role != "predicted":
        threat = world.threats[dep.threat].threat
        treated_perf = [world.fleet[vid].perf for vid, *_ in dep.treated]
        efficacy = sum(treated_perf) / len(treated_perf) if treated_perf else dep.candidate.treated_perf
        world.kb.record(threat.key, kappa=world.scenario.understanding.kappa, candidate=dep.candidate.id,
                        efficacy=efficacy)


def handle_deploy_batch(world: World, event: SimEvent) -> None:
    dep = world.deployments[event.payload["deployment"]]
    if dep.withdrawn:
        return
    if event.payload["k"] > 0 and not dep.active:
        return
    deploy_step(world, dep, event.payload["k"])


# --- withdrawal -----------------------------------------------------------

def monitor_and_maybe_withdraw(world: World, dep: Deployment, epsilon: float, d_w: float) -> str:
    """Compare live P(t) with the rollout's prediction; withdraw after a sustained shortfall."""
    now = world.sim.now
    actual = fleet_performance(world.fleet)
    predicted = dep.prediction.value_at(now)
    if actual < predicted - epsilon:
        if dep.breach_start is None:
            dep.breach_start = now
        if now - dep.breach_start >= d_w - 1e-9:
            withdraw(world, dep)
            return "Withdrawn"
    else:
        dep.breach_start = None
    return "Kept"


def withdraw(world: World, dep: Deployment) -> None:
    now = world.sim.now
    threat = world.threats[dep.threat].threat
    dep.active = dep.monitoring = False
    dep.withdrawn = True
    reverted = []
    for vid, stage, infected_at, epoch, _ in dep.treated:
        v = world.fleet[vid]
        if v.treated_by != dep.id or v.epoch != epoch:
            continue
        paused = v.paused_at if v.paused_at is not None else now
        set_vehicle_state(world.fleet, vid, VehicleState.INFECTED, threat.level(stage), threat.id, stage)
        v.infected_at = infected_at + (now - paused)
        v.epoch += 1
        v.treated_by = None
        v.paused_at = None
        schedule_stage(world, v, threat, stage + 1)
        schedule_contact(world, v, threat)
        reverted.append(vid)
    incident = world.incidents[dep.threat]
    incident.failed.append(dep.candidate.id)
    entry = world.kb.lookup(threat.key)
    failed = tuple(sorted({*(entry.failed if entry else ()), dep.candidate.id}))
    world.kb.record(threat.key, kappa=world.scenario.understanding.kappa, failed=failed, efficacy=0.0)
    world.log.append(now, "Deployer", "withdraw",
                     {"deployment": dep.id, "candidate": dep.candidate.id, "reverted": reverted})
    _deploy_next_best(world, incident)


def _deploy_next_best(world: World, incident: Incident) -> None:
    in_play = {world.deployments[d].candidate.id for d in incident.deployments
               if not world.deployments[d].withdrawn}
    by_id = {c.id: c for c in world.scenario.candidates}
    for cid, _ in incident.ranking:
        if cid in incident.failed or cid in in_play:
            continue
        cand = by_id[cid]
        now = world.sim.now
        cfg = world.scenario.response
        start = max(now, incident.timeline.t_understand + cand.prep_delay)
        trace = predict(world, incident.threat, cand, start, cfg.plan_horizon)
        world.log.append(now, "Diagnostics", "choose_replacement",
                         {"threat": incident.threat, "chosen": cid, "urgency": cand.urgency})
        dep = launch_deployment(world, incident.threat, cand, start, role="replacement")
        dep.prediction = trace
        dep.monitor_until = now + cfg.plan_horizon
        return
    world.log.append(world.sim.now, "Diagnostics", "no_replacement", {"threat": incident.threat})


def handle_withdraw_check(world: World, event: SimEvent) -> None:
    dep = world.deployments[event.payload["deployment"]]
    if not dep.monitoring:
        return
    now = world.sim.now
    if now > dep.monitor_until:
        dep.monitoring = False
        return
    cfg = world.scenario.response
    if monitor_and_maybe_withdraw(world, dep, cfg.epsilon, cfg.withdraw_dwell) == "Kept":
        world.sim.schedule(world.next_tick(now, strictly_after=True), EventKind.WITHDRAW_CHECK,
                           deployment=dep.id)


# --- proactive updates ----------------------------------------------------

def proactive_update_tick(world: World, period: float, at: float, k: int = 1) -> None:
    """Fleet-wide generation bump number ``k``; books tick ``k + 1``."""
    if period <= 0:
        return
    world.sim.schedule((k + 1) * period, EventKind.PROACTIVE_UPDATE, k=k + 1)
    if not world.scenario.updates.trusted:
        world.log.append(at, "Updater", "update_refused", {"tick": k, "trusted": False})
        raise UntrustedUpdate(f"update {k} refused: source not trusted")
    for v in world.fleet.vehicles:
        v.generation += 1
    on_generation_change(world, world.fleet.vehicles, at)
    world.log.append(at, "Updater", "update", {
        "tick": k,
        "generation": world.fleet.vehicles[0].generation,
        "trusted": True,
    })
