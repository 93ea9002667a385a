"""Attack model: seeding, variant-gated spread, staged degradation and
attacker re-adaptation after proactive updates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .engine import INF, EventKind, SimEvent
from .errors import BadConfig, NotSusceptible
from .fleet import Fleet, Vehicle, VehicleState, set_vehicle_state

if TYPE_CHECKING:
    from .scenario import Scenario
    from .world import World


@dataclass(frozen=True)
class SeedSpec:
    """Where and when the attacker first gets in."""

    at: float = 0.0
    targets: tuple[int, ...] | None = None
    count: int | None = None


@dataclass(frozen=True)
class Threat:
    id: str
    stages: tuple[tuple[float, float], ...]
    susceptible_variants: frozenset[int] | None = None
    beta: float = 0.0
    signature: str | None = None
    signature_known: bool = False
    # None defers to the scenario-wide updates.adaptation_delay
    adaptation_delay: float | None = None
    seeding: SeedSpec = field(default_factory=SeedSpec)

    def __post_init__(self) -> None:
        if not self.stages:
            raise BadConfig(f"threat {self.id}: degradation profile is empty")
        delays = [d for d, _ in self.stages]
        levels = [p for _, p in self.stages]
        if delays[0] != 0:
            raise BadConfig(f"threat {self.id}: first stage must start at delay 0")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise BadConfig(f"threat {self.id}: stage delays must strictly increase")
        if any(b > a for a, b in zip(levels, levels[1:])):
            raise BadConfig(f"threat {self.id}: stage levels must be non-increasing")
        if any(not 0.0 <= p < 1.0 for p in levels):
            raise BadConfig(f"threat {self.id}: stage levels must lie in [0, 1)")
        if self.beta < 0:
            raise BadConfig(f"threat {self.id}: beta must be >= 0")
        if self.adaptation_delay is not None and self.adaptation_delay < 0:
            raise BadConfig(f"threat {self.id}: adaptation delay must be >= 0")

    @property
    def key(self) -> str:
        """Knowledge-base signature (defaults to the threat id)."""
        return self.signature if self.signature is not None else self.id

    def susceptible(self, variant: int) -> bool:
        return self.susceptible_variants is None or variant in self.susceptible_variants

    def level(self, stage: int) -> float:
        return self.stages[stage][1]


@dataclass(frozen=True)
class InfectionRecord:
    vehicle: int
    threat: str
    infected_at: float
    bound_generation: int


@dataclass
class ThreatRuntime:
    """Mutable per-run state of one threat."""

    threat: Threat
    adaptation_delay: float
    seed_targets: list[int]
    seeded: bool = False
    # generation the current exploit works against; None while re-adapting
    exploit_generation: int | None = None
    adapt_token: int = 0


def infect(world: World, vehicle: Vehicle, threat: Threat, at: float) -> None:
    set_vehicle_state(world.fleet, vehicle.id, VehicleState.INFECTED, threat.level(0), threat.id, 0)
    vehicle.infected_at = at
    vehicle.bound_generation = vehicle.generation
    vehicle.epoch += 1
    vehicle.treated_by = None
    vehicle.paused_at = None
    world.infections.append(InfectionRecord(vehicle.id, threat.id, at, vehicle.generation))
    schedule_stage(world, vehicle, threat, 1)
    schedule_contact(world, vehicle, threat)


def schedule_stage(world: World, vehicle: Vehicle, threat: Threat, stage: int) -> None:
    if stage >= len(threat.stages):
        return
    due = vehicle.infected_at + threat.stages[stage][0]
    world.sim.schedule(max(due, world.sim.now), EventKind.STAGE_ADVANCE,
                       vehicle=vehicle.id, epoch=vehicle.epoch, stage=stage)


def schedule_contact(world: World, vehicle: Vehicle, threat: Threat) -> None:
    if threat.beta <= 0:
        return
    delay = world.sim.rng.exponential("propagation", threat.beta)
    world.sim.schedule(world.sim.now + delay, EventKind.INFECTION,
                       threat=threat.id, source=vehicle.id, epoch=vehicle.epoch)


def check_susceptible(fleet: Fleet, threat: Threat, targets: Sequence[int]) -> list[Vehicle]:
    vehicles = [fleet[t] for t in targets]
    for v in vehicles:
        if not threat.susceptible(v.variant):
            raise NotSusceptible(f"vehicle {v.id} runs variant {v.variant}, outside threat {threat.id}'s set")
    return vehicles


def seed_infection(world: World, threat: Threat, targets: Sequence[int], at: float) -> list[int]:
    """Infect ``targets`` at stage 0. Already-compromised targets are skipped."""
    if at < 0:
        raise ValueError("seeding time must be >= 0")
    vehicles = check_susceptible(world.fleet, threat, targets)
    runtime = world.threats[threat.id]
    infected = []
    for v in vehicles:
        if v.state is VehicleState.HEALTHY:
            infect(world, v, threat, at)
            infected.append(v.id)
    if vehicles:
        runtime.exploit_generation = vehicles[0].generation
    runtime.seeded = True
    return infected


def advance_stage(world: World, event: SimEvent) -> None:
    vehicle = world.fleet[event.payload["vehicle"]]
    if vehicle.epoch != event.payload["epoch"] or vehicle.state is not VehicleState.INFECTED:
        return
    threat = world.threats[vehicle.threat].threat
    stage = event.payload["stage"]
    set_vehicle_state(world.fleet, vehicle.id, VehicleState.INFECTED, threat.level(stage), threat.id, stage)
    schedule_stage(world, vehicle, threat, stage + 1)


def propagation_step(world: World, event: SimEvent) -> None:
    """One contact attempt by an infected source, then the next is booked."""
    source = world.fleet[event.payload["source"]]
    runtime = world.threats[event.payload["threat"]]
    threat = runtime.threat
    if (source.epoch != event.payload["epoch"] or source.state is not VehicleState.INFECTED
            or source.threat != threat.id):
        return
    rng = world.sim.rng["propagation"]
    target = world.fleet[rng.randrange(len(world.fleet))]
    if (target.state is VehicleState.HEALTHY
            and threat.susceptible(target.variant)
            and target.generation == source.bound_generation
            and runtime.exploit_generation == source.bound_generation):
        infect(world, target, threat, world.sim.now)
    schedule_contact(world, source, threat)


def on_generation_change(world: World, updated: Sequence[Vehicle], at: float) -> None:
    """Clear infections on freshly updated vehicles and start the attacker's re-work clock."""
    for v in updated:
        if v.compromised:
            set_vehicle_state(world.fleet, v.id, VehicleState.HEALTHY, 1.0)
            v.epoch += 1
            v.treated_by = None
            v.paused_at = None
    for runtime in world.threats.values():
        if not runtime.seeded:
            continue
        runtime.exploit_generation = None
        runtime.adapt_token += 1
        if math.isfinite(runtime.adaptation_delay):
            world.sim.schedule(at + runtime.adaptation_delay, EventKind.ATTACKER_ADAPTED,
                               threat=runtime.threat.id, token=runtime.adapt_token)


def on_attacker_adapted(world: World, event: SimEvent) -> list[int]:
    """Bind the exploit to the live generation and re-enter through the original footholds."""
    runtime = world.threats[event.payload["threat"]]
    if event.payload["token"] != runtime.adapt_token:
        return []
    threat = runtime.threat
    runtime.exploit_generation = max(v.generation for v in world.fleet.vehicles)
    infected = []
    for vid in runtime.seed_targets:
        v = world.fleet[vid]
        if v.state is VehicleState.HEALTHY and v.generation == runtime.exploit_generation:
            infect(world, v, threat, world.sim.now)
            infected.append(vid)
    return infected


def shadow_propagation_time(scenario: Scenario, seed: int | None = None) -> float:
    """Time from first seeding until the unmitigated infected count peaks.

    Runs a response-disabled clone of the scenario. Returns ``inf`` when
    nothing is ever infected within the horizon.
    """
    from .runner import run_shadow

    return run_shadow(scenario, seed).t_prop


def propagation_time(history: Sequence[tuple[float, int]]) -> float:
    """Propagation time from a ``(t, compromised count)`` history."""
    if not history or max(c for _, c in history) == 0:
        return INF
    peak = max(c for _, c in history)
    first = next(t for t, c in history if c > 0)
    reached = next(t for t, c in history if c == peak)
    return reached - first
