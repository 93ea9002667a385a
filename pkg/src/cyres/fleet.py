"""Vehicle population: variants, software generations and performance."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field

from .errors import BadConfig, InconsistentPerf, UnknownVehicle


class VehicleState(enum.Enum):
    HEALTHY = "Healthy"
    INFECTED = "Infected"
    CONTAINED = "Contained"
    PATCHED = "Patched"


FULL_PERF_STATES = (VehicleState.HEALTHY, VehicleState.PATCHED)


@dataclass
class Vehicle:
    id: int
    variant: int
    generation: int = 0
    state: VehicleState = VehicleState.HEALTHY
    perf: float = 1.0
    threat: str | None = None
    stage: int = 0
    infected_at: float = 0.0
    bound_generation: int = 0
    # bumped on every infection-related transition; stale events compare it
    epoch: int = 0
    treated_by: int | None = None
    paused_at: float | None = None

    @property
    def compromised(self) -> bool:
        return self.state in (VehicleState.INFECTED, VehicleState.CONTAINED)


@dataclass
class Fleet:
    vehicles: list[Vehicle]
    variants: int
    dirty: bool = field(default=False, compare=False)

    @property
    def variant_assignment(self) -> dict[int, int]:
        return {v.id: v.variant for v in self.vehicles}

    def __len__(self) -> int:
        return len(self.vehicles)

    def __getitem__(self, vid: int) -> Vehicle:
        if not isinstance(vid, int) or not 0 <= vid < len(self.vehicles):
            raise UnknownVehicle(f"no vehicle {vid!r} in a fleet of {len(self.vehicles)}")
        return self.vehicles[vid]

    def count(self, *states: VehicleState) -> int:
        return sum(1 for v in self.vehicles if v.state in states)


def build_fleet(n: int, v: int, assignment: str = "round_robin", rng: random.Random | None = None) -> Fleet:
    """Create ``n`` healthy generation-0 vehicles spread over ``v`` variants.

    ``seeded_random`` shuffles the round-robin layout with ``rng`` (the
    propagation stream), which keeps every variant populated and the
    per-variant counts within one of each other.
    """
    if n < 1:
        raise BadConfig("fleet size must be >= 1")
    if v < 1 or v > n:
        raise BadConfig(f"variant count must be in [1, {n}], got {v}")
    layout = [i % v for i in range(n)]
    if assignment == "seeded_random":
        if rng is None:
            raise BadConfig("seeded_random assignment needs a random stream")
        rng.shuffle(layout)
    elif assignment != "round_robin":
        raise BadConfig(f"unknown assignment {assignment!r}")
    return Fleet([Vehicle(id=i, variant=layout[i]) for i in range(n)], variants=v)


def fleet_performance(fleet: Fleet) -> float:
    # fsum is correctly rounded, so the mean does not depend on vehicle order
    return math.fsum(v.perf for v in fleet.vehicles) / len(fleet.vehicles)


def set_vehicle_state(
    fleet: Fleet,
    vid: int,
    state: VehicleState,
    perf: float,
    threat: str | None = None,
    stage: int = 0,
) -> Vehicle:
    vehicle = fleet[vid]
    if not 0.0 <= perf <= 1.0:
        raise InconsistentPerf(f"perf {perf} outside [0, 1]")
    if state in FULL_PERF_STATES and perf != 1.0:
        raise InconsistentPerf(f"{state.value} vehicle must have perf 1.0, got {perf}")
    if state not in FULL_PERF_STATES and perf >= 1.0:
        raise InconsistentPerf(f"{state.value} vehicle must have perf < 1.0")
    vehicle.state = state
    vehicle.perf = perf
    vehicle.threat = threat if state is not VehicleState.HEALTHY else None
    vehicle.stage = stage
    fleet.dirty = True
    return vehicle
