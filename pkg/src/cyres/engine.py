"""Deterministic discrete-event core.

The engine owns the clock, the priority queue and the named random
streams. It knows nothing about vehicles or threats: a *world* object is
handed to :meth:`Simulation.run_until` and receives every non-sample event
through ``world.handle(event)``. After each handled event the engine asks
``world.take_dirty()`` whether any vehicle changed state and, if so,
records a performance sample at the current instant.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Any, Iterator, Protocol

from .errors import PastEvent

INF = math.inf

STREAMS = ("propagation", "detection", "understanding", "deployment")


class EventKind(enum.Enum):
    INFECTION = "Infection"
    STAGE_ADVANCE = "StageAdvance"
    DETECTION_CHECK = "DetectionCheck"
    UNDERSTANDING_DONE = "UnderstandingDone"
    DEPLOY_BATCH = "DeployBatch"
    WITHDRAW_CHECK = "WithdrawCheck"
    PROACTIVE_UPDATE = "ProactiveUpdate"
    SAMPLE = "Sample"
    ATTACKER_ADAPTED = "AttackerAdapted"
    END_OF_HORIZON = "EndOfHorizon"


@dataclass
class SimClock:
    now: float = 0.0

    def advance(self, t: float) -> None:
        if t < self.now:
            raise PastEvent(f"clock cannot move back from {self.now} to {t}")
        self.now = t


@dataclass
class SimEvent:
    at: float
    seq: int
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)

    @property
    def key(self) -> tuple[float, int]:
        return (self.at, self.seq)


class EventQueue:
    """Min-heap of events ordered by ``(at, seq)``."""

    def __init__(self, clock: SimClock):
        self.clock = clock
        self._heap: list[tuple[float, int, SimEvent]] = []

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, event: SimEvent) -> None:
        if event.at < self.clock.now:
            raise PastEvent(f"event {event.kind.value} at {event.at} < now {self.clock.now}")
        heapq.heappush(self._heap, (event.at, event.seq, event))

    def peek(self) -> SimEvent | None:
        return self._heap[0][2] if self._heap else None

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)[2]

    def __iter__(self) -> Iterator[SimEvent]:
        return (entry[2] for entry in sorted(self._heap))


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from an ordered tuple of labels.

    Uses SHA-256 over the ``repr``-free string join so the value is the
    same on every platform and Python build.
    """
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


class RngStreams:
    """Independent named random streams derived from one master seed.

    Each label gets its own ``random.Random`` seeded from
    ``derive_seed(master, label)``, so extra draws in one subsystem never
    shift the draws of another.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams = {name: random.Random(derive_seed(self.seed, name)) for name in STREAMS}

    def __getitem__(self, name: str) -> random.Random:
        return self._streams[name]

    def fork(self, *labels: object) -> random.Random:
        """Fresh stream keyed by the master seed and ``labels``."""
        return random.Random(derive_seed(self.seed, *labels))

    def exponential(self, name: str, rate: float) -> float:
        if rate <= 0:
            return INF
        return self._streams[name].expovariate(rate)


@dataclass
class PerformanceTrace:
    """Sampled fleet performance, read as a right-continuous step function."""

    samples: list[tuple[float, float]] = field(default_factory=list)

    def record(self, t: float, p: float) -> None:
        # same-instant samples collapse to the last value at that instant
        if self.samples and self.samples[-1][0] == t:
            self.samples[-1] = (t, p)
        else:
            self.samples.append((t, p))

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.samples]

    @property
    def values(self) -> list[float]:
        return [p for _, p in self.samples]

    def value_at(self, t: float) -> float:
        """P(t) under the piecewise-constant reading."""
        lo, hi = 0, len(self.samples)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.samples[mid][0] <= t:
                lo = mid + 1
            else:
                hi = mid
        if lo == 0:
            raise ValueError(f"t={t} precedes the first sample")
        return self.samples[lo - 1][1]

    def __len__(self) -> int:
        return len(self.samples)


class World(Protocol):
    def handle(self, event: SimEvent) -> None: ...

    def performance(self) -> float: ...

    def take_dirty(self) -> bool: ...


class Simulation:
    """Clock, queue and random streams for one run."""

    def __init__(self, seed: int, dt: float = 0.1):
        if dt <= 0:
            raise ValueError("sampling tick must be positive")
        self.clock = SimClock()
        self.queue = EventQueue(self.clock)
        self.rng = RngStreams(seed)
        self.dt = dt
        self._seq = 0
        self._tick = 0
        self._tick_pending = False
        self.processed: list[SimEvent] = []
        self.keep_history = False

    @property
    def now(self) -> float:
        return self.clock.now

    def schedule(self, at: float, kind: EventKind, **payload: Any) -> SimEvent:
        event = SimEvent(at, self._seq, kind, payload)
        self.queue.schedule(event)
        self._seq += 1
        return event

    def tick_time(self, k: int) -> float:
        return round(k * self.dt, 12)

    def _schedule_tick(self) -> None:
        while self.tick_time(self._tick) < self.now:
            self._tick += 1
        self.schedule(self.tick_time(self._tick), EventKind.SAMPLE)
        self._tick_pending = True

    def run_until(self, horizon: float, world: World) -> PerformanceTrace:
        """Process every event with ``at <= horizon`` and return the trace.

        The trace starts at the current clock value, holds one sample per
        tick and one after every state-changing event, and ends at
        ``horizon``.
        """
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        if horizon < self.now:
            raise PastEvent(f"horizon {horizon} is before now {self.now}")
        trace = PerformanceTrace()
        trace.record(self.now, world.performance())
        if not self._tick_pending:
            self._schedule_tick()
        while self.queue:
            nxt = self.queue.peek()
            if nxt.at > horizon:
                break
            event = self.queue.pop()
            self.clock.advance(event.at)
            if self.keep_history:
                self.processed.append(event)
            if event.kind is EventKind.SAMPLE:
                trace.record(self.now, world.performance())
                self._tick += 1
                self._schedule_tick()
                continue
            world.handle(event)
            if world.take_dirty():
                trace.record(self.now, world.performance())
        self.clock.advance(horizon)
        world.handle(SimEvent(horizon, -1, EventKind.END_OF_HORIZON))
        trace.record(horizon, world.performance())
        return trace
