"""Resilience quantities computed from a piecewise-constant performance trace.

Conventions used throughout:

* a trace value holds from its sample time until the next sample;
* failure is ``P < P_min`` (strict), recovery and event end are ``P >= P_A``;
* missing times are ``None``; the catastrophe time uses ``inf`` for "never".
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .engine import INF, PerformanceTrace
from .errors import BadConfig, NoEvent

OUTCOMES = ("Resilient", "NotDetectedInTime", "NotUnderstoodInTime", "FixTooLate")


@dataclass(frozen=True)
class Thresholds:
    P_A: float = 1.0
    P_min: float = 0.5
    D_c: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.P_min < self.P_A <= 1.0):
            raise BadConfig(f"need 0 <= P_min < P_A <= 1, got P_min={self.P_min}, P_A={self.P_A}")
        if not self.D_c > 0:
            raise BadConfig("D_c must be > 0")


@dataclass
class IncidentTimeline:
    t_start: float | None = None
    t_detect: float | None = None
    t_understand: float | None = None
    t_deploy_start: float | None = None
    t_deploy_partial_complete: float | None = None
    t_deploy_full_complete: float | None = None
    T: float | None = None

    ORDER = ("t_start", "t_detect", "t_understand", "t_deploy_start",
             "t_deploy_partial_complete", "t_deploy_full_complete")

    def ordered(self) -> bool:
        """Defined fields are non-decreasing in declaration order."""
        seen = [getattr(self, name) for name in self.ORDER]
        seen = [t for t in seen if t is not None]
        return all(a <= b for a, b in zip(seen, seen[1:]))

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in (*self.ORDER, "T")}


@dataclass
class ResilienceReport:
    t_start: float
    T: float
    complete: bool
    time_to_failure: float | None
    time_to_recovery: float | None
    time_below_min: float
    resilience_raw: float
    resilience_norm: float
    loss: float
    t_c: float
    outcome: str
    timeline: IncidentTimeline

    def as_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "T": self.T,
            "complete": self.complete,
            "time_to_failure": self.time_to_failure,
            "time_to_recovery": self.time_to_recovery,
            "time_below_min": self.time_below_min,
            "resilience_raw": self.resilience_raw,
            "resilience_norm": self.resilience_norm,
            "loss": self.loss,
            "t_c": self.t_c,
            "outcome": self.outcome,
            "timeline": self.timeline.as_dict(),
        }


def _samples(trace: PerformanceTrace | Sequence[tuple[float, float]]) -> Sequence[tuple[float, float]]:
    return trace.samples if isinstance(trace, PerformanceTrace) else trace


def segment_event(trace, thresholds: Thresholds, horizon: float) -> tuple[float, float, bool]:
    """Locate the first event: ``(t_start, T, complete)``.

    The event starts at the first sample with ``P < 1``. It ends at the
    first later instant with ``P >= P_A`` once performance has been below
    ``P_A``; if it never dips below ``P_A`` it ends only on full recovery.
    An unfinished event is reported with ``T = horizon`` and
    ``complete = False``.
    """
    samples = _samples(trace)
    start_idx = next((i for i, (_, p) in enumerate(samples) if p < 1.0), None)
    if start_idx is None:
        raise NoEvent("performance never dropped below 1")
    t_start = samples[start_idx][0]
    dipped = False
    for t, p in samples[start_idx:]:
        if p < thresholds.P_A:
            dipped = True
        elif dipped or p >= 1.0:
            return t_start, t, True
    return t_start, horizon, False


def time_to_failure(trace, thresholds: Thresholds, t_start: float) -> float | None:
    for t, p in _samples(trace):
        if t >= t_start and p < thresholds.P_min:
            return t - t_start
    return None


def time_to_recovery(trace, thresholds: Thresholds, failure_time: float) -> float | None:
    for t, p in _samples(trace):
        if t >= failure_time and p >= thresholds.P_A:
            return t - failure_time
    return None


def _pieces(samples: Sequence[tuple[float, float]], lo: float, hi: float) -> Iterable[tuple[float, float]]:
    """(width, value) rectangles of the step function clipped to [lo, hi]."""
    for i, (t, p) in enumerate(samples):
        nxt = samples[i + 1][0] if i + 1 < len(samples) else hi
        a, b = max(t, lo), min(nxt, hi)
        if b > a:
            yield b - a, p


def resilience_integral(trace, t_start: float, T: float) -> tuple[float, float]:
    if not t_start < T:
        raise ValueError(f"empty window [{t_start}, {T}]")
    samples = _samples(trace)
    if samples[0][0] > t_start:
        raise ValueError("trace starts after the window")
    raw = math.fsum(w * p for w, p in _pieces(samples, t_start, T))
    return raw, raw / (T - t_start)


def trace_value(trace, t: float) -> float:
    value = None
    for ts, p in _samples(trace):
        if ts > t:
            break
        value = p
    if value is None:
        raise ValueError(f"t={t} precedes the trace")
    return value


def time_below(trace, level: float, lo: float, hi: float) -> float:
    return math.fsum(w for w, p in _pieces(_samples(trace), lo, hi) if p < level)


def catastrophe_time(trace, thresholds: Thresholds) -> float:
    """Start of the first run of ``P < P_min`` that lasts at least ``D_c``.

    Pass the response-disabled shadow trace. The final sample closes the
    observation window, so a breach still open at the end counts only for
    the time actually observed.
    """
    samples = _samples(trace)
    if not samples:
        return INF
    end = samples[-1][0]
    breach_start = None
    for t, p in samples:
        if p < thresholds.P_min:
            if breach_start is None:
                breach_start = t
        elif breach_start is not None:
            if t - breach_start >= thresholds.D_c:
                return breach_start
            breach_start = None
    if breach_start is not None and end - breach_start >= thresholds.D_c:
        return breach_start
    return INF


def classify_outcome(timeline: IncidentTimeline, t_c: float) -> str:
    if timeline.T is not None and timeline.T < t_c:
        return "Resilient"
    if timeline.t_detect is None or timeline.t_detect >= t_c:
        return "NotDetectedInTime"
    if timeline.t_understand is None or timeline.t_understand >= t_c:
        return "NotUnderstoodInTime"
    return "FixTooLate"


def build_report(trace, thresholds: Thresholds, horizon: float, timeline: IncidentTimeline,
                 t_c: float = INF) -> ResilienceReport:
    """Full report for one run; raises :class:`NoEvent` for an undisturbed trace."""
    t_start, T, complete = segment_event(trace, thresholds, horizon)
    ttf = time_to_failure(trace, thresholds, t_start)
    ttr = None
    if ttf is not None:
        ttr = time_to_recovery(trace, thresholds, t_start + ttf)
    if T > t_start:
        raw, norm = resilience_integral(trace, t_start, T)
    else:
        # drop observed only at the final instant
        raw, norm = 0.0, trace_value(trace, t_start)
    timeline.T = T if complete else None
    return ResilienceReport(
        t_start=t_start,
        T=T,
        complete=complete,
        time_to_failure=ttf,
        time_to_recovery=ttr,
        time_below_min=time_below(trace, thresholds.P_min, t_start, T),
        resilience_raw=raw,
        resilience_norm=norm,
        loss=1.0 - norm,
        t_c=t_c,
        outcome=classify_outcome(timeline, t_c),
        timeline=timeline,
    )


@dataclass
class RunRecord:
    """Per-run inputs to the certification metrics."""

    seed: int
    event: bool
    blocked: bool = False
    t_start: float | None = None
    t_detect: float | None = None
    t_understand: float | None = None
    t_c: float = INF
    treated: int = 0
    deploy_time: float = 0.0
    t_prop: float = INF
    variants: int = 1
    update_period: float = 0.0
    outcome: str | None = None
    loss: float | None = None
    peak_infected_fraction: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CertificationReport:
    p_detect: float
    p_understand: float
    p_understand_defined: bool
    deploy_rate_measured: float
    t_propagate_mean: float
    engineered_differences: int
    update_frequency: float
    runs: int
    seed: int
    outcomes: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def certification_metrics(records: Sequence[RunRecord]) -> CertificationReport:
    """Aggregate run records in the order given.

    A run blocked before the event counts as detected and understood at its
    seeding time.
    """
    if not records:
        raise ValueError("certification needs at least one run")
    detected = []
    for r in records:
        if r.blocked:
            detected.append(True)
        else:
            detected.append(r.t_detect is not None and r.t_detect < r.t_c)
    understood = [
        r.blocked or (r.t_understand is not None and r.t_understand < r.t_c)
        for r, d in zip(records, detected) if d
    ]
    rates = [r.treated / r.deploy_time for r in records if r.deploy_time > 0]
    props = [r.t_prop for r in records if math.isfinite(r.t_prop)]
    outcomes = {name: 0 for name in (*OUTCOMES, "NoEvent")}
    for r in records:
        outcomes[r.outcome if r.outcome else "NoEvent"] += 1
    first = records[0]
    return CertificationReport(
        p_detect=sum(detected) / len(records),
        p_understand=sum(understood) / len(understood) if understood else 0.0,
        p_understand_defined=bool(understood),
        deploy_rate_measured=statistics.fmean(rates) if rates else 0.0,
        t_propagate_mean=statistics.fmean(props) if props else INF,
        engineered_differences=first.variants,
        update_frequency=1.0 / first.update_period if first.update_period > 0 else 0.0,
        runs=len(records),
        seed=first.seed,
        outcomes=outcomes,
    )
