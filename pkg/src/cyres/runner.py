"""Run one scenario end to end: main run, shadow run, metrics."""

from __future__ import annotations

import copy
from dataclasses import dataclass

from .engine import INF, PerformanceTrace
from .errors import NoEvent
from .loop import Incident
from .metrics import (IncidentTimeline, ResilienceReport, RunRecord, build_report,
                      catastrophe_time)
from .scenario import Scenario
from .threat import propagation_time
from .world import Mode, World


@dataclass
class ShadowResult:
    trace: PerformanceTrace
    world: World
    t_prop: float
    t_c: float


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    trace: PerformanceTrace
    world: World
    shadow: ShadowResult | None
    timeline: IncidentTimeline
    report: ResilienceReport | None
    record: RunRecord

    @property
    def log(self):
        return self.world.log

    @property
    def t_c(self) -> float:
        return self.record.t_c


def run_shadow(scenario: Scenario, seed: int | None = None) -> ShadowResult:
    """Response-disabled clone of the run.

    It draws from streams derived from the same master seed, so until the
    first response the shadow follows the same realization as the main run.
    """
    world = World(scenario, seed, Mode.SHADOW)
    trace = world.run()
    return ShadowResult(trace, world, propagation_time(world.compromised_history),
                        catastrophe_time(trace, scenario.thresholds))


def primary_incident(world: World) -> Incident | None:
    live = [i for i in world.incidents.values() if not i.blocked and i.timeline.t_start is not None]
    if not live:
        return None
    return min(live, key=lambda i: i.timeline.t_start)


def deployment_stats(world: World) -> tuple[int, float]:
    treated, duration = 0, 0.0
    for dep in world.deployments:
        if dep.role == "predicted" or not dep.treated or dep.last_batch is None:
            continue
        treated += len(dep.treated)
        duration += dep.last_batch - dep.start
    return treated, duration


def run_scenario(scenario: Scenario, seed: int | None = None, keep_history: bool = False) -> RunResult:
    seed = scenario.run.seed if seed is None else seed
    world = World(scenario, seed, Mode.FULL)
    world.sim.keep_history = keep_history
    trace = world.run()
    shadow = run_shadow(scenario, seed) if scenario.run.shadow else None
    t_c = shadow.t_c if shadow is not None else INF
    incident = primary_incident(world)
    timeline = copy.copy(incident.timeline) if incident is not None else IncidentTimeline()
    try:
        report = build_report(trace, scenario.thresholds, scenario.run.horizon, timeline, t_c)
    except NoEvent:
        report = None
    if incident is not None:
        incident.timeline.T = timeline.T
    treated, duration = deployment_stats(world)
    n = len(world.fleet)
    peak = max(world.peak_compromised, shadow.world.peak_compromised if shadow else 0)
    record = RunRecord(
        seed=seed,
        event=report is not None,
        blocked=incident is None and any(i.blocked for i in world.incidents.values()),
        t_start=report.t_start if report else None,
        t_detect=timeline.t_detect,
        t_understand=timeline.t_understand,
        t_c=t_c,
        treated=treated,
        deploy_time=duration,
        t_prop=shadow.t_prop if shadow else INF,
        variants=scenario.fleet.variants,
        update_period=scenario.updates.period,
        outcome=report.outcome if report else None,
        loss=report.loss if report else None,
        peak_infected_fraction=peak / n,
    )
    return RunResult(scenario, seed, trace, world, shadow, timeline, report, record)
