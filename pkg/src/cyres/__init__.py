"""Seeded discrete-event simulator of a vehicle fleet under propagating
cyber attack, with a detect/understand/respond loop and resilience metrics."""

from .decision_log import DecisionLog, log_verify, verify_jsonl
from .engine import EventKind, PerformanceTrace, RngStreams, SimEvent, Simulation, derive_seed
from .fleet import Fleet, Vehicle, VehicleState, build_fleet, fleet_performance, set_vehicle_state
from .metrics import (CertificationReport, IncidentTimeline, ResilienceReport, RunRecord, Thresholds,
                      build_report, catastrophe_time, certification_metrics, classify_outcome,
                      resilience_integral, segment_event, time_to_failure, time_to_recovery)
from .output import render_chart, write_run, write_summary, write_trace
from .runner import RunResult, run_scenario, run_shadow
from .scenario import Scenario, dump_scenario, parse_scenario
from .sweep import run_sweep
from .threat import Threat

__version__ = "0.1.0"

__all__ = [
    "CertificationReport", "DecisionLog", "EventKind", "Fleet", "IncidentTimeline", "PerformanceTrace",
    "ResilienceReport", "RngStreams", "RunRecord", "RunResult", "Scenario", "SimEvent", "Simulation",
    "Thresholds", "Threat", "Vehicle", "VehicleState", "build_fleet", "build_report", "catastrophe_time",
    "certification_metrics", "classify_outcome", "derive_seed", "dump_scenario", "fleet_performance",
    "log_verify", "parse_scenario", "render_chart", "resilience_integral", "run_scenario", "run_shadow",
    "run_sweep", "segment_event", "set_vehicle_state", "time_to_failure", "time_to_recovery",
    "verify_jsonl", "write_run", "write_summary", "write_trace",
]
