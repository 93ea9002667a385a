"""Result files: trace CSV, canonical summary JSON and the SVG chart."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

from .canonical import canonical_json, fmt_float, read_time
from .engine import PerformanceTrace
from .fleet import VehicleState
from .metrics import CertificationReport, IncidentTimeline, RunRecord, Thresholds, certification_metrics
from .runner import RunResult
from .scenario import scenario_digest


def trace_csv(trace: PerformanceTrace) -> str:
    rows = ["t,P"] + [f"{fmt_float(t)},{fmt_float(p)}" for t, p in trace.samples]
    return "\n".join(rows) + "\n"


def write_trace(trace: PerformanceTrace, path: str | Path) -> None:
    Path(path).write_bytes(trace_csv(trace).encode("utf-8"))


def summarize(result: RunResult, scenario_sha: str | None = None) -> dict[str, Any]:
    world = result.world
    incidents = []
    for inc in world.incidents.values():
        incidents.append({
            "threat": inc.threat,
            "signature": inc.signature,
            "blocked": inc.blocked,
            "kb_hit": inc.kb_hit,
            "understanding_latency": inc.understanding_latency,
            "chosen": inc.chosen,
            "failed": list(inc.failed),
            "timeline": inc.timeline.as_dict(),
        })
    cert = certification_metrics([result.record])
    return {
        "status": "Event" if result.report is not None else "NoEvent",
        "report": result.report.as_dict() if result.report is not None else None,
        "certification": cert.as_dict(),
        "run": result.record.as_dict(),
        "incidents": incidents,
        "residual_contained": world.fleet.count(VehicleState.CONTAINED),
        "log_entries": len(world.log),
        "seed": result.seed,
        "scenario_digest": scenario_sha or scenario_digest(result.scenario),
    }


def write_summary(summary: dict[str, Any], path: str | Path) -> None:
    Path(path).write_bytes((canonical_json(summary) + "\n").encode("utf-8"))


def read_summary(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


TIME_FIELDS = ("t_start", "t_detect", "t_understand", "t_c", "t_prop")


def record_from_summary(summary: dict[str, Any]) -> RunRecord:
    raw = dict(summary["run"])
    for key in TIME_FIELDS:
        raw[key] = read_time(raw.get(key))
    for key in ("t_c", "t_prop"):
        if raw[key] is None:
            raw[key] = float("inf")
    return RunRecord(**raw)


def merge_summaries(summaries: Sequence[dict[str, Any]]) -> CertificationReport:
    return certification_metrics([record_from_summary(s) for s in summaries])


# --- chart ----------------------------------------------------------------

WIDTH, HEIGHT = 720, 400
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 50

MARKERS = (
    ("t_detect", "detect", "#1f77b4"),
    ("t_understand", "understand", "#9467bd"),
    ("t_deploy_start", "deploy", "#2ca02c"),
    ("t_deploy_partial_complete", "partial", "#17becf"),
    ("t_deploy_full_complete", "fix", "#8c564b"),
    ("T", "T", "#000000"),
)


def _n(x: float) -> str:
    return f"{x:.2f}"


def chart_svg(trace: PerformanceTrace, thresholds: Thresholds, timeline: IncidentTimeline | None) -> str:
    """Standalone SVG step plot of P(t) with threshold lines and timeline markers."""
    if not trace.samples:
        raise ValueError("empty trace")
    t0, t1 = trace.samples[0][0], trace.samples[-1][0]
    span = (t1 - t0) or 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def x(t: float) -> float:
        return LEFT + (t - t0) / span * pw

    def y(p: float) -> float:
        return TOP + (1.0 - p) * ph

    first_t, first_p = trace.samples[0]
    d = [f"M{_n(x(first_t))} {_n(y(first_p))}"]
    prev = first_p
    for t, p in trace.samples[1:]:
        d.append(f"H{_n(x(t))}")
        if p != prev:
            d.append(f"V{_n(y(p))}")
            prev = p

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
        f'<line x1="{LEFT}" y1="{_n(y(0))}" x2="{LEFT + pw}" y2="{_n(y(0))}" stroke="#333"/>',
        f'<line x1="{LEFT}" y1="{_n(y(0))}" x2="{LEFT}" y2="{_n(y(1))}" stroke="#333"/>',
    ]
    for k in range(6):
        p = k / 5
        out.append(f'<text x="{LEFT - 6}" y="{_n(y(p) + 4)}" text-anchor="end">{p:.1f}</text>')
    for k in range(6):
        t = t0 + span * k / 5
        out.append(f'<text x="{_n(x(t))}" y="{_n(y(0) + 16)}" text-anchor="middle">{t:.1f}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">t</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.2f})">P(t)</text>')
    for name, level, colour in (("P_A", thresholds.P_A, "#2ca02c"), ("P_min", thresholds.P_min, "#d62728")):
        out.append(f'<line class="threshold" data-label="{name}" x1="{LEFT}" y1="{_n(y(level))}" '
                   f'x2="{LEFT + pw}" y2="{_n(y(level))}" stroke="{colour}" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{LEFT + pw - 4}" y="{_n(y(level) - 4)}" text-anchor="end" fill="{colour}">{name}</text>')
    if timeline is not None:
        for field_name, label, colour in MARKERS:
            t = getattr(timeline, field_name)
            if t is None or not t0 <= t <= t1:
                continue
            out.append(f'<line class="marker" data-label="{field_name}" x1="{_n(x(t))}" y1="{_n(y(1))}" '
                       f'x2="{_n(x(t))}" y2="{_n(y(0))}" stroke="{colour}" stroke-dasharray="2 3"/>')
            out.append(f'<text x="{_n(x(t) + 3)}" y="{TOP - 6}" fill="{colour}">{label}</text>')
    out.append(f'<path id="performance" d="{" ".join(d)}" fill="none" stroke="#000" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_chart(trace: PerformanceTrace, thresholds: Thresholds, timeline: IncidentTimeline | None,
                 path: str | Path) -> None:
    Path(path).write_bytes(chart_svg(trace, thresholds, timeline).encode("utf-8"))


def write_run(result: RunResult, out_dir: str | Path, scenario_sha: str | None = None) -> dict[str, Any]:
    """Write trace.csv, summary.json, decisions.jsonl and chart.svg into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(result, scenario_sha)
    write_trace(result.trace, out / "trace.csv")
    write_summary(summary, out / "summary.json")
    result.world.log.write(out / "decisions.jsonl")
    timeline = result.report.timeline if result.report is not None else None
    render_chart(result.trace, result.scenario.thresholds, timeline, out / "chart.svg")
    return summary
