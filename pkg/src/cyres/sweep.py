"""Monte Carlo parameter sweeps over one scenario parameter."""

from __future__ import annotations

import copy
import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .canonical import fmt_float
from .engine import derive_seed
from .errors import BadSweepSpec, ValidationError
from .metrics import OUTCOMES, RunRecord
from .runner import run_scenario
from .scenario import Scenario, scenario_from_dict, scenario_to_dict


def _split(path: str) -> list[str | int]:
    """``threats[0].beta`` or ``threats.0.beta`` -> ``["threats", 0, "beta"]``."""
    parts: list[str | int] = []
    for chunk in path.split("."):
        if not chunk:
            raise BadSweepSpec(f"malformed parameter path {path!r}")
        head, _, rest = chunk.partition("[")
        if head:
            parts.append(int(head) if head.isdigit() else head)
        while rest:
            idx, close, rest = rest.partition("]")
            if not close or not idx.isdigit() or (rest and not rest.startswith("[")):
                raise BadSweepSpec(f"malformed parameter path {path!r}")
            parts.append(int(idx))
            rest = rest[1:]
    if not parts:
        raise BadSweepSpec("empty parameter path")
    return parts


def set_parameter(scenario: Scenario, path: str, value: Any) -> Scenario:
    """Copy of ``scenario`` with the value at ``path`` replaced and re-validated."""
    doc = copy.deepcopy(scenario_to_dict(scenario))
    node: Any = doc
    parts = _split(path)
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(part, int):
            if not isinstance(node, list) or not 0 <= part < len(node):
                raise BadSweepSpec(f"{path}: index {part} out of range")
        elif not isinstance(node, dict) or part not in node:
            raise BadSweepSpec(f"{path}: no such parameter")
        if last:
            node[part] = value
        else:
            node = node[part]
    try:
        return scenario_from_dict(doc)
    except ValidationError as exc:
        raise BadSweepSpec(f"{path}={value!r}: {exc}") from None


@dataclass
class SweepPoint:
    index: int
    value: Any
    records: list[RunRecord] = field(default_factory=list)

    def losses(self) -> list[float]:
        return [r.loss for r in self.records if r.loss is not None]

    def row(self, param: str) -> dict[str, Any]:
        losses = self.losses()
        n = len(self.records)
        row: dict[str, Any] = {
            "point": self.index,
            "param": param,
            "value": self.value,
            "runs": n,
            "event_runs": len(losses),
            "loss_mean": statistics.fmean(losses) if losses else math.nan,
            "loss_std": statistics.stdev(losses) if len(losses) > 1 else 0.0 if losses else math.nan,
            "peak_infected_fraction": max(r.peak_infected_fraction for r in self.records),
        }
        for name in (*OUTCOMES, "NoEvent"):
            row[f"freq_{name}"] = sum((r.outcome or "NoEvent") == name for r in self.records) / n
        return row


def _one(args: tuple[Scenario, int]) -> RunRecord:
    scenario, seed = args
    return run_scenario(scenario, seed).record


def run_sweep(scenario: Scenario, param: str, values: Sequence[Any], runs: int, seed: int,
              paired: bool = False, workers: int = 1) -> list[SweepPoint]:
    """Run ``runs`` seeds at each value of ``param``.

    Seeds are ``derive_seed(seed, point, run)``. With ``paired`` every point
    reuses ``derive_seed(seed, run)`` so points differ only in the parameter.
    Results keep point and run order whatever ``workers`` is.
    """
    if not values:
        raise BadSweepSpec("values must not be empty")
    if runs < 1:
        raise BadSweepSpec("runs must be >= 1")
    points = [SweepPoint(i, v) for i, v in enumerate(values)]
    jobs = []
    for p in points:
        sc = set_parameter(scenario, param, p.value)
        for r in range(runs):
            s = derive_seed("sweep", seed, r) if paired else derive_seed("sweep", seed, p.index, r)
            jobs.append((sc, s))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [_one(j) for j in jobs]
    for i, rec in enumerate(records):
        points[i // runs].records.append(rec)
    return points


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt_float(value)
    return str(value)


def sweep_csv(points: Sequence[SweepPoint], param: str) -> str:
    rows = [p.row(param) for p in points]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow(_cell(v) for v in row.values())
    return buf.getvalue()


def write_sweep(points: Sequence[SweepPoint], param: str, path: str | Path) -> None:
    Path(path).write_bytes(sweep_csv(points, param).encode("utf-8"))
