"""Scenario files: strict JSON parsing, defaults and lossless serialization.

Unknown keys are rejected everywhere. Infinite times are written as the
string ``"inf"``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import BadConfig, ParseError, ValidationError
from .loop import (CandidateKind, MonitorConfig, ResponseCandidate, ResponseConfig,
                   UnderstandingConfig, UpdateConfig)
from .metrics import Thresholds
from .threat import SeedSpec, Threat

REQUIRED = object()


@dataclass(frozen=True)
class FleetConfig:
    n: int
    variants: int = 1
    assignment: str = "round_robin"


@dataclass(frozen=True)
class RunConfig:
    horizon: float
    dt: float = 0.1
    seed: int = 0
    shadow: bool = True


@dataclass(frozen=True)
class CatastropheConfig:
    model: str = "dwell"


@dataclass(frozen=True)
class Scenario:
    fleet: FleetConfig
    run: RunConfig
    threats: tuple[Threat, ...] = ()
    monitors: MonitorConfig = field(default_factory=MonitorConfig)
    understanding: UnderstandingConfig = field(default_factory=UnderstandingConfig)
    candidates: tuple[ResponseCandidate, ...] = ()
    response: ResponseConfig = field(default_factory=ResponseConfig)
    updates: UpdateConfig = field(default_factory=UpdateConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    catastrophe: CatastropheConfig = field(default_factory=CatastropheConfig)

    def with_seed(self, seed: int) -> Scenario:
        return dataclasses.replace(self, run=dataclasses.replace(self.run, seed=seed))


# --- scalar readers -------------------------------------------------------

def _number(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, "must be a number")
    if not math.isfinite(value):
        raise ValidationError(path, "must be finite")
    return float(value)


def _time_or_inf(path: str, value: Any) -> float:
    if value == "inf":
        return math.inf
    return _number(path, value)


def _nonneg(path: str, value: Any) -> float:
    x = _number(path, value)
    if x < 0:
        raise ValidationError(path, "must be >= 0")
    return x


def _positive(path: str, value: Any) -> float:
    x = _number(path, value)
    if x <= 0:
        raise ValidationError(path, "must be > 0")
    return x


def _unit(path: str, value: Any) -> float:
    x = _number(path, value)
    if not 0.0 <= x <= 1.0:
        raise ValidationError(path, "must be in [0, 1]")
    return x


def _int(path: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(path, "must be an integer")
    return value


def _bool(path: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(path, "must be true or false")
    return value


def _str(path: str, value: Any) -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError(path, "must be a non-empty string")
    return value


def _optional(reader: Callable[[str, Any], Any]) -> Callable[[str, Any], Any]:
    def read(path: str, value: Any) -> Any:
        return None if value is None else reader(path, value)
    return read


def _section(path: str, obj: Any, spec: dict[str, tuple[Callable, Any]]) -> dict[str, Any]:
    if not isinstance(obj, dict):
        raise ValidationError(path, "must be an object")
    for key in obj:
        if key not in spec:
            raise ValidationError(f"{path}.{key}" if path else key, "unknown key")
    out = {}
    for key, (reader, default) in spec.items():
        sub = f"{path}.{key}" if path else key
        if key in obj:
            out[key] = reader(sub, obj[key])
        elif default is REQUIRED:
            raise ValidationError(sub, "required")
        else:
            out[key] = default
    return out


def _build(path: str, cls, **kwargs):
    try:
        return cls(**kwargs)
    except BadConfig as exc:
        raise ValidationError(path, str(exc)) from None


# --- sections -------------------------------------------------------------

def _fleet(path: str, obj: Any) -> FleetConfig:
    d = _section(path, obj, {
        "n": (_int, REQUIRED),
        "variants": (_int, 1),
        "assignment": (_str, "round_robin"),
    })
    if d["n"] < 1:
        raise ValidationError(f"{path}.n", "must be ≥ 1")
    if d["variants"] < 1:
        raise ValidationError(f"{path}.variants", "must be ≥ 1")
    if d["variants"] > d["n"]:
        raise ValidationError(f"{path}.variants", "must not exceed fleet.n")
    if d["assignment"] not in ("round_robin", "seeded_random"):
        raise ValidationError(f"{path}.assignment", "must be round_robin or seeded_random")
    return FleetConfig(**d)


def _stages(path: str, value: Any) -> tuple[tuple[float, float], ...]:
    if not isinstance(value, list) or not value:
        raise ValidationError(path, "must be a non-empty list of [delay, level] pairs")
    out = []
    for i, pair in enumerate(value):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ValidationError(f"{path}[{i}]", "must be a [delay, level] pair")
        out.append((_nonneg(f"{path}[{i}][0]", pair[0]), _unit(f"{path}[{i}][1]", pair[1])))
    return tuple(out)


def _int_list(path: str, value: Any) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise ValidationError(path, "must be a list of integers")
    return tuple(_int(f"{path}[{i}]", v) for i, v in enumerate(value))


def _seeding(path: str, obj: Any) -> SeedSpec:
    d = _section(path, obj, {
        "at": (_nonneg, 0.0),
        "targets": (_optional(_int_list), None),
        "count": (_optional(_int), None),
    })
    if d["targets"] is not None and d["count"] is not None:
        raise ValidationError(path, "give either targets or count, not both")
    if d["targets"] is None and d["count"] is None:
        d["count"] = 1
    if d["count"] is not None and d["count"] < 1:
        raise ValidationError(f"{path}.count", "must be ≥ 1")
    return SeedSpec(**d)


def _threat(path: str, obj: Any) -> Threat:
    d = _section(path, obj, {
        "id": (_str, REQUIRED),
        "stages": (_stages, REQUIRED),
        "susceptible_variants": (_optional(_int_list), None),
        "beta": (_nonneg, 0.0),
        "signature": (_optional(_str), None),
        "signature_known": (_bool, False),
        "adaptation_delay": (_optional(_time_or_inf), None),
        "seeding": (_seeding, {}),
    })
    if isinstance(d["seeding"], dict):
        d["seeding"] = _seeding(f"{path}.seeding", d["seeding"])
    if d["susceptible_variants"] is not None:
        d["susceptible_variants"] = frozenset(d["susceptible_variants"])
    return _build(path, Threat, **d)


def _monitors(path: str, obj: Any) -> MonitorConfig:
    return _build(path, MonitorConfig, **_section(path, obj, {
        "signature_rate": (_nonneg, 0.0),
        "anomaly_rate": (_nonneg, 0.0),
        "specification_rate": (_nonneg, 0.0),
        "pre_event_probability": (_unit, 0.5),
        "fixed_delay": (_optional(_nonneg), None),
    }))


def _understanding(path: str, obj: Any) -> UnderstandingConfig:
    return _build(path, UnderstandingConfig, **_section(path, obj, {
        "base_delay": (_nonneg, 1.0),
        "kappa": (_unit, 0.25),
        "jitter": (_unit, 0.0),
    }))


def _kind(path: str, value: Any) -> CandidateKind:
    try:
        return CandidateKind(value)
    except ValueError:
        raise ValidationError(path, "must be Contain, PartialPatch or FullPatch") from None


def _candidate(path: str, obj: Any) -> ResponseCandidate:
    d = _section(path, obj, {
        "id": (_str, REQUIRED),
        "kind": (_kind, REQUIRED),
        "deploy_rate": (_positive, REQUIRED),
        "containment_level": (_optional(_unit), None),
        "prep_delay": (_nonneg, 0.0),
        "urgency": (_str, "planned"),
        "silent_failure": (_bool, False),
    })
    if d["containment_level"] is None:
        if d["kind"] is not CandidateKind.FULL_PATCH:
            raise ValidationError(f"{path}.containment_level", "required for Contain and PartialPatch")
        d["containment_level"] = 1.0
    return _build(path, ResponseCandidate, **d)


def _response(path: str, obj: Any) -> ResponseConfig:
    return _build(path, ResponseConfig, **_section(path, obj, {
        "plan_horizon": (_positive, 10.0),
        "epsilon": (_unit, 0.05),
        "withdraw_dwell": (_positive, 1.0),
    }))


def _updates(path: str, obj: Any) -> UpdateConfig:
    return _build(path, UpdateConfig, **_section(path, obj, {
        "period": (_nonneg, 0.0),
        "trusted": (_bool, True),
        "adaptation_delay": (_time_or_inf, math.inf),
    }))


def _thresholds(path: str, obj: Any) -> Thresholds:
    return _build(path, Thresholds, **_section(path, obj, {
        "P_A": (_unit, 1.0),
        "P_min": (_unit, 0.5),
        "D_c": (_positive, 1.0),
    }))


def _run(path: str, obj: Any) -> RunConfig:
    d = _section(path, obj, {
        "horizon": (_positive, REQUIRED),
        "dt": (_positive, 0.1),
        "seed": (_int, 0),
        "shadow": (_bool, True),
    })
    if not 0 <= d["seed"] < 2**64:
        raise ValidationError(f"{path}.seed", "must be an unsigned 64-bit integer")
    return RunConfig(**d)


def _catastrophe(path: str, obj: Any) -> CatastropheConfig:
    d = _section(path, obj, {"model": (_str, "dwell")})
    if d["model"] != "dwell":
        raise ValidationError(f"{path}.model", "only the dwell model is implemented")
    return CatastropheConfig(**d)


def _list_of(reader):
    def read(path: str, value: Any):
        if not isinstance(value, list):
            raise ValidationError(path, "must be a list")
        return tuple(reader(f"{path}[{i}]", v) for i, v in enumerate(value))
    return read


TOP_LEVEL = {
    "fleet": (_fleet, REQUIRED),
    "threats": (_list_of(_threat), ()),
    "monitors": (_monitors, None),
    "understanding": (_understanding, None),
    "candidates": (_list_of(_candidate), ()),
    "response": (_response, None),
    "updates": (_updates, None),
    "thresholds": (_thresholds, None),
    "run": (_run, REQUIRED),
    "catastrophe": (_catastrophe, None),
}


def scenario_from_dict(obj: Any) -> Scenario:
    d = _section("", obj, TOP_LEVEL)
    d = {k: v for k, v in d.items() if v is not None}
    sc = Scenario(**d)
    _cross_check(sc)
    return sc


def _cross_check(sc: Scenario) -> None:
    ids = [t.id for t in sc.threats]
    if len(set(ids)) != len(ids):
        raise ValidationError("threats", "threat ids must be unique")
    cids = [c.id for c in sc.candidates]
    if len(set(cids)) != len(cids):
        raise ValidationError("candidates", "candidate ids must be unique")
    for i, t in enumerate(sc.threats):
        path = f"threats[{i}]"
        for v in sorted(t.susceptible_variants or ()):
            if not 0 <= v < sc.fleet.variants:
                raise ValidationError(f"{path}.susceptible_variants", f"variant {v} not in [0, {sc.fleet.variants})")
        for vid in t.seeding.targets or ():
            if not 0 <= vid < sc.fleet.n:
                raise ValidationError(f"{path}.seeding.targets", f"vehicle {vid} not in [0, {sc.fleet.n})")
        if t.seeding.at > sc.run.horizon:
            raise ValidationError(f"{path}.seeding.at", "after the run horizon")


def parse_scenario(data: bytes | str) -> Scenario:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc.reason}") from None
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return scenario_from_dict(obj)


# --- serialization --------------------------------------------------------

def _t(x: float | None):
    if x is None:
        return None
    return "inf" if math.isinf(x) else x


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    def threat(t: Threat) -> dict[str, Any]:
        seeding: dict[str, Any] = {"at": t.seeding.at}
        if t.seeding.targets is not None:
            seeding["targets"] = list(t.seeding.targets)
        else:
            seeding["count"] = t.seeding.count
        return {
            "id": t.id,
            "stages": [[d, p] for d, p in t.stages],
            "susceptible_variants": sorted(t.susceptible_variants) if t.susceptible_variants is not None else None,
            "beta": t.beta,
            "signature": t.signature,
            "signature_known": t.signature_known,
            "adaptation_delay": _t(t.adaptation_delay),
            "seeding": seeding,
        }

    def candidate(c: ResponseCandidate) -> dict[str, Any]:
        d = dataclasses.asdict(c)
        d["kind"] = c.kind.value
        return d

    return {
        "fleet": dataclasses.asdict(sc.fleet),
        "threats": [threat(t) for t in sc.threats],
        "monitors": dataclasses.asdict(sc.monitors),
        "understanding": dataclasses.asdict(sc.understanding),
        "candidates": [candidate(c) for c in sc.candidates],
        "response": dataclasses.asdict(sc.response),
        "updates": {**dataclasses.asdict(sc.updates), "adaptation_delay": _t(sc.updates.adaptation_delay)},
        "thresholds": dataclasses.asdict(sc.thresholds),
        "run": dataclasses.asdict(sc.run),
        "catastrophe": dataclasses.asdict(sc.catastrophe),
    }


def dump_scenario(sc: Scenario) -> str:
    """Lossless JSON text (floats keep full precision)."""
    return json.dumps(scenario_to_dict(sc), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def scenario_digest(sc: Scenario) -> str:
    return hashlib.sha256(dump_scenario(sc).encode("utf-8")).hexdigest()
