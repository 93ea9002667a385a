"""Append-only, hash-chained log of every loop decision.

Entry digest layout (all integers big-endian)::

    seq            8 bytes unsigned
    at             4-byte length + UTF-8 of the 6-decimal time string
    actor          4-byte length + UTF-8
    action         4-byte length + UTF-8
    payload_digest 32 bytes, SHA-256 of the canonical payload JSON
    prev_digest    32 bytes, all zero for entry 0

The JSONL export writes one canonical JSON object per line with digests in
lowercase hex.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .canonical import canonical_bytes, canonical_json, fmt_float

ACTORS = ("Monitor", "Diagnostics", "Deployer", "Updater")
GENESIS = bytes(32)
ENTRY_KEYS = frozenset({"seq", "at", "actor", "action", "payload", "payload_digest", "prev_digest", "entry_digest"})


def _field(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack(">I", len(raw)) + raw


def payload_digest(payload: dict[str, Any]) -> bytes:
    return hashlib.sha256(canonical_bytes(payload)).digest()


def entry_digest(seq: int, at: float, actor: str, action: str, pdigest: bytes, prev: bytes) -> bytes:
    material = (struct.pack(">Q", seq) + _field(fmt_float(at)) + _field(actor) + _field(action)
                + pdigest + prev)
    return hashlib.sha256(material).digest()


@dataclass(frozen=True)
class DecisionLogEntry:
    seq: int
    at: float
    actor: str
    action: str
    payload: dict[str, Any]
    payload_digest: bytes
    prev_digest: bytes
    entry_digest: bytes

    def to_json(self) -> str:
        return canonical_json({
            "seq": self.seq,
            "at": self.at,
            "actor": self.actor,
            "action": self.action,
            "payload": self.payload,
            "payload_digest": self.payload_digest.hex(),
            "prev_digest": self.prev_digest.hex(),
            "entry_digest": self.entry_digest.hex(),
        })


@dataclass(frozen=True)
class LogVerdict:
    corrupt_at: int | None = None
    reason: str = ""

    @property
    def valid(self) -> bool:
        return self.corrupt_at is None

    def __str__(self) -> str:
        return "Valid" if self.valid else f"CorruptAt({self.corrupt_at})"


class DecisionLog:
    def __init__(self) -> None:
        self.entries: list[DecisionLogEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def append(self, at: float, actor: str, action: str, payload: dict[str, Any] | None = None) -> DecisionLogEntry:
        return log_append(self, at, actor, action, payload or {})

    def actions(self) -> list[str]:
        return [e.action for e in self.entries]

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.entries)

    def write(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_jsonl().encode("utf-8"))


class NullLog(DecisionLog):
    """Sink used by shadow and prediction clones; records nothing."""

    def append(self, at, actor, action, payload=None):  # type: ignore[override]
        return None


def log_append(log: DecisionLog, at: float, actor: str, action: str, payload: dict[str, Any]) -> DecisionLogEntry:
    if actor not in ACTORS:
        raise ValueError(f"unknown actor {actor!r}")
    # normalize through the canonical form so in-memory and exported payloads agree
    payload = json.loads(canonical_json(payload))
    at = float(at)
    seq = len(log.entries)
    prev = log.entries[-1].entry_digest if log.entries else GENESIS
    pdigest = payload_digest(payload)
    entry = DecisionLogEntry(seq, at, actor, action, payload, pdigest, prev,
                             entry_digest(seq, at, actor, action, pdigest, prev))
    log.entries.append(entry)
    return entry


def log_verify(entries: Iterable[DecisionLogEntry]) -> LogVerdict:
    prev = GENESIS
    for i, e in enumerate(entries):
        if e.seq != i:
            return LogVerdict(i, "sequence gap")
        if e.prev_digest != prev:
            return LogVerdict(i, "prev_digest does not match the preceding entry")
        pdigest = payload_digest(e.payload)
        if pdigest != e.payload_digest:
            return LogVerdict(i, "payload digest mismatch")
        if entry_digest(e.seq, e.at, e.actor, e.action, pdigest, prev) != e.entry_digest:
            return LogVerdict(i, "entry digest mismatch")
        prev = e.entry_digest
    return LogVerdict()


def _parse_line(raw: bytes) -> DecisionLogEntry:
    text = raw.decode("utf-8")
    obj = json.loads(text)
    if not isinstance(obj, dict) or set(obj) != ENTRY_KEYS:
        raise ValueError("wrong entry keys")
    if canonical_json(obj) != text:
        raise ValueError("line is not in canonical form")
    if not isinstance(obj["seq"], int) or not isinstance(obj["at"], float):
        raise ValueError("bad seq/at types")
    if not isinstance(obj["payload"], dict):
        raise ValueError("payload must be an object")
    digests = [bytes.fromhex(obj[k]) for k in ("payload_digest", "prev_digest", "entry_digest")]
    if any(len(d) != 32 for d in digests):
        raise ValueError("digest length")
    return DecisionLogEntry(obj["seq"], obj["at"], obj["actor"], obj["action"], obj["payload"], *digests)


def verify_jsonl(data: bytes, expected_count: int | None = None) -> LogVerdict:
    """Verify an exported log, optionally against the entry count from the run summary.

    Any line that fails to parse, is not canonical or breaks the chain is
    reported by its line index, which equals its seq in an intact log.
    """
    if data and not data.endswith(b"\n"):
        lines = data.split(b"\n")
        return LogVerdict(len(lines) - 1, "missing final newline")
    lines = data.split(b"\n")[:-1] if data else []
    entries: list[DecisionLogEntry] = []
    for i, raw in enumerate(lines):
        try:
            entries.append(_parse_line(raw))
        except (ValueError, UnicodeDecodeError, KeyError, TypeError) as exc:
            earlier = log_verify(entries)
            if not earlier.valid:
                return earlier
            return LogVerdict(i, f"unreadable entry: {exc}")
    verdict = log_verify(entries)
    if not verdict.valid:
        return verdict
    if expected_count is not None and len(entries) != expected_count:
        return LogVerdict(len(entries), f"expected {expected_count} entries, found {len(entries)}")
    return verdict


def read_jsonl(path: str | Path) -> list[DecisionLogEntry]:
    return [_parse_line(line) for line in Path(path).read_bytes().split(b"\n") if line]


def replace_payload(entries: Sequence[DecisionLogEntry], seq: int, payload: dict[str, Any]) -> list[DecisionLogEntry]:
    """Copy of ``entries`` with one payload swapped and digests left untouched (tamper helper)."""
    out = list(entries)
    e = out[seq]
    out[seq] = DecisionLogEntry(e.seq, e.at, e.actor, e.action, payload, e.payload_digest, e.prev_digest, e.entry_digest)
    return out
