"""Exception types raised across the simulator."""

from __future__ import annotations


class CyresError(Exception):
    """Base class for all simulator errors."""


class PastEvent(CyresError):
    """An event was scheduled before the current simulation time."""


class BadConfig(CyresError):
    """A structural parameter is out of range (fleet size, variant count...)."""


class UnknownVehicle(CyresError):
    pass


class InconsistentPerf(CyresError):
    """Per-vehicle performance contradicts the vehicle state."""


class NotSusceptible(CyresError):
    """A seeding target runs a variant the threat cannot exploit."""


class NoCandidates(CyresError):
    pass


class UntrustedUpdate(CyresError):
    """A proactive update was refused because its source is not trusted."""


class NoEvent(CyresError):
    """The performance trace never dropped below 1."""


class ParseError(CyresError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}" if line is not None else key
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(CyresError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class BadSweepSpec(CyresError):
    pass
