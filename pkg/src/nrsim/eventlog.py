"""Typed simulation events and their line-oriented file format.

One event per line::

    <time_ms> <KIND> <subject> key=value key=value ...

Payload values never contain whitespace. Field order is the emission order,
so two runs of the same scenario serialize to identical bytes.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

from .errors import LogFormatError

EVENT_KINDS = (
    "SCENARIO_START",
    "SCENARIO_END",
    "UE_POWER_ON",
    "CELL_SELECTED",
    "BROADCAST",
    "SI_REACQUISITION",
    "TAC_MISMATCH_OBSERVED",
    "REGISTRATION_REQUEST",
    "MISSED_SI",
    "RACH_ATTEMPT",
    "PRACH_DETECTED",
    "RAR_SENT",
    "RACH_FAILURE",
    "MSG3_SENT",
    "UL_DECODE",
    "CONNECTION_ESTABLISHED",
    "T310_STARTED",
    "T310_STOPPED",
    "RLF",
    "REESTABLISH_REQ",
    "NO_CELL",
    "DETECTOR_ALERT",
)
_KINDS = frozenset(EVENT_KINDS)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    text = str(value)
    if not text or any(c.isspace() for c in text):
        raise ValueError(f"payload value {value!r} is empty or contains whitespace")
    return text


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: str
    subject: str
    payload: tuple = ()

    def get(self, key, default=None):
        for k, v in self.payload:
            if k == key:
                return v
        return default

    def to_line(self) -> str:
        parts = [str(self.time), self.kind, self.subject]
        parts.extend(f"{k}={v}" for k, v in self.payload)
        return " ".join(parts)


class EventLog:
    def __init__(self):
        self.events: list[SimEvent] = []

    def emit(self, time: int, kind: str, subject: str, **payload) -> SimEvent:
        if kind not in _KINDS:
            raise ValueError(f"unknown event kind {kind}")
        if self.events and time < self.events[-1].time:
            raise ValueError(f"event at {time} ms after {self.events[-1].time} ms")
        ev = SimEvent(time, kind, subject, tuple((k, _fmt(v)) for k, v in payload.items()))
        self.events.append(ev)
        return ev

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def of_kind(self, *kinds) -> list[SimEvent]:
        return [e for e in self.events if e.kind in kinds]

    def dumps(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    def write(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")


def parse_line(line: str, lineno: int, last_good=None) -> SimEvent:
    parts = line.split(" ")
    if len(parts) < 3:
        raise LogFormatError(lineno, "expected '<time_ms> <KIND> <subject> ...'", last_good)
    time_s, kind, subject = parts[:3]
    if not time_s.isdigit():
        raise LogFormatError(lineno, f"bad timestamp {time_s!r}", last_good)
    if kind not in _KINDS:
        raise LogFormatError(lineno, f"unknown event kind {kind!r}", last_good)
    payload = []
    for token in parts[3:]:
        key, sep, value = token.partition("=")
        if not sep or not key or not value:
            raise LogFormatError(lineno, f"bad payload field {token!r}", last_good)
        payload.append((key, value))
    return SimEvent(int(time_s), kind, subject, tuple(payload))


def loads(text: str) -> EventLog:
    log = EventLog()
    last_good = None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    elif lines:
        raise LogFormatError(len(lines), "last line is not newline-terminated (truncated?)", last_good=len(lines) - 1 or None)
    for lineno, line in enumerate(lines, 1):
        ev = parse_line(line, lineno, last_good)
        if log.events and ev.time < log.events[-1].time:
            raise LogFormatError(lineno, "timestamps go backwards", last_good)
        log.events.append(ev)
        last_good = lineno
    if not log.events or log.events[-1].kind != "SCENARIO_END":
        raise LogFormatError(len(lines) + 1, "log ends without SCENARIO_END (truncated?)", last_good)
    return log


def read(path) -> EventLog:
    with io.open(path, encoding="utf-8", newline="") as fh:
        return loads(fh.read())
