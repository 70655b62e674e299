"""Counters and fractions recomputed from an event log, and the metrics CSV."""
from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from .ue import duty_active_ms

CSV_HEADER = (
    "rlf_count",
    "reestablish_attempts",
    "si_reacquisitions",
    "registration_requests",
    "missed_si_windows",
    "mean_time_to_rlf_ms",
    "duty_cycle",
    "connected_uptime_fraction",
)


@dataclass(frozen=True)
class Metrics:
    rlf_count: int = 0
    reestablish_attempts: int = 0
    si_reacquisitions: int = 0
    registration_requests: int = 0
    missed_si_windows: int = 0
    mean_time_to_rlf_ms: float | None = None
    duty_cycle: float = 0.0
    connected_uptime_fraction: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in astuple(self)])
        return buf.getvalue()

    def write(self, path):
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> "Metrics":
        rows = list(csv.reader(io.StringIO(text)))
        if len(rows) != 2 or tuple(rows[0]) != CSV_HEADER:
            raise ValueError("metrics CSV must have the fixed header and exactly one row")
        values = {}
        for f, raw in zip(fields(cls), rows[1]):
            if raw == "":
                values[f.name] = None
            elif f.name in ("mean_time_to_rlf_ms", "duty_cycle", "connected_uptime_fraction"):
                values[f.name] = float(raw)
            else:
                values[f.name] = int(raw)
        return cls(**values)


def _ue_subjects(events) -> list[str]:
    return [e.subject for e in events if e.kind == "UE_POWER_ON"]


def stable_intervals(events) -> dict[str, list[tuple[int, int]]]:
    """Per UE, the spans spent CONNECTED with a decodable uplink.

    A span opens at CONNECTION_ESTABLISHED when the Msg3 decode succeeded, or
    at a successful uplink decode while connected; it closes on a failed
    decode, T310 start, RLF or the end of the run.
    """
    out = {s: [] for s in _ue_subjects(events)}
    connected = {}
    last_ok = {}
    opened = {}
    end = 0

    def close(ue, t):
        if opened.get(ue) is not None:
            out.setdefault(ue, []).append((opened[ue], t))
            opened[ue] = None

    for e in events:
        end = e.time
        if e.kind == "UL_DECODE":
            ue = f"ue{e.get('ue')}"
            ok = e.get("ok") == "1"
            last_ok[ue] = ok
            if not ok:
                close(ue, e.time)
            elif connected.get(ue) and opened.get(ue) is None:
                opened[ue] = e.time
        elif e.kind == "CONNECTION_ESTABLISHED":
            connected[e.subject] = True
            if last_ok.get(e.subject):
                opened[e.subject] = e.time
        elif e.kind in ("T310_STARTED", "RLF"):
            close(e.subject, e.time)
            if e.kind == "RLF":
                connected[e.subject] = False
    for ue in list(opened):
        close(ue, end)
    return out


def radio_active_ms(events) -> dict[str, int]:
    """Per UE, time from the first preamble of a procedure until RLF or final RACH failure."""
    since = {}
    total = {s: 0 for s in _ue_subjects(events)}
    end = 0
    for e in events:
        end = e.time
        if e.kind == "RACH_ATTEMPT" and since.get(e.subject) is None:
            since[e.subject] = e.time
        elif (e.kind == "RLF" or (e.kind == "RACH_FAILURE" and e.get("final") == "1")) \
                and since.get(e.subject) is not None:
            total[e.subject] = total.get(e.subject, 0) + e.time - since[e.subject]
            since[e.subject] = None
    for ue, t in since.items():
        if t is not None:
            total[ue] = total.get(ue, 0) + end - t
    return total


def compute_metrics(events) -> Metrics:
    events = list(events)
    counts = {}
    for e in events:
        counts[e.kind] = counts.get(e.kind, 0) + 1

    last_connect = {}
    rlf_gaps = []
    for e in events:
        if e.kind == "CONNECTION_ESTABLISHED":
            last_connect[e.subject] = e.time
        elif e.kind == "RLF" and e.subject in last_connect:
            rlf_gaps.append(e.time - last_connect.pop(e.subject))
    mean_ttr = sum(rlf_gaps) / len(rlf_gaps) if rlf_gaps else None

    end = events[-1].time if events else 0
    active = radio_active_ms(events)
    stable = stable_intervals(events)
    acquisitions = {}
    for e in events:
        if e.kind == "SI_REACQUISITION":
            acquisitions[e.subject] = acquisitions.get(e.subject, 0) + 1

    duties, uptimes = [], []
    for e in events:
        if e.kind != "UE_POWER_ON":
            continue
        ue = e.subject
        total = end - e.time
        if total <= 0:
            continue
        radio = active.get(ue, 0)
        rx = duty_active_ms(total - radio, radio, acquisitions.get(ue, 0),
                            int(e.get("paging_cycle_ms")), int(e.get("paging_wake_ms")),
                            int(e.get("si_acq_ms")))
        duties.append(min(rx / total, 1.0))
        uptimes.append(sum(b - a for a, b in stable.get(ue, [])) / total)

    return Metrics(
        rlf_count=counts.get("RLF", 0),
        reestablish_attempts=counts.get("REESTABLISH_REQ", 0),
        si_reacquisitions=counts.get("SI_REACQUISITION", 0),
        registration_requests=counts.get("REGISTRATION_REQUEST", 0),
        missed_si_windows=counts.get("MISSED_SI", 0),
        mean_time_to_rlf_ms=mean_ttr,
        duty_cycle=sum(duties) / len(duties) if duties else 0.0,
        connected_uptime_fraction=sum(uptimes) / len(uptimes) if uptimes else 0.0,
    )
