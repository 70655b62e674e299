"""Passive rogue-cell monitors.

Both checks only read what a UE already observes (RAR contents, RSRP,
SIB1 valueTag) and only ever flag; they never alter UE behaviour.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import UnknownCell
from .radio import MIN_DISTANCE_M, SPEED_OF_LIGHT_M_PER_US, PathlossModel
from .timing import BASE_QUANTUM_US, Numerology, ta_to_time

DEFAULT_TOL_FACTOR = 3.0
DEFAULT_WINDOW_MS = 120_000
DEFAULT_MAX_UPDATES = 2


@dataclass(frozen=True)
class TaRsrpSample:
    ta_command: int
    rsrp_dbm: float
    cell_id: int
    time_ms: int


@dataclass(frozen=True)
class DetectorVerdict:
    flagged: bool
    score: float
    reason: str


def ta_distance_m(ta_command: int, numerology=Numerology(), base_quantum_us=BASE_QUANTUM_US) -> float:
    return max(ta_to_time(ta_command, numerology, base_quantum_us) / 2.0 * SPEED_OF_LIGHT_M_PER_US,
               MIN_DISTANCE_M)


def ta_rsrp_check(sample: TaRsrpSample, tx_power_dbm: dict, pathloss: PathlossModel = PathlossModel(),
                  tol_factor: float = DEFAULT_TOL_FACTOR, numerology: Numerology = Numerology(),
                  base_quantum_us: float = BASE_QUANTUM_US) -> DetectorVerdict:
    """Compare the distance implied by the TA command with the one implied by RSRP."""
    if sample.cell_id not in tx_power_dbm:
        raise UnknownCell(f"no transmit power known for cell {sample.cell_id}")
    d_ta = ta_distance_m(sample.ta_command, numerology, base_quantum_us)
    d_rsrp = pathloss.distance_for_loss(tx_power_dbm[sample.cell_id] - sample.rsrp_dbm)
    ratio = max(d_ta / d_rsrp, d_rsrp / d_ta)
    return DetectorVerdict(
        ratio > tol_factor,
        ratio,
        f"ta_distance_{d_ta:.0f}m_vs_rsrp_distance_{d_rsrp:.0f}m",
    )


def valuetag_rate_check(history, window_ms: int = DEFAULT_WINDOW_MS,
                        max_updates: int = DEFAULT_MAX_UPDATES) -> DetectorVerdict:
    """Count valueTag changes in the window ending at the newest sample."""
    history = list(history)
    if len(history) < 2:
        return DetectorVerdict(False, 0.0, "valuetag_changes_0")
    start = history[-1][0] - window_ms
    changes = sum(1 for (_, prev), (t, tag) in zip(history, history[1:]) if tag != prev and t > start)
    return DetectorVerdict(changes > max_updates, float(changes), f"valuetag_changes_{changes}_in_{window_ms}ms")


class ValueTagRateMonitor:
    """Streaming form of :func:`valuetag_rate_check`; alerts on the rising edge."""

    def __init__(self, window_ms: int = DEFAULT_WINDOW_MS, max_updates: int = DEFAULT_MAX_UPDATES):
        self.window_ms = window_ms
        self.max_updates = max_updates
        self.changes = deque()
        self.last_tag = None
        self.alerting = False

    def observe(self, time_ms: int, value_tag: int) -> DetectorVerdict | None:
        if self.last_tag is not None and value_tag != self.last_tag:
            self.changes.append(time_ms)
        self.last_tag = value_tag
        while self.changes and self.changes[0] <= time_ms - self.window_ms:
            self.changes.popleft()
        n = len(self.changes)
        flagged = n > self.max_updates
        fire = flagged and not self.alerting
        self.alerting = flagged
        if fire:
            return DetectorVerdict(True, float(n), f"valuetag_changes_{n}_in_{self.window_ms}ms")
        return None
