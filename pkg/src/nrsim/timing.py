"""Timing-advance arithmetic.

All durations are microseconds (float). Offsets at the receiver are signed:
positive means the uplink arrived early, negative late.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .codec import TA_COMMAND_MAX
from .errors import InvariantViolation

BASE_QUANTUM_US = 0.5208
DEFAULT_CP_TOLERANCE_UNITS = 14


@dataclass(frozen=True)
class Numerology:
    mu: int = 0

    def __post_init__(self):
        if isinstance(self.mu, bool) or not isinstance(self.mu, int) or not 0 <= self.mu <= 4:
            raise InvariantViolation(f"numerology mu={self.mu!r} outside 0..4")


@dataclass(frozen=True)
class TaState:
    nta_us: float = 0.0
    numerology: Numerology = Numerology()
    base_quantum_us: float = BASE_QUANTUM_US

    def __post_init__(self):
        if self.nta_us < 0:
            raise InvariantViolation(f"nta={self.nta_us} us is negative")
        limit = ta_to_time(TA_COMMAND_MAX, self.numerology, self.base_quantum_us)
        if self.nta_us > limit:
            raise InvariantViolation(f"nta={self.nta_us} us exceeds {limit} us")


@dataclass(frozen=True)
class CpTolerance:
    max_abs_offset_us: float

    def __post_init__(self):
        if not self.max_abs_offset_us > 0:
            raise InvariantViolation("cyclic-prefix tolerance must be positive")

    @classmethod
    def from_units(cls, units: float = DEFAULT_CP_TOLERANCE_UNITS, numerology: Numerology = Numerology(),
                   base_quantum_us: float = BASE_QUANTUM_US) -> "CpTolerance":
        return cls(units * ta_unit_duration(numerology, base_quantum_us))


def ta_unit_duration(n: Numerology = Numerology(), base_quantum_us: float = BASE_QUANTUM_US) -> float:
    return base_quantum_us / (1 << n.mu)


def _check_command(ta: int):
    if isinstance(ta, bool) or not isinstance(ta, int) or not 0 <= ta <= TA_COMMAND_MAX:
        raise InvariantViolation(f"TA command {ta!r} outside 0..{TA_COMMAND_MAX}")


def ta_to_time(ta: int, n: Numerology = Numerology(), base_quantum_us: float = BASE_QUANTUM_US) -> float:
    _check_command(ta)
    return ta * ta_unit_duration(n, base_quantum_us)


def quantize_ta(round_trip_us: float, n: Numerology = Numerology(),
                base_quantum_us: float = BASE_QUANTUM_US) -> int:
    if round_trip_us < 0:
        raise InvariantViolation(f"round-trip delay {round_trip_us} us is negative")
    units = round_trip_us / ta_unit_duration(n, base_quantum_us)
    if units >= TA_COMMAND_MAX:
        return TA_COMMAND_MAX
    # half-up; round() would bias ties toward even commands
    return int(units + 0.5)


def apply_rar_ta(state: TaState, ta_command: int) -> TaState:
    # initial access: the RAR command is an absolute advance, not a delta
    return replace(state, nta_us=ta_to_time(ta_command, state.numerology, state.base_quantum_us))


def uplink_arrival_offset(state: TaState, one_way_delay_us: float) -> float:
    if one_way_delay_us < 0:
        raise InvariantViolation(f"one-way delay {one_way_delay_us} us is negative")
    return state.nta_us - 2.0 * one_way_delay_us


def is_uplink_decodable(offset_us: float, tol: CpTolerance) -> bool:
    return abs(offset_us) <= tol.max_abs_offset_us

