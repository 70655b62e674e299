"""Legitimate and rogue base-station behaviour."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .codec import (
    TA_COMMAND_MAX,
    Msg3Grant,
    RachOccasion,
    RarPdu,
    SiWindowLength,
    Sib1Message,
    compute_ra_rnti,
)
from .errors import InvariantViolation
from .timing import (
    BASE_QUANTUM_US,
    CpTolerance,
    Numerology,
    is_uplink_decodable,
    quantize_ta,
)

TC_RNTI_START = 0x0100
RAR_DELAY_MS = 3
MSG4_DELAY_MS = 3
DEFAULT_UL_FAILURE_LIMIT = 20
DEFAULT_ROGUE_POWER_OFFSET_DB = 5.0


class AttackKind(enum.Enum):
    NONE = "none"
    VALUE_TAG_INCREMENT = "value_tag_increment"
    TAC_CYCLE = "tac_cycle"
    SI_WINDOW_TOGGLE = "si_window_toggle"
    TA_DELTA = "ta_delta"


@dataclass(frozen=True)
class AttackProfile:
    kind: AttackKind = AttackKind.NONE
    period_ms: int = 0
    tac_list: tuple[int, ...] = ()
    sequence: tuple[SiWindowLength, ...] = ()
    delta_units: int = 0

    @classmethod
    def value_tag_increment(cls, period_ms: int = 10_000):
        return cls(AttackKind.VALUE_TAG_INCREMENT, period_ms=period_ms)

    @classmethod
    def tac_cycle(cls, tac_list, period_ms: int = 30_000):
        return cls(AttackKind.TAC_CYCLE, period_ms=period_ms, tac_list=tuple(tac_list))

    @classmethod
    def si_window_toggle(cls, sequence=(SiWindowLength.MS5, SiWindowLength.MS10, SiWindowLength.MS20)):
        return cls(AttackKind.SI_WINDOW_TOGGLE, sequence=tuple(sequence))

    @classmethod
    def ta_delta(cls, delta_units: int):
        return cls(AttackKind.TA_DELTA, delta_units=delta_units)

    def validate(self):
        if self.kind in (AttackKind.VALUE_TAG_INCREMENT, AttackKind.TAC_CYCLE) and self.period_ms <= 0:
            raise InvariantViolation("period_ms must be positive")
        if self.kind is AttackKind.TAC_CYCLE:
            if not self.tac_list:
                raise InvariantViolation("tac_list must not be empty")
            for tac in self.tac_list:
                if not 0 <= tac < 1 << 24:
                    raise InvariantViolation(f"TAC {tac} does not fit 24 bits")
        if self.kind is AttackKind.SI_WINDOW_TOGGLE and not self.sequence:
            raise InvariantViolation("sequence must not be empty")
        if self.kind is AttackKind.TA_DELTA and abs(self.delta_units) > TA_COMMAND_MAX:
            raise InvariantViolation(f"|delta_units|={abs(self.delta_units)} exceeds {TA_COMMAND_MAX}")


@dataclass(frozen=True)
class CellConfig:
    cell_id: int
    sib1: Sib1Message
    pci: int = 0
    tx_power_dbm: float = 30.0
    position_m: float = 0.0
    attack: AttackProfile = AttackProfile()
    is_rogue: bool = False
    ul_failure_limit: int = DEFAULT_UL_FAILURE_LIMIT
    active_from_ms: int = 0
    active_until_ms: int | None = None

    def validate(self):
        if not 0 <= self.pci <= 1007:
            raise InvariantViolation(f"pci={self.pci} outside 0..1007")
        if self.position_m < 0:
            raise InvariantViolation("position must be >= 0")
        if not self.is_rogue and self.attack.kind is not AttackKind.NONE:
            raise InvariantViolation("a legitimate cell cannot carry an attack profile")
        if self.ul_failure_limit < 1:
            raise InvariantViolation("ul_failure_limit must be >= 1")
        self.sib1.validate()
        self.attack.validate()

    def is_active(self, now: int) -> bool:
        if now < self.active_from_ms:
            return False
        return self.active_until_ms is None or now < self.active_until_ms


def harvest_cell_config(target: CellConfig, cell_id: int, *, position_m: float | None = None,
                        power_offset_db: float = DEFAULT_ROGUE_POWER_OFFSET_DB) -> CellConfig:
    """Clone what a downlink sniffer can learn about ``target`` into a rogue cell.

    The SIB1 is copied verbatim; the caller attaches an attack profile.
    """
    if cell_id == target.cell_id:
        raise InvariantViolation("rogue clone needs a fresh cell id")
    return CellConfig(
        cell_id=cell_id,
        sib1=target.sib1,
        pci=target.pci,
        tx_power_dbm=target.tx_power_dbm + power_offset_db,
        position_m=target.position_m if position_m is None else position_m,
        attack=AttackProfile(),
        is_rogue=True,
        ul_failure_limit=target.ul_failure_limit,
    )


def next_sib1(cell: CellConfig, now: int) -> Sib1Message:
    base = cell.sib1
    attack = cell.attack
    if attack.kind is AttackKind.VALUE_TAG_INCREMENT:
        return replace(base, value_tag=(base.value_tag + now // attack.period_ms) % 32)
    if attack.kind is AttackKind.TAC_CYCLE:
        tac = attack.tac_list[(now // attack.period_ms) % len(attack.tac_list)]
        return replace(base, tracking_area_code=tac)
    if attack.kind is AttackKind.SI_WINDOW_TOGGLE:
        step = now // base.sib1_periodicity_ms
        return replace(base, si_window_length=attack.sequence[step % len(attack.sequence)])
    return base


@dataclass(frozen=True)
class Msg1:
    preamble_index: int
    occasion: RachOccasion
    ue_id: int = 0


@dataclass
class RarDecision:
    rar: RarPdu
    ra_rnti: int
    legit_ta: int


@dataclass
class UlVerdict:
    ok: bool
    fail_streak: int
    scheduling: bool


@dataclass
class Gnb:
    """Runtime state of one cell: RNTI allocator and per-UE uplink tracking."""

    config: CellConfig
    numerology: Numerology = Numerology()
    base_quantum_us: float = BASE_QUANTUM_US
    tolerance: CpTolerance = field(default_factory=CpTolerance.from_units)
    next_tc_rnti: int = TC_RNTI_START
    fail_streak: dict = field(default_factory=dict)
    scheduling: dict = field(default_factory=dict)
    last_sib1: Sib1Message | None = None

    @property
    def cell_id(self) -> int:
        return self.config.cell_id

    @property
    def synthesizes_msg4(self) -> bool:
        # standalone rogue: no core behind it, contention resolution is local
        return self.config.is_rogue

    def broadcast(self, now: int) -> Sib1Message:
        self.last_sib1 = next_sib1(self.config, now)
        return self.last_sib1

    def handle_prach(self, msg1: Msg1, measured_round_trip_us: float) -> RarDecision:
        legit = quantize_ta(measured_round_trip_us, self.numerology, self.base_quantum_us)
        ta = legit
        if self.config.attack.kind is AttackKind.TA_DELTA:
            ta = min(max(legit + self.config.attack.delta_units, 0), TA_COMMAND_MAX)
        tc_rnti = self.next_tc_rnti
        self.next_tc_rnti = TC_RNTI_START if tc_rnti >= 0xFFEF else tc_rnti + 1
        grant = Msg3Grant(freq_assign=(tc_rnti * 7) % (1 << 14), time_assign=2, mcs=4)
        rar = RarPdu(rapid=msg1.preamble_index, ta_command=ta, msg3_grant=grant, tc_rnti=tc_rnti)
        # new access from this UE: uplink tracking restarts
        self.fail_streak[msg1.ue_id] = 0
        self.scheduling[msg1.ue_id] = True
        return RarDecision(rar, compute_ra_rnti(msg1.occasion), legit)

    def ul_receive(self, ue_id: int, offset_us: float, channel: str = "pusch") -> UlVerdict:
        ok = is_uplink_decodable(offset_us, self.tolerance)
        if channel == "msg3":
            return UlVerdict(ok, 0, True)
        streak = 0 if ok else self.fail_streak.get(ue_id, 0) + 1
        self.fail_streak[ue_id] = streak
        if streak >= self.config.ul_failure_limit:
            self.scheduling[ue_id] = False
        return UlVerdict(ok, streak, self.scheduling.get(ue_id, False))

    def is_scheduling(self, ue_id: int) -> bool:
        return self.scheduling.get(ue_id, False)

    def release(self, ue_id: int):
        self.scheduling.pop(ue_id, None)
        self.fail_streak.pop(ue_id, None)
