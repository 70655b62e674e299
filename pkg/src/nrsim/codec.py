"""Bit-exact codecs for SIB1 and the Random Access Response MAC PDU.

Wire framing shared by both messages (big-endian, octet aligned)::

    +----------+----------------+---------------------------+
    | type (8) | length (16)    | payload, zero-padded      |
    +----------+----------------+---------------------------+

``length`` counts payload octets. Payload layouts are documented next to
each encoder. The layouts are this project's own packed format; they are
not ASN.1 PER.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from functools import lru_cache

from .errors import InvariantViolation, MalformedMessage

MSG_TYPE_SIB1 = 0x01
MSG_TYPE_RAR = 0x02
HEADER_OCTETS = 3

VALUE_TAG_BITS = 5
TAC_BITS = 24
CELL_IDENTITY_BITS = 36
TA_FIELD_BITS = 12
TA_COMMAND_MAX = 3846
RAPID_BITS = 6
TC_RNTI_BITS = 16
GRANT_FREQ_BITS = 14
GRANT_TIME_BITS = 4
GRANT_MCS_BITS = 4
RAR_RESERVED_BITS = 5

SLOTS_PER_FRAME = 14
RACH_FREQ_OCCASIONS = 8

_BCD_FILLER = 0xF


class SiWindowLength(enum.Enum):
    MS5 = 5
    MS10 = 10
    MS15 = 15
    MS20 = 20

    @property
    def ms(self) -> int:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "SiWindowLength":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown si-WindowLength {text!r}") from None


_SI_WINDOW_ORDER = (SiWindowLength.MS5, SiWindowLength.MS10, SiWindowLength.MS15, SiWindowLength.MS20)


def _check_uint(name: str, value, bits: int, low: int = 0, high: int | None = None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvariantViolation(f"{name} must be an integer, got {value!r}")
    top = (1 << bits) - 1 if high is None else high
    if not low <= value <= top:
        raise InvariantViolation(f"{name}={value} outside [{low}, {top}]")


@dataclass(frozen=True)
class PlmnId:
    mcc: int
    mnc: int
    mnc_length: int = 2

    def validate(self):
        _check_uint("mcc", self.mcc, 10, 0, 999)
        if self.mnc_length not in (2, 3):
            raise InvariantViolation(f"mnc_length must be 2 or 3, got {self.mnc_length!r}")
        _check_uint("mnc", self.mnc, 10, 0, 10**self.mnc_length - 1)

    def __str__(self):
        return f"{self.mcc:03d}-{self.mnc:0{self.mnc_length}d}"

    @classmethod
    def parse(cls, text: str) -> "PlmnId":
        mcc, sep, mnc = text.strip().partition("-")
        if not sep or len(mcc) != 3 or len(mnc) not in (2, 3) or not (mcc + mnc).isdigit():
            raise ValueError(f"PLMN must look like 001-01 or 310-410, got {text!r}")
        return cls(int(mcc), int(mnc), len(mnc))


@dataclass(frozen=True)
class RachConfigCommon:
    preamble_format_id: int = 0
    ra_response_window_ms: int = 10
    power_ramping_step_db: int = 2
    preamble_target_power_dbm: int = -100
    prach_periodicity_ms: int = 10

    def validate(self):
        _check_uint("preamble_format_id", self.preamble_format_id, 8)
        _check_uint("ra_response_window_ms", self.ra_response_window_ms, 8, 1)
        _check_uint("power_ramping_step_db", self.power_ramping_step_db, 8)
        if isinstance(self.preamble_target_power_dbm, bool) or not isinstance(self.preamble_target_power_dbm, int):
            raise InvariantViolation("preamble_target_power_dbm must be an integer")
        if not -32768 <= self.preamble_target_power_dbm <= 32767:
            raise InvariantViolation(f"preamble_target_power_dbm={self.preamble_target_power_dbm} exceeds 16-bit signed")
        _check_uint("prach_periodicity_ms", self.prach_periodicity_ms, 16, 1)


@dataclass(frozen=True)
class Sib1Message:
    value_tag: int
    tracking_area_code: int
    si_window_length: SiWindowLength
    plmn_list: tuple[PlmnId, ...]
    cell_identity: int = 0
    cell_barred: bool = False
    rach_config: RachConfigCommon = RachConfigCommon()
    sib1_periodicity_ms: int = 160

    def validate(self):
        _check_uint("value_tag", self.value_tag, VALUE_TAG_BITS)
        _check_uint("tracking_area_code", self.tracking_area_code, TAC_BITS)
        if not isinstance(self.si_window_length, SiWindowLength):
            raise InvariantViolation(f"si_window_length must be SiWindowLength, got {self.si_window_length!r}")
        if not isinstance(self.plmn_list, tuple) or not 1 <= len(self.plmn_list) <= 15:
            raise InvariantViolation("plmn_list must be a tuple of 1..15 PlmnId")
        for plmn in self.plmn_list:
            plmn.validate()
        _check_uint("cell_identity", self.cell_identity, CELL_IDENTITY_BITS)
        if not isinstance(self.cell_barred, bool):
            raise InvariantViolation("cell_barred must be a bool")
        self.rach_config.validate()
        _check_uint("sib1_periodicity_ms", self.sib1_periodicity_ms, 16, 1)


@dataclass(frozen=True)
class Msg3Grant:
    freq_assign: int = 0
    time_assign: int = 0
    mcs: int = 0

    def validate(self):
        _check_uint("freq_assign", self.freq_assign, GRANT_FREQ_BITS)
        _check_uint("time_assign", self.time_assign, GRANT_TIME_BITS)
        _check_uint("mcs", self.mcs, GRANT_MCS_BITS)


@dataclass(frozen=True)
class RarPdu:
    rapid: int
    ta_command: int
    msg3_grant: Msg3Grant = Msg3Grant()
    tc_rnti: int = 0

    def validate(self):
        _check_uint("rapid", self.rapid, RAPID_BITS)
        # 12-bit field, but only 0..3846 are valid commands
        _check_uint("ta_command", self.ta_command, TA_FIELD_BITS, 0, TA_COMMAND_MAX)
        self.msg3_grant.validate()
        _check_uint("tc_rnti", self.tc_rnti, TC_RNTI_BITS)


@dataclass(frozen=True)
class RachOccasion:
    slot_index: int
    freq_index: int
    frame_number: int = 0

    def validate(self, slots_per_frame: int = SLOTS_PER_FRAME, freq_occasions: int = RACH_FREQ_OCCASIONS):
        _check_uint("slot_index", self.slot_index, 16, 0, slots_per_frame - 1)
        _check_uint("freq_index", self.freq_index, 16, 0, freq_occasions - 1)
        _check_uint("frame_number", self.frame_number, 32)


class _BitWriter:
    def __init__(self):
        self.value = 0
        self.nbits = 0

    def put(self, value: int, bits: int):
        assert 0 <= value < (1 << bits), (value, bits)
        self.value = (self.value << bits) | value
        self.nbits += bits

    def octets(self) -> bytes:
        pad = -self.nbits % 8
        total = (self.nbits + pad) // 8
        return (self.value << pad).to_bytes(total, "big")


class _BitReader:
    def __init__(self, data: bytes):
        self.value = int.from_bytes(data, "big")
        self.total = len(data) * 8
        self.pos = 0

    def get(self, bits: int) -> int:
        if self.pos + bits > self.total:
            raise MalformedMessage(f"payload truncated at bit {self.pos} (needed {bits} more)")
        self.pos += bits
        return (self.value >> (self.total - self.pos)) & ((1 << bits) - 1)

    def finish(self):
        rest = self.total - self.pos
        if rest >= 8:
            raise MalformedMessage(f"{rest // 8} trailing octet(s) after payload")
        if self.value & ((1 << rest) - 1):
            raise MalformedMessage("non-zero padding bits")


def _frame(msg_type: int, payload: bytes) -> bytes:
    return bytes([msg_type]) + len(payload).to_bytes(2, "big") + payload


def _unframe(data: bytes, msg_type: int) -> bytes:
    if not isinstance(data, (bytes, bytearray)):
        raise MalformedMessage(f"expected bytes, got {type(data).__name__}")
    if len(data) < HEADER_OCTETS:
        raise MalformedMessage(f"message of {len(data)} octet(s) is shorter than the header")
    if data[0] != msg_type:
        raise MalformedMessage(f"message type 0x{data[0]:02x}, expected 0x{msg_type:02x}")
    length = int.from_bytes(data[1:3], "big")
    if length != len(data) - HEADER_OCTETS:
        raise MalformedMessage(f"length field says {length} octets, {len(data) - HEADER_OCTETS} present")
    return bytes(data[HEADER_OCTETS:])


def _put_bcd(w: _BitWriter, digits: str, width: int):
    for i in range(width):
        w.put(int(digits[i]) if i < len(digits) else _BCD_FILLER, 4)


def _get_bcd(r: _BitReader, width: int) -> list[int]:
    return [r.get(4) for _ in range(width)]


# SIB1 payload, in order:
#   valueTag 5 | TAC 24 | si-WindowLength 2 | cellIdentity 36 | cellBarred 1 |
#   sib1Periodicity 16 | preambleFormat 8 | raResponseWindow 8 |
#   powerRampingStep 8 | preambleTargetPower 16 (two's complement) |
#   prachPeriodicity 16 | plmnCount 4 | per PLMN: MCC 3xBCD, mncLength-3 flag 1,
#   MNC 3xBCD (0xF filler for two-digit MNC)
def encode_sib1(msg: Sib1Message) -> bytes:
    msg.validate()
    return _encode_sib1(msg)


@lru_cache(maxsize=256)
def _encode_sib1(msg: Sib1Message) -> bytes:
    w = _BitWriter()
    w.put(msg.value_tag, VALUE_TAG_BITS)
    w.put(msg.tracking_area_code, TAC_BITS)
    w.put(_SI_WINDOW_ORDER.index(msg.si_window_length), 2)
    w.put(msg.cell_identity, CELL_IDENTITY_BITS)
    w.put(int(msg.cell_barred), 1)
    w.put(msg.sib1_periodicity_ms, 16)
    rc = msg.rach_config
    w.put(rc.preamble_format_id, 8)
    w.put(rc.ra_response_window_ms, 8)
    w.put(rc.power_ramping_step_db, 8)
    w.put(rc.preamble_target_power_dbm & 0xFFFF, 16)
    w.put(rc.prach_periodicity_ms, 16)
    w.put(len(msg.plmn_list), 4)
    for plmn in msg.plmn_list:
        _put_bcd(w, f"{plmn.mcc:03d}", 3)
        w.put(int(plmn.mnc_length == 3), 1)
        _put_bcd(w, f"{plmn.mnc:0{plmn.mnc_length}d}", 3)
    return _frame(MSG_TYPE_SIB1, w.octets())


def decode_sib1(data: bytes) -> Sib1Message:
    if isinstance(data, bytearray):
        data = bytes(data)
    if not isinstance(data, bytes):
        raise MalformedMessage(f"expected bytes, got {type(data).__name__}")
    return _decode_sib1(data)


@lru_cache(maxsize=256)
def _decode_sib1(data: bytes) -> Sib1Message:
    r = _BitReader(_unframe(data, MSG_TYPE_SIB1))
    value_tag = r.get(VALUE_TAG_BITS)
    tac = r.get(TAC_BITS)
    window = _SI_WINDOW_ORDER[r.get(2)]
    cell_identity = r.get(CELL_IDENTITY_BITS)
    barred = bool(r.get(1))
    periodicity = r.get(16)
    fmt, rar_window, ramp = r.get(8), r.get(8), r.get(8)
    target = r.get(16)
    if target & 0x8000:
        target -= 0x10000
    prach_period = r.get(16)
    count = r.get(4)
    if count == 0:
        raise MalformedMessage("PLMN list is empty")
    plmns = []
    for _ in range(count):
        mcc = _get_bcd(r, 3)
        three = r.get(1)
        mnc = _get_bcd(r, 3)
        if any(d > 9 for d in mcc) or any(d > 9 for d in mnc[:2]):
            raise MalformedMessage("non-decimal digit in PLMN identity")
        if three and mnc[2] > 9:
            raise MalformedMessage("non-decimal digit in three-digit MNC")
        if not three and mnc[2] != _BCD_FILLER:
            raise MalformedMessage("two-digit MNC without filler nibble")
        mnc_digits = mnc if three else mnc[:2]
        plmns.append(PlmnId(
            mcc[0] * 100 + mcc[1] * 10 + mcc[2],
            int("".join(map(str, mnc_digits))),
            3 if three else 2,
        ))
    r.finish()
    msg = Sib1Message(
        value_tag=value_tag,
        tracking_area_code=tac,
        si_window_length=window,
        plmn_list=tuple(plmns),
        cell_identity=cell_identity,
        cell_barred=barred,
        rach_config=RachConfigCommon(fmt, rar_window, ramp, target, prach_period),
        sib1_periodicity_ms=periodicity,
    )
    msg.validate()
    return msg


# RAR: subheader E 1 | T 1 | RAPID 6, then payload
#   R 1 | TA command 12 | Msg3 freq 14 | Msg3 time 4 | Msg3 MCS 4 | reserved 5 | TC-RNTI 16
def encode_rar(pdu: RarPdu) -> bytes:
    pdu.validate()
    w = _BitWriter()
    w.put(0, 1)  # E: no further subPDU
    w.put(1, 1)  # T: RAPID subheader
    w.put(pdu.rapid, RAPID_BITS)
    w.put(0, 1)
    w.put(pdu.ta_command, TA_FIELD_BITS)
    w.put(pdu.msg3_grant.freq_assign, GRANT_FREQ_BITS)
    w.put(pdu.msg3_grant.time_assign, GRANT_TIME_BITS)
    w.put(pdu.msg3_grant.mcs, GRANT_MCS_BITS)
    w.put(0, RAR_RESERVED_BITS)
    w.put(pdu.tc_rnti, TC_RNTI_BITS)
    return _frame(MSG_TYPE_RAR, w.octets())


def decode_rar(data: bytes) -> RarPdu:
    r = _BitReader(_unframe(data, MSG_TYPE_RAR))
    if r.get(1) != 0:
        raise MalformedMessage("multiple RAR subPDUs are not supported")
    if r.get(1) != 1:
        raise MalformedMessage("backoff-indicator subheader where RAPID expected")
    rapid = r.get(RAPID_BITS)
    if r.get(1):
        raise MalformedMessage("reserved bit set")
    ta = r.get(TA_FIELD_BITS)
    grant = Msg3Grant(r.get(GRANT_FREQ_BITS), r.get(GRANT_TIME_BITS), r.get(GRANT_MCS_BITS))
    if r.get(RAR_RESERVED_BITS):
        raise MalformedMessage("reserved bits set")
    tc_rnti = r.get(TC_RNTI_BITS)
    r.finish()
    pdu = RarPdu(rapid, ta, grant, tc_rnti)
    pdu.validate()
    return pdu


def compute_ra_rnti(occ: RachOccasion, slots_per_frame: int = SLOTS_PER_FRAME,
                    freq_occasions: int = RACH_FREQ_OCCASIONS) -> int:
    occ.validate(slots_per_frame, freq_occasions)
    return 1 + occ.slot_index + slots_per_frame * occ.freq_index


def render(msg) -> str:
    """``field=value`` per line, nested dataclasses flattened with dots."""
    lines = []

    def walk(prefix, obj):
        for f in fields(obj):
            value = getattr(obj, f.name)
            key = f"{prefix}{f.name}"
            if hasattr(value, "__dataclass_fields__"):
                walk(key + ".", value)
            elif isinstance(value, tuple):
                lines.append(f"{key}={','.join(str(v) for v in value)}")
            elif isinstance(value, enum.Enum):
                lines.append(f"{key}={value.name}")
            else:
                lines.append(f"{key}={value}")

    walk("", msg)
    return "\n".join(lines)
