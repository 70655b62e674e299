import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rars, sib1s
from nrsim.codec import (
    Msg3Grant,
    PlmnId,
    RachConfigCommon,
    RachOccasion,
    RarPdu,
    SiWindowLength,
    Sib1Message,
    compute_ra_rnti,
    decode_rar,
    decode_sib1,
    encode_rar,
    encode_sib1,
    render,
)
from nrsim.errors import InvariantViolation, MalformedMessage


def bits(value, width):
    return format(value, f"0{width}b")


def frame(msg_type, bitstring):
    # independent reference framing: pad to octets, prefix type and length
    bitstring += "0" * (-len(bitstring) % 8)
    payload = int(bitstring, 2).to_bytes(len(bitstring) // 8, "big") if bitstring else b""
    return bytes([msg_type]) + len(payload).to_bytes(2, "big") + payload


def reference_rar(p: RarPdu) -> bytes:
    g = p.msg3_grant
    s = "0" + "1" + bits(p.rapid, 6) + "0" + bits(p.ta_command, 12) + bits(g.freq_assign, 14) \
        + bits(g.time_assign, 4) + bits(g.mcs, 4) + "00000" + bits(p.tc_rnti, 16)
    return frame(0x02, s)


def reference_sib1(m: Sib1Message) -> bytes:
    order = [SiWindowLength.MS5, SiWindowLength.MS10, SiWindowLength.MS15, SiWindowLength.MS20]
    rc = m.rach_config
    s = bits(m.value_tag, 5) + bits(m.tracking_area_code, 24) + bits(order.index(m.si_window_length), 2) \
        + bits(m.cell_identity, 36) + ("1" if m.cell_barred else "0") + bits(m.sib1_periodicity_ms, 16) \
        + bits(rc.preamble_format_id, 8) + bits(rc.ra_response_window_ms, 8) + bits(rc.power_ramping_step_db, 8) \
        + bits(rc.preamble_target_power_dbm % 65536, 16) + bits(rc.prach_periodicity_ms, 16) \
        + bits(len(m.plmn_list), 4)
    for p in m.plmn_list:
        s += "".join(bits(int(d), 4) for d in f"{p.mcc:03d}")
        s += "1" if p.mnc_length == 3 else "0"
        digits = [int(d) for d in f"{p.mnc:0{p.mnc_length}d}"] + [15] * (3 - p.mnc_length)
        s += "".join(bits(d, 4) for d in digits)
    return frame(0x01, s)


def minimal_sib1(**kw):
    base = dict(value_tag=0, tracking_area_code=0, si_window_length=SiWindowLength.MS5,
                plmn_list=(PlmnId(1, 1),))
    base.update(kw)
    return Sib1Message(**base)


class TestSib1:
    def test_minimum_fields_roundtrip(self):
        m = minimal_sib1()
        assert decode_sib1(encode_sib1(m)) == m

    def test_maximum_tag_and_tac(self):
        m = minimal_sib1(value_tag=31, tracking_area_code=2 ** 24 - 1)
        back = decode_sib1(encode_sib1(m))
        assert back.value_tag == 31
        assert back.tracking_area_code == 2 ** 24 - 1

    def test_deterministic(self):
        m = minimal_sib1(value_tag=7)
        assert encode_sib1(m) == encode_sib1(minimal_sib1(value_tag=7))

    @pytest.mark.parametrize("field,value", [
        ("value_tag", 32), ("value_tag", -1), ("tracking_area_code", 2 ** 24),
        ("cell_identity", 2 ** 36), ("plmn_list", ()),
    ])
    def test_out_of_range_rejected(self, field, value):
        with pytest.raises(InvariantViolation):
            encode_sib1(minimal_sib1(**{field: value}))

    def test_bad_plmn_rejected(self):
        with pytest.raises(InvariantViolation):
            encode_sib1(minimal_sib1(plmn_list=(PlmnId(1000, 1),)))
        with pytest.raises(InvariantViolation):
            encode_sib1(minimal_sib1(plmn_list=(PlmnId(1, 100, 2),)))

    def test_three_digit_mnc_keeps_leading_zero(self):
        m = minimal_sib1(plmn_list=(PlmnId(310, 12, 3), PlmnId(1, 1, 2)))
        back = decode_sib1(encode_sib1(m))
        assert back.plmn_list == m.plmn_list
        assert str(back.plmn_list[0]) == "310-012"

    def test_empty_input(self):
        with pytest.raises(MalformedMessage):
            decode_sib1(b"")

    def test_not_bytes(self):
        with pytest.raises(MalformedMessage):
            decode_sib1("0100")

    def test_wrong_type_octet(self):
        data = bytearray(encode_sib1(minimal_sib1()))
        data[0] = 0x02
        with pytest.raises(MalformedMessage):
            decode_sib1(bytes(data))

    @pytest.mark.parametrize("bit", range(16))
    def test_length_field_bit_flip(self, bit):
        data = bytearray(encode_sib1(minimal_sib1()))
        data[1 + bit // 8] ^= 0x80 >> (bit % 8)
        with pytest.raises(MalformedMessage):
            decode_sib1(bytes(data))

    def test_truncated(self):
        data = encode_sib1(minimal_sib1())
        with pytest.raises(MalformedMessage):
            decode_sib1(data[:-1])

    def test_nonzero_padding_rejected(self):
        data = bytearray(encode_sib1(minimal_sib1()))
        data[-1] |= 0x01
        with pytest.raises(MalformedMessage):
            decode_sib1(bytes(data))

    @settings(max_examples=300)
    @given(sib1s)
    def test_matches_reference_layout(self, m):
        assert encode_sib1(m) == reference_sib1(m)

    @settings(max_examples=300)
    @given(sib1s)
    def test_roundtrip(self, m):
        assert decode_sib1(encode_sib1(m)) == m

    def test_render(self):
        text = render(minimal_sib1(value_tag=4))
        assert "value_tag=4" in text
        assert "si_window_length=MS5" in text
        assert "rach_config.prach_periodicity_ms=10" in text


class TestRar:
    def test_zero_roundtrip(self):
        p = RarPdu(rapid=0, ta_command=0)
        assert decode_rar(encode_rar(p)) == p

    def test_max_ta(self):
        p = RarPdu(rapid=63, ta_command=3846, msg3_grant=Msg3Grant(2 ** 14 - 1, 15, 15), tc_rnti=0xFFFF)
        assert decode_rar(encode_rar(p)) == p

    def test_ta_3847_rejected(self):
        with pytest.raises(InvariantViolation):
            encode_rar(RarPdu(rapid=0, ta_command=3847))

    @pytest.mark.parametrize("ta", [3847, 4000, 4095])
    def test_crafted_wire_ta_rejected(self, ta):
        # the reference encoder does no range checking, so it can forge the field
        raw = reference_rar(RarPdu(rapid=5, ta_command=ta))
        with pytest.raises(InvariantViolation):
            decode_rar(raw)

    @pytest.mark.parametrize("rapid", [-1, 64])
    def test_rapid_width(self, rapid):
        with pytest.raises(InvariantViolation):
            encode_rar(RarPdu(rapid=rapid, ta_command=0))

    def test_subheader_bits(self):
        data = encode_rar(RarPdu(rapid=0b101010, ta_command=0))
        assert data[3] == 0b01101010

    def test_empty(self):
        with pytest.raises(MalformedMessage):
            decode_rar(b"")

    def test_reserved_bits_rejected(self):
        data = bytearray(encode_rar(RarPdu(rapid=1, ta_command=1)))
        data[4] |= 0x80
        with pytest.raises(MalformedMessage):
            decode_rar(bytes(data))

    @settings(max_examples=300)
    @given(rars)
    def test_matches_reference_layout(self, p):
        assert encode_rar(p) == reference_rar(p)

    @settings(max_examples=300)
    @given(rars)
    def test_roundtrip(self, p):
        assert decode_rar(encode_rar(p)) == p


class TestFuzz:
    @settings(max_examples=500)
    @given(st.binary(max_size=64))
    def test_arbitrary_bytes_never_crash(self, data):
        for decode in (decode_sib1, decode_rar):
            try:
                decode(data)
            except (MalformedMessage, InvariantViolation):
                pass

    @settings(max_examples=200)
    @given(sib1s, st.data())
    def test_sib1_bit_flip(self, m, data):
        raw = bytearray(encode_sib1(m))
        bit = data.draw(st.integers(0, len(raw) * 8 - 1))
        raw[bit // 8] ^= 0x80 >> (bit % 8)
        try:
            decode_sib1(bytes(raw))
        except (MalformedMessage, InvariantViolation):
            pass


class TestRaRnti:
    def test_origin(self):
        assert compute_ra_rnti(RachOccasion(0, 0, 0)) == 1

    def test_freq_distinguishes(self):
        assert compute_ra_rnti(RachOccasion(3, 0)) != compute_ra_rnti(RachOccasion(3, 1))

    def test_exhaustive_grid_injective(self):
        values = {compute_ra_rnti(RachOccasion(s, f)) for s in range(14) for f in range(8)}
        assert len(values) == 112
        assert all(1 <= v <= 65519 for v in values)

    def test_frame_does_not_matter(self):
        assert compute_ra_rnti(RachOccasion(2, 3, 0)) == compute_ra_rnti(RachOccasion(2, 3, 1023))

    @pytest.mark.parametrize("occ", [RachOccasion(14, 0), RachOccasion(0, 8), RachOccasion(-1, 0)])
    def test_out_of_grid(self, occ):
        with pytest.raises(InvariantViolation):
            compute_ra_rnti(occ)


def test_rach_config_validation():
    with pytest.raises(InvariantViolation):
        RachConfigCommon(prach_periodicity_ms=0).validate()


def test_si_window_parse():
    assert SiWindowLength.parse("ms20") is SiWindowLength.MS20
    assert SiWindowLength.MS15.ms == 15
    with pytest.raises(ValueError):
        SiWindowLength.parse("ms7")
