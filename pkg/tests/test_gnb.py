from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nrsim.codec import PlmnId, RachOccasion, SiWindowLength, Sib1Message, decode_rar, encode_rar, encode_sib1
from nrsim.errors import InvariantViolation
from nrsim.gnb import (
    TC_RNTI_START,
    AttackProfile,
    CellConfig,
    Gnb,
    Msg1,
    harvest_cell_config,
    next_sib1,
)
from nrsim.timing import ta_to_time

SIB1 = Sib1Message(value_tag=0, tracking_area_code=0x000101, si_window_length=SiWindowLength.MS10,
                   plmn_list=(PlmnId(1, 1),), cell_identity=0xABC001)
LEGIT = CellConfig(cell_id=1, sib1=SIB1, pci=101, tx_power_dbm=30.0)
MSG1 = Msg1(preamble_index=17, occasion=RachOccasion(2, 3), ue_id=1)


def rogue(attack=AttackProfile()):
    return replace(harvest_cell_config(LEGIT, 2, position_m=650.0), attack=attack)


class TestHarvest:
    def test_clone(self):
        r = harvest_cell_config(LEGIT, 2)
        assert r.sib1 == LEGIT.sib1
        assert r.cell_id == 2 and r.is_rogue
        assert r.tx_power_dbm == LEGIT.tx_power_dbm + 5
        assert encode_sib1(r.sib1) == encode_sib1(LEGIT.sib1)

    def test_deterministic(self):
        assert harvest_cell_config(LEGIT, 2) == harvest_cell_config(LEGIT, 2)
        a, b = harvest_cell_config(LEGIT, 2), harvest_cell_config(LEGIT, 3)
        assert replace(a, cell_id=0) == replace(b, cell_id=0)

    def test_needs_fresh_id(self):
        with pytest.raises(InvariantViolation):
            harvest_cell_config(LEGIT, 1)

    def test_legit_cell_cannot_attack(self):
        with pytest.raises(InvariantViolation):
            replace(LEGIT, attack=AttackProfile.ta_delta(30)).validate()


class TestNextSib1:
    def test_value_tag_25s(self):
        assert next_sib1(rogue(AttackProfile.value_tag_increment()), 25_000).value_tag == 2

    def test_value_tag_wrap(self):
        cell = rogue(AttackProfile.value_tag_increment())
        cell = replace(cell, sib1=replace(cell.sib1, value_tag=30))
        assert next_sib1(cell, 25_000).value_tag == 0

    def test_none_is_identity(self):
        for t in (0, 160, 99_999):
            assert next_sib1(LEGIT, t) == SIB1

    def test_tac_cycle_starts_at_first(self):
        cell = rogue(AttackProfile.tac_cycle((0x201, 0x202, 0x203)))
        assert [next_sib1(cell, t).tracking_area_code for t in (0, 30_000, 60_000, 90_000)] == \
            [0x201, 0x202, 0x203, 0x201]

    def test_si_window_per_broadcast(self):
        cell = rogue(AttackProfile.si_window_toggle())
        got = [next_sib1(cell, 160 * k).si_window_length for k in range(4)]
        assert got == [SiWindowLength.MS5, SiWindowLength.MS10, SiWindowLength.MS20, SiWindowLength.MS5]

    @given(st.integers(0, 10 ** 7))
    def test_only_tag_changes(self, t):
        out = next_sib1(rogue(AttackProfile.value_tag_increment()), t)
        assert replace(out, value_tag=0) == SIB1

    @given(st.integers(0, 10 ** 7))
    def test_pure(self, t):
        cell = rogue(AttackProfile.value_tag_increment())
        assert next_sib1(cell, t) == next_sib1(cell, t)


class TestAttackProfile:
    @pytest.mark.parametrize("bad", [
        AttackProfile.value_tag_increment(0),
        AttackProfile.tac_cycle(()),
        AttackProfile.ta_delta(3847),
        AttackProfile.si_window_toggle(()),
    ])
    def test_invalid(self, bad):
        with pytest.raises(InvariantViolation):
            bad.validate()


class TestPrach:
    def test_legit_quantization(self):
        d = Gnb(LEGIT).handle_prach(MSG1, 5.208)
        assert d.rar.ta_command == 10 and d.legit_ta == 10
        assert d.rar.rapid == 17
        assert d.ra_rnti == 1 + 2 + 14 * 3

    def test_delta_added(self):
        assert Gnb(rogue(AttackProfile.ta_delta(30))).handle_prach(MSG1, 5.208).rar.ta_command == 40

    def test_delta_clamped(self):
        assert Gnb(rogue(AttackProfile.ta_delta(3846))).handle_prach(MSG1, 5.208).rar.ta_command == 3846
        assert Gnb(rogue(AttackProfile.ta_delta(-60))).handle_prach(MSG1, 5.208).rar.ta_command == 0

    def test_zero_delta_is_identity(self):
        a = Gnb(rogue(AttackProfile.ta_delta(0))).handle_prach(MSG1, 12.3)
        b = Gnb(rogue()).handle_prach(MSG1, 12.3)
        assert a == b

    def test_tc_rnti_counter(self):
        g = Gnb(LEGIT)
        assert [g.handle_prach(MSG1, 0).rar.tc_rnti for _ in range(3)] == [TC_RNTI_START, TC_RNTI_START + 1,
                                                                           TC_RNTI_START + 2]

    @given(st.integers(-3846, 3846), st.floats(0, 2000))
    def test_rogue_rar_always_encodes(self, delta, rtt):
        rar = Gnb(rogue(AttackProfile.ta_delta(delta))).handle_prach(MSG1, rtt).rar
        assert decode_rar(encode_rar(rar)) == rar


class TestUplink:
    def test_zero_offset(self):
        assert Gnb(LEGIT).ul_receive(1, 0.0).ok

    def test_delta_20_fails(self):
        assert not Gnb(LEGIT).ul_receive(1, ta_to_time(20)).ok

    def test_delta_10_ok(self):
        assert Gnb(LEGIT).ul_receive(1, ta_to_time(10)).ok

    def test_scheduling_stops_after_limit(self):
        g = Gnb(replace(LEGIT, ul_failure_limit=3))
        g.handle_prach(MSG1, 0)
        verdicts = [g.ul_receive(1, 50.0) for _ in range(3)]
        assert [v.scheduling for v in verdicts] == [True, True, False]
        assert not g.is_scheduling(1)

    def test_msg3_does_not_count(self):
        g = Gnb(LEGIT)
        g.handle_prach(MSG1, 0)
        g.ul_receive(1, 50.0, channel="msg3")
        assert g.fail_streak[1] == 0

    def test_rogue_synthesizes_msg4(self):
        assert Gnb(rogue()).synthesizes_msg4
        assert not Gnb(LEGIT).synthesizes_msg4
