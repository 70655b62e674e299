import functools

from hypothesis import strategies as st

from nrsim.codec import Msg3Grant, PlmnId, RachConfigCommon, RarPdu, SiWindowLength, Sib1Message
from nrsim.runner import run_scenario
from nrsim.scenario import load_builtin


@st.composite
def plmns(draw):
    mnc_length = draw(st.sampled_from([2, 3]))
    return PlmnId(draw(st.integers(0, 999)), draw(st.integers(0, 10 ** mnc_length - 1)), mnc_length)


rach_configs = st.builds(
    RachConfigCommon,
    preamble_format_id=st.integers(0, 255),
    ra_response_window_ms=st.integers(1, 255),
    power_ramping_step_db=st.integers(0, 255),
    preamble_target_power_dbm=st.integers(-32768, 32767),
    prach_periodicity_ms=st.integers(1, 0xFFFF),
)

sib1s = st.builds(
    Sib1Message,
    value_tag=st.integers(0, 31),
    tracking_area_code=st.integers(0, 2 ** 24 - 1),
    si_window_length=st.sampled_from(list(SiWindowLength)),
    plmn_list=st.lists(plmns(), min_size=1, max_size=15).map(tuple),
    cell_identity=st.integers(0, 2 ** 36 - 1),
    cell_barred=st.booleans(),
    rach_config=rach_configs,
    sib1_periodicity_ms=st.integers(1, 0xFFFF),
)

rars = st.builds(
    RarPdu,
    rapid=st.integers(0, 63),
    ta_command=st.integers(0, 3846),
    msg3_grant=st.builds(Msg3Grant, st.integers(0, 2 ** 14 - 1), st.integers(0, 15), st.integers(0, 15)),
    tc_rnti=st.integers(0, 0xFFFF),
)


@functools.lru_cache(maxsize=None)
def builtin_run(name, seed=None):
    """Shared across test modules; runs are deterministic so caching is safe."""
    return run_scenario(load_builtin(name), seed)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
