"""Victim UE: cell selection, SI handling, RACH, RLF detection and power accounting.

Operations mutate a :class:`UeContext` in place and return a list of
:class:`Action` records. The engine turns actions into log events and
schedules follow-ups; nothing here touches the clock or the event queue.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .codec import (
    RACH_FREQ_OCCASIONS,
    RachConfigCommon,
    RachOccasion,
    RarPdu,
    SiWindowLength,
    Sib1Message,
    compute_ra_rnti,
)
from .errors import ContentionLost, NoCellAvailable, NotCamped, PreconditionViolated
from .timing import TaState, apply_rar_ta

DEFAULT_RSRP_FLOOR_DBM = -120.0
CONTENTION_RESOLUTION_TIMER_MS = 64
RACH_BACKOFF_MS = 20
PREAMBLE_TRANS_MAX = 10
MSG3_DELAY_MS = 3
REESTABLISH_DELAY_MS = 100


class RrcState(enum.Enum):
    IDLE = "idle"
    INACTIVE = "inactive"
    CONNECTED = "connected"


class RegistrationPolicy(enum.Enum):
    EAGER = "eager"
    DEFERRED = "deferred"


class SiCachePolicy(enum.Enum):
    REFRESH_BEFORE_USE = "refresh_before_use"
    STALE_CACHE = "stale_cache"


@dataclass
class CachedSi:
    value_tag: int
    tracking_area_code: int
    si_window_length: SiWindowLength
    acquired_at: int
    cell_id: int | None = None
    rach_config: RachConfigCommon = RachConfigCommon()

    @classmethod
    def from_sib1(cls, sib1: Sib1Message, now: int, cell_id=None) -> "CachedSi":
        return cls(sib1.value_tag, sib1.tracking_area_code, sib1.si_window_length, now, cell_id,
                   sib1.rach_config)


@dataclass
class SyncMonitor:
    n310_threshold: int = 10
    n311_threshold: int = 1
    t310_ms: int = 10_000
    sync_eval_period_ms: int = 1000
    n310_count: int = 0
    n311_count: int = 0
    t310_deadline: int | None = None

    @property
    def t310_running(self) -> bool:
        return self.t310_deadline is not None

    def reset(self):
        self.n310_count = 0
        self.n311_count = 0
        self.t310_deadline = None


@dataclass
class PowerAccumulator:
    """Receiver-on time under a DRX model.

    Idle time costs ``paging_wake_ms`` per ``paging_cycle_ms``; every SI
    acquisition costs a flat ``si_acq_active_ms``; time spent in RACH or
    CONNECTED counts in full.
    """

    paging_cycle_ms: int = 1280
    paging_wake_ms: int = 4
    si_acq_active_ms: int = 320
    idle_ms: int = 0
    radio_active_ms: int = 0
    si_acquisitions: int = 0
    active_since: int | None = None
    last_update: int = 0

    def advance(self, now: int):
        elapsed = now - self.last_update
        if elapsed < 0:
            raise PreconditionViolated("power accounting clock went backwards")
        if self.active_since is None:
            self.idle_ms += elapsed
        else:
            self.radio_active_ms += elapsed
        self.last_update = now

    def begin_active(self, now: int):
        if self.active_since is None:
            self.advance(now)
            self.active_since = now

    def end_active(self, now: int):
        if self.active_since is not None:
            self.advance(now)
            self.active_since = None

    @property
    def total_ms(self) -> int:
        return self.idle_ms + self.radio_active_ms

    @property
    def active_rx_ms(self) -> float:
        return duty_active_ms(self.idle_ms, self.radio_active_ms, self.si_acquisitions,
                              self.paging_cycle_ms, self.paging_wake_ms, self.si_acq_active_ms)


def duty_active_ms(idle_ms, radio_active_ms, si_acquisitions, paging_cycle_ms, paging_wake_ms, si_acq_active_ms):
    # shared with metrics recomputation so both paths round identically
    return idle_ms * paging_wake_ms / paging_cycle_ms + si_acquisitions * si_acq_active_ms + radio_active_ms


@dataclass
class UePolicy:
    registration: RegistrationPolicy = RegistrationPolicy.DEFERRED
    si_cache: SiCachePolicy = SiCachePolicy.REFRESH_BEFORE_USE
    blacklist_on_rlf: bool = False


@dataclass
class RachProcedure:
    cause: str  # "setup" or "reestablishment"
    cell_id: int
    attempt: int = 0
    preamble_index: int | None = None
    occasion: RachOccasion | None = None
    occasion_time: int | None = None
    ra_rnti: int | None = None
    window_end: int | None = None
    tc_rnti: int | None = None
    msg3_sent_at: int | None = None
    stage: str = "msg1"  # msg1 -> msg3


@dataclass
class Msg3:
    kind: str  # "rrc_setup_request" / "rrc_reestablishment_request"
    tc_rnti: int
    identity: int
    send_at: int


@dataclass
class Action:
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass
class UeContext:
    ue_id: int
    position_m: float = 0.0
    rrc_state: RrcState = RrcState.IDLE
    serving_cell: int | None = None
    cached_si: CachedSi | None = None
    latest_si_window: SiWindowLength | None = None
    ta_state: TaState = field(default_factory=TaState)
    sync: SyncMonitor = field(default_factory=SyncMonitor)
    policy: UePolicy = field(default_factory=UePolicy)
    power: PowerAccumulator = field(default_factory=PowerAccumulator)
    rach: RachProcedure | None = None
    rng: random.Random = field(default_factory=lambda: random.Random(0))
    identity: int = 0
    rsrp_floor_dbm: float = DEFAULT_RSRP_FLOOR_DBM
    blacklist: set = field(default_factory=set)
    connected_at: int | None = None

    @property
    def camped(self) -> bool:
        return self.serving_cell is not None and self.cached_si is not None


def select_cell(ctx: UeContext, measurements: dict) -> int:
    if not measurements:
        raise PreconditionViolated("no measurements")
    best = None
    for cell_id in sorted(measurements):
        if cell_id in ctx.blacklist:
            continue
        level = measurements[cell_id]
        if level < ctx.rsrp_floor_dbm:
            continue
        if best is None or level > measurements[best]:
            best = cell_id
    if best is None:
        raise NoCellAvailable(f"no cell above {ctx.rsrp_floor_dbm} dBm")
    return best


def camp(ctx: UeContext, cell_id: int):
    if cell_id != ctx.serving_cell:
        ctx.serving_cell = cell_id
        ctx.cached_si = None
        ctx.latest_si_window = None


def handle_sib1(ctx: UeContext, sib1: Sib1Message, now: int) -> list[Action]:
    if ctx.rrc_state is RrcState.CONNECTED:
        raise PreconditionViolated("connected UEs do not monitor SIB1 here")
    if ctx.serving_cell is None:
        raise NotCamped(f"ue{ctx.ue_id} has no serving cell")
    ctx.latest_si_window = sib1.si_window_length
    cached = ctx.cached_si
    if cached is None:
        ctx.cached_si = CachedSi.from_sib1(sib1, now, ctx.serving_cell)
        ctx.power.si_acquisitions += 1
        return [Action("SI_REACQUISITION", {"cause": "initial", "value_tag": sib1.value_tag})]

    actions = []
    if cached.value_tag != sib1.value_tag:
        ctx.cached_si = CachedSi.from_sib1(sib1, now, ctx.serving_cell)
        ctx.power.si_acquisitions += 1
        actions.append(Action("SI_REACQUISITION", {
            "cause": "value_tag", "old_tag": cached.value_tag, "value_tag": sib1.value_tag}))
    if cached.tracking_area_code != sib1.tracking_area_code:
        ctx.cached_si.tracking_area_code = sib1.tracking_area_code
        payload = {"old_tac": cached.tracking_area_code, "tac": sib1.tracking_area_code}
        if ctx.policy.registration is RegistrationPolicy.EAGER:
            actions.append(Action("REGISTRATION_REQUEST", payload))
        else:
            actions.append(Action("TAC_MISMATCH_OBSERVED", payload))
    return actions


def compute_si_monitoring_occasions(si, period_start: int, count: int) -> list[tuple[int, int]]:
    """Consecutive half-open windows ``[start, end)`` of the SI window length."""
    if count < 1:
        raise PreconditionViolated("count must be >= 1")
    window = si.si_window_length if isinstance(si, CachedSi) else si
    w = window.ms if isinstance(window, SiWindowLength) else int(window)
    return [(period_start + k * w, period_start + (k + 1) * w) for k in range(count)]


def check_si_window(ctx: UeContext, actual: SiWindowLength, now: int, si_index: int = 1) -> list[Action]:
    """Acquire the ``si_index``-th SI message; report a miss when the UE's
    computed window is not the one the cell actually uses."""
    if ctx.cached_si is None:
        return []
    if ctx.policy.si_cache is SiCachePolicy.REFRESH_BEFORE_USE and ctx.latest_si_window is not None:
        used = ctx.latest_si_window
    else:
        used = ctx.cached_si.si_window_length
    mine = compute_si_monitoring_occasions(used, now, si_index + 1)[si_index]
    real = compute_si_monitoring_occasions(actual, now, si_index + 1)[si_index]
    if mine != real:
        return [Action("MISSED_SI", {"used_ms": used.ms, "actual_ms": actual.ms,
                                     "window": f"{mine[0]}-{mine[1]}", "actual_window": f"{real[0]}-{real[1]}"})]
    return []


def next_rach_occasion(ctx: UeContext, now: int) -> tuple[int, RachOccasion]:
    period = ctx.cached_si.rach_config.prach_periodicity_ms
    at = -(-now // period) * period
    occ = RachOccasion(slot_index=at % 10, freq_index=ctx.rng.randrange(RACH_FREQ_OCCASIONS),
                       frame_number=(at // 10) % 1024)
    return at, occ


@dataclass
class Msg1Tx:
    preamble_index: int
    occasion: RachOccasion
    at: int
    ra_rnti: int
    attempt: int


def start_rach(ctx: UeContext, cause: str, now: int):
    if not ctx.camped:
        raise NotCamped(f"ue{ctx.ue_id} cannot start RACH without a camped cell")
    if ctx.rach is not None:
        raise PreconditionViolated("RACH already in progress")
    ctx.rach = RachProcedure(cause=cause, cell_id=ctx.serving_cell)
    ctx.power.begin_active(now)


def rach_initiate(ctx: UeContext, occ: RachOccasion, now: int, cause: str = "setup") -> Msg1Tx:
    if not ctx.camped:
        raise NotCamped(f"ue{ctx.ue_id} cannot start RACH without a camped cell")
    if ctx.rach is None:
        start_rach(ctx, cause, now)
    proc = ctx.rach
    if proc.stage != "msg1" or proc.preamble_index is not None:
        raise PreconditionViolated("a preamble is already awaiting its RAR")
    proc.attempt += 1
    proc.preamble_index = ctx.rng.randrange(64)
    proc.occasion = occ
    proc.occasion_time = now
    proc.ra_rnti = compute_ra_rnti(occ)
    proc.window_end = now + ctx.cached_si.rach_config.ra_response_window_ms
    return Msg1Tx(proc.preamble_index, occ, now, proc.ra_rnti, proc.attempt)


def rach_attempt_failed(ctx: UeContext, now: int, reason: str) -> list[Action]:
    """No usable RAR in the window, or contention resolution failed."""
    proc = ctx.rach
    if proc is None:
        return []
    final = proc.attempt >= PREAMBLE_TRANS_MAX
    actions = [Action("RACH_FAILURE", {"reason": reason, "attempt": proc.attempt, "final": int(final)})]
    if final:
        ctx.rach = None
        ctx.rrc_state = RrcState.IDLE
        ctx.power.end_active(now)
    else:
        proc.stage = "msg1"
        proc.preamble_index = None
        proc.window_end = None
        proc.tc_rnti = None
        proc.msg3_sent_at = None
        actions.append(Action("RACH_RETRY", {"at": now + RACH_BACKOFF_MS}))
    return actions


def handle_rar(ctx: UeContext, rar: RarPdu, now: int, ra_rnti: int | None = None) -> Msg3 | None:
    proc = ctx.rach
    if proc is None or proc.stage != "msg1" or proc.preamble_index is None:
        return None
    if proc.window_end is not None and now > proc.window_end:
        return None
    if ra_rnti is not None and ra_rnti != proc.ra_rnti:
        return None
    if rar.rapid != proc.preamble_index:
        return None
    ctx.ta_state = apply_rar_ta(ctx.ta_state, rar.ta_command)
    proc.tc_rnti = rar.tc_rnti
    proc.stage = "msg3"
    proc.msg3_sent_at = now + MSG3_DELAY_MS
    kind = "rrc_reestablishment_request" if proc.cause == "reestablishment" else "rrc_setup_request"
    return Msg3(kind, rar.tc_rnti, ctx.identity, proc.msg3_sent_at)


def handle_contention_resolution(ctx: UeContext, identity: int, now: int) -> UeContext:
    proc = ctx.rach
    if proc is None or proc.stage != "msg3":
        raise PreconditionViolated("no Msg3 outstanding")
    if identity != ctx.identity:
        raise ContentionLost(f"Msg4 identity {identity:#x} != {ctx.identity:#x}")
    ctx.rrc_state = RrcState.CONNECTED
    ctx.rach = None
    ctx.sync.reset()
    ctx.connected_at = now
    return ctx


def on_sync_indication(ctx: UeContext, in_sync: bool, now: int) -> list[Action]:
    if ctx.rrc_state is not RrcState.CONNECTED:
        raise PreconditionViolated("sync indications only apply while connected")
    s = ctx.sync
    if in_sync:
        s.n310_count = 0
        if s.t310_running:
            s.n311_count += 1
            if s.n311_count >= s.n311_threshold:
                s.t310_deadline = None
                s.n311_count = 0
                return [Action("T310_STOPPED")]
        return []
    s.n311_count = 0
    if s.t310_running:
        return []
    s.n310_count += 1
    if s.n310_count >= s.n310_threshold:
        s.n310_count = 0
        s.t310_deadline = now + s.t310_ms
        return [Action("T310_STARTED", {"deadline": s.t310_deadline})]
    return []


def on_t310_expiry(ctx: UeContext, now: int, measurements: dict) -> list[Action]:
    """Declare RLF and pick the cell for re-establishment."""
    s = ctx.sync
    if ctx.rrc_state is not RrcState.CONNECTED or s.t310_deadline is None or now < s.t310_deadline:
        return []
    failed_cell = ctx.serving_cell
    connected_for = now - ctx.connected_at if ctx.connected_at is not None else 0
    s.reset()
    ctx.rrc_state = RrcState.IDLE
    ctx.connected_at = None
    ctx.power.end_active(now)
    actions = [Action("RLF", {"cell": failed_cell, "connected_ms": connected_for})]
    if ctx.policy.blacklist_on_rlf and failed_cell is not None:
        ctx.blacklist.add(failed_cell)
    try:
        target = select_cell(ctx, measurements)
    except (NoCellAvailable, PreconditionViolated):
        actions.append(Action("NO_CELL"))
        ctx.serving_cell = None
        ctx.cached_si = None
        return actions
    camp(ctx, target)
    actions.append(Action("REESTABLISH_REQ", {"cell": target}))
    return actions


def account_power(ctx: UeContext, now: int) -> float:
    ctx.power.advance(now)
    if ctx.power.total_ms <= 0:
        raise PreconditionViolated("no elapsed time to account")
    return ctx.power.active_rx_ms / ctx.power.total_ms
