"""Scenario execution: wires cells, UEs, the radio model and detectors onto the event loop."""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from .codec import decode_rar, decode_sib1, encode_rar, encode_sib1
from .detectors import TaRsrpSample, ValueTagRateMonitor, ta_rsrp_check
from .engine import Simulator
from .errors import ContentionLost, NoCellAvailable
from .eventlog import EventLog
from .gnb import MSG4_DELAY_MS, RAR_DELAY_MS, Gnb, Msg1
from .metrics import Metrics, compute_metrics
from .radio import PathlossModel, propagation_delay, rsrp
from .scenario import Scenario
from .timing import CpTolerance, Numerology, TaState, uplink_arrival_offset
from .ue import (
    CONTENTION_RESOLUTION_TIMER_MS,
    REESTABLISH_DELAY_MS,
    PowerAccumulator,
    RrcState,
    SyncMonitor,
    UeContext,
    UePolicy,
    camp,
    check_si_window,
    handle_contention_resolution,
    handle_rar,
    handle_sib1,
    next_rach_occasion,
    on_sync_indication,
    on_t310_expiry,
    rach_attempt_failed,
    rach_initiate,
    select_cell,
    start_rach,
)

log = logging.getLogger(__name__)

CELL_RETRY_MS = 1000


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    log: EventLog
    metrics: Metrics
    ues: dict


def _ue(ue_id):
    return f"ue{ue_id}"


def _cell(cell_id):
    return f"cell{cell_id}"


class _Run:
    def __init__(self, scn: Scenario, seed: int):
        self.scn = scn
        self.seed = seed
        self.sim = Simulator()
        self.log = EventLog()
        self.numerology = Numerology(scn.timing.mu)
        bq = scn.timing.base_quantum_us
        tol = CpTolerance.from_units(scn.timing.cp_tolerance_units, self.numerology, bq)
        self.pathloss = PathlossModel(scn.environment.pathloss_exponent, scn.environment.pathloss_ref_db)
        self.cells = {c.cell_id: Gnb(c, self.numerology, bq, tol) for c in scn.cells}
        self.prev_broadcast = {}
        self.tx_power = {c.cell_id: c.tx_power_dbm for c in scn.cells}
        self.ues: dict[int, UeContext] = {}
        self.specs = {}
        self.pending = {}
        self.vt_monitors = {}
        master = random.Random(seed)
        for spec in scn.ues:
            rng = random.Random(master.getrandbits(64))
            self.ues[spec.ue_id] = UeContext(
                ue_id=spec.ue_id,
                position_m=spec.position_m,
                ta_state=TaState(0.0, self.numerology, bq),
                sync=SyncMonitor(spec.n310, spec.n311, spec.t310_ms, spec.sync_eval_ms),
                policy=UePolicy(spec.registration, spec.si_cache, spec.blacklist_on_rlf),
                power=PowerAccumulator(spec.paging_cycle_ms, spec.paging_wake_ms, spec.si_acq_ms),
                rng=rng,
                identity=rng.getrandbits(48),
                rsrp_floor_dbm=scn.environment.rsrp_floor_dbm,
            )
            self.specs[spec.ue_id] = spec
            self.pending[spec.ue_id] = None
            if scn.detectors.valuetag_rate:
                self.vt_monitors[spec.ue_id] = ValueTagRateMonitor(
                    scn.detectors.valuetag_window_ms, scn.detectors.valuetag_max_updates)

    # -- helpers ---------------------------------------------------------
    @property
    def now(self):
        return self.sim.now

    def emit(self, kind, subject, **payload):
        ev = self.log.emit(self.now, kind, subject, **payload)
        log.debug("%s", ev.to_line())
        return ev

    def distance(self, ctx: UeContext, gnb: Gnb) -> float:
        return abs(ctx.position_m - gnb.config.position_m)

    def measure(self, ctx: UeContext) -> dict:
        return {cid: rsrp(g.config.tx_power_dbm, self.distance(ctx, g), self.pathloss)
                for cid, g in self.cells.items() if g.config.is_active(self.now)}

    # -- run -------------------------------------------------------------
    def run(self) -> RunResult:
        scn = self.scn
        self.emit("SCENARIO_START", "sim", name=scn.name, duration_ms=scn.duration_ms, seed=self.seed)
        for ue_id in sorted(self.ues):
            self.sim.schedule(0, self.power_on, self.ues[ue_id])
        for cid in sorted(self.cells):
            cfg = self.cells[cid].config
            period = cfg.sib1.sib1_periodicity_ms
            self.sim.schedule(-(-cfg.active_from_ms // period) * period, self.broadcast, self.cells[cid])
            if cfg.active_until_ms is not None:
                self.sim.schedule(cfg.active_until_ms, self.cell_off, self.cells[cid])
        self.sim.run(scn.duration_ms)
        for ctx in self.ues.values():
            ctx.power.advance(scn.duration_ms)
        self.emit("SCENARIO_END", "sim")
        return RunResult(scn, self.seed, self.log, compute_metrics(self.log.events), self.ues)

    # -- cell side -------------------------------------------------------
    def broadcast(self, gnb: Gnb):
        cfg = gnb.config
        if not cfg.is_active(self.now):
            return
        sib1 = gnb.broadcast(self.now)
        data = encode_sib1(sib1)
        if self.prev_broadcast.get(cfg.cell_id) != sib1:
            self.prev_broadcast[cfg.cell_id] = sib1
            self.emit("BROADCAST", _cell(cfg.cell_id), value_tag=sib1.value_tag,
                      tac=sib1.tracking_area_code, si_window_ms=sib1.si_window_length.ms)
        for ue_id in sorted(self.ues):
            ctx = self.ues[ue_id]
            if ctx.serving_cell == cfg.cell_id and ctx.rrc_state is not RrcState.CONNECTED:
                self.deliver_sib1(ctx, data)
        self.sim.after(sib1.sib1_periodicity_ms, self.broadcast, gnb)

    def cell_off(self, gnb: Gnb):
        for ue_id in sorted(self.ues):
            ctx = self.ues[ue_id]
            if ctx.serving_cell == gnb.cell_id and ctx.rrc_state is not RrcState.CONNECTED and ctx.rach is None:
                ctx.serving_cell = None
                ctx.cached_si = None
                self.select_and_camp(ctx)

    # -- UE side ---------------------------------------------------------
    def power_on(self, ctx: UeContext):
        spec = self.specs[ctx.ue_id]
        ctx.power.last_update = self.now
        self.emit("UE_POWER_ON", _ue(ctx.ue_id), position_m=float(ctx.position_m),
                  paging_cycle_ms=spec.paging_cycle_ms, paging_wake_ms=spec.paging_wake_ms,
                  si_acq_ms=spec.si_acq_ms)
        self.select_and_camp(ctx)
        self.sim.after(spec.osi_period_ms, self.osi_check, ctx)
        if spec.connect_at_ms is not None:
            self.sim.schedule(max(spec.connect_at_ms, self.now), self.connect, ctx)

    def select_and_camp(self, ctx: UeContext):
        meas = self.measure(ctx)
        try:
            if not meas:
                raise NoCellAvailable("no active cell")
            target = select_cell(ctx, meas)
        except NoCellAvailable:
            self.emit("NO_CELL", _ue(ctx.ue_id))
            self.sim.after(CELL_RETRY_MS, self.retry_selection, ctx)
            return
        camp(ctx, target)
        self.emit("CELL_SELECTED", _ue(ctx.ue_id), cell=target, rsrp_dbm=meas[target])

    def retry_selection(self, ctx: UeContext):
        if ctx.serving_cell is None:
            self.select_and_camp(ctx)

    def deliver_sib1(self, ctx: UeContext, data: bytes):
        sib1 = decode_sib1(data)
        subject = _ue(ctx.ue_id)
        for a in handle_sib1(ctx, sib1, self.now):
            if a.kind == "SI_REACQUISITION":
                self.emit(a.kind, subject, cell=ctx.serving_cell, **a.payload, sib1=data.hex())
            else:
                self.emit(a.kind, subject, cell=ctx.serving_cell, **a.payload)
        monitor = self.vt_monitors.get(ctx.ue_id)
        if monitor is not None:
            verdict = monitor.observe(self.now, sib1.value_tag)
            if verdict is not None:
                self.emit("DETECTOR_ALERT", subject, detector="valuetag_rate", cell=ctx.serving_cell,
                          score=verdict.score, reason=verdict.reason)
        cause = self.pending[ctx.ue_id]
        if cause is not None and ctx.camped and ctx.rach is None:
            self.pending[ctx.ue_id] = None
            self.begin_rach(ctx, cause)

    def osi_check(self, ctx: UeContext):
        if ctx.rrc_state is not RrcState.CONNECTED and ctx.camped:
            gnb = self.cells[ctx.serving_cell]
            if gnb.config.is_active(self.now) and gnb.last_sib1 is not None:
                for a in check_si_window(ctx, gnb.last_sib1.si_window_length, self.now):
                    self.emit(a.kind, _ue(ctx.ue_id), cell=ctx.serving_cell, **a.payload)
        self.sim.after(self.specs[ctx.ue_id].osi_period_ms, self.osi_check, ctx)

    def connect(self, ctx: UeContext):
        if ctx.rrc_state is RrcState.CONNECTED or ctx.rach is not None:
            return
        if not ctx.camped:
            self.pending[ctx.ue_id] = "setup"
            return
        self.begin_rach(ctx, "setup")

    def begin_rach(self, ctx: UeContext, cause: str):
        at, occ = next_rach_occasion(ctx, self.now)
        self.sim.schedule(at, self.send_msg1, ctx, cause, occ)

    def send_msg1(self, ctx: UeContext, cause: str, occ):
        if ctx.rrc_state is RrcState.CONNECTED:
            return
        if not ctx.camped:
            self.pending[ctx.ue_id] = cause
            return
        if ctx.rach is None:
            start_rach(ctx, cause, self.now)
        proc = ctx.rach
        msg1 = rach_initiate(ctx, occ, self.now, proc.cause)
        rc = ctx.cached_si.rach_config
        self.emit("RACH_ATTEMPT", _ue(ctx.ue_id), cell=proc.cell_id, cause=proc.cause, attempt=msg1.attempt,
                  preamble=msg1.preamble_index, ra_rnti=msg1.ra_rnti,
                  tx_power_dbm=rc.preamble_target_power_dbm + (msg1.attempt - 1) * rc.power_ramping_step_db)
        self.sim.schedule(proc.window_end, self.rar_window_end, ctx, proc, proc.attempt)
        gnb = self.cells[proc.cell_id]
        if not gnb.config.is_active(self.now):
            return
        one_way = propagation_delay(self.distance(ctx, gnb))
        decision = gnb.handle_prach(Msg1(msg1.preamble_index, occ, ctx.ue_id), 2.0 * one_way)
        self.emit("PRACH_DETECTED", _cell(gnb.cell_id), ue=ctx.ue_id, preamble=msg1.preamble_index,
                  measured_ta=decision.legit_ta)
        self.sim.after(RAR_DELAY_MS, self.send_rar, gnb, ctx, decision)

    def send_rar(self, gnb: Gnb, ctx: UeContext, decision):
        data = encode_rar(decision.rar)
        rar = decision.rar
        self.emit("RAR_SENT", _cell(gnb.cell_id), ue=ctx.ue_id, rapid=rar.rapid, ta_command=rar.ta_command,
                  legit_ta=decision.legit_ta, tc_rnti=rar.tc_rnti, ra_rnti=decision.ra_rnti)
        received = decode_rar(data)
        msg3 = handle_rar(ctx, received, self.now, decision.ra_rnti)
        if msg3 is None:
            log.debug("ue%d ignored RAR rapid=%d", ctx.ue_id, received.rapid)
            return
        if self.scn.detectors.ta_rsrp:
            sample = TaRsrpSample(received.ta_command, rsrp(gnb.config.tx_power_dbm, self.distance(ctx, gnb),
                                                            self.pathloss), gnb.cell_id, self.now)
            verdict = ta_rsrp_check(sample, self.tx_power, self.pathloss, self.scn.detectors.ta_rsrp_tol_factor,
                                    self.numerology, self.scn.timing.base_quantum_us)
            if verdict.flagged:
                self.emit("DETECTOR_ALERT", _ue(ctx.ue_id), detector="ta_rsrp", cell=gnb.cell_id,
                          score=verdict.score, reason=verdict.reason)
        self.sim.schedule(msg3.send_at, self.send_msg3, gnb, ctx, ctx.rach, msg3)

    def rar_window_end(self, ctx: UeContext, proc, attempt):
        if ctx.rach is proc and proc.stage == "msg1" and proc.attempt == attempt:
            self.rach_failed(ctx, "no_rar")

    def send_msg3(self, gnb: Gnb, ctx: UeContext, proc, msg3):
        if ctx.rach is not proc or proc.stage != "msg3":
            return
        offset = uplink_arrival_offset(ctx.ta_state, propagation_delay(self.distance(ctx, gnb)))
        self.emit("MSG3_SENT", _ue(ctx.ue_id), cell=gnb.cell_id, msg=msg3.kind, tc_rnti=msg3.tc_rnti,
                  offset_us=offset)
        self.sim.after(CONTENTION_RESOLUTION_TIMER_MS, self.contention_timeout, ctx, proc, proc.attempt)
        if not gnb.config.is_active(self.now):
            return
        verdict = gnb.ul_receive(ctx.ue_id, offset, "msg3")
        self.emit("UL_DECODE", _cell(gnb.cell_id), ue=ctx.ue_id, channel="msg3", offset_us=offset, ok=verdict.ok)
        if verdict.ok or gnb.synthesizes_msg4:
            self.sim.after(MSG4_DELAY_MS, self.send_msg4, gnb, ctx, proc, msg3.identity)

    def send_msg4(self, gnb: Gnb, ctx: UeContext, proc, identity):
        if ctx.rach is not proc or proc.stage != "msg3":
            return
        try:
            handle_contention_resolution(ctx, identity, self.now)
        except ContentionLost:
            self.rach_failed(ctx, "contention_lost")
            return
        self.pending[ctx.ue_id] = None
        self.emit("CONNECTION_ESTABLISHED", _ue(ctx.ue_id), cell=gnb.cell_id, cause=proc.cause,
                  nta_us=ctx.ta_state.nta_us)
        self.sim.after(ctx.sync.sync_eval_period_ms, self.sync_eval, ctx, ctx.connected_at)

    def contention_timeout(self, ctx: UeContext, proc, attempt):
        if ctx.rach is proc and proc.stage == "msg3" and proc.attempt == attempt:
            self.rach_failed(ctx, "contention_timeout")

    def rach_failed(self, ctx: UeContext, reason: str):
        proc = ctx.rach
        for a in rach_attempt_failed(ctx, self.now, reason):
            if a.kind == "RACH_RETRY":
                self.sim.schedule(a.payload["at"], self.retry_rach, ctx, proc)
            else:
                self.emit(a.kind, _ue(ctx.ue_id), cell=proc.cell_id, **a.payload)
        if ctx.rach is None and not self.cells[proc.cell_id].config.is_active(self.now):
            ctx.serving_cell = None
            ctx.cached_si = None
            self.select_and_camp(ctx)

    def retry_rach(self, ctx: UeContext, proc):
        if ctx.rach is proc:
            self.begin_rach(ctx, proc.cause)

    def sync_eval(self, ctx: UeContext, epoch):
        if ctx.rrc_state is not RrcState.CONNECTED or ctx.connected_at != epoch:
            return
        gnb = self.cells[ctx.serving_cell]
        in_sync = False
        if gnb.config.is_active(self.now) and gnb.is_scheduling(ctx.ue_id):
            offset = uplink_arrival_offset(ctx.ta_state, propagation_delay(self.distance(ctx, gnb)))
            verdict = gnb.ul_receive(ctx.ue_id, offset, "pusch")
            self.emit("UL_DECODE", _cell(gnb.cell_id), ue=ctx.ue_id, channel="pusch", offset_us=offset,
                      ok=verdict.ok, fail_streak=verdict.fail_streak)
            in_sync = verdict.scheduling
        for a in on_sync_indication(ctx, in_sync, self.now):
            self.emit(a.kind, _ue(ctx.ue_id), cell=ctx.serving_cell, **a.payload)
            if a.kind == "T310_STARTED":
                self.sim.schedule(a.payload["deadline"], self.t310_expiry, ctx, epoch, a.payload["deadline"])
        self.sim.after(ctx.sync.sync_eval_period_ms, self.sync_eval, ctx, epoch)

    def t310_expiry(self, ctx: UeContext, epoch, deadline):
        if ctx.connected_at != epoch or ctx.sync.t310_deadline != deadline:
            return
        failed = self.cells[ctx.serving_cell]
        actions = on_t310_expiry(ctx, self.now, self.measure(ctx))
        failed.release(ctx.ue_id)
        for a in actions:
            self.emit(a.kind, _ue(ctx.ue_id), **a.payload)
            if a.kind == "REESTABLISH_REQ":
                self.sim.after(REESTABLISH_DELAY_MS, self.reestablish, ctx)
            elif a.kind == "NO_CELL":
                self.pending[ctx.ue_id] = "reestablishment"
                self.sim.after(CELL_RETRY_MS, self.retry_selection, ctx)

    def reestablish(self, ctx: UeContext):
        if ctx.rrc_state is RrcState.CONNECTED or ctx.rach is not None:
            return
        if ctx.camped:
            self.begin_rach(ctx, "reestablishment")
        else:
            self.pending[ctx.ue_id] = "reestablishment"


def run_scenario(scenario: Scenario, seed: int | None = None) -> RunResult:
    return _Run(scenario, scenario.seed if seed is None else seed).run()
