"""Scenario files.

A scenario is a flat, commented, sectioned key/value text file::

    # comment
    [scenario]
    name = ta_delta_30
    duration_ms = 600000
    seed = 7

    [cell]            # repeatable; each starts a new cell
    id = 1
    ...
    [attack]          # applies to the cell defined just above
    kind = ta_delta
    delta_units = 30

    [ue]              # repeatable
    id = 1
    position_m = 400

Singleton sections: ``scenario``, ``timing``, ``environment``, ``detectors``.
Errors carry a field path such as ``cells[1].attack.delta_units``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .codec import PlmnId, RachConfigCommon, SiWindowLength, Sib1Message
from .errors import ConfigInvalid, InvariantViolation
from .gnb import AttackKind, AttackProfile, CellConfig, harvest_cell_config
from .ue import RegistrationPolicy, SiCachePolicy

_REQUIRED = object()
SINGLETONS = ("scenario", "timing", "environment", "detectors")
REPEATED = ("cell", "ue")


@dataclass(frozen=True)
class TimingConfig:
    mu: int = 0
    base_quantum_us: float = 0.5208
    cp_tolerance_units: float = 14.0


@dataclass(frozen=True)
class EnvironmentConfig:
    pathloss_exponent: float = 2.7
    pathloss_ref_db: float = 40.0
    rsrp_floor_dbm: float = -120.0


@dataclass(frozen=True)
class UeSpec:
    ue_id: int
    position_m: float = 0.0
    registration: RegistrationPolicy = RegistrationPolicy.DEFERRED
    si_cache: SiCachePolicy = SiCachePolicy.REFRESH_BEFORE_USE
    connect_at_ms: int | None = None
    n310: int = 10
    n311: int = 1
    t310_ms: int = 10_000
    sync_eval_ms: int = 1000
    paging_cycle_ms: int = 1280
    paging_wake_ms: int = 4
    si_acq_ms: int = 320
    osi_period_ms: int = 5120
    blacklist_on_rlf: bool = False


@dataclass(frozen=True)
class DetectorConfig:
    ta_rsrp: bool = True
    ta_rsrp_tol_factor: float = 3.0
    valuetag_rate: bool = True
    valuetag_window_ms: int = 120_000
    valuetag_max_updates: int = 2


@dataclass(frozen=True)
class Scenario:
    name: str
    duration_ms: int
    seed: int
    cells: tuple[CellConfig, ...]
    ues: tuple[UeSpec, ...]
    timing: TimingConfig = TimingConfig()
    environment: EnvironmentConfig = EnvironmentConfig()
    detectors: DetectorConfig = DetectorConfig()

    def cell(self, cell_id: int) -> CellConfig:
        for c in self.cells:
            if c.cell_id == cell_id:
                return c
        raise KeyError(cell_id)

    def with_attack(self, cell_id: int, attack: AttackProfile) -> "Scenario":
        return replace(self, cells=tuple(replace(c, attack=attack) if c.cell_id == cell_id else c
                                         for c in self.cells))

    def rogue_ids(self) -> list[int]:
        return [c.cell_id for c in self.cells if c.is_rogue]


@dataclass
class _Value:
    text: str
    line: int
    column: int
    key_column: int = 1


@dataclass
class _Section:
    name: str
    line: int
    values: dict = field(default_factory=dict)
    attack: "_Section | None" = None


_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")


def _strip_comment(line: str) -> str:
    for i, ch in enumerate(line):
        if ch in "#;" and (i == 0 or line[i - 1].isspace()):
            return line[:i]
    return line


def parse_text(text: str, source: str = "<scenario>") -> Scenario:
    singles: dict[str, _Section] = {}
    cells: list[_Section] = []
    ues: list[_Section] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        indent = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            m = _SECTION_RE.match(stripped)
            if not m:
                raise ConfigInvalid(source, f"malformed section header {stripped!r}", lineno, indent)
            name = m.group(1).lower()
            sec = _Section(name, lineno)
            if name in SINGLETONS:
                if name in singles:
                    raise ConfigInvalid(name, "section appears twice", lineno, indent)
                singles[name] = sec
            elif name == "cell":
                cells.append(sec)
            elif name == "ue":
                ues.append(sec)
            elif name == "attack":
                if not cells:
                    raise ConfigInvalid("attack", "[attack] must follow a [cell]", lineno, indent)
                if cells[-1].attack is not None:
                    raise ConfigInvalid(f"cells[{len(cells) - 1}].attack", "cell already has an [attack]",
                                        lineno, indent)
                cells[-1].attack = sec
            else:
                raise ConfigInvalid(name, "unknown section", lineno, indent)
            current = sec
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigInvalid(source, "expected 'key = value'", lineno, indent)
        key = key.strip().lower()
        if current is None:
            raise ConfigInvalid(key, "key outside any section", lineno, indent)
        if not re.fullmatch(r"[a-z_][a-z0-9_]*", key):
            raise ConfigInvalid(key, "bad key name", lineno, indent)
        if key in current.values:
            raise ConfigInvalid(key, "duplicate key", lineno, indent)
        eq = line.index("=")
        after = line[eq + 1:]
        current.values[key] = _Value(value.strip(), lineno, eq + 2 + len(after) - len(after.lstrip()), indent)
    return _build(singles, cells, ues)


class _Reader:
    """Typed access to one section, tracking which keys were consumed."""

    def __init__(self, section: _Section | None, path: str):
        self.section = section
        self.values = section.values if section else {}
        self.path = path
        self.used = set()

    def _err(self, key, message, at_key=False):
        v = self.values.get(key)
        if v is None:
            return ConfigInvalid(f"{self.path}.{key}", message)
        return ConfigInvalid(f"{self.path}.{key}", message, v.line, v.key_column if at_key else v.column)

    def has(self, key) -> bool:
        return key in self.values

    def raw(self, key, default=_REQUIRED):
        self.used.add(key)
        if key not in self.values:
            if default is _REQUIRED:
                line = self.section.line if self.section else None
                raise ConfigInvalid(f"{self.path}.{key}", "required field missing", line, 1 if line else None)
            return None
        return self.values[key].text

    def int(self, key, default=_REQUIRED, low=None, high=None):
        text = self.raw(key, default)
        if text is None:
            return default
        try:
            value = int(text, 0)
        except ValueError:
            raise self._err(key, f"expected an integer, got {text!r}") from None
        self._range(key, value, low, high)
        return value

    def float(self, key, default=_REQUIRED, low=None, high=None, strict_low=False):
        text = self.raw(key, default)
        if text is None:
            return default
        try:
            value = float(text)
        except ValueError:
            raise self._err(key, f"expected a number, got {text!r}") from None
        if strict_low and low is not None and not value > low:
            raise self._err(key, f"must be > {low}")
        self._range(key, value, None if strict_low else low, high)
        return value

    def bool(self, key, default=_REQUIRED):
        text = self.raw(key, default)
        if text is None:
            return default
        t = text.lower()
        if t in ("true", "yes", "on", "1"):
            return True
        if t in ("false", "no", "off", "0"):
            return False
        raise self._err(key, f"expected true/false, got {text!r}")

    def str(self, key, default=_REQUIRED):
        text = self.raw(key, default)
        return default if text is None else text

    def enum(self, key, enum_cls, default=_REQUIRED):
        text = self.raw(key, default)
        if text is None:
            return default
        for member in enum_cls:
            if member.value == text.lower() or member.name == text.upper():
                return member
        choices = ", ".join(m.value if isinstance(m.value, str) else m.name.lower() for m in enum_cls)
        raise self._err(key, f"expected one of {choices}, got {text!r}")

    def list(self, key, convert, default=_REQUIRED):
        text = self.raw(key, default)
        if text is None:
            return default
        try:
            return tuple(convert(item.strip()) for item in text.split(",") if item.strip())
        except ValueError as exc:
            raise self._err(key, str(exc)) from None

    def _range(self, key, value, low, high):
        if low is not None and value < low:
            raise self._err(key, f"{value} is below the minimum {low}")
        if high is not None and value > high:
            raise self._err(key, f"{value} exceeds the maximum {high}")

    def finish(self):
        extra = sorted(set(self.values) - self.used)
        if extra:
            raise self._err(extra[0], "unknown key", at_key=True)


_SIB1_KEYS = ("value_tag", "tac", "si_window", "plmn", "cell_identity", "barred", "sib1_period_ms",
              "ra_response_window_ms", "prach_period_ms", "preamble_format", "power_ramping_step_db",
              "preamble_target_power_dbm")


def _sib1(r: _Reader) -> Sib1Message:
    plmns = r.list("plmn", PlmnId.parse, (PlmnId(1, 1, 2),))
    if not plmns:
        raise r._err("plmn", "at least one PLMN is required")
    return Sib1Message(
        value_tag=r.int("value_tag", 0, 0, 31),
        tracking_area_code=r.int("tac", 1, 0, (1 << 24) - 1),
        si_window_length=r.enum("si_window", SiWindowLength, SiWindowLength.MS10),
        plmn_list=plmns,
        cell_identity=r.int("cell_identity", 0, 0, (1 << 36) - 1),
        cell_barred=r.bool("barred", False),
        rach_config=RachConfigCommon(
            preamble_format_id=r.int("preamble_format", 0, 0, 255),
            ra_response_window_ms=r.int("ra_response_window_ms", 10, 1, 255),
            power_ramping_step_db=r.int("power_ramping_step_db", 2, 0, 255),
            preamble_target_power_dbm=r.int("preamble_target_power_dbm", -100, -32768, 32767),
            prach_periodicity_ms=r.int("prach_period_ms", 10, 1, 65535),
        ),
        sib1_periodicity_ms=r.int("sib1_period_ms", 160, 1, 65535),
    )


def _attack(sec: _Section | None, path: str) -> AttackProfile:
    if sec is None:
        return AttackProfile()
    r = _Reader(sec, path)
    kind = r.enum("kind", AttackKind)
    if kind is AttackKind.VALUE_TAG_INCREMENT:
        prof = AttackProfile.value_tag_increment(r.int("period_ms", 10_000, 1))
    elif kind is AttackKind.TAC_CYCLE:
        tacs = r.list("tac_list", lambda s: int(s, 0))
        if not tacs:
            raise r._err("tac_list", "must not be empty")
        for t in tacs:
            if not 0 <= t < 1 << 24:
                raise r._err("tac_list", f"TAC {t} does not fit 24 bits")
        prof = AttackProfile.tac_cycle(tacs, r.int("period_ms", 30_000, 1))
    elif kind is AttackKind.SI_WINDOW_TOGGLE:
        seq = r.list("sequence", SiWindowLength.parse,
                     (SiWindowLength.MS5, SiWindowLength.MS10, SiWindowLength.MS20))
        if not seq:
            raise r._err("sequence", "must not be empty")
        prof = AttackProfile.si_window_toggle(seq)
    elif kind is AttackKind.TA_DELTA:
        prof = AttackProfile.ta_delta(r.int("delta_units", _REQUIRED, -3846, 3846))
    else:
        prof = AttackProfile()
    r.finish()
    return prof


def _cells(sections: list[_Section]) -> tuple[CellConfig, ...]:
    if not sections:
        raise ConfigInvalid("cells", "at least one [cell] is required")
    built: dict[int, CellConfig] = {}
    order = []
    for i, sec in enumerate(sections):
        path = f"cells[{i}]"
        r = _Reader(sec, path)
        cell_id = r.int("id", _REQUIRED, 0)
        if cell_id in built:
            raise r._err("id", f"duplicate cell id {cell_id}")
        rogue = r.bool("rogue", False)
        clone_of = r.int("clone_of", None)
        if clone_of is not None:
            if clone_of not in built:
                raise r._err("clone_of", f"cell {clone_of} is not defined before this cell")
            for key in _SIB1_KEYS:
                if r.has(key):
                    raise r._err(key, "SIB1 content of a cloned cell comes from clone_of")
            if not rogue:
                raise r._err("clone_of", "only a rogue cell can clone another cell")
            cfg = harvest_cell_config(built[clone_of], cell_id,
                                      power_offset_db=r.float("tx_power_offset_db", 5.0))
            cfg = replace(
                cfg,
                position_m=r.float("position_m", cfg.position_m, 0.0),
                pci=r.int("pci", cfg.pci, 0, 1007),
                tx_power_dbm=r.float("tx_power_dbm", cfg.tx_power_dbm),
            )
        else:
            cfg = CellConfig(
                cell_id=cell_id,
                sib1=_sib1(r),
                pci=r.int("pci", 0, 0, 1007),
                tx_power_dbm=r.float("tx_power_dbm", 30.0),
                position_m=r.float("position_m", 0.0, 0.0),
                is_rogue=rogue,
            )
        active_from = r.int("active_from_ms", 0, 0)
        active_until = r.int("active_until_ms", None, 1)
        if active_until is not None and active_until <= active_from:
            raise r._err("active_until_ms", "must be after active_from_ms")
        cfg = replace(cfg, ul_failure_limit=r.int("ul_failure_limit", cfg.ul_failure_limit, 1),
                      active_from_ms=active_from, active_until_ms=active_until)
        attack = _attack(sec.attack, f"{path}.attack")
        if attack.kind is not AttackKind.NONE and not cfg.is_rogue:
            v = sec.attack.values.get("kind")
            raise ConfigInvalid(f"{path}.attack.kind", "a legitimate cell cannot carry an attack",
                                v.line if v else sec.attack.line, v.column if v else 1)
        cfg = replace(cfg, attack=attack)
        r.finish()
        try:
            cfg.validate()
        except InvariantViolation as exc:
            raise ConfigInvalid(path, str(exc), sec.line, 1) from None
        built[cell_id] = cfg
        order.append(cfg)
    return tuple(order)


def _ues(sections: list[_Section]) -> tuple[UeSpec, ...]:
    if not sections:
        raise ConfigInvalid("ues", "at least one [ue] is required")
    out, seen = [], set()
    for i, sec in enumerate(sections):
        r = _Reader(sec, f"ues[{i}]")
        ue_id = r.int("id", _REQUIRED, 0)
        if ue_id in seen:
            raise r._err("id", f"duplicate ue id {ue_id}")
        seen.add(ue_id)
        spec = UeSpec(
            ue_id=ue_id,
            position_m=r.float("position_m", 0.0, 0.0),
            registration=r.enum("registration_policy", RegistrationPolicy, RegistrationPolicy.DEFERRED),
            si_cache=r.enum("si_cache_policy", SiCachePolicy, SiCachePolicy.REFRESH_BEFORE_USE),
            connect_at_ms=r.int("connect_at_ms", None, 0),
            n310=r.int("n310", 10, 1),
            n311=r.int("n311", 1, 1),
            t310_ms=r.int("t310_ms", 10_000, 1),
            sync_eval_ms=r.int("sync_eval_ms", 1000, 1),
            paging_cycle_ms=r.int("paging_cycle_ms", 1280, 1),
            paging_wake_ms=r.int("paging_wake_ms", 4, 0),
            si_acq_ms=r.int("si_acq_ms", 320, 0),
            osi_period_ms=r.int("osi_period_ms", 5120, 1),
            blacklist_on_rlf=r.bool("blacklist_on_rlf", False),
        )
        if spec.paging_wake_ms > spec.paging_cycle_ms:
            raise r._err("paging_wake_ms", "cannot exceed paging_cycle_ms")
        r.finish()
        out.append(spec)
    return tuple(out)


def _build(singles, cells, ues) -> Scenario:
    s = _Reader(singles.get("scenario"), "scenario")
    name = s.str("name", "unnamed")
    duration = s.int("duration_ms", _REQUIRED, 1)
    seed = s.int("seed", 0, 0)
    s.finish()

    t = _Reader(singles.get("timing"), "timing")
    timing = TimingConfig(
        mu=t.int("mu", 0, 0, 4),
        base_quantum_us=t.float("base_quantum_us", 0.5208, 0.0, strict_low=True),
        cp_tolerance_units=t.float("cp_tolerance_units", 14.0, 0.0, strict_low=True),
    )
    t.finish()

    e = _Reader(singles.get("environment"), "environment")
    env = EnvironmentConfig(
        pathloss_exponent=e.float("pathloss_exponent", 2.7, 0.0, strict_low=True),
        pathloss_ref_db=e.float("pathloss_ref_db", 40.0),
        rsrp_floor_dbm=e.float("rsrp_floor_dbm", -120.0),
    )
    e.finish()

    d = _Reader(singles.get("detectors"), "detectors")
    det = DetectorConfig(
        ta_rsrp=d.bool("ta_rsrp", True),
        ta_rsrp_tol_factor=d.float("ta_rsrp_tol_factor", 3.0, 1.0, strict_low=True),
        valuetag_rate=d.bool("valuetag_rate", True),
        valuetag_window_ms=d.int("valuetag_window_ms", 120_000, 1),
        valuetag_max_updates=d.int("valuetag_max_updates", 2, 0),
    )
    d.finish()

    return Scenario(name=name, duration_ms=duration, seed=seed, cells=_cells(cells), ues=_ues(ues),
                    timing=timing, environment=env, detectors=det)


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(str(path), f"cannot read: {exc.strerror or exc}") from None
    return parse_text(text, str(path))


def builtin_path(name: str):
    """Path of a shipped reference scenario, e.g. ``builtin_path("baseline")``."""
    if not name.endswith(".scenario"):
        name += ".scenario"
    return resources.files("nrsim") / "scenarios" / name


def load_builtin(name: str) -> Scenario:
    p = builtin_path(name)
    return parse_text(p.read_text(encoding="utf-8"), name)


BUILTIN_SCENARIOS = ("baseline", "ta_delta_5", "ta_delta_30", "valuetag_10s", "tac_cycle_30s",
                     "si_window_toggle", "benign_connected")
