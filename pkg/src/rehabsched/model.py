"""Domain model: time grid, patients, operators, locations, sessions.

All values are plain dataclasses, immutable by convention after construction
and safe to share across threads.  The scheduling day is discretized into
fixed-size slots (10 minutes by default) grouped into periods (morning,
afternoon).  Slot numbers are always period-local and 0-based; windows such
as shifts and forbidden times are half-open ``[start, end)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

FICTITIOUS_OPERATOR = -1

PATIENT_VALUES = ("neurologic", "orthopaedic", "covid_positive", "covid_negative", "outpatient")
PATIENT_NEEDS = ("lifter", "nolifter")
PATIENT_STATUS = ("payer", "free")

SESSION_KINDS = ("individual", "supervised")
OPTIONALITY = ("mandatory", "optional")
PREFERENCE_PRIORITIES = ("high", "low")


class ModelError(Exception):
    """Invalid model input outside the scope of validation issues."""


class StructuralError(ModelError):
    """A solution references entities the instance does not define."""


class CostUndefinedError(ModelError):
    """Cost was requested for an infeasible solution."""


def _parse_hhmm(text: str) -> int:
    parts = text.split(":")
    if len(parts) != 2:
        raise ModelError(f"bad wall-clock time {text!r}, expected HH:MM")
    h, m = int(parts[0]), int(parts[1])
    if not (0 <= h < 24 and 0 <= m < 60):
        raise ModelError(f"bad wall-clock time {text!r}")
    return h * 60 + m


def _format_hhmm(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


@dataclass(frozen=True)
class PeriodSpec:
    """One contiguous working block of the day, e.g. the morning."""

    index: int
    start: str  # "HH:MM"
    end: str    # "HH:MM"

    @property
    def start_minutes(self) -> int:
        return _parse_hhmm(self.start)

    @property
    def end_minutes(self) -> int:
        return _parse_hhmm(self.end)


@dataclass(frozen=True)
class TimeGrid:
    slot_minutes: int = 10
    periods: Tuple[PeriodSpec, ...] = ()

    def n_periods(self) -> int:
        return len(self.periods)

    def n_slots(self, period: int) -> int:
        spec = self.periods[period]
        return (spec.end_minutes - spec.start_minutes) // self.slot_minutes

    def slot_to_wallclock(self, period: int, slot: int) -> str:
        spec = self.periods[period]
        return _format_hhmm(spec.start_minutes + slot * self.slot_minutes)

    def wallclock_to_slot(self, period: int, text: str) -> int:
        spec = self.periods[period]
        delta = _parse_hhmm(text) - spec.start_minutes
        if delta % self.slot_minutes != 0:
            raise ModelError(f"{text} is not on the slot grid of period {period}")
        return delta // self.slot_minutes


def default_grid() -> TimeGrid:
    """Standard hospital day: 8:00-12:00 morning, 13:30-16:00 afternoon."""
    return TimeGrid(
        slot_minutes=10,
        periods=(
            PeriodSpec(index=0, start="08:00", end="12:00"),
            PeriodSpec(index=1, start="13:30", end="16:00"),
        ),
    )


@dataclass(frozen=True)
class TimeWindow:
    """Half-open slot window [start, end) inside one period."""

    period: int
    start: int
    end: int

    def overlaps(self, other: "TimeWindow") -> bool:
        return self.period == other.period and self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class PatientType:
    value: str
    needs: str
    status: str

    def key(self) -> str:
        return f"{self.value}-{self.needs}-{self.status}"

    @classmethod
    def from_key(cls, key: str) -> "PatientType":
        parts = key.split("-")
        if len(parts) != 3:
            raise ModelError(f"bad patient type key {key!r}")
        return cls(*parts)


@dataclass(frozen=True)
class OperatorPreference:
    operator: int
    weight: int


@dataclass
class Patient:
    id: int
    ptype: PatientType
    min_daily_length: int
    forbidden: List[TimeWindow] = field(default_factory=list)
    preferred_operators: List[OperatorPreference] = field(default_factory=list)
    history_preferences: List[OperatorPreference] = field(default_factory=list)
    sessions: List[str] = field(default_factory=list)


@dataclass
class Operator:
    """A physiotherapist.  ``total_time``/``max_patients`` of None mean unbounded;
    id -1 is the fictitious catch-all operator."""

    id: int
    total_time: Optional[int]
    max_patients: Optional[int]
    type_limits: Dict[str, int] = field(default_factory=dict)  # PatientType.key() -> count
    shifts: List[TimeWindow] = field(default_factory=list)
    qualifications: frozenset = frozenset()  # of PATIENT_VALUES entries

    def is_fictitious(self) -> bool:
        return self.id == FICTITIOUS_OPERATOR

    def shift_in(self, period: int) -> Optional[TimeWindow]:
        for shift in self.shifts:
            if shift.period == period:
                return shift
        return None


@dataclass
class LocationSpec:
    id: str
    capacity: int  # <= 0 means unconstrained
    open: List[TimeWindow] = field(default_factory=list)
    macro_location: str = ""


@dataclass
class SessionSpec:
    id: str
    patient: int
    kind: str  # individual | supervised
    min_length: int
    ideal_length: int
    optionality: str  # mandatory | optional
    macro_location: str
    forced_time: Optional[Tuple[int, int]] = None  # (period, slot)
    preference: Optional[Tuple[int, int, str]] = None  # (period, start, priority)

    def is_mandatory(self) -> bool:
        return self.optionality == "mandatory"

    def is_individual(self) -> bool:
        return self.kind == "individual"


@dataclass
class Instance:
    grid: TimeGrid
    patients: List[Patient] = field(default_factory=list)
    operators: List[Operator] = field(default_factory=list)
    locations: List[LocationSpec] = field(default_factory=list)
    sessions: List[SessionSpec] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._patients_by_id = {p.id: p for p in self.patients}
        self._operators_by_id = {o.id: o for o in self.operators}
        self._locations_by_id = {l.id: l for l in self.locations}
        self._sessions_by_id = {s.id: s for s in self.sessions}
        self._macro_locations: Dict[str, List[LocationSpec]] = {}
        for loc in self.locations:
            self._macro_locations.setdefault(loc.macro_location, []).append(loc)

    def patient(self, pid: int) -> Patient:
        try:
            return self._patients_by_id[pid]
        except KeyError:
            raise StructuralError(f"unknown patient {pid}") from None

    def operator(self, oid: int) -> Operator:
        try:
            return self._operators_by_id[oid]
        except KeyError:
            raise StructuralError(f"unknown operator {oid}") from None

    def location(self, lid: str) -> LocationSpec:
        try:
            return self._locations_by_id[lid]
        except KeyError:
            raise StructuralError(f"unknown location {lid}") from None

    def session(self, sid: str) -> SessionSpec:
        try:
            return self._sessions_by_id[sid]
        except KeyError:
            raise StructuralError(f"unknown session {sid}") from None

    def has_patient(self, pid: int) -> bool:
        return pid in self._patients_by_id

    def has_operator(self, oid: int) -> bool:
        return oid in self._operators_by_id

    def has_session(self, sid: str) -> bool:
        return sid in self._sessions_by_id

    def real_operators(self) -> List[Operator]:
        return [o for o in self.operators if not o.is_fictitious()]

    def locations_of_macro(self, macro: str) -> List[LocationSpec]:
        return list(self._macro_locations.get(macro, []))

    def sessions_of_patient(self, pid: int) -> List[SessionSpec]:
        return [self._sessions_by_id[sid] for sid in self.patient(pid).sessions
                if sid in self._sessions_by_id]


@dataclass(frozen=True, order=True)
class CostVector:
    """Lexicographically ordered objective levels, highest priority first.

    Boards carry 3 levels, agendas 6.  dataclass ordering on the tuple gives
    exactly the lexicographic total order.
    """

    levels: Tuple[int, ...]

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.levels):
            raise ModelError(f"negative cost level in {self.levels}")

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> int:
        return self.levels[i]

    def as_list(self) -> List[int]:
        return list(self.levels)

    @classmethod
    def zeros(cls, n: int) -> "CostVector":
        return cls(tuple([0] * n))


@dataclass(frozen=True)
class ValidationIssue:
    entity: str
    message: str


def _check_window(issues: List[ValidationIssue], entity: str, window: TimeWindow,
                  grid: TimeGrid, what: str) -> None:
    if not (0 <= window.period < grid.n_periods()):
        issues.append(ValidationIssue(entity, f"{what} names unknown period {window.period}"))
        return
    n = grid.n_slots(window.period)
    if not (window.start < window.end):
        issues.append(ValidationIssue(entity, f"{what} window has start >= end"))
    if window.start < 0 or window.end > n:
        issues.append(ValidationIssue(entity, f"{what} window [{window.start},{window.end}) outside period slots [0,{n})"))


def validate_instance(inst: Instance) -> List[ValidationIssue]:
    """Check every structural invariant; an empty list means the instance is well formed."""
    issues: List[ValidationIssue] = []
    grid = inst.grid

    if grid.slot_minutes <= 0:
        issues.append(ValidationIssue("grid", "slot_minutes must be positive"))
        return issues
    for i, spec in enumerate(grid.periods):
        if spec.index != i:
            issues.append(ValidationIssue("grid", f"period indices must be 0-based and contiguous, got {spec.index} at position {i}"))
        span = spec.end_minutes - spec.start_minutes
        if span <= 0:
            issues.append(ValidationIssue("grid", f"period {spec.index} has non-positive span"))
        elif span % grid.slot_minutes != 0:
            issues.append(ValidationIssue("grid", f"period {spec.index} span is not a multiple of {grid.slot_minutes} minutes"))
        if i > 0 and spec.start_minutes < grid.periods[i - 1].end_minutes:
            issues.append(ValidationIssue("grid", f"period {spec.index} starts before period {i - 1} ends"))

    seen_patients = set()
    for p in inst.patients:
        ent = f"patient {p.id}"
        if p.id in seen_patients:
            issues.append(ValidationIssue(ent, "duplicate patient id"))
        seen_patients.add(p.id)
        if p.ptype.value not in PATIENT_VALUES:
            issues.append(ValidationIssue(ent, f"unknown type value {p.ptype.value!r}"))
        if p.ptype.needs not in PATIENT_NEEDS:
            issues.append(ValidationIssue(ent, f"unknown needs {p.ptype.needs!r}"))
        if p.ptype.status not in PATIENT_STATUS:
            issues.append(ValidationIssue(ent, f"unknown status {p.ptype.status!r}"))
        if p.min_daily_length < 0:
            issues.append(ValidationIssue(ent, "negative min_daily_length"))
        for w in p.forbidden:
            _check_window(issues, ent, w, grid, "forbidden")
        prev_w = None
        for pref in p.preferred_operators:
            if pref.weight < 0:
                issues.append(ValidationIssue(ent, "negative preference weight"))
            if prev_w is not None and pref.weight < prev_w:
                issues.append(ValidationIssue(ent, "preferred_operators not ordered by non-decreasing weight"))
            prev_w = pref.weight
        for pref in p.history_preferences:
            if pref.weight < 0:
                issues.append(ValidationIssue(ent, "negative history weight"))
        if not (1 <= len(p.sessions) <= grid.n_periods()):
            issues.append(ValidationIssue(ent, f"patient must have between 1 and {grid.n_periods()} sessions, has {len(p.sessions)}"))
        for sid in p.sessions:
            if not inst.has_session(sid):
                issues.append(ValidationIssue(ent, f"references unknown session {sid}"))
            elif inst.session(sid).patient != p.id:
                issues.append(ValidationIssue(ent, f"lists session {sid} that belongs to patient {inst.session(sid).patient}"))

    fictitious = [o for o in inst.operators if o.is_fictitious()]
    if len(fictitious) == 0:
        issues.append(ValidationIssue("operators", "missing fictitious operator"))
    elif len(fictitious) > 1:
        issues.append(ValidationIssue("operators", "more than one fictitious operator"))
    else:
        f = fictitious[0]
        if f.total_time is not None or f.max_patients is not None or f.type_limits:
            issues.append(ValidationIssue("operator -1", "fictitious operator must be unbounded with no type limits"))

    seen_ops = set()
    for o in inst.operators:
        ent = f"operator {o.id}"
        if o.id in seen_ops:
            issues.append(ValidationIssue(ent, "duplicate operator id"))
        seen_ops.add(o.id)
        periods_seen = set()
        for shift in o.shifts:
            if shift.period in periods_seen:
                issues.append(ValidationIssue(ent, f"more than one shift in period {shift.period}"))
            periods_seen.add(shift.period)
            _check_window(issues, ent, shift, grid, "shift")
        for q in o.qualifications:
            if q not in PATIENT_VALUES:
                issues.append(ValidationIssue(ent, f"unknown qualification {q!r}"))
        for key in o.type_limits:
            try:
                t = PatientType.from_key(key)
            except ModelError:
                issues.append(ValidationIssue(ent, f"bad type_limits key {key!r}"))
                continue
            if t.value not in PATIENT_VALUES or t.needs not in PATIENT_NEEDS or t.status not in PATIENT_STATUS:
                issues.append(ValidationIssue(ent, f"bad type_limits key {key!r}"))
        if o.total_time is not None and o.total_time < 0:
            issues.append(ValidationIssue(ent, "negative total_time"))
        if o.max_patients is not None and o.max_patients < 0:
            issues.append(ValidationIssue(ent, "negative max_patients"))

    seen_locs = set()
    for loc in inst.locations:
        ent = f"location {loc.id}"
        if loc.id in seen_locs:
            issues.append(ValidationIssue(ent, "duplicate location id"))
        seen_locs.add(loc.id)
        if not loc.macro_location:
            issues.append(ValidationIssue(ent, "location has no macro_location"))
        for w in loc.open:
            _check_window(issues, ent, w, grid, "open")

    seen_sessions = set()
    for s in inst.sessions:
        ent = f"session {s.id}"
        if s.id in seen_sessions:
            issues.append(ValidationIssue(ent, "duplicate session id"))
        seen_sessions.add(s.id)
        if s.kind not in SESSION_KINDS:
            issues.append(ValidationIssue(ent, f"unknown kind {s.kind!r}"))
        if s.optionality not in OPTIONALITY:
            issues.append(ValidationIssue(ent, f"unknown optionality {s.optionality!r}"))
        if s.min_length <= 0:
            issues.append(ValidationIssue(ent, "min_length must be positive"))
        if s.min_length > s.ideal_length:
            issues.append(ValidationIssue(ent, "min exceeds ideal"))
        if not inst.has_patient(s.patient):
            issues.append(ValidationIssue(ent, f"references unknown patient {s.patient}"))
        elif s.id not in inst.patient(s.patient).sessions:
            issues.append(ValidationIssue(ent, f"not listed by patient {s.patient}"))
        if not inst.locations_of_macro(s.macro_location):
            issues.append(ValidationIssue(ent, f"macro_location {s.macro_location!r} has no locations"))
        if s.forced_time is not None:
            per, slot = s.forced_time
            if not (0 <= per < grid.n_periods()) or not (0 <= slot < grid.n_slots(per)):
                issues.append(ValidationIssue(ent, f"forced_time ({per},{slot}) outside the grid"))
        if s.preference is not None:
            per, start, prio = s.preference
            if not (0 <= per < grid.n_periods()) or not (0 <= start < grid.n_slots(per)):
                issues.append(ValidationIssue(ent, f"preference ({per},{start}) outside the grid"))
            if prio not in PREFERENCE_PRIORITIES:
                issues.append(ValidationIssue(ent, f"unknown preference priority {prio!r}"))

    return issues


def density(inst: Instance) -> float:
    """Average number of patients per real operator."""
    real = inst.real_operators()
    if not real:
        raise ModelError("no operators")
    return len(inst.patients) / len(real)


def avg_qualifications(inst: Instance) -> float:
    """Mean number of type values each real operator is qualified for."""
    real = inst.real_operators()
    if not real:
        raise ModelError("no operators")
    return sum(len(o.qualifications) for o in real) / len(real)
