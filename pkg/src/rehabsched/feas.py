"""Feasibility checking and lexicographic cost evaluation.

This module is the single semantic authority for what makes a board or an
agenda legal and how good it is.  Solvers, the oracle, the benchmark harness
and the service all defer to it; nothing else re-derives constraint logic.

Rule tags form a closed catalog: B1-B5 for boards, A1-A13 for agendas.
Sessions whose patient sits on the fictitious operator are exempt from
scheduling requirements (the fictitious operator has no shifts, so such
sessions cannot be placed; they simply stay out of the agenda).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .model import (
    FICTITIOUS_OPERATOR,
    CostVector,
    CostUndefinedError,
    Instance,
    Patient,
    SessionSpec,
    StructuralError,
)

BOARD_RULES = ("B1", "B2", "B3", "B4", "B5")
AGENDA_RULES = tuple(f"A{i}" for i in range(1, 14))
RULE_CATALOG = BOARD_RULES + AGENDA_RULES


@dataclass(frozen=True)
class Violation:
    rule: str
    entities: Tuple[str, ...]
    detail: str

    def __post_init__(self) -> None:
        assert self.rule in RULE_CATALOG, f"unknown rule tag {self.rule}"

    def to_json(self) -> Dict[str, object]:
        return {"rule": self.rule, "entities": list(self.entities), "detail": self.detail}


@dataclass
class BoardSolution:
    """Total map patient id -> operator id (-1 allowed)."""

    assignment: Dict[int, int] = field(default_factory=dict)

    def operator_of(self, pid: int) -> int:
        return self.assignment[pid]

    def patients_of(self, oid: int) -> List[int]:
        return [p for p, o in self.assignment.items() if o == oid]


@dataclass(frozen=True)
class SessionPlacement:
    session: str
    period: int
    start: int
    length: int
    before: int = 0
    after: int = 0
    location: str = ""

    @property
    def ext_start(self) -> int:
        return self.start - self.before

    @property
    def ext_length(self) -> int:
        return self.length + self.before + self.after

    @property
    def ext_end(self) -> int:
        return self.ext_start + self.ext_length

    @property
    def end(self) -> int:
        return self.start + self.length


@dataclass
class AgendaSolution:
    """Placements of scheduled sessions; unscheduled optional sessions are absent."""

    placements: Dict[str, SessionPlacement] = field(default_factory=dict)


def preference_weight(patient: Patient, oid: int) -> int:
    """Level-3 cost of assigning ``patient`` to ``oid``.

    The fictitious operator never carries a preference weight (it is priced
    at level 2 instead).  Real operators missing from a non-empty preference
    list cost one more than the worst listed rank.
    """
    if oid == FICTITIOUS_OPERATOR:
        return 0
    for entry in patient.preferred_operators:
        if entry.operator == oid:
            return entry.weight
    if patient.preferred_operators:
        return len(patient.preferred_operators) + 1
    return 0


def history_weight(patient: Patient, oid: int) -> int:
    """Level-1 cost, same totalization as preference_weight."""
    if oid == FICTITIOUS_OPERATOR:
        return 0
    for entry in patient.history_preferences:
        if entry.operator == oid:
            return entry.weight
    if patient.history_preferences:
        return len(patient.history_preferences) + 1
    return 0


def operator_workload(inst: Instance, assigned: Iterable[int], with_breakdown: bool = False):
    """Workload of one operator given the ids of its assigned patients.

    A patient contributes once per session: the session's minimum length if
    at least two of the operator's patients share that session's location,
    the patient's whole daily minimum otherwise.  Duplicate (value, patient)
    pairs collapse, mirroring summation over distinct tuples.
    """
    assigned = list(assigned)
    loc_patient_count: Dict[str, Set[int]] = {}
    for pid in assigned:
        for sess in inst.sessions_of_patient(pid):
            loc_patient_count.setdefault(sess.macro_location, set()).add(pid)
    tuples: Set[Tuple[int, int]] = set()
    for pid in assigned:
        patient = inst.patient(pid)
        for sess in inst.sessions_of_patient(pid):
            if len(loc_patient_count[sess.macro_location]) >= 2:
                tuples.add((sess.min_length, pid))
            else:
                tuples.add((patient.min_daily_length, pid))
    total = sum(v for v, _ in tuples)
    if with_breakdown:
        per_patient: Dict[int, int] = {}
        for v, pid in tuples:
            per_patient[pid] = per_patient.get(pid, 0) + v
        return total, per_patient
    return total


def check_board(inst: Instance, sol: BoardSolution) -> List[Violation]:
    """All board violations; empty list means the board is feasible."""
    for pid, oid in sol.assignment.items():
        if not inst.has_patient(pid):
            raise StructuralError(f"assignment names unknown patient {pid}")
        if not inst.has_operator(oid):
            raise StructuralError(f"assignment names unknown operator {oid}")

    violations: List[Violation] = []
    for p in inst.patients:
        if p.id not in sol.assignment:
            violations.append(Violation("B1", (f"patient {p.id}",), "patient has no operator"))

    by_operator: Dict[int, List[int]] = {}
    for pid, oid in sol.assignment.items():
        by_operator.setdefault(oid, []).append(pid)

    for oid, assigned in sorted(by_operator.items()):
        op = inst.operator(oid)
        if op.is_fictitious():
            continue
        if op.total_time is not None:
            load = operator_workload(inst, assigned)
            if load > op.total_time:
                violations.append(Violation(
                    "B2", (f"operator {oid}",),
                    f"workload {load} exceeds total_time {op.total_time}"))
        if op.max_patients is not None and len(assigned) > op.max_patients:
            violations.append(Violation(
                "B3", (f"operator {oid}",),
                f"{len(assigned)} patients exceed max_patients {op.max_patients}"))
        if op.type_limits:
            counts: Dict[str, int] = {}
            for pid in assigned:
                counts[inst.patient(pid).ptype.key()] = counts.get(inst.patient(pid).ptype.key(), 0) + 1
            for key, limit in sorted(op.type_limits.items()):
                if counts.get(key, 0) > limit:
                    violations.append(Violation(
                        "B4", (f"operator {oid}", key),
                        f"{counts[key]} patients of type {key} exceed limit {limit}"))
        for pid in sorted(assigned):
            value = inst.patient(pid).ptype.value
            if value not in op.qualifications:
                violations.append(Violation(
                    "B5", (f"operator {oid}", f"patient {pid}"),
                    f"operator not qualified for {value}"))
    return violations


def board_cost(inst: Instance, sol: BoardSolution) -> CostVector:
    """Three lexicographic levels: preference weights, fictitious count, history weights."""
    violations = check_board(inst, sol)
    if violations:
        raise CostUndefinedError(f"cost undefined: board has {len(violations)} violations")
    pref = 0
    fict = 0
    hist = 0
    for pid, oid in sol.assignment.items():
        patient = inst.patient(pid)
        pref += preference_weight(patient, oid)
        hist += history_weight(patient, oid)
        if oid == FICTITIOUS_OPERATOR:
            fict += 1
    return CostVector((pref, fict, hist))


def schedulable_sessions(inst: Instance, board: BoardSolution) -> List[SessionSpec]:
    """Sessions whose patient sits on a real operator; only these can be placed."""
    out = []
    for sess in inst.sessions:
        oid = board.assignment.get(sess.patient)
        if oid is not None and oid != FICTITIOUS_OPERATOR:
            out.append(sess)
    return out


def _fair_slack_violations(pairs: List[Tuple[SessionSpec, int]], ent_prefix: str) -> List[Violation]:
    """The three forbidden slack patterns among individual sessions sharing
    one operator, location and period.  ``pairs`` holds (spec, placed length)."""
    violations = []
    for s1, l1 in pairs:
        for s2, l2 in pairs:
            if s1.id == s2.id:
                continue
            opt1, min1 = s1.ideal_length, s1.min_length
            opt2, min2 = s2.ideal_length, s2.min_length
            slack1 = opt1 - l1
            slack2 = opt2 - l2
            mutual = slack1 <= opt2 - min2 and slack2 <= opt1 - min1
            if mutual and abs(slack1 - slack2) > 1:
                violations.append(Violation(
                    "A7", (s1.id, s2.id),
                    f"{ent_prefix}: slack gap |{slack1}-{slack2}| > 1"))
            if slack1 > opt2 - min2 and l2 > min2:
                violations.append(Violation(
                    "A7", (s1.id, s2.id),
                    f"{ent_prefix}: slack {slack1} unabsorbable by {s2.id} while it is above minimum"))
            if mutual and opt2 < opt1 and slack1 < slack2:
                violations.append(Violation(
                    "A7", (s1.id, s2.id),
                    f"{ent_prefix}: shorter-ideal session {s2.id} carries more slack"))
    return violations


def check_agenda(inst: Instance, board: BoardSolution, sol: AgendaSolution) -> List[Violation]:
    """All agenda violations against the closed A1-A13 catalog."""
    for sid in sol.placements:
        if not inst.has_session(sid):
            raise StructuralError(f"agenda places unknown session {sid}")
    for pid in board.assignment:
        inst.patient(pid)

    violations: List[Violation] = []
    grid = inst.grid

    schedulable = {s.id for s in schedulable_sessions(inst, board)}

    # A1: every mandatory schedulable session placed (maps cannot place twice).
    for sess in inst.sessions:
        if sess.id in schedulable and sess.is_mandatory() and sess.id not in sol.placements:
            violations.append(Violation("A1", (sess.id,), "mandatory session not scheduled"))

    placed: List[Tuple[SessionSpec, SessionPlacement, int]] = []
    for sid, pl in sorted(sol.placements.items()):
        sess = inst.session(sid)
        oid = board.assignment.get(sess.patient)
        if oid is None:
            raise StructuralError(f"session {sid} belongs to patient {sess.patient} missing from board")
        placed.append((sess, pl, oid))

    for sess, pl, oid in placed:
        sid = sess.id
        op = inst.operator(oid)
        shift = op.shift_in(pl.period)
        # A2: inside the shift, length within [min, ideal]
        if not (0 <= pl.period < grid.n_periods()):
            violations.append(Violation("A2", (sid,), f"period {pl.period} outside the grid"))
            continue
        if shift is None:
            violations.append(Violation("A2", (sid,), f"operator {oid} has no shift in period {pl.period}"))
        else:
            if pl.start < shift.start or pl.end > shift.end:
                violations.append(Violation(
                    "A2", (sid,),
                    f"[{pl.start},{pl.end}) outside shift [{shift.start},{shift.end})"))
            # A4: extensions must stay inside the shift
            if pl.before < 0 or pl.after < 0 or pl.before > pl.start - shift.start or pl.after > shift.end - pl.end:
                violations.append(Violation(
                    "A4", (sid,),
                    f"extensions before={pl.before} after={pl.after} leave shift [{shift.start},{shift.end})"))
        if not (sess.min_length <= pl.length <= sess.ideal_length):
            violations.append(Violation(
                "A2", (sid,),
                f"length {pl.length} outside [{sess.min_length},{sess.ideal_length}]"))
        # A3: location inside the session's macro-location
        loc_ids = {l.id for l in inst.locations_of_macro(sess.macro_location)}
        if pl.location not in loc_ids:
            violations.append(Violation(
                "A3", (sid,),
                f"location {pl.location} outside macro-location {sess.macro_location}"))
        # A11: extended interval clear of the patient's forbidden windows
        for w in inst.patient(sess.patient).forbidden:
            if w.period == pl.period and pl.ext_start < w.end and w.start < pl.ext_end:
                violations.append(Violation(
                    "A11", (sid,),
                    f"extended [{pl.ext_start},{pl.ext_end}) overlaps forbidden [{w.start},{w.end})"))
        # A13: forced time honored
        if sess.forced_time is not None and (pl.period, pl.start) != sess.forced_time:
            violations.append(Violation(
                "A13", (sid,),
                f"placed at ({pl.period},{pl.start}) instead of forced {sess.forced_time}"))

    # A5: individual parts of an operator's individual sessions must not overlap
    for i, (s1, p1, o1) in enumerate(placed):
        for s2, p2, o2 in placed[i + 1:]:
            if o1 != o2 or p1.period != p2.period:
                continue
            if s1.is_individual() and s2.is_individual():
                if p1.start < p2.end and p2.start < p1.end:
                    violations.append(Violation(
                        "A5", (s1.id, s2.id),
                        f"individual parts overlap for operator {o1}"))

    # A6: at most one session of a patient per period
    per_patient: Dict[Tuple[int, int], List[str]] = {}
    for sess, pl, _ in placed:
        per_patient.setdefault((sess.patient, pl.period), []).append(sess.id)
    for (pid, per), sids in sorted(per_patient.items()):
        if len(sids) > 1:
            violations.append(Violation(
                "A6", tuple(sids), f"patient {pid} has {len(sids)} sessions in period {per}"))

    # A7: fair slack among same-operator same-location same-period individual sessions
    groups: Dict[Tuple[int, str, int], List[Tuple[SessionSpec, int]]] = {}
    for sess, pl, oid in placed:
        if sess.is_individual():
            groups.setdefault((oid, pl.location, pl.period), []).append((sess, pl.length))
    for (oid, loc, per), pairs in sorted(groups.items()):
        violations.extend(_fair_slack_violations(pairs, f"operator {oid} location {loc} period {per}"))

    # A8: an operator cannot occupy two locations during one extended slot
    for i, (s1, p1, o1) in enumerate(placed):
        for s2, p2, o2 in placed[i + 1:]:
            if o1 != o2 or p1.period != p2.period or p1.location == p2.location:
                continue
            if p1.ext_start < p2.ext_end and p2.ext_start < p1.ext_end:
                violations.append(Violation(
                    "A8", (s1.id, s2.id),
                    f"operator {o1} in {p1.location} and {p2.location} simultaneously"))

    # A9: each scheduled patient's extended lengths cover the daily minimum
    ext_sums: Dict[int, int] = {}
    for sess, pl, _ in placed:
        ext_sums[sess.patient] = ext_sums.get(sess.patient, 0) + pl.ext_length
    for p in inst.patients:
        oid = board.assignment.get(p.id)
        if oid is None or oid == FICTITIOUS_OPERATOR:
            continue
        got = ext_sums.get(p.id, 0)
        if got < p.min_daily_length:
            violations.append(Violation(
                "A9", (f"patient {p.id}",),
                f"total extended length {got} below daily minimum {p.min_daily_length}"))

    # Occupancy per (location, period, slot) for A10/A12.
    occupancy: Dict[Tuple[str, int], Dict[int, int]] = {}
    for sess, pl, _ in placed:
        slots = occupancy.setdefault((pl.location, pl.period), {})
        for t in range(pl.ext_start, pl.ext_end):
            slots[t] = slots.get(t, 0) + 1

    # A10: capacity within open windows of capacity-limited locations
    for loc in inst.locations:
        if loc.capacity <= 0:
            continue
        for w in loc.open:
            slots = occupancy.get((loc.id, w.period), {})
            for t in range(w.start, w.end):
                if slots.get(t, 0) > loc.capacity:
                    violations.append(Violation(
                        "A10", (loc.id,),
                        f"{slots[t]} concurrent sessions at period {w.period} slot {t} exceed capacity {loc.capacity}"))

    # A12: balanced usage of locations inside one macro-location
    macro_members: Dict[str, List[str]] = {}
    for loc in inst.locations:
        macro_members.setdefault(loc.macro_location, []).append(loc.id)
    touched: Dict[Tuple[str, int], Set[int]] = {}
    for (loc_id, per), slots in occupancy.items():
        macro = inst.location(loc_id).macro_location
        touched.setdefault((macro, per), set()).update(slots)
    for (macro, per), slot_set in sorted(touched.items()):
        members = macro_members.get(macro, [])
        if len(members) < 2:
            continue
        for t in sorted(slot_set):
            counts = {lid: occupancy.get((lid, per), {}).get(t, 0) for lid in members}
            for l1 in members:
                for l2 in members:
                    if l1 != l2 and counts[l1] - counts[l2] > 2:
                        violations.append(Violation(
                            "A12", (l1, l2),
                            f"period {per} slot {t}: {counts[l1]} vs {counts[l2]} sessions"))

    return violations


def agenda_cost(inst: Instance, sol: AgendaSolution) -> CostVector:
    """Six lexicographic levels, highest priority first:

    length shortfalls, missed high-priority periods, high-priority start
    distance, unscheduled optional sessions, missed low-priority periods of
    optional sessions, and their start distance.
    """
    l6 = l5 = l4 = l3 = l2 = l1 = 0
    for sess in inst.sessions:
        pl = sol.placements.get(sess.id)
        if pl is None:
            if sess.optionality == "optional":
                l3 += 1
            continue
        l6 += abs(pl.length - sess.ideal_length)
        if sess.preference is not None and sess.is_individual():
            per, start, prio = sess.preference
            if prio == "high":
                l5 += abs(pl.period - per)
                if pl.period == per:
                    l4 += abs(pl.start - start)
            elif sess.optionality == "optional":
                l2 += abs(pl.period - per)
                if pl.period == per:
                    l1 += abs(pl.start - start)
    return CostVector((l6, l5, l4, l3, l2, l1))


def agenda_cost_checked(inst: Instance, board: BoardSolution, sol: AgendaSolution) -> CostVector:
    """agenda_cost with the feasibility precondition enforced."""
    violations = check_agenda(inst, board, sol)
    if violations:
        raise CostUndefinedError(f"cost undefined: agenda has {len(violations)} violations")
    return agenda_cost(inst, sol)
