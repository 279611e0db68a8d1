"""Shared builders for tests: hand-crafted fixtures and seeded tiny instances.

The tiny generators stay inside the oracle's enumeration limits on purpose;
they cover boards (up to 5 patients, 3 real operators) and agendas (up to 3
sessions, short shifts) with mixed preferences, forbidden windows, optional
sessions and supervised-extension pressure.
"""

from __future__ import annotations

import random
from typing import Dict, List, Optional, Tuple

from rehabsched.feas import BoardSolution
from rehabsched.model import (
    Instance,
    LocationSpec,
    Operator,
    OperatorPreference,
    Patient,
    PatientType,
    PeriodSpec,
    SessionSpec,
    TimeGrid,
    TimeWindow,
    validate_instance,
)

NEURO = PatientType("neurologic", "nolifter", "payer")
ORTHO = PatientType("orthopaedic", "nolifter", "free")
ALL_VALUES = ("neurologic", "orthopaedic", "covid_positive", "covid_negative", "outpatient")


def grid_with_slots(*slot_counts: int) -> TimeGrid:
    """A grid whose periods have exactly the given slot counts (10-minute slots)."""
    periods = []
    starts = ("08:00", "13:30")
    for i, n in enumerate(slot_counts):
        start_min = 8 * 60 if i == 0 else 13 * 60 + 30
        end_min = start_min + 10 * n
        periods.append(PeriodSpec(index=i, start=f"{start_min // 60:02d}:{start_min % 60:02d}",
                                  end=f"{end_min // 60:02d}:{end_min % 60:02d}"))
    return TimeGrid(slot_minutes=10, periods=tuple(periods))


def fictitious() -> Operator:
    return Operator(id=-1, total_time=None, max_patients=None)


def simple_operator(oid: int, periods_slots: Dict[int, Tuple[int, int]],
                    total_time: Optional[int] = None,
                    max_patients: Optional[int] = None,
                    qualifications=ALL_VALUES,
                    type_limits: Optional[Dict[str, int]] = None) -> Operator:
    return Operator(
        id=oid,
        total_time=total_time,
        max_patients=max_patients,
        type_limits=dict(type_limits or {}),
        shifts=[TimeWindow(per, a, b) for per, (a, b) in sorted(periods_slots.items())],
        qualifications=frozenset(qualifications),
    )


def build_instance(grid: TimeGrid, patients: List[Patient], operators: List[Operator],
                   locations: List[LocationSpec], sessions: List[SessionSpec],
                   expect_valid: bool = True) -> Instance:
    inst = Instance(grid=grid, patients=patients, operators=operators,
                    locations=locations, sessions=sessions)
    if expect_valid:
        issues = validate_instance(inst)
        assert not issues, f"fixture instance invalid: {issues}"
    return inst


def one_room(loc_id: str = "room", capacity: int = 1, macro: str = "floor0",
             grid: Optional[TimeGrid] = None) -> LocationSpec:
    g = grid or grid_with_slots(12)
    return LocationSpec(
        id=loc_id, capacity=capacity,
        open=[TimeWindow(p.index, 0, g.n_slots(p.index)) for p in g.periods],
        macro_location=macro)


def single_session_instance(min_length=4, ideal_length=6, shift=(0, 24),
                            n_slots=24, capacity=1, forced=None, preference=None,
                            kind="individual", optionality="mandatory",
                            min_daily=None) -> Instance:
    """One patient, one operator, one room, one session."""
    grid = grid_with_slots(n_slots)
    room = one_room(grid=grid, capacity=capacity)
    patient = Patient(id=0, ptype=NEURO,
                      min_daily_length=min_daily if min_daily is not None else min_length,
                      sessions=["s0"])
    op = simple_operator(0, {0: shift})
    sess = SessionSpec(id="s0", patient=0, kind=kind, min_length=min_length,
                       ideal_length=ideal_length, optionality=optionality,
                       macro_location="floor0", forced_time=forced, preference=preference)
    return build_instance(grid, [patient], [fictitious(), op], [room], [sess])


def tiny_board_instance(seed: int) -> Instance:
    """Random board-phase instance inside the oracle limits."""
    rng = random.Random(seed)
    grid = grid_with_slots(rng.choice((8, 10, 12)), rng.choice((6, 8)))
    n_ops = rng.randint(1, 3)
    n_patients = rng.randint(1, 5)

    locations = [one_room("gym0", capacity=rng.randint(1, 3), grid=grid)]
    if rng.random() < 0.4:
        locations.append(one_room("gym1", capacity=rng.randint(1, 2), grid=grid))
    macros = ["floor0"]

    operators = [fictitious()]
    for oid in range(n_ops):
        quals = rng.sample(ALL_VALUES, rng.randint(1, len(ALL_VALUES)))
        limits = {}
        if rng.random() < 0.4:
            t = PatientType(rng.choice(ALL_VALUES), rng.choice(("lifter", "nolifter")),
                            rng.choice(("payer", "free")))
            limits[t.key()] = rng.randint(1, 2)
        shift_spec = {}
        for per in range(grid.n_periods()):
            if rng.random() < 0.8:
                n = grid.n_slots(per)
                a = rng.randint(0, 2)
                b = min(n, a + rng.randint(4, n))
                if b - a >= 3:
                    shift_spec[per] = (a, b)
        if not shift_spec:
            shift_spec[0] = (0, grid.n_slots(0))
        operators.append(simple_operator(
            oid, shift_spec,
            total_time=rng.choice((None, rng.randint(4, 14))),
            max_patients=rng.choice((None, rng.randint(1, 4))),
            qualifications=quals, type_limits=limits))

    patients = []
    sessions = []
    for pid in range(n_patients):
        ptype = PatientType(rng.choice(ALL_VALUES), rng.choice(("lifter", "nolifter")),
                            rng.choice(("payer", "free")))
        sid = f"s{pid}"
        min_len = rng.randint(2, 4)
        ideal = min_len + rng.randint(0, 2)
        sessions.append(SessionSpec(
            id=sid, patient=pid, kind=rng.choice(("individual", "supervised")),
            min_length=min_len, ideal_length=ideal, optionality="mandatory",
            macro_location=rng.choice(macros)))
        prefs = []
        if rng.random() < 0.7 and n_ops > 0:
            ranked = rng.sample(range(n_ops), rng.randint(1, n_ops))
            prefs = [OperatorPreference(op, w) for w, op in enumerate(ranked)]
        history = []
        if rng.random() < 0.4 and n_ops > 0:
            history = [OperatorPreference(rng.randrange(n_ops), 0)]
        patients.append(Patient(
            id=pid, ptype=ptype, min_daily_length=rng.randint(min_len, min_len + 3),
            preferred_operators=prefs, history_preferences=history, sessions=[sid]))

    return build_instance(grid, patients, operators, locations, sessions)


def tiny_agenda_instance(seed: int) -> Instance:
    """Random agenda-phase instance: at most 3 sessions, short shifts."""
    rng = random.Random(seed)
    slots0 = rng.choice((6, 7, 8))
    slots1 = rng.choice((5, 6, 7))
    grid = grid_with_slots(slots0, slots1)

    n_locs = rng.choice((1, 1, 2))
    locations = [one_room("gym0", capacity=rng.choice((1, 2, 2)), grid=grid)]
    if n_locs == 2:
        locations.append(one_room("gym1", capacity=1, grid=grid))

    n_patients = rng.randint(1, 3)
    budget = 3
    plan: List[int] = []
    for pid in range(n_patients):
        take = 1 if budget <= (n_patients - pid) else rng.choice((1, 1, 2))
        plan.append(take)
        budget -= take

    n_ops = rng.randint(1, min(2, n_patients))
    operators = [fictitious()]
    for oid in range(n_ops):
        shift_spec = {}
        for per in range(2):
            if rng.random() < 0.85:
                n = grid.n_slots(per)
                a = rng.choice((0, 0, 1))
                b = min(n, a + rng.randint(5, n))
                shift_spec[per] = (a, b)
        if not shift_spec:
            shift_spec[0] = (0, grid.n_slots(0))
        operators.append(simple_operator(oid, shift_spec))

    patients = []
    sessions = []
    for pid in range(n_patients):
        sids = []
        mandatory_min = 0
        mandatory_ideal = 0
        for k in range(plan[pid]):
            sid = f"s{pid}_{k}"
            sids.append(sid)
            min_len = rng.randint(2, 3)
            ideal = min_len + rng.choice((0, 1, 1))
            optionality = "mandatory" if k == 0 else rng.choice(("optional", "optional", "mandatory"))
            preference = None
            if rng.random() < 0.5:
                per = rng.randrange(2)
                preference = (per, rng.randrange(max(1, grid.n_slots(per) - min_len)),
                              rng.choice(("high", "low")))
            forced = None
            if rng.random() < 0.08:
                forced = (0, rng.randrange(max(1, slots0 - min_len)))
            sessions.append(SessionSpec(
                id=sid, patient=pid, kind="individual" if rng.random() < 0.8 else "supervised",
                min_length=min_len, ideal_length=ideal, optionality=optionality,
                macro_location="floor0", forced_time=forced, preference=preference))
            if optionality == "mandatory":
                mandatory_min += min_len
                mandatory_ideal += ideal
        extra = rng.choice((0, 0, 1, 2))
        min_daily = min(mandatory_min + extra, max(mandatory_ideal, 1))
        forbidden = []
        if rng.random() < 0.4:
            per = rng.randrange(2)
            n = grid.n_slots(per)
            a = rng.randrange(n - 1)
            b = min(n, a + rng.randint(1, 3))
            forbidden = [TimeWindow(per, a, b)]
        patients.append(Patient(
            id=pid, ptype=NEURO, min_daily_length=min_daily, forbidden=forbidden,
            sessions=sids))

    return build_instance(grid, patients, operators, locations, sessions)


def board_for(inst: Instance) -> BoardSolution:
    """A feasible board: first feasible qualified operator, fictitious fallback."""
    from rehabsched import feas as _feas

    assignment: Dict[int, int] = {}
    for p in inst.patients:
        placed = False
        for op in inst.real_operators():
            trial = dict(assignment)
            trial[p.id] = op.id
            partial = BoardSolution(assignment=trial)
            bad = [v for v in _feas.check_board(inst, partial) if v.rule != "B1"]
            if not bad:
                assignment[p.id] = op.id
                placed = True
                break
        if not placed:
            assignment[p.id] = -1
    return BoardSolution(assignment=assignment)
