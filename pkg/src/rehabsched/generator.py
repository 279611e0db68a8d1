"""Seeded synthetic instance generation.

Distribution shapes follow the published institute profiles: a dominant
neurological population, 10-minute slots over a morning and an afternoon
period, operators working one or both periods, one gym per floor group plus
a private capacity-1 room per inpatient.  All draws come from one
``random.Random(seed)`` (Mersenne Twister), giving identical instances for
identical parameters on every platform.

Gyms share their floor's macro-location, so the cross-location balance rule
acts between gyms; each private room forms its own macro-location and
bedside sessions are pinned to it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from .model import (
    Instance,
    LocationSpec,
    ModelError,
    Operator,
    OperatorPreference,
    Patient,
    PatientType,
    SessionSpec,
    TimeGrid,
    TimeWindow,
    default_grid,
    validate_instance,
)

PATIENT_VALUE_WEIGHTS = (
    ("neurologic", 0.45),
    ("orthopaedic", 0.25),
    ("outpatient", 0.15),
    ("covid_negative", 0.10),
    ("covid_positive", 0.05),
)


@dataclass(frozen=True)
class GenParams:
    """Knobs of the synthetic distribution; every default is overridable.

    ``min_length_dist`` is the gap drawn off the ideal length (clamped to at
    least 2 slots); ``optional_rate`` is the chance that a patient's second
    session, when present, is optional rather than mandatory.
    """

    n_patients: int = 37
    n_operators: int = 9
    n_floors: int = 1
    n_gyms: int = 1
    pct_individual: float = 0.7
    shift_length_dist: Tuple[int, int] = (18, 24)
    ideal_length_dist: Tuple[int, int] = (3, 9)
    min_length_dist: Tuple[int, int] = (0, 3)
    forbidden_rate: float = 0.2
    preference_rate: float = 0.5
    optional_rate: float = 0.7
    second_session_rate: float = 0.35
    bedside_rate: float = 0.25
    daily_slack: Tuple[int, int] = (0, 2)
    seed: int = 0

    def validate(self) -> None:
        for name in ("pct_individual", "forbidden_rate", "preference_rate",
                     "optional_rate", "second_session_rate", "bedside_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ModelError(f"{name} must be a probability, got {v}")
        for name in ("n_patients", "n_operators", "n_floors", "n_gyms"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        lo, hi = self.ideal_length_dist
        if not (0 < lo <= hi):
            raise ModelError("ideal_length_dist must be a non-empty positive range")
        glo, ghi = self.min_length_dist
        if not (0 <= glo <= ghi):
            raise ModelError("min_length_dist must be a non-negative range")
        slo, shi = self.shift_length_dist
        if not (0 < slo <= shi):
            raise ModelError("shift_length_dist must be a non-empty positive range")


def _weighted_value(rng: random.Random) -> str:
    x = rng.random()
    acc = 0.0
    for value, w in PATIENT_VALUE_WEIGHTS:
        acc += w
        if x < acc:
            return value
    return PATIENT_VALUE_WEIGHTS[-1][0]


def _make_operators(rng: random.Random, params: GenParams, grid: TimeGrid) -> List[Operator]:
    operators = [Operator(id=-1, total_time=None, max_patients=None)]
    per_capita = -(-params.n_patients // params.n_operators)  # ceil
    for oid in range(params.n_operators):
        x = rng.random()
        pattern = "both" if x < 0.7 else ("morning" if x < 0.9 else "afternoon")
        shifts = []
        for per in range(grid.n_periods()):
            if pattern == "morning" and per != 0:
                continue
            if pattern == "afternoon" and per != 1:
                continue
            n = grid.n_slots(per)
            length = min(n, rng.randint(*params.shift_length_dist))
            start = rng.randint(0, n - length)
            shifts.append(TimeWindow(per, start, start + length))
        capacity = sum(w.end - w.start for w in shifts)
        # contracts stay below the shift span so assigned sessions pack into
        # the day; the board sheds true overload onto the fictitious operator
        total_time = max(4, round(capacity * rng.uniform(0.7, 0.85)))
        max_patients = per_capita + rng.randint(1, 2)
        quals = frozenset(rng.sample([v for v, _ in PATIENT_VALUE_WEIGHTS],
                                     rng.randint(3, 5)))
        type_limits: Dict[str, int] = {}
        if rng.random() < 0.3:
            t = PatientType(_weighted_value(rng),
                            rng.choice(("lifter", "nolifter")),
                            rng.choice(("payer", "free")))
            type_limits[t.key()] = rng.randint(1, 3)
        operators.append(Operator(id=oid, total_time=total_time, max_patients=max_patients,
                                  type_limits=type_limits, shifts=shifts,
                                  qualifications=quals))
    return operators


def generate(params: GenParams) -> Instance:
    """Build a valid instance; identical params give identical instances."""
    params.validate()
    rng = random.Random(params.seed)
    grid = default_grid()

    floors = [f"floor{i}" for i in range(params.n_floors)]
    locations: List[LocationSpec] = []
    full_open = [TimeWindow(p.index, 0, grid.n_slots(p.index)) for p in grid.periods]
    gym_capacity = max(4, round(1.2 * params.n_operators / params.n_gyms))
    for g in range(params.n_gyms):
        floor = floors[g % params.n_floors]
        locations.append(LocationSpec(id=f"gym{g}", capacity=gym_capacity,
                                      open=list(full_open), macro_location=floor))

    operators = _make_operators(rng, params, grid)
    real_ops = [o for o in operators if not o.is_fictitious()]

    patients: List[Patient] = []
    sessions: List[SessionSpec] = []
    for pid in range(params.n_patients):
        value = _weighted_value(rng)
        ptype = PatientType(value,
                            "lifter" if rng.random() < 0.3 else "nolifter",
                            "payer" if rng.random() < 0.3 else "free")
        floor = floors[pid % params.n_floors]
        inpatient = value != "outpatient"
        room_macro: Optional[str] = None
        if inpatient:
            room_macro = f"room_p{pid}"
            locations.append(LocationSpec(id=f"room{pid}", capacity=1,
                                          open=list(full_open), macro_location=room_macro))

        n_sessions = 2 if rng.random() < params.second_session_rate else 1
        sids = []
        mandatory_min = 0
        mandatory_ideal = 0
        periods = rng.sample(range(grid.n_periods()), n_sessions)
        for k in range(n_sessions):
            sid = f"s{pid}_{k}"
            sids.append(sid)
            ideal = rng.randint(*params.ideal_length_dist)
            min_len = max(2, ideal - rng.randint(*params.min_length_dist))
            kind = "individual" if rng.random() < params.pct_individual else "supervised"
            optionality = "mandatory"
            if k > 0 and rng.random() < params.optional_rate:
                optionality = "optional"
            macro = floor
            if inpatient and rng.random() < params.bedside_rate:
                macro = room_macro
            preference = None
            if rng.random() < params.preference_rate:
                per = periods[k]
                start_max = max(0, grid.n_slots(per) - min_len)
                preference = (per, rng.randint(0, start_max),
                              "high" if rng.random() < 0.6 else "low")
            sessions.append(SessionSpec(id=sid, patient=pid, kind=kind,
                                        min_length=min_len, ideal_length=ideal,
                                        optionality=optionality, macro_location=macro,
                                        preference=preference))
            if optionality == "mandatory":
                mandatory_min += min_len
                mandatory_ideal += ideal

        min_daily = min(mandatory_min + rng.randint(*params.daily_slack),
                        max(mandatory_ideal, 1))
        forbidden = []
        if rng.random() < params.forbidden_rate:
            per = rng.randrange(grid.n_periods())
            n = grid.n_slots(per)
            span = rng.randint(2, 6)
            a = rng.randint(0, n - span)
            forbidden.append(TimeWindow(per, a, a + span))

        qualified = [o.id for o in real_ops if value in o.qualifications]
        if n_sessions > 1:
            # coordinators rank operators whose shifts can host both sessions
            by_id = {o.id: o for o in real_ops}
            covering = [oid for oid in qualified if len(by_id[oid].shifts) >= n_sessions]
            qualified = covering or qualified
        prefs: List[OperatorPreference] = []
        if qualified:
            ranked = rng.sample(qualified, min(len(qualified), rng.randint(1, 4)))
            prefs = [OperatorPreference(oid, w) for w, oid in enumerate(ranked)]
        history: List[OperatorPreference] = []
        if qualified and rng.random() < 0.5:
            history = [OperatorPreference(rng.choice(qualified), 0)]

        patients.append(Patient(id=pid, ptype=ptype, min_daily_length=min_daily,
                                forbidden=forbidden, preferred_operators=prefs,
                                history_preferences=history, sessions=sids))

    inst = Instance(grid=grid, patients=patients, operators=operators,
                    locations=locations, sessions=sessions)
    issues = validate_instance(inst)
    if issues:
        raise AssertionError(f"generator produced an invalid instance: {issues[:3]}")
    return inst


_PRESETS = {
    "nervi": {"operators": (9, 18), "patients": (37, 67), "density": (2.4, 5.2),
              "floors": 1, "gyms": 1},
    "castel_goffredo": {"operators": (11, 17), "patients": (51, 78), "density": (3.5, 6.4),
                        "floors": 2, "gyms": 3},
}


def preset(name: str, seed: int = 0) -> GenParams:
    """Parameters matching one of the published institute profiles; the seed
    picks the operator and patient counts inside the profile's ranges."""
    try:
        profile = _PRESETS[name]
    except KeyError:
        raise ModelError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}") from None
    rng = random.Random(("preset", name, seed).__repr__())
    lo_d, hi_d = profile["density"]
    for _ in range(1000):
        n_ops = rng.randint(*profile["operators"])
        n_pat = rng.randint(*profile["patients"])
        if lo_d <= n_pat / n_ops <= hi_d:
            return GenParams(n_patients=n_pat, n_operators=n_ops,
                             n_floors=profile["floors"], n_gyms=profile["gyms"],
                             seed=seed)
    raise AssertionError("density rejection sampling failed")


def cell_params(n_patients: int, n_operators: int, seed: int) -> GenParams:
    """Parameters for one benchmark grid cell.

    A lighter profile than the institute presets: short preference lists and
    no slack on the daily minimum, so at low density the optima are clean and
    the phase transition shows up as patient counts grow.
    """
    return GenParams(n_patients=n_patients, n_operators=n_operators,
                     n_floors=1, n_gyms=1,
                     ideal_length_dist=(3, 7), min_length_dist=(0, 2),
                     forbidden_rate=0.4, preference_rate=0.3,
                     second_session_rate=0.25, daily_slack=(0, 0),
                     seed=seed)
