"""JSON (de)serialization for instances and solution files.

The canonical instance document has top-level keys ``grid``, ``patients``,
``operators``, ``locations``, ``sessions``; see docs/instance.schema.json.
Solution files are ``board.json`` (flat map patient id -> operator id) and
``agenda.json`` (array of placement records).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Union

from .feas import AgendaSolution, BoardSolution, SessionPlacement
from .model import (
    Instance,
    LocationSpec,
    ModelError,
    Operator,
    OperatorPreference,
    Patient,
    PatientType,
    PeriodSpec,
    SessionSpec,
    TimeGrid,
    TimeWindow,
)

PathLike = Union[str, Path]


def _window_to_json(w: TimeWindow) -> Dict[str, int]:
    return {"period": w.period, "start": w.start, "end": w.end}


def _window_from_json(d: Dict[str, int]) -> TimeWindow:
    return TimeWindow(period=int(d["period"]), start=int(d["start"]), end=int(d["end"]))


def instance_to_json(inst: Instance) -> Dict[str, Any]:
    return {
        "grid": {
            "slot_minutes": inst.grid.slot_minutes,
            "periods": [
                {"index": p.index, "start": p.start, "end": p.end} for p in inst.grid.periods
            ],
        },
        "patients": [
            {
                "id": p.id,
                "ptype": {"value": p.ptype.value, "needs": p.ptype.needs, "status": p.ptype.status},
                "min_daily_length": p.min_daily_length,
                "forbidden": [_window_to_json(w) for w in p.forbidden],
                "preferred_operators": [
                    {"operator": e.operator, "weight": e.weight} for e in p.preferred_operators
                ],
                "history_preferences": [
                    {"operator": e.operator, "weight": e.weight} for e in p.history_preferences
                ],
                "sessions": list(p.sessions),
            }
            for p in inst.patients
        ],
        "operators": [
            {
                "id": o.id,
                "total_time": o.total_time,
                "max_patients": o.max_patients,
                "type_limits": dict(o.type_limits),
                "shifts": [_window_to_json(w) for w in o.shifts],
                "qualifications": sorted(o.qualifications),
            }
            for o in inst.operators
        ],
        "locations": [
            {
                "id": l.id,
                "capacity": l.capacity,
                "open": [_window_to_json(w) for w in l.open],
                "macro_location": l.macro_location,
            }
            for l in inst.locations
        ],
        "sessions": [
            {
                "id": s.id,
                "patient": s.patient,
                "kind": s.kind,
                "min_length": s.min_length,
                "ideal_length": s.ideal_length,
                "optionality": s.optionality,
                "macro_location": s.macro_location,
                "forced_time": None if s.forced_time is None
                else {"period": s.forced_time[0], "slot": s.forced_time[1]},
                "preference": None if s.preference is None
                else {"period": s.preference[0], "start": s.preference[1], "priority": s.preference[2]},
            }
            for s in inst.sessions
        ],
    }


def instance_from_json(doc: Dict[str, Any]) -> Instance:
    try:
        grid = TimeGrid(
            slot_minutes=int(doc["grid"]["slot_minutes"]),
            periods=tuple(
                PeriodSpec(index=int(p["index"]), start=str(p["start"]), end=str(p["end"]))
                for p in doc["grid"]["periods"]
            ),
        )
        patients = [
            Patient(
                id=int(p["id"]),
                ptype=PatientType(
                    value=p["ptype"]["value"], needs=p["ptype"]["needs"], status=p["ptype"]["status"]
                ),
                min_daily_length=int(p["min_daily_length"]),
                forbidden=[_window_from_json(w) for w in p.get("forbidden", [])],
                preferred_operators=[
                    OperatorPreference(operator=int(e["operator"]), weight=int(e["weight"]))
                    for e in p.get("preferred_operators", [])
                ],
                history_preferences=[
                    OperatorPreference(operator=int(e["operator"]), weight=int(e["weight"]))
                    for e in p.get("history_preferences", [])
                ],
                sessions=[str(sid) for sid in p.get("sessions", [])],
            )
            for p in doc["patients"]
        ]
        operators = [
            Operator(
                id=int(o["id"]),
                total_time=None if o.get("total_time") is None else int(o["total_time"]),
                max_patients=None if o.get("max_patients") is None else int(o["max_patients"]),
                type_limits={str(k): int(v) for k, v in o.get("type_limits", {}).items()},
                shifts=[_window_from_json(w) for w in o.get("shifts", [])],
                qualifications=frozenset(o.get("qualifications", [])),
            )
            for o in doc["operators"]
        ]
        locations = [
            LocationSpec(
                id=str(l["id"]),
                capacity=int(l["capacity"]),
                open=[_window_from_json(w) for w in l.get("open", [])],
                macro_location=str(l["macro_location"]),
            )
            for l in doc["locations"]
        ]
        sessions = [
            SessionSpec(
                id=str(s["id"]),
                patient=int(s["patient"]),
                kind=str(s["kind"]),
                min_length=int(s["min_length"]),
                ideal_length=int(s["ideal_length"]),
                optionality=str(s["optionality"]),
                macro_location=str(s["macro_location"]),
                forced_time=None if s.get("forced_time") is None
                else (int(s["forced_time"]["period"]), int(s["forced_time"]["slot"])),
                preference=None if s.get("preference") is None
                else (int(s["preference"]["period"]), int(s["preference"]["start"]),
                      str(s["preference"]["priority"])),
            )
            for s in doc["sessions"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed instance document: {exc}") from exc
    return Instance(grid=grid, patients=patients, operators=operators,
                    locations=locations, sessions=sessions)


def board_to_json(board: BoardSolution) -> Dict[str, int]:
    return {str(pid): oid for pid, oid in sorted(board.assignment.items())}


def board_from_json(doc: Dict[str, Any]) -> BoardSolution:
    return BoardSolution(assignment={int(pid): int(oid) for pid, oid in doc.items()})


def placement_to_json(pl: SessionPlacement) -> Dict[str, Any]:
    return {
        "session": pl.session,
        "period": pl.period,
        "start": pl.start,
        "length": pl.length,
        "before": pl.before,
        "after": pl.after,
        "location": pl.location,
    }


def agenda_to_json(agenda: AgendaSolution) -> List[Dict[str, Any]]:
    return [placement_to_json(pl) for _, pl in sorted(agenda.placements.items())]


def agenda_from_json(doc: List[Dict[str, Any]]) -> AgendaSolution:
    placements = {}
    for rec in doc:
        pl = SessionPlacement(
            session=str(rec["session"]),
            period=int(rec["period"]),
            start=int(rec["start"]),
            length=int(rec["length"]),
            before=int(rec["before"]),
            after=int(rec["after"]),
            location=str(rec["location"]),
        )
        placements[pl.session] = pl
    return AgendaSolution(placements=placements)


def load_instance(path: PathLike) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_json(json.load(fh))


def save_instance(inst: Instance, path: PathLike) -> None:
    Path(path).write_text(json.dumps(instance_to_json(inst), indent=2) + "\n", encoding="utf-8")


def load_board(path: PathLike) -> BoardSolution:
    with open(path, "r", encoding="utf-8") as fh:
        return board_from_json(json.load(fh))


def save_board(board: BoardSolution, path: PathLike) -> None:
    Path(path).write_text(json.dumps(board_to_json(board), indent=2) + "\n", encoding="utf-8")


def load_agenda(path: PathLike) -> AgendaSolution:
    with open(path, "r", encoding="utf-8") as fh:
        return agenda_from_json(json.load(fh))


def save_agenda(agenda: AgendaSolution, path: PathLike) -> None:
    Path(path).write_text(json.dumps(agenda_to_json(agenda), indent=2) + "\n", encoding="utf-8")
