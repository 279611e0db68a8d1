"""Coordinator-facing HTTP service.

Workflow: upload an instance, solve the board, optionally re-assign patients
by hand (hard constraints stay enforced, preferences may be overridden), then
solve the agenda and read the timetable.  Editing the board invalidates any
stored agenda.  Solves run as background jobs, one per workspace, publishing
their latest cost so clients can poll progress; every solution served is
re-verified against the checker when read.

State is a directory of JSON files, one per workspace, reloaded on startup.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path
from typing import Any, Dict, List, Optional

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import JSONResponse

from . import feas, iojson
from .agenda import solve_agenda
from .board import solve_board
from .feas import AgendaSolution, BoardSolution
from .model import FICTITIOUS_OPERATOR, Instance, ModelError, validate_instance
from .solvereport import SolveConfig


class Workspace:
    def __init__(self, ws_id: str, instance: Instance):
        self.id = ws_id
        self.instance = instance
        self.board: Optional[BoardSolution] = None
        self.dirty = False
        self.agenda: Optional[AgendaSolution] = None
        self.job: Optional[Dict[str, Any]] = None
        self.cancel_event: Optional[threading.Event] = None
        self.lock = threading.RLock()

    def to_file_json(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "instance": iojson.instance_to_json(self.instance),
            "board": None if self.board is None else iojson.board_to_json(self.board),
            "dirty": self.dirty,
            "agenda": None if self.agenda is None else iojson.agenda_to_json(self.agenda),
        }

    @classmethod
    def from_file_json(cls, doc: Dict[str, Any]) -> "Workspace":
        ws = cls(doc["id"], iojson.instance_from_json(doc["instance"]))
        if doc.get("board") is not None:
            ws.board = iojson.board_from_json(doc["board"])
        ws.dirty = bool(doc.get("dirty", False))
        if doc.get("agenda") is not None:
            ws.agenda = iojson.agenda_from_json(doc["agenda"])
        return ws

    def summary(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "patients": len(self.instance.patients),
            "operators": len(self.instance.real_operators()),
            "sessions": len(self.instance.sessions),
            "has_board": self.board is not None,
            "board_dirty": self.dirty,
            "has_agenda": self.agenda is not None,
            "job": self.job,
        }


def _board_payload(ws: Workspace) -> Dict[str, Any]:
    board = ws.board
    violations = feas.check_board(ws.instance, board)
    cost = feas.board_cost(ws.instance, board).as_list() if not violations else None
    workloads = []
    by_op: Dict[int, List[int]] = {}
    for pid, oid in board.assignment.items():
        by_op.setdefault(oid, []).append(pid)
    for op in ws.instance.operators:
        assigned = sorted(by_op.get(op.id, []))
        load, per_patient = feas.operator_workload(ws.instance, assigned, with_breakdown=True)
        workloads.append({
            "operator": op.id,
            "patients": assigned,
            "workload": load,
            "total_time": op.total_time,
            "max_patients": op.max_patients,
            "per_patient": {str(pid): w for pid, w in sorted(per_patient.items())},
        })
    ranks = {}
    for pid, oid in board.assignment.items():
        ranks[str(pid)] = feas.preference_weight(ws.instance.patient(pid), oid)
    return {
        "assignment": iojson.board_to_json(board),
        "cost": cost,
        "dirty": ws.dirty,
        "violations": [v.to_json() for v in violations],
        "workloads": workloads,
        "preference_weights": ranks,
    }


def _gantt_projection(ws: Workspace) -> List[Dict[str, Any]]:
    inst = ws.instance
    rows: List[Dict[str, Any]] = []
    for op in inst.real_operators():
        for shift in sorted(op.shifts, key=lambda s: s.period):
            blocks = []
            for sid, pl in sorted(ws.agenda.placements.items()):
                sess = inst.session(sid)
                if ws.board.assignment.get(sess.patient) != op.id or pl.period != shift.period:
                    continue
                segments = []
                if pl.before:
                    segments.append({"kind": "supervised", "start": pl.ext_start, "end": pl.start})
                segments.append({"kind": "individual", "start": pl.start, "end": pl.end})
                if pl.after:
                    segments.append({"kind": "supervised", "start": pl.end, "end": pl.ext_end})
                blocks.append({
                    "session": sid,
                    "patient": sess.patient,
                    "location": pl.location,
                    "start": pl.ext_start,
                    "end": pl.ext_end,
                    "segments": segments,
                })
            blocks.sort(key=lambda b: b["start"])
            rows.append({
                "operator": op.id,
                "period": shift.period,
                "shift": {"start": shift.start, "end": shift.end},
                "blocks": blocks,
            })
    return rows


def create_app(data_dir: str = "./workspaces", default_cutoff: float = 30.0,
               workers: int = 2) -> FastAPI:
    app = FastAPI(title="rehabsched", version="0.1.0")
    root = Path(data_dir)
    root.mkdir(parents=True, exist_ok=True)
    workspaces: Dict[str, Workspace] = {}
    job_slots = threading.Semaphore(max(1, workers))

    for path in sorted(root.glob("*.json")):
        try:
            ws = Workspace.from_file_json(json.loads(path.read_text(encoding="utf-8")))
            workspaces[ws.id] = ws
        except (ModelError, KeyError, json.JSONDecodeError):
            continue

    def persist(ws: Workspace) -> None:
        path = root / f"{ws.id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(ws.to_file_json(), indent=2), encoding="utf-8")
        tmp.replace(path)

    def get_ws(ws_id: str) -> Workspace:
        ws = workspaces.get(ws_id)
        if ws is None:
            raise HTTPException(status_code=404, detail=f"unknown workspace {ws_id}")
        return ws

    def start_job(ws: Workspace, phase: str, runner) -> Dict[str, Any]:
        with ws.lock:
            if ws.job is not None and ws.job["state"] in ("queued", "running"):
                raise HTTPException(status_code=409, detail="job already running")
            cancel = threading.Event()
            ws.cancel_event = cancel
            ws.job = {"phase": phase, "state": "queued", "progress": None,
                      "outcome": None, "started_at": time.time()}

        def work():
            with job_slots:
                with ws.lock:
                    if cancel.is_set():
                        ws.job["state"] = "cancelled"
                        return
                    ws.job["state"] = "running"
                try:
                    runner(cancel)
                finally:
                    with ws.lock:
                        if ws.job["state"] == "running":
                            ws.job["state"] = "cancelled" if cancel.is_set() else "done"

        threading.Thread(target=work, daemon=True).start()
        return ws.job

    @app.post("/workspaces", status_code=201)
    def create_workspace(body: Dict[str, Any] = Body(...)):
        try:
            inst = iojson.instance_from_json(body)
        except ModelError as exc:
            return JSONResponse(status_code=422, content={"issues": [str(exc)]})
        issues = validate_instance(inst)
        if issues:
            return JSONResponse(status_code=422, content={
                "issues": [{"entity": i.entity, "message": i.message} for i in issues]})
        ws = Workspace(uuid.uuid4().hex[:12], inst)
        workspaces[ws.id] = ws
        persist(ws)
        return {"id": ws.id}

    @app.get("/workspaces")
    def list_workspaces():
        return [workspaces[k].summary() for k in sorted(workspaces)]

    @app.get("/workspaces/{ws_id}")
    def workspace_detail(ws_id: str):
        return get_ws(ws_id).summary()

    @app.post("/workspaces/{ws_id}/board/solve", status_code=202)
    def solve_board_endpoint(ws_id: str, cutoff: Optional[float] = None,
                             mode: str = "anytime", seed: int = 0):
        ws = get_ws(ws_id)
        cfg = SolveConfig(mode=mode, cutoff=cutoff or default_cutoff, seed=seed)

        def runner(cancel):
            def on_improve(cost, _sol):
                with ws.lock:
                    ws.job["progress"] = cost.as_list()
            report = solve_board(ws.instance, cfg, cancel=cancel, on_improve=on_improve)
            with ws.lock:
                ws.job["outcome"] = report.outcome
                if report.best is not None:
                    ws.board = report.best
                    ws.dirty = False
                    ws.agenda = None
                    persist(ws)

        return {"job": start_job(ws, "board", runner)}

    @app.get("/workspaces/{ws_id}/board")
    def get_board(ws_id: str):
        ws = get_ws(ws_id)
        with ws.lock:
            if ws.board is None:
                raise HTTPException(status_code=404, detail="no board solved yet")
            return _board_payload(ws)

    @app.patch("/workspaces/{ws_id}/board")
    def edit_board(ws_id: str, edits: List[Dict[str, int]] = Body(...)):
        ws = get_ws(ws_id)
        with ws.lock:
            if ws.board is None:
                raise HTTPException(status_code=404, detail="no board to edit")
            if ws.job is not None and ws.job["state"] in ("queued", "running"):
                raise HTTPException(status_code=409, detail="job running")
            trial = dict(ws.board.assignment)
            for edit in edits:
                try:
                    pid, oid = int(edit["patient"]), int(edit["operator"])
                except (KeyError, TypeError, ValueError):
                    raise HTTPException(status_code=422,
                                        detail="edits must be {patient, operator} pairs")
                if not ws.instance.has_patient(pid) or not ws.instance.has_operator(oid):
                    raise HTTPException(status_code=422,
                                        detail=f"unknown patient or operator in edit {edit}")
                trial[pid] = oid
            candidate = BoardSolution(assignment=trial)
            violations = feas.check_board(ws.instance, candidate)
            # reassignments to the fictitious operator can never break a hard
            # constraint; any other violating edit is refused outright
            if violations and any(int(e["operator"]) != FICTITIOUS_OPERATOR for e in edits):
                return JSONResponse(status_code=422, content={
                    "violations": [v.to_json() for v in violations]})
            ws.board = candidate
            ws.dirty = True
            ws.agenda = None
            persist(ws)
            return _board_payload(ws)

    @app.post("/workspaces/{ws_id}/agenda/solve", status_code=202)
    def solve_agenda_endpoint(ws_id: str, cutoff: Optional[float] = None,
                              mode: str = "anytime", variant: str = "optimized",
                              seed: int = 0):
        ws = get_ws(ws_id)
        with ws.lock:
            if ws.board is None:
                raise HTTPException(status_code=409, detail="solve the board first")
            board = ws.board
        cfg = SolveConfig(mode=mode, cutoff=cutoff or default_cutoff, seed=seed)

        def runner(cancel):
            def on_improve(cost, _sol):
                with ws.lock:
                    ws.job["progress"] = cost.as_list()
            report = solve_agenda(ws.instance, board, cfg, variant,
                                  cancel=cancel, on_improve=on_improve)
            with ws.lock:
                ws.job["outcome"] = report.outcome
                if report.best is not None:
                    ws.agenda = report.best
                    persist(ws)

        return {"job": start_job(ws, "agenda", runner)}

    @app.get("/workspaces/{ws_id}/agenda")
    def get_agenda(ws_id: str):
        ws = get_ws(ws_id)
        with ws.lock:
            if ws.agenda is None:
                raise HTTPException(status_code=404, detail="no agenda solved yet")
            violations = feas.check_agenda(ws.instance, ws.board, ws.agenda)
            cost = feas.agenda_cost(ws.instance, ws.agenda)
            unassigned = sorted(pid for pid, oid in ws.board.assignment.items()
                                if oid == FICTITIOUS_OPERATOR)
            return {
                "placements": iojson.agenda_to_json(ws.agenda),
                "cost": cost.as_list(),
                "violations": [v.to_json() for v in violations],
                "gantt": _gantt_projection(ws),
                "unassigned_patients": unassigned,
            }

    @app.get("/workspaces/{ws_id}/jobs/current")
    def get_job(ws_id: str):
        ws = get_ws(ws_id)
        with ws.lock:
            if ws.job is None:
                raise HTTPException(status_code=404, detail="no job")
            return ws.job

    @app.delete("/workspaces/{ws_id}/jobs/current")
    def cancel_job(ws_id: str):
        ws = get_ws(ws_id)
        with ws.lock:
            if ws.job is None or ws.job["state"] not in ("queued", "running"):
                raise HTTPException(status_code=404, detail="no active job")
            ws.cancel_event.set()
            return {"cancelling": True}

    return app
