"""HTTP service: coordinator workflow, invariants, persistence."""

from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

from rehabsched.generator import cell_params, generate, preset
from rehabsched.iojson import instance_to_json
from rehabsched.service import create_app


def wait_done(client, ws_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        job = client.get(f"/workspaces/{ws_id}/jobs/current").json()
        if job["state"] in ("done", "cancelled"):
            return job
        time.sleep(0.05)
    raise AssertionError("job did not finish in time")


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=str(tmp_path / "data"), default_cutoff=5.0, workers=2)
    with TestClient(app) as c:
        c.data_dir = str(tmp_path / "data")
        yield c


@pytest.fixture()
def nervi_doc():
    return instance_to_json(generate(preset("nervi", seed=8)))


class TestWorkspaceLifecycle:
    def test_create_and_fetch(self, client, nervi_doc):
        r = client.post("/workspaces", json=nervi_doc)
        assert r.status_code == 201
        ws_id = r.json()["id"]
        detail = client.get(f"/workspaces/{ws_id}").json()
        assert detail["has_board"] is False
        assert client.get("/workspaces").json()[0]["id"] == ws_id

    def test_invalid_instance_rejected_with_issues(self, client, nervi_doc):
        bad = dict(nervi_doc)
        bad["operators"] = [o for o in bad["operators"] if o["id"] != -1]
        r = client.post("/workspaces", json=bad)
        assert r.status_code == 422
        assert any("fictitious" in i["message"] for i in r.json()["issues"])

    def test_unknown_workspace_is_404(self, client):
        assert client.get("/workspaces/nope").status_code == 404
        assert client.get("/workspaces/nope/board").status_code == 404


class TestBoardFlow:
    def _solved_board(self, client, doc):
        ws_id = client.post("/workspaces", json=doc).json()["id"]
        r = client.post(f"/workspaces/{ws_id}/board/solve?seed=1&cutoff=5")
        assert r.status_code == 202
        job = wait_done(client, ws_id)
        assert job["outcome"] in ("OptimumFound", "Satisfiable")
        return ws_id

    def test_solve_and_read_board(self, client, nervi_doc):
        ws_id = self._solved_board(client, nervi_doc)
        board = client.get(f"/workspaces/{ws_id}/board").json()
        assert board["violations"] == []
        assert board["cost"] is not None
        by_op = {w["operator"]: w for w in board["workloads"]}
        for w in board["workloads"]:
            if w["total_time"] is not None:
                assert w["workload"] <= w["total_time"]
        assert set(board["assignment"]) == {str(p["id"]) for p in nervi_doc["patients"]}
        assert -1 in by_op

    def test_patch_to_fictitious_always_allowed(self, client, nervi_doc):
        ws_id = self._solved_board(client, nervi_doc)
        board = client.get(f"/workspaces/{ws_id}/board").json()
        pid = next(iter(board["assignment"]))
        r = client.patch(f"/workspaces/{ws_id}/board",
                         json=[{"patient": int(pid), "operator": -1}])
        assert r.status_code == 200
        assert r.json()["dirty"] is True
        assert r.json()["assignment"][pid] == -1

    def test_patch_violating_hard_constraint_rejected(self, client):
        # one operator with a type limit of 1; forcing a second same-type
        # patient onto it must bounce with the offending rule
        doc = instance_to_json(generate(cell_params(6, 2, seed=4)))
        for op in doc["operators"]:
            if op["id"] == 0:
                op["max_patients"] = 1
        ws_id = self._solved_board(client, doc)
        board = client.get(f"/workspaces/{ws_id}/board").json()
        onto0 = [pid for pid, oid in board["assignment"].items() if oid == 0]
        others = [pid for pid, oid in board["assignment"].items() if oid not in (0, -1)]
        if not others:
            others = [pid for pid, oid in board["assignment"].items() if oid == -1]
        assert others, "need a patient to move onto the full operator"
        r = client.patch(f"/workspaces/{ws_id}/board",
                         json=[{"patient": int(others[0]), "operator": 0}])
        if len(onto0) >= 1:
            assert r.status_code == 422
            assert any(v["rule"] == "B3" for v in r.json()["violations"])

    def test_edit_invalidates_agenda(self, client, nervi_doc):
        ws_id = self._solved_board(client, nervi_doc)
        client.post(f"/workspaces/{ws_id}/agenda/solve?seed=1&cutoff=5")
        job = wait_done(client, ws_id)
        if job["outcome"] not in ("OptimumFound", "Satisfiable"):
            pytest.skip("agenda did not solve within the small cutoff")
        assert client.get(f"/workspaces/{ws_id}/agenda").status_code == 200
        board = client.get(f"/workspaces/{ws_id}/board").json()
        pid = next(iter(board["assignment"]))
        client.patch(f"/workspaces/{ws_id}/board",
                     json=[{"patient": int(pid), "operator": -1}])
        assert client.get(f"/workspaces/{ws_id}/agenda").status_code == 404


class TestAgendaFlow:
    def test_agenda_requires_board(self, client, nervi_doc):
        ws_id = client.post("/workspaces", json=nervi_doc).json()["id"]
        r = client.post(f"/workspaces/{ws_id}/agenda/solve")
        assert r.status_code == 409

    def test_gantt_segments_cover_extended_interval(self, client, nervi_doc):
        ws_id = client.post("/workspaces", json=nervi_doc).json()["id"]
        client.post(f"/workspaces/{ws_id}/board/solve?seed=1&cutoff=5")
        wait_done(client, ws_id)
        client.post(f"/workspaces/{ws_id}/agenda/solve?seed=1&cutoff=10")
        job = wait_done(client, ws_id, timeout=60)
        if job["outcome"] not in ("OptimumFound", "Satisfiable"):
            pytest.skip("agenda did not solve within the small cutoff")
        agenda = client.get(f"/workspaces/{ws_id}/agenda").json()
        assert agenda["violations"] == []
        placements = {p["session"]: p for p in agenda["placements"]}
        seen = set()
        for row in agenda["gantt"]:
            for block in row["blocks"]:
                seen.add(block["session"])
                pl = placements[block["session"]]
                ext_start = pl["start"] - pl["before"]
                ext_end = pl["start"] + pl["length"] + pl["after"]
                assert block["start"] == ext_start
                assert block["end"] == ext_end
                segs = block["segments"]
                assert segs[0]["start"] == ext_start
                assert segs[-1]["end"] == ext_end
                for a, b in zip(segs, segs[1:]):
                    assert a["end"] == b["start"]
                kinds = {s["kind"] for s in segs}
                assert kinds <= {"individual", "supervised"}
        assert seen == set(placements)

    def test_job_conflict_is_409(self, client, nervi_doc):
        ws_id = client.post("/workspaces", json=nervi_doc).json()["id"]
        # exact mode on a full institute cannot finish quickly
        client.post(f"/workspaces/{ws_id}/board/solve?cutoff=30&seed=1&mode=exact")
        r = client.post(f"/workspaces/{ws_id}/board/solve?seed=2")
        assert r.status_code == 409
        client.delete(f"/workspaces/{ws_id}/jobs/current")
        wait_done(client, ws_id)

    def test_cancellation(self, client, nervi_doc):
        ws_id = client.post("/workspaces", json=nervi_doc).json()["id"]
        client.post(f"/workspaces/{ws_id}/board/solve?cutoff=60&seed=1&mode=exact")
        r = client.delete(f"/workspaces/{ws_id}/jobs/current")
        assert r.status_code == 200
        job = wait_done(client, ws_id)
        assert job["state"] in ("done", "cancelled")


class TestPersistence:
    def test_restart_round_trip(self, client, nervi_doc, tmp_path):
        ws_id = client.post("/workspaces", json=nervi_doc).json()["id"]
        client.post(f"/workspaces/{ws_id}/board/solve?seed=1&cutoff=5")
        wait_done(client, ws_id)
        board_before = client.get(f"/workspaces/{ws_id}/board").json()

        app2 = create_app(data_dir=client.data_dir, default_cutoff=5.0)
        with TestClient(app2) as client2:
            board_after = client2.get(f"/workspaces/{ws_id}/board").json()
            assert board_after == board_before
            assert client2.get(f"/workspaces/{ws_id}").json()["id"] == ws_id
