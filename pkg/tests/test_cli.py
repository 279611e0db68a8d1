"""CLI round trips through real files."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from rehabsched.cli import main
from rehabsched.iojson import load_agenda, load_board, load_instance


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_gen_solve_pipeline(workdir):
    assert main(["gen", "--preset", "nervi", "--seed", "4",
                 "--out", "inst.json"]) == 0
    inst = load_instance("inst.json")
    assert 37 <= len(inst.patients) <= 67

    assert main(["solve-board", "--instance", "inst.json", "--cutoff", "5",
                 "--mode", "anytime", "--seed", "1", "--out", "board.json",
                 "--report", "board_report.json"]) == 0
    board = load_board("board.json")
    assert set(board.assignment) == {p.id for p in inst.patients}
    report = json.loads(Path("board_report.json").read_text())
    assert report["outcome"] in ("OptimumFound", "Satisfiable")

    assert main(["solve-agenda", "--instance", "inst.json", "--board", "board.json",
                 "--cutoff", "10", "--mode", "anytime", "--variant", "optimized",
                 "--seed", "1", "--out", "agenda.json",
                 "--gantt", "agenda.png"]) == 0
    agenda = load_agenda("agenda.json")
    assert agenda.placements
    assert Path("agenda.png").stat().st_size > 0


def test_gen_from_params_file(workdir):
    Path("params.json").write_text(json.dumps({
        "n_patients": 8, "n_operators": 3, "ideal_length_dist": [3, 5]}))
    assert main(["gen", "--params", "params.json", "--seed", "2",
                 "--out", "small.json"]) == 0
    inst = load_instance("small.json")
    assert len(inst.patients) == 8

    assert main(["validate", "--instance", "small.json"]) == 0


def test_gen_rejects_unknown_params(workdir):
    Path("params.json").write_text(json.dumps({"n_patients": 8, "bogus": 1}))
    assert main(["gen", "--params", "params.json", "--out", "x.json"]) == 2


def test_oracle_cli(workdir):
    from helpers import tiny_board_instance
    from rehabsched.iojson import save_instance

    save_instance(tiny_board_instance(3), "tiny.json")
    assert main(["oracle", "--instance", "tiny.json", "--out", "oracle.json"]) == 0
    doc = json.loads(Path("oracle.json").read_text())
    assert doc["phase"] == "board"
    assert len(doc["cost"]) == 3


def test_bench_grid_cli(workdir):
    Path("spec.json").write_text(json.dumps({
        "patients_range": [6, 6, 1], "operators_range": [3, 3, 1],
        "reps": 1, "cutoff": 3.0, "mode": "anytime", "variant": "optimized",
        "seed_base": 5}))
    assert main(["bench", "grid", "--spec", "spec.json", "--out-dir", "out"]) == 0
    assert Path("out/grid.csv").exists()
    assert Path("out/grid.json").exists()
    assert Path("out/grid_board.png").exists()
    assert Path("out/grid_agenda.png").exists()
