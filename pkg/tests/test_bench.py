"""Benchmark harness: modal classification, grid runs, checkpoints, figures."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from rehabsched.bench import (
    GridSpec,
    modal_outcome,
    optimum_frontier,
    run_grid,
    summarize,
)
from rehabsched.model import CostVector, ModelError
from rehabsched.solvereport import SolveReport


class TestModal:
    def test_plain_majority(self):
        assert modal_outcome(["OptimumFound"] * 3 + ["Satisfiable"]) == "OptimumFound"

    def test_tie_breaks_toward_worse(self):
        assert modal_outcome(["OptimumFound", "Satisfiable"]) == "Satisfiable"
        assert modal_outcome(["Satisfiable", "Unknown"]) == "Unknown"
        assert modal_outcome(["Unknown", "Unsatisfiable"]) == "Unsatisfiable"


class TestSummarize:
    def _report(self, outcome, wall=1.0, trace=()):
        return SolveReport(outcome=outcome, best=None, cost=None, wall_time=wall,
                           trace=[(t, CostVector((0,))) for t in trace])

    def test_all_optimum(self):
        table = summarize([self._report("OptimumFound", wall=2.0, trace=(0.5, 1.5))] * 4)
        assert table.pct_optimum == 100.0
        assert table.mean_time_to_optimum == 2.0
        assert table.mean_time_last_improvement == 1.5

    def test_mixed_composition(self):
        reports = ([self._report("OptimumFound")] * 2
                   + [self._report("Satisfiable")]
                   + [self._report("Unknown")])
        table = summarize(reports)
        assert table.pct_optimum == 50.0
        assert table.pct_satisfiable == 25.0
        assert table.pct_unknown == 25.0
        assert table.pct_unsatisfiable == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ModelError):
            summarize([])


@pytest.fixture(scope="module")
def small_grid(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid")
    spec = GridSpec(patients_range=(6, 10, 4), operators_range=(3, 5, 2),
                    reps=2, cutoff=3.0, mode="anytime", variant="optimized", seed_base=7)
    report = run_grid(spec, out_dir=str(out))
    return spec, out, report


class TestRunGrid:
    def test_all_cells_present(self, small_grid):
        spec, out, report = small_grid
        assert set(report.cells) == {(p, o) for p in (6, 10) for o in (3, 5)}
        for cell in report.cells.values():
            assert len(cell.board_outcomes) == spec.reps
            assert len(cell.agenda_outcomes) == spec.reps

    def test_outputs_written(self, small_grid):
        _, out, _ = small_grid
        assert (out / "grid.csv").exists()
        assert (out / "grid.json").exists()
        assert (out / "checkpoint.json").exists()
        doc = json.loads((out / "grid.json").read_text())
        assert "board_frontier" in doc and "agenda_frontier" in doc

    def test_rerun_is_stable_excluding_timings(self, small_grid):
        spec, out, report = small_grid
        again = run_grid(spec, out_dir=None)

        def stable_rows(rep):
            rows = []
            for line in rep.to_csv().splitlines()[1:]:
                cols = line.split(",")
                rows.append(cols[:-2])  # timing columns excluded
            return rows

        assert stable_rows(report) == stable_rows(again)

    def test_checkpoint_resume_skips_done_cells(self, small_grid, monkeypatch):
        spec, out, report = small_grid
        import rehabsched.bench as bench_mod
        calls = []
        original = bench_mod.run_cell

        def tracking(spec_, p, o):
            calls.append((p, o))
            return original(spec_, p, o)

        monkeypatch.setattr(bench_mod, "run_cell", tracking)
        resumed = run_grid(spec, out_dir=str(out))
        assert calls == []  # everything came from the checkpoint
        assert {k: c.to_json() for k, c in resumed.cells.items()} \
            == {k: c.to_json() for k, c in report.cells.items()}

    def test_checkpoint_invalidated_by_different_spec(self, small_grid):
        spec, out, _ = small_grid
        other = GridSpec(patients_range=(6, 6, 1), operators_range=(3, 3, 1),
                         reps=1, cutoff=2.0, seed_base=8)
        report = run_grid(other, out_dir=None)
        assert set(report.cells) == {(6, 3)}

    def test_density_annotation_present(self, small_grid):
        _, out, _ = small_grid
        doc = json.loads((out / "grid.json").read_text())
        assert doc["notes"]["board_transition_density"] == 2.4

    def test_frontier_helper(self, small_grid):
        _, _, report = small_grid
        f = optimum_frontier(report, "agenda")
        assert 0 <= f <= 10


class TestFigures:
    def test_heatmaps_render(self, small_grid, tmp_path):
        _, _, report = small_grid
        from rehabsched.plotting import render_grid_heatmaps
        paths = render_grid_heatmaps(report, tmp_path)
        assert len(paths) == 2
        for p in paths:
            assert p.exists() and p.stat().st_size > 0

    def test_gantt_renders(self, tmp_path):
        from rehabsched.agenda import solve_agenda
        from rehabsched.board import solve_board
        from rehabsched.generator import cell_params, generate
        from rehabsched.plotting import render_agenda_gantt
        from rehabsched.solvereport import SolveConfig

        inst = generate(cell_params(8, 4, seed=3))
        rb = solve_board(inst, SolveConfig(mode="anytime", cutoff=3, seed=3))
        ra = solve_agenda(inst, rb.best, SolveConfig(mode="anytime", cutoff=3, seed=3))
        assert ra.best is not None
        path = render_agenda_gantt(inst, rb.best, ra.best, tmp_path / "gantt.png")
        assert path.exists() and path.stat().st_size > 0
