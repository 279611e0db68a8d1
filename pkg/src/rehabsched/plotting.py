"""Figure rendering for benchmark grids and agendas.

Headless matplotlib (Agg); the CLI writes these next to the CSV/JSON output.
Phase maps use the usual palette: green optimum, blue satisfiable, grey
unknown, red unsatisfiable, with white lines where patients/operators is an
integer.  Gantt charts draw one-on-one time in light blue and supervised
time in yellow.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap
from matplotlib.patches import Patch, Rectangle

from .feas import AgendaSolution, BoardSolution
from .model import Instance

plt.rcParams.update({
    "figure.dpi": 110,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
})

OUTCOME_COLORS = {
    "OptimumFound": "#2ca02c",
    "Satisfiable": "#1f77b4",
    "Unknown": "#909090",
    "Unsatisfiable": "#d62728",
}
_OUTCOME_INDEX = {name: i for i, name in enumerate(OUTCOME_COLORS)}

INDIVIDUAL_COLOR = "#9ecbff"
SUPERVISED_COLOR = "#ffe066"


def render_grid_heatmaps(report, out_dir, stem: str = "grid") -> List[Path]:
    """One phase map per phase; returns the written file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    patients = report.spec.patients()
    operators = report.spec.operators()
    paths = []
    for phase in ("board", "agenda"):
        matrix = np.full((len(operators), len(patients)), np.nan)
        for cell in report.cells.values():
            try:
                col = patients.index(cell.n_patients)
                row = operators.index(cell.n_operators)
            except ValueError:
                continue
            modal = cell.board_modal if phase == "board" else cell.agenda_modal
            matrix[row, col] = _OUTCOME_INDEX[modal]

        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        cmap = ListedColormap(list(OUTCOME_COLORS.values()))
        ax.imshow(matrix, origin="lower", aspect="auto", cmap=cmap, vmin=-0.5,
                  vmax=len(OUTCOME_COLORS) - 0.5,
                  extent=(patients[0] - 0.5, patients[-1] + 0.5,
                          operators[0] - 0.5, operators[-1] + 0.5))
        # white guides where density hits an integer (and the 2.4 transition)
        xs = np.linspace(patients[0], patients[-1], 200)
        for d in list(range(1, int(patients[-1] / max(operators[0], 1)) + 1)) + [2.4]:
            ys = xs / d
            style = dict(color="white", linewidth=0.8 if d != 2.4 else 1.4,
                         linestyle="-" if d != 2.4 else "--")
            ax.plot(xs, ys, **style)
        ax.set_xlim(patients[0] - 0.5, patients[-1] + 0.5)
        ax.set_ylim(operators[0] - 0.5, operators[-1] + 0.5)
        ax.set_xlabel("patients")
        ax.set_ylabel("operators")
        ax.set_title(f"{phase} outcomes (mode={report.spec.mode}, variant={report.spec.variant})")
        ax.legend(handles=[Patch(color=c, label=k) for k, c in OUTCOME_COLORS.items()],
                  loc="upper left", fontsize=7, framealpha=0.9)
        path = out / f"{stem}_{phase}.png"
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths


def render_agenda_gantt(inst: Instance, board: BoardSolution, agenda: AgendaSolution,
                        path) -> Path:
    """Operator-by-period timetable with individual/supervised segmentation."""
    operators = [o for o in inst.real_operators()]
    rows = []
    for op in operators:
        for shift in sorted(op.shifts, key=lambda s: s.period):
            rows.append((op.id, shift))
    fig_height = max(2.0, 0.45 * len(rows) + 1.2)
    fig, ax = plt.subplots(figsize=(9, fig_height))

    labels = []
    for idx, (oid, shift) in enumerate(rows):
        labels.append(f"op{oid} {'AM' if shift.period == 0 else 'PM'}")
        ax.add_patch(Rectangle((shift.start, idx - 0.38), shift.end - shift.start, 0.76,
                               facecolor="#f2f2f2", edgecolor="#cccccc", linewidth=0.5))
    row_of = {(oid, shift.period): idx for idx, (oid, shift) in enumerate(rows)}

    for sid, pl in sorted(agenda.placements.items()):
        sess = inst.session(sid)
        oid = board.assignment[sess.patient]
        idx = row_of.get((oid, pl.period))
        if idx is None:
            continue
        if pl.before:
            ax.add_patch(Rectangle((pl.ext_start, idx - 0.3), pl.before, 0.6,
                                   facecolor=SUPERVISED_COLOR, edgecolor="black", linewidth=0.4))
        ax.add_patch(Rectangle((pl.start, idx - 0.3), pl.length, 0.6,
                               facecolor=INDIVIDUAL_COLOR, edgecolor="black", linewidth=0.4))
        if pl.after:
            ax.add_patch(Rectangle((pl.end, idx - 0.3), pl.after, 0.6,
                                   facecolor=SUPERVISED_COLOR, edgecolor="black", linewidth=0.4))
        ax.text(pl.ext_start + pl.ext_length / 2, idx, f"{sid}\np{sess.patient}",
                ha="center", va="center", fontsize=6)

    max_slots = max((inst.grid.n_slots(p.index) for p in inst.grid.periods), default=24)
    ax.set_xlim(-0.5, max_slots + 0.5)
    ax.set_ylim(-0.8, len(rows) - 0.2)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("slot")
    ax.set_title("agenda")
    ax.legend(handles=[Patch(color=INDIVIDUAL_COLOR, label="individual"),
                       Patch(color=SUPERVISED_COLOR, label="supervised")],
              loc="upper right", fontsize=7)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, bbox_inches="tight")
    plt.close(fig)
    return out
