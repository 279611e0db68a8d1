"""Solve configuration and result reporting shared by both phase solvers."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .model import CostVector, ModelError

OUTCOME_OPTIMUM = "OptimumFound"
OUTCOME_SATISFIABLE = "Satisfiable"
OUTCOME_UNKNOWN = "Unknown"
OUTCOME_UNSATISFIABLE = "Unsatisfiable"
OUTCOMES = (OUTCOME_OPTIMUM, OUTCOME_SATISFIABLE, OUTCOME_UNKNOWN, OUTCOME_UNSATISFIABLE)

# Most severe first; used when breaking modal ties toward the worse outcome.
OUTCOME_SEVERITY = {
    OUTCOME_UNSATISFIABLE: 0,
    OUTCOME_UNKNOWN: 1,
    OUTCOME_SATISFIABLE: 2,
    OUTCOME_OPTIMUM: 3,
}


@dataclass(frozen=True)
class SolveConfig:
    """Search budget and reproducibility knobs.

    The production default cutoff is 300 seconds; benchmarks usually run
    with 30. ``mode`` selects the exhaustive branch-and-bound (``exact``)
    or the greedy + local-search pipeline (``anytime``).
    """

    mode: str = "exact"  # exact | anytime
    cutoff: float = 300.0
    seed: int = 0
    emit_improvements: bool = True

    def __post_init__(self) -> None:
        if self.cutoff <= 0:
            raise ModelError("cutoff must be positive")
        if self.mode not in ("exact", "anytime"):
            raise ModelError(f"unknown mode {self.mode!r}")


@dataclass
class SolveReport:
    outcome: str
    best: Optional[Any] = None  # BoardSolution or AgendaSolution
    cost: Optional[CostVector] = None
    wall_time: float = 0.0
    trace: List[Tuple[float, CostVector]] = field(default_factory=list)

    def to_json(self) -> Dict[str, Any]:
        return {
            "outcome": self.outcome,
            "cost": None if self.cost is None else self.cost.as_list(),
            "wall_time": self.wall_time,
            "trace": [{"time": t, "cost": c.as_list()} for t, c in self.trace],
        }


class Cancelled(Exception):
    """Raised internally when a cooperative cancellation fires mid-solve."""


def make_cancel_event() -> threading.Event:
    return threading.Event()
