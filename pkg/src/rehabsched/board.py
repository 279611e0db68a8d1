"""Phase-1 solver: assign every patient to an operator.

Two engines behind one entry point:

* ``exact`` - depth-first branch and bound over patients, most constrained
  first, pruned with an admissible lexicographic relaxation (each patient
  independently picks its best-cost qualified operator).
* ``anytime`` - greedy construction (least preference weight, fictitious as
  fallback) followed by seeded first-improvement local search over single
  reassignments and pairwise swaps.

Every emitted solution passes feas.check_board; optimality is only claimed
with a proof (exhaustion, or cost equal to the relaxation bound).
"""

from __future__ import annotations

import random
import threading
import time
from typing import Dict, List, Optional, Tuple

from . import feas
from .feas import BoardSolution
from .model import (
    FICTITIOUS_OPERATOR,
    CostVector,
    Instance,
    ModelError,
    Operator,
    Patient,
    validate_instance,
)
from .solvereport import (
    OUTCOME_OPTIMUM,
    OUTCOME_SATISFIABLE,
    OUTCOME_UNKNOWN,
    OUTCOME_UNSATISFIABLE,
    SolveConfig,
    SolveReport,
)

_CHECK_EVERY = 64  # nodes/moves between deadline and cancellation checks


def _qualified_operators(inst: Instance, patient: Patient) -> List[Operator]:
    out = []
    for op in inst.operators:
        if op.is_fictitious() or patient.ptype.value in op.qualifications:
            out.append(op)
    return out


def board_lower_bound(inst: Instance) -> CostVector:
    """Lexicographic relaxation: each patient independently takes the best
    qualified operator, ignoring workload and count limits."""
    total = [0, 0, 0]
    for p in inst.patients:
        profiles = []
        for op in _qualified_operators(inst, p):
            profiles.append((
                feas.preference_weight(p, op.id),
                1 if op.is_fictitious() else 0,
                feas.history_weight(p, op.id),
            ))
        best3 = min(pr[0] for pr in profiles)
        tight = [pr for pr in profiles if pr[0] == best3]
        best2 = min(pr[1] for pr in tight)
        tight = [pr for pr in tight if pr[1] == best2]
        best1 = min(pr[2] for pr in tight)
        total[0] += best3
        total[1] += best2
        total[2] += best1
    return CostVector(tuple(total))


class _BoardState:
    """Mutable assignment with per-operator bookkeeping for fast checks."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.assignment: Dict[int, int] = {}
        self.by_operator: Dict[int, List[int]] = {o.id: [] for o in inst.operators}
        self.cost = [0, 0, 0]

    def _delta(self, patient: Patient, oid: int) -> Tuple[int, int, int]:
        return (
            feas.preference_weight(patient, oid),
            1 if oid == FICTITIOUS_OPERATOR else 0,
            feas.history_weight(patient, oid),
        )

    def assign(self, patient: Patient, oid: int) -> None:
        self.assignment[patient.id] = oid
        self.by_operator[oid].append(patient.id)
        d = self._delta(patient, oid)
        for i in range(3):
            self.cost[i] += d[i]

    def unassign(self, patient: Patient) -> None:
        oid = self.assignment.pop(patient.id)
        self.by_operator[oid].remove(patient.id)
        d = self._delta(patient, oid)
        for i in range(3):
            self.cost[i] -= d[i]

    def operator_feasible(self, op: Operator, patients: List[int]) -> bool:
        """Would this exact patient set be legal for ``op``?"""
        if op.is_fictitious():
            return True
        if op.max_patients is not None and len(patients) > op.max_patients:
            return False
        if op.type_limits:
            counts: Dict[str, int] = {}
            for pid in patients:
                key = self.inst.patient(pid).ptype.key()
                counts[key] = counts.get(key, 0) + 1
            for key, limit in op.type_limits.items():
                if counts.get(key, 0) > limit:
                    return False
        for pid in patients:
            if self.inst.patient(pid).ptype.value not in op.qualifications:
                return False
        if op.total_time is not None:
            if feas.operator_workload(self.inst, patients) > op.total_time:
                return False
        return True

    def can_add(self, patient: Patient, op: Operator) -> bool:
        return self.operator_feasible(op, self.by_operator[op.id] + [patient.id])

    def solution(self) -> BoardSolution:
        return BoardSolution(assignment=dict(self.assignment))

    def cost_vector(self) -> CostVector:
        return CostVector(tuple(self.cost))


def _patient_order(inst: Instance) -> List[Patient]:
    """Most constrained first: fewest qualified operators, then id."""
    return sorted(inst.patients, key=lambda p: (len(_qualified_operators(inst, p)), p.id))


def _value_order(inst: Instance, patient: Patient) -> List[Operator]:
    ops = _qualified_operators(inst, patient)
    return sorted(ops, key=lambda o: (feas.preference_weight(patient, o.id), o.id))


def _remaining_bounds(inst: Instance, order: List[Patient]) -> List[Tuple[int, int, int]]:
    """suffix[i] = lexicographic relaxation over patients order[i:]."""
    suffix = [(0, 0, 0)] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        p = order[i]
        profiles = []
        for op in _qualified_operators(inst, p):
            profiles.append((
                feas.preference_weight(p, op.id),
                1 if op.is_fictitious() else 0,
                feas.history_weight(p, op.id),
            ))
        best3 = min(pr[0] for pr in profiles)
        tight = [pr for pr in profiles if pr[0] == best3]
        best2 = min(pr[1] for pr in tight)
        tight = [pr for pr in tight if pr[1] == best2]
        best1 = min(pr[2] for pr in tight)
        nxt = suffix[i + 1]
        suffix[i] = (best3 + nxt[0], best2 + nxt[1], best1 + nxt[2])
    return suffix


def _solve_exact(inst: Instance, cfg: SolveConfig, cancel: Optional[threading.Event],
                 on_improve, t0: float) -> SolveReport:
    order = _patient_order(inst)
    values = {p.id: _value_order(inst, p) for p in order}
    suffix = _remaining_bounds(inst, order)
    state = _BoardState(inst)
    deadline = t0 + cfg.cutoff

    best_cost: Optional[Tuple[int, ...]] = None
    best_solution: Optional[BoardSolution] = None
    trace: List[Tuple[float, CostVector]] = []
    nodes = 0
    timed_out = False

    def record(cost: Tuple[int, ...], sol: BoardSolution) -> None:
        nonlocal best_cost, best_solution
        best_cost = cost
        best_solution = sol
        cv = CostVector(cost)
        if cfg.emit_improvements:
            trace.append((time.monotonic() - t0, cv))
        if on_improve is not None:
            on_improve(cv, sol)

    def dfs(depth: int) -> bool:
        """Returns False when the deadline or cancellation interrupted the search."""
        nonlocal nodes, timed_out
        nodes += 1
        if nodes % _CHECK_EVERY == 0:
            if time.monotonic() > deadline or (cancel is not None and cancel.is_set()):
                timed_out = True
                return False
        if depth == len(order):
            cost = tuple(state.cost)
            if best_cost is None or cost < best_cost:
                record(cost, state.solution())
            return True
        if best_cost is not None:
            rem = suffix[depth]
            bound = (state.cost[0] + rem[0], state.cost[1] + rem[1], state.cost[2] + rem[2])
            if bound >= best_cost:
                return True
        patient = order[depth]
        for op in values[patient.id]:
            if not state.can_add(patient, op):
                continue
            state.assign(patient, op.id)
            ok = dfs(depth + 1)
            state.unassign(patient)
            if not ok:
                return False
        return True

    completed = dfs(0)
    wall = time.monotonic() - t0
    if completed and best_solution is not None:
        return SolveReport(OUTCOME_OPTIMUM, best_solution, CostVector(best_cost), wall, trace)
    if completed and best_solution is None:
        return SolveReport(OUTCOME_UNSATISFIABLE, None, None, wall, trace)
    if best_solution is not None:
        return SolveReport(OUTCOME_SATISFIABLE, best_solution, CostVector(best_cost), wall, trace)
    return SolveReport(OUTCOME_UNKNOWN, None, None, wall, trace)


def _greedy(inst: Instance, state: _BoardState) -> None:
    fictitious = inst.operator(FICTITIOUS_OPERATOR)
    for patient in inst.patients:
        placed = False
        for op in _value_order(inst, patient):
            if op.is_fictitious():
                continue
            if state.can_add(patient, op):
                state.assign(patient, op.id)
                placed = True
                break
        if not placed:
            state.assign(patient, fictitious.id)


def _solve_anytime(inst: Instance, cfg: SolveConfig, cancel: Optional[threading.Event],
                   on_improve, t0: float) -> SolveReport:
    rng = random.Random(cfg.seed)
    state = _BoardState(inst)
    _greedy(inst, state)
    deadline = t0 + cfg.cutoff

    trace: List[Tuple[float, CostVector]] = []

    def emit() -> None:
        cv = state.cost_vector()
        if cfg.emit_improvements:
            trace.append((time.monotonic() - t0, cv))
        if on_improve is not None:
            on_improve(cv, state.solution())

    emit()

    patients = list(inst.patients)
    operators = list(inst.operators)

    def out_of_budget() -> bool:
        return time.monotonic() > deadline or (cancel is not None and cancel.is_set())

    def try_reassign(patient: Patient, op: Operator) -> bool:
        old = state.assignment[patient.id]
        if old == op.id:
            return False
        d_new = state._delta(patient, op.id)
        d_old = state._delta(patient, old)
        delta = tuple(d_new[i] - d_old[i] for i in range(3))
        if delta >= (0, 0, 0):
            return False
        source = inst.operator(old)
        remaining = [pid for pid in state.by_operator[old] if pid != patient.id]
        if not state.operator_feasible(source, remaining):
            return False
        if not state.can_add(patient, op):
            return False
        state.unassign(patient)
        state.assign(patient, op.id)
        return True

    def try_swap(p1: Patient, p2: Patient) -> bool:
        o1 = state.assignment[p1.id]
        o2 = state.assignment[p2.id]
        if o1 == o2:
            return False
        d = [0, 0, 0]
        for pat, frm, to in ((p1, o1, o2), (p2, o2, o1)):
            dn = state._delta(pat, to)
            do = state._delta(pat, frm)
            for i in range(3):
                d[i] += dn[i] - do[i]
        if tuple(d) >= (0, 0, 0):
            return False
        set1 = [pid for pid in state.by_operator[o1] if pid != p1.id] + [p2.id]
        set2 = [pid for pid in state.by_operator[o2] if pid != p2.id] + [p1.id]
        if not state.operator_feasible(inst.operator(o1), set1):
            return False
        if not state.operator_feasible(inst.operator(o2), set2):
            return False
        state.unassign(p1)
        state.unassign(p2)
        state.assign(p1, o2)
        state.assign(p2, o1)
        return True

    interrupted = False
    while not interrupted:
        improved = False
        moves: List[Tuple[int, int, int]] = []
        for i, p in enumerate(patients):
            for j, op in enumerate(operators):
                moves.append((0, i, j))
        for i in range(len(patients)):
            for j in range(i + 1, len(patients)):
                moves.append((1, i, j))
        rng.shuffle(moves)
        for kind, a, b in moves:
            if out_of_budget():
                interrupted = True
                break
            if kind == 0:
                ok = try_reassign(patients[a], operators[b])
            else:
                ok = try_swap(patients[a], patients[b])
            if ok:
                emit()
                improved = True
        if not improved:
            break

    wall = time.monotonic() - t0
    solution = state.solution()
    cost = state.cost_vector()
    bound = board_lower_bound(inst)
    outcome = OUTCOME_OPTIMUM if cost == bound else OUTCOME_SATISFIABLE
    return SolveReport(outcome, solution, cost, wall, trace)


def solve_board(inst: Instance, cfg: SolveConfig,
                cancel: Optional[threading.Event] = None,
                on_improve=None) -> SolveReport:
    """Solve the board phase of ``inst`` under ``cfg``.

    Raises ModelError when the instance fails validation.  The report's
    trace is strictly lexicographically decreasing and every reported
    solution is feasible.
    """
    issues = validate_instance(inst)
    if issues:
        raise ModelError(f"invalid instance: {issues[0].entity}: {issues[0].message}")
    t0 = time.monotonic()
    if cfg.mode == "exact":
        report = _solve_exact(inst, cfg, cancel, on_improve, t0)
    else:
        report = _solve_anytime(inst, cfg, cancel, on_improve, t0)
    if report.best is not None:
        residual = feas.check_board(inst, report.best)
        if residual:
            raise AssertionError(f"solver produced an infeasible board: {residual[0]}")
    return report
