"""Phase-2 solver: place every session in time and space.

Decision variables per schedulable session: whether it runs (optional only),
period and start slot, individual length, supervised extensions before and
after, and location.  The ``optimized`` variant prunes start candidates that
cannot fit the minimum length before shift end or that would collide with a
patient's forbidden windows, and bounds supervised extensions by the gap
between ideal and minimum length; the ``basic`` variant searches the raw
shift-slot grid with purely geometric extension bounds.  Both variants share
identical feasibility semantics, so their optima coincide.

Optimality claims come from two places only: exhaustion of the exact search,
or an anytime cost matching the admissible per-session relaxation bound.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from . import feas
from .feas import AgendaSolution, BoardSolution, SessionPlacement, schedulable_sessions
from .model import (
    CostVector,
    Instance,
    ModelError,
    SessionSpec,
    TimeWindow,
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

VARIANTS = ("basic", "optimized")

_CHECK_EVERY = 64


@dataclass(frozen=True)
class PruneTables:
    """Start-domain pruning data for one (instance, board) pair.

    allowed_starts hold only starts that leave room for the minimum length
    before shift end and avoid every forbidden start range; forced-time
    sessions collapse to a single candidate.
    """

    allowed_starts: Dict[str, Set[Tuple[int, int]]]
    extension_bound: Dict[str, int]
    forbidden_start_ranges: Dict[str, List[Tuple[int, int, int]]]


def compute_prune_tables(inst: Instance, board: BoardSolution) -> PruneTables:
    allowed: Dict[str, Set[Tuple[int, int]]] = {}
    ext_bound: Dict[str, int] = {}
    ranges: Dict[str, List[Tuple[int, int, int]]] = {}
    for sess in schedulable_sessions(inst, board):
        op = inst.operator(board.assignment[sess.patient])
        patient = inst.patient(sess.patient)
        sess_ranges = []
        for w in patient.forbidden:
            xsta = w.start - sess.min_length + 1
            sess_ranges.append((w.period, xsta, w.end))
        starts: Set[Tuple[int, int]] = set()
        for shift in op.shifts:
            for t in range(shift.start, shift.end):
                if t > shift.end - sess.min_length:
                    continue
                if any(per == shift.period and xsta <= t < end
                       for per, xsta, end in sess_ranges):
                    continue
                starts.add((shift.period, t))
        if sess.forced_time is not None:
            starts &= {sess.forced_time}
        allowed[sess.id] = starts
        ext_bound[sess.id] = sess.ideal_length - sess.min_length
        ranges[sess.id] = sess_ranges
    return PruneTables(allowed_starts=allowed, extension_bound=ext_bound,
                       forbidden_start_ranges=ranges)


def _basic_starts(inst: Instance, board: BoardSolution, sess: SessionSpec) -> List[Tuple[int, int]]:
    op = inst.operator(board.assignment[sess.patient])
    return [(shift.period, t) for shift in op.shifts for t in range(shift.start, shift.end)]


def start_candidates(inst: Instance, board: BoardSolution, sess: SessionSpec,
                     variant: str, tables: PruneTables) -> List[Tuple[int, int]]:
    if variant == "optimized":
        return sorted(tables.allowed_starts[sess.id])
    return sorted(_basic_starts(inst, board, sess))


def candidate_space_size(inst: Instance, board: BoardSolution, variant: str) -> int:
    """Candidate starts times supervised-extension combinations, summed over
    sessions; reported to quantify how much the pruning shrinks the search."""
    if variant not in VARIANTS:
        raise ModelError(f"unknown variant {variant!r}")
    tables = compute_prune_tables(inst, board)
    total = 0
    for sess in schedulable_sessions(inst, board):
        e = sess.ideal_length - sess.min_length
        ext_choices = (e + 1) * (e + 2) // 2
        if variant == "optimized":
            n_starts = len(tables.allowed_starts[sess.id])
        else:
            n_starts = len(_basic_starts(inst, board, sess))
        total += n_starts * ext_choices
    return total


def _session_profile(sess: SessionSpec, per: int, ts: int, length: int) -> Tuple[int, ...]:
    """Cost contribution of one placement across the six levels."""
    l6 = abs(length - sess.ideal_length)
    l5 = l4 = l2 = l1 = 0
    if sess.preference is not None and sess.is_individual():
        pper, pstart, prio = sess.preference
        if prio == "high":
            l5 = abs(per - pper)
            if per == pper:
                l4 = abs(ts - pstart)
        elif sess.optionality == "optional":
            l2 = abs(per - pper)
            if per == pper:
                l1 = abs(ts - pstart)
    return (l6, l5, l4, 0, l2, l1)


_SKIP_PROFILE = (0, 0, 0, 1, 0, 0)


def _shift_of(inst: Instance, board: BoardSolution, sess: SessionSpec, per: int) -> Optional[TimeWindow]:
    return inst.operator(board.assignment[sess.patient]).shift_in(per)


def _best_profiles(inst: Instance, board: BoardSolution, sess: SessionSpec,
                   variant: str, tables: PruneTables) -> List[Tuple[int, ...]]:
    """All dominant per-start profiles for one session (best length per start)."""
    profiles = []
    if sess.optionality == "optional":
        profiles.append(_SKIP_PROFILE)
    for per, ts in start_candidates(inst, board, sess, variant, tables):
        shift = _shift_of(inst, board, sess, per)
        if shift is None:
            continue
        max_len = min(sess.ideal_length, shift.end - ts)
        if max_len < sess.min_length:
            continue
        profiles.append(_session_profile(sess, per, ts, max_len))
    return profiles


def agenda_lower_bound(inst: Instance, board: BoardSolution, variant: str,
                       tables: Optional[PruneTables] = None) -> Optional[CostVector]:
    """Admissible lexicographic bound: each session independently takes its
    best placement profile.  None when a mandatory session has no candidate,
    which is a structural unsatisfiability witness."""
    if tables is None:
        tables = compute_prune_tables(inst, board)
    schedulable = {s.id for s in schedulable_sessions(inst, board)}
    totals = [0] * 6
    for sess in inst.sessions:
        if sess.id not in schedulable:
            if sess.optionality == "optional":
                totals[3] += 1
            continue
        profiles = _best_profiles(inst, board, sess, variant, tables)
        if not profiles:
            return None
        best = min(profiles)
        for i in range(6):
            totals[i] += best[i]
    return CostVector(tuple(totals))


class _AgendaState:
    """Incremental feasibility and cost bookkeeping used by both engines.

    Mirrors the hard rules of feas.check_agenda for fast insert checks; the
    final answer is always re-verified through feas itself.
    """

    def __init__(self, inst: Instance, board: BoardSolution):
        self.inst = inst
        self.board = board
        self.sessions = {s.id: s for s in schedulable_sessions(inst, board)}
        self.op_of = {sid: board.assignment[s.patient] for sid, s in self.sessions.items()}
        self.placements: Dict[str, SessionPlacement] = {}
        self.indiv: Dict[Tuple[int, int], List[Tuple[int, int, str]]] = {}
        self.exts: Dict[Tuple[int, int], List[Tuple[int, int, str, str]]] = {}
        self.occupancy: Dict[Tuple[str, int], List[int]] = {}
        self.patient_periods: Dict[Tuple[int, int], int] = {}
        self.patient_ext: Dict[int, int] = {}
        n_optional = sum(1 for s in inst.sessions if s.optionality == "optional")
        self.cost = [0, 0, 0, n_optional, 0, 0]
        # count of (slot, ordered location pair) balance breaches; insertions may
        # create them transiently, but no finished solution may keep one
        self.a12_bad = 0
        # repair pressure: unplaced mandatory sessions and daily-minimum gaps
        # dominate the cost levels while the search digs itself feasible
        self.missing_mandatory = sum(1 for s in self.sessions.values() if s.is_mandatory())
        self._needs = {}
        for p in inst.patients:
            oid = board.assignment.get(p.id)
            if oid is not None and oid != feas.FICTITIOUS_OPERATOR:
                self._needs[p.id] = p.min_daily_length
        self.deficit_total = sum(self._needs.values())
        self.macro_members: Dict[str, List[str]] = {}
        for loc in inst.locations:
            self.macro_members.setdefault(loc.macro_location, []).append(loc.id)
        self.loc_capacity = {loc.id: loc.capacity for loc in inst.locations}
        self.loc_open: Dict[Tuple[str, int], List[Tuple[int, int]]] = {}
        for loc in inst.locations:
            for w in loc.open:
                self.loc_open.setdefault((loc.id, w.period), []).append((w.start, w.end))

    def _occ(self, loc: str, per: int) -> List[int]:
        key = (loc, per)
        if key not in self.occupancy:
            self.occupancy[key] = [0] * self.inst.grid.n_slots(per)
        return self.occupancy[key]

    def _within_open(self, loc: str, per: int, t: int) -> bool:
        return any(a <= t < b for a, b in self.loc_open.get((loc, per), []))

    def placement_ok(self, sess: SessionSpec, pl: SessionPlacement, variant: str) -> bool:
        """Local rules: shift fit, length range, extensions, macro, forbidden, forced."""
        shift = _shift_of(self.inst, self.board, sess, pl.period)
        if shift is None:
            return False
        if pl.start < shift.start or pl.end > shift.end:
            return False
        if not (sess.min_length <= pl.length <= sess.ideal_length):
            return False
        if pl.before < 0 or pl.after < 0:
            return False
        if pl.before > pl.start - shift.start or pl.after > shift.end - pl.end:
            return False
        if variant == "optimized":
            bound = sess.ideal_length - sess.min_length
            if pl.before > bound or pl.after > bound:
                return False
            if pl.ext_length > sess.ideal_length:
                return False
        if pl.location not in {l.id for l in self.inst.locations_of_macro(sess.macro_location)}:
            return False
        for w in self.inst.patient(sess.patient).forbidden:
            if w.period == pl.period and pl.ext_start < w.end and w.start < pl.ext_end:
                return False
        if sess.forced_time is not None and (pl.period, pl.start) != sess.forced_time:
            return False
        return True

    def _fair_ok(self, sess: SessionSpec, pl: SessionPlacement) -> bool:
        oid = self.op_of[sess.id]
        group = []
        for start, end, sid in self.indiv.get((oid, pl.period), []):
            other = self.sessions[sid]
            other_pl = self.placements[sid]
            if other_pl.location == pl.location:
                group.append((other, other_pl.length))
        for other, l2 in group:
            for (sa, la), (sb, lb) in (((sess, pl.length), (other, l2)),
                                       ((other, l2), (sess, pl.length))):
                slack_a = sa.ideal_length - la
                slack_b = sb.ideal_length - lb
                mutural = (slack_a <= sb.ideal_length - sb.min_length
                           and slack_b <= sa.ideal_length - sa.min_length)
                if mutural and abs(slack_a - slack_b) > 1:
                    return False
                if slack_a > sb.ideal_length - sb.min_length and lb > sb.min_length:
                    return False
                if mutural and sb.ideal_length < sa.ideal_length and slack_a < slack_b:
                    return False
        return True

    def check_insert(self, sess: SessionSpec, pl: SessionPlacement, variant: str) -> bool:
        if not self.placement_ok(sess, pl, variant):
            return False
        oid = self.op_of[sess.id]
        # one session per patient and period
        if self.patient_periods.get((sess.patient, pl.period), 0) > 0:
            return False
        # no overlap of individual parts for one operator
        if sess.is_individual():
            for start, end, sid in self.indiv.get((oid, pl.period), []):
                if pl.start < end and start < pl.end:
                    return False
            if not self._fair_ok(sess, pl):
                return False
        # operator cannot sit in two locations during one extended slot
        for xs, xe, loc, sid in self.exts.get((oid, pl.period), []):
            if loc != pl.location and pl.ext_start < xe and xs < pl.ext_end:
                return False
        # capacity within open windows (cross-location balance is tracked
        # globally in a12_bad since later insertions can repair it)
        occ = self._occ(pl.location, pl.period)
        cap = self.loc_capacity[pl.location]
        for t in range(pl.ext_start, pl.ext_end):
            if cap > 0 and occ[t] + 1 > cap and self._within_open(pl.location, pl.period, t):
                return False
        return True

    def _shift_occupancy(self, loc: str, per: int, lo: int, hi: int, step: int) -> None:
        """Apply +-1 to occupancy over [lo, hi) and keep a12_bad consistent."""
        occ = self._occ(loc, per)
        members = self.macro_members[self.inst.location(loc).macro_location]
        others = [m for m in members if m != loc]
        for t in range(lo, hi):
            old = occ[t]
            new = old + step
            for m in others:
                other_occ = self.occupancy.get((m, per))
                c = other_occ[t] if other_occ else 0
                before = (1 if old - c > 2 else 0) + (1 if c - old > 2 else 0)
                after = (1 if new - c > 2 else 0) + (1 if c - new > 2 else 0)
                self.a12_bad += after - before
            occ[t] = new

    def _bump_ext(self, pid: int, delta: int) -> None:
        need = self._needs.get(pid)
        before = self.patient_ext.get(pid, 0)
        after = before + delta
        self.patient_ext[pid] = after
        if need is not None:
            self.deficit_total += max(0, need - after) - max(0, need - before)

    def insert(self, sess: SessionSpec, pl: SessionPlacement) -> None:
        oid = self.op_of[sess.id]
        self.placements[sess.id] = pl
        if sess.is_individual():
            self.indiv.setdefault((oid, pl.period), []).append((pl.start, pl.end, sess.id))
        self.exts.setdefault((oid, pl.period), []).append(
            (pl.ext_start, pl.ext_end, pl.location, sess.id))
        self._shift_occupancy(pl.location, pl.period, pl.ext_start, pl.ext_end, 1)
        self.patient_periods[(sess.patient, pl.period)] = \
            self.patient_periods.get((sess.patient, pl.period), 0) + 1
        self._bump_ext(sess.patient, pl.ext_length)
        profile = _session_profile(sess, pl.period, pl.start, pl.length)
        for i in range(6):
            self.cost[i] += profile[i]
        if sess.optionality == "optional":
            self.cost[3] -= 1
        else:
            self.missing_mandatory -= 1

    def remove(self, sess: SessionSpec) -> SessionPlacement:
        pl = self.placements.pop(sess.id)
        oid = self.op_of[sess.id]
        if sess.is_individual():
            self.indiv[(oid, pl.period)].remove((pl.start, pl.end, sess.id))
        self.exts[(oid, pl.period)].remove((pl.ext_start, pl.ext_end, pl.location, sess.id))
        self._shift_occupancy(pl.location, pl.period, pl.ext_start, pl.ext_end, -1)
        self.patient_periods[(sess.patient, pl.period)] -= 1
        self._bump_ext(sess.patient, -pl.ext_length)
        profile = _session_profile(sess, pl.period, pl.start, pl.length)
        for i in range(6):
            self.cost[i] -= profile[i]
        if sess.optionality == "optional":
            self.cost[3] += 1
        else:
            self.missing_mandatory += 1
        return pl

    def extended_cost(self) -> Tuple[int, ...]:
        """Feasibility shortfalls first, then the six objective levels."""
        return (self.missing_mandatory, self.deficit_total, *self.cost)

    def feasible_complete(self) -> bool:
        return self.missing_mandatory == 0 and self.deficit_total == 0 and self.a12_bad == 0

    def patient_ext_ok(self, pid: int) -> bool:
        return self.patient_ext.get(pid, 0) >= self.inst.patient(pid).min_daily_length

    def all_patients_covered(self) -> bool:
        for p in self.inst.patients:
            oid = self.board.assignment.get(p.id)
            if oid is None or oid == feas.FICTITIOUS_OPERATOR:
                continue
            if not self.patient_ext_ok(p.id):
                return False
        return True

    def solution(self) -> AgendaSolution:
        return AgendaSolution(placements=dict(self.placements))

    def cost_vector(self) -> CostVector:
        return CostVector(tuple(self.cost))


def _ext_pairs(variant: str, sess: SessionSpec, shift: TimeWindow,
               ts: int, length: int) -> Iterable[Tuple[int, int]]:
    """All (before, after) pairs permitted by the variant at this placement,
    smallest total first."""
    max_before_geo = ts - shift.start
    max_after_geo = shift.end - (ts + length)
    if variant == "optimized":
        bound = sess.ideal_length - sess.min_length
        cap = sess.ideal_length - length
        max_before = min(max_before_geo, bound, cap)
        max_after = min(max_after_geo, bound, cap)
        limit = cap
    else:
        max_before = max_before_geo
        max_after = max_after_geo
        limit = max_before_geo + max_after_geo
    for total in range(0, max_before + max_after + 1):
        if total > limit:
            break
        for lb in range(0, total + 1):
            la = total - lb
            if lb <= max_before and la <= max_after:
                yield lb, la


def _ordered_starts(sess: SessionSpec, starts: Sequence[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Starts nearest that session's preferred period and slot first."""
    if sess.preference is None:
        return sorted(starts)
    pper, pstart, _ = sess.preference
    return sorted(starts, key=lambda pt: (abs(pt[0] - pper),
                                          abs(pt[1] - pstart) if pt[0] == pper else pt[1],
                                          pt))


def _locations_for(inst: Instance, sess: SessionSpec) -> List[str]:
    return sorted(l.id for l in inst.locations_of_macro(sess.macro_location))


def _session_order(inst: Instance, board: BoardSolution,
                   tables: PruneTables) -> List[SessionSpec]:
    """Mandatory before optional, tightest start domain first."""
    sessions = schedulable_sessions(inst, board)
    return sorted(sessions, key=lambda s: (0 if s.is_mandatory() else 1,
                                           len(tables.allowed_starts[s.id]), s.id))


def _solve_exact(inst: Instance, board: BoardSolution, cfg: SolveConfig, variant: str,
                 tables: PruneTables, cancel, on_improve, t0: float) -> SolveReport:
    order = _session_order(inst, board, tables)
    deadline = t0 + cfg.cutoff
    state = _AgendaState(inst, board)

    starts = {s.id: _ordered_starts(s, start_candidates(inst, board, s, variant, tables))
              for s in order}

    # suffix[i] = best-case cost delta of deciding order[i:], relative to the
    # running state cost (which already charges every undecided optional at
    # level 3, so placing one counts as -1 there)
    suffix: List[Tuple[int, ...]] = [(0,) * 6] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        sess = order[i]
        optional = sess.optionality == "optional"
        deltas: List[Tuple[int, ...]] = [(0,) * 6] if optional else []
        for per, ts in starts[sess.id]:
            shift = _shift_of(inst, board, sess, per)
            if shift is None:
                continue
            max_len = min(sess.ideal_length, shift.end - ts)
            if max_len < sess.min_length:
                continue
            p = _session_profile(sess, per, ts, max_len)
            deltas.append((p[0], p[1], p[2], -1 if optional else 0, p[4], p[5]))
        if not deltas:
            wall = time.monotonic() - t0
            return SolveReport(OUTCOME_UNSATISFIABLE, None, None, wall, [])
        best = min(deltas)
        suffix[i] = tuple(best[k] + suffix[i + 1][k] for k in range(6))

    best_cost: Optional[Tuple[int, ...]] = None
    best_solution: Optional[AgendaSolution] = None
    trace: List[Tuple[float, CostVector]] = []
    nodes = 0
    timed_out = False

    def record() -> None:
        nonlocal best_cost, best_solution
        best_cost = tuple(state.cost)
        best_solution = state.solution()
        cv = CostVector(best_cost)
        if cfg.emit_improvements:
            trace.append((time.monotonic() - t0, cv))
        if on_improve is not None:
            on_improve(cv, best_solution)

    def candidates(sess: SessionSpec):
        for per, ts in starts[sess.id]:
            shift = _shift_of(inst, board, sess, per)
            if shift is None:
                continue
            max_len = min(sess.ideal_length, shift.end - ts)
            if max_len < sess.min_length:
                continue
            for length in range(max_len, sess.min_length - 1, -1):
                for lb, la in _ext_pairs(variant, sess, shift, ts, length):
                    for loc in _locations_for(inst, sess):
                        yield SessionPlacement(session=sess.id, period=per, start=ts,
                                               length=length, before=lb, after=la,
                                               location=loc)

    def dfs(depth: int) -> bool:
        nonlocal nodes, timed_out
        nodes += 1
        if nodes % _CHECK_EVERY == 0:
            if time.monotonic() > deadline or (cancel is not None and cancel.is_set()):
                timed_out = True
                return False
        if best_cost is not None:
            rem = suffix[depth]
            bound = tuple(state.cost[k] + rem[k] for k in range(6))
            if bound >= best_cost:
                return True
        if depth == len(order):
            if state.a12_bad == 0 and state.all_patients_covered():
                if best_cost is None or tuple(state.cost) < best_cost:
                    record()
            return True
        sess = order[depth]
        for pl in candidates(sess):
            if not state.check_insert(sess, pl, variant):
                continue
            state.insert(sess, pl)
            ok = dfs(depth + 1)
            state.remove(sess)
            if not ok:
                return False
        if not sess.is_mandatory():
            if not dfs(depth + 1):
                return False
        return True

    completed = dfs(0)
    wall = time.monotonic() - t0
    if completed and best_solution is not None:
        return SolveReport(OUTCOME_OPTIMUM, best_solution, CostVector(best_cost), wall, trace)
    if completed:
        return SolveReport(OUTCOME_UNSATISFIABLE, None, None, wall, trace)
    if best_solution is not None:
        return SolveReport(OUTCOME_SATISFIABLE, best_solution, CostVector(best_cost), wall, trace)
    return SolveReport(OUTCOME_UNKNOWN, None, None, wall, trace)


def _anchored_starts(state: _AgendaState, oid: int, allowed: Sequence[Tuple[int, int]]
                     ) -> List[Tuple[int, int]]:
    """Allowed starts reordered to pack the operator's day: points butting an
    existing block (or the shift edge) come first, emptier periods before
    fuller ones, so shifts do not fragment."""
    allowed_set = set(allowed)
    anchors: List[Tuple[int, int]] = []
    seen = set()
    op = state.inst.operator(oid)
    used = {}
    for shift in op.shifts:
        blocks = state.exts.get((oid, shift.period), [])
        used[shift.period] = sum(xe - xs for xs, xe, _, _ in blocks)
    for shift in sorted(op.shifts, key=lambda s: (used[s.period], s.period)):
        points = [shift.start] + [xe for xs, xe, _, _ in state.exts.get((oid, shift.period), [])]
        for t in sorted(points):
            cand = (shift.period, t)
            if cand in allowed_set and cand not in seen:
                anchors.append(cand)
                seen.add(cand)
    rest = [c for c in allowed if c not in seen]
    return anchors + rest


def _try_insert(state: _AgendaState, sess: SessionSpec, pl: SessionPlacement,
                variant: str) -> bool:
    """Insert only when all hard rules including the balance counter hold."""
    if not state.check_insert(sess, pl, variant):
        return False
    state.insert(sess, pl)
    if state.a12_bad > 0:
        state.remove(sess)
        return False
    return True


def _place_one(inst: Instance, board: BoardSolution, variant: str, state: _AgendaState,
               sess: SessionSpec, start_list: Sequence[Tuple[int, int]],
               length_order) -> bool:
    """First-fit over (start, length, location) candidates."""
    for per, ts in start_list:
        shift = _shift_of(inst, board, sess, per)
        if shift is None:
            continue
        max_len = min(sess.ideal_length, shift.end - ts)
        if max_len < sess.min_length:
            continue
        for length in length_order(max_len):
            for loc in _locations_for(inst, sess):
                pl = SessionPlacement(session=sess.id, period=per, start=ts,
                                      length=length, before=0, after=0, location=loc)
                if _try_insert(state, sess, pl, variant):
                    return True
    return False


def _eject_and_place(inst: Instance, board: BoardSolution, variant: str,
                     state: _AgendaState, sess: SessionSpec,
                     starts: Dict[str, List[Tuple[int, int]]]) -> bool:
    """Last resort for a blocked mandatory session: pull out one of the
    operator's other placements, squeeze the session in, re-place the victim."""
    oid = board.assignment[sess.patient]
    victims = []
    for shift in inst.operator(oid).shifts:
        victims.extend(sid for *_, sid in state.exts.get((oid, shift.period), []))
    min_first = lambda mx: range(sess.min_length, mx + 1)
    for vid in victims:
        victim = state.sessions[vid]
        if victim.patient == sess.patient:
            continue
        old_pl = state.remove(victim)
        here = _place_one(inst, board, variant, state, sess,
                          _anchored_starts(state, oid, starts[sess.id]), min_first)
        if here:
            back = _place_one(inst, board, variant, state, victim,
                              _anchored_starts(state, oid, starts[victim.id]),
                              lambda mx, v=victim: range(v.min_length, mx + 1))
            if back or not victim.is_mandatory():
                return True
            state.remove(sess)
        if not _try_insert(state, victim, old_pl, variant):
            state.insert(victim, old_pl)  # position was legal before
    return False


def _greedy(inst: Instance, board: BoardSolution, variant: str, tables: PruneTables,
            state: _AgendaState, length_desc: bool) -> bool:
    """Construct a base agenda; returns False when a mandatory session or a
    patient's daily minimum could not be accommodated."""
    order = _session_order(inst, board, tables)
    starts = {s.id: _ordered_starts(s, start_candidates(inst, board, s, variant, tables))
              for s in order}
    pending_min: Dict[int, int] = {}
    for sess in order:
        if sess.is_mandatory():
            pending_min[sess.patient] = pending_min.get(sess.patient, 0) + sess.min_length
    for sess in order:
        if sess.is_mandatory():
            pending_min[sess.patient] -= sess.min_length
        # length that keeps the patient's daily minimum reachable without
        # leaning on supervised extensions later
        need = (inst.patient(sess.patient).min_daily_length
                - state.patient_ext.get(sess.patient, 0)
                - pending_min.get(sess.patient, 0))
        oid = board.assignment[sess.patient]
        if sess.preference is not None:
            start_list = starts[sess.id]
        else:
            start_list = _anchored_starts(state, oid, starts[sess.id])
        if length_desc:
            length_order = lambda mx, s=sess: range(mx, s.min_length - 1, -1)
        else:
            def length_order(mx, s=sess, need=need):
                desired = max(s.min_length, min(need, mx))
                return ([desired] + list(range(desired - 1, s.min_length - 1, -1))
                        + list(range(desired + 1, mx + 1)))
        placed = _place_one(inst, board, variant, state, sess, start_list, length_order)
        if not placed and sess.is_mandatory():
            # keep going even when one session stays out: the local search
            # repairs a near-complete base far better than an empty one
            _eject_and_place(inst, board, variant, state, sess, starts)
    return _repair_daily_minimum(inst, board, variant, state, starts)


def _repair_daily_minimum(inst: Instance, board: BoardSolution, variant: str,
                          state: _AgendaState,
                          starts: Dict[str, List[Tuple[int, int]]]) -> bool:
    """Raise each scheduled patient to the daily minimum: grow extensions or
    lengths in place, relocate a session to roomier slots, or bring in one of
    the patient's unscheduled optional sessions."""

    def grow_in_place(p) -> bool:
        for sess in inst.sessions_of_patient(p.id):
            if sess.id not in state.placements:
                continue
            pl = state.placements[sess.id]
            for db, da, dl in ((0, 1, 0), (1, 0, 0), (0, 0, 1)):
                cand = SessionPlacement(
                    session=sess.id, period=pl.period, start=pl.start,
                    length=pl.length + dl, before=pl.before + db,
                    after=pl.after + da, location=pl.location)
                state.remove(sess)
                if _try_insert(state, sess, cand, variant):
                    return True
                state.insert(sess, pl)
        return False

    def relocate_longer(p) -> bool:
        for sess in inst.sessions_of_patient(p.id):
            if sess.id not in state.placements:
                continue
            old = state.remove(sess)
            oid = board.assignment[p.id]
            longer = lambda mx, lo=old.ext_length: range(mx, lo, -1)
            if _place_one(inst, board, variant, state, sess,
                          _anchored_starts(state, oid, starts[sess.id]), longer):
                return True
            state.insert(sess, old)
        return False

    def schedule_optional(p) -> bool:
        oid = board.assignment[p.id]
        for sess in inst.sessions_of_patient(p.id):
            if sess.id in state.placements or sess.is_mandatory():
                continue
            grab = lambda mx, s=sess: range(mx, s.min_length - 1, -1)
            if _place_one(inst, board, variant, state, sess,
                          _anchored_starts(state, oid, starts[sess.id]), grab):
                return True
        return False

    all_ok = True
    for p in inst.patients:
        oid = board.assignment.get(p.id)
        if oid is None or oid == feas.FICTITIOUS_OPERATOR:
            continue
        guard = 0
        while not state.patient_ext_ok(p.id):
            guard += 1
            if guard > 200:
                all_ok = False
                break
            if grow_in_place(p):
                continue
            if relocate_longer(p):
                continue
            if schedule_optional(p):
                continue
            all_ok = False
            break
    return all_ok


def _solve_anytime(inst: Instance, board: BoardSolution, cfg: SolveConfig, variant: str,
                   tables: PruneTables, cancel, on_improve, t0: float) -> SolveReport:
    rng = random.Random(cfg.seed)
    deadline = t0 + cfg.cutoff
    state = _AgendaState(inst, board)
    _greedy(inst, board, variant, tables, state, length_desc=True)
    if not state.feasible_complete():
        alt = _AgendaState(inst, board)
        _greedy(inst, board, variant, tables, alt, length_desc=False)
        if alt.extended_cost() < state.extended_cost():
            state = alt

    trace: List[Tuple[float, CostVector]] = []
    last_emitted: List[Optional[CostVector]] = [None]

    def emit() -> None:
        # only strictly improving, fully feasible schedules reach the trace
        if not state.feasible_complete():
            return
        cv = state.cost_vector()
        if last_emitted[0] is not None and not (cv < last_emitted[0]):
            return
        last_emitted[0] = cv
        if cfg.emit_improvements:
            trace.append((time.monotonic() - t0, cv))
        if on_improve is not None:
            on_improve(cv, state.solution())

    emit()

    all_starts = {s.id: _ordered_starts(s, start_candidates(inst, board, s, variant, tables))
                  for s in state.sessions.values()}
    sessions = sorted(state.sessions.values(), key=lambda s: s.id)

    def out_of_budget() -> bool:
        return time.monotonic() > deadline or (cancel is not None and cancel.is_set())

    def try_replace(sess: SessionSpec, cand: SessionPlacement) -> bool:
        """Swap a session's placement when strictly improving and legal."""
        old = state.placements.get(sess.id)
        if old is None:
            return False
        before = state.extended_cost()
        state.remove(sess)
        if state.check_insert(sess, cand, variant):
            state.insert(sess, cand)
            if state.a12_bad == 0 and state.extended_cost() < before:
                return True
            state.remove(sess)
        state.insert(sess, old)
        return False

    def try_unschedule(sess: SessionSpec) -> bool:
        if sess.is_mandatory() or sess.id not in state.placements:
            return False
        before = state.extended_cost()
        old = state.remove(sess)
        if state.a12_bad == 0 and state.extended_cost() < before:
            return True
        state.insert(sess, old)
        return False

    def try_schedule(sess: SessionSpec) -> bool:
        if sess.id in state.placements:
            return False
        before = state.extended_cost()
        starts = all_starts[sess.id] if sess.is_mandatory() else all_starts[sess.id][:24]
        for per, ts in starts:
            shift = _shift_of(inst, board, sess, per)
            if shift is None:
                continue
            max_len = min(sess.ideal_length, shift.end - ts)
            if max_len < sess.min_length:
                continue
            lengths = range(max_len, sess.min_length - 1, -1) if sess.is_mandatory() \
                else (max_len,)
            for length in lengths:
                for loc in _locations_for(inst, sess):
                    cand = SessionPlacement(session=sess.id, period=per, start=ts,
                                            length=length, before=0, after=0, location=loc)
                    if state.check_insert(sess, cand, variant):
                        state.insert(sess, cand)
                        if state.a12_bad == 0 and state.extended_cost() < before:
                            return True
                        state.remove(sess)
        return False

    def move_candidates(sess: SessionSpec) -> List[SessionPlacement]:
        pl = state.placements.get(sess.id)
        if pl is None:
            return []
        shift = _shift_of(inst, board, sess, pl.period)
        out = []
        starts = all_starts[sess.id]
        sampled = starts if len(starts) <= 14 else \
            starts[:6] + rng.sample(starts[6:], 8)
        for per, ts in sampled:
            if (per, ts) == (pl.period, pl.start):
                continue
            s2 = _shift_of(inst, board, sess, per)
            if s2 is None:
                continue
            max_len = min(sess.ideal_length, s2.end - ts)
            if max_len < sess.min_length:
                continue
            length = min(pl.length, max_len)
            out.append(SessionPlacement(session=sess.id, period=per, start=ts,
                                        length=max_len, before=0, after=0,
                                        location=pl.location))
            if length != max_len:
                out.append(SessionPlacement(session=sess.id, period=per, start=ts,
                                            length=length, before=pl.before, after=pl.after,
                                            location=pl.location))
        if shift is not None:
            max_here = min(sess.ideal_length, shift.end - pl.start)
            for new_len in (pl.length + 1, pl.length - 1, max_here):
                if new_len == pl.length or not (sess.min_length <= new_len <= max_here):
                    continue
                out.append(SessionPlacement(session=sess.id, period=pl.period, start=pl.start,
                                            length=new_len, before=pl.before, after=pl.after,
                                            location=pl.location))
        for loc in _locations_for(inst, sess):
            if loc != pl.location:
                out.append(SessionPlacement(session=sess.id, period=pl.period, start=pl.start,
                                            length=pl.length, before=pl.before, after=pl.after,
                                            location=loc))
        for db, da in ((-1, 1), (1, -1), (0, 1), (1, 0)):
            nb, na = pl.before + db, pl.after + da
            if nb >= 0 and na >= 0:
                out.append(SessionPlacement(session=sess.id, period=pl.period, start=pl.start,
                                            length=pl.length, before=nb, after=na,
                                            location=pl.location))
        return out

    def descend() -> None:
        while True:
            if out_of_budget():
                return
            improved = False
            scan = list(sessions)
            rng.shuffle(scan)
            for sess in scan:
                if out_of_budget():
                    return
                if sess.id in state.placements:
                    for cand in move_candidates(sess):
                        if try_replace(sess, cand):
                            emit()
                            improved = True
                    if try_unschedule(sess):
                        emit()
                        improved = True
                else:
                    if try_schedule(sess):
                        emit()
                        improved = True
            if not improved:
                return

    def restore(snap: Dict[str, SessionPlacement]) -> None:
        for sid in list(state.placements):
            state.remove(state.sessions[sid])
        for sid, pl in snap.items():
            state.insert(state.sessions[sid], pl)

    lexmin_profile: Dict[str, Tuple[int, ...]] = {}
    for s in sessions:
        profiles = _best_profiles(inst, board, s, variant, tables)
        if profiles:
            lexmin_profile[s.id] = min(profiles)

    def gap_sessions() -> List[str]:
        """Sessions standing above their own relaxation minimum."""
        out = []
        for sid, pl in state.placements.items():
            s = state.sessions[sid]
            prof = _session_profile(s, pl.period, pl.start, pl.length)
            target = lexmin_profile.get(sid)
            if target is not None and prof > target:
                out.append(sid)
        for s in sessions:
            if s.id not in state.placements and lexmin_profile.get(s.id, _SKIP_PROFILE) < _SKIP_PROFILE:
                out.append(s.id)
        return sorted(out)

    def kick() -> None:
        """Remove the sessions blocking the bound (plus random filler) and
        rebuild them greedily in a shuffled order."""
        placed = sorted(state.placements)
        if not placed:
            return
        k = min(len(placed), max(3, len(placed) // 6))
        victims = [sid for sid in gap_sessions() if sid in state.placements][:k]
        pool = [sid for sid in placed if sid not in victims]
        filler = rng.sample(pool, min(len(pool), k - len(victims) + 2))
        for sid in victims + filler:
            state.remove(state.sessions[sid])
        specs = sorted((state.sessions[sid] for sid in victims + filler),
                       key=lambda s: (0 if s.is_mandatory() else 1, s.id))
        rng.shuffle(specs)
        specs.sort(key=lambda s: 0 if s.is_mandatory() else 1)
        for sess in specs:
            ideal_first = lambda mx, s=sess: range(mx, s.min_length - 1, -1)
            shuffled = list(all_starts[sess.id])
            rng.shuffle(shuffled)
            preferred = all_starts[sess.id][:2]
            _place_one(inst, board, variant, state, sess, preferred + shuffled, ideal_first)
        _repair_daily_minimum(inst, board, variant, state, all_starts)

    bound = agenda_lower_bound(inst, board, variant, tables)
    descend()
    best_ext = state.extended_cost()
    best_snap = dict(state.placements)

    # a deterministic number of restart kicks; the wall clock only caps them
    for _ in range(12):
        if state.feasible_complete() and bound is not None \
                and state.cost_vector() == bound:
            break
        if out_of_budget():
            break
        kick()
        descend()
        if state.a12_bad == 0 and state.extended_cost() < best_ext:
            best_ext = state.extended_cost()
            best_snap = dict(state.placements)
        else:
            restore(best_snap)

    if state.extended_cost() != best_ext:
        restore(best_snap)

    wall = time.monotonic() - t0
    if not state.feasible_complete():
        return SolveReport(OUTCOME_UNKNOWN, None, None, wall, trace)
    solution = state.solution()
    cost = state.cost_vector()
    outcome = OUTCOME_OPTIMUM if bound is not None and cost == bound else OUTCOME_SATISFIABLE
    return SolveReport(outcome, solution, cost, wall, trace)


def solve_agenda(inst: Instance, board: BoardSolution, cfg: SolveConfig,
                 variant: str = "optimized",
                 cancel: Optional[threading.Event] = None,
                 on_improve=None) -> SolveReport:
    """Place the sessions of a feasible board; see module docstring."""
    if variant not in VARIANTS:
        raise ModelError(f"unknown variant {variant!r}")
    issues = validate_instance(inst)
    if issues:
        raise ModelError(f"invalid instance: {issues[0].entity}: {issues[0].message}")
    board_violations = feas.check_board(inst, board)
    if board_violations:
        raise ModelError(f"board is infeasible: {board_violations[0].detail}")

    t0 = time.monotonic()
    tables = compute_prune_tables(inst, board)
    mandatory_count: Dict[int, int] = {}
    for sess in schedulable_sessions(inst, board):
        if sess.is_mandatory() and not tables.allowed_starts[sess.id]:
            return SolveReport(OUTCOME_UNSATISFIABLE, None, None,
                               time.monotonic() - t0, [])
        if sess.is_mandatory():
            mandatory_count[sess.patient] = mandatory_count.get(sess.patient, 0) + 1
    for pid, count in mandatory_count.items():
        op = inst.operator(board.assignment[pid])
        if count > len(op.shifts):
            # one session per period per patient: more mandatory sessions than
            # the operator has shifts can never be scheduled
            return SolveReport(OUTCOME_UNSATISFIABLE, None, None,
                               time.monotonic() - t0, [])

    if cfg.mode == "exact":
        report = _solve_exact(inst, board, cfg, variant, tables, cancel, on_improve, t0)
    else:
        report = _solve_anytime(inst, board, cfg, variant, tables, cancel, on_improve, t0)
    if report.best is not None:
        residual = feas.check_agenda(inst, board, report.best)
        if residual:
            raise AssertionError(f"solver produced an infeasible agenda: {residual[0]}")
    return report
