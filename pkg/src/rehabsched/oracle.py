"""Brute-force reference solvers for tiny instances.

The oracle shares nothing with the search engines except the feasibility
checker: it enumerates candidate assignments exhaustively in a fixed order,
filters through feas, and keeps the lexicographically best (cost, canonical
solution) pair.  It exists to pin expected values for tests and refuses
anything beyond desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Tuple

from . import feas
from .feas import AgendaSolution, BoardSolution, SessionPlacement, schedulable_sessions
from .model import CostVector, Instance, ModelError, SessionSpec

_MAX_AGENDA_NODES = 5_000_000

# Rules a longer prefix of placements can still repair: missing sessions,
# daily-minimum sums, and the cross-location balance (raising the emptier
# location fixes it).  Everything else only ever gets worse.
_PARTIAL_EXEMPT = ("A1", "A9", "A12")


class OracleLimitError(ModelError):
    """The instance is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class OracleLimits:
    max_patients: int = 5
    max_operators: int = 3  # real operators; the fictitious one rides along
    max_sessions: int = 3
    max_slots_per_period: int = 12


DEFAULT_LIMITS = OracleLimits()


def _enforce_limits(inst: Instance, limits: OracleLimits, sessions_matter: bool) -> None:
    if len(inst.patients) > limits.max_patients:
        raise OracleLimitError(f"{len(inst.patients)} patients exceed oracle limit {limits.max_patients}")
    if len(inst.real_operators()) > limits.max_operators:
        raise OracleLimitError(f"{len(inst.real_operators())} operators exceed oracle limit {limits.max_operators}")
    if sessions_matter and len(inst.sessions) > limits.max_sessions:
        # the board oracle only counts operators^patients, so the session cap
        # binds the agenda enumeration alone (every patient carries a session)
        raise OracleLimitError(f"{len(inst.sessions)} sessions exceed oracle limit {limits.max_sessions}")
    for p in range(inst.grid.n_periods()):
        if inst.grid.n_slots(p) > limits.max_slots_per_period:
            raise OracleLimitError(f"period {p} has {inst.grid.n_slots(p)} slots, oracle limit {limits.max_slots_per_period}")


def _board_key(inst: Instance, assignment: Dict[int, int]) -> Tuple[int, ...]:
    return tuple(assignment[p.id] for p in sorted(inst.patients, key=lambda q: q.id))


def oracle_board(inst: Instance, limits: OracleLimits = DEFAULT_LIMITS
                 ) -> Tuple[CostVector, BoardSolution]:
    """Exhaustive minimum over all |operators|^|patients| assignments."""
    _enforce_limits(inst, limits, sessions_matter=False)
    patients = sorted(inst.patients, key=lambda p: p.id)
    operators = sorted(o.id for o in inst.operators)
    best: Optional[Tuple[CostVector, Tuple[int, ...], BoardSolution]] = None
    for choice in product(operators, repeat=len(patients)):
        sol = BoardSolution(assignment={p.id: oid for p, oid in zip(patients, choice)})
        if feas.check_board(inst, sol):
            continue
        cost = feas.board_cost(inst, sol)
        key = _board_key(inst, sol.assignment)
        if best is None or (cost, key) < (best[0], best[1]):
            best = (cost, key, sol)
    if best is None:
        raise ModelError("no feasible board exists")
    return best[0], best[2]


def _core_options(inst: Instance, board: BoardSolution,
                  sess: SessionSpec) -> List[SessionPlacement]:
    """Zero-extension placements (period, start, length, location) in a fixed order."""
    op = inst.operator(board.assignment[sess.patient])
    locs = sorted(l.id for l in inst.locations_of_macro(sess.macro_location))
    options: List[SessionPlacement] = []
    for shift in sorted(op.shifts, key=lambda s: s.period):
        for ts in range(shift.start, shift.end):
            max_len = min(sess.ideal_length, shift.end - ts)
            for length in range(sess.min_length, max_len + 1):
                for loc in locs:
                    options.append(SessionPlacement(
                        session=sess.id, period=shift.period, start=ts,
                        length=length, before=0, after=0, location=loc))
    return options


def _ext_options(inst: Instance, board: BoardSolution, sess: SessionSpec,
                 core: SessionPlacement) -> List[Tuple[int, int]]:
    """All geometric (before, after) pairs at ``core``, smallest totals first."""
    op = inst.operator(board.assignment[sess.patient])
    shift = op.shift_in(core.period)
    max_before = core.start - shift.start
    max_after = shift.end - (core.start + core.length)
    pairs = [(lb, la) for lb in range(max_before + 1) for la in range(max_after + 1)]
    pairs.sort(key=lambda p: (p[0] + p[1], p[0]))
    return pairs


def _agenda_key(sids: List[str], placements: Dict[str, SessionPlacement]) -> Tuple:
    key = []
    for sid in sids:
        pl = placements.get(sid)
        if pl is None:
            key.append((sid, 1, 0, 0, 0, 0, 0, ""))
        else:
            key.append((sid, 0, pl.period, pl.start, pl.length, pl.before, pl.after, pl.location))
    return tuple(key)


def oracle_agenda(inst: Instance, board: BoardSolution,
                  limits: OracleLimits = DEFAULT_LIMITS
                  ) -> Tuple[CostVector, AgendaSolution]:
    """Exhaustive minimum over placements of the schedulable sessions.

    Walks the product of per-session core options (start, length, location)
    depth first, discarding prefixes with irreparable violations.  Supervised
    extensions never influence the cost, so at each leaf they are enumerated
    only for sessions of patients still short of their daily minimum; with at
    most three sessions, shrinking anyone else's extensions to zero can never
    invalidate a feasible solution.
    """
    _enforce_limits(inst, limits, sessions_matter=True)
    if feas.check_board(inst, board):
        raise ModelError("board is infeasible")
    sessions = sorted(schedulable_sessions(inst, board), key=lambda s: s.id)
    if len(sessions) > 3:
        # the zero-extension reduction below is only airtight when no slot can
        # host three-plus concurrent sessions at one location
        raise OracleLimitError("agenda oracle handles at most 3 schedulable sessions")
    sids = [s.id for s in sessions]
    options: Dict[str, List[Optional[SessionPlacement]]] = {}
    size = 1
    for sess in sessions:
        opts: List[Optional[SessionPlacement]] = []
        if sess.optionality == "optional":
            opts.append(None)
        opts.extend(_core_options(inst, board, sess))
        options[sess.id] = opts
        size *= max(len(opts), 1)
        if size > _MAX_AGENDA_NODES:
            raise OracleLimitError(f"agenda enumeration would exceed {_MAX_AGENDA_NODES} nodes")

    best: Optional[Tuple[CostVector, Tuple, AgendaSolution]] = None
    placements: Dict[str, SessionPlacement] = {}

    def partial_infeasible() -> bool:
        sol = AgendaSolution(placements=placements)
        for v in feas.check_agenda(inst, board, sol):
            if v.rule not in _PARTIAL_EXEMPT:
                return True
        return False

    def deficits() -> List[SessionSpec]:
        """Sessions whose patient needs supervised extensions at this leaf."""
        sums: Dict[int, int] = {}
        for sid, pl in placements.items():
            pat = inst.session(sid).patient
            sums[pat] = sums.get(pat, 0) + pl.length
        needy = []
        for sess in sessions:
            if sess.id not in placements:
                continue
            pat = inst.patient(sess.patient)
            if sums.get(pat.id, 0) < pat.min_daily_length:
                needy.append(sess)
        return needy

    def consider_leaf() -> None:
        nonlocal best
        needy = deficits()
        combos: List[Dict[str, Tuple[int, int]]]
        if not needy:
            combos = [{}]
        else:
            per_session = [[(sess.id, pair) for pair in _ext_options(inst, board, sess, placements[sess.id])]
                           for sess in needy]
            combos = [dict(combo) for combo in product(*per_session)]
        for combo in combos:
            trial = {}
            for sid, pl in placements.items():
                lb, la = combo.get(sid, (0, 0))
                trial[sid] = SessionPlacement(session=sid, period=pl.period, start=pl.start,
                                              length=pl.length, before=lb, after=la,
                                              location=pl.location)
            sol = AgendaSolution(placements=trial)
            if feas.check_agenda(inst, board, sol):
                continue
            cost = feas.agenda_cost(inst, sol)
            key = _agenda_key(sids, trial)
            if best is None or (cost, key) < (best[0], best[1]):
                best = (cost, key, sol)
            break  # extensions never change the cost, the first legal combo decides

    def walk(depth: int) -> None:
        if depth == len(sessions):
            consider_leaf()
            return
        sess = sessions[depth]
        for option in options[sess.id]:
            if option is None:
                walk(depth + 1)
                continue
            placements[sess.id] = option
            if not partial_infeasible():
                walk(depth + 1)
            del placements[sess.id]

    walk(0)
    if best is None:
        raise ModelError("no feasible agenda exists")
    return best[0], best[2]
