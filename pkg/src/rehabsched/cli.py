"""Command-line interface.

Subcommands: gen, solve-board, solve-agenda, oracle, bench grid, serve.
Solution files are JSON; the bench report directory receives the CSV, the
JSON report, a resumable checkpoint and rendered phase-map figures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

from . import bench, iojson, oracle
from .agenda import solve_agenda
from .board import solve_board
from .generator import GenParams, generate, preset
from .model import ModelError, validate_instance
from .solvereport import SolveConfig


def _write_json(path: str, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _load_params(path: str, seed: int) -> GenParams:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    known = {f.name for f in dataclass_fields(GenParams)}
    unknown = set(doc) - known
    if unknown:
        raise ModelError(f"unknown generator parameters: {sorted(unknown)}")
    for key in ("shift_length_dist", "ideal_length_dist", "min_length_dist", "daily_slack"):
        if key in doc:
            doc[key] = tuple(doc[key])
    doc.setdefault("seed", seed)
    return GenParams(**doc)


def cmd_gen(args) -> int:
    if args.preset:
        params = preset(args.preset, seed=args.seed)
    elif args.params:
        params = _load_params(args.params, args.seed)
    else:
        print("gen: need --preset or --params", file=sys.stderr)
        return 2
    inst = generate(params)
    iojson.save_instance(inst, args.out)
    print(f"wrote {args.out}: {len(inst.patients)} patients, "
          f"{len(inst.real_operators())} operators, {len(inst.sessions)} sessions")
    return 0


def cmd_solve_board(args) -> int:
    inst = iojson.load_instance(args.instance)
    cfg = SolveConfig(mode=args.mode, cutoff=args.cutoff, seed=args.seed)
    report = solve_board(inst, cfg)
    print(f"board: {report.outcome}"
          + (f" cost={report.cost.as_list()}" if report.cost else "")
          + f" in {report.wall_time:.2f}s")
    if report.best is not None:
        iojson.save_board(report.best, args.out)
        print(f"wrote {args.out}")
    if args.report:
        _write_json(args.report, report.to_json())
    return 0 if report.best is not None else 1


def cmd_solve_agenda(args) -> int:
    inst = iojson.load_instance(args.instance)
    board = iojson.load_board(args.board)
    cfg = SolveConfig(mode=args.mode, cutoff=args.cutoff, seed=args.seed)
    report = solve_agenda(inst, board, cfg, args.variant)
    print(f"agenda[{args.variant}]: {report.outcome}"
          + (f" cost={report.cost.as_list()}" if report.cost else "")
          + f" in {report.wall_time:.2f}s")
    if report.best is not None:
        iojson.save_agenda(report.best, args.out)
        print(f"wrote {args.out}")
        if args.gantt:
            from .plotting import render_agenda_gantt
            render_agenda_gantt(inst, board, report.best, args.gantt)
            print(f"wrote {args.gantt}")
    if args.report:
        _write_json(args.report, report.to_json())
    return 0 if report.best is not None else 1


def cmd_oracle(args) -> int:
    inst = iojson.load_instance(args.instance)
    if args.board:
        board = iojson.load_board(args.board)
        cost, sol = oracle.oracle_agenda(inst, board)
        payload = {"phase": "agenda", "cost": cost.as_list(),
                   "solution": iojson.agenda_to_json(sol)}
    else:
        cost, sol = oracle.oracle_board(inst)
        payload = {"phase": "board", "cost": cost.as_list(),
                   "solution": iojson.board_to_json(sol)}
    _write_json(args.out, payload)
    print(f"oracle {payload['phase']}: cost={payload['cost']} -> {args.out}")
    return 0


def cmd_bench_grid(args) -> int:
    spec = bench.GridSpec.from_json(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    done = []

    def progress(cell):
        done.append(cell)
        print(f"  cell ({cell.n_patients},{cell.n_operators}): "
              f"board={cell.board_modal} agenda={cell.agenda_modal}")

    report = bench.run_grid(spec, out_dir=args.out_dir, workers=args.workers,
                            progress=progress)
    print(f"grid complete: {len(report.cells)} cells -> {args.out_dir}")
    if not args.no_figures:
        from .plotting import render_grid_heatmaps
        for p in render_grid_heatmaps(report, args.out_dir):
            print(f"wrote {p}")
    print(f"board frontier: {bench.optimum_frontier(report, 'board')}; "
          f"agenda frontier: {bench.optimum_frontier(report, 'agenda')}")
    return 0


def cmd_validate(args) -> int:
    inst = iojson.load_instance(args.instance)
    issues = validate_instance(inst)
    for issue in issues:
        print(f"{issue.entity}: {issue.message}")
    print(f"{len(issues)} issue(s)")
    return 0 if not issues else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir, default_cutoff=args.default_cutoff,
                     workers=args.workers)
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rehabsched",
                                     description="Two-phase rehabilitation scheduling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--preset", choices=("nervi", "castel_goffredo"))
    p.add_argument("--params", help="JSON file with GenParams overrides")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve-board", help="assign patients to operators")
    p.add_argument("--instance", required=True)
    p.add_argument("--cutoff", type=float, default=300.0)
    p.add_argument("--mode", choices=("exact", "anytime"), default="anytime")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="board.json")
    p.add_argument("--report", help="also write the full solve report")
    p.set_defaults(func=cmd_solve_board)

    p = sub.add_parser("solve-agenda", help="place sessions in time and space")
    p.add_argument("--instance", required=True)
    p.add_argument("--board", required=True)
    p.add_argument("--cutoff", type=float, default=300.0)
    p.add_argument("--mode", choices=("exact", "anytime"), default="anytime")
    p.add_argument("--variant", choices=("basic", "optimized"), default="optimized")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="agenda.json")
    p.add_argument("--gantt", help="render the schedule as a PNG timetable")
    p.add_argument("--report", help="also write the full solve report")
    p.set_defaults(func=cmd_solve_agenda)

    p = sub.add_parser("oracle", help="brute-force reference optimum (tiny instances)")
    p.add_argument("--instance", required=True)
    p.add_argument("--board", help="check the agenda phase for this board")
    p.add_argument("--out", default="oracle.json")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="benchmark harness")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)
    g = bench_sub.add_parser("grid", help="run a (patients x operators) sweep")
    g.add_argument("--spec", required=True, help="GridSpec JSON file")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--no-figures", action="store_true")
    g.set_defaults(func=cmd_bench_grid)

    p = sub.add_parser("serve", help="run the coordinator HTTP service")
    env = os.environ
    p.add_argument("--listen", default=env.get("REHABSCHED_LISTEN", "127.0.0.1:8000"))
    p.add_argument("--data-dir", default=env.get("REHABSCHED_DATA_DIR", "./workspaces"))
    p.add_argument("--default-cutoff", type=float,
                   default=float(env.get("REHABSCHED_CUTOFF", "30")))
    p.add_argument("--workers", type=int, default=int(env.get("REHABSCHED_WORKERS", "2")))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
