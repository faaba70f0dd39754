"""``qsp solve`` and ``qsp bench``.

Exit codes: 0 consistent or entailed, 1 inconsistent or not entailed,
2 unknown, 3 and above for usage, input or backend errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .bench import corpus_files, run_bench
from .dsl import ParseError, load_problem
from .model import Status, Verdict
from .smt import DEFAULT_TIMEOUT, BackendConfig
from .solver import MODES, SolverConfig, decide

EXIT_OK, EXIT_NO, EXIT_UNKNOWN, EXIT_USAGE, EXIT_INPUT, EXIT_BACKEND = 0, 1, 2, 3, 4, 5

CORPUS = Path(__file__).parent / "corpus"

log = logging.getLogger("qsp")


def exit_code(v: Verdict) -> int:
    return {Status.CONSISTENT: EXIT_OK, Status.INCONSISTENT: EXIT_NO, Status.UNKNOWN: EXIT_UNKNOWN}[v.status]


def _backend(args) -> BackendConfig:
    keep = args.keep_smt or getattr(args, "emit_smt", None)
    cfg = BackendConfig(solver=args.solver, timeout=args.timeout, keep_dir=keep)
    cfg.command("probe.smt2")  # raises FileNotFoundError early
    return cfg


def _number(q) -> object:
    q = Fraction(q) if not isinstance(q, float) else q
    if isinstance(q, Fraction) and q.denominator == 1:
        return q.numerator
    return str(q) if isinstance(q, Fraction) else q


def cmd_solve(args) -> int:
    try:
        problem = load_problem(args.problem)
    except OSError as e:
        print(f"error: cannot read {args.problem}: {e.strerror or e}", file=sys.stderr)
        return EXIT_INPUT
    except ParseError as e:
        print(f"error: {args.problem}: {e}", file=sys.stderr)
        return EXIT_INPUT
    try:
        config = SolverConfig(_backend(args), deadline=args.deadline)
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BACKEND
    try:
        v = decide(problem, args.mode, config)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if v.status is Status.UNKNOWN and (v.reason or "").startswith("backend-error"):
        print(f"error: {v.reason}", file=sys.stderr)
        return EXIT_BACKEND
    if args.json:
        out = {"verdict": v.label, "task": v.task, "reason": v.reason, "provenance": v.provenance}
        if v.witness is not None:
            out["witness"] = {k: _number(x) for k, x in sorted(v.witness.items())}
        print(json.dumps(out, default=str, indent=2))
    else:
        print(v.label if v.status is not Status.UNKNOWN else f"unknown ({v.reason})")
        if v.witness is not None and args.witness:
            for k, x in sorted(v.witness.items()):
                print(f"  {k} = {_number(x)}")
    if args.render:
        if v.witness is None:
            print("note: no witness to render", file=sys.stderr)
        else:
            from .render import render_witness
            objects = problem.graph().objects.values()
            values = dict(problem.groundings)
            values.update(v.witness)
            try:
                render_witness(values, objects, args.render)
            except (OSError, ValueError) as e:
                print(f"error: cannot render: {e}", file=sys.stderr)
                return EXIT_INPUT
    return exit_code(v)


def cmd_bench(args) -> int:
    try:
        paths = corpus_files(args.corpus)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.problems:
        wanted = set(args.problems)
        paths = [p for p in paths if p.stem in wanted]
    try:
        config = SolverConfig(_backend(args), deadline=args.deadline)
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BACKEND
    modes = MODES if args.mode == "both" else (args.mode,)
    report = run_bench(paths, config, modes, args.repeat, args.parallel, args.no_time)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    print(report.summary())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsp", description="Qualitative spatial constraint solver.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def backend_flags(p):
        p.add_argument("--solver", help="SMT solver executable (default: $QS_SOLVER_PATH or z3 on PATH)")
        p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="seconds per backend call")
        p.add_argument("--keep-smt", metavar="DIR", help="keep the SMT-LIB scripts in DIR")
        p.add_argument("--deadline", type=float, help="wall-clock seconds for a whole problem")

    s = sub.add_parser("solve", help="decide one .qsp problem")
    s.add_argument("problem")
    s.add_argument("--mode", choices=MODES, default="pruned")
    backend_flags(s)
    s.add_argument("--emit-smt", metavar="DIR", help="write every SMT-LIB script sent to the solver into DIR")
    s.add_argument("--render", metavar="OUT.svg", help="draw the witness")
    s.add_argument("--json", action="store_true", help="machine-readable output")
    s.add_argument("--witness", action="store_true", help="print witness values")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="time the corpus in naive and pruned mode")
    b.add_argument("corpus", nargs="?", default=str(CORPUS))
    b.add_argument("--problems", nargs="*", help="only these problem ids")
    b.add_argument("--mode", choices=(*MODES, "both"), default="both")
    b.add_argument("--repeat", type=int, default=1)
    b.add_argument("--csv", metavar="PATH")
    b.add_argument("--parallel", action="store_true", help="run problems concurrently")
    b.add_argument("--no-time", action="store_true", help="zero the times (stable output)")
    backend_flags(b)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "repeat", 1) < 1:
        print("error: --repeat must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
