"""Command line front end: ``mertest test|instrument|cover``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .coverage.instrument import (CounterMeta, InstrumentError, instrument, instrumented_source,
                                  is_instrumented, label_program, labelled_source)
from .coverage.report import (UnknownLabelError, classify, emit_detail_report, emit_html,
                              format_event, replay_log)
from .engine import ExceptionPolicy, InternalError, LogicError
from .modes import (ModeError, RenamingTable, callee_table, check_determinism, compile_program,
                    procedure_callees)
from .program import parse_program
from .syntax import ParseError
from .terms import format_term
from .testkit import (ExecMode, RenamingError, SuiteContext, TestSuiteError, apply_renaming,
                      parse_testsuite, render_text_report, run_suite)

EXIT_OK, EXIT_FAILURES, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _context(args, program, procs, callees, log_sink=None) -> SuiteContext:
    policy = ExceptionPolicy.PROPAGATE if args.debug_exceptions else ExceptionPolicy.CATCH_ALL
    return SuiteContext(procs, callees, program, ExecMode(args.mode), policy,
                        default_limit=args.limit, log_sink=log_sink)


def _load_instrumented(path: str):
    program = parse_program(_read(path))
    procs, _ = compile_program(program, rename=False)
    return program, procs


def cmd_test(args) -> int:
    program = parse_program(_read(args.program))
    cases = parse_testsuite(_read(args.suite))
    if args.renaming:
        table = RenamingTable.loads(_read(args.renaming))
        procs, _ = compile_program(program, rename=False)
        cases = apply_renaming(cases, table, procs)
        callees = procedure_callees(procs)
    else:
        procs, _ = compile_program(program)
        callees = callee_table(program)
    outcomes = run_suite(cases, _context(args, program, procs, callees))
    sys.stdout.write(render_text_report(outcomes))
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_FAILURES


def cmd_instrument(args) -> int:
    program = parse_program(_read(args.program))
    if is_instrumented(program):
        raise UsageError(f"{args.program} is already instrumented")
    procs, table = compile_program(program)
    for diag in check_determinism(procs):
        print(f"{args.program}:{diag}", file=sys.stderr)
    labelled, _ = label_program(procs, program.type_defs)
    inst, meta = instrument(procs, program.type_defs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.program).stem
    files = {
        ".inst": instrumented_source(inst, program.type_defs),
        ".rename": table.dumps(),
        ".meta": meta.dumps(),
        ".labelled": labelled_source(labelled, program.type_defs),
    }
    for ext, text in files.items():
        (out / (stem + ext)).write_text(text, encoding="utf-8")
    print(f"wrote {', '.join(str(out / (stem + ext)) for ext in files)}")
    return EXIT_OK


def cmd_cover(args) -> int:
    inst_path = Path(args.program)
    base = inst_path.with_suffix("")
    program, procs = _load_instrumented(str(inst_path))
    meta = CounterMeta.loads(_read(args.meta or str(base) + ".meta"))
    labelled_text = _read(str(base) + ".labelled")
    table = RenamingTable.loads(_read(args.renaming or str(base) + ".rename"))
    cases = apply_renaming(parse_testsuite(_read(args.suite)), table, procs)
    events: list = []
    ctx = _context(args, program, procs, procedure_callees(procs), log_sink=events.append)
    outcomes = run_suite(cases, ctx)
    sys.stdout.write(render_text_report(outcomes))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "coverage.log").write_text("".join(format_event(e) for e in events), encoding="utf-8")
    report = classify(replay_log(events, meta), meta)
    (out / "coverage.html").write_text(emit_html(report, labelled_text, title=inst_path.stem),
                                       encoding="utf-8")
    (out / "coverage.txt").write_text(emit_detail_report(report), encoding="utf-8")
    print(f"wrote {out / 'coverage.html'}, {out / 'coverage.txt'}")
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_FAILURES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mertest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--mode", choices=[m.value for m in ExecMode], default="multi",
                       help="execution mode (default: multi)")
        p.add_argument("--debug-exceptions", action="store_true",
                       help="abort on the first exception and print it")
        p.add_argument("--renaming", metavar="FILE", help="procedure renaming file")
        p.add_argument("--limit", type=int, default=None,
                       help="default solution limit for tests without limit(N)")

    p = sub.add_parser("test", help="run a test suite against a program")
    p.add_argument("program")
    p.add_argument("suite")
    run_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("instrument", help="write .inst, .rename, .meta and .labelled files")
    p.add_argument("program")
    p.add_argument("--out", default=".", metavar="DIR")
    p.set_defaults(func=cmd_instrument)

    p = sub.add_parser("cover", help="run a suite on an instrumented program and report coverage")
    p.add_argument("program", help="the .inst file written by `instrument`")
    p.add_argument("suite")
    p.add_argument("--meta", metavar="FILE", help="counter meta file (default: sibling .meta)")
    p.add_argument("--out", default=".", metavar="DIR")
    run_flags(p)
    p.set_defaults(func=cmd_cover)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LogicError as exc:
        # only reachable with --debug-exceptions
        print(f"uncaught exception: {format_term(exc.term)}", file=sys.stderr)
        if exc.stack:
            print("call stack (innermost last):", file=sys.stderr)
            for name in exc.stack:
                print(f"  {name}", file=sys.stderr)
        return EXIT_FAILURES
    except (ParseError, ModeError, TestSuiteError, RenamingError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownLabelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InstrumentError, InternalError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
