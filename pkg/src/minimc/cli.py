"""minimc driver: parse -> link -> validate -> transform -> explore -> report.

Exit codes: 0 verified OK, 1 bug found, 2 usage/parse/link/validation
error, 3 unsupported-feature diagnostic.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .explore import (
    ExplorationBudgetExceeded,
    ExploreConfig,
    NaiveCapExceeded,
    VerdictKind,
    build_graph,
    explore,
    explore_naive,
)
from .interp import InterpConfig, run_schedule
from .ir import InterceptError, LinkError, McirError, ParseError, link, parse_module, validate
from .passes import PIPELINE_STAGES, PassConfig, run_pipeline
from .report import dump_dot, machine_report, render_report

EXIT_OK = 0
EXIT_BUG = 1
EXIT_USAGE = 2
EXIT_UNSUPPORTED = 3

_VERDICT_EXIT = {
    VerdictKind.OK: EXIT_OK,
    VerdictKind.UNSUPPORTED: EXIT_UNSUPPORTED,
}


def _build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="minimc",
        description="stateless model checker for MCIR programs",
    )
    p.add_argument("inputs", nargs="+", metavar="FILE.mcir", help="input modules")
    p.add_argument("--unroll", type=int, default=10, metavar="K",
                   help="loop iteration bound (default 10)")
    p.add_argument("--chunk-limit", type=int, default=64, metavar="BYTES",
                   help="max constant intrinsic length to lower (default 64)")
    p.add_argument("--no-intercept", action="store_true",
                   help="skip threading-call interception")
    p.add_argument("--no-lower-intrinsics", action="store_true",
                   help="skip memory-intrinsic lowering")
    p.add_argument("--no-init-undef", action="store_true",
                   help="skip undef initialization of stack allocations")
    p.add_argument("--no-dead-alloc", action="store_true",
                   help="skip dead-allocation elimination")
    p.add_argument("--oracle", action="store_true",
                   help="use exhaustive enumeration instead of DPOR")
    p.add_argument("--max-execs", type=int, default=100_000, metavar="N",
                   help="exploration budget (default 100000)")
    p.add_argument("--keep-going", action="store_true",
                   help="collect all distinct error sites instead of stopping")
    p.add_argument("--stats", action="store_true", help="print exploration statistics")
    p.add_argument("--dump-ir", metavar="STAGE", choices=PIPELINE_STAGES,
                   help=f"print IR after a stage ({', '.join(PIPELINE_STAGES)})")
    p.add_argument("--dot", metavar="PATH", help="write execution graph as DOT")
    p.add_argument("--trace", metavar="FILE",
                   help="replay one schedule (whitespace-separated tids) and print it")
    p.add_argument("--show-init", action="store_true",
                   help="show init stores in witnesses")
    p.add_argument("--machine-out", metavar="PATH",
                   help="write the machine record to a file instead of stdout")
    return p


def _print_program(stage: str, program) -> None:
    from .ir import print_program

    print(f"; --- ir after {stage} ---")
    print(print_program(program))


def _trace_line(ev) -> str:
    loc = f"{ev.alloc}+{ev.offset}" if ev.alloc is not None else "-"
    value = ev.value_str() or "-"
    ordering = str(ev.ordering) if ev.ordering else "-"
    return (
        f"{ev.tid} {ev.seq} {ev.kind.value} {loc} {ev.width} {value} "
        f"{int(ev.atomic)} {ordering} {ev.loc}"
    )


def _read_schedule(path: str) -> list:
    text = Path(path).read_text(encoding="utf-8")
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0]
        out.extend(int(tok) for tok in line.split())
    return out


def main(argv=None) -> int:
    args = _build_arg_parser().parse_args(argv)

    try:
        modules = []
        for path in args.inputs:
            text = Path(path).read_text(encoding="utf-8")
            modules.append(parse_module(text, name=path))
        program = link(modules)
    except (OSError, ParseError, LinkError) as exc:
        print(f"minimc: {exc}", file=sys.stderr)
        return EXIT_USAGE

    diagnostics = validate(program)
    if diagnostics:
        for diag in diagnostics:
            print(f"minimc: {diag}", file=sys.stderr)
        return EXIT_USAGE

    try:
        pass_config = PassConfig(
            loop_bound=args.unroll,
            memcpy_chunk_limit=args.chunk_limit,
            intercept=not args.no_intercept,
            lower_intrinsics=not args.no_lower_intrinsics,
            init_undef=not args.no_init_undef,
            dead_allocs=not args.no_dead_alloc,
        )
    except ValueError as exc:
        print(f"minimc: {exc}", file=sys.stderr)
        return EXIT_USAGE

    dump = _print_program if args.dump_ir else None
    stage_filter = args.dump_ir

    def dump_cb(stage, prog):
        if dump is not None and stage == stage_filter:
            dump(stage, prog)

    try:
        program, pass_report = run_pipeline(program, pass_config, dump=dump_cb)
    except InterceptError as exc:
        print(f"minimc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for diag in pass_report.diagnostics:
        print(f"minimc: warning: {diag}", file=sys.stderr)

    interp_config = InterpConfig()

    if args.trace:
        try:
            schedule = _read_schedule(args.trace)
        except (OSError, ValueError) as exc:
            print(f"minimc: bad schedule file: {exc}", file=sys.stderr)
            return EXIT_USAGE
        trace = run_schedule(program, schedule, interp_config)
        for ev in trace.events:
            print(_trace_line(ev))
        print(f"outcome: {trace.outcome.value}")
        for note in trace.notes:
            print(f"note: {note}")
        if trace.fault is not None:
            print(f"fault: {trace.fault}")
            return EXIT_BUG
        return EXIT_OK

    explore_config = ExploreConfig(
        algorithm="naive" if args.oracle else "dpor",
        stop_mode="keep_going" if args.keep_going else "first_error",
        max_executions=args.max_execs,
        max_threads=interp_config.max_threads,
        call_depth=interp_config.call_depth,
    )

    classes = None
    try:
        if args.oracle:
            result = explore_naive(program, explore_config)
            verdict = result.verdict
            classes = result.class_count
        else:
            verdict = explore(program, explore_config)
    except (ExplorationBudgetExceeded, NaiveCapExceeded) as exc:
        print(f"minimc: {exc}", file=sys.stderr)
        return EXIT_USAGE

    print(render_report(verdict, pass_summary=pass_report.summary(),
                        show_init=args.show_init, show_stats=args.stats))
    if classes is not None:
        print(f"classes: {classes}")

    if args.dot:
        trace = verdict.witness
        if trace is None:
            trace = run_schedule(program, [], interp_config)
        Path(args.dot).write_text(dump_dot(build_graph(trace)) + "\n", encoding="utf-8")

    record = machine_report(verdict)
    if args.machine_out:
        Path(args.machine_out).write_text(record + "\n", encoding="utf-8")
    else:
        print(record)

    return _VERDICT_EXIT.get(verdict.kind, EXIT_BUG)


if __name__ == "__main__":
    sys.exit(main())
