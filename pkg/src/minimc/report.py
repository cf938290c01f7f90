"""Render verdicts, witness traces, and execution graphs.

Output surfaces:

* format_counterexample -- human-readable error header plus the witness
  interleaving, one column per thread (init stores hidden by default).
* machine_report -- one stable line of key=value pairs, shell-quotable,
  free of wall-clock or locale-dependent content.
* dump_dot -- Graphviz rendering of an execution graph (po solid, rf
  dashed, co dotted, spawn/join bold).
"""

from __future__ import annotations

import shlex
from typing import Optional

from .explore import ExecutionGraph, Verdict, VerdictKind
from .interp import Event, EventKind, Trace


def _loc_desc(ev: Event) -> str:
    return f"{ev.alloc}+{ev.offset}" if ev.alloc is not None else ""


def _access_line(label: str, ev: Event) -> str:
    kind = {EventKind.READ: "read", EventKind.WRITE: "write", EventKind.RMW: "rmw"}[ev.kind]
    atomicity = f"atomic {ev.ordering}" if ev.atomic else "non-atomic"
    return (
        f"  {label}: {kind} of {ev.width} byte(s) at {_loc_desc(ev)} "
        f"by t{ev.tid} ({atomicity}) at {ev.loc}"
    )


def _event_cell(ev: Event) -> str:
    k = ev.kind
    if k in (EventKind.READ, EventKind.WRITE, EventKind.RMW):
        tag = {EventKind.READ: "R", EventKind.WRITE: "W", EventKind.RMW: "U"}[k]
        atomic = "a" if ev.atomic else ""
        return f"{tag}{atomic} {_loc_desc(ev)} ={ev.value_str()}"
    if k is EventKind.THREAD_CREATE:
        return f"spawn t{ev.other_tid}"
    if k is EventKind.THREAD_JOIN:
        return f"join t{ev.other_tid}"
    if k is EventKind.ALLOC:
        return f"alloc {ev.alloc}[{ev.width}]"
    if k is EventKind.THREAD_START:
        return "start"
    if k is EventKind.THREAD_END:
        return "end"
    if k is EventKind.ASSERT_FAIL:
        return "assert failed"
    if k is EventKind.PANIC:
        return "panic"
    return k.value


def format_witness(trace: Trace, show_init: bool = False, col_width: int = 26) -> str:
    """Numbered interleaving, one column per thread; exactly one line per
    (visible) event."""
    events = [e for e in trace.events if show_init or not e.hidden]
    tids = sorted({e.tid for e in events} | set(trace.tid_lineage))
    column = {tid: i for i, tid in enumerate(tids)}
    header = "      " + "".join(f"t{tid}".ljust(col_width) for tid in tids)
    lines = [header]
    for n, ev in enumerate(events, start=1):
        cells = [""] * len(tids)
        cells[column[ev.tid]] = _event_cell(ev)
        row = "".join(c.ljust(col_width) for c in cells).rstrip()
        loc = f"  [{ev.loc}]" if ev.loc.line else ""
        lines.append(f"{n:4}  {row}{loc}")
    return "\n".join(lines)


def format_counterexample(verdict: Verdict, show_init: bool = False) -> str:
    """Error header plus the full witness interleaving."""
    if not verdict.is_error:
        raise ValueError("no counterexample for an OK verdict")
    lines = []
    if verdict.kind is VerdictKind.DATA_RACE:
        a, b = verdict.race
        where = _loc_desc(a) if a.alloc is not None else "?"
        lines.append(f"error: data race on {where}")
        lines.append(_access_line("first ", a))
        lines.append(_access_line("second", b))
    elif verdict.kind is VerdictKind.UNSUPPORTED:
        lines.append(f"error: unsupported construct\n  {verdict.diagnostic}")
        return "\n".join(lines)
    else:
        names = {
            VerdictKind.ASSERT_VIOLATION: "assertion violation",
            VerdictKind.OUT_OF_BOUNDS: "out-of-bounds access",
            VerdictKind.UNINITIALIZED_READ: "uninitialized read",
            VerdictKind.PANIC: "panic",
        }
        fault = verdict.fault
        lines.append(f"error: {names[verdict.kind]}")
        lines.append(f"  {fault.message} (t{fault.tid}) at {fault.loc}")
    if verdict.witness is not None:
        lines.append("witness interleaving:")
        lines.append(format_witness(verdict.witness, show_init=show_init))
        fault = verdict.witness.fault
        if fault is not None:
            lines.append(f"fault: {fault}")
        for note in verdict.witness.notes:
            lines.append(f"note: {note}")
    return "\n".join(lines)


def machine_report(verdict: Verdict) -> str:
    """One line, stable key=value format; parses back with shlex."""
    parts = [
        f"result={verdict.kind.value}",
        f"executions={verdict.stats.executions_explored}",
        f"blocked={verdict.stats.blocked_explorations}",
    ]
    if verdict.stats.bound_exceeded:
        parts.append("bound=1")
    if verdict.kind is VerdictKind.DATA_RACE and verdict.race is not None:
        parts.append(f"evA={verdict.race[0].loc}")
        parts.append(f"evB={verdict.race[1].loc}")
    elif verdict.fault is not None:
        parts.append(f"evA={verdict.fault.loc}")
    if verdict.diagnostic is not None:
        parts.append(f"diagnostic={shlex.quote(verdict.diagnostic)}")
    return " ".join(parts)


def parse_machine_report(line: str) -> dict:
    out = {}
    for token in shlex.split(line):
        key, _eq, value = token.partition("=")
        out[key] = value
    return out


# ---------------------------------------------------------------------------
# DOT rendering
# ---------------------------------------------------------------------------


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def dump_dot(graph: ExecutionGraph, title: str = "execution") -> str:
    """Graphviz digraph: po solid, rf dashed ("rf"), co dotted ("co"),
    spawn/join bold."""
    ids = {ev: f"e{i}" for i, ev in enumerate(graph.events)}
    lines = [f'digraph "{_dot_escape(title)}" {{']
    lines.append("  rankdir=TB;")
    lines.append('  node [shape=box, fontname="monospace", fontsize=10];')
    for ev in graph.events:
        label = f"t{ev.tid}.{ev.seq} {_event_cell(ev)}"
        lines.append(f'  {ids[ev]} [label="{_dot_escape(label)}"];')
    for events in graph.program_order.values():
        for prev, nxt in zip(events, events[1:]):
            lines.append(f"  {ids[prev]} -> {ids[nxt]};")
    rf_edges = set()
    for read, writers in graph.reads_from.items():
        for writer in writers.values():
            rf_edges.add((ids[writer], ids[read]))
    for src, dst in sorted(rf_edges):
        lines.append(f'  {src} -> {dst} [style=dashed, label="rf", constraint=false];')
    co_edges = set()
    for writers in graph.coherence.values():
        for prev, nxt in zip(writers, writers[1:]):
            co_edges.add((ids[prev], ids[nxt]))
    for src, dst in sorted(co_edges):
        lines.append(f'  {src} -> {dst} [style=dotted, label="co", constraint=false];')
    for create, start in graph.spawn_edges:
        lines.append(f"  {ids[create]} -> {ids[start]} [style=bold];")
    for end, join in graph.join_edges:
        lines.append(f"  {ids[end]} -> {ids[join]} [style=bold];")
    lines.append("}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Whole-run report
# ---------------------------------------------------------------------------


def render_report(verdict: Verdict, pass_summary: Optional[str] = None,
                  show_init: bool = False, show_stats: bool = False) -> str:
    lines = []
    if verdict.is_error:
        lines.append(format_counterexample(verdict, show_init=show_init))
        extra = [e for e in verdict.errors if len(verdict.errors) > 1]
        if extra:
            lines.append("distinct error sites:")
            for site in extra:
                loc_b = f" / {site.loc_b}" if site.loc_b else ""
                lines.append(f"  {site.kind.value}: {site.loc_a}{loc_b}")
    else:
        lines.append("result: no errors found")
        if verdict.stats.bound_exceeded:
            lines.append("note: loop bound reached in at least one execution")
    if pass_summary:
        lines.append(f"passes: {pass_summary}")
    if show_stats:
        lines.append(f"stats: {verdict.stats.line()}")
    return "\n".join(lines)
