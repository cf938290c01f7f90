"""Systematic exploration of thread interleavings.

Two engines over the same replay substrate:

* ``explore`` -- source-set DPOR with sleep sets. Scheduling decisions
  happen only at user-visible operations (memory accesses, spawn, join);
  thread-local instructions run eagerly behind them. Races between the
  newest event and earlier conflicting events insert backtrack points;
  sleep sets guarantee no two completed executions are equivalent.
* ``explore_naive`` -- exhaustive enumeration of every interleaving,
  deduplicated into equivalence classes by a Foata-style normal form of
  the dependency graph. It is the oracle the DPOR engine is checked
  against, and refuses programs beyond a small event cap.

Two distinct happens-before relations are in play and must not be mixed:

* the *dependency* relation (same thread, byte-overlapping accesses with
  at least one write, spawn/join pairing) drives DPOR and equivalence;
* the *synchronization* relation (program order, spawn, join, atomic
  reads-from) defines data races for ``detect_races``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .ir import (
    ExternCall,
    Load,
    McirError,
    Memcpy,
    Memmove,
    Memset,
    Program,
    Reg,
    Rmw,
    Spawn,
    Store,
    Join as JoinInstr,
)
from .interp import (
    Event,
    EventKind,
    Fault,
    FaultKind,
    Interp,
    InterpConfig,
    Outcome,
    Trace,
)


class ExplorationBudgetExceeded(McirError):
    pass


class NaiveCapExceeded(McirError):
    pass


# ---------------------------------------------------------------------------
# Vector clocks
# ---------------------------------------------------------------------------


class VectorClock:
    """tid -> logical time; component value = number of that thread's
    events known to happen before (an event's own component is seq+1)."""

    __slots__ = ("_c",)

    def __init__(self, items: Optional[dict] = None):
        self._c = dict(items) if items else {}

    def get(self, tid: int) -> int:
        return self._c.get(tid, 0)

    def set(self, tid: int, value: int) -> None:
        self._c[tid] = value

    def copy(self) -> "VectorClock":
        return VectorClock(self._c)

    def join(self, other: "VectorClock") -> None:
        for tid, v in other._c.items():
            if v > self._c.get(tid, 0):
                self._c[tid] = v

    def leq(self, other: "VectorClock") -> bool:
        return all(v <= other.get(tid) for tid, v in self._c.items())

    def covers(self, tid: int, seq: int) -> bool:
        """True iff the event (tid, seq) happens before or at this clock."""
        return self.get(tid) >= seq + 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorClock):
            return NotImplemented
        keys = set(self._c) | set(other._c)
        return all(self.get(k) == other.get(k) for k in keys)

    def __repr__(self) -> str:
        items = ", ".join(f"{t}:{v}" for t, v in sorted(self._c.items()))
        return f"VectorClock({{{items}}})"


def _ranges_overlap(a: Event, b: Event) -> bool:
    return (
        a.alloc == b.alloc
        and a.offset < b.offset + b.width
        and b.offset < a.offset + a.width
    )


def _dependent(a: Event, b: Event) -> bool:
    """Conflict relation for trace equivalence (a occurs before b)."""
    if a.tid == b.tid:
        return True
    if a.is_memory and b.is_memory and not a.hidden and not b.hidden:
        if (a.is_write or b.is_write) and _ranges_overlap(a, b):
            return True
    if a.kind is EventKind.THREAD_CREATE and b.kind is EventKind.THREAD_START \
            and a.other_tid == b.tid:
        return True
    if a.kind is EventKind.THREAD_END and b.kind is EventKind.THREAD_JOIN \
            and b.other_tid == a.tid:
        return True
    return False


# ---------------------------------------------------------------------------
# Synchronization happens-before and data races
# ---------------------------------------------------------------------------


def happens_before(trace: Trace) -> dict:
    """Vector clock per event under (program order, spawn, join, atomic
    reads-from); clock(e2) covers e1 iff e1 happens before e2."""
    clocks: dict = {}
    thread_clock: dict = {}
    child_start: dict = {}  # tid -> clock at its creating spawn
    end_clock: dict = {}
    last_write: dict = {}  # (alloc, byte) -> (event, clock)

    for ev in trace.events:
        tc = thread_clock.get(ev.tid)
        if tc is None:
            tc = child_start.pop(ev.tid, VectorClock())
            thread_clock[ev.tid] = tc
        if ev.kind is EventKind.THREAD_JOIN and ev.other_tid in end_clock:
            tc.join(end_clock[ev.other_tid])
        if ev.kind in (EventKind.READ, EventKind.RMW) and ev.atomic:
            for byte in ev.bytes_accessed():
                writer = last_write.get(byte)
                if writer is not None and writer[0].atomic:
                    tc.join(writer[1])
        tc.set(ev.tid, ev.seq + 1)
        snap = tc.copy()
        clocks[ev] = snap
        if ev.is_write:
            for byte in ev.bytes_accessed():
                last_write[byte] = (ev, snap)
        if ev.kind is EventKind.THREAD_CREATE:
            child_start[ev.other_tid] = snap.copy()
        if ev.kind is EventKind.THREAD_END:
            end_clock[ev.tid] = snap
    return clocks


def detect_races(trace: Trace, clocks: Optional[dict] = None) -> list:
    """All racing pairs: byte-overlapping accesses, at least one write, at
    least one non-atomic, unordered by synchronization happens-before.
    Initialization stores are excluded; pairs are deduplicated by source
    location and ordered by first encounter along the trace."""
    if clocks is None:
        clocks = happens_before(trace)
    mem = [e for e in trace.events if e.is_memory and not e.hidden]
    races = []
    seen = set()
    for j, later in enumerate(mem):
        for earlier in mem[:j]:
            if earlier.tid == later.tid:
                continue
            if not (earlier.is_write or later.is_write):
                continue
            if earlier.atomic and later.atomic:
                continue
            if not _ranges_overlap(earlier, later):
                continue
            if clocks[later].covers(earlier.tid, earlier.seq):
                continue
            key = tuple(sorted((str(earlier.loc), str(later.loc))))
            if key in seen:
                continue
            seen.add(key)
            races.append((earlier, later))
    return races


# ---------------------------------------------------------------------------
# Execution graphs
# ---------------------------------------------------------------------------


@dataclass
class ExecutionGraph:
    """Events of one execution plus the relations connecting them."""

    events: list
    program_order: dict  # tid -> [events]
    reads_from: dict  # read event -> {byte offset -> write event}
    coherence: dict  # (alloc, byte) -> [write events in order]
    spawn_edges: list  # (create event, start event)
    join_edges: list  # (end event, join event)


def build_graph(trace: Trace) -> ExecutionGraph:
    po: dict = {}
    rf: dict = {}
    co: dict = {}
    starts: dict = {}
    ends: dict = {}
    creates: dict = {}
    joins: list = []
    last_write: dict = {}

    for ev in trace.events:
        po.setdefault(ev.tid, []).append(ev)
        if ev.kind in (EventKind.READ, EventKind.RMW):
            rf[ev] = {
                off: last_write[(ev.alloc, off)]
                for off in range(ev.offset, ev.offset + ev.width)
                if (ev.alloc, off) in last_write
            }
        if ev.is_write:
            for byte in ev.bytes_accessed():
                co.setdefault(byte, []).append(ev)
                last_write[byte] = ev
        if ev.kind is EventKind.THREAD_START:
            starts[ev.tid] = ev
        elif ev.kind is EventKind.THREAD_END:
            ends[ev.tid] = ev
        elif ev.kind is EventKind.THREAD_CREATE:
            creates[ev.other_tid] = ev
        elif ev.kind is EventKind.THREAD_JOIN:
            joins.append(ev)

    spawn_edges = [
        (creates[tid], start) for tid, start in starts.items() if tid in creates
    ]
    join_edges = [
        (ends[ev.other_tid], ev) for ev in joins if ev.other_tid in ends
    ]
    return ExecutionGraph(
        events=list(trace.events),
        program_order=po,
        reads_from=rf,
        coherence=co,
        spawn_edges=spawn_edges,
        join_edges=join_edges,
    )


# ---------------------------------------------------------------------------
# Equivalence classes: Foata normal form of the dependency graph
# ---------------------------------------------------------------------------


def _alloc_key(alloc):
    if alloc is None:
        return None
    return (alloc.kind, alloc.symbol, alloc.lineage, alloc.index)


def _value_key(value, lineage: dict):
    if value is None:
        return None
    name = type(value).__name__
    if name == "IntValue":
        return ("i", value.width, value.value)
    if name == "PtrValue":
        return ("p", _alloc_key(value.alloc), value.offset)
    if name == "ThreadHandle":
        return ("h", lineage.get(value.tid))
    return ("u",)


def _event_label(ev: Event, lineage: dict) -> tuple:
    return (
        lineage[ev.tid],
        ev.seq,
        ev.kind.value,
        _alloc_key(ev.alloc),
        ev.offset,
        ev.width,
        _value_key(ev.read_value, lineage),
        _value_key(ev.written_value, lineage),
        ev.atomic,
        lineage.get(ev.other_tid) if ev.other_tid is not None else None,
    )


def canonical_form(trace: Trace) -> tuple:
    """Canonical representative of the trace's equivalence class: Foata
    layers of the dependency partial order, with schedule-independent
    event labels (threads named by spawn lineage). Equivalent traces map
    to equal forms; inequivalent ones differ."""
    lineage = trace.tid_lineage
    evs = [e for e in trace.events if not e.hidden]
    labels = [_event_label(e, lineage) for e in evs]
    n = len(evs)
    preds = [set() for _ in range(n)]
    for j in range(n):
        for i in range(j):
            if _dependent(evs[i], evs[j]):
                preds[j].add(i)
    remaining = set(range(n))
    layers = []
    while remaining:
        ready = [i for i in remaining if not (preds[i] & remaining)]
        layers.append(tuple(sorted((labels[i] for i in ready), key=repr)))
        remaining -= set(ready)
    return tuple(layers)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


class VerdictKind(Enum):
    OK = "OK"
    DATA_RACE = "race"
    ASSERT_VIOLATION = "assert"
    OUT_OF_BOUNDS = "oob"
    UNINITIALIZED_READ = "uninit"
    PANIC = "panic"
    UNSUPPORTED = "unsupported"


_FAULT_VERDICT = {
    FaultKind.OUT_OF_BOUNDS: VerdictKind.OUT_OF_BOUNDS,
    FaultKind.UNINITIALIZED_READ: VerdictKind.UNINITIALIZED_READ,
    FaultKind.ASSERT_VIOLATION: VerdictKind.ASSERT_VIOLATION,
    FaultKind.PANIC: VerdictKind.PANIC,
    FaultKind.CALL_DEPTH_EXCEEDED: VerdictKind.PANIC,
}


@dataclass
class Stats:
    executions_explored: int = 0
    blocked_explorations: int = 0
    events_max: int = 0
    bound_exceeded: bool = False
    wall_time: float = 0.0

    def line(self) -> str:
        return (
            f"executions={self.executions_explored} "
            f"blocked={self.blocked_explorations} max_events={self.events_max}"
        )


@dataclass(frozen=True)
class ErrorSite:
    kind: VerdictKind
    loc_a: str
    loc_b: Optional[str] = None


@dataclass
class Verdict:
    kind: VerdictKind
    race: Optional[tuple] = None  # (Event, Event) when kind is DATA_RACE
    fault: Optional[Fault] = None
    diagnostic: Optional[str] = None
    witness: Optional[Trace] = None
    stats: Stats = field(default_factory=Stats)
    errors: list = field(default_factory=list)  # distinct ErrorSites (keep-going)
    explored_forms: Optional[set] = None

    @property
    def is_error(self) -> bool:
        return self.kind is not VerdictKind.OK


def analyze_trace(trace: Trace) -> tuple:
    """(kind, race pair or None, fault or None) for one execution. Races
    win over the fault that ended the trace, mirroring on-the-fly
    detection order."""
    races = detect_races(trace)
    if races:
        return VerdictKind.DATA_RACE, races[0], None
    if trace.outcome is Outcome.FAULTED:
        return _FAULT_VERDICT[trace.fault.kind], None, trace.fault
    return VerdictKind.OK, None, None


@dataclass
class ExploreConfig:
    algorithm: str = "dpor"  # "dpor" | "naive"
    stop_mode: str = "first_error"  # "first_error" | "keep_going"
    max_executions: int = 100_000
    max_threads: int = 16
    call_depth: int = 64
    naive_cap: int = 24
    collect_forms: bool = False

    def __post_init__(self) -> None:
        if self.max_executions < 1:
            raise ValueError("max_executions must be >= 1")

    def interp_config(self) -> InterpConfig:
        return InterpConfig(max_threads=self.max_threads, call_depth=self.call_depth)


def scan_unsupported(program: Program) -> Optional[str]:
    """Diagnostic for constructs the verifier refuses to explore."""
    for _fn, _label, _i, instr in program.instructions():
        if isinstance(instr, (Memcpy, Memmove, Memset)):
            return f"{instr.loc}: unlowered memory intrinsic"
        if isinstance(instr, ExternCall):
            return f"{instr.loc}: unresolved extern call @{instr.fn}"
    return None


# ---------------------------------------------------------------------------
# Scheduling substrate: whole visible steps over the interpreter
# ---------------------------------------------------------------------------


def _is_visible(instr) -> bool:
    if isinstance(instr, (Load, Store)):
        return not (instr.synthetic or getattr(instr, "init", False))
    return isinstance(instr, (Rmw, Spawn, JoinInstr, Memcpy, Memmove, Memset))


class _Run:
    """One execution driven step-by-step; each scheduling step executes a
    thread's next visible operation plus any invisible instructions (and
    freshly spawned children's prefixes) behind it."""

    def __init__(self, program: Program, iconfig: InterpConfig):
        self.interp = Interp(program, iconfig)
        self.steps: list = []  # events per scheduling step
        self._advance(0)
        self.pre_events = list(self.interp.events)

    @property
    def over(self) -> bool:
        return self.interp.fault is not None or self.interp.bound_hit

    def _advance(self, tid: int) -> None:
        """Run tid through its start and invisible instructions until it is
        poised at a visible operation, finishes, or the execution ends."""
        interp = self.interp
        while not self.over:
            thread = interp.threads[tid]
            if thread.finished:
                return
            if not thread.started:
                interp.step(tid)
                continue
            if _is_visible(thread.next_instr()):
                return
            interp.step(tid)

    def enabled(self) -> list:
        if self.over:
            return []
        out = []
        for t in self.interp.threads:
            if t.finished:
                continue
            instr = t.next_instr()
            if isinstance(instr, JoinInstr):
                target = self.interp._peek_join_target(t, instr)
                if target is not None and not self.interp.threads[target].finished:
                    continue
            out.append(t.tid)
        return out

    def pending(self, tid: int) -> tuple:
        """Descriptor of tid's poised operation, for independence checks."""
        interp = self.interp
        thread = interp.threads[tid]
        instr = thread.next_instr()
        try:
            if isinstance(instr, Load):
                ptr = interp._as_ptr(interp._eval(thread, instr.addr))
                return ("mem", ptr.alloc, ptr.offset, instr.type.width, False)
            if isinstance(instr, Store):
                ptr = interp._as_ptr(interp._eval(thread, instr.addr))
                return ("mem", ptr.alloc, ptr.offset, instr.type.width, True)
            if isinstance(instr, Rmw):
                ptr = interp._as_ptr(interp._eval(thread, instr.addr))
                return ("mem", ptr.alloc, ptr.offset, instr.type.width, True)
            if isinstance(instr, JoinInstr):
                target = interp._peek_join_target(thread, instr)
                return ("join", target)
            if isinstance(instr, Spawn):
                return ("spawn",)
        except Exception:
            pass
        return ("opaque",)

    def sched_step(self, tid: int) -> list:
        interp = self.interp
        before_events = len(interp.events)
        before_threads = len(interp.threads)
        interp.step(tid)
        for child in range(before_threads, len(interp.threads)):
            self._advance(child)
        self._advance(tid)
        events = interp.events[before_events:]
        self.steps.append(events)
        return events


def _pending_conflicts(pending: tuple, events: list) -> bool:
    for ev in events:
        if ev.hidden:
            continue
        if pending[0] == "opaque":
            return True
        if pending[0] == "mem" and ev.is_memory:
            _tag, alloc, offset, width, iswrite = pending
            if ev.alloc == alloc and (iswrite or ev.is_write) \
                    and offset < ev.offset + ev.width and ev.offset < offset + width:
                return True
        elif pending[0] == "join" and ev.kind is EventKind.THREAD_END \
                and pending[1] == ev.tid:
            return True
    return False


# ---------------------------------------------------------------------------
# Dependency clocks over one run (drives DPOR race detection)
# ---------------------------------------------------------------------------


@dataclass
class _EvRec:
    event: Event
    step: int
    clock: VectorClock


class _DepTracker:
    def __init__(self) -> None:
        self.recs: list = []
        self.thread_clock: dict = {}
        self.child_start: dict = {}
        self.end_clock: dict = {}
        self.last_write: dict = {}  # byte -> rec index
        self.readers: dict = {}  # byte -> [rec indices]

    def process(self, ev: Event, step: int) -> tuple:
        """Returns (rec, base clock before conflict edges, contributor rec
        indices)."""
        tc = self.thread_clock.get(ev.tid)
        if tc is None:
            tc = self.child_start.pop(ev.tid, VectorClock())
            self.thread_clock[ev.tid] = tc
        if ev.kind is EventKind.THREAD_JOIN and ev.other_tid in self.end_clock:
            tc.join(self.end_clock[ev.other_tid])

        base = tc.copy()
        contributors: list = []
        if ev.is_memory and not ev.hidden:
            seen = set()
            for byte in ev.bytes_accessed():
                w = self.last_write.get(byte)
                if w is not None and w not in seen:
                    seen.add(w)
                    contributors.append(w)
                if ev.is_write:
                    for r in self.readers.get(byte, ()):
                        if r not in seen:
                            seen.add(r)
                            contributors.append(r)
        for idx in contributors:
            tc.join(self.recs[idx].clock)
        tc.set(ev.tid, ev.seq + 1)
        rec = _EvRec(event=ev, step=step, clock=tc.copy())
        rec_idx = len(self.recs)
        self.recs.append(rec)

        if ev.is_memory and not ev.hidden:
            for byte in ev.bytes_accessed():
                if ev.is_write:
                    self.last_write[byte] = rec_idx
                    self.readers[byte] = []
                else:
                    self.readers.setdefault(byte, []).append(rec_idx)
        if ev.kind is EventKind.THREAD_CREATE:
            self.child_start[ev.other_tid] = rec.clock.copy()
        if ev.kind is EventKind.THREAD_END:
            self.end_clock[ev.tid] = rec.clock.copy()
        return rec, base, contributors


# ---------------------------------------------------------------------------
# Source-DPOR with sleep sets
# ---------------------------------------------------------------------------


@dataclass
class _Node:
    chosen: int
    backtrack: set
    sleep: set
    analyzed: bool = False


class _Explorer:
    def __init__(self, program: Program, config: ExploreConfig):
        self.program = program
        self.config = config
        self.stats = Stats()
        self.forms: Optional[set] = set() if config.collect_forms else None
        self.errors: dict = {}  # dedupe key -> ErrorSite
        self.first_error: Optional[Verdict] = None
        self.nodes: list = []

    # -- race analysis -----------------------------------------------------

    def _analyze_races(self, run: _Run, tracker: _DepTracker,
                       base: VectorClock, contributors: list) -> None:
        """Source-DPOR backtrack insertion for the newest event."""
        recs = tracker.recs
        new = recs[-1]
        ev = new.event
        if not (ev.is_memory and not ev.hidden) or not contributors:
            return
        newest_per_thread: dict = {}
        for idx in contributors:
            other = recs[idx].event
            if other.tid == ev.tid:
                continue
            prev = newest_per_thread.get(other.tid)
            if prev is None or recs[idx].event.seq > recs[prev].event.seq:
                newest_per_thread[other.tid] = idx
        for utid in sorted(newest_per_thread):
            uidx = newest_per_thread[utid]
            urec = recs[uidx]
            # reversible race iff u's event is not ordered before ev by any
            # path avoiding the direct conflict edge
            minus = base.copy()
            for idx in contributors:
                if recs[idx].event.tid != utid:
                    minus.join(recs[idx].clock)
            if minus.covers(utid, urec.event.seq):
                continue
            self._insert_backtrack(run, tracker, uidx, len(recs) - 1)

    def _insert_backtrack(self, run: _Run, tracker: _DepTracker,
                          race_idx: int, new_idx: int) -> None:
        recs = tracker.recs
        e = recs[race_idx]
        node = self.nodes[e.step]
        # v = steps after e not happening after it, then the new step
        v_steps: list = []
        cur_step = recs[new_idx].step
        first_rec_of_step: dict = {}
        for idx in range(race_idx + 1, len(recs)):
            first_rec_of_step.setdefault(recs[idx].step, idx)
        for step in range(e.step + 1, cur_step):
            first = first_rec_of_step.get(step)
            if first is None:
                continue
            if recs[first].clock.covers(e.event.tid, e.event.seq):
                continue  # happens after e: not in v
            v_steps.append((run.steps[step][0].tid, run.steps[step]))
        v_steps.append((recs[new_idx].event.tid, run.steps[cur_step]))

        firsts: dict = {}
        for i, (tid, _events) in enumerate(v_steps):
            firsts.setdefault(tid, i)
        initials = set()
        for tid, fi in firsts.items():
            ok = True
            for j in range(fi):
                if any(_dependent(a, b) for a in v_steps[j][1] for b in v_steps[fi][1]):
                    ok = False
                    break
            if ok:
                initials.add(tid)
        if initials and not (initials & node.backtrack):
            node.backtrack.add(min(initials))

    # -- verdict plumbing ----------------------------------------------------

    def _record_execution(self, run: _Run) -> Optional[Verdict]:
        trace = run.interp.trace()
        self.stats.executions_explored += 1
        self.stats.events_max = max(self.stats.events_max, len(trace.events))
        if trace.outcome is Outcome.BOUND_EXCEEDED:
            self.stats.bound_exceeded = True
        if self.forms is not None:
            self.forms.add(canonical_form(trace))
        kind, race, fault = analyze_trace(trace)
        if kind is VerdictKind.OK:
            return None
        if race is not None:
            site = ErrorSite(kind, str(race[0].loc), str(race[1].loc))
        else:
            site = ErrorSite(kind, str(fault.loc))
        if site not in self.errors:
            self.errors[site] = site
        if self.first_error is None:
            self.first_error = Verdict(kind=kind, race=race, fault=fault,
                                       witness=trace, stats=self.stats)
        if self.config.stop_mode == "first_error":
            return self.first_error
        return None

    def _finish(self, verdict: Optional[Verdict]) -> Verdict:
        if verdict is None:
            verdict = self.first_error or Verdict(kind=VerdictKind.OK, stats=self.stats)
        verdict.stats = self.stats
        verdict.errors = sorted(
            self.errors, key=lambda s: (s.kind.value, s.loc_a, s.loc_b or ""))
        verdict.explored_forms = self.forms
        return verdict

    # -- main loop -----------------------------------------------------------

    def run(self) -> Verdict:
        iconfig = self.config.interp_config()
        while True:
            run = _Run(self.program, iconfig)
            tracker = _DepTracker()
            for ev in run.pre_events:
                tracker.process(ev, -1)

            depth = 0
            sleep: set = set()
            blocked = False
            while not run.over:
                enabled = run.enabled()
                if not enabled:
                    break
                if depth < len(self.nodes):
                    node = self.nodes[depth]
                else:
                    avail = sorted(set(enabled) - sleep)
                    if not avail:
                        blocked = True
                        break
                    node = _Node(chosen=avail[0], backtrack={avail[0]}, sleep=set(sleep))
                    self.nodes.append(node)
                pendings = {q: run.pending(q) for q in node.sleep}
                events = run.sched_step(node.chosen)
                analyze = not node.analyzed
                for ev in events:
                    _rec, base, contributors = tracker.process(ev, depth)
                    if analyze:
                        self._analyze_races(run, tracker, base, contributors)
                node.analyzed = True
                sleep = {
                    q for q in node.sleep
                    if not _pending_conflicts(pendings[q], events)
                }
                depth += 1

            if blocked:
                self.stats.blocked_explorations += 1
            else:
                verdict = self._record_execution(run)
                if verdict is not None:
                    return self._finish(verdict)
                if self.stats.executions_explored >= self.config.max_executions:
                    if self.config.stop_mode == "keep_going" and self.errors:
                        return self._finish(None)
                    raise ExplorationBudgetExceeded(
                        f"exploration budget of {self.config.max_executions} "
                        f"executions exhausted")

            if not self._backtrack():
                return self._finish(None)

    def _backtrack(self) -> bool:
        while self.nodes:
            node = self.nodes[-1]
            node.sleep.add(node.chosen)
            candidates = sorted(node.backtrack - node.sleep)
            if candidates:
                node.chosen = candidates[0]
                node.analyzed = False
                return True
            self.nodes.pop()
        return False


def explore(program: Program, config: Optional[ExploreConfig] = None) -> Verdict:
    """Explore all executions up to trace equivalence; returns the verdict
    with witness and exploration statistics. The program must be fully
    transformed: unlowered intrinsics or unresolved externs yield an
    UNSUPPORTED verdict without exploring."""
    config = config or ExploreConfig()
    started = time.perf_counter()
    diagnostic = scan_unsupported(program)
    if diagnostic is not None:
        verdict = Verdict(kind=VerdictKind.UNSUPPORTED, diagnostic=diagnostic)
    else:
        verdict = _Explorer(program, config).run()
    verdict.stats.wall_time = time.perf_counter() - started
    return verdict


# ---------------------------------------------------------------------------
# Naive enumeration oracle
# ---------------------------------------------------------------------------


@dataclass
class NaiveResult:
    verdict: Verdict
    class_count: int
    forms: set


def explore_naive(program: Program, config: Optional[ExploreConfig] = None) -> NaiveResult:
    """Enumerate every interleaving exhaustively, canonicalize each trace,
    and count distinct equivalence classes. Oracle counterpart of
    explore(); refuses programs whose traces exceed the event cap."""
    config = config or ExploreConfig(algorithm="naive")
    started = time.perf_counter()
    diagnostic = scan_unsupported(program)
    if diagnostic is not None:
        verdict = Verdict(kind=VerdictKind.UNSUPPORTED, diagnostic=diagnostic)
        verdict.stats.wall_time = time.perf_counter() - started
        return NaiveResult(verdict=verdict, class_count=0, forms=set())

    iconfig = config.interp_config()
    stats = Stats()
    forms: set = set()
    errors: dict = {}
    first_error: Optional[Verdict] = None

    chosen: list = []
    alternatives: list = []  # remaining choices per depth

    while True:
        run = _Run(program, iconfig)
        for tid in chosen:
            if run.over or tid not in run.enabled():
                raise AssertionError("nondeterministic replay in naive enumeration")
            run.sched_step(tid)
        while not run.over:
            enabled = run.enabled()
            if not enabled:
                break
            chosen.append(enabled[0])
            alternatives.append(enabled[1:])
            run.sched_step(enabled[0])

        trace = run.interp.trace()
        visible = sum(1 for e in trace.events if not e.hidden)
        if visible > config.naive_cap:
            raise NaiveCapExceeded(
                f"trace has {visible} events, above the naive cap of {config.naive_cap}")
        stats.executions_explored += 1
        stats.events_max = max(stats.events_max, len(trace.events))
        if trace.outcome is Outcome.BOUND_EXCEEDED:
            stats.bound_exceeded = True
        forms.add(canonical_form(trace))
        kind, race, fault = analyze_trace(trace)
        if kind is not VerdictKind.OK:
            if race is not None:
                site = ErrorSite(kind, str(race[0].loc), str(race[1].loc))
            else:
                site = ErrorSite(kind, str(fault.loc))
            errors.setdefault(site, site)
            if first_error is None:
                first_error = Verdict(kind=kind, race=race, fault=fault, witness=trace)
            if config.stop_mode == "first_error":
                break
        if stats.executions_explored > config.max_executions:
            raise ExplorationBudgetExceeded(
                f"naive enumeration exceeded {config.max_executions} interleavings")

        while alternatives and not alternatives[-1]:
            alternatives.pop()
            chosen.pop()
        if not alternatives:
            break
        chosen[-1] = alternatives[-1][0]
        alternatives[-1] = alternatives[-1][1:]

    verdict = first_error or Verdict(kind=VerdictKind.OK)
    verdict.stats = stats
    verdict.stats.wall_time = time.perf_counter() - started
    verdict.errors = sorted(errors, key=lambda s: (s.kind.value, s.loc_a, s.loc_b or ""))
    verdict.explored_forms = forms
    return NaiveResult(verdict=verdict, class_count=len(forms), forms=forms)
