"""Deterministic per-thread interpreter for linked MCIR programs.

The interpreter is a pure function of (program, schedule): stepping the
same thread ids in the same order always yields the identical event
stream, memory state, and outcome. It is the replay substrate both for
single-schedule tracing and for systematic exploration.

Semantics highlights:

* Sequential consistency. Atomic orderings are recorded on events but do
  not alter replay behaviour.
* Byte-granular memory. Every dereference checks liveness, bounds, and
  per-byte initialization; a read of any uncovered byte faults instead of
  producing a value.
* Storing undef writes zeroes and marks the bytes initialized.
* Arithmetic wraps at the declared width (two's complement).
* Thread ids are dense ints in spawn order (main is 0); each thread also
  carries a spawn lineage (path of per-parent spawn indices), which gives
  schedule-independent identity to threads and stack allocations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .ir import (
    AllocId,
    Alloca,
    Assert,
    BinOp,
    BoundExceeded,
    Br,
    Call,
    Const,
    ExternCall,
    Gep,
    GlobalRef,
    Icmp,
    Instr,
    IntValue,
    Join,
    Load,
    Memcpy,
    Memmove,
    Memset,
    Ordering,
    Panic,
    Program,
    PtrValue,
    Reg,
    Ret,
    Rmw,
    SemType,
    Spawn,
    SrcLoc,
    Store,
    Sym,
    ThreadHandle,
    Undef,
    UndefValue,
    UNKNOWN_LOC,
    Value,
    global_alloc,
    stack_alloc,
    wrap_int,
)


class MalformedIR(Exception):
    """Internal fault: the interpreter met IR the validator should have
    rejected. Never raised on programs that validate cleanly."""


# ---------------------------------------------------------------------------
# Faults, events, traces
# ---------------------------------------------------------------------------


class FaultKind(Enum):
    OUT_OF_BOUNDS = "out-of-bounds"
    UNINITIALIZED_READ = "uninitialized-read"
    ASSERT_VIOLATION = "assert-violation"
    PANIC = "panic"
    CALL_DEPTH_EXCEEDED = "call-depth-exceeded"


@dataclass(frozen=True)
class Fault:
    kind: FaultKind
    message: str
    tid: int
    loc: SrcLoc

    def __str__(self) -> str:
        return f"{self.kind.value} in t{self.tid} at {self.loc}: {self.message}"


class EventKind(Enum):
    READ = "read"
    WRITE = "write"
    RMW = "rmw"
    THREAD_CREATE = "spawn"
    THREAD_JOIN = "join"
    ASSERT_FAIL = "assert-fail"
    PANIC = "panic"
    ALLOC = "alloc"
    THREAD_START = "start"
    THREAD_END = "end"


MEMORY_EVENTS = (EventKind.READ, EventKind.WRITE, EventKind.RMW)


@dataclass(frozen=True)
class Event:
    """One action of one thread; (tid, seq) is unique within a trace."""

    tid: int
    seq: int
    kind: EventKind
    alloc: Optional[AllocId] = None
    offset: int = 0
    width: int = 0
    read_value: Optional[Value] = None
    written_value: Optional[Value] = None
    atomic: bool = False
    ordering: Optional[Ordering] = None
    is_init_store: bool = False
    synthetic: bool = False
    other_tid: Optional[int] = None  # created/joined thread
    loc: SrcLoc = UNKNOWN_LOC

    @property
    def hidden(self) -> bool:
        """Bookkeeping accesses excluded from races, equivalence classes,
        and default witness rendering."""
        return self.is_init_store or self.synthetic

    @property
    def is_memory(self) -> bool:
        return self.kind in MEMORY_EVENTS

    @property
    def is_write(self) -> bool:
        return self.kind in (EventKind.WRITE, EventKind.RMW)

    def bytes_accessed(self) -> tuple:
        return tuple((self.alloc, self.offset + i) for i in range(self.width))

    def value_str(self) -> str:
        if self.kind is EventKind.RMW:
            return f"{self.read_value}->{self.written_value}"
        if self.kind is EventKind.READ:
            return str(self.read_value)
        if self.kind is EventKind.WRITE:
            return str(self.written_value)
        return ""


class Outcome(Enum):
    COMPLETED = "completed"
    FAULTED = "faulted"
    BOUND_EXCEEDED = "bound-exceeded"


@dataclass
class Trace:
    events: list
    outcome: Outcome
    fault: Optional[Fault]
    memory: "Memory"
    notes: list
    tid_lineage: dict  # tid -> spawn lineage tuple
    schedule: list  # tids actually stepped, in order

    def thread_events(self, tid: int) -> list:
        return [e for e in self.events if e.tid == tid]


# ---------------------------------------------------------------------------
# Memory
# ---------------------------------------------------------------------------


class _FaultSignal(Exception):
    def __init__(self, fault: Fault, event: Optional[Event] = None):
        self.fault = fault
        self.event = event


class _BoundSignal(Exception):
    pass


class Allocation:
    __slots__ = ("id", "data", "init", "live", "ptr_slots")

    def __init__(self, alloc_id: AllocId, size: int):
        self.id = alloc_id
        self.data = bytearray(size)
        self.init = bytearray(size)  # 1 per initialized byte
        self.live = True
        # Pointers are symbolic, not byte-encodable: stored pointers live in
        # shadow slots keyed by offset and die when raw bytes overwrite them.
        self.ptr_slots: dict = {}

    @property
    def size(self) -> int:
        return len(self.data)


class Memory:
    """Allocations plus the global symbol region."""

    def __init__(self) -> None:
        self.allocs: dict = {}  # AllocId -> Allocation
        self.globals: dict = {}  # symbol -> AllocId

    def add(self, alloc_id: AllocId, size: int) -> Allocation:
        alloc = Allocation(alloc_id, size)
        self.allocs[alloc_id] = alloc
        return alloc

    def _check_range(self, alloc_id: AllocId, offset: int, width: int,
                     tid: int, loc: SrcLoc) -> Allocation:
        alloc = self.allocs.get(alloc_id)
        if alloc is None:
            raise MalformedIR(f"dereference of unknown allocation {alloc_id}")
        if not alloc.live:
            raise _FaultSignal(Fault(
                FaultKind.OUT_OF_BOUNDS,
                f"access to dead allocation {alloc_id}", tid, loc))
        if offset < 0 or offset + width > alloc.size:
            raise _FaultSignal(Fault(
                FaultKind.OUT_OF_BOUNDS,
                f"access of {width} bytes at offset {offset} exceeds "
                f"allocation {alloc_id} of {alloc.size} bytes", tid, loc))
        return alloc

    def read(self, alloc_id: AllocId, offset: int, ty: SemType,
             tid: int, loc: SrcLoc) -> Value:
        width = ty.width
        alloc = self._check_range(alloc_id, offset, width, tid, loc)
        if not all(alloc.init[offset:offset + width]):
            raise _FaultSignal(Fault(
                FaultKind.UNINITIALIZED_READ,
                f"read of uninitialized byte in {alloc_id}+{offset}..{offset + width}",
                tid, loc))
        if ty is SemType.PTR:
            slot = alloc.ptr_slots.get(offset)
            if slot is None:
                raise _FaultSignal(Fault(
                    FaultKind.PANIC,
                    f"load of non-pointer bytes as ptr from {alloc_id}+{offset}",
                    tid, loc))
            return slot
        raw = int.from_bytes(alloc.data[offset:offset + width], "little", signed=True)
        return IntValue(width, raw)

    def write(self, alloc_id: AllocId, offset: int, ty: SemType, value: Value,
              tid: int, loc: SrcLoc) -> Value:
        """Store value; returns the value as written (undef becomes 0)."""
        width = ty.width
        alloc = self._check_range(alloc_id, offset, width, tid, loc)
        self._kill_ptr_slots(alloc, offset, width)
        if isinstance(value, UndefValue):
            value = IntValue(width, 0)
        if isinstance(value, PtrValue):
            if ty is not SemType.PTR:
                raise MalformedIR(f"storing pointer with type {ty}")
            alloc.ptr_slots[offset] = value
            alloc.data[offset:offset + width] = bytes(width)
        elif isinstance(value, IntValue):
            raw = wrap_int(width, value.value).value
            alloc.data[offset:offset + width] = raw.to_bytes(width, "little", signed=True)
            value = IntValue(width, raw)
        else:
            raise MalformedIR(f"cannot store {value!r}")
        alloc.init[offset:offset + width] = b"\x01" * width
        return value

    def read_bytes(self, alloc_id: AllocId, offset: int, length: int,
                   tid: int, loc: SrcLoc) -> bytes:
        alloc = self._check_range(alloc_id, offset, length, tid, loc)
        if not all(alloc.init[offset:offset + length]):
            raise _FaultSignal(Fault(
                FaultKind.UNINITIALIZED_READ,
                f"bulk read of uninitialized byte in {alloc_id}+{offset}..{offset + length}",
                tid, loc))
        return bytes(alloc.data[offset:offset + length])

    def write_bytes(self, alloc_id: AllocId, offset: int, payload: bytes,
                    tid: int, loc: SrcLoc) -> None:
        alloc = self._check_range(alloc_id, offset, len(payload), tid, loc)
        self._kill_ptr_slots(alloc, offset, len(payload))
        alloc.data[offset:offset + len(payload)] = payload
        alloc.init[offset:offset + len(payload)] = b"\x01" * len(payload)

    @staticmethod
    def _kill_ptr_slots(alloc: Allocation, offset: int, width: int) -> None:
        dead = [o for o in alloc.ptr_slots if o < offset + width and o + 8 > offset]
        for o in dead:
            del alloc.ptr_slots[o]

    def snapshot_bytes(self) -> dict:
        """AllocId -> (bytes, init-bytes); for final-memory comparisons."""
        return {
            aid: (bytes(a.data), bytes(a.init)) for aid, a in self.allocs.items()
        }


# ---------------------------------------------------------------------------
# Threads and frames
# ---------------------------------------------------------------------------


class _Status(Enum):
    RUNNABLE = "runnable"
    FINISHED = "finished"
    BOUND = "bound-cut"  # stopped by the loop bound; never finishes


@dataclass
class Frame:
    fn: object  # Function
    label: str
    idx: int
    regs: dict
    allocas: list = field(default_factory=list)
    result_target: Optional[str] = None  # caller register for our return value
    loop_counters: dict = field(default_factory=dict)


@dataclass
class ThreadState:
    tid: int
    lineage: tuple
    frames: list
    status: _Status = _Status.RUNNABLE
    started: bool = False
    return_value: Optional[Value] = None
    seq: int = 0  # events emitted so far
    alloc_count: int = 0
    spawn_count: int = 0

    @property
    def finished(self) -> bool:
        return self.status is _Status.FINISHED

    @property
    def active(self) -> bool:
        return self.status is _Status.RUNNABLE

    def frame(self) -> Frame:
        return self.frames[-1]

    def next_instr(self) -> Instr:
        fr = self.frame()
        return fr.fn.blocks[fr.label][fr.idx]


@dataclass(frozen=True)
class InterpConfig:
    max_threads: int = 16
    call_depth: int = 64


# ---------------------------------------------------------------------------
# The interpreter
# ---------------------------------------------------------------------------


class Interp:
    """Executes one interleaving, one instruction per step."""

    def __init__(self, program: Program, config: InterpConfig = InterpConfig()):
        self.program = program
        self.config = config
        self.memory = Memory()
        self.events: list = []
        self.notes: list = []
        self.schedule_taken: list = []
        self.fault: Optional[Fault] = None
        self.bound_hit = False

        main = program.functions.get(program.entry)
        if main is None:
            raise MalformedIR(f"program has no @{program.entry}")
        self.threads = [ThreadState(tid=0, lineage=(0,), frames=[
            Frame(fn=main, label=main.entry, idx=0, regs={})
        ])]
        self.threads[0].started = True
        self._emit(self.threads[0], EventKind.THREAD_START)
        self._init_globals()

    # -- setup --------------------------------------------------------------

    def _init_globals(self) -> None:
        t0 = self.threads[0]
        for g in self.program.globals.values():
            aid = global_alloc(g.name)
            self.memory.add(aid, g.type.width)
            self.memory.globals[g.name] = aid
            value = self.memory.write(aid, 0, g.type, wrap_int(g.type.width, g.init), 0, g.loc)
            self._emit(t0, EventKind.WRITE, alloc=aid, offset=0, width=g.type.width,
                       written_value=value, is_init_store=True, loc=g.loc)

    # -- event plumbing -----------------------------------------------------

    def _emit(self, thread: ThreadState, kind: EventKind, **kw) -> Event:
        ev = Event(tid=thread.tid, seq=thread.seq, kind=kind, **kw)
        thread.seq += 1
        self.events.append(ev)
        return ev

    # -- scheduling surface ---------------------------------------------------

    @property
    def done(self) -> bool:
        return self.fault is not None or self.bound_hit or not self.enabled()

    def enabled(self) -> list:
        """Sorted tids whose next step can execute now."""
        if self.fault is not None or self.bound_hit:
            return []
        out = []
        for t in self.threads:
            if t.finished:
                continue
            if not t.started:
                out.append(t.tid)
                continue
            instr = t.next_instr()
            if isinstance(instr, Join):
                target = self._peek_join_target(t, instr)
                if target is not None and not self.threads[target].finished:
                    continue
            out.append(t.tid)
        return out

    def _peek_join_target(self, thread: ThreadState, instr: Join) -> Optional[int]:
        if isinstance(instr.handle, Reg):
            value = thread.frame().regs.get(instr.handle.name)
            if isinstance(value, ThreadHandle):
                return value.tid
        return None  # malformed handle: enabled, faults on execution

    def step(self, tid: int) -> Optional[Event]:
        """Execute one step of tid (its start, or one instruction)."""
        if self.fault is not None or self.bound_hit:
            raise MalformedIR("step after execution ended")
        thread = self.threads[tid]
        if thread.finished:
            raise MalformedIR(f"step of finished thread {tid}")
        self.schedule_taken.append(tid)
        if not thread.started:
            thread.started = True
            return self._emit(thread, EventKind.THREAD_START)
        before = len(self.events)
        try:
            self._execute(thread, thread.next_instr())
        except _FaultSignal as sig:
            if sig.event is not None:
                self.events.append(sig.event)
            self.fault = sig.fault
        except _BoundSignal:
            self.bound_hit = True
            self.notes.append(f"loop bound reached in t{tid}")
        return self.events[before] if len(self.events) > before else None

    def trace(self) -> Trace:
        if self.fault is not None:
            outcome = Outcome.FAULTED
        elif self.bound_hit:
            outcome = Outcome.BOUND_EXCEEDED
        else:
            outcome = Outcome.COMPLETED
        return Trace(
            events=list(self.events),
            outcome=outcome,
            fault=self.fault,
            memory=self.memory,
            notes=list(self.notes),
            tid_lineage={t.tid: t.lineage for t in self.threads},
            schedule=list(self.schedule_taken),
        )

    # -- operand evaluation ---------------------------------------------------

    def _eval(self, thread: ThreadState, op, width_hint: int = 8) -> Value:
        if isinstance(op, Reg):
            try:
                return thread.frame().regs[op.name]
            except KeyError:
                raise MalformedIR(f"read of unassigned register %{op.name}") from None
        if isinstance(op, Const):
            return wrap_int(width_hint, op.value)
        if isinstance(op, Sym):
            aid = self.memory.globals.get(op.name)
            if aid is None:
                raise MalformedIR(f"@{op.name} is not a global")
            return PtrValue(aid, 0)
        if isinstance(op, Undef):
            return UndefValue()
        raise MalformedIR(f"unknown operand {op!r}")

    def _as_ptr(self, value: Value) -> PtrValue:
        if not isinstance(value, PtrValue):
            raise MalformedIR(f"expected pointer, got {value}")
        return value

    def _as_int(self, value: Value) -> int:
        if not isinstance(value, IntValue):
            raise MalformedIR(f"expected integer, got {value}")
        return value.value

    # -- instruction dispatch -------------------------------------------------

    def _execute(self, thread: ThreadState, instr: Instr) -> None:
        fr = thread.frame()
        regs = fr.regs
        loc = instr.loc

        if isinstance(instr, Alloca):
            aid = stack_alloc(thread.lineage, thread.alloc_count, thread.tid)
            thread.alloc_count += 1
            self.memory.add(aid, instr.size)
            fr.allocas.append(aid)
            regs[instr.result] = PtrValue(aid, 0)
            fr.idx += 1
            self._emit(thread, EventKind.ALLOC, alloc=aid, offset=0,
                       width=instr.size, loc=loc)
        elif isinstance(instr, Load):
            ptr = self._as_ptr(self._eval(thread, instr.addr))
            value = self.memory.read(ptr.alloc, ptr.offset, instr.type, thread.tid, loc)
            regs[instr.result] = value
            fr.idx += 1
            self._emit(thread, EventKind.READ, alloc=ptr.alloc, offset=ptr.offset,
                       width=instr.type.width, read_value=value, atomic=instr.atomic,
                       ordering=instr.ordering, synthetic=instr.synthetic, loc=loc)
        elif isinstance(instr, Store):
            ptr = self._as_ptr(self._eval(thread, instr.addr))
            value = self._eval(thread, instr.value, width_hint=instr.type.width)
            written = self.memory.write(ptr.alloc, ptr.offset, instr.type, value,
                                        thread.tid, loc)
            fr.idx += 1
            self._emit(thread, EventKind.WRITE, alloc=ptr.alloc, offset=ptr.offset,
                       width=instr.type.width, written_value=written, atomic=instr.atomic,
                       ordering=instr.ordering, is_init_store=instr.init,
                       synthetic=instr.synthetic, loc=loc)
        elif isinstance(instr, Rmw):
            ptr = self._as_ptr(self._eval(thread, instr.addr))
            old = self.memory.read(ptr.alloc, ptr.offset, instr.type, thread.tid, loc)
            old_raw = self._as_int(old)
            arg = self._as_int(self._eval(thread, instr.operand, width_hint=instr.type.width))
            if instr.op == "add":
                new_raw = old_raw + arg
            elif instr.op == "sub":
                new_raw = old_raw - arg
            elif instr.op == "xchg":
                new_raw = arg
            else:
                raise MalformedIR(f"unknown rmw op {instr.op}")
            new = self.memory.write(ptr.alloc, ptr.offset, instr.type,
                                    wrap_int(instr.type.width, new_raw), thread.tid, loc)
            regs[instr.result] = old
            fr.idx += 1
            self._emit(thread, EventKind.RMW, alloc=ptr.alloc, offset=ptr.offset,
                       width=instr.type.width, read_value=old, written_value=new,
                       atomic=True, ordering=instr.ordering, loc=loc)
        elif isinstance(instr, (Memcpy, Memmove, Memset)):
            self._execute_intrinsic(thread, instr)
            fr.idx += 1
        elif isinstance(instr, Spawn):
            child = self._spawn(thread, instr)
            if instr.result is not None:
                regs[instr.result] = ThreadHandle(child.tid)
            fr.idx += 1
            self._emit(thread, EventKind.THREAD_CREATE, other_tid=child.tid, loc=loc)
        elif isinstance(instr, Join):
            handle = self._eval(thread, instr.handle)
            if not isinstance(handle, ThreadHandle):
                raise _FaultSignal(Fault(
                    FaultKind.PANIC, f"join of non-thread value {handle}",
                    thread.tid, loc))
            target = self.threads[handle.tid]
            if not target.finished:
                raise MalformedIR(f"join step on unfinished thread {handle.tid}")
            if instr.result is not None:
                regs[instr.result] = target.return_value or IntValue(8, 0)
            fr.idx += 1
            self._emit(thread, EventKind.THREAD_JOIN, other_tid=handle.tid, loc=loc)
        elif isinstance(instr, Call):
            self._call(thread, instr)
        elif isinstance(instr, ExternCall):
            raise _FaultSignal(Fault(
                FaultKind.PANIC,
                f"call to unintercepted extern @{instr.fn}", thread.tid, loc))
        elif isinstance(instr, BinOp):
            lhs = self._as_int(self._eval(thread, instr.lhs, instr.type.width))
            rhs = self._as_int(self._eval(thread, instr.rhs, instr.type.width))
            regs[instr.result] = wrap_int(instr.type.width, _BINOPS[instr.op](lhs, rhs))
            fr.idx += 1
        elif isinstance(instr, Icmp):
            regs[instr.result] = IntValue(1, int(self._icmp(thread, instr)))
            fr.idx += 1
        elif isinstance(instr, Gep):
            base = self._as_ptr(self._eval(thread, instr.base))
            delta = self._as_int(self._eval(thread, instr.offset))
            offset = base.offset + delta
            if offset < 0:
                raise _FaultSignal(Fault(
                    FaultKind.OUT_OF_BOUNDS,
                    f"negative pointer offset {offset} into {base.alloc}",
                    thread.tid, loc))
            regs[instr.result] = PtrValue(base.alloc, offset)
            fr.idx += 1
        elif isinstance(instr, Br):
            if instr.cond is None:
                target = instr.targets[0]
            else:
                taken = self._as_int(self._eval(thread, instr.cond)) != 0
                target = instr.targets[0] if taken else instr.targets[1]
            fr.label = target
            fr.idx = 0
        elif isinstance(instr, Assert):
            if self._as_int(self._eval(thread, instr.cond)) == 0:
                ev = Event(tid=thread.tid, seq=thread.seq, kind=EventKind.ASSERT_FAIL, loc=loc)
                thread.seq += 1
                raise _FaultSignal(Fault(
                    FaultKind.ASSERT_VIOLATION, "assertion failed", thread.tid, loc), ev)
            fr.idx += 1
        elif isinstance(instr, Panic):
            ev = Event(tid=thread.tid, seq=thread.seq, kind=EventKind.PANIC, loc=loc)
            thread.seq += 1
            raise _FaultSignal(Fault(
                FaultKind.PANIC, instr.message, thread.tid, loc), ev)
        elif isinstance(instr, Ret):
            self._ret(thread, instr)
        elif isinstance(instr, GlobalRef):
            aid = self.memory.globals.get(instr.symbol)
            if aid is None:
                raise MalformedIR(f"global_ref of unknown @{instr.symbol}")
            regs[instr.result] = PtrValue(aid, 0)
            fr.idx += 1
        elif isinstance(instr, BoundExceeded):
            raise _BoundSignal()
        else:
            raise MalformedIR(f"unexecutable instruction {instr!r}")

    def _icmp(self, thread: ThreadState, instr: Icmp) -> bool:
        lhs = self._eval(thread, instr.lhs)
        rhs = self._eval(thread, instr.rhs)
        pred = instr.pred
        if isinstance(lhs, PtrValue) or isinstance(rhs, PtrValue):
            if pred not in ("eq", "ne"):
                raise MalformedIR(f"ordered icmp {pred} on pointer")
            if not (isinstance(lhs, PtrValue) and isinstance(rhs, PtrValue)):
                raise MalformedIR("icmp of pointer against integer")
            eq = lhs == rhs
            return eq if pred == "eq" else not eq
        a, b = self._as_int(lhs), self._as_int(rhs)
        if pred in ("ult", "ule", "ugt", "uge"):
            wa = lhs.width if isinstance(lhs, IntValue) else 8
            wb = rhs.width if isinstance(rhs, IntValue) else 8
            a &= (1 << (wa * 8)) - 1
            b &= (1 << (wb * 8)) - 1
        return _CMP[pred](a, b)

    def _spawn(self, thread: ThreadState, instr: Spawn) -> ThreadState:
        if len(self.threads) >= self.config.max_threads:
            raise _FaultSignal(Fault(
                FaultKind.PANIC,
                f"thread limit ({self.config.max_threads}) exceeded",
                thread.tid, instr.loc))
        fn = self.program.functions.get(instr.fn)
        if fn is None or len(fn.params) != 1:
            raise MalformedIR(f"spawn of @{instr.fn} with bad signature")
        pname, pty = fn.params[0]
        arg = self._eval(thread, instr.arg, width_hint=pty.width)
        child = ThreadState(
            tid=len(self.threads),
            lineage=thread.lineage + (thread.spawn_count,),
            frames=[Frame(fn=fn, label=fn.entry, idx=0, regs={pname: arg})],
        )
        thread.spawn_count += 1
        self.threads.append(child)
        return child

    def _call(self, thread: ThreadState, instr: Call) -> None:
        if len(thread.frames) >= self.config.call_depth:
            raise _FaultSignal(Fault(
                FaultKind.CALL_DEPTH_EXCEEDED,
                f"call depth limit ({self.config.call_depth}) exceeded",
                thread.tid, instr.loc))
        fn = self.program.functions.get(instr.fn)
        if fn is None or len(fn.params) != len(instr.args):
            raise MalformedIR(f"call to @{instr.fn} with bad arity")
        regs = {}
        for (pname, pty), arg in zip(fn.params, instr.args):
            regs[pname] = self._eval(thread, arg, width_hint=pty.width)
        thread.frame().idx += 1  # return lands after the call
        thread.frames.append(Frame(
            fn=fn, label=fn.entry, idx=0, regs=regs, result_target=instr.result))

    def _ret(self, thread: ThreadState, instr: Ret) -> None:
        value = None if instr.value is None else self._eval(thread, instr.value)
        frame = thread.frames.pop()
        for aid in frame.allocas:
            self.memory.allocs[aid].live = False
        if not thread.frames:
            thread.status = _Status.FINISHED
            thread.return_value = value
            self._emit(thread, EventKind.THREAD_END, loc=instr.loc)
            return
        if frame.result_target is not None:
            if value is None:
                raise MalformedIR(
                    f"void return into %{frame.result_target} in @{frame.fn.name}")
            thread.frame().regs[frame.result_target] = value

    def _execute_intrinsic(self, thread: ThreadState, instr) -> None:
        """Reference byte-wise semantics for unlowered intrinsics: reads the
        whole source range, then writes. Emits no events; systematic
        exploration refuses programs that still contain these."""
        tid, loc = thread.tid, instr.loc
        length = self._as_int(self._eval(thread, instr.length))
        if length < 0:
            raise _FaultSignal(Fault(
                FaultKind.PANIC, f"negative intrinsic length {length}", tid, loc))
        dst = self._as_ptr(self._eval(thread, instr.dst))
        if isinstance(instr, Memset):
            fill = self._as_int(self._eval(thread, instr.byte)) & 0xFF
            self.memory._check_range(dst.alloc, dst.offset, length, tid, loc)
            self.memory.write_bytes(dst.alloc, dst.offset, bytes([fill]) * length, tid, loc)
            return
        src = self._as_ptr(self._eval(thread, instr.src))
        payload = self.memory.read_bytes(src.alloc, src.offset, length, tid, loc)
        self.memory.write_bytes(dst.alloc, dst.offset, payload, tid, loc)


_BINOPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "xor": lambda a, b: a ^ b,
}

_CMP = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "slt": lambda a, b: a < b,
    "sle": lambda a, b: a <= b,
    "sgt": lambda a, b: a > b,
    "sge": lambda a, b: a >= b,
    "ult": lambda a, b: a < b,
    "ule": lambda a, b: a <= b,
    "ugt": lambda a, b: a > b,
    "uge": lambda a, b: a >= b,
}


def run_schedule(program: Program, schedule: list,
                 config: InterpConfig = InterpConfig()) -> Trace:
    """Replay one explicit schedule to completion.

    Entries naming non-enabled tids are skipped with a note; once the
    schedule is exhausted, execution continues with the lowest enabled
    tid. Identical program + schedule yields an identical Trace.
    """
    interp = Interp(program, config)
    pos = 0
    while True:
        enabled = interp.enabled()
        if not enabled:
            if any(not t.finished for t in interp.threads) and interp.fault is None \
                    and not interp.bound_hit:
                interp.notes.append("deadlock: remaining threads blocked on join")
            break
        if pos < len(schedule):
            tid = schedule[pos]
            pos += 1
            if tid not in enabled:
                interp.notes.append(f"schedule entry {pos - 1} names non-enabled t{tid}; skipped")
                continue
        else:
            tid = enabled[0]
        interp.step(tid)
    return interp.trace()
