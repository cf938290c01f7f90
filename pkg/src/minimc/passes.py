"""IR-to-IR transformation pipeline.

Fixed pass order (run_pipeline):

    intercept_threads -> bound_loops -> lower_intrinsics -> init_undef
        -> eliminate_dead_allocs

Every pass is a pure Program -> Program function (inputs are never
mutated) and is idempotent: pass-generated registers and labels use a
reserved "." prefix, init stores carry an explicit flag, and loop-check
blocks are recognized and skipped on re-runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ir import (
    Alloca,
    BinOp,
    BoundExceeded,
    Br,
    Const,
    Diagnostic,
    ExternCall,
    Function,
    Gep,
    Icmp,
    Instr,
    InterceptError,
    Join,
    Load,
    Memcpy,
    Memmove,
    Memset,
    Program,
    Reg,
    SemType,
    Spawn,
    Store,
    Sym,
    THREAD_SYMBOLS,
    Undef,
    copy_program,
    operands_of,
    result_of,
)

#: Default interception table: extern symbol -> intrinsic shape.
DEFAULT_INTERCEPT_TABLE = {
    "pthread_create": "spawn",
    "pthread_join": "join",
    "thread_spawn": "spawn",
    "thread_join": "join",
}

_BYTE_REPLICATOR = 0x0101010101010101  # b * this replicates b into all 8 bytes


@dataclass
class PassConfig:
    loop_bound: int = 10
    memcpy_chunk_limit: int = 64
    intercept: bool = True
    lower_intrinsics: bool = True
    init_undef: bool = True
    bound_loops: bool = True
    dead_allocs: bool = True
    intercept_table: dict = field(default_factory=lambda: dict(DEFAULT_INTERCEPT_TABLE))

    def __post_init__(self) -> None:
        if self.loop_bound < 1:
            raise ValueError("loop_bound must be >= 1")
        if self.memcpy_chunk_limit < 8 or self.memcpy_chunk_limit % 8:
            raise ValueError("memcpy_chunk_limit must be >= 8 and a multiple of 8")


@dataclass
class PassReport:
    calls_intercepted: int = 0
    intrinsics_lowered: int = 0
    undef_stores_inserted: int = 0
    loops_bounded: int = 0
    allocas_removed: int = 0
    diagnostics: list = field(default_factory=list)

    def merge(self, other: "PassReport") -> None:
        self.calls_intercepted += other.calls_intercepted
        self.intrinsics_lowered += other.intrinsics_lowered
        self.undef_stores_inserted += other.undef_stores_inserted
        self.loops_bounded += other.loops_bounded
        self.allocas_removed += other.allocas_removed
        self.diagnostics.extend(other.diagnostics)

    def summary(self) -> str:
        return (
            f"intercepted={self.calls_intercepted} lowered={self.intrinsics_lowered} "
            f"undef_stores={self.undef_stores_inserted} loops_bounded={self.loops_bounded} "
            f"dead_allocas={self.allocas_removed}"
        )


class _Namer:
    """Fresh pass-reserved register names, collision-free per function."""

    def __init__(self, fn: Function, prefix: str):
        self.taken = {name for name, _ty in fn.params}
        for _l, _i, instr in fn.instructions():
            r = result_of(instr)
            if r is not None:
                self.taken.add(r)
        self.prefix = prefix
        self.n = 0

    def fresh(self) -> str:
        while True:
            name = f".{self.prefix}{self.n}"
            self.n += 1
            if name not in self.taken:
                self.taken.add(name)
                return name


# ---------------------------------------------------------------------------
# Thread-call interception
# ---------------------------------------------------------------------------


def intercept_threads(program: Program, table: dict = None) -> Program:
    """Rewrite extern calls to threading-library symbols into spawn/join
    intrinsics; raises InterceptError when a call does not match the
    intrinsic's shape."""
    table = DEFAULT_INTERCEPT_TABLE if table is None else table
    out = copy_program(program)
    for fn in out.functions.values():
        for label, instrs in fn.blocks.items():
            for idx, instr in enumerate(instrs):
                if not isinstance(instr, ExternCall) or instr.fn not in table:
                    continue
                shape = table[instr.fn]
                if shape == "spawn":
                    if len(instr.args) != 2:
                        raise InterceptError(
                            f"{instr.loc}: @{instr.fn} expects (function, argument), "
                            f"got {len(instr.args)} args")
                    fn_sym, arg = instr.args
                    if not isinstance(fn_sym, Sym) or fn_sym.name not in out.functions:
                        raise InterceptError(
                            f"{instr.loc}: first argument of @{instr.fn} must name a function")
                    instrs[idx] = Spawn(result=instr.result, fn=fn_sym.name,
                                        arg=arg, loc=instr.loc)
                else:
                    if len(instr.args) != 1:
                        raise InterceptError(
                            f"{instr.loc}: @{instr.fn} expects (handle), "
                            f"got {len(instr.args)} args")
                    instrs[idx] = Join(result=instr.result, handle=instr.args[0],
                                       loc=instr.loc)
    for sym in table:
        out.externs.pop(sym, None)
    return out


def count_interceptable(program: Program, table: dict = None) -> int:
    table = DEFAULT_INTERCEPT_TABLE if table is None else table
    return sum(
        1
        for _fn, _l, _i, instr in program.instructions()
        if isinstance(instr, ExternCall) and instr.fn in table
    )


# ---------------------------------------------------------------------------
# Memory-intrinsic lowering
# ---------------------------------------------------------------------------


def _chunks(length: int) -> list:
    """(offset, width) cover of a constant length: 64-bit chunks for
    multiples of 8, otherwise plain bytes."""
    if length % 8 == 0:
        return [(k * 8, 8) for k in range(length // 8)]
    return [(i, 1) for i in range(length)]


def _offset_ptr(namer: _Namer, base, off: int, loc, out: list):
    if off == 0:
        return base
    reg = namer.fresh()
    out.append(Gep(result=reg, base=base, offset=Const(off), loc=loc))
    return Reg(reg)


def lower_intrinsics(program: Program, config: PassConfig = None) -> tuple:
    """Expand memcpy/memmove/memset into typed loads and stores.

    Constant lengths up to the chunk limit lower to 64-bit access pairs
    (length a multiple of 8) or byte pairs (otherwise). Anything else is
    left in place with an "unsupported intrinsic" diagnostic; verification
    fails fast on it later.
    """
    config = config or PassConfig()
    out = copy_program(program)
    report = PassReport()
    for fn in out.functions.values():
        namer = _Namer(fn, "m")
        for label in list(fn.blocks):
            new_instrs: list = []
            for instr in fn.blocks[label]:
                if isinstance(instr, (Memcpy, Memmove, Memset)):
                    _lower_one(instr, namer, config, new_instrs, report)
                else:
                    new_instrs.append(instr)
            fn.blocks[label] = new_instrs
    return out, report


def _lower_one(instr, namer: _Namer, config: PassConfig, out: list,
               report: PassReport) -> None:
    loc = instr.loc
    if not isinstance(instr.length, Const):
        out.append(instr)
        report.diagnostics.append(Diagnostic(
            loc, "unsupported intrinsic: non-constant length"))
        return
    n = instr.length.value
    if n > config.memcpy_chunk_limit:
        out.append(instr)
        report.diagnostics.append(Diagnostic(
            loc, f"unsupported intrinsic: length {n} exceeds chunk limit "
                 f"{config.memcpy_chunk_limit}"))
        return
    report.intrinsics_lowered += 1
    if n == 0:
        return
    chunks = _chunks(n)
    ty = {8: SemType.I64, 1: SemType.I8}

    if isinstance(instr, Memcpy):
        for off, w in chunks:
            src = _offset_ptr(namer, instr.src, off, loc, out)
            val = namer.fresh()
            out.append(Load(result=val, type=ty[w], addr=src, loc=loc))
            dst = _offset_ptr(namer, instr.dst, off, loc, out)
            out.append(Store(type=ty[w], value=Reg(val), addr=dst, loc=loc))
    elif isinstance(instr, Memmove):
        # Operands may overlap: stage every chunk in registers first.
        staged = []
        for off, w in chunks:
            src = _offset_ptr(namer, instr.src, off, loc, out)
            val = namer.fresh()
            out.append(Load(result=val, type=ty[w], addr=src, loc=loc))
            staged.append((off, w, val))
        for off, w, val in staged:
            dst = _offset_ptr(namer, instr.dst, off, loc, out)
            out.append(Store(type=ty[w], value=Reg(val), addr=dst, loc=loc))
    else:  # Memset
        wide = chunks[0][1] == 8
        if isinstance(instr.byte, Const):
            b = instr.byte.value & 0xFF
            fill8 = Const(b)
            fill64 = Const(b * _BYTE_REPLICATOR)
        else:
            masked = namer.fresh()
            out.append(BinOp(result=masked, op="and", type=SemType.I64,
                             lhs=instr.byte, rhs=Const(0xFF), loc=loc))
            fill8 = Reg(masked)
            if wide:
                rep = namer.fresh()
                out.append(BinOp(result=rep, op="mul", type=SemType.I64,
                                 lhs=Reg(masked), rhs=Const(_BYTE_REPLICATOR), loc=loc))
                fill64 = Reg(rep)
        for off, w in chunks:
            dst = _offset_ptr(namer, instr.dst, off, loc, out)
            out.append(Store(type=ty[w], value=fill64 if w == 8 else fill8,
                             addr=dst, loc=loc))


# ---------------------------------------------------------------------------
# Undef initialization
# ---------------------------------------------------------------------------


def init_undef(program: Program, config: PassConfig = None) -> tuple:
    """Insert stores of undef covering every stack allocation, directly
    after the alloca: 64-bit stores for the 8-aligned prefix, byte stores
    for the remainder. The interpreter treats store-undef as store-0, so
    the inserted writes are semantically neutral; they are flagged !init
    and excluded from race candidacy and trace equivalence."""
    config = config or PassConfig()
    out = copy_program(program)
    report = PassReport()
    for fn in out.functions.values():
        namer = _Namer(fn, "u")
        for label in list(fn.blocks):
            instrs = fn.blocks[label]
            new_instrs: list = []
            i = 0
            while i < len(instrs):
                instr = instrs[i]
                new_instrs.append(instr)
                i += 1
                if not isinstance(instr, Alloca) or instr.size == 0:
                    continue
                covered, skip = _existing_init_cover(instrs, i, instr.result)
                if covered >= instr.size:
                    new_instrs.extend(instrs[i:i + skip])
                    i += skip
                    continue
                report.undef_stores_inserted += _emit_init_stores(
                    instr, namer, new_instrs)
            fn.blocks[label] = new_instrs
    return out, report


def _existing_init_cover(instrs: list, start: int, alloca_reg: str) -> tuple:
    """Bytes already covered by an init-store run right after the alloca,
    plus the run's length (for idempotence)."""
    covered = 0
    geps = set()
    j = start
    while j < len(instrs):
        instr = instrs[j]
        if isinstance(instr, Gep) and isinstance(instr.base, Reg) \
                and instr.base.name == alloca_reg and instr.result.startswith(".u"):
            geps.add(instr.result)
        elif isinstance(instr, Store) and instr.init and isinstance(instr.addr, Reg) \
                and (instr.addr.name == alloca_reg or instr.addr.name in geps):
            covered += instr.type.width
        else:
            break
        j += 1
    return covered, j - start


def _emit_init_stores(alloca: Alloca, namer: _Namer, out: list) -> int:
    base = Reg(alloca.result)
    loc = alloca.loc
    count = 0
    for off in range(0, alloca.size - alloca.size % 8, 8):
        addr = _init_addr(namer, base, off, loc, out)
        out.append(Store(type=SemType.I64, value=Undef(), addr=addr, init=True, loc=loc))
        count += 1
    for off in range(alloca.size - alloca.size % 8, alloca.size):
        addr = _init_addr(namer, base, off, loc, out)
        out.append(Store(type=SemType.I8, value=Undef(), addr=addr, init=True, loc=loc))
        count += 1
    return count


def _init_addr(namer: _Namer, base, off: int, loc, out: list):
    if off == 0:
        return base
    reg = namer.fresh()
    out.append(Gep(result=reg, base=base, offset=Const(off), loc=loc))
    return Reg(reg)


# ---------------------------------------------------------------------------
# Loop bounding
# ---------------------------------------------------------------------------

_LOOP_PREFIX = ".lb"


def bound_loops(program: Program, k: int = None, config: PassConfig = None) -> tuple:
    """Guard every back-edge with a per-loop iteration counter; after k
    traversals the edge diverts to a block whose bound_exceeded terminator
    ends the execution with a loop-bound note (not a bug)."""
    config = config or PassConfig()
    bound = config.loop_bound if k is None else k
    if bound < 1:
        raise ValueError("loop bound must be >= 1")
    out = copy_program(program)
    report = PassReport()
    for fn in out.functions.values():
        back_edges = [
            (src, slot, dst) for src, slot, dst in _find_back_edges(fn)
            if not src.startswith(_LOOP_PREFIX)
        ]
        if not back_edges:
            continue
        namer = _Namer(fn, "lbc")
        entry = fn.entry
        prelude: list = []
        for n, (src, slot, dst) in enumerate(back_edges):
            idx = _fresh_loop_index(fn)
            ctr = namer.fresh()
            check = f"{_LOOP_PREFIX}{idx}.chk"
            stop = f"{_LOOP_PREFIX}{idx}.stop"
            br = fn.blocks[src][-1]
            loc = br.loc
            prelude.append(Alloca(result=ctr, size=8, loc=loc))
            prelude.append(Store(type=SemType.I64, value=Const(0), addr=Reg(ctr),
                                 synthetic=True, loc=loc))
            targets = list(br.targets)
            targets[slot] = check
            fn.blocks[src][-1] = replace(br, targets=tuple(targets))
            cur, nxt, hit = namer.fresh(), namer.fresh(), namer.fresh()
            fn.blocks[check] = [
                Load(result=cur, type=SemType.I64, addr=Reg(ctr), synthetic=True, loc=loc),
                BinOp(result=nxt, op="add", type=SemType.I64, lhs=Reg(cur),
                      rhs=Const(1), loc=loc),
                Store(type=SemType.I64, value=Reg(nxt), addr=Reg(ctr),
                      synthetic=True, loc=loc),
                Icmp(result=hit, pred="sge", lhs=Reg(nxt), rhs=Const(bound), loc=loc),
                Br(cond=Reg(hit), targets=(stop, dst), loc=loc),
            ]
            fn.blocks[stop] = [BoundExceeded(loc=loc)]
            report.loops_bounded += 1
        fn.blocks[entry] = prelude + fn.blocks[entry]
    return out, report


def _fresh_loop_index(fn: Function) -> int:
    n = 0
    while f"{_LOOP_PREFIX}{n}.chk" in fn.blocks:
        n += 1
    return n


def _find_back_edges(fn: Function) -> list:
    """(source label, target slot, target label) for every CFG edge whose
    target is on the DFS stack (depth-first spanning tree from entry)."""
    edges = []
    state: dict = {}  # label -> "active" | "done"

    def successors(label: str) -> list:
        last = fn.blocks[label][-1] if fn.blocks[label] else None
        return list(enumerate(last.targets)) if isinstance(last, Br) else []

    def visit(label: str) -> None:
        state[label] = "active"
        for slot, succ in successors(label):
            if succ not in fn.blocks:
                continue
            if state.get(succ) == "active":
                edges.append((label, slot, succ))
            elif succ not in state:
                visit(succ)
        state[label] = "done"

    if fn.blocks:
        visit(fn.entry)
    return edges


# ---------------------------------------------------------------------------
# Dead-allocation elimination
# ---------------------------------------------------------------------------


def eliminate_dead_allocs(program: Program) -> tuple:
    """Remove allocas used only by their own undef-init stores (and the
    geps feeding those stores), together with the stores themselves."""
    out = copy_program(program)
    report = PassReport()
    for fn in out.functions.values():
        assigned: dict = {}
        for _l, _i, instr in fn.instructions():
            r = result_of(instr)
            if r is not None:
                assigned[r] = assigned.get(r, 0) + 1
        positions = [
            (label, i, instr)
            for label, instrs in fn.blocks.items()
            for i, instr in enumerate(instrs)
        ]
        doomed: set = set()
        for label, i, instr in positions:
            if isinstance(instr, Alloca) and assigned.get(instr.result) == 1:
                dead = _dead_cover(instr.result, positions, assigned)
                if dead is not None:
                    doomed |= dead
                    doomed.add((label, i))
                    report.allocas_removed += 1
        if doomed:
            for label in list(fn.blocks):
                fn.blocks[label] = [
                    instr for i, instr in enumerate(fn.blocks[label])
                    if (label, i) not in doomed
                ]
    return out, report


def _dead_cover(root: str, positions: list, assigned: dict):
    """Positions of the init stores/geps that are the only users of root,
    or None if any use escapes."""
    derived = {root}
    removable: set = set()
    changed = True
    while changed:
        changed = False
        for label, i, instr in positions:
            if (label, i) in removable:
                continue
            used = [op for op in operands_of(instr) if isinstance(op, Reg) and op.name in derived]
            if not used:
                continue
            if isinstance(instr, Gep) and isinstance(instr.base, Reg) \
                    and instr.base.name in derived and not isinstance(instr.offset, Reg):
                if assigned.get(instr.result) != 1:
                    return None
                if instr.result not in derived:
                    derived.add(instr.result)
                    changed = True
                removable.add((label, i))
            elif isinstance(instr, Store) and instr.init and isinstance(instr.addr, Reg) \
                    and instr.addr.name in derived and isinstance(instr.value, Undef):
                removable.add((label, i))
            else:
                return None  # escapes: loaded, stored by user code, passed along
    return removable


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

#: Stage names usable with --dump-ir, in execution order.
PIPELINE_STAGES = ("link", "intercept", "loops", "intrinsics", "undef", "deadalloc", "final")


def run_pipeline(program: Program, config: PassConfig = None,
                 dump=None) -> tuple:
    """Run all enabled passes in fixed order; aggregates one PassReport.

    ``dump``, when given, is called as dump(stage_name, program) after
    every stage named in PIPELINE_STAGES.
    """
    config = config or PassConfig()
    report = PassReport()
    cur = program

    def emit(stage: str) -> None:
        if dump is not None:
            dump(stage, cur)

    emit("link")
    if config.intercept:
        report.calls_intercepted = count_interceptable(cur, config.intercept_table)
        cur = intercept_threads(cur, config.intercept_table)
    emit("intercept")
    if config.bound_loops:
        cur, sub = bound_loops(cur, config.loop_bound, config)
        report.merge(sub)
    emit("loops")
    if config.lower_intrinsics:
        cur, sub = lower_intrinsics(cur, config)
        report.merge(sub)
    emit("intrinsics")
    if config.init_undef:
        cur, sub = init_undef(cur, config)
        report.merge(sub)
    emit("undef")
    if config.dead_allocs:
        cur, sub = eliminate_dead_allocs(cur)
        report.merge(sub)
    emit("deadalloc")
    emit("final")
    return cur, report
