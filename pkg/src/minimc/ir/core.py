"""Core MCIR data model: types, values, instructions, modules, programs.

MCIR is a small line-oriented textual IR for concurrent programs. The
design constraints that shape this module:

* Allocations are untyped byte arrays; all typing lives on loads/stores,
  so the same bytes may legally be accessed at different widths.
* Pointers are symbolic pairs (allocation id, byte offset), never raw
  integers, which makes out-of-bounds detection exact and keeps replayed
  executions address-deterministic.
* Instructions are immutable; transformation passes rebuild instruction
  lists rather than mutating in place.

Structural equality deliberately ignores source locations (and, on
``Program``, the link map), so parse/print round-trips and pass
idempotence can be checked with plain ``==``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Iterator, Optional, Union


class SemType(Enum):
    """Access types for loads/stores. Allocations themselves are untyped."""

    I8 = "i8"
    I16 = "i16"
    I32 = "i32"
    I64 = "i64"
    PTR = "ptr"

    @property
    def width(self) -> int:
        """Byte width of the access; total and positive for every member."""
        return _WIDTHS[self]

    def __str__(self) -> str:
        return self.value


_WIDTHS = {
    SemType.I8: 1,
    SemType.I16: 2,
    SemType.I32: 4,
    SemType.I64: 8,
    SemType.PTR: 8,
}

INT_TYPES = (SemType.I8, SemType.I16, SemType.I32, SemType.I64)


class Ordering(Enum):
    RELAXED = "relaxed"
    ACQUIRE = "acquire"
    RELEASE = "release"
    ACQ_REL = "acq_rel"
    SEQ_CST = "seq_cst"

    def __str__(self) -> str:
        return self.value


#: Orderings legal on atomic loads (no release-class) and stores (no
#: acquire-class); RMW may use any ordering.
LOAD_ORDERINGS = frozenset({Ordering.RELAXED, Ordering.ACQUIRE, Ordering.SEQ_CST})
STORE_ORDERINGS = frozenset({Ordering.RELAXED, Ordering.RELEASE, Ordering.SEQ_CST})


@dataclass(frozen=True)
class SrcLoc:
    """Source position (file:line) attached to instructions and events."""

    file: str = "<unknown>"
    line: int = 0

    def __str__(self) -> str:
        return f"{self.file}:{self.line}"


UNKNOWN_LOC = SrcLoc()


# ---------------------------------------------------------------------------
# Operands (syntactic) and values (runtime)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reg:
    """Register reference, written ``%name``."""

    name: str

    def __str__(self) -> str:
        return f"%{self.name}"


@dataclass(frozen=True)
class Const:
    """Integer literal operand; typed by the consuming instruction."""

    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Sym:
    """Symbol operand, written ``@name``: a global's address, or a
    function name in spawn/extern-call position."""

    name: str

    def __str__(self) -> str:
        return f"@{self.name}"


@dataclass(frozen=True)
class Undef:
    """The indeterminate value; storable only (a store of undef writes
    zeroes and marks the bytes initialized)."""

    def __str__(self) -> str:
        return "undef"


Operand = Union[Reg, Const, Sym, Undef]


@dataclass(frozen=True)
class AllocId:
    """Identity of one allocation.

    Stack ids are keyed by the allocating thread's spawn lineage plus a
    per-thread counter, so they are stable across schedules. ``label`` is
    display-only and excluded from equality.
    """

    kind: str  # "global" | "stack"
    symbol: str = ""
    lineage: tuple = ()
    index: int = 0
    label: str = field(default="", compare=False)

    def __str__(self) -> str:
        if self.kind == "global":
            return f"@{self.symbol}"
        return self.label or f"a{self.index}"


def global_alloc(symbol: str) -> AllocId:
    return AllocId(kind="global", symbol=symbol)


def stack_alloc(lineage: tuple, index: int, tid: int) -> AllocId:
    return AllocId(kind="stack", lineage=lineage, index=index, label=f"t{tid}.a{index}")


@dataclass(frozen=True)
class IntValue:
    """Two's-complement integer of a fixed byte width."""

    width: int
    value: int  # signed, always in range for the width

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class PtrValue:
    alloc: AllocId
    offset: int

    def __str__(self) -> str:
        return f"{self.alloc}+{self.offset}"


@dataclass(frozen=True)
class UndefValue:
    def __str__(self) -> str:
        return "undef"


@dataclass(frozen=True)
class ThreadHandle:
    tid: int

    def __str__(self) -> str:
        return f"thread({self.tid})"


Value = Union[IntValue, PtrValue, UndefValue, ThreadHandle]


def wrap_int(width: int, raw: int) -> IntValue:
    """Truncate ``raw`` to ``width`` bytes, two's complement."""
    bits = width * 8
    raw &= (1 << bits) - 1
    if raw >= 1 << (bits - 1):
        raw -= 1 << bits
    return IntValue(width, raw)


# ---------------------------------------------------------------------------
# Instructions
# ---------------------------------------------------------------------------
#
# All instruction dataclasses are frozen and keyword-only. ``loc`` never
# participates in equality. ``result`` is the destination register name
# (without the leading %) where the instruction produces a value.


@dataclass(frozen=True, kw_only=True)
class Instr:
    loc: SrcLoc = field(default=UNKNOWN_LOC, compare=False)


@dataclass(frozen=True, kw_only=True)
class Alloca(Instr):
    result: str
    size: int


@dataclass(frozen=True, kw_only=True)
class Load(Instr):
    result: str
    type: SemType
    addr: Operand
    atomic: bool = False
    ordering: Optional[Ordering] = None
    synthetic: bool = False  # pass-generated bookkeeping access


@dataclass(frozen=True, kw_only=True)
class Store(Instr):
    type: SemType
    value: Operand
    addr: Operand
    atomic: bool = False
    ordering: Optional[Ordering] = None
    init: bool = False  # undef-initialization store (pass-inserted)
    synthetic: bool = False


RMW_OPS = ("add", "sub", "xchg")


@dataclass(frozen=True, kw_only=True)
class Rmw(Instr):
    result: str
    op: str
    type: SemType
    addr: Operand
    operand: Operand
    ordering: Ordering = Ordering.SEQ_CST


@dataclass(frozen=True, kw_only=True)
class Memcpy(Instr):
    dst: Operand
    src: Operand
    length: Operand


@dataclass(frozen=True, kw_only=True)
class Memmove(Instr):
    dst: Operand
    src: Operand
    length: Operand


@dataclass(frozen=True, kw_only=True)
class Memset(Instr):
    dst: Operand
    byte: Operand
    length: Operand


@dataclass(frozen=True, kw_only=True)
class Spawn(Instr):
    fn: str
    arg: Operand
    result: Optional[str] = None  # thread handle; may be discarded


@dataclass(frozen=True, kw_only=True)
class Join(Instr):
    result: Optional[str]
    handle: Operand


@dataclass(frozen=True, kw_only=True)
class Call(Instr):
    result: Optional[str]
    fn: str
    args: tuple = ()


@dataclass(frozen=True, kw_only=True)
class ExternCall(Instr):
    """Call to a declared-but-undefined symbol. Linking resolves these to
    ``Call`` when a definition exists; threading symbols survive until the
    interception pass rewrites them."""

    result: Optional[str]
    fn: str
    args: tuple = ()


BIN_OPS = ("add", "sub", "mul", "and", "or", "xor")


@dataclass(frozen=True, kw_only=True)
class BinOp(Instr):
    result: str
    op: str
    type: SemType
    lhs: Operand
    rhs: Operand


ICMP_PREDS = ("eq", "ne", "slt", "sle", "sgt", "sge", "ult", "ule", "ugt", "uge")


@dataclass(frozen=True, kw_only=True)
class Icmp(Instr):
    result: str
    pred: str
    lhs: Operand
    rhs: Operand


@dataclass(frozen=True, kw_only=True)
class Gep(Instr):
    result: str
    base: Operand
    offset: Operand


@dataclass(frozen=True, kw_only=True)
class Br(Instr):
    cond: Optional[Operand]  # None = unconditional
    targets: tuple  # (label,) or (if_true, if_false)


@dataclass(frozen=True, kw_only=True)
class Assert(Instr):
    cond: Operand


@dataclass(frozen=True, kw_only=True)
class Panic(Instr):
    message: str


@dataclass(frozen=True, kw_only=True)
class Ret(Instr):
    value: Optional[Operand] = None


@dataclass(frozen=True, kw_only=True)
class GlobalRef(Instr):
    result: str
    symbol: str


@dataclass(frozen=True, kw_only=True)
class BoundExceeded(Instr):
    """Terminator inserted by the loop-bounding pass; reaching it ends the
    execution with a loop-bound note, not a bug report."""


TERMINATORS = (Br, Ret, Panic, BoundExceeded)
INTRINSICS = (Memcpy, Memmove, Memset)

Instruction = Instr


def is_terminator(instr: Instr) -> bool:
    return isinstance(instr, TERMINATORS)


def result_of(instr: Instr) -> Optional[str]:
    return getattr(instr, "result", None)


def operands_of(instr: Instr) -> list:
    """All operand-typed fields of an instruction, in declaration order."""
    ops = []
    for f in fields(instr):
        v = getattr(instr, f.name)
        if isinstance(v, (Reg, Const, Sym, Undef)):
            ops.append(v)
        elif f.name == "args":
            ops.extend(v)
    return ops


# ---------------------------------------------------------------------------
# Functions, modules, programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, kw_only=True)
class GlobalDef:
    name: str
    type: SemType
    init: int
    loc: SrcLoc = field(default=UNKNOWN_LOC, compare=False)


@dataclass(frozen=True, kw_only=True)
class ExternDecl:
    name: str
    arity: int
    loc: SrcLoc = field(default=UNKNOWN_LOC, compare=False)


@dataclass(kw_only=True)
class Function:
    name: str
    params: tuple = ()  # ((reg_name, SemType), ...)
    blocks: dict = field(default_factory=dict)  # label -> [Instr]; entry first
    loc: SrcLoc = field(default=UNKNOWN_LOC, compare=False)

    @property
    def entry(self) -> str:
        return next(iter(self.blocks))

    def instructions(self) -> Iterator[tuple]:
        """Yield (label, index, instr) over all blocks in order."""
        for label, instrs in self.blocks.items():
            for i, instr in enumerate(instrs):
                yield label, i, instr


@dataclass(kw_only=True)
class Module:
    name: str = "<module>"
    globals: dict = field(default_factory=dict)  # name -> GlobalDef
    functions: dict = field(default_factory=dict)  # name -> Function
    externs: dict = field(default_factory=dict)  # name -> ExternDecl

    def symbols(self) -> set:
        return set(self.globals) | set(self.functions) | set(self.externs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Module):
            return NotImplemented
        return (
            self.globals == other.globals
            and self.functions == other.functions
            and self.externs == other.externs
        )


@dataclass(kw_only=True)
class Program:
    """Linked whole-program form: merged symbols plus provenance."""

    globals: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)
    externs: dict = field(default_factory=dict)  # unresolved (threading) decls
    entry: str = "main"
    link_map: dict = field(default_factory=dict, compare=False)  # symbol -> module name

    def instructions(self) -> Iterator[tuple]:
        """Yield (function, label, index, instr) over the whole program."""
        for fn in self.functions.values():
            for label, i, instr in fn.instructions():
                yield fn, label, i, instr

    def __eq__(self, other) -> bool:
        if not isinstance(other, Program):
            return NotImplemented
        return (
            self.globals == other.globals
            and self.functions == other.functions
            and self.externs == other.externs
            and self.entry == other.entry
        )


def copy_function(fn: Function) -> Function:
    return Function(
        name=fn.name,
        params=fn.params,
        blocks={label: list(instrs) for label, instrs in fn.blocks.items()},
        loc=fn.loc,
    )


def copy_program(program: Program) -> Program:
    return Program(
        globals=dict(program.globals),
        functions={name: copy_function(fn) for name, fn in program.functions.items()},
        externs=dict(program.externs),
        entry=program.entry,
        link_map=dict(program.link_map),
    )


# ---------------------------------------------------------------------------
# Errors and diagnostics
# ---------------------------------------------------------------------------


class McirError(Exception):
    """Base for all MCIR front-end errors."""


class ParseError(McirError):
    def __init__(self, message: str, file: str, line: int, col: int, expected=()):
        self.message = message
        self.file = file
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        suffix = f" (expected one of: {', '.join(sorted(self.expected))})" if expected else ""
        super().__init__(f"{file}:{line}:{col}: {message}{suffix}")


class LinkError(McirError):
    pass


class UnresolvedSymbol(LinkError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unresolved symbol: @{name}")


class DuplicateDefinition(LinkError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate definition: @{name}")


class NoMain(LinkError):
    def __init__(self):
        super().__init__("no @main function after linking")


class InterceptError(McirError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    loc: SrcLoc
    message: str

    def __str__(self) -> str:
        return f"{self.loc}: {self.message}"
