"""MCIR front end: language data model, parser, printer, validator, linker."""

from .core import (
    AllocId,
    Alloca,
    Assert,
    BIN_OPS,
    BinOp,
    BoundExceeded,
    Br,
    Call,
    Const,
    Diagnostic,
    DuplicateDefinition,
    ExternCall,
    ExternDecl,
    Function,
    Gep,
    GlobalDef,
    GlobalRef,
    ICMP_PREDS,
    Icmp,
    Instr,
    Instruction,
    IntValue,
    InterceptError,
    Join,
    LinkError,
    Load,
    McirError,
    Memcpy,
    Memmove,
    Memset,
    Module,
    NoMain,
    Ordering,
    Panic,
    ParseError,
    Program,
    PtrValue,
    Reg,
    Ret,
    RMW_OPS,
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
    UnresolvedSymbol,
    Value,
    copy_function,
    copy_program,
    global_alloc,
    is_terminator,
    operands_of,
    result_of,
    stack_alloc,
    wrap_int,
)
from .linker import THREAD_SYMBOLS, link
from .parser import parse_module
from .printer import print_function, print_instruction, print_module, print_program
from .validator import validate

__all__ = [name for name in dir() if not name.startswith("_")]
