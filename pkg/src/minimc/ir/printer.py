"""Canonical MCIR printer. parse_module(print_module(m)) == m structurally."""

from __future__ import annotations

from .core import (
    Alloca,
    Assert,
    BinOp,
    BoundExceeded,
    Br,
    Call,
    ExternCall,
    Function,
    Gep,
    GlobalRef,
    Icmp,
    Instr,
    Join,
    Load,
    Memcpy,
    Memmove,
    Memset,
    Module,
    Panic,
    Program,
    Ret,
    Rmw,
    Spawn,
    Store,
)


def _escape(message: str) -> str:
    return message.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _store_flags(instr: Store) -> str:
    out = ""
    if instr.init:
        out += " !init"
    if instr.synthetic:
        out += " !loop"
    return out


def print_instruction(instr: Instr) -> str:
    if isinstance(instr, Alloca):
        return f"%{instr.result} = alloca {instr.size}"
    if isinstance(instr, Load):
        if instr.atomic:
            return f"%{instr.result} = atomic_load {instr.type} {instr.addr} {instr.ordering}"
        flag = " !loop" if instr.synthetic else ""
        return f"%{instr.result} = load {instr.type} {instr.addr}{flag}"
    if isinstance(instr, Store):
        if instr.atomic:
            return f"atomic_store {instr.type} {instr.value}, {instr.addr} {instr.ordering}"
        return f"store {instr.type} {instr.value}, {instr.addr}{_store_flags(instr)}"
    if isinstance(instr, Rmw):
        return (
            f"%{instr.result} = atomic_rmw {instr.op} {instr.type} "
            f"{instr.addr}, {instr.operand} {instr.ordering}"
        )
    if isinstance(instr, Memcpy):
        return f"memcpy {instr.dst}, {instr.src}, {instr.length}"
    if isinstance(instr, Memmove):
        return f"memmove {instr.dst}, {instr.src}, {instr.length}"
    if isinstance(instr, Memset):
        return f"memset {instr.dst}, {instr.byte}, {instr.length}"
    if isinstance(instr, Spawn):
        prefix = f"%{instr.result} = " if instr.result else ""
        return f"{prefix}spawn @{instr.fn}({instr.arg})"
    if isinstance(instr, Join):
        prefix = f"%{instr.result} = " if instr.result else ""
        return f"{prefix}join {instr.handle}"
    if isinstance(instr, (Call, ExternCall)):
        prefix = f"%{instr.result} = " if instr.result else ""
        args = ", ".join(str(a) for a in instr.args)
        return f"{prefix}call @{instr.fn}({args})"
    if isinstance(instr, BinOp):
        return f"%{instr.result} = {instr.op} {instr.type} {instr.lhs}, {instr.rhs}"
    if isinstance(instr, Icmp):
        return f"%{instr.result} = icmp {instr.pred} {instr.lhs}, {instr.rhs}"
    if isinstance(instr, Gep):
        return f"%{instr.result} = gep {instr.base}, {instr.offset}"
    if isinstance(instr, Br):
        if instr.cond is None:
            return f"br {instr.targets[0]}"
        return f"br {instr.cond}, {instr.targets[0]}, {instr.targets[1]}"
    if isinstance(instr, Assert):
        return f"assert {instr.cond}"
    if isinstance(instr, Panic):
        return f'panic "{_escape(instr.message)}"'
    if isinstance(instr, Ret):
        return "ret" if instr.value is None else f"ret {instr.value}"
    if isinstance(instr, GlobalRef):
        return f"%{instr.result} = global_ref @{instr.symbol}"
    if isinstance(instr, BoundExceeded):
        return "bound_exceeded"
    raise TypeError(f"unprintable instruction: {instr!r}")


def print_function(fn: Function) -> str:
    params = ", ".join(f"%{name}: {ty}" for name, ty in fn.params)
    out = [f"func @{fn.name}({params}) {{"]
    for label, instrs in fn.blocks.items():
        out.append(f"{label}:")
        for instr in instrs:
            out.append(f"  {print_instruction(instr)}")
    out.append("}")
    return "\n".join(out)


def print_module(module: Module) -> str:
    """Render a module in canonical textual form ("" for an empty module)."""
    header = []
    for g in module.globals.values():
        header.append(f"global @{g.name} : {g.type} = {g.init}")
    for decl in module.externs.values():
        header.append(f"declare @{decl.name}({decl.arity})")
    chunks = []
    if header:
        chunks.append("\n".join(header))
    chunks.extend(print_function(fn) for fn in module.functions.values())
    return "\n\n".join(chunks)


def print_program(program: Program) -> str:
    """Render a linked program; same surface grammar as a module."""
    module = Module(
        name="<program>",
        globals=dict(program.globals),
        functions=dict(program.functions),
        externs=dict(program.externs),
    )
    return print_module(module)
