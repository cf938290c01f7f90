"""Static checks over a linked program.

validate() returns a (possibly empty) list of diagnostics; it never
raises. A program with no diagnostics is safe to interpret: the replay
engine may still raise runtime faults (out-of-bounds, uninitialized
reads, ...), but it will never hit malformed IR.

Register typing is a best-effort single pass: each register gets one
inferred type per function ("any" when assignments disagree), and checks
fire only where the type is known. Def-before-use is a proper forward
dataflow over the CFG.
"""

from __future__ import annotations

from typing import Optional

from .core import (
    Alloca,
    Assert,
    BinOp,
    Br,
    Call,
    Const,
    Diagnostic,
    ExternCall,
    Function,
    Gep,
    GlobalRef,
    Icmp,
    Instr,
    Join,
    Load,
    LOAD_ORDERINGS,
    Memcpy,
    Memmove,
    Memset,
    Program,
    Reg,
    Ret,
    Rmw,
    SemType,
    Spawn,
    Store,
    STORE_ORDERINGS,
    Sym,
    Undef,
    is_terminator,
    operands_of,
    result_of,
)

# Inferred register types.
_INT = "int"
_PTR = "ptr"
_HANDLE = "handle"
_ANY = "any"


def validate(program: Program) -> list:
    """Check type/def-before-use/terminator invariants; empty list iff ok."""
    diags: list = []
    _check_globals(program, diags)
    for fn in program.functions.values():
        _check_function(program, fn, diags)
    main = program.functions.get(program.entry)
    if main is not None and main.params:
        diags.append(Diagnostic(main.loc, "@main must not take parameters"))
    return diags


def _check_globals(program: Program, diags: list) -> None:
    for g in program.globals.values():
        if g.type is SemType.PTR:
            diags.append(Diagnostic(g.loc, f"global @{g.name} must have an integer type"))
            continue
        bits = g.type.width * 8
        lo, hi = -(1 << (bits - 1)), (1 << bits) - 1
        if not lo <= g.init <= hi:
            diags.append(
                Diagnostic(g.loc, f"initializer {g.init} does not fit {g.type} for @{g.name}")
            )


def _check_function(program: Program, fn: Function, diags: list) -> None:
    if not fn.blocks:
        diags.append(Diagnostic(fn.loc, f"@{fn.name} has no blocks"))
        return
    _check_block_structure(fn, diags)
    _check_branch_targets(fn, diags)
    types = _infer_types(fn)
    _check_def_before_use(fn, diags)
    for _label, _i, instr in fn.instructions():
        _check_instruction(program, fn, instr, types, diags)


def _check_block_structure(fn: Function, diags: list) -> None:
    for label, instrs in fn.blocks.items():
        if not instrs:
            diags.append(Diagnostic(fn.loc, f"block {label!r} in @{fn.name} is empty"))
            continue
        if not is_terminator(instrs[-1]):
            diags.append(
                Diagnostic(instrs[-1].loc, f"block {label!r} in @{fn.name} lacks a terminator")
            )
        for instr in instrs[:-1]:
            if is_terminator(instr):
                diags.append(
                    Diagnostic(instr.loc, f"terminator before end of block {label!r} in @{fn.name}")
                )


def _check_branch_targets(fn: Function, diags: list) -> None:
    for _label, _i, instr in fn.instructions():
        if isinstance(instr, Br):
            for target in instr.targets:
                if target not in fn.blocks:
                    diags.append(
                        Diagnostic(instr.loc, f"branch to missing label {target!r} in @{fn.name}")
                    )


def _successors(fn: Function, label: str) -> tuple:
    instrs = fn.blocks[label]
    if instrs and isinstance(instrs[-1], Br):
        return tuple(t for t in instrs[-1].targets if t in fn.blocks)
    return ()


def _check_def_before_use(fn: Function, diags: list) -> None:
    labels = list(fn.blocks)
    params = {name for name, _ty in fn.params}
    universe = set(params)
    for _label, _i, instr in fn.instructions():
        r = result_of(instr)
        if r is not None:
            universe.add(r)

    preds: dict = {label: [] for label in labels}
    for label in labels:
        for succ in _successors(fn, label):
            preds[succ].append(label)

    defined_out = {label: set(universe) for label in labels}
    entry = fn.entry

    def block_out(label: str, defined_in: set) -> set:
        out = set(defined_in)
        for instr in fn.blocks[label]:
            r = result_of(instr)
            if r is not None:
                out.add(r)
        return out

    changed = True
    while changed:
        changed = False
        for label in labels:
            if label == entry:
                defined_in = set(params)
            else:
                ps = preds[label]
                defined_in = set.intersection(*(defined_out[p] for p in ps)) if ps else set(params)
            out = block_out(label, defined_in)
            if out != defined_out[label]:
                defined_out[label] = out
                changed = True

    reported = set()
    for label in labels:
        if label == entry:
            defined = set(params)
        else:
            ps = preds[label]
            defined = set.intersection(*(defined_out[p] for p in ps)) if ps else set(params)
        for instr in fn.blocks[label]:
            for op in operands_of(instr):
                if isinstance(op, Reg) and op.name not in defined and (fn.name, op.name) not in reported:
                    diags.append(
                        Diagnostic(instr.loc, f"use before def of %{op.name} in @{fn.name}")
                    )
                    reported.add((fn.name, op.name))
            r = result_of(instr)
            if r is not None:
                defined.add(r)


def _infer_types(fn: Function) -> dict:
    types: dict = {}
    for name, ty in fn.params:
        types[name] = _PTR if ty is SemType.PTR else _INT

    def assign(reg: Optional[str], ty: str) -> None:
        if reg is None:
            return
        if reg in types and types[reg] != ty:
            types[reg] = _ANY
        else:
            types.setdefault(reg, ty)

    for _label, _i, instr in fn.instructions():
        if isinstance(instr, (Alloca, Gep, GlobalRef)):
            assign(instr.result, _PTR)
        elif isinstance(instr, Load):
            assign(instr.result, _PTR if instr.type is SemType.PTR else _INT)
        elif isinstance(instr, (Rmw, BinOp, Icmp)):
            assign(instr.result, _INT)
        elif isinstance(instr, Spawn):
            assign(instr.result, _HANDLE)
        elif isinstance(instr, (Join, Call, ExternCall)):
            assign(result_of(instr), _ANY)
    return types


def _operand_type(op, types: dict) -> str:
    if isinstance(op, Reg):
        return types.get(op.name, _ANY)
    if isinstance(op, Const):
        return _INT
    if isinstance(op, Sym):
        return _PTR
    return _ANY  # Undef


def _check_instruction(program: Program, fn: Function, instr: Instr, types: dict, diags: list) -> None:
    def err(msg: str) -> None:
        diags.append(Diagnostic(instr.loc, f"{msg} in @{fn.name}"))

    def check_addr(op, what: str) -> None:
        if isinstance(op, Sym):
            if op.name not in program.globals:
                err(f"{what} @{op.name} is not a global")
        elif isinstance(op, Reg):
            if _operand_type(op, types) not in (_PTR, _ANY):
                err(f"{what} %{op.name} is not a pointer")
        else:
            err(f"{what} must be a register or global, not {op}")

    def check_int(op, what: str) -> None:
        if _operand_type(op, types) in (_PTR, _HANDLE):
            err(f"{what} must be an integer, got {op}")
        if isinstance(op, Sym):
            err(f"{what} must be an integer, got @{op.name}")

    def check_global_syms(ops) -> None:
        for op in ops:
            if isinstance(op, Sym) and op.name not in program.globals:
                err(f"@{op.name} is not a global")

    if isinstance(instr, Load):
        check_addr(instr.addr, "load address")
        if instr.atomic and instr.ordering not in LOAD_ORDERINGS:
            err(f"ordering {instr.ordering} is not legal on a load")
    elif isinstance(instr, Store):
        check_addr(instr.addr, "store address")
        if instr.atomic and instr.ordering not in STORE_ORDERINGS:
            err(f"ordering {instr.ordering} is not legal on a store")
        if isinstance(instr.value, Undef) and instr.atomic:
            err("atomic store of undef")
        if isinstance(instr.value, Reg) and _operand_type(instr.value, types) == _HANDLE:
            err("thread handles cannot be stored to memory")
        if isinstance(instr.value, Sym) and instr.value.name not in program.globals:
            err(f"@{instr.value.name} is not a global")
        if instr.type is not SemType.PTR and _operand_type(instr.value, types) == _PTR:
            err(f"storing a pointer with type {instr.type}")
    elif isinstance(instr, Rmw):
        check_addr(instr.addr, "rmw address")
        check_int(instr.operand, "rmw operand")
        if instr.type is SemType.PTR:
            err("rmw on pointer type")
    elif isinstance(instr, (Memcpy, Memmove)):
        check_addr(instr.dst, "intrinsic destination")
        check_addr(instr.src, "intrinsic source")
        check_int(instr.length, "intrinsic length")
        if isinstance(instr.length, Const) and instr.length.value < 0:
            err("negative intrinsic length")
    elif isinstance(instr, Memset):
        check_addr(instr.dst, "intrinsic destination")
        check_int(instr.byte, "memset fill byte")
        check_int(instr.length, "intrinsic length")
        if isinstance(instr.length, Const) and instr.length.value < 0:
            err("negative intrinsic length")
    elif isinstance(instr, Spawn):
        target = program.functions.get(instr.fn)
        if target is None:
            err(f"spawn of unknown function @{instr.fn}")
        else:
            if len(target.params) != 1:
                err(f"spawn target @{instr.fn} must take exactly one argument")
            for _l, _i, ti in target.instructions():
                if isinstance(ti, Ret) and ti.value is None:
                    diags.append(
                        Diagnostic(ti.loc, f"spawn target @{instr.fn} must return a value")
                    )
                    break
        if isinstance(instr.arg, Sym) and instr.arg.name not in program.globals:
            err(f"@{instr.arg.name} is not a global")
        if _operand_type(instr.arg, types) == _HANDLE:
            err("thread handles cannot be spawn arguments")
    elif isinstance(instr, Join):
        if isinstance(instr.handle, Reg):
            if _operand_type(instr.handle, types) not in (_HANDLE, _ANY):
                err(f"join of non-handle %{instr.handle.name}")
        else:
            err("join operand must be a register holding a thread handle")
    elif isinstance(instr, Call):
        target = program.functions.get(instr.fn)
        if target is None:
            err(f"call to undefined @{instr.fn}")
        elif len(instr.args) != len(target.params):
            err(f"call to @{instr.fn} with {len(instr.args)} args, expected {len(target.params)}")
        check_global_syms(instr.args)
    elif isinstance(instr, ExternCall):
        decl = program.externs.get(instr.fn)
        if decl is not None and len(instr.args) != decl.arity:
            err(f"extern call to @{instr.fn} with {len(instr.args)} args, declared {decl.arity}")
        # function names may appear as args here (threading interception shape)
        for op in instr.args:
            if isinstance(op, Sym) and op.name not in program.globals and op.name not in program.functions:
                err(f"@{op.name} is neither a global nor a function")
    elif isinstance(instr, BinOp):
        check_int(instr.lhs, f"{instr.op} operand")
        check_int(instr.rhs, f"{instr.op} operand")
        if instr.type is SemType.PTR:
            err("binary op on pointer type; use gep")
    elif isinstance(instr, Icmp):
        lt, rt = _operand_type(instr.lhs, types), _operand_type(instr.rhs, types)
        if _HANDLE in (lt, rt):
            err("icmp on thread handle")
        if instr.pred not in ("eq", "ne") and _PTR in (lt, rt):
            err(f"ordered icmp {instr.pred} on pointer")
        check_global_syms([op for op in (instr.lhs, instr.rhs) if isinstance(op, Sym)])
    elif isinstance(instr, Gep):
        check_addr(instr.base, "gep base")
        check_int(instr.offset, "gep offset")
    elif isinstance(instr, Br):
        if instr.cond is not None:
            check_int(instr.cond, "branch condition")
    elif isinstance(instr, Assert):
        check_int(instr.cond, "assert condition")
    elif isinstance(instr, Ret):
        if isinstance(instr.value, Sym) and instr.value.name not in program.globals:
            err(f"@{instr.value.name} is not a global")
    elif isinstance(instr, GlobalRef):
        if instr.symbol not in program.globals:
            err(f"global_ref of non-global @{instr.symbol}")
