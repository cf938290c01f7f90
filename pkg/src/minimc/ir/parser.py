"""Hand-written recursive-descent parser for the MCIR textual grammar.

The grammar is line-oriented: one instruction per line, ``;`` comments,
``label:`` block labels, ``%reg = op ...`` for value-producing forms. The
canonical grammar is documented in docs/mcir.md; the printer in this
package emits exactly that form, and parse(print(m)) == m structurally.
"""

from __future__ import annotations

import re
from typing import Optional

from .core import (
    Alloca,
    Assert,
    BIN_OPS,
    BinOp,
    BoundExceeded,
    Br,
    Call,
    Const,
    ExternCall,
    ExternDecl,
    Function,
    Gep,
    GlobalDef,
    GlobalRef,
    ICMP_PREDS,
    Icmp,
    Join,
    Load,
    Memcpy,
    Memmove,
    Memset,
    Module,
    Ordering,
    Panic,
    ParseError,
    Reg,
    Ret,
    RMW_OPS,
    Rmw,
    SemType,
    Spawn,
    SrcLoc,
    Store,
    Sym,
    Undef,
    is_terminator,
)

_NAME = r"[A-Za-z_.][A-Za-z0-9_.]*"

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>;.*)
  | (?P<reg>%{name})
  | (?P<sym>@{name})
  | (?P<int>-?\d+)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<bang>!{name})
  | (?P<word>{name})
  | (?P<punct>[=,(){{}}:])
    """.format(name=_NAME),
    re.VERBOSE,
)

_TYPES = {t.value: t for t in SemType}
_ORDERINGS = {o.value: o for o in Ordering}


class _Tok:
    __slots__ = ("kind", "text", "col")

    def __init__(self, kind: str, text: str, col: int):
        self.kind = kind
        self.text = text
        self.col = col


def _tokenize_line(text: str, file: str, line_no: int) -> list:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", file, line_no, pos + 1)
        kind = m.lastgroup
        if kind == "comment":
            break
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), m.start() + 1))
        pos = m.end()
    return toks


class _Line:
    """Cursor over the tokens of one source line."""

    def __init__(self, toks: list, file: str, line_no: int):
        self.toks = toks
        self.file = file
        self.line_no = line_no
        self.i = 0

    @property
    def loc(self) -> SrcLoc:
        return SrcLoc(self.file, self.line_no)

    def _col(self) -> int:
        if self.i < len(self.toks):
            return self.toks[self.i].col
        return self.toks[-1].col + len(self.toks[-1].text) if self.toks else 1

    def error(self, message: str, expected=()) -> ParseError:
        return ParseError(message, self.file, self.line_no, self._col(), expected)

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of line")
        self.i += 1
        return tok

    def expect(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self.peek()
        want = text if text is not None else kind
        if tok is None or tok.kind != kind or (text is not None and tok.text != text):
            got = tok.text if tok else "end of line"
            raise self.error(f"unexpected {got!r}", expected={want})
        self.i += 1
        return tok

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[_Tok]:
        tok = self.peek()
        if tok is not None and tok.kind == kind and (text is None or tok.text == text):
            self.i += 1
            return tok
        return None

    def finish(self) -> None:
        if not self.at_end():
            raise self.error(f"trailing tokens starting at {self.peek().text!r}")


def _unescape(raw: str) -> str:
    body = raw[1:-1]
    return body.replace("\\\\", "\x00").replace('\\"', '"').replace("\\n", "\n").replace("\x00", "\\")


def _parse_type(ln: _Line) -> SemType:
    tok = ln.expect("word")
    ty = _TYPES.get(tok.text)
    if ty is None:
        raise ln.error(f"unknown type {tok.text!r}", expected=set(_TYPES))
    return ty


def _parse_ordering(ln: _Line) -> Ordering:
    tok = ln.expect("word")
    ordering = _ORDERINGS.get(tok.text)
    if ordering is None:
        raise ln.error(f"unknown ordering {tok.text!r}", expected=set(_ORDERINGS))
    return ordering


def _parse_operand(ln: _Line, allow_undef: bool = False):
    tok = ln.peek()
    if tok is None:
        raise ln.error("missing operand", expected={"%reg", "@sym", "int"})
    if tok.kind == "reg":
        ln.next()
        return Reg(tok.text[1:])
    if tok.kind == "sym":
        ln.next()
        return Sym(tok.text[1:])
    if tok.kind == "int":
        ln.next()
        return Const(int(tok.text))
    if tok.kind == "word" and tok.text == "undef":
        if not allow_undef:
            raise ln.error("undef is only legal as a store value")
        ln.next()
        return Undef()
    raise ln.error(f"bad operand {tok.text!r}", expected={"%reg", "@sym", "int"})


def _parse_args(ln: _Line) -> tuple:
    ln.expect("punct", "(")
    args = []
    if not ln.accept("punct", ")"):
        args.append(_parse_operand(ln))
        while ln.accept("punct", ","):
            args.append(_parse_operand(ln))
        ln.expect("punct", ")")
    return tuple(args)


def _parse_store_flags(ln: _Line) -> dict:
    flags = {}
    while (tok := ln.accept("bang")) is not None:
        name = tok.text[1:]
        if name == "init":
            flags["init"] = True
        elif name == "loop":
            flags["synthetic"] = True
        else:
            raise ln.error(f"unknown annotation !{name}", expected={"!init", "!loop"})
    return flags


def _parse_instruction(ln: _Line):
    loc = ln.loc
    result = None
    if ln.peek() is not None and ln.peek().kind == "reg":
        result = ln.next().text[1:]
        ln.expect("punct", "=")

    op_tok = ln.expect("word")
    op = op_tok.text

    def need_result():
        if result is None:
            raise ln.error(f"{op} produces a value; expected '%reg = {op} ...'")
        return result

    def no_result():
        if result is not None:
            raise ln.error(f"{op} does not produce a value")

    if op == "alloca":
        size = int(ln.expect("int").text)
        if size < 0:
            raise ln.error("alloca size must be non-negative")
        instr = Alloca(result=need_result(), size=size, loc=loc)
    elif op in ("load", "atomic_load"):
        ty = _parse_type(ln)
        addr = _parse_operand(ln)
        if op == "atomic_load":
            ordering = _parse_ordering(ln)
            instr = Load(result=need_result(), type=ty, addr=addr, atomic=True,
                         ordering=ordering, loc=loc)
        else:
            flags = _parse_store_flags(ln)
            if flags.pop("init", False):
                raise ln.error("!init is only legal on stores")
            instr = Load(result=need_result(), type=ty, addr=addr, loc=loc, **flags)
    elif op in ("store", "atomic_store"):
        no_result()
        ty = _parse_type(ln)
        value = _parse_operand(ln, allow_undef=(op == "store"))
        ln.expect("punct", ",")
        addr = _parse_operand(ln)
        if op == "atomic_store":
            ordering = _parse_ordering(ln)
            instr = Store(type=ty, value=value, addr=addr, atomic=True,
                          ordering=ordering, loc=loc)
        else:
            flags = _parse_store_flags(ln)
            instr = Store(type=ty, value=value, addr=addr, loc=loc, **flags)
    elif op == "atomic_rmw":
        rmw_op = ln.expect("word").text
        if rmw_op not in RMW_OPS:
            raise ln.error(f"unknown rmw op {rmw_op!r}", expected=set(RMW_OPS))
        ty = _parse_type(ln)
        addr = _parse_operand(ln)
        ln.expect("punct", ",")
        operand = _parse_operand(ln)
        ordering = _parse_ordering(ln)
        instr = Rmw(result=need_result(), op=rmw_op, type=ty, addr=addr,
                    operand=operand, ordering=ordering, loc=loc)
    elif op in ("memcpy", "memmove"):
        no_result()
        dst = _parse_operand(ln)
        ln.expect("punct", ",")
        src = _parse_operand(ln)
        ln.expect("punct", ",")
        length = _parse_operand(ln)
        cls = Memcpy if op == "memcpy" else Memmove
        instr = cls(dst=dst, src=src, length=length, loc=loc)
    elif op == "memset":
        no_result()
        dst = _parse_operand(ln)
        ln.expect("punct", ",")
        byte = _parse_operand(ln)
        ln.expect("punct", ",")
        length = _parse_operand(ln)
        instr = Memset(dst=dst, byte=byte, length=length, loc=loc)
    elif op == "spawn":
        fn = ln.expect("sym").text[1:]
        args = _parse_args(ln)
        if len(args) != 1:
            raise ln.error("spawn takes exactly one argument")
        instr = Spawn(result=result, fn=fn, arg=args[0], loc=loc)
    elif op == "join":
        handle = _parse_operand(ln)
        instr = Join(result=result, handle=handle, loc=loc)
    elif op == "call":
        fn = ln.expect("sym").text[1:]
        args = _parse_args(ln)
        instr = Call(result=result, fn=fn, args=args, loc=loc)
    elif op in BIN_OPS:
        ty = _parse_type(ln)
        lhs = _parse_operand(ln)
        ln.expect("punct", ",")
        rhs = _parse_operand(ln)
        instr = BinOp(result=need_result(), op=op, type=ty, lhs=lhs, rhs=rhs, loc=loc)
    elif op == "icmp":
        pred = ln.expect("word").text
        if pred not in ICMP_PREDS:
            raise ln.error(f"unknown icmp predicate {pred!r}", expected=set(ICMP_PREDS))
        lhs = _parse_operand(ln)
        ln.expect("punct", ",")
        rhs = _parse_operand(ln)
        instr = Icmp(result=need_result(), pred=pred, lhs=lhs, rhs=rhs, loc=loc)
    elif op == "gep":
        base = _parse_operand(ln)
        ln.expect("punct", ",")
        offset = _parse_operand(ln)
        instr = Gep(result=need_result(), base=base, offset=offset, loc=loc)
    elif op == "br":
        no_result()
        first = ln.peek()
        if first is not None and first.kind == "reg":
            cond = _parse_operand(ln)
            ln.expect("punct", ",")
            t1 = ln.expect("word").text
            ln.expect("punct", ",")
            t2 = ln.expect("word").text
            instr = Br(cond=cond, targets=(t1, t2), loc=loc)
        else:
            target = ln.expect("word").text
            instr = Br(cond=None, targets=(target,), loc=loc)
    elif op == "assert":
        no_result()
        instr = Assert(cond=_parse_operand(ln), loc=loc)
    elif op == "panic":
        no_result()
        msg = _unescape(ln.expect("str").text)
        instr = Panic(message=msg, loc=loc)
    elif op == "ret":
        no_result()
        value = None if ln.at_end() else _parse_operand(ln)
        instr = Ret(value=value, loc=loc)
    elif op == "global_ref":
        symbol = ln.expect("sym").text[1:]
        instr = GlobalRef(result=need_result(), symbol=symbol, loc=loc)
    elif op == "bound_exceeded":
        no_result()
        instr = BoundExceeded(loc=loc)
    else:
        raise ln.error(f"unknown instruction {op!r}")

    ln.finish()
    return instr


def parse_module(text: str, name: str = "<input>") -> Module:
    """Parse MCIR source into a Module.

    Raises ParseError with line/column and an expected-token set on
    malformed input, duplicate symbols, or branches to missing labels.
    """
    module = Module(name=name)
    lines = text.splitlines()
    i = 0

    def line_at(idx: int) -> _Line:
        return _Line(_tokenize_line(lines[idx], name, idx + 1), name, idx + 1)

    def check_duplicate(sym: str, ln: _Line) -> None:
        if sym in module.symbols():
            raise ln.error(f"duplicate symbol @{sym}")

    while i < len(lines):
        ln = line_at(i)
        i += 1
        if ln.at_end():
            continue
        head = ln.peek()
        if head.kind != "word":
            raise ln.error(f"unexpected {head.text!r}", expected={"global", "declare", "func"})
        if head.text == "global":
            ln.next()
            sym = ln.expect("sym").text[1:]
            ln.expect("punct", ":")
            ty = _parse_type(ln)
            ln.expect("punct", "=")
            init = int(ln.expect("int").text)
            ln.finish()
            check_duplicate(sym, ln)
            if ty is SemType.PTR:
                raise ln.error("globals must have an integer type")
            module.globals[sym] = GlobalDef(name=sym, type=ty, init=init, loc=ln.loc)
        elif head.text == "declare":
            ln.next()
            sym = ln.expect("sym").text[1:]
            ln.expect("punct", "(")
            arity = int(ln.expect("int").text)
            ln.expect("punct", ")")
            ln.finish()
            check_duplicate(sym, ln)
            module.externs[sym] = ExternDecl(name=sym, arity=arity, loc=ln.loc)
        elif head.text == "func":
            ln.next()
            sym = ln.expect("sym").text[1:]
            check_duplicate(sym, ln)
            params = []
            ln.expect("punct", "(")
            if not ln.accept("punct", ")"):
                while True:
                    preg = ln.expect("reg").text[1:]
                    ln.expect("punct", ":")
                    params.append((preg, _parse_type(ln)))
                    if not ln.accept("punct", ","):
                        break
                ln.expect("punct", ")")
            ln.expect("punct", "{")
            ln.finish()
            fn = Function(name=sym, params=tuple(params), loc=ln.loc)
            i = _parse_body(fn, lines, i, name, line_at)
            module.functions[sym] = fn
        else:
            raise ln.error(f"unexpected {head.text!r}", expected={"global", "declare", "func"})

    _classify_calls(module)
    _check_branch_targets(module)
    return module


def _parse_body(fn: Function, lines: list, i: int, file: str, line_at) -> int:
    current: Optional[str] = None

    def close_block(ln: _Line) -> None:
        if current is not None:
            instrs = fn.blocks[current]
            if not instrs or not is_terminator(instrs[-1]):
                raise ln.error(f"block {current!r} lacks a terminator")

    while i < len(lines):
        ln = line_at(i)
        i += 1
        if ln.at_end():
            continue
        head = ln.peek()
        if head.kind == "punct" and head.text == "}":
            ln.next()
            ln.finish()
            close_block(ln)
            if not fn.blocks:
                raise ln.error(f"function @{fn.name} has no blocks")
            return i
        if head.kind == "word" and len(ln.toks) == 2 and ln.toks[1].text == ":":
            close_block(ln)
            label = ln.next().text
            ln.next()
            if label in fn.blocks:
                raise ln.error(f"duplicate label {label!r}")
            fn.blocks[label] = []
            current = label
            continue
        if current is None:
            raise ln.error("expected a block label before instructions")
        instrs = fn.blocks[current]
        if instrs and is_terminator(instrs[-1]):
            raise ln.error(f"instruction after terminator in block {current!r}")
        instrs.append(_parse_instruction(ln))

    raise ParseError(f"unterminated function @{fn.name}", file, len(lines), 1)


def _classify_calls(module: Module) -> None:
    """Rewrite Call instructions whose target is a declared extern into
    ExternCall; reject calls to unknown symbols."""
    for fn in module.functions.values():
        for label, instrs in fn.blocks.items():
            for idx, instr in enumerate(instrs):
                if isinstance(instr, Call):
                    if instr.fn in module.functions:
                        continue
                    if instr.fn in module.externs:
                        instrs[idx] = ExternCall(
                            result=instr.result, fn=instr.fn, args=instr.args, loc=instr.loc
                        )
                    else:
                        raise ParseError(
                            f"call to undeclared symbol @{instr.fn}",
                            instr.loc.file, instr.loc.line, 1,
                        )


def _check_branch_targets(module: Module) -> None:
    for fn in module.functions.values():
        for _label, _i, instr in fn.instructions():
            if isinstance(instr, Br):
                for target in instr.targets:
                    if target not in fn.blocks:
                        raise ParseError(
                            f"branch to missing label {target!r} in @{fn.name}",
                            instr.loc.file, instr.loc.line, 1,
                        )
