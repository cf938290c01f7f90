"""Multi-module linker: merge symbols, resolve extern calls, find main.

Extern calls whose target has a definition in some module are rewritten
to direct calls. Calls to recognized threading symbols survive as extern
calls for the interception pass. Anything else fails the link.
"""

from __future__ import annotations

from .core import (
    Call,
    DuplicateDefinition,
    ExternCall,
    LinkError,
    Module,
    NoMain,
    Program,
    UnresolvedSymbol,
    copy_function,
)

#: Threading symbols the interception pass understands; the linker lets
#: extern calls to these through unresolved.
THREAD_SYMBOLS = frozenset({"pthread_create", "pthread_join", "thread_spawn", "thread_join"})


def link(modules: list, known_externs: frozenset = THREAD_SYMBOLS) -> Program:
    """Link modules into a Program; raises LinkError subclasses on failure."""
    if not modules:
        raise LinkError("nothing to link: no modules given")

    program = Program()
    for module in modules:
        for name, g in module.globals.items():
            if name in program.globals or name in program.functions:
                raise DuplicateDefinition(name)
            program.globals[name] = g
            program.link_map[name] = module.name
        for name, fn in module.functions.items():
            if name in program.globals or name in program.functions:
                raise DuplicateDefinition(name)
            program.functions[name] = copy_function(fn)
            program.link_map[name] = module.name
        for name, decl in module.externs.items():
            prior = program.externs.get(name)
            if prior is not None and prior.arity != decl.arity:
                raise LinkError(
                    f"conflicting declarations for @{name}: arity {prior.arity} vs {decl.arity}"
                )
            program.externs.setdefault(name, decl)

    # Declarations satisfied by a definition disappear from the extern table.
    for name in list(program.externs):
        if name in program.functions:
            decl = program.externs.pop(name)
            definition = program.functions[name]
            if decl.arity != len(definition.params):
                raise LinkError(
                    f"declaration @{name}({decl.arity}) does not match definition "
                    f"with {len(definition.params)} parameters"
                )

    _resolve_extern_calls(program, known_externs)

    if program.entry not in program.functions:
        raise NoMain()
    return program


def _resolve_extern_calls(program: Program, known_externs: frozenset) -> None:
    for fn in program.functions.values():
        for label, instrs in fn.blocks.items():
            for idx, instr in enumerate(instrs):
                if not isinstance(instr, ExternCall):
                    continue
                if instr.fn in program.functions:
                    instrs[idx] = Call(
                        result=instr.result, fn=instr.fn, args=instr.args, loc=instr.loc
                    )
                elif instr.fn not in known_externs:
                    raise UnresolvedSymbol(instr.fn)
