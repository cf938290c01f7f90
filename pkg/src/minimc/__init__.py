"""minimc: a stateless model checker for the MCIR concurrent IR.

Pipeline: parse and link MCIR modules, run IR transformation passes
(thread-call interception, loop bounding, memory-intrinsic lowering,
undef initialization, dead-allocation elimination), then exhaustively
explore thread interleavings up to trace equivalence with dynamic
partial order reduction, reporting data races, assertion violations,
uninitialized reads, and out-of-bounds accesses with witness traces.
"""

from . import explore, interp, ir, passes, report
from .explore import ExploreConfig, Verdict, VerdictKind, explore_naive
from .explore import explore as explore_program
from .interp import InterpConfig, run_schedule
from .ir import link, parse_module, print_module, validate
from .passes import PassConfig, PassReport, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ExploreConfig",
    "InterpConfig",
    "PassConfig",
    "PassReport",
    "Verdict",
    "VerdictKind",
    "explore",
    "explore_naive",
    "explore_program",
    "interp",
    "ir",
    "link",
    "parse_module",
    "passes",
    "print_module",
    "report",
    "run_pipeline",
    "run_schedule",
    "validate",
]
