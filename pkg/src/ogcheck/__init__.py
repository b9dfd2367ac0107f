"""Verifier and semantic oracle for concurrent guarded-command programs.

The proof side mechanizes interference-free annotations over
counter-instrumented programs (local and global correctness, invariants,
the postcondition rule) and a UNITY-style progress logic (unless,
immediate progress, and leads-to proof scripts).  The semantic side is an
explicit-state model checker under weak fairness that independently
confirms or refutes every verdict.
"""

from .errors import (
    ContractError,
    DomainEscapeError,
    EvalError,
    LabelError,
    OgpError,
    ParseError,
    ResolveError,
    ResourceCapError,
)
from .frontend import SourceFile, parse, parse_predicate, parse_proofs, print_program
from .lang import (
    Assign,
    Atomic,
    AtomicAction,
    Component,
    Do,
    GuardedArm,
    If,
    Program,
    Property,
    Seq,
    Skip,
    Statement,
    VarDecl,
    auto_label,
    extract_actions,
    instrument_counters,
    validate_wellformed,
)
from .oracle import (
    TransitionSystem,
    build_state_space,
    oracle_assertions,
    oracle_deadlock_free,
    oracle_invariant,
    oracle_leadsto,
    oracle_postcondition,
    oracle_unless,
)
from .predicates import (
    Domains,
    Expr,
    Label,
    Valuation,
    evaluate,
    implies,
    substitute,
    valid,
)
from .progress import check_immediate, check_script, check_unless, obligations_report
from .safety import (
    Obligation,
    action_precondition,
    check_global,
    check_invariant,
    check_local,
    check_postcondition,
)
from .transform import SplitRequest, guard_conjunction_split, progress_equivalence_harness
from .wlp import HoareTriple, check_do, hoare_holds, wlp_action, wlp_stmt, wp_atomic

__version__ = "0.1.0"
