"""Predicate transformers over labelled statements with implicit counters.

`wlp_stmt` implements the weakest liberal precondition for loop-free
labelled statements, with the component's counter updated implicitly:

    wlp(i: skip j:, P)        = P[pc := j]
    wlp(i: x,..:=E,.. j:, P)  = P[x := E || pc := j]
    wlp(i: <S> j:, P)         = wlp_body(S, P[pc := j])
    wlp(S1; S2, P)            = wlp(S1, wlp(S2, P))
    wlp(i: if .. fi l:, P)    = AND_k (B_k ==> wlp(j_k: S_k l:, P)[pc := j_k])

DO has no finite wlp; `check_do` discharges a DO triple through its loop
invariant instead.  `wp_atomic` is the total-correctness transformer for
atomic bodies, where termination coincides with never blocking at an inner
IF, so wp adds the guard disjunction as an enabledness conjunct.
Results are returned unsimplified except for constant folding; verdicts
come from validity checking, not from normal forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ContractError
from .lang import (
    Assign,
    Atomic,
    AtomicAction,
    AssignAction,
    AtomicBlockAction,
    Do,
    DoEvalAction,
    IfEvalAction,
    If,
    Seq,
    Skip,
    SkipAction,
    Statement,
)
from .predicates import (
    Binary,
    Domains,
    Expr,
    Label,
    LabelLit,
    Valuation,
    fold,
    implies_expr,
    land,
    lnot,
    lor,
    parallel_assign,
    substitute,
    valid,
)


def _pc_subst(pc_var: str, component: str, target: str) -> dict[str, Expr]:
    return {pc_var: LabelLit(Label(component, target))}


def contains_do(stmt: Statement) -> bool:
    if isinstance(stmt, Do):
        return True
    if isinstance(stmt, Seq):
        return contains_do(stmt.first) or contains_do(stmt.second)
    if isinstance(stmt, Atomic):
        return contains_do(stmt.body)
    if isinstance(stmt, If):
        return any(contains_do(a.body) for a in stmt.arms)
    return False


def wlp_body(stmt: Statement, post: Expr) -> Expr:
    """Classic wlp for an unlabelled, loop-free atomic body (no counter)."""
    if isinstance(stmt, Skip):
        return post
    if isinstance(stmt, Assign):
        return substitute(post, parallel_assign(list(zip(stmt.targets, stmt.exprs))))
    if isinstance(stmt, Seq):
        return wlp_body(stmt.first, wlp_body(stmt.second, post))
    if isinstance(stmt, Atomic):
        return wlp_body(stmt.body, post)
    if isinstance(stmt, If):
        return land(
            *(implies_expr(a.guard, wlp_body(a.body, post)) for a in stmt.arms)
        )
    if isinstance(stmt, Do):
        raise ContractError("atomic bodies are loop-free; wlp of DO is undefined here")
    raise ContractError(f"unknown statement {stmt!r}")


def wp_atomic(body: Statement, post: Expr) -> Expr:
    """Total-correctness transformer for a loop-free atomic body.

    Identical to `wlp_body` except that IF contributes the enabledness
    disjunction: wp(if .., P) = (B1 | .. | Bn) && AND_k (B_k ==> wp(S_k, P)).
    """
    if isinstance(body, Skip):
        return post
    if isinstance(body, Assign):
        return substitute(post, parallel_assign(list(zip(body.targets, body.exprs))))
    if isinstance(body, Seq):
        return wp_atomic(body.first, wp_atomic(body.second, post))
    if isinstance(body, Atomic):
        return wp_atomic(body.body, post)
    if isinstance(body, If):
        guards = lor(*(a.guard for a in body.arms))
        return land(
            guards,
            *(implies_expr(a.guard, wp_atomic(a.body, post)) for a in body.arms),
        )
    if isinstance(body, Do):
        raise ContractError("atomic bodies are loop-free; wp of DO is undefined")
    raise ContractError(f"unknown statement {body!r}")


def atomic_enabled(body: Statement) -> Expr:
    """States from which the atomic body is guaranteed to run to completion;
    equals wp_atomic(body, true)."""
    from .predicates import TRUE

    return fold(wp_atomic(body, TRUE))


def wlp_stmt(stmt: Statement, post: Expr, pc_var: str, component: str) -> Expr:
    """wlp of a labelled, loop-free statement with implicit counter updates."""
    if stmt.ini is None or stmt.fin is None:
        raise ContractError("wlp needs a labelled statement")
    if isinstance(stmt, Skip):
        return substitute(post, _pc_subst(pc_var, component, stmt.fin))
    if isinstance(stmt, Assign):
        binding = parallel_assign(list(zip(stmt.targets, stmt.exprs)))
        binding.update(_pc_subst(pc_var, component, stmt.fin))
        return substitute(post, binding)
    if isinstance(stmt, Atomic):
        after = substitute(post, _pc_subst(pc_var, component, stmt.fin))
        return wlp_body(stmt.body, after)
    if isinstance(stmt, Seq):
        return wlp_stmt(
            stmt.first, wlp_stmt(stmt.second, post, pc_var, component), pc_var, component
        )
    if isinstance(stmt, If):
        parts = []
        for arm in stmt.arms:
            inner = wlp_stmt(arm.body, post, pc_var, component)
            entered = substitute(
                inner, _pc_subst(pc_var, component, arm.body.ini)  # type: ignore[arg-type]
            )
            parts.append(implies_expr(arm.guard, entered))
        return land(*parts)
    if isinstance(stmt, Do):
        raise ContractError("wlp of DO is not computed; use check_do")
    raise ContractError(f"unknown statement {stmt!r}")


def wlp_action(action: AtomicAction, post: Expr, pc_var: str) -> Expr:
    """wlp of one atomic action (a single transition of the program).

    Guard evaluations transform per branch; a blocked IF evaluation has no
    terminating execution, so its wlp is vacuous on states where no guard
    holds.
    """
    comp = action.component
    if isinstance(action, SkipAction):
        return substitute(post, _pc_subst(pc_var, comp, action.target))
    if isinstance(action, AssignAction):
        binding = parallel_assign(list(action.assignments))
        binding.update(_pc_subst(pc_var, comp, action.target))
        return substitute(post, binding)
    if isinstance(action, AtomicBlockAction):
        after = substitute(post, _pc_subst(pc_var, comp, action.target))
        return wlp_body(action.body, after)
    if isinstance(action, IfEvalAction):
        return land(
            *(
                implies_expr(g, substitute(post, _pc_subst(pc_var, comp, tgt)))
                for g, tgt in action.branches
            )
        )
    if isinstance(action, DoEvalAction):
        parts = [
            implies_expr(g, substitute(post, _pc_subst(pc_var, comp, tgt)))
            for g, tgt in action.branches
        ]
        none_true = lnot(lor(*(g for g, _ in action.branches)))
        parts.append(
            implies_expr(
                none_true,
                substitute(post, _pc_subst(pc_var, comp, action.exit_target)),
            )
        )
        return land(*parts)
    raise ContractError(f"unknown action {action!r}")


# ---------------------------------------------------------------------------
# Hoare triples and the DO rule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HoareTriple:
    pre: Expr
    stmt: Statement
    post: Expr
    pc_var: str
    component: str


def hoare_holds(
    t: HoareTriple, domains: Domains, cap: Optional[int] = None
) -> tuple[bool, Optional[Valuation]]:
    """{P} S {Q} holds iff P implies wlp(S, Q); loop-free statements only."""
    if contains_do(t.stmt):
        raise ContractError("triple contains DO; use check_do with an invariant")
    weakest = wlp_stmt(t.stmt, t.post, t.pc_var, t.component)
    formula = Binary("==>", t.pre, weakest)
    if cap is None:
        return valid(fold(formula), domains)
    return valid(fold(formula), domains, cap=cap)


@dataclass(frozen=True)
class DoObligation:
    description: str
    formula: Expr
    holds: bool
    counterexample: Optional[Valuation]


def check_do(
    invariant: Expr,
    loop: Do,
    post: Expr,
    pc_var: str,
    component: str,
    domains: Domains,
) -> list[DoObligation]:
    """Loop-invariant obligations for a labelled DO.

    Per arm:  P && B_k  ==>  wlp(j_k: S_k i:, P)[pc := j_k]
    On exit:  P && !(B_1 | ... | B_n)  ==>  Q[pc := k]
    """
    if loop.ini is None or loop.fin is None:
        raise ContractError("check_do needs a labelled DO")
    out: list[DoObligation] = []
    for arm in loop.arms:
        body_wlp = wlp_stmt(arm.body, invariant, pc_var, component)
        entered = substitute(
            body_wlp, _pc_subst(pc_var, component, arm.body.ini)  # type: ignore[arg-type]
        )
        formula = fold(implies_expr(land(invariant, arm.guard), entered))
        ok, cx = valid(formula, domains)
        out.append(
            DoObligation(
                f"invariant preserved by arm guarded {arm.guard!r}", formula, ok, cx
            )
        )
    none_true = lnot(lor(*(a.guard for a in loop.arms)))
    exited = substitute(post, _pc_subst(pc_var, component, loop.fin))
    formula = fold(implies_expr(land(invariant, none_true), exited))
    ok, cx = valid(formula, domains)
    out.append(DoObligation("exit establishes the postcondition", formula, ok, cx))
    return out
