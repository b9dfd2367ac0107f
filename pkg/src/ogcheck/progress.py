"""Unless properties, the immediate-progress leaf rule, and leads-to proof
scripts built from transitivity, disjunction, and the derived rules
(implication, impossibility, disjunction over indexed families,
cancellation, PSP, induction over a bounded measure, completion).

A script names the action witnessing every immediate leaf; the checker
never searches for one, so verdicts stay explainable and re-checkable.
Goals are threaded down the tree: composite nodes state the predicates
their rule needs and the checker emits the side conditions that glue a
node's conclusion to its parent's premiss (each such seam is an instance
of the implication rule plus transitivity, so the glue stays inside the
logic).  Side conditions and implication leaves may assume the declared
program invariants; the pipeline verifies those separately and first.

There is deliberately no `ensures` relation: immediate progress plays its
role directly, one clause per kind of atomic action.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .errors import ContractError
from .lang import (
    AssignAction,
    AtomicBlockAction,
    DoEvalAction,
    IfEvalAction,
    Program,
    SkipAction,
    actions_by_site,
    extract_actions,
    program_domains,
)
from .predicates import (
    Binary,
    Expr,
    FALSE,
    IntLit,
    Label,
    eq,
    fold,
    implies_expr,
    land,
    lnot,
    lor,
    pc_is,
    substitute,
)
from .safety import (
    Obligation,
    VERDICT_INVALID,
    VERDICT_PENDING,
    VERDICT_VALID,
    action_precondition,
    all_valid,
    decide,
)
from .wlp import _pc_subst, wlp_action, wp_atomic, atomic_enabled


# ---------------------------------------------------------------------------
# Proof script nodes
# ---------------------------------------------------------------------------


class ProofNode:
    __slots__ = ()


@dataclass(frozen=True)
class Immediate(ProofNode):
    """Exhibit the continually enabled action at `site` that establishes Q."""

    site: Label


@dataclass(frozen=True)
class Implication(ProofNode):
    """P ==> Q is valid (under the declared invariants)."""


@dataclass(frozen=True)
class Impossibility(ProofNode):
    """The sub-proof shows P leads to false, so no reachable state satisfies
    P and the goal holds vacuously; !P is recorded as a derived invariant."""

    sub: ProofNode


@dataclass(frozen=True)
class Transitivity(ProofNode):
    mid: Expr
    left: ProofNode
    right: ProofNode


@dataclass(frozen=True)
class DisjunctionCase:
    p: Expr
    sub: ProofNode
    q: Optional[Expr] = None  # defaults to the goal's consequent


@dataclass(frozen=True)
class Disjunction(ProofNode):
    """Case split on the antecedent; cases must jointly cover it.  A case
    with its own consequent uses the indexed-family form of the rule, and
    the case consequents must jointly imply the goal's consequent."""

    cases: tuple[DisjunctionCase, ...]


@dataclass(frozen=True)
class Cancellation(ProofNode):
    """From P ~> Q or D and D ~> Q conclude P ~> Q."""

    d: Expr
    sub1: ProofNode
    sub2: ProofNode


@dataclass(frozen=True)
class Psp(ProofNode):
    """Progress-safety-progress: from p ~> q and R un D conclude
    p && R ~> (q && R) or D, glued to the stated goal."""

    p: Expr
    q: Expr
    r: Expr
    d: Expr
    sub: ProofNode


@dataclass(frozen=True)
class Induction(ProofNode):
    """Well-founded descent over a bounded natural measure: the template is
    instantiated for every value m in [lo..hi], proving
    P && M = m ~> (P && M < m) or Q."""

    measure: Expr
    lo: int
    hi: int
    param: str
    template: ProofNode


@dataclass(frozen=True)
class CompletionPart:
    p: Expr
    q: Expr
    sub: ProofNode


@dataclass(frozen=True)
class Completion(ProofNode):
    """From P_i ~> Q_i or D and Q_i un D for every i conclude
    (AND_i P_i) ~> (AND_i Q_i) or D."""

    d: Expr
    parts: tuple[CompletionPart, ...]


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckedNode:
    """Verdict tree mirroring the script, pre-order deterministic."""

    rule: str
    goal_p: Expr
    goal_q: Expr
    obligations: tuple[Obligation, ...]
    children: tuple["CheckedNode", ...] = ()

    @property
    def valid(self) -> bool:
        return all(o.valid for o in self.obligations) and all(
            c.valid for c in self.children
        )

    def walk(self) -> Iterator["CheckedNode"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def all_obligations(self) -> list[Obligation]:
        out: list[Obligation] = []
        for node in self.walk():
            out.extend(node.obligations)
        return out


# ---------------------------------------------------------------------------
# Unless
# ---------------------------------------------------------------------------


def check_unless(
    program: Program,
    p: Expr,
    q: Expr,
    oid_prefix: str = "UN",
    cap: Optional[int] = None,
) -> tuple[bool, list[Obligation]]:
    """P un Q: every atomic action {U} S satisfies
    {P && !Q && U} S {P || Q}.  Guard evaluations are atomic actions too;
    their wlp covers every branch, and a blocked IF preserves the state."""
    domains = program_domains(program)
    obs: list[Obligation] = []
    for action in extract_actions(program):
        u = action_precondition(program, action)
        lhs = land(p, lnot(q), u)
        rhs = wlp_action(action, lor(p, q), pc_var=f"pc.{action.component}")
        ob = Obligation(
            oid=f"{oid_prefix}:{action.site}",
            kind="UN",
            formula=implies_expr(lhs, rhs),
            rule=f"unless preserved by {action.site}",
            site=str(action.site),
        )
        obs.append(decide(ob, domains, cap))
    return all_valid(obs), obs


# ---------------------------------------------------------------------------
# Immediate progress
# ---------------------------------------------------------------------------


def check_immediate(
    program: Program,
    p: Expr,
    q: Expr,
    site: Label,
    oid_prefix: str = "IMM",
    cap: Optional[int] = None,
) -> tuple[bool, list[Obligation]]:
    """The leaf rule for P ~> Q with witnessing action at `site`:

      0. P un Q;
      1. P && !Q  ==>  pc = site          (control is there);
      2. the action is enabled under P && !Q and establishes Q, by kind:
         skip/assignment     P && !Q ==> wlp(action, Q)
         atomic block <S>    P && !Q ==> wp(S, Q[pc := j])   (wp = enabled too)
         IF evaluation       P && !Q ==> some guard, and per branch
                             P && !Q && B_k ==> Q[pc := j_k]
         DO evaluation       per branch and for the exit outcome.
    """
    actions = actions_by_site(program)
    if site not in actions:
        raise ContractError(f"no action at label {site}")
    action = actions[site]
    domains = program_domains(program)
    pn = lnot(q)
    premise = land(p, pn)
    pc_var = f"pc.{action.component}"

    ok_un, obs = check_unless(program, p, q, oid_prefix=f"{oid_prefix}:un", cap=cap)
    counter = itertools.count()

    def emit(formula: Expr, rule: str) -> None:
        ob = Obligation(
            oid=f"{oid_prefix}:{site}:{next(counter)}",
            kind="IMM",
            formula=formula,
            rule=rule,
            site=str(site),
        )
        obs.append(decide(ob, domains, cap))

    emit(
        implies_expr(premise, pc_is(site.component, site.name)),
        "control is at the witnessing action",
    )

    if isinstance(action, (SkipAction, AssignAction)):
        emit(
            implies_expr(premise, wlp_action(action, q, pc_var)),
            "the action establishes the target",
        )
    elif isinstance(action, AtomicBlockAction):
        moved = substitute(q, _pc_subst(pc_var, action.component, action.target))
        emit(
            implies_expr(premise, atomic_enabled(action.body)),
            "the atomic body is enabled (cannot block)",
        )
        emit(
            implies_expr(premise, wp_atomic(action.body, moved)),
            "the atomic body establishes the target",
        )
    elif isinstance(action, IfEvalAction):
        emit(
            implies_expr(premise, lor(*(g for g, _ in action.branches))),
            "some guard of the IF evaluation is enabled",
        )
        for g, tgt in action.branches:
            moved = substitute(q, _pc_subst(pc_var, action.component, tgt))
            emit(
                implies_expr(land(premise, g), moved),
                f"the branch to {action.component}.{tgt} establishes the target",
            )
    elif isinstance(action, DoEvalAction):
        for g, tgt in action.branches:
            moved = substitute(q, _pc_subst(pc_var, action.component, tgt))
            emit(
                implies_expr(land(premise, g), moved),
                f"the branch to {action.component}.{tgt} establishes the target",
            )
        none_true = lnot(lor(*(g for g, _ in action.branches)))
        moved = substitute(
            q, _pc_subst(pc_var, action.component, action.exit_target)
        )
        emit(
            implies_expr(land(premise, none_true), moved),
            "the exit outcome establishes the target",
        )
    else:
        raise ContractError(f"unknown action {action!r}")
    return all_valid(obs), obs


# ---------------------------------------------------------------------------
# Scripts
# ---------------------------------------------------------------------------


def check_script(
    program: Program,
    p: Expr,
    q: Expr,
    node: ProofNode,
    cap: Optional[int] = None,
    _path: str = "0",
) -> CheckedNode:
    """Recursively verify the script against goal P ~> Q."""
    domains = program_domains(program)
    invs = land(*program.invariant_exprs())

    def side(formula: Expr, rule: str, n: int) -> Obligation:
        ob = Obligation(
            oid=f"S:{_path}:{n}",
            kind="IMM",
            formula=formula,
            rule=rule,
            site=_path,
        )
        return decide(ob, domains, cap)

    if isinstance(node, Immediate):
        ok, obs = check_immediate(
            program, p, q, node.site, oid_prefix=f"S:{_path}", cap=cap
        )
        return CheckedNode(f"immediate {node.site}", p, q, tuple(obs))

    if isinstance(node, Implication):
        ob = side(
            implies_expr(land(invs, p), q),
            "antecedent implies consequent (given the invariants)",
            0,
        )
        return CheckedNode("implication", p, q, (ob,))

    if isinstance(node, Impossibility):
        sub = check_script(program, p, FALSE, node.sub, cap, _path + ".0")
        conclusion = Obligation(
            oid=f"S:{_path}:conc",
            kind="INV",
            formula=fold(lnot(p)),
            rule="derived: the antecedent never holds",
            site=_path,
            verdict=VERDICT_VALID if sub.valid else VERDICT_PENDING,
            note="" if sub.valid else "sub-proof failed",
        )
        return CheckedNode("impossibility", p, q, (conclusion,), (sub,))

    if isinstance(node, Transitivity):
        left = check_script(program, p, node.mid, node.left, cap, _path + ".0")
        right = check_script(program, node.mid, q, node.right, cap, _path + ".1")
        return CheckedNode("transitivity", p, q, (), (left, right))

    if isinstance(node, Disjunction):
        if not node.cases:
            raise ContractError("disjunction needs at least one case")
        cover = side(
            implies_expr(land(invs, p), lor(*(c.p for c in node.cases))),
            "cases are exhaustive for the antecedent",
            0,
        )
        obs = [cover]
        explicit_qs = [c.q for c in node.cases if c.q is not None]
        if explicit_qs:
            obs.append(
                side(
                    implies_expr(
                        lor(*(c.q if c.q is not None else q for c in node.cases)), q
                    ),
                    "case consequents imply the goal consequent",
                    1,
                )
            )
        children = tuple(
            check_script(
                program,
                c.p,
                c.q if c.q is not None else q,
                c.sub,
                cap,
                f"{_path}.{i}",
            )
            for i, c in enumerate(node.cases)
        )
        return CheckedNode("disjunction", p, q, tuple(obs), children)

    if isinstance(node, Cancellation):
        sub1 = check_script(program, p, lor(q, node.d), node.sub1, cap, _path + ".0")
        sub2 = check_script(program, node.d, q, node.sub2, cap, _path + ".1")
        return CheckedNode("cancellation", p, q, (), (sub1, sub2))

    if isinstance(node, Psp):
        ok_un, un_obs = check_unless(
            program, node.r, node.d, oid_prefix=f"S:{_path}:un", cap=cap
        )
        seams = (
            side(
                implies_expr(land(invs, p), land(node.p, node.r)),
                "goal antecedent enters the PSP premiss",
                0,
            ),
            side(
                implies_expr(lor(land(node.q, node.r), node.d), q),
                "PSP conclusion implies the goal consequent",
                1,
            ),
        )
        sub = check_script(program, node.p, node.q, node.sub, cap, _path + ".0")
        return CheckedNode("psp", p, q, tuple(un_obs) + seams, (sub,))

    if isinstance(node, Induction):
        if node.lo > node.hi:
            raise ContractError("empty induction range")
        bound = side(
            implies_expr(
                land(invs, p),
                land(
                    Binary(">=", node.measure, IntLit(node.lo)),
                    Binary("<=", node.measure, IntLit(node.hi)),
                ),
            ),
            "the measure stays within the stated bound",
            0,
        )
        children = []
        for i, m in enumerate(range(node.lo, node.hi + 1)):
            inst = _instantiate(node.template, node.param, m)
            sub_p = land(p, eq(node.measure, IntLit(m)))
            sub_q = lor(
                land(p, Binary("<", node.measure, IntLit(m))),
                q,
            )
            children.append(
                check_script(program, sub_p, sub_q, inst, cap, f"{_path}.{i}")
            )
        return CheckedNode("induction", p, q, (bound,), tuple(children))

    if isinstance(node, Completion):
        if not node.parts:
            raise ContractError("completion needs at least one part")
        obs = [
            side(
                implies_expr(land(invs, p), land(*(pt.p for pt in node.parts))),
                "goal antecedent implies every part antecedent",
                0,
            ),
            side(
                implies_expr(lor(land(*(pt.q for pt in node.parts)), node.d), q),
                "joint consequent implies the goal consequent",
                1,
            ),
        ]
        children = []
        for i, pt in enumerate(node.parts):
            ok_un, un_obs = check_unless(
                program, pt.q, node.d, oid_prefix=f"S:{_path}:un{i}", cap=cap
            )
            obs.extend(un_obs)
            children.append(
                check_script(
                    program, pt.p, lor(pt.q, node.d), pt.sub, cap, f"{_path}.{i}"
                )
            )
        return CheckedNode("completion", p, q, tuple(obs), tuple(children))

    raise ContractError(f"unknown proof node {node!r}")


def _instantiate(node: ProofNode, param: str, value: int) -> ProofNode:
    """Substitute the induction parameter throughout a template's predicates."""
    bind = {param: IntLit(value)}

    def sub_expr(e: Expr) -> Expr:
        return substitute(e, bind)

    if isinstance(node, Immediate):
        return node
    if isinstance(node, Implication):
        return node
    if isinstance(node, Impossibility):
        return Impossibility(_instantiate(node.sub, param, value))
    if isinstance(node, Transitivity):
        return Transitivity(
            sub_expr(node.mid),
            _instantiate(node.left, param, value),
            _instantiate(node.right, param, value),
        )
    if isinstance(node, Disjunction):
        return Disjunction(
            tuple(
                DisjunctionCase(
                    sub_expr(c.p),
                    _instantiate(c.sub, param, value),
                    sub_expr(c.q) if c.q is not None else None,
                )
                for c in node.cases
            )
        )
    if isinstance(node, Cancellation):
        return Cancellation(
            sub_expr(node.d),
            _instantiate(node.sub1, param, value),
            _instantiate(node.sub2, param, value),
        )
    if isinstance(node, Psp):
        return Psp(
            sub_expr(node.p),
            sub_expr(node.q),
            sub_expr(node.r),
            sub_expr(node.d),
            _instantiate(node.sub, param, value),
        )
    if isinstance(node, Induction):
        if node.param == param:
            return node  # inner binder shadows
        return Induction(
            sub_expr(node.measure),
            node.lo,
            node.hi,
            node.param,
            _instantiate(node.template, param, value),
        )
    if isinstance(node, Completion):
        return Completion(
            sub_expr(node.d),
            tuple(
                CompletionPart(
                    sub_expr(pt.p), sub_expr(pt.q), _instantiate(pt.sub, param, value)
                )
                for pt in node.parts
            ),
        )
    raise ContractError(f"unknown proof node {node!r}")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyReport:
    name: str
    kind: str
    verdict: str
    obligations: tuple[Obligation, ...]
    tree: Optional[CheckedNode] = None


def obligations_report(
    program: Program, prop, cap: Optional[int] = None
) -> PropertyReport:
    """Flat obligations (plus the script tree for leads-to) for a property."""
    from .lang import Property

    assert isinstance(prop, Property)
    if prop.kind == "unless":
        ok, obs = check_unless(
            program, prop.p, prop.q, oid_prefix=f"UN:{prop.name}", cap=cap
        )
        return PropertyReport(
            prop.name,
            prop.kind,
            VERDICT_VALID if ok else VERDICT_INVALID,
            tuple(obs),
        )
    if prop.kind == "invariant":
        from .safety import check_invariant

        obs = check_invariant(program, prop.p, name=prop.name, cap=cap)
        return PropertyReport(
            prop.name,
            prop.kind,
            VERDICT_VALID if all_valid(obs) else VERDICT_INVALID,
            tuple(obs),
        )
    if prop.kind == "postcondition":
        from .safety import check_postcondition

        ob = check_postcondition(program, prop.p, cap=cap)
        return PropertyReport(prop.name, prop.kind, ob.verdict, (ob,))
    if prop.kind == "leadsto":
        if prop.script is None:
            return PropertyReport(
                prop.name,
                prop.kind,
                VERDICT_PENDING,
                (
                    Obligation(
                        oid=f"S:{prop.name}",
                        kind="IMM",
                        formula=implies_expr(prop.p, prop.q),
                        rule="no proof script declared",
                        site=prop.name,
                        verdict=VERDICT_PENDING,
                        note="declare a proof for this property",
                    ),
                ),
            )
        tree = check_script(program, prop.p, prop.q, prop.script, cap=cap)
        return PropertyReport(
            prop.name,
            prop.kind,
            VERDICT_VALID if tree.valid else VERDICT_INVALID,
            tuple(tree.all_obligations()),
            tree=tree,
        )
    if prop.kind == "deadlockfree":
        return PropertyReport(
            prop.name,
            prop.kind,
            VERDICT_PENDING,
            (
                Obligation(
                    oid=f"DF:{prop.name}",
                    kind="IMM",
                    formula=FALSE,
                    rule="deadlock freedom is decided by the oracle",
                    site=prop.name,
                    verdict=VERDICT_PENDING,
                    note="run the oracle for a semantic verdict",
                ),
            ),
        )
    raise ContractError(f"unknown property kind {prop.kind!r}")
