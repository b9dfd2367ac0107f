"""Owicki-Gries obligations: local correctness, interference freedom,
invariant preservation, and the postcondition rule.

Assertions live at control points (labels).  Local correctness checks every
assertion against the nearest preceding assertions along each structured
path: the first assertion of a component follows from the initial
condition, and an assertion preceded by {Q} S must satisfy Q ==> wlp(S, P),
where S is the composite statement between the two sites.  A DO head must
carry its loop invariant; otherwise obligations that depend on it stay
pending instead of silently passing.

Global correctness quantifies over every atomic action of every other
component: for an assertion P at site l of component A and an action {U} S,
the obligation is  P && pc.A = l && U ==> wlp(S, P).  The site conjunct
reflects that an assertion only claims anything while control is at its
label, and other components never move A's counter; the paper-style
calculations rely on exactly this strengthening.  U is the action's
annotated precondition: its own counter value, the user assertions at its
label, and every declared program invariant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional

from .errors import ContractError
from .lang import (
    AtomicAction,
    Component,
    DoEvalAction,
    IfEvalAction,
    Program,
    extract_actions,
    initial_condition,
    program_domains,
)
from .predicates import (
    Domains,
    Expr,
    Label,
    Valuation,
    fold,
    implies_expr,
    land,
    lnot,
    lor,
    pc_is,
    substitute,
)
from .wlp import _pc_subst, wlp_action

VERDICT_VALID = "valid"
VERDICT_INVALID = "invalid"
VERDICT_PENDING = "pending"


@dataclass(frozen=True)
class Obligation:
    """One checkable implication with its provenance and verdict."""

    oid: str
    kind: str  # 'LC' | 'GC' | 'INV' | 'POST' | 'UN' | 'IMM'
    formula: Expr
    rule: str
    site: str  # program site the obligation is about, e.g. 'Y.5'
    verdict: str = VERDICT_PENDING
    counterexample: Optional[Valuation] = None
    note: str = ""

    @property
    def valid(self) -> bool:
        return self.verdict == VERDICT_VALID


def decide(ob: Obligation, domains: Domains, cap: Optional[int] = None) -> Obligation:
    from .predicates import valid as _valid

    if ob.verdict == VERDICT_PENDING and ob.note:
        return ob  # stays pending for a recorded reason
    folded = fold(ob.formula)
    ok, cx = _valid(folded, domains) if cap is None else _valid(folded, domains, cap=cap)
    return replace(
        ob,
        formula=folded,
        verdict=VERDICT_VALID if ok else VERDICT_INVALID,
        counterexample=cx,
    )


def all_valid(obs: list[Obligation]) -> bool:
    return all(o.valid for o in obs)


# ---------------------------------------------------------------------------
# Action preconditions
# ---------------------------------------------------------------------------


def action_precondition(program: Program, action: AtomicAction) -> Expr:
    """U for the action: counter at its label, user assertions there, and
    all declared program invariants."""
    parts: list[Expr] = [pc_is(action.component, action.label)]
    parts.extend(program.assertions_at(action.site))
    parts.extend(program.invariant_exprs())
    return land(*parts)


# ---------------------------------------------------------------------------
# Control-flow edges between labels (for local correctness)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Edge:
    """One outcome of one action; `transform` is the per-edge wlp."""

    action: AtomicAction
    target: str
    guard: Optional[Expr]  # None for unconditional outcomes
    exit_edge: bool = False

    def describe(self) -> str:
        base = f"{self.action.component}.{self.action.label}"
        if self.exit_edge:
            return f"{base}[exit]"
        if self.guard is not None:
            return f"{base}[->{self.target}]"
        return base


def _edges_of(action: AtomicAction) -> list[_Edge]:
    if isinstance(action, IfEvalAction):
        return [_Edge(action, tgt, g) for g, tgt in action.branches]
    if isinstance(action, DoEvalAction):
        out = [_Edge(action, tgt, g) for g, tgt in action.branches]
        none_true = lnot(lor(*(g for g, _ in action.branches)))
        out.append(_Edge(action, action.exit_target, none_true, exit_edge=True))
        return out
    return [_Edge(action, action.target, None)]  # type: ignore[attr-defined]


def _edge_wlp(edge: _Edge, post: Expr, pc_var: str) -> Expr:
    comp = edge.action.component
    if edge.guard is None:
        return wlp_action(edge.action, post, pc_var)
    moved = substitute(post, _pc_subst(pc_var, comp, edge.target))
    return implies_expr(edge.guard, moved)


# ---------------------------------------------------------------------------
# Local correctness
# ---------------------------------------------------------------------------


def _component_edges(program: Program, comp: Component) -> dict[str, list[_Edge]]:
    by_label: dict[str, list[_Edge]] = {}
    for a in extract_actions(program):
        if a.component != comp.name:
            continue
        by_label[a.label] = _edges_of(a)
    return by_label


def check_local(program: Program, cap: Optional[int] = None) -> list[Obligation]:
    """LC of every assertion, pending where a loop invariant is missing."""
    _require_instrumented(program)
    domains = program_domains(program)
    init = initial_condition(program)
    out: list[Obligation] = []
    for comp in program.components:
        out.extend(_check_local_component(program, comp, init, domains, cap))
    return out


def _check_local_component(
    program: Program,
    comp: Component,
    init: Expr,
    domains: Domains,
    cap: Optional[int],
) -> list[Obligation]:
    edges = _component_edges(program, comp)
    annotated = {
        lbl.name for lbl in program.annotation if lbl.component == comp.name
    }
    do_heads = {
        a.label
        for a in extract_actions(program)
        if a.component == comp.name and isinstance(a, DoEvalAction)
    }
    initial = comp.initial_label()
    anchors = {initial} | annotated | do_heads
    obligations: list[Obligation] = []
    counter = itertools.count()

    # assertions at the initial label follow from the initial condition
    for p in program.assertions_at(Label(comp.name, initial)):
        ob = Obligation(
            oid=f"LC:{comp.name}.{initial}:{next(counter)}",
            kind="LC",
            formula=implies_expr(init, p),
            rule="assertion established by the initial condition",
            site=f"{comp.name}.{initial}",
        )
        obligations.append(decide(ob, domains, cap))

    # missing loop invariants make downstream checks pending
    broken_heads = do_heads - annotated

    for anchor in sorted(anchors):
        if anchor == comp.final:
            continue
        source_preds = list(program.assertions_at(Label(comp.name, anchor)))
        if anchor == initial and not source_preds:
            source = init
        elif not source_preds:
            source = None  # unannotated DO head
        else:
            source = land(*source_preds)
        for path in _paths_to_next_anchor(anchor, anchors, edges, comp):
            last = path[-1]
            target_label = last.target
            target_site = Label(comp.name, target_label)
            for p in program.assertions_at(target_site):
                trail = ",".join(e.describe() for e in path)
                oid = f"LC:{comp.name}.{target_label}:{next(counter)}"
                rule = f"assertion established along {trail}"
                if source is None or (anchor in broken_heads):
                    obligations.append(
                        Obligation(
                            oid=oid,
                            kind="LC",
                            formula=p,
                            rule=rule,
                            site=str(target_site),
                            verdict=VERDICT_PENDING,
                            note=(
                                f"no loop invariant at {comp.name}.{anchor}; "
                                "annotate the DO head"
                            ),
                        )
                    )
                    continue
                weakest = p
                for edge in reversed(path):
                    weakest = _edge_wlp(edge, weakest, comp.pc_var)
                ob = Obligation(
                    oid=oid,
                    kind="LC",
                    formula=implies_expr(source, weakest),
                    rule=rule,
                    site=str(target_site),
                )
                obligations.append(decide(ob, domains, cap))
    return obligations


def _paths_to_next_anchor(
    start: str,
    anchors: set[str],
    edges: dict[str, list[_Edge]],
    comp: Component,
) -> list[list[_Edge]]:
    """All edge paths from `start` to the nearest anchor or the final label,
    with no anchor strictly inside.  Anchoring every DO head keeps the
    label graph between anchors acyclic, so this enumeration terminates."""
    paths: list[list[_Edge]] = []

    def walk(label: str, acc: list[_Edge], seen: frozenset[str]) -> None:
        for edge in edges.get(label, ()):  # final label has no edges
            nxt = edge.target
            trail = acc + [edge]
            if nxt in anchors or nxt == comp.final:
                paths.append(trail)
            elif nxt in seen:
                raise ContractError(
                    f"unannotated loop through {comp.name}.{nxt}"
                )
            else:
                walk(nxt, trail, seen | {nxt})

    walk(start, [], frozenset({start}))
    return paths


# ---------------------------------------------------------------------------
# Global correctness (interference freedom)
# ---------------------------------------------------------------------------


def check_global(program: Program, cap: Optional[int] = None) -> list[Obligation]:
    """Every assertion is preserved by every action of every other component."""
    _require_instrumented(program)
    domains = program_domains(program)
    actions = extract_actions(program)
    out: list[Obligation] = []
    for site in _annotation_sites(program):
        site_pc = pc_is(site.component, site.name)
        for idx, p in enumerate(program.assertions_at(site)):
            for action in actions:
                if action.component == site.component:
                    continue
                u = action_precondition(program, action)
                formula = implies_expr(
                    land(p, site_pc, u),
                    wlp_action(action, p, pc_var=f"pc.{action.component}"),
                )
                ob = Obligation(
                    oid=f"GC:{site}#{idx}:{action.site}",
                    kind="GC",
                    formula=formula,
                    rule=f"assertion preserved by {action.site}",
                    site=str(site),
                )
                out.append(decide(ob, domains, cap))
    return out


def _annotation_sites(program: Program) -> list[Label]:
    order: dict[str, int] = {}
    for i, comp in enumerate(program.components):
        order[comp.name] = i
    return sorted(
        program.annotation, key=lambda l: (order.get(l.component, 99), l.name)
    )


# ---------------------------------------------------------------------------
# Invariants and the postcondition rule
# ---------------------------------------------------------------------------


def check_invariant(
    program: Program, inv: Expr, name: str = "", cap: Optional[int] = None
) -> list[Obligation]:
    """Initially true, and preserved by every action under its U."""
    _require_instrumented(program)
    domains = program_domains(program)
    label = name or "invariant"
    out = [
        decide(
            Obligation(
                oid=f"INV:{label}:init",
                kind="INV",
                formula=implies_expr(initial_condition(program), inv),
                rule="invariant holds initially",
                site=label,
            ),
            domains,
            cap,
        )
    ]
    for action in extract_actions(program):
        u = action_precondition(program, action)
        formula = implies_expr(
            land(inv, u), wlp_action(action, inv, pc_var=f"pc.{action.component}")
        )
        out.append(
            decide(
                Obligation(
                    oid=f"INV:{label}:{action.site}",
                    kind="INV",
                    formula=formula,
                    rule=f"invariant preserved by {action.site}",
                    site=label,
                ),
                domains,
                cap,
            )
        )
    return out


def check_postcondition(
    program: Program, post: Expr, cap: Optional[int] = None
) -> Obligation:
    """The verified final assertions, all counters final, imply the claim."""
    _require_instrumented(program)
    domains = program_domains(program)
    parts: list[Expr] = []
    missing: list[str] = []
    for comp in program.components:
        finals = program.assertions_at(Label(comp.name, comp.final))  # type: ignore[arg-type]
        if not finals:
            missing.append(comp.name)
        parts.extend(finals)
        parts.append(pc_is(comp.name, comp.final))  # type: ignore[arg-type]
    ob = Obligation(
        oid="POST",
        kind="POST",
        formula=implies_expr(land(*parts), post),
        rule="conjunction of the final assertions implies the postcondition",
        site="program",
    )
    if missing:
        return replace(
            ob,
            note="no final assertion in component(s) " + ", ".join(missing),
        )
    return decide(ob, domains, cap)


def check_annotation(program: Program, cap: Optional[int] = None) -> list[Obligation]:
    """LC + GC + every declared invariant, in program order."""
    out = check_local(program, cap) + check_global(program, cap)
    for name, inv in program.invariants:
        out.extend(check_invariant(program, inv, name=name, cap=cap))
    return out


def _require_instrumented(program: Program) -> None:
    if not program.instrumented:
        raise ContractError("instrument the program before checking")
