"""Guard-conjunction split as a checked program transformation.

A coarse-grained guarded statement  i: <if B && C -> S fi> j:  whose guard
conjunct B is globally correct may be replaced by

    i: <if B -> skip fi>;  k: <if C -> S fi>  j:

without affecting the annotation, total deadlock, or any component's
control-point progress.  The split itself is syntactic; the hypothesis is
emitted as interference-freedom obligations for the inserted assertion
{B} at k, and an oracle harness compares semantic verdicts before and
after so every instance is validated rather than trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .errors import ContractError
from .lang import (
    Atomic,
    Component,
    Do,
    GuardedArm,
    If,
    Program,
    Seq,
    Skip,
    Statement,
    instrument_counters,
    label_component,
)
from .predicates import Binary, Expr, Label, TRUE, land, pc_is
from .safety import Obligation, action_precondition, decide
from .wlp import wlp_action


@dataclass(frozen=True)
class SplitRequest:
    """Target of the transformation: the label of a coarse-grained guarded
    statement, the guard conjunct to hoist, and the fresh label for the
    residual statement."""

    target: Label
    hoist: Expr
    fresh: str


def _conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, Binary) and e.op == "&&":
        return _conjuncts(e.lhs) + _conjuncts(e.rhs)
    return [e]


def _split_guard(guard: Expr, hoist: Expr) -> Optional[Expr]:
    """Remaining guard after removing the hoisted conjunct, or None if the
    hoisted predicate is not a syntactic conjunct.  Hoisting `true` is
    always allowed and leaves the guard unchanged."""
    if hoist == TRUE:
        return guard
    parts = _conjuncts(guard)
    if hoist not in parts:
        return None
    rest = list(parts)
    rest.remove(hoist)
    return land(*rest)


def guard_conjunction_split(
    program: Program, req: SplitRequest
) -> tuple[Program, list[Obligation]]:
    """Apply the split and return the relabelled, re-instrumented program
    together with the GC side-condition obligations for {B} at the fresh
    label (decided against the transformed program)."""
    comp = program.component(req.target.component)
    if comp.body is None:
        raise ContractError(f"component {comp.name} has no statements")

    found: list[Statement] = []

    def rewrite(stmt: Statement) -> Statement:
        """Replace the target and drop final labels; the relabelling pass
        re-derives them, while explicit initial labels stay put."""
        if stmt.ini == req.target.name:
            if not isinstance(stmt, Atomic) or not (
                isinstance(stmt.body, If) and len(stmt.body.arms) == 1
            ):
                raise ContractError(
                    f"action {req.target} is not a single-arm coarse-grained "
                    "guarded statement"
                )
            arm = stmt.body.arms[0]
            rest = _split_guard(arm.guard, req.hoist)
            if rest is None:
                raise ContractError(
                    f"{req.hoist!r} is not a conjunct of the guard at {req.target}"
                )
            found.append(stmt)
            first = Atomic(If((GuardedArm(req.hoist, Skip()),)), ini=stmt.ini)
            second = Atomic(If((GuardedArm(rest, arm.body),)), ini=req.fresh)
            return Seq(first, second)
        if isinstance(stmt, Seq):
            return Seq(rewrite(stmt.first), rewrite(stmt.second))
        if isinstance(stmt, (If, Do)):
            return type(stmt)(
                tuple(GuardedArm(a.guard, rewrite(a.body)) for a in stmt.arms),
                ini=stmt.ini,
            )
        return replace(stmt, fin=None)

    new_body = rewrite(comp.body)
    if not found:
        raise ContractError(f"no action at {req.target}")
    new_comp, _ = label_component(Component(comp.name, new_body, final=comp.final))

    annotation = dict(program.annotation)
    site_b = Label(comp.name, req.fresh)
    if site_b in annotation:
        raise ContractError(f"fresh label {site_b} already in use")
    annotation[site_b] = (req.hoist,)

    comps = tuple(
        new_comp if c.name == comp.name else c for c in program.components
    )
    out = replace(program, components=comps, annotation=annotation)
    out = instrument_counters(replace(out, instrumented=False))

    side = _gc_side_conditions(out, req.hoist, site_b)
    return out, side


def _gc_side_conditions(
    program: Program, b: Expr, site: Label
) -> list[Obligation]:
    """Interference freedom of the hoisted conjunct at the fresh label."""
    from .lang import extract_actions, program_domains

    domains = program_domains(program)
    out: list[Obligation] = []
    for action in extract_actions(program):
        if action.component == site.component:
            continue
        u = action_precondition(program, action)
        formula = Binary(
            "==>",
            land(b, pc_is(site.component, site.name), u),
            wlp_action(action, b, pc_var=f"pc.{action.component}"),
        )
        out.append(
            decide(
                Obligation(
                    oid=f"SPLIT-GC:{site}:{action.site}",
                    kind="GC",
                    formula=formula,
                    rule=f"hoisted conjunct preserved by {action.site}",
                    site=str(site),
                ),
                domains,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Equivalence harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerdictPair:
    name: str
    kind: str
    before: object
    after: object

    @property
    def agree(self) -> bool:
        return self.before == self.after


@dataclass(frozen=True)
class HarnessReport:
    pairs: tuple[VerdictPair, ...]

    @property
    def divergences(self) -> tuple[VerdictPair, ...]:
        return tuple(p for p in self.pairs if not p.agree)

    @property
    def equivalent(self) -> bool:
        return not self.divergences


def progress_equivalence_harness(
    before: Program,
    after: Program,
    properties=None,
    cap: int = 1_000_000,
    include_pc_progress: bool = True,
) -> HarnessReport:
    """Oracle verdicts before/after for the declared properties, plus every
    control-point-to-control-point progress claim pc = i ~> pc = j over the
    labels shared by both programs, plus deadlock freedom, assertion
    correctness, and declared postconditions."""
    from .lang import label_domain
    from .oracle import (
        build_state_space,
        oracle_assertions,
        oracle_deadlock_free,
        oracle_leadsto,
        oracle_postcondition,
        oracle_unless,
    )

    ts_before = build_state_space(before, cap=cap)
    ts_after = build_state_space(after, cap=cap)
    pairs: list[VerdictPair] = []

    def add(name: str, kind: str, fn) -> None:
        pairs.append(VerdictPair(name, kind, fn(ts_before), fn(ts_after)))

    props = properties if properties is not None else before.properties
    for prop in props:
        if prop.kind == "leadsto":
            add(prop.name, prop.kind,
                lambda ts, p=prop: oracle_leadsto(ts, p.p, p.q)[0])
        elif prop.kind == "unless":
            add(prop.name, prop.kind,
                lambda ts, p=prop: oracle_unless(ts, p.p, p.q)[0])
        elif prop.kind == "postcondition":
            add(prop.name, prop.kind,
                lambda ts, p=prop: oracle_postcondition(ts, p.p)[0])
        elif prop.kind == "deadlockfree":
            add(prop.name, prop.kind, lambda ts: oracle_deadlock_free(ts)[0])

    add("deadlock_free", "deadlockfree", lambda ts: oracle_deadlock_free(ts)[0])
    add(
        "assertions_hold",
        "assertions",
        lambda ts: not oracle_assertions(ts),
    )

    if include_pc_progress:
        for comp_after in after.components:
            comp_before = before.component(comp_after.name)
            shared = [
                l
                for l in label_domain(comp_before)
                if l in set(label_domain(comp_after))
            ]
            for i in shared:
                for j in shared:
                    if i == j:
                        continue
                    add(
                        f"pc.{comp_after.name}={i}~>{j}",
                        "leadsto",
                        lambda ts, c=comp_after.name, a=i, b=j: oracle_leadsto(
                            ts, pc_is(c, a), pc_is(c, b)
                        )[0],
                    )
    return HarnessReport(tuple(pairs))
