"""Shared test helpers: corpus loading and a generator of small random
programs for the property suites.

Generated programs are domain-closed by construction (assignments only
ever store literals, copies, or negations of same-typed variables), so
the oracle never sees an out-of-domain write, and guards never mention
auxiliary variables.
"""

from __future__ import annotations

import random
from pathlib import Path

from ogcheck.frontend import parse, parse_proofs
from ogcheck.lang import (
    Assign,
    Atomic,
    Component,
    Do,
    GuardedArm,
    If,
    Program,
    Seq,
    Skip,
    Statement,
    VarDecl,
    auto_label,
    instrument_counters,
)
from ogcheck.predicates import (
    Binary,
    BoolLit,
    Expr,
    IntLit,
    Label,
    LabelLit,
    TRUE,
    Unary,
    VarRef,
    land,
    lnot,
    lor,
    pc_is,
)

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def load(name: str, instrument: bool = True) -> Program:
    source = parse((CORPUS / f"{name}.ogp").read_text(), name)
    program = source.program
    side = CORPUS / f"{name}.ogpf"
    if side.exists():
        program = parse_proofs(side.read_text(), program, str(side))
    return instrument_counters(program) if instrument else program


def corpus_names() -> list[str]:
    return sorted(p.stem for p in CORPUS.glob("*.ogp"))


# ---------------------------------------------------------------------------
# Random programs
# ---------------------------------------------------------------------------

COMPONENT_NAMES = ("A", "B", "C")


def _rand_bool_expr(rng: random.Random, bools: list[str], ints: list[str],
                    depth: int = 2) -> Expr:
    if depth == 0 or rng.random() < 0.35:
        choices = ["lit", "var"] if bools else ["lit"]
        if ints:
            choices.append("cmp")
        kind = rng.choice(choices)
        if kind == "lit":
            return BoolLit(rng.random() < 0.5)
        if kind == "var":
            return VarRef(rng.choice(bools))
        v = rng.choice(ints)
        op = rng.choice(["==", "!=", "<", "<=", ">", ">="])
        return Binary(op, VarRef(v), IntLit(rng.randrange(0, 4)))
    op = rng.choice(["&&", "||", "!", "==>"])
    if op == "!":
        return Unary("!", _rand_bool_expr(rng, bools, ints, depth - 1))
    return Binary(
        op,
        _rand_bool_expr(rng, bools, ints, depth - 1),
        _rand_bool_expr(rng, bools, ints, depth - 1),
    )


def _rand_assign(rng: random.Random, bools: list[str], ints: list[str]) -> Assign:
    pool = [(n, "bool") for n in bools] + [(n, "int") for n in ints]
    name, kind = rng.choice(pool)
    if kind == "bool":
        rhs: Expr = rng.choice(
            [BoolLit(True), BoolLit(False)]
            + [VarRef(b) for b in bools]
            + [Unary("!", VarRef(b)) for b in bools]
        )
    else:
        rhs = rng.choice([IntLit(rng.randrange(0, 4))] + [VarRef(i) for i in ints])
    return Assign((name,), (rhs,))


def _rand_stmt(rng: random.Random, bools: list[str], ints: list[str],
               budget: int, allow_do: bool) -> tuple[Statement, int]:
    """One statement and the number of atomic actions it contains."""
    roll = rng.random()
    if budget <= 1 or roll < 0.45:
        if rng.random() < 0.2:
            return Skip(), 1
        return _rand_assign(rng, bools, ints), 1
    if roll < 0.6:
        body: Statement = rng.choice(
            [Skip(), _rand_assign(rng, bools, ints)]
        )
        if rng.random() < 0.6:
            body = If(((GuardedArm(_rand_bool_expr(rng, bools, ints, 1), body)),))
        return Atomic(body), 1
    if roll < 0.8:
        arms = []
        used = 1
        for _ in range(rng.choice((1, 2))):
            inner, n = _rand_stmt(rng, bools, ints, 1, allow_do=False)
            used += n
            arms.append(GuardedArm(_rand_bool_expr(rng, bools, ints, 1), inner))
        return If(tuple(arms)), used
    if allow_do and roll < 0.9:
        inner, n = _rand_stmt(rng, bools, ints, 1, allow_do=False)
        guard = _rand_bool_expr(rng, bools, ints, 1)
        return Do((GuardedArm(guard, inner),)), 1 + n
    s1, n1 = _rand_stmt(rng, bools, ints, budget // 2, allow_do)
    s2, n2 = _rand_stmt(rng, bools, ints, budget - budget // 2, allow_do)
    return Seq(s1, s2), n1 + n2


def random_program(rng: random.Random, max_components: int = 3,
                   max_actions: int = 5, allow_do: bool = True) -> Program:
    """Small random multiprogram over booleans and one 2-bit integer."""
    n_bool = rng.choice((1, 2))
    bools = [f"b{i}" for i in range(n_bool)]
    ints = ["n"] if rng.random() < 0.6 else []
    decls = tuple(VarDecl(b, "bool") for b in bools) + tuple(
        VarDecl(i, "int", 0, 3) for i in ints
    )
    comps = []
    for name in COMPONENT_NAMES[: rng.randrange(1, max_components + 1)]:
        budget = rng.randrange(1, max_actions + 1)
        body, _ = _rand_stmt(rng, bools, ints, budget, allow_do)
        comps.append(Component(name, body))
    pre_parts = [
        Binary("==", VarRef(b), BoolLit(rng.random() < 0.5)) for b in bools
    ] + [Binary("==", VarRef(i), IntLit(rng.randrange(0, 4))) for i in ints]
    # half the time leave some variables open so several initial states exist
    keep = [p for p in pre_parts if rng.random() < 0.7]
    program = Program(
        "rand",
        land(*keep) if keep else TRUE,
        decls,
        tuple(comps),
    )
    return instrument_counters(auto_label(program))


def random_state_predicate(rng: random.Random, program: Program,
                           depth: int = 2) -> Expr:
    """Predicate over the program's data variables and control points."""
    bools = [d.name for d in program.decls if d.kind == "bool"]
    ints = [d.name for d in program.decls if d.kind == "int"]
    base = _rand_bool_expr(rng, bools, ints, depth)
    if rng.random() < 0.5 and program.components:
        comp = rng.choice(program.components)
        from ogcheck.lang import label_domain

        lab = rng.choice(label_domain(comp))
        pc_term = pc_is(comp.name, lab)
        if rng.random() < 0.5:
            pc_term = lnot(pc_term)
        base = rng.choice((land, lor))(base, pc_term)
    return base
