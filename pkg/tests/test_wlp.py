"""Predicate transformers: wlp, wp for atomic bodies, the DO rule, and
semantic agreement with big-step execution."""

from __future__ import annotations

import itertools
import random

import pytest

from helpers import load
from ogcheck.errors import ContractError
from ogcheck.lang import (
    Assign,
    Atomic,
    Component,
    Do,
    GuardedArm,
    If,
    Seq,
    Skip,
    label_component,
)
from ogcheck.oracle import BLOCKED, exec_body
from ogcheck.predicates import (
    Binary,
    BoolLit,
    Domains,
    IntLit,
    Label,
    TRUE,
    Unary,
    VarRef,
    bool_domain,
    eq,
    evaluate,
    fold,
    implies_expr,
    int_domain,
    land,
    lnot,
    lor,
    pc_is,
    valid,
)
from ogcheck.wlp import (
    HoareTriple,
    check_do,
    hoare_holds,
    wlp_body,
    wlp_stmt,
    wp_atomic,
)

PC_DOMAIN = {
    "pc.A": (Label("A", "1"), Label("A", "2"), Label("A", "3")),
}


def domains(**extra):
    base = {"x": int_domain(0, 3), "y": bool_domain(), "b": bool_domain()}
    base.update(PC_DOMAIN)
    base.update(extra)
    return Domains(base)


def test_wlp_skip_updates_counter():
    stmt = Skip(ini="1", fin="2")
    post = pc_is("A", "2")
    w = fold(wlp_stmt(stmt, post, "pc.A", "A"))
    assert w == TRUE


def test_wlp_skip_with_counter_constraint_not_an_axiom():
    # {P} i: skip j: {P} fails when P pins the counter at i
    stmt = Skip(ini="1", fin="2")
    p = pc_is("A", "1")
    ok, cx = hoare_holds(HoareTriple(p, stmt, p, "pc.A", "A"), domains())
    assert not ok
    assert cx["pc.A"] == Label("A", "1")


def test_wlp_assignment_counter_in_parallel():
    # wlp(x := x+1 with target 1, ((x=1 && pc.Y=0) || (x=2 && pc.Y=1)) && pc.X=1)
    # is equivalent to x=1 && pc.X=1 for the second component of program3
    prog = load("program3")
    comp_y = prog.component("Y")
    post = land(
        lor(
            land(eq(VarRef("x"), IntLit(1)), pc_is("Y", "0")),
            land(eq(VarRef("x"), IntLit(2)), pc_is("Y", "1")),
        ),
        pc_is("X", "1"),
    )
    w = wlp_stmt(comp_y.body, post, "pc.Y", "Y")
    from ogcheck.lang import program_domains

    d = program_domains(prog)
    expect = land(eq(VarRef("x"), IntLit(1)), pc_is("X", "1"))
    ok, _ = valid(Binary("<=>", fold(w), expect), d)
    assert ok


def test_wlp_guarded_skip():
    # wlp(i: <if y -> skip fi> j:, Q)  ==  y ==> Q[pc := j]
    stmt = Atomic(If((GuardedArm(VarRef("y"), Skip()),)), ini="1", fin="2")
    q = land(VarRef("b"), pc_is("A", "2"))
    w = fold(wlp_stmt(stmt, q, "pc.A", "A"))
    expect = implies_expr(VarRef("y"), VarRef("b"))
    ok, _ = valid(Binary("<=>", w, fold(expect)), domains())
    assert ok


def test_wlp_rejects_do_and_unlabelled():
    loop = Do((GuardedArm(VarRef("y"), Skip()),), ini="1", fin="2")
    with pytest.raises(ContractError):
        wlp_stmt(loop, TRUE, "pc.A", "A")
    with pytest.raises(ContractError):
        wlp_stmt(Skip(), TRUE, "pc.A", "A")


def test_wp_atomic_guarded_skip_adds_enabledness():
    body = If((GuardedArm(VarRef("y"), Skip()),))
    q = VarRef("b")
    w = fold(wp_atomic(body, q))
    ok, _ = valid(Binary("<=>", w, land(VarRef("y"), VarRef("b"))), domains())
    assert ok


def test_wp_atomic_skip_and_sequence():
    assert wp_atomic(Skip(), VarRef("b")) == VarRef("b")
    # wp(x := 1; if x=1 -> skip fi, Q)  ==  Q[x := 1]
    body = Seq(
        Assign(("x",), (IntLit(1),)),
        If((GuardedArm(eq(VarRef("x"), IntLit(1)), Skip()),)),
    )
    q = Binary("<", VarRef("x"), IntLit(2))
    w = fold(wp_atomic(body, q))
    ok, _ = valid(Binary("<=>", w, TRUE), domains())
    assert ok


def _enumerate_wp(body, post, d, names):
    """Ground-truth wp by big-step execution: demonic over internal choice,
    true iff no outcome blocks and every outcome satisfies post."""
    holds = {}
    for combo in itertools.product(*(d.values_of(n) for n in names)):
        val = dict(zip(names, combo))
        outcomes = exec_body(body, val)
        ok = all(o is not BLOCKED for o in outcomes) and all(
            evaluate(post, o) for o in outcomes if o is not BLOCKED
        )
        holds[tuple(combo)] = ok
    return holds


def _random_body(rng, depth=2):
    roll = rng.random()
    if depth == 0 or roll < 0.35:
        if rng.random() < 0.4:
            return Skip()
        if rng.random() < 0.5:
            return Assign(("x",), (IntLit(rng.randrange(0, 4)),))
        return Assign(("y",), (BoolLit(rng.random() < 0.5),))
    if roll < 0.6:
        return Seq(_random_body(rng, depth - 1), _random_body(rng, depth - 1))
    arms = tuple(
        GuardedArm(_random_guard(rng), _random_body(rng, depth - 1))
        for _ in range(rng.choice((1, 2)))
    )
    return If(arms)


def _random_guard(rng):
    kind = rng.random()
    if kind < 0.4:
        return VarRef("y")
    if kind < 0.6:
        return Unary("!", VarRef("y"))
    if kind < 0.8:
        return Binary("<", VarRef("x"), IntLit(rng.randrange(1, 4)))
    return BoolLit(rng.random() < 0.7)


def _random_post(rng):
    parts = [
        eq(VarRef("x"), IntLit(rng.randrange(0, 4))),
        VarRef("y"),
        Binary("<=", VarRef("x"), IntLit(rng.randrange(0, 4))),
    ]
    rng.shuffle(parts)
    return lor(land(parts[0], parts[1]), parts[2])


def test_wp_atomic_matches_bigstep_enumeration():
    rng = random.Random(23)
    d = Domains({"x": int_domain(0, 3), "y": bool_domain()})
    names = ["x", "y"]
    for _ in range(150):
        body = _random_body(rng)
        post = _random_post(rng)
        w = wp_atomic(body, post)
        truth = _enumerate_wp(body, post, d, names)
        for combo, expect in truth.items():
            got = evaluate(w, dict(zip(names, combo)))
            assert got == expect, (body, post, combo)


def test_wlp_body_weaker_than_wp():
    # wp strengthens wlp on every loop-free body
    rng = random.Random(29)
    d = Domains({"x": int_domain(0, 3), "y": bool_domain()})
    for _ in range(150):
        body = _random_body(rng)
        post = _random_post(rng)
        ok, _ = valid(
            implies_expr(wp_atomic(body, post), wlp_body(body, post)), d
        )
        assert ok


def test_check_do_trivial():
    loop = Do((GuardedArm(BoolLit(True), Skip(ini="2", fin="1")),), ini="1", fin="3")
    obs = check_do(TRUE, loop, TRUE, "pc.A", "A", domains())
    assert all(o.holds for o in obs)


def _counter_loop():
    body = Assign(("x",), (Binary("+", VarRef("x"), IntLit(1)),), ini="2", fin="1")
    return Do(
        (GuardedArm(Binary("<", VarRef("x"), IntLit(2)), body),), ini="1", fin="3"
    )


def test_check_do_counter_loop_valid():
    inv = land(
        Binary("<=", IntLit(0), VarRef("x")), Binary("<=", VarRef("x"), IntLit(2))
    )
    d = Domains({"x": int_domain(0, 2), **PC_DOMAIN})
    obs = check_do(inv, _counter_loop(), eq(VarRef("x"), IntLit(2)), "pc.A", "A", d)
    assert all(o.holds for o in obs)
    assert len(obs) == 2  # one arm, one exit


def test_check_do_bad_invariant_counterexample():
    inv = eq(VarRef("x"), IntLit(0))
    d = Domains({"x": int_domain(0, 2), **PC_DOMAIN})
    obs = check_do(inv, _counter_loop(), eq(VarRef("x"), IntLit(2)), "pc.A", "A", d)
    arm = obs[0]
    assert not arm.holds
    assert arm.counterexample["x"] == 0


def test_hoare_holds_examples():
    d = domains()
    stmt = Assign(("x",), (Binary("+", VarRef("x"), IntLit(1)),), ini="1", fin="2")
    ok, _ = hoare_holds(
        HoareTriple(eq(VarRef("x"), IntLit(0)), stmt, eq(VarRef("x"), IntLit(1)),
                    "pc.A", "A"),
        d,
    )
    assert ok
    ok, _ = hoare_holds(
        HoareTriple(BoolLit(False), stmt, BoolLit(False), "pc.A", "A"), d
    )
    assert ok  # false precondition proves anything
    with pytest.raises(ContractError):
        hoare_holds(
            HoareTriple(TRUE, Do((GuardedArm(TRUE, Skip(ini="2", fin="1")),),
                                 ini="1", fin="3"), TRUE, "pc.A", "A"),
            d,
        )


def _random_labelled(rng):
    """Small loop-free labelled statement in component A."""
    def build(depth):
        roll = rng.random()
        if depth == 0 or roll < 0.4:
            if rng.random() < 0.3:
                return Skip()
            if rng.random() < 0.5:
                return Assign(("x",), (IntLit(rng.randrange(0, 4)),))
            return Assign(("y",), (Unary("!", VarRef("y")),))
        if roll < 0.6:
            return Atomic(_random_body(rng, 1))
        if roll < 0.8:
            arms = tuple(
                GuardedArm(_random_guard(rng), build(depth - 1))
                for _ in range(rng.choice((1, 2)))
            )
            return If(arms)
        return Seq(build(depth - 1), build(depth - 1))

    comp, _ = label_component(Component("A", build(2)))
    return comp


def _exec_labelled(stmt, comp, val):
    """All terminating runs of a labelled fragment, tracking the counter."""
    if isinstance(stmt, Skip):
        out = dict(val)
        out["pc.A"] = Label("A", stmt.fin)
        return [out]
    if isinstance(stmt, Assign):
        out = dict(val)
        for name, e in zip(stmt.targets, stmt.exprs):
            out[name] = evaluate(e, val)
        out["pc.A"] = Label("A", stmt.fin)
        return [out]
    if isinstance(stmt, Atomic):
        outcomes = exec_body(stmt.body, val)
        results = []
        for o in outcomes:
            if o is BLOCKED:
                continue  # no terminating run through a blocked atomic
            out = dict(o)
            out["pc.A"] = Label("A", stmt.fin)
            results.append(out)
        return results
    if isinstance(stmt, Seq):
        results = []
        for mid in _exec_labelled(stmt.first, comp, val):
            results.extend(_exec_labelled(stmt.second, comp, mid))
        return results
    if isinstance(stmt, If):
        results = []
        for arm in stmt.arms:
            if evaluate(arm.guard, val):
                entered = dict(val)
                entered["pc.A"] = Label("A", arm.body.ini)
                results.extend(_exec_labelled(arm.body, comp, entered))
        return results
    raise AssertionError(stmt)


def _pc_domain_of(comp):
    from ogcheck.lang import label_domain

    return tuple(Label("A", n) for n in label_domain(comp))


def test_hoare_holds_agrees_with_bigstep(n_cases: int = 200):
    rng = random.Random(31)
    for _ in range(n_cases):
        comp = _random_labelled(rng)
        d = Domains(
            {
                "x": int_domain(0, 3),
                "y": bool_domain(),
                "pc.A": _pc_domain_of(comp),
            }
        )
        p = _random_post(rng)
        q = _random_post(rng)
        triple = HoareTriple(p, comp.body, q, "pc.A", "A")
        got, _ = hoare_holds(triple, d)
        truth = True
        for combo in itertools.product(
            d.values_of("x"), d.values_of("y"), d.values_of("pc.A")
        ):
            val = {"x": combo[0], "y": combo[1], "pc.A": combo[2]}
            if not evaluate(p, val):
                continue
            for final in _exec_labelled(comp.body, comp, val):
                if not evaluate(q, final):
                    truth = False
                    break
            if not truth:
                break
        assert got == truth, (comp.body, p, q)


def test_wlp_conjunctive(n_cases: int = 150):
    rng = random.Random(37)
    for _ in range(n_cases):
        comp = _random_labelled(rng)
        d = Domains(
            {"x": int_domain(0, 3), "y": bool_domain(), "pc.A": _pc_domain_of(comp)}
        )
        p, q = _random_post(rng), _random_post(rng)
        both = wlp_stmt(comp.body, land(p, q), "pc.A", "A")
        split = land(
            wlp_stmt(comp.body, p, "pc.A", "A"), wlp_stmt(comp.body, q, "pc.A", "A")
        )
        ok, _ = valid(Binary("<=>", both, split), d)
        assert ok


def test_wlp_monotone(n_cases: int = 150):
    rng = random.Random(41)
    for _ in range(n_cases):
        comp = _random_labelled(rng)
        d = Domains(
            {"x": int_domain(0, 3), "y": bool_domain(), "pc.A": _pc_domain_of(comp)}
        )
        p, q = _random_post(rng), _random_post(rng)
        if not valid(implies_expr(p, q), d)[0]:
            continue
        ok, _ = valid(
            implies_expr(
                wlp_stmt(comp.body, p, "pc.A", "A"),
                wlp_stmt(comp.body, q, "pc.A", "A"),
            ),
            d,
        )
        assert ok
