"""Explicit-state oracle: state spaces, unless, leads-to under weak
fairness, assertions, postconditions, deadlock, and the control-state
facts guaranteed by counter instrumentation."""

from __future__ import annotations

import random
from dataclasses import replace

import pytest

from helpers import corpus_names, load, random_program
from ogcheck.errors import DomainEscapeError, ResourceCapError
from ogcheck.frontend import parse_predicate
from ogcheck.lang import (
    Assign,
    Component,
    Program,
    Seq,
    Skip,
    VarDecl,
    auto_label,
    instrument_counters,
    label_domain,
)
from ogcheck.oracle import (
    build_state_space,
    oracle_assertions,
    oracle_deadlock_free,
    oracle_invariant,
    oracle_leadsto,
    oracle_postcondition,
    oracle_unless,
)
from ogcheck.predicates import (
    Binary,
    BoolLit,
    IntLit,
    Label,
    TRUE,
    VarRef,
    eq,
    land,
    lnot,
    pc_is,
)


def test_program3_state_space():
    ts = build_state_space(load("program3"))
    assert len(ts.states) == 4
    terminal = [s for s in range(len(ts.states)) if ts.is_terminal(s)]
    assert len(terminal) == 1
    assert ts.holds(eq(VarRef("x"), IntLit(2)), terminal[0])


def test_single_skip_component():
    prog = instrument_counters(
        auto_label(Program("p", TRUE, (), (Component("A", Skip()),)))
    )
    ts = build_state_space(prog)
    assert len(ts.states) == 2
    assert len(ts.transitions) == 1


def test_simplified_protocol_deadlock_state():
    ts = build_state_space(load("init_simplified"))
    ok, cx = oracle_deadlock_free(ts)
    assert not ok
    assert "pc.X=X.2 pc.Y=Y.2 x=false y=false" in cx.note


def test_cap_exceeded():
    with pytest.raises(ResourceCapError):
        build_state_space(load("init_refinement2"), cap=5)


def test_oracle_unless_examples():
    prog = load("init_refinement2")
    ts = build_state_space(prog)
    p = parse_predicate("(pc.X == X.2 && y) || (pc.X == X.2 && !y)", prog)
    q = parse_predicate("pc.X == X.3 || (pc.X == X.2 && !y)", prog)
    assert oracle_unless(ts, p, q)[0]
    assert oracle_unless(ts, TRUE, parse_predicate("false", prog))[0]


def test_oracle_unless_witness_transition():
    # inject y := false into Y: pc.X=2 && y un pc.X=3 breaks, with a witness
    prog = load("init_refinement2")
    comp_y = prog.component("Y")

    def refinish(stmt, new_fin):
        if isinstance(stmt, Seq):
            return Seq(stmt.first, refinish(stmt.second, new_fin),
                       ini=stmt.ini, fin=new_fin)
        return replace(stmt, fin=new_fin)

    lower = Assign(("y",), (BoolLit(False),), ini="7", fin="5")
    patched = Seq(refinish(comp_y.body, "7"), lower, ini=comp_y.body.ini, fin="5")
    prog2 = replace(
        prog,
        components=tuple(
            Component("Y", patched, final="5") if c.name == "Y" else c
            for c in prog.components
        ),
        annotation={},
        invariants=(),
        properties=(),
    )
    ts = build_state_space(prog2)
    ok, cx = oracle_unless(
        ts,
        parse_predicate("pc.X == X.2 && y", prog2),
        parse_predicate("pc.X == X.3", prog2),
    )
    assert not ok
    assert "Y.7" in cx.note


def test_oracle_leadsto_corpus_verdicts():
    refinement2 = build_state_space(load("init_refinement2"))
    prog = load("init_refinement2")
    assert oracle_leadsto(
        refinement2,
        parse_predicate("pc.X == X.2", prog),
        parse_predicate("pc.X == X.3", prog),
    )[0]
    assert oracle_leadsto(
        refinement2,
        parse_predicate("pc.Y == Y.2", prog),
        parse_predicate("pc.Y == Y.3", prog),
    )[0]

    simplified = load("init_simplified")
    ts = build_state_space(simplified)
    ok, cx = oracle_leadsto(
        ts,
        parse_predicate("pc.X == X.2", simplified),
        parse_predicate("pc.X == X.3", simplified),
    )
    assert not ok
    assert "deadlock" in cx.note
    assert not cx.cycle  # dead-end counterexample, not a lasso


def test_oracle_leadsto_p_equals_q():
    prog = load("init_simplified")
    ts = build_state_space(prog)
    p = parse_predicate("pc.X == X.2", prog)
    assert oracle_leadsto(ts, p, p)[0]


def test_oracle_leadsto_fairness_forces_stopper():
    prog = load("flicker")
    ts = build_state_space(prog)
    # the loop cannot starve the stop assignment under weak fairness
    assert oracle_leadsto(
        ts,
        parse_predicate("pc.S == S.1", prog),
        parse_predicate("pc.S == S.2", prog),
    )[0]
    # and once stopped, the loop exits
    assert oracle_leadsto(
        ts,
        parse_predicate("pc.F == F.1", prog),
        parse_predicate("pc.F == F.3", prog),
    )[0]


def test_oracle_leadsto_fair_cycle_lasso():
    prog = load("loop_forever")
    ts = build_state_space(prog)
    ok, cx = oracle_leadsto(
        ts,
        parse_predicate("pc.F == F.1", prog),
        parse_predicate("pc.F == F.3", prog),
    )
    assert not ok
    assert cx.cycle  # a genuine lasso
    # fairness certificate: every component steps or is disabled in the cycle
    steppers = {s.component for s in cx.cycle}
    assert "F" in steppers


def test_fairness_certificate_self_check():
    # for every reported lasso on random looping programs, each component
    # either executes inside the cycle or is disabled at some cycle state
    rng = random.Random(43)
    checked = 0
    for _ in range(40):
        prog = random_program(rng, allow_do=True)
        try:
            ts = build_state_space(prog, cap=20000)
        except DomainEscapeError:
            continue
        p = TRUE
        q = parse_fail_target(prog)
        ok, cx = oracle_leadsto(ts, p, q)
        if ok or cx is None or not cx.cycle:
            continue
        checked += 1
        state_index = {ts.describe_state(i): i for i in range(len(ts.states))}
        cycle_states = [state_index[s.state] for s in cx.cycle]
        steppers = {s.component for s in cx.cycle}
        for comp in prog.components:
            if comp.name in steppers:
                continue
            assert any(
                not ts.enabled[sid][comp.name] for sid in cycle_states
            ), "unfair cycle reported"
    assert checked > 0


def parse_fail_target(prog):
    # a target that is hard to reach: every component at its final label
    return land(
        *(pc_is(c.name, c.final) for c in prog.components)
    )


def test_oracle_assertions_examples():
    assert oracle_assertions(build_state_space(load("program3"))) == []
    violations = oracle_assertions(build_state_space(load("init_failed_alt")))
    sites = {str(v.site) for v in violations}
    assert "Y.5" in sites

    prog = load("program2")
    prog = replace(
        prog, annotation={Label("X", "0"): (parse_predicate("true", prog),)}
    )
    assert oracle_assertions(build_state_space(prog)) == []


def test_oracle_postcondition_raw_and_instrumented():
    raw = load("program2", instrument=False)
    ts = build_state_space(raw)
    assert oracle_postcondition(ts, parse_predicate("x == 2", raw))[0]
    inst = build_state_space(load("program2"))
    assert oracle_postcondition(inst, parse_predicate("x == 2", raw))[0]
    ok, state = oracle_postcondition(ts, parse_predicate("x == 1", raw))
    assert not ok and "x=2" in state


def test_oracle_deadlock_free_refinement2():
    assert oracle_deadlock_free(build_state_space(load("init_refinement2")))[0]


def test_determinism():
    for name in ("program3", "init_refinement2", "loops"):
        prog = load(name)
        a = build_state_space(prog)
        b = build_state_space(prog)
        assert a.states == b.states
        assert a.transitions == b.transitions
        assert a.initial == b.initial


def test_pc_projection_isomorphic_to_raw_semantics():
    # instrumentation is conservative: same graph, counters merely visible
    for name in ("program2", "init_simplified", "loops", "gcl_demo"):
        raw = build_state_space(load(name, instrument=False))
        inst = build_state_space(load(name))
        assert raw.states == inst.states  # control vector + data, identical
        assert raw.transitions == inst.transitions
        assert raw.initial == inst.initial


def test_control_state_facts_on_corpus():
    # 1. each component has exactly one active control point (its counter
    #    holds exactly one value of its label domain)
    # 2. at least one active control point: the counter is always defined
    # 3. steps of other components never move a component's counter
    for name in corpus_names():
        prog = load(name)
        ts = build_state_space(prog)
        domains = {c.name: set(label_domain(c)) for c in prog.components}
        for sid in range(len(ts.states)):
            st = ts.states[sid]
            for comp, pc in zip(prog.components, st.pcs):
                assert pc in domains[comp.name], name
        idx = {c.name: i for i, c in enumerate(prog.components)}
        for tr in ts.transitions:
            src = ts.states[tr.source]
            tgt = ts.states[tr.target]
            for comp in prog.components:
                if comp.name != tr.component:
                    assert src.pcs[idx[comp.name]] == tgt.pcs[idx[comp.name]], name


def test_out_of_domain_write_is_reported():
    body = Assign(("x",), (Binary("+", VarRef("x"), IntLit(1)),))
    prog = instrument_counters(
        auto_label(
            Program(
                "overflow",
                eq(VarRef("x"), IntLit(1)),
                (VarDecl("x", "int", 0, 1),),
                (Component("A", body),),
            )
        )
    )
    with pytest.raises(DomainEscapeError):
        build_state_space(prog)


def test_atomic_demonic_enabledness():
    # <if true -> skip [] b -> if false -> skip fi fi> blocks on the inner
    # IF when b holds, so the whole atomic action is disabled there
    from ogcheck.lang import Atomic, GuardedArm, If

    body = If(
        (
            GuardedArm(BoolLit(True), Skip()),
            GuardedArm(VarRef("b"), If((GuardedArm(BoolLit(False), Skip()),))),
        )
    )
    prog = instrument_counters(
        auto_label(
            Program(
                "demonic",
                TRUE,
                (VarDecl("b", "bool"),),
                (Component("A", Atomic(body)),),
            )
        )
    )
    ts = build_state_space(prog)
    for sid in range(len(ts.states)):
        if ts.is_terminal(sid):
            continue
        val = ts.valuation(sid)
        assert ts.enabled[sid]["A"] == (val["b"] is False)
