"""Owicki-Gries obligations on the corpus: LC, GC, invariants, postcondition."""

from __future__ import annotations

import pytest

from helpers import load
from ogcheck.frontend import parse_predicate, print_pred
from ogcheck.lang import actions_by_site, extract_actions
from ogcheck.predicates import Label
from ogcheck.safety import (
    action_precondition,
    all_valid,
    check_annotation,
    check_global,
    check_invariant,
    check_local,
    check_postcondition,
)


def test_action_precondition_bundles_site_and_invariants():
    prog = load("init_refinement2")
    acts = actions_by_site(prog)
    u = action_precondition(prog, acts[Label("Y", "2")])
    text = print_pred(u)
    assert "pc.Y == Y.2" in text
    assert "pc.Y == Y.5 ==> y && pc.X != X.1" in text  # declared invariant


def test_action_precondition_unannotated_site():
    prog = load("program2")
    acts = actions_by_site(prog)
    u = action_precondition(prog, acts[Label("X", "0")])
    assert print_pred(u) == "pc.X == X.0"


def test_action_precondition_program3():
    prog = load("program3")
    acts = actions_by_site(prog)
    u = print_pred(action_precondition(prog, acts[Label("X", "0")]))
    assert "pc.X == X.0" in u
    assert "x == 0 && pc.Y == Y.0 || x == 1 && pc.Y == Y.1" in u


def test_program1_lc_and_gc_valid():
    prog = load("program1")
    assert all_valid(check_local(prog))
    assert all_valid(check_global(prog))


def test_program1_naive_annotation_lc_only():
    prog = load("program1_lc")
    assert all_valid(check_local(prog))
    gc = check_global(prog)
    assert any(not o.valid for o in gc)


def test_program1_wrong_final_constant():
    prog = load("program1")
    # replace X's final assertion by x == 2: LC then fails from {x==0 || x==2}
    site = Label("X", "1")
    annotation = dict(prog.annotation)
    annotation[site] = (parse_predicate("x == 2", prog),)
    from dataclasses import replace

    prog2 = replace(prog, annotation=annotation)
    obs = check_local(prog2)
    bad = [o for o in obs if not o.valid]
    assert bad and any(o.counterexample["x"] == 0 for o in bad)


def test_program3_annotation_valid():
    prog = load("program3")
    obs = check_annotation(prog)
    assert all_valid(obs)


def test_failed_alt_gc_pinpointed():
    prog = load("init_failed_alt")
    assert all_valid(check_local(prog))
    gc = check_global(prog)
    bad = {o.oid for o in gc if not o.valid}
    assert "GC:Y.5#1:X.6" in bad  # pc.X != X.1 at Y.5 against X.6
    ob = next(o for o in gc if o.oid == "GC:Y.5#1:X.6")
    assert ob.counterexample["pc.X"] == Label("X", "6")


def test_gc_true_assertion_always_valid():
    prog = load("program2")
    from dataclasses import replace

    annotation = {Label("X", "0"): (parse_predicate("true", prog),)}
    prog2 = replace(prog, annotation=annotation)
    assert all_valid(check_global(prog2))


def test_check_invariant_examples():
    prog = load("init_refinement2")
    inv8 = parse_predicate("pc.Y == Y.5 ==> y && pc.X != X.1", prog)
    assert all_valid(check_invariant(prog, inv8, name="inv8"))

    weak = parse_predicate("pc.Y == Y.5 ==> y", prog)
    from dataclasses import replace

    bare = replace(prog, invariants=(("weak", weak),))
    obs = check_invariant(bare, weak, name="weak")
    failing = [o for o in obs if not o.valid]
    assert any(o.oid.endswith("X.1") for o in failing)  # y := false breaks it

    assert all_valid(check_invariant(prog, parse_predicate("true", prog)))


def test_check_postcondition_examples():
    prog3 = load("program3")
    assert check_postcondition(prog3, parse_predicate("x == 2", prog3)).valid

    prog1 = load("program1")
    assert check_postcondition(prog1, parse_predicate("x == 3", prog1)).valid

    ob = check_postcondition(prog1, parse_predicate("false", prog1))
    assert not ob.valid and ob.counterexample is not None


def test_check_postcondition_pending_without_final_assertions():
    prog = load("program2")
    ob = check_postcondition(prog, parse_predicate("x == 2", prog))
    assert ob.verdict == "pending"
    assert "X" in ob.note and "Y" in ob.note


def test_loop_invariant_routed_through_do():
    prog = load("loops")
    obs = check_local(prog)
    assert all_valid(obs)
    # the loop-head invariant is checked along both the body and exit paths
    rules = {o.rule for o in obs}
    assert any("C.1[->2]" in r for r in rules)
    assert any("C.1[exit]" in r for r in rules)


def test_missing_loop_invariant_pending():
    prog = load("loops")
    from dataclasses import replace

    annotation = {
        k: v for k, v in prog.annotation.items() if k != Label("C", "1")
    }
    prog2 = replace(prog, annotation=annotation)
    obs = check_local(prog2)
    assert any(o.verdict == "pending" and "loop invariant" in o.note for o in obs)


def test_refinement2_whole_annotation():
    prog = load("init_refinement2")
    obs = check_annotation(prog)
    assert all_valid(obs)
    kinds = {o.kind for o in obs}
    assert kinds == {"LC", "GC", "INV"}


def test_obligation_order_deterministic():
    prog = load("init_refinement2")
    first = [o.oid for o in check_annotation(prog)]
    second = [o.oid for o in check_annotation(prog)]
    assert first == second
