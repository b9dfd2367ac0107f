"""Command-line entry point.

Subcommands:
  check       validate, then discharge safety and progress obligations
  oracle      semantic verdicts for the declared properties
  instrument  print the labelled program with explicit counter updates
  obligations flat obligation report for one property
  transform   apply a guard-conjunction split and show its side conditions

Exit codes: 0 success, 1 verification failure, 2 input error, 3 resource
cap exceeded.  `--max-states` (or OGP_MAX_STATES) bounds the oracle.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import OgpError, ParseError, ResolveError, ResourceCapError
from .frontend import (
    PROGRAM_SUFFIX,
    PROOF_SUFFIX,
    parse,
    parse_predicate,
    parse_proofs,
    print_program,
)
from .lang import (
    Program,
    auto_label,
    instrument_counters,
    validate_wellformed,
)
from .oracle import (
    build_state_space,
    oracle_assertions,
    oracle_deadlock_free,
    oracle_invariant,
    oracle_leadsto,
    oracle_postcondition,
    oracle_unless,
)
from .predicates import Label
from .progress import obligations_report
from .report import render_obligations, summary_line
from .safety import all_valid, check_annotation
from .transform import SplitRequest, guard_conjunction_split

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_CAP = 3

DEFAULT_CAP = 1_000_000


@dataclass
class RunConfig:
    files: list[Path]
    command: str
    max_states: int = DEFAULT_CAP
    machine: bool = False
    property_filter: Optional[str] = None
    split: Optional[str] = None
    hoist: Optional[str] = None
    fail_on_invalid: bool = True


def _load(config: RunConfig) -> Program:
    programs = [p for p in config.files if p.suffix == PROGRAM_SUFFIX]
    proofs = [p for p in config.files if p.suffix == PROOF_SUFFIX]
    if len(programs) != 1:
        raise ResolveError(
            f"expected exactly one {PROGRAM_SUFFIX} file, got {len(programs)}"
        )
    source = parse(programs[0].read_text(encoding="utf-8"), str(programs[0]))
    program = source.program
    for extra in proofs:
        program = parse_proofs(
            extra.read_text(encoding="utf-8"), program, str(extra)
        )
    return program


def _selected(program: Program, config: RunConfig):
    props = program.properties
    if config.property_filter is not None:
        props = tuple(p for p in props if p.name == config.property_filter)
        if not props:
            raise ResolveError(f"no property named {config.property_filter!r}")
    return props


def cmd_check(config: RunConfig, out) -> int:
    program = _load(config)
    diags = validate_wellformed(program)
    if diags:
        for d in diags:
            print(f"ill-formed: {d}", file=out)
        return EXIT_INPUT
    program = instrument_counters(program)
    failures = 0
    pendings = 0

    obs = check_annotation(program)
    print(summary_line("annotation", "valid" if all_valid(obs) else "invalid"), file=out)
    print(render_obligations(obs, config.machine), file=out, end="")
    failures += sum(1 for o in obs if o.verdict == "invalid")
    pendings += sum(1 for o in obs if o.verdict == "pending")
    safety_ok = all_valid(obs)

    for prop in _selected(program, config):
        if prop.kind == "deadlockfree":
            print(
                summary_line(prop.name, "oracle-only (use the oracle subcommand)"),
                file=out,
            )
            continue
        rep = obligations_report(program, prop)
        verdict = rep.verdict
        if prop.kind in ("unless", "leadsto") and not safety_ok:
            verdict = "pending"
            print(
                summary_line(
                    prop.name, "pending (annotation failed; progress relies on it)"
                ),
                file=out,
            )
        else:
            print(summary_line(prop.name, verdict), file=out)
        print(render_obligations(rep.obligations, config.machine), file=out, end="")
        failures += sum(1 for o in rep.obligations if o.verdict == "invalid")
        if verdict == "pending":
            pendings += 1

    if failures or pendings:
        print(
            f"result: {failures} invalid, {pendings} pending", file=out
        )
        return EXIT_FAILED if config.fail_on_invalid else EXIT_OK
    print("result: all obligations valid", file=out)
    return EXIT_OK


def cmd_oracle(config: RunConfig, out) -> int:
    program = _load(config)
    program = instrument_counters(program)
    ts = build_state_space(program, cap=config.max_states)
    print(f"states: {len(ts.states)}", file=out)
    ok_all = True

    violations = oracle_assertions(ts)
    print(summary_line("assertions", "hold" if not violations else "violated"), file=out)
    for v in violations:
        print(f"  {v.site}: fails at [{v.state}]", file=out)
        ok_all = False

    for prop in _selected(program, config):
        if prop.kind == "leadsto":
            ok, cx = oracle_leadsto(ts, prop.p, prop.q)
        elif prop.kind == "unless":
            ok, cx = oracle_unless(ts, prop.p, prop.q)
        elif prop.kind == "postcondition":
            ok, state = oracle_postcondition(ts, prop.p)
            cx = None if ok else state
        elif prop.kind == "invariant":
            ok, state = oracle_invariant(ts, prop.p)
            cx = None if ok else state
        else:  # deadlockfree
            ok, cx = oracle_deadlock_free(ts)
        print(summary_line(prop.name, "true" if ok else "false"), file=out)
        if not ok and cx is not None:
            text = cx if isinstance(cx, str) else cx.render()
            print("  " + text.replace("\n", "\n  "), file=out)
        ok_all = ok_all and ok
    for name, inv in program.invariants:
        ok, state = oracle_invariant(ts, inv)
        print(summary_line(f"invariant {name}", "true" if ok else "false"), file=out)
        if not ok:
            print(f"  fails at [{state}]", file=out)
        ok_all = ok_all and ok
    return EXIT_OK if ok_all or not config.fail_on_invalid else EXIT_FAILED


def cmd_instrument(config: RunConfig, out) -> int:
    program = _load(config)
    program = instrument_counters(program)
    print(print_program(program), file=out, end="")
    return EXIT_OK


def cmd_obligations(config: RunConfig, out) -> int:
    program = _load(config)
    program = instrument_counters(program)
    props = _selected(program, config)
    bad = 0
    for prop in props:
        rep = obligations_report(program, prop)
        print(summary_line(prop.name, rep.verdict), file=out)
        if config.machine:
            print("", file=out)
        print(render_obligations(rep.obligations, config.machine, verbose=True),
              file=out, end="")
        bad += sum(1 for o in rep.obligations if o.verdict == "invalid")
    return EXIT_FAILED if bad and config.fail_on_invalid else EXIT_OK


def cmd_transform(config: RunConfig, out) -> int:
    program = _load(config)
    program = instrument_counters(program)
    if config.split is None or config.hoist is None:
        raise ResolveError("transform needs --split LABEL and --hoist CONJUNCT")
    comp, _, label = config.split.partition(".")
    if not label:
        raise ResolveError("--split takes a component-qualified label like A.1")
    hoist = parse_predicate(config.hoist, program)
    fresh = _fresh_label(program, comp)
    after, side = guard_conjunction_split(
        program, SplitRequest(Label(comp, label), hoist, fresh)
    )
    print(print_program(after), file=out, end="")
    print("", file=out)
    print("side conditions (hoisted conjunct globally correct):", file=out)
    print(render_obligations(side, config.machine), file=out, end="")
    if all(o.valid for o in side):
        print("side conditions: valid", file=out)
        return EXIT_OK
    print("side conditions: invalid", file=out)
    return EXIT_FAILED if config.fail_on_invalid else EXIT_OK


def _fresh_label(program: Program, comp_name: str) -> str:
    from .lang import label_domain

    used = set(label_domain(program.component(comp_name)))
    if "k" not in used:
        return "k"
    n = 1
    while f"k{n}" in used:
        n += 1
    return f"k{n}"


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ogcheck",
        description=(
            "Verify concurrent guarded-command programs: interference-free "
            "annotations, unless/leads-to progress proofs, and an "
            "explicit-state oracle under weak fairness."
        ),
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("check", "discharge safety and progress obligations"),
        ("oracle", "explicit-state semantic verdicts"),
        ("instrument", "print the program with explicit counter updates"),
        ("obligations", "flat obligation report for properties"),
        ("transform", "apply a guard-conjunction split"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("files", nargs="+", type=Path)
        p.add_argument(
            "--max-states",
            type=int,
            default=int(os.environ.get("OGP_MAX_STATES", DEFAULT_CAP)),
        )
        p.add_argument(
            "--format", choices=("human", "machine"), default="human"
        )
        p.add_argument("--property", dest="property_filter", default=None)
        if name == "transform":
            p.add_argument("--split", required=True)
            p.add_argument("--hoist", required=True)
    return ap


def main(argv: Optional[list[str]] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    args = build_arg_parser().parse_args(argv)
    config = RunConfig(
        files=list(args.files),
        command=args.command,
        max_states=args.max_states,
        machine=args.format == "machine",
        property_filter=args.property_filter,
        split=getattr(args, "split", None),
        hoist=getattr(args, "hoist", None),
    )
    if config.max_states <= 0:
        print("error: --max-states must be positive", file=out)
        return EXIT_INPUT
    handlers = {
        "check": cmd_check,
        "oracle": cmd_oracle,
        "instrument": cmd_instrument,
        "obligations": cmd_obligations,
        "transform": cmd_transform,
    }
    try:
        return handlers[config.command](config, out)
    except ResourceCapError as e:
        print(f"resource cap exceeded: {e}", file=out)
        return EXIT_CAP
    except FileNotFoundError as e:
        print(f"error: {e}", file=out)
        return EXIT_INPUT
    except (ParseError, ResolveError) as e:
        print(f"error: {e}", file=out)
        return EXIT_INPUT
    except OgpError as e:
        print(f"error: {e}", file=out)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
