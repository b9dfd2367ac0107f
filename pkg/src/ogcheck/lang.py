"""AST, labelling, program-counter instrumentation, and atomic-action
extraction for the guarded-command multiprogram language.

A program is a set of sequential components over shared finite-domain
variables.  Every atomic action (skip, assignment, coarse-grained atomic
block, IF guard evaluation, DO guard evaluation) carries a label unique
within its component; the component's program counter ranges over those
labels plus one final label.  Instrumentation is implicit: rather than
rewriting the text, it marks the program so that action semantics, wlp,
and the oracle all update the pc at every step, which is equivalent to
superimposing the auxiliary assignments and keeps the operation idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ContractError, LabelError
from .predicates import (
    Domains,
    Expr,
    Label,
    bool_domain,
    free_vars,
    int_domain,
    land,
    pc_is,
    pc_name,
)

# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

SCOPES = ("shared", "private", "local")


@dataclass(frozen=True)
class VarDecl:
    """A declared variable with a finite domain.

    `scope` is one of shared / private / local; private and local carry the
    owning component.  `aux` marks user auxiliary variables, which obey the
    same restrictions as pc variables (never read in guards, never assigned
    into non-auxiliary variables).
    """

    name: str
    kind: str  # 'bool' or 'int'
    lo: int = 0
    hi: int = 0
    scope: str = "shared"
    owner: Optional[str] = None
    aux: bool = False

    def values(self):
        if self.kind == "bool":
            return bool_domain()
        return int_domain(self.lo, self.hi)


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------


class Statement:
    """Base class; `ini`/`fin` are label names, filled in by auto_label.

    Bodies of Atomic stay unlabelled (ini/fin None) by construction.
    """

    __slots__ = ()


@dataclass(frozen=True)
class Skip(Statement):
    ini: Optional[str] = None
    fin: Optional[str] = None


@dataclass(frozen=True)
class Assign(Statement):
    targets: tuple[str, ...] = ()
    exprs: tuple[Expr, ...] = ()
    ini: Optional[str] = None
    fin: Optional[str] = None


@dataclass(frozen=True)
class Seq(Statement):
    first: Statement = None  # type: ignore[assignment]
    second: Statement = None  # type: ignore[assignment]
    ini: Optional[str] = None
    fin: Optional[str] = None


@dataclass(frozen=True)
class Atomic(Statement):
    """Coarse-grained atomic block ⟨S⟩: the body runs in one step and the
    action is enabled only where the body cannot block at an inner IF."""

    body: Statement = None  # type: ignore[assignment]
    ini: Optional[str] = None
    fin: Optional[str] = None


@dataclass(frozen=True)
class GuardedArm:
    guard: Expr = None  # type: ignore[assignment]
    body: Statement = None  # type: ignore[assignment]


@dataclass(frozen=True)
class If(Statement):
    arms: tuple[GuardedArm, ...] = ()
    ini: Optional[str] = None
    fin: Optional[str] = None


@dataclass(frozen=True)
class Do(Statement):
    arms: tuple[GuardedArm, ...] = ()
    ini: Optional[str] = None
    fin: Optional[str] = None


@dataclass(frozen=True)
class Component:
    """A sequential program.  `body` is None for an empty component, whose
    only control point is its final label."""

    name: str
    body: Optional[Statement]
    final: Optional[str] = None  # final label name once labelled

    @property
    def pc_var(self) -> str:
        return pc_name(self.name)

    def initial_label(self) -> str:
        if self.body is not None and self.body.ini is not None:
            return self.body.ini
        if self.final is None:
            raise ContractError(f"component {self.name} is not labelled")
        return self.final


@dataclass(frozen=True)
class Property:
    """A declared requirement; `script` is a proof node for leads-to."""

    name: str
    kind: str  # 'unless' | 'leadsto' | 'postcondition' | 'invariant' | 'deadlockfree'
    p: Optional[Expr] = None
    q: Optional[Expr] = None
    script: Optional[object] = None  # progress.ProofNode


@dataclass(frozen=True)
class Program:
    name: str
    pre: Expr
    decls: tuple[VarDecl, ...]
    components: tuple[Component, ...]
    annotation: dict[Label, tuple[Expr, ...]] = field(default_factory=dict)
    invariants: tuple[tuple[str, Expr], ...] = ()
    properties: tuple[Property, ...] = ()
    instrumented: bool = False

    def component(self, name: str) -> Component:
        for c in self.components:
            if c.name == name:
                return c
        raise ContractError(f"no component named {name!r}")

    def decl(self, name: str) -> VarDecl:
        for d in self.decls:
            if d.name == name:
                return d
        raise ContractError(f"no variable named {name!r}")

    def assertions_at(self, label: Label) -> tuple[Expr, ...]:
        return self.annotation.get(label, ())

    def invariant_exprs(self) -> tuple[Expr, ...]:
        return tuple(p for _, p in self.invariants)


# ---------------------------------------------------------------------------
# Labelling
# ---------------------------------------------------------------------------


def _action_sites(stmt: Statement) -> list[Statement]:
    """Atomic-action nodes in textual order of initial-action occurrence."""
    if isinstance(stmt, Seq):
        return _action_sites(stmt.first) + _action_sites(stmt.second)
    if isinstance(stmt, (Skip, Assign, Atomic)):
        return [stmt]
    if isinstance(stmt, (If, Do)):
        sites = [stmt]
        for arm in stmt.arms:
            sites.extend(_action_sites(arm.body))
        return sites
    raise ContractError(f"unknown statement {stmt!r}")


class _LabelAllocator:
    def __init__(self, component: str, reserved: set[str]):
        self.component = component
        self.reserved = reserved
        self.counter = 1

    def fresh(self) -> str:
        while str(self.counter) in self.reserved:
            self.counter += 1
        name = str(self.counter)
        self.reserved.add(name)
        self.counter += 1
        return name


def label_component(comp: Component) -> tuple[Component, dict[int, Statement]]:
    """Assign labels per the labelled-statement discipline.

    Every action site gets a unique initial label (explicit labels are
    preserved; fresh ones are ordinals in textual order that never collide
    with explicit spellings).  Final labels are structural: the final label
    of the first statement of a sequence is the initial label of the second,
    both IF arms share the IF's final label, and a DO arm's final label is
    the loop head.  Returns the labelled component and a map from id() of
    each original statement node to its labelled replacement.
    """
    mapping: dict[int, Statement] = {}
    if comp.body is None:
        final = comp.final if comp.final is not None else "1"
        return Component(comp.name, None, final=final), mapping

    sites = _action_sites(comp.body)
    if len({id(s) for s in sites}) != len(sites):
        raise LabelError(
            f"component {comp.name} reuses one statement node at two sites"
        )
    explicit: dict[str, int] = {}
    for pos, s in enumerate(sites):
        if s.ini is not None:
            if s.ini in explicit:
                raise LabelError(
                    f"duplicate explicit label {comp.name}.{s.ini} "
                    f"(actions {explicit[s.ini]} and {pos} in textual order)"
                )
            explicit[s.ini] = pos
    reserved = set(explicit)
    if comp.final is not None:
        if comp.final in reserved:
            raise LabelError(
                f"final label {comp.name}.{comp.final} duplicates an action label"
            )
        reserved.add(comp.final)
    alloc = _LabelAllocator(comp.name, reserved)
    assigned: dict[int, str] = {}
    for s in sites:
        assigned[id(s)] = s.ini if s.ini is not None else alloc.fresh()
    final = comp.final if comp.final is not None else alloc.fresh()

    def initial_of(stmt: Statement) -> str:
        if isinstance(stmt, Seq):
            return initial_of(stmt.first)
        return assigned[id(stmt)]

    def rebuild(stmt: Statement, fin: str) -> Statement:
        if isinstance(stmt, Seq):
            mid = initial_of(stmt.second)
            first = rebuild(stmt.first, mid)
            second = rebuild(stmt.second, fin)
            out: Statement = Seq(first, second, ini=first.ini, fin=fin)
        elif isinstance(stmt, (Skip, Assign, Atomic)):
            out = replace(stmt, ini=assigned[id(stmt)], fin=fin)
        elif isinstance(stmt, If):
            arms = tuple(
                GuardedArm(a.guard, rebuild(a.body, fin)) for a in stmt.arms
            )
            out = If(arms, ini=assigned[id(stmt)], fin=fin)
        elif isinstance(stmt, Do):
            head = assigned[id(stmt)]
            arms = tuple(
                GuardedArm(a.guard, rebuild(a.body, head)) for a in stmt.arms
            )
            out = Do(arms, ini=head, fin=fin)
        else:
            raise ContractError(f"unknown statement {stmt!r}")
        mapping[id(stmt)] = out
        return out

    body = rebuild(comp.body, final)
    return Component(comp.name, body, final=final), mapping


def auto_label(program: Program) -> Program:
    """Label every component; explicit labels win and stay unique."""
    comps = tuple(label_component(c)[0] for c in program.components)
    return replace(program, components=comps)


def is_labelled(comp: Component) -> bool:
    if comp.final is None:
        return False
    if comp.body is None:
        return True

    def ok(s: Statement) -> bool:
        if s.ini is None or s.fin is None:
            return False
        if isinstance(s, Seq):
            return ok(s.first) and ok(s.second)
        if isinstance(s, (If, Do)):
            return all(ok(a.body) for a in s.arms)
        return True

    return ok(comp.body)


def label_domain(comp: Component) -> tuple[str, ...]:
    """All control points of a component in textual order, final last."""
    if comp.final is None:
        raise ContractError(f"component {comp.name} is not labelled")
    names: list[str] = []
    if comp.body is not None:
        for s in _action_sites(comp.body):
            names.append(s.ini)  # type: ignore[arg-type]
    names.append(comp.final)
    return tuple(names)


# ---------------------------------------------------------------------------
# Instrumentation
# ---------------------------------------------------------------------------


def instrument_counters(program: Program) -> Program:
    """Superimpose the pc updates: every action of a component also moves
    that component's counter to the action's final or target label.

    The updates are implicit (actions, wlp, the oracle, and the printer all
    honour them), so instrumenting twice equals instrumenting once.
    """
    for c in program.components:
        if not is_labelled(c):
            raise ContractError(f"component {c.name} must be labelled first")
    if program.instrumented:
        return program
    return replace(program, instrumented=True)


def initial_condition(program: Program) -> Expr:
    """The precondition conjoined with every counter at its initial label."""
    parts: list[Expr] = [program.pre]
    if program.instrumented:
        for c in program.components:
            parts.append(pc_is(c.name, c.initial_label()))
    return land(*parts)


def program_domains(program: Program) -> Domains:
    mapping = {d.name: d.values() for d in program.decls}
    if program.instrumented:
        for c in program.components:
            mapping[c.pc_var] = tuple(
                Label(c.name, n) for n in label_domain(c)
            )
    return Domains(mapping)


# ---------------------------------------------------------------------------
# Atomic actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtomicAction:
    component: str
    label: str  # initial label

    @property
    def site(self) -> Label:
        return Label(self.component, self.label)


@dataclass(frozen=True)
class SkipAction(AtomicAction):
    target: str = ""


@dataclass(frozen=True)
class AssignAction(AtomicAction):
    assignments: tuple[tuple[str, Expr], ...] = ()
    target: str = ""


@dataclass(frozen=True)
class AtomicBlockAction(AtomicAction):
    body: Statement = None  # type: ignore[assignment]
    target: str = ""


@dataclass(frozen=True)
class IfEvalAction(AtomicAction):
    """Guard evaluation of an IF: enabled iff some guard holds, one outcome
    per true guard; blocked otherwise."""

    branches: tuple[tuple[Expr, str], ...] = ()


@dataclass(frozen=True)
class DoEvalAction(AtomicAction):
    """Guard evaluation of a DO: always enabled; the exit branch (all guards
    false) moves the counter past the loop."""

    branches: tuple[tuple[Expr, str], ...] = ()
    exit_target: str = ""


def extract_actions(program: Program) -> list[AtomicAction]:
    """One action per non-final label, in textual order per component."""
    if not program.instrumented:
        raise ContractError("extract_actions needs an instrumented program")
    actions: list[AtomicAction] = []
    for comp in program.components:
        if comp.body is None:
            continue
        for site in _action_sites(comp.body):
            actions.append(_action_of(comp.name, site))
    return actions


def _action_of(component: str, site: Statement) -> AtomicAction:
    assert site.ini is not None and site.fin is not None
    if isinstance(site, Skip):
        return SkipAction(component, site.ini, target=site.fin)
    if isinstance(site, Assign):
        return AssignAction(
            component,
            site.ini,
            assignments=tuple(zip(site.targets, site.exprs)),
            target=site.fin,
        )
    if isinstance(site, Atomic):
        return AtomicBlockAction(component, site.ini, body=site.body, target=site.fin)
    if isinstance(site, If):
        return IfEvalAction(
            component,
            site.ini,
            branches=tuple((a.guard, a.body.ini) for a in site.arms),  # type: ignore[misc]
        )
    if isinstance(site, Do):
        return DoEvalAction(
            component,
            site.ini,
            branches=tuple((a.guard, a.body.ini) for a in site.arms),  # type: ignore[misc]
            exit_target=site.fin,
        )
    raise ContractError(f"not an action site: {site!r}")


def actions_by_site(program: Program) -> dict[Label, AtomicAction]:
    return {a.site: a for a in extract_actions(program)}


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    site: str  # e.g. 'X.2' or 'X' or 'program'
    message: str

    def __str__(self) -> str:
        return f"{self.site}: {self.message}"


def _stmt_reads(stmt: Statement) -> set[str]:
    if isinstance(stmt, Skip):
        return set()
    if isinstance(stmt, Assign):
        out: set[str] = set()
        for e in stmt.exprs:
            out |= free_vars(e)
        return out
    if isinstance(stmt, Seq):
        return _stmt_reads(stmt.first) | _stmt_reads(stmt.second)
    if isinstance(stmt, Atomic):
        return _stmt_reads(stmt.body)
    if isinstance(stmt, (If, Do)):
        out = set()
        for a in stmt.arms:
            out |= free_vars(a.guard) | _stmt_reads(a.body)
        return out
    return set()


def _stmt_writes(stmt: Statement) -> set[str]:
    if isinstance(stmt, Assign):
        return set(stmt.targets)
    if isinstance(stmt, Seq):
        return _stmt_writes(stmt.first) | _stmt_writes(stmt.second)
    if isinstance(stmt, Atomic):
        return _stmt_writes(stmt.body)
    if isinstance(stmt, (If, Do)):
        out: set[str] = set()
        for a in stmt.arms:
            out |= _stmt_writes(a.body)
        return out
    return set()


def _guards_of(stmt: Statement) -> list[tuple[str, Expr]]:
    """(site, guard) pairs for every guard in the statement."""
    if isinstance(stmt, Seq):
        return _guards_of(stmt.first) + _guards_of(stmt.second)
    if isinstance(stmt, Atomic):
        return _guards_of(stmt.body)
    if isinstance(stmt, (If, Do)):
        here = stmt.ini or "?"
        out = [(here, a.guard) for a in stmt.arms]
        for a in stmt.arms:
            out.extend(_guards_of(a.body))
        return out
    return []


def validate_wellformed(program: Program) -> list[Diagnostic]:
    """Scoping, assignment-target distinctness, atomic-body restrictions,
    auxiliary-variable discipline, and label uniqueness.  Empty iff the
    program is well-formed."""
    diags: list[Diagnostic] = []
    comp_names = [c.name for c in program.components]
    if len(set(comp_names)) != len(comp_names):
        diags.append(Diagnostic("program", "duplicate component names"))

    seen_vars: set[str] = set()
    aux_vars = {d.name for d in program.decls if d.aux}
    for d in program.decls:
        if d.name in seen_vars:
            diags.append(Diagnostic("program", f"variable {d.name!r} declared twice"))
        seen_vars.add(d.name)
        if d.name.startswith("pc."):
            diags.append(
                Diagnostic("program", f"{d.name!r} is a reserved counter name")
            )
        if d.kind == "int" and d.lo > d.hi:
            diags.append(
                Diagnostic("program", f"empty domain [{d.lo}..{d.hi}] for {d.name!r}")
            )
        if d.scope in ("local", "private") and d.owner not in comp_names:
            diags.append(
                Diagnostic(
                    "program",
                    f"{d.scope} variable {d.name!r} names unknown owner {d.owner!r}",
                )
            )

    for comp in program.components:
        if comp.body is None:
            continue
        _check_stmt(program, comp, comp.body, diags, in_atomic=False)
        # auxiliary variables may not appear in any guard
        for site, guard in _guards_of(comp.body):
            bad = sorted((free_vars(guard) & aux_vars) | _pc_refs(guard))
            for name in bad:
                diags.append(
                    Diagnostic(
                        f"{comp.name}.{site}",
                        f"auxiliary variable {name!r} used in a guard",
                    )
                )
        # label uniqueness within the component
        seen: set[str] = set()
        for s in _action_sites(comp.body):
            if s.ini is not None:
                if s.ini in seen:
                    diags.append(
                        Diagnostic(
                            f"{comp.name}.{s.ini}",
                            "label used by two actions of the component",
                        )
                    )
                seen.add(s.ini)
        if comp.final is not None and comp.final in seen:
            diags.append(
                Diagnostic(
                    f"{comp.name}.{comp.final}",
                    "final label duplicates an action label",
                )
            )

    _check_scopes(program, diags)
    return diags


def _pc_refs(e: Expr) -> set[str]:
    return {n for n in free_vars(e) if n.startswith("pc.")}


def _check_stmt(
    program: Program,
    comp: Component,
    stmt: Statement,
    diags: list[Diagnostic],
    in_atomic: bool,
) -> None:
    here = f"{comp.name}.{stmt.ini}" if stmt.ini else comp.name
    if isinstance(stmt, Assign):
        if len(set(stmt.targets)) != len(stmt.targets):
            diags.append(
                Diagnostic(here, "multiple assignment targets must be distinct")
            )
        aux_vars = {d.name for d in program.decls if d.aux}
        for tgt, rhs in zip(stmt.targets, stmt.exprs):
            if tgt not in aux_vars and (free_vars(rhs) & aux_vars):
                diags.append(
                    Diagnostic(
                        here,
                        f"auxiliary data flows into non-auxiliary {tgt!r}",
                    )
                )
    elif isinstance(stmt, Seq):
        _check_stmt(program, comp, stmt.first, diags, in_atomic)
        _check_stmt(program, comp, stmt.second, diags, in_atomic)
    elif isinstance(stmt, Atomic):
        if in_atomic:
            diags.append(Diagnostic(here, "atomic blocks cannot nest"))
        if _contains_do(stmt.body):
            diags.append(
                Diagnostic(here, "atomic body must be loop-free (no DO inside)")
            )
        _check_stmt(program, comp, stmt.body, diags, in_atomic=True)
    elif isinstance(stmt, (If, Do)):
        if isinstance(stmt, Do) and in_atomic:
            diags.append(Diagnostic(here, "DO cannot occur inside an atomic body"))
        for a in stmt.arms:
            _check_stmt(program, comp, a.body, diags, in_atomic)


def _contains_do(stmt: Statement) -> bool:
    if isinstance(stmt, Do):
        return True
    if isinstance(stmt, Seq):
        return _contains_do(stmt.first) or _contains_do(stmt.second)
    if isinstance(stmt, Atomic):
        return _contains_do(stmt.body)
    if isinstance(stmt, If):
        return any(_contains_do(a.body) for a in stmt.arms)
    return False


def _check_scopes(program: Program, diags: list[Diagnostic]) -> None:
    for d in program.decls:
        if d.scope == "shared":
            continue
        for comp in program.components:
            if comp.name == d.owner or comp.body is None:
                continue
            writes = _stmt_writes(comp.body)
            reads = _stmt_reads(comp.body)
            if d.name in writes:
                diags.append(
                    Diagnostic(
                        comp.name,
                        f"writes {d.name!r}, {d.scope} to component {d.owner}",
                    )
                )
            if d.scope == "local" and d.name in reads:
                diags.append(
                    Diagnostic(
                        comp.name,
                        f"reads {d.name!r}, local to component {d.owner}",
                    )
                )
