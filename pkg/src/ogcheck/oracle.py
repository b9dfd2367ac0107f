"""Explicit-state operational semantics with weak fairness: the semantic
ground truth that every proof-theoretic verdict is cross-checked against.

States pair a control vector (one label per component) with a data
valuation.  The state space is built breadth-first from every initial
valuation; expansion order is canonical, so two builds of the same program
are identical.  Maximal traces include terminated and deadlocked finite
runs, so a deadlock that avoids Q falsifies P ~> Q.

Weak fairness is per component: the single candidate action at a
component's control point may not stay enabled forever without running.
P ~> Q therefore fails exactly when some reachable P-state that lacks Q
can either reach a Q-free dead end, or a Q-free cycle in which every
component either takes a step or is disabled at some point.  Cycle
detection is Tarjan over the Q-free subgraph with that per-component
justice check evaluated on each strongly connected component, refined to
an explicit certificate cycle for the counterexample.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .errors import ContractError, DomainEscapeError, ResourceCapError
from .lang import (
    Assign,
    Atomic,
    AtomicAction,
    AssignAction,
    AtomicBlockAction,
    Do,
    DoEvalAction,
    If,
    IfEvalAction,
    Program,
    Seq,
    Skip,
    SkipAction,
    Statement,
    actions_by_site,
    is_labelled,
)
from .predicates import Expr, Label, Valuation, Value, evaluate

DEFAULT_STATE_CAP = 1_000_000


@dataclass(frozen=True)
class GlobalState:
    """Control vector plus data values, both in declaration order."""

    pcs: tuple[str, ...]
    data: tuple[Value, ...]


@dataclass(frozen=True)
class Transition:
    source: int
    component: str
    label: str
    target: int


@dataclass
class TransitionSystem:
    program: Program
    var_names: tuple[str, ...]
    states: list[GlobalState]
    initial: list[int]
    transitions: list[Transition]
    succ: list[list[Transition]] = field(default_factory=list)
    enabled: list[dict[str, bool]] = field(default_factory=list)

    def valuation(self, sid: int) -> Valuation:
        """Full valuation for predicate evaluation; counters are visible
        only on instrumented programs."""
        st = self.states[sid]
        v: Valuation = dict(zip(self.var_names, st.data))
        if self.program.instrumented:
            for comp, pc in zip(self.program.components, st.pcs):
                v[f"pc.{comp.name}"] = Label(comp.name, pc)
        return v

    def holds(self, p: Expr, sid: int) -> bool:
        return bool(evaluate(p, self.valuation(sid)))

    def is_terminal(self, sid: int) -> bool:
        st = self.states[sid]
        return all(
            pc == comp.final
            for comp, pc in zip(self.program.components, st.pcs)
        )

    def has_enabled(self, sid: int) -> bool:
        return any(self.enabled[sid].values())

    def describe_state(self, sid: int) -> str:
        st = self.states[sid]
        parts = [
            f"pc.{c.name}={c.name}.{pc}"
            for c, pc in zip(self.program.components, st.pcs)
        ]
        parts += [
            f"{n}={_fmt_value(v)}" for n, v in zip(self.var_names, st.data)
        ]
        return " ".join(parts)


def _fmt_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


# ---------------------------------------------------------------------------
# Big-step execution of loop-free atomic bodies
# ---------------------------------------------------------------------------

BLOCKED = object()


def exec_body(stmt: Statement, val: Valuation) -> list[object]:
    """All outcomes of one run of a loop-free body: final valuations, with
    BLOCKED recorded where an inner IF has no true guard.  The surrounding
    atomic action is enabled only when no outcome is BLOCKED, i.e. the body
    is guaranteed to complete from this state."""
    if isinstance(stmt, Skip):
        return [dict(val)]
    if isinstance(stmt, Assign):
        new = dict(val)
        rhs = [evaluate(e, val) for e in stmt.exprs]
        for name, v in zip(stmt.targets, rhs):
            new[name] = v
        return [new]
    if isinstance(stmt, Seq):
        out: list[object] = []
        for first in exec_body(stmt.first, val):
            if first is BLOCKED:
                out.append(BLOCKED)
            else:
                out.extend(exec_body(stmt.second, first))  # type: ignore[arg-type]
        return out
    if isinstance(stmt, Atomic):
        return exec_body(stmt.body, val)
    if isinstance(stmt, If):
        open_arms = [a for a in stmt.arms if evaluate(a.guard, val)]
        if not open_arms:
            return [BLOCKED]
        out = []
        for a in open_arms:
            out.extend(exec_body(a.body, val))
        return out
    if isinstance(stmt, Do):
        raise ContractError("atomic bodies are loop-free")
    raise ContractError(f"unknown statement {stmt!r}")


# ---------------------------------------------------------------------------
# Building the state space
# ---------------------------------------------------------------------------


def _action_outcomes(
    ts_vars: tuple[str, ...],
    allowed: dict[str, frozenset],
    action: AtomicAction,
    comp_index: int,
    state: GlobalState,
    val: Valuation,
) -> list[GlobalState]:
    """Successor states of one action from one state; empty iff disabled."""

    def with_data(new_val: Valuation, pc_target: str) -> GlobalState:
        data = []
        for name in ts_vars:
            v = new_val[name]
            if v not in allowed[name]:
                raise DomainEscapeError(
                    f"assignment drove {name!r} to {v!r}, outside its domain, "
                    f"at action {action.site}"
                )
            data.append(v)
        pcs = list(state.pcs)
        pcs[comp_index] = pc_target
        return GlobalState(tuple(pcs), tuple(data))

    if isinstance(action, SkipAction):
        return [with_data(val, action.target)]
    if isinstance(action, AssignAction):
        new = dict(val)
        rhs = [evaluate(e, val) for _, e in action.assignments]
        for (name, _), v in zip(action.assignments, rhs):
            new[name] = v
        return [with_data(new, action.target)]
    if isinstance(action, AtomicBlockAction):
        outcomes = exec_body(action.body, val)
        if any(o is BLOCKED for o in outcomes):
            return []  # enabled only if the body cannot block
        seen = []
        out = []
        for o in outcomes:
            s = with_data(o, action.target)  # type: ignore[arg-type]
            if s not in seen:
                seen.append(s)
                out.append(s)
        return out
    if isinstance(action, IfEvalAction):
        out = []
        for guard, tgt in action.branches:
            if evaluate(guard, val):
                out.append(with_data(val, tgt))
        return out
    if isinstance(action, DoEvalAction):
        out = []
        any_true = False
        for guard, tgt in action.branches:
            if evaluate(guard, val):
                any_true = True
                out.append(with_data(val, tgt))
        if not any_true:
            out.append(with_data(val, action.exit_target))
        return out
    raise ContractError(f"unknown action {action!r}")


def build_state_space(program: Program, cap: int = DEFAULT_STATE_CAP) -> TransitionSystem:
    """BFS over all interleavings from every initial valuation."""
    for c in program.components:
        if not is_labelled(c):
            raise ContractError(f"component {c.name} must be labelled")
    var_names = tuple(d.name for d in program.decls)
    decls_by_name = {d.name: d for d in program.decls}
    allowed = {d.name: frozenset(d.values()) for d in program.decls}
    by_site = actions_by_site(program) if program.instrumented else _raw_actions(program)

    init_pcs = tuple(c.initial_label() for c in program.components)
    initial_states: list[GlobalState] = []
    pools = [decls_by_name[n].values() for n in var_names]
    for combo in itertools.product(*pools):
        val: Valuation = dict(zip(var_names, combo))
        if program.instrumented:
            for comp, pc in zip(program.components, init_pcs):
                val[f"pc.{comp.name}"] = Label(comp.name, pc)
        if evaluate(program.pre, val):
            initial_states.append(GlobalState(init_pcs, combo))

    ts = TransitionSystem(program, var_names, [], [], [])
    index: dict[GlobalState, int] = {}

    def intern(s: GlobalState) -> int:
        sid = index.get(s)
        if sid is None:
            if len(ts.states) >= cap:
                raise ResourceCapError(
                    f"state cap exceeded ({cap}); frontier holds {len(frontier)}",
                    size=len(ts.states),
                )
            sid = len(ts.states)
            index[s] = sid
            ts.states.append(s)
            ts.succ.append([])
            ts.enabled.append({})
        return sid

    frontier: list[int] = []
    for s in initial_states:
        sid = intern(s)
        if sid not in ts.initial:
            ts.initial.append(sid)
            frontier.append(sid)

    head = 0
    while head < len(frontier):
        sid = frontier[head]
        head += 1
        state = ts.states[sid]
        val = ts.valuation(sid)
        for ci, comp in enumerate(program.components):
            pc = state.pcs[ci]
            if pc == comp.final:
                ts.enabled[sid][comp.name] = False
                continue
            action = by_site[Label(comp.name, pc)]
            succs = _action_outcomes(var_names, allowed, action, ci, state, val)
            ts.enabled[sid][comp.name] = bool(succs)
            for s2 in succs:
                known = s2 in index
                tid = intern(s2)
                tr = Transition(sid, comp.name, pc, tid)
                ts.transitions.append(tr)
                ts.succ[sid].append(tr)
                if not known:
                    frontier.append(tid)
    return ts


def _raw_actions(program: Program) -> dict[Label, AtomicAction]:
    """Actions of a labelled but uninstrumented program: same transitions,
    counters just not visible to predicates."""
    from dataclasses import replace as _replace

    inst = _replace(program, instrumented=True)
    return actions_by_site(inst)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    component: str
    label: str
    state: str  # rendered target state


@dataclass(frozen=True)
class TraceCounterexample:
    """Stem from an initial state; `cycle` is empty for a dead-end trace."""

    stem: tuple[Step, ...]
    cycle: tuple[Step, ...]
    note: str

    def render(self) -> str:
        lines = [self.note]
        for st in self.stem:
            lines.append(f"  {st.component}.{st.label} -> {st.state}")
        if self.cycle:
            lines.append("  cycle:")
            for st in self.cycle:
                lines.append(f"    {st.component}.{st.label} -> {st.state}")
        return "\n".join(lines)


def oracle_unless(
    ts: TransitionSystem, p: Expr, q: Expr
) -> tuple[bool, Optional[TraceCounterexample]]:
    """Every transition out of a reachable (P && !Q)-state lands in P || Q."""
    for sid in range(len(ts.states)):
        if not (ts.holds(p, sid) and not ts.holds(q, sid)):
            continue
        for tr in ts.succ[sid]:
            if not (ts.holds(p, tr.target) or ts.holds(q, tr.target)):
                stem = _path_from_initial(ts, sid)
                stem.append(
                    Step(tr.component, tr.label, ts.describe_state(tr.target))
                )
                return False, TraceCounterexample(
                    tuple(stem),
                    (),
                    f"step {tr.component}.{tr.label} leaves P without establishing Q "
                    f"from state [{ts.describe_state(sid)}]",
                )
    return True, None


def oracle_leadsto(
    ts: TransitionSystem, p: Expr, q: Expr
) -> tuple[bool, Optional[TraceCounterexample]]:
    """Every weakly fair maximal run satisfies: always (P implies eventually Q)."""
    starts = [
        sid
        for sid in range(len(ts.states))
        if ts.holds(p, sid) and not ts.holds(q, sid)
    ]
    if not starts:
        return True, None
    in_region = [not ts.holds(q, sid) for sid in range(len(ts.states))]

    # Q-avoiding reachability inside the region, from any P-start
    reach: set[int] = set()
    stack = [sid for sid in starts if in_region[sid]]
    parent: dict[int, Transition] = {}
    while stack:
        sid = stack.pop()
        if sid in reach:
            continue
        reach.add(sid)
        for tr in ts.succ[sid]:
            if in_region[tr.target] and tr.target not in reach:
                parent[tr.target] = tr
                stack.append(tr.target)

    # (a) dead ends: no enabled action at a Q-free reachable state
    for sid in sorted(reach):
        if not ts.has_enabled(sid):
            why = "terminated" if ts.is_terminal(sid) else "deadlocked"
            stem = _stem_to(ts, starts, parent, sid)
            return False, TraceCounterexample(
                tuple(stem),
                (),
                f"{why} in a Q-free state [{ts.describe_state(sid)}] "
                "reachable from a P-state",
            )

    # (b) weakly fair Q-free cycles
    sccs = _tarjan(ts, reach, in_region)
    comp_names = [c.name for c in ts.program.components]
    for scc in sccs:
        scc_set = set(scc)
        internal = [
            tr
            for sid in scc
            for tr in ts.succ[sid]
            if in_region[tr.target] and tr.target in scc_set
        ]
        if not internal:
            continue  # trivial SCC, no cycle
        fair = True
        for name in comp_names:
            executes = any(tr.component == name for tr in internal)
            disabled = any(not ts.enabled[sid][name] for sid in scc)
            if not (executes or disabled):
                fair = False
                break
        if fair:
            cycle = _certificate_cycle(ts, scc_set, internal, comp_names)
            stem = _stem_to(ts, starts, parent, cycle[0].source)
            steps = tuple(
                Step(tr.component, tr.label, ts.describe_state(tr.target))
                for tr in cycle
            )
            return False, TraceCounterexample(
                tuple(stem),
                steps,
                "weakly fair Q-free cycle (every component steps or is "
                "disabled within it)",
            )
    return True, None


def _stem_to(
    ts: TransitionSystem,
    starts: list[int],
    parent: dict[int, Transition],
    sid: int,
) -> list[Step]:
    """Initial state to a P-start, then recorded parents to `sid`."""
    chain: list[Transition] = []
    cur = sid
    while cur not in starts and cur in parent:
        tr = parent[cur]
        chain.append(tr)
        cur = tr.source
    prefix = _path_from_initial(ts, cur)
    return prefix + [
        Step(tr.component, tr.label, ts.describe_state(tr.target))
        for tr in reversed(chain)
    ]


def _path_from_initial(ts: TransitionSystem, sid: int) -> list[Step]:
    """BFS path initial -> sid over the full graph."""
    if sid in ts.initial:
        return [Step("-", "init", ts.describe_state(sid))]
    seen = set(ts.initial)
    par: dict[int, Transition] = {}
    queue = list(ts.initial)
    head = 0
    while head < len(queue):
        cur = queue[head]
        head += 1
        for tr in ts.succ[cur]:
            if tr.target not in seen:
                seen.add(tr.target)
                par[tr.target] = tr
                if tr.target == sid:
                    head = len(queue)
                    break
                queue.append(tr.target)
    chain: list[Transition] = []
    cur = sid
    while cur in par:
        chain.append(par[cur])
        cur = par[cur].source
    steps = [Step("-", "init", ts.describe_state(cur))]
    steps.extend(
        Step(tr.component, tr.label, ts.describe_state(tr.target))
        for tr in reversed(chain)
    )
    return steps


def _tarjan(
    ts: TransitionSystem, nodes: set[int], in_region: list[bool]
) -> list[list[int]]:
    """Iterative Tarjan restricted to `nodes` and region-internal edges."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = itertools.count()

    for root in sorted(nodes):
        if root in index:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        while work:
            sid, ei = work[-1]
            if ei == 0:
                index[sid] = low[sid] = next(counter)
                stack.append(sid)
                on_stack.add(sid)
            edges = [
                tr.target
                for tr in ts.succ[sid]
                if tr.target in nodes and in_region[tr.target]
            ]
            advanced = False
            while ei < len(edges):
                tgt = edges[ei]
                ei += 1
                if tgt not in index:
                    work[-1] = (sid, ei)
                    work.append((tgt, 0))
                    advanced = True
                    break
                if tgt in on_stack:
                    low[sid] = min(low[sid], index[tgt])
            if advanced:
                continue
            work.pop()
            if low[sid] == index[sid]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    scc.append(w)
                    if w == sid:
                        break
                sccs.append(sorted(scc))
            if work:
                parent_sid, _ = work[-1]
                low[parent_sid] = min(low[parent_sid], low[sid])
    return sccs


def _certificate_cycle(
    ts: TransitionSystem,
    scc: set[int],
    internal: list[Transition],
    comp_names: list[str],
) -> list[Transition]:
    """A closed walk in the SCC visiting, for every component, either one of
    its transitions or a state where it is disabled; the walk certifies its
    own weak fairness."""
    waypoints: list[Transition] = []
    visit_states: list[int] = []
    for name in comp_names:
        tr = next((t for t in internal if t.component == name), None)
        if tr is not None:
            waypoints.append(tr)
        else:
            sid = next(s for s in sorted(scc) if not ts.enabled[s][name])
            visit_states.append(sid)

    def connect(a: int, b: int) -> list[Transition]:
        if a == b:
            return []
        par: dict[int, Transition] = {}
        seen = {a}
        queue = [a]
        head = 0
        while head < len(queue):
            cur = queue[head]
            head += 1
            for tr in ts.succ[cur]:
                if tr.target in scc and tr.target not in seen:
                    seen.add(tr.target)
                    par[tr.target] = tr
                    queue.append(tr.target)
        chain: list[Transition] = []
        cur = b
        while cur != a:
            tr = par[cur]
            chain.append(tr)
            cur = tr.source
        return list(reversed(chain))

    walk: list[Transition] = []
    cur = waypoints[0].source
    for tr in waypoints:
        walk.extend(connect(cur, tr.source))
        walk.append(tr)
        cur = tr.target
    for sid in visit_states:
        walk.extend(connect(cur, sid))
        cur = sid
    walk.extend(connect(cur, waypoints[0].source))
    return walk


@dataclass(frozen=True)
class AssertionViolation:
    site: Label
    predicate: Expr
    state: str


def oracle_assertions(ts: TransitionSystem) -> list[AssertionViolation]:
    """Assertions must hold whenever their control point is active."""
    program = ts.program
    violations: list[AssertionViolation] = []
    comp_idx = {c.name: i for i, c in enumerate(program.components)}
    for site, preds in program.annotation.items():
        ci = comp_idx[site.component]
        for pred in preds:
            for sid in range(len(ts.states)):
                if ts.states[sid].pcs[ci] != site.name:
                    continue
                if not ts.holds(pred, sid):
                    violations.append(
                        AssertionViolation(site, pred, ts.describe_state(sid))
                    )
                    break  # one witness per assertion
    return violations


def oracle_invariant(ts: TransitionSystem, inv: Expr) -> tuple[bool, Optional[str]]:
    for sid in range(len(ts.states)):
        if not ts.holds(inv, sid):
            return False, ts.describe_state(sid)
    return True, None


def oracle_postcondition(ts: TransitionSystem, p: Expr) -> tuple[bool, Optional[str]]:
    """Every state with all components at their final labels satisfies p."""
    for sid in range(len(ts.states)):
        if ts.is_terminal(sid) and not ts.holds(p, sid):
            return False, ts.describe_state(sid)
    return True, None


def oracle_deadlock_free(
    ts: TransitionSystem,
) -> tuple[bool, Optional[TraceCounterexample]]:
    """No reachable non-terminal state with zero enabled actions."""
    for sid in range(len(ts.states)):
        if not ts.is_terminal(sid) and not ts.has_enabled(sid):
            stem = _path_from_initial(ts, sid)
            return False, TraceCounterexample(
                tuple(stem),
                (),
                f"total deadlock at [{ts.describe_state(sid)}]",
            )
    return True, None
