"""Finite-domain predicates: expression trees, simultaneous substitution,
evaluation, and validity by exhaustive enumeration.

Expressions double as the right-hand sides of assignments; predicates are
just boolean-typed expressions.  Values are Python bools, exact ints, and
control-point labels.  Validity is decided by enumerating every valuation
of the free variables over their declared domains, so it is sound and
complete at the scale this package targets (no external solver).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union

from .errors import ContractError, EvalError, ResourceCapError

DEFAULT_VALUATION_CAP = 10**7


@dataclass(frozen=True)
class Label:
    """A control point: an action label qualified by its component."""

    component: str
    name: str

    def __str__(self) -> str:
        return f"{self.component}.{self.name}"


Value = Union[bool, int, Label]


def pc_name(component: str) -> str:
    """Reserved name of a component's program-counter variable."""
    return f"pc.{component}"


# ---------------------------------------------------------------------------
# Expression tree
# ---------------------------------------------------------------------------

class Expr:
    """Base class; all nodes are immutable."""

    __slots__ = ()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class VarRef(Expr):
    """Reference to a declared variable; pc variables use their reserved
    dotted name (``pc.X``)."""

    name: str


@dataclass(frozen=True)
class LabelLit(Expr):
    """Component-qualified label literal, written ``X.2`` in source."""

    label: Label


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # '!' or '-'
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Quantified(Expr):
    """Bounded quantifier over a literal integer interval."""

    kind: str  # 'forall' or 'exists'
    var: str
    lo: int
    hi: int
    body: Expr


TRUE = BoolLit(True)
FALSE = BoolLit(False)

ARITH_OPS = ("+", "-", "*")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("&&", "||", "==>", "<=>")


def land(*parts: Expr) -> Expr:
    """Conjunction folded left; drops literal `true` units."""
    acc: Optional[Expr] = None
    for p in parts:
        if p == TRUE:
            continue
        acc = p if acc is None else Binary("&&", acc, p)
    return acc if acc is not None else TRUE


def lor(*parts: Expr) -> Expr:
    acc: Optional[Expr] = None
    for p in parts:
        if p == FALSE:
            continue
        acc = p if acc is None else Binary("||", acc, p)
    return acc if acc is not None else FALSE


def lnot(p: Expr) -> Expr:
    return Unary("!", p)


def implies_expr(p: Expr, q: Expr) -> Expr:
    return Binary("==>", p, q)


def eq(lhs: Expr, rhs: Expr) -> Expr:
    return Binary("==", lhs, rhs)


def pc_is(component: str, label_name: str) -> Expr:
    return eq(VarRef(pc_name(component)), LabelLit(Label(component, label_name)))


# ---------------------------------------------------------------------------
# Traversals
# ---------------------------------------------------------------------------

def free_vars(e: Expr) -> frozenset[str]:
    """Names of variables occurring free in `e` (quantifier vars excluded)."""
    if isinstance(e, VarRef):
        return frozenset((e.name,))
    if isinstance(e, Unary):
        return free_vars(e.operand)
    if isinstance(e, Binary):
        return free_vars(e.lhs) | free_vars(e.rhs)
    if isinstance(e, Quantified):
        return free_vars(e.body) - {e.var}
    return frozenset()


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Simultaneous substitution of expressions for variables.

    The language has no binders over program variables, so capture cannot
    occur; quantifier-bound names still shadow any binding of the same name.
    """
    if not bindings:
        return e
    if isinstance(e, VarRef):
        return bindings.get(e.name, e)
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.operand, bindings))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.lhs, bindings), substitute(e.rhs, bindings))
    if isinstance(e, Quantified):
        inner = {k: v for k, v in bindings.items() if k != e.var}
        return Quantified(e.kind, e.var, e.lo, e.hi, substitute(e.body, inner))
    return e


def parallel_assign(targets: list[tuple[str, Expr]]) -> dict[str, Expr]:
    """Binding map for a multiple assignment; targets must be distinct."""
    seen: dict[str, Expr] = {}
    for name, rhs in targets:
        if name in seen:
            raise ContractError(f"duplicate substitution target {name!r}")
        seen[name] = rhs
    return seen


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

Valuation = dict[str, Value]


def evaluate(e: Expr, v: Mapping[str, Value]) -> Value:
    """Evaluate under a valuation that binds every free variable of `e`.

    Intermediate arithmetic is exact and unconstrained by any domain; only
    stored variable values are domain-limited, so `x+2 == 0` is evaluable
    even when x never goes negative.
    """
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, LabelLit):
        return e.label
    if isinstance(e, VarRef):
        try:
            return v[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Unary):
        x = evaluate(e.operand, v)
        if e.op == "!":
            _want_bool(x, e)
            return not x
        if e.op == "-":
            _want_int(x, e)
            return -x
        raise EvalError(f"unknown unary operator {e.op!r}")
    if isinstance(e, Binary):
        return _eval_binary(e, v)
    if isinstance(e, Quantified):
        inner = dict(v)
        if e.kind == "forall":
            for i in range(e.lo, e.hi + 1):
                inner[e.var] = i
                if not _as_bool(evaluate(e.body, inner), e):
                    return False
            return True
        for i in range(e.lo, e.hi + 1):
            inner[e.var] = i
            if _as_bool(evaluate(e.body, inner), e):
                return True
        return False
    raise EvalError(f"cannot evaluate {e!r}")


def _eval_binary(e: Binary, v: Mapping[str, Value]) -> Value:
    op = e.op
    if op == "&&":
        return _as_bool(evaluate(e.lhs, v), e) and _as_bool(evaluate(e.rhs, v), e)
    if op == "||":
        return _as_bool(evaluate(e.lhs, v), e) or _as_bool(evaluate(e.rhs, v), e)
    if op == "==>":
        return (not _as_bool(evaluate(e.lhs, v), e)) or _as_bool(evaluate(e.rhs, v), e)
    if op == "<=>":
        return _as_bool(evaluate(e.lhs, v), e) == _as_bool(evaluate(e.rhs, v), e)
    a = evaluate(e.lhs, v)
    b = evaluate(e.rhs, v)
    if op == "==":
        _want_same_kind(a, b, e)
        return a == b
    if op == "!=":
        _want_same_kind(a, b, e)
        return a != b
    if op in ("<", "<=", ">", ">="):
        _want_int(a, e)
        _want_int(b, e)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b
    if op in ARITH_OPS:
        _want_int(a, e)
        _want_int(b, e)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        return a * b
    raise EvalError(f"unknown binary operator {op!r}")


def _as_bool(x: Value, where: Expr) -> bool:
    _want_bool(x, where)
    return bool(x)


def _want_bool(x: Value, where: Expr) -> None:
    if not isinstance(x, bool):
        raise EvalError(f"expected boolean, got {x!r}")


def _want_int(x: Value, where: Expr) -> None:
    if isinstance(x, bool) or not isinstance(x, int):
        raise EvalError(f"expected integer, got {x!r}")


def _want_same_kind(a: Value, b: Value, where: Expr) -> None:
    ka = "int" if (isinstance(a, int) and not isinstance(a, bool)) else type(a).__name__
    kb = "int" if (isinstance(b, int) and not isinstance(b, bool)) else type(b).__name__
    if isinstance(a, Label) != isinstance(b, Label) or (
        isinstance(a, bool) != isinstance(b, bool)
    ):
        raise EvalError(f"incomparable values {a!r} ({ka}) and {b!r} ({kb})")


# ---------------------------------------------------------------------------
# Constant folding (the only simplification performed anywhere)
# ---------------------------------------------------------------------------

def fold(e: Expr) -> Expr:
    """Fold literal subtrees and absorb boolean units; nothing deeper."""
    if isinstance(e, Unary):
        x = fold(e.operand)
        if e.op == "!" and isinstance(x, BoolLit):
            return BoolLit(not x.value)
        if e.op == "-" and isinstance(x, IntLit):
            return IntLit(-x.value)
        return Unary(e.op, x)
    if isinstance(e, Binary):
        return _fold_binary(e)
    if isinstance(e, Quantified):
        return Quantified(e.kind, e.var, e.lo, e.hi, fold(e.body))
    return e


def _fold_binary(e: Binary) -> Expr:
    a = fold(e.lhs)
    b = fold(e.rhs)
    op = e.op
    if op == "&&":
        if a == FALSE or b == FALSE:
            return FALSE
        if a == TRUE:
            return b
        if b == TRUE:
            return a
    elif op == "||":
        if a == TRUE or b == TRUE:
            return TRUE
        if a == FALSE:
            return b
        if b == FALSE:
            return a
    elif op == "==>":
        if a == FALSE or b == TRUE:
            return TRUE
        if a == TRUE:
            return b
        if b == FALSE:
            return fold(Unary("!", a))
    elif op == "<=>":
        if a == TRUE:
            return b
        if b == TRUE:
            return a
    literal = _literal_value(a), _literal_value(b)
    if literal[0] is not None and literal[1] is not None:
        try:
            return _value_to_expr(evaluate(Binary(op, a, b), {}))
        except EvalError:
            pass
    return Binary(op, a, b)


def _literal_value(e: Expr) -> Optional[Value]:
    if isinstance(e, (IntLit, BoolLit)):
        return e.value
    if isinstance(e, LabelLit):
        return e.label
    return None


def _value_to_expr(v: Value) -> Expr:
    if isinstance(v, bool):
        return BoolLit(v)
    if isinstance(v, Label):
        return LabelLit(v)
    return IntLit(v)


# ---------------------------------------------------------------------------
# Validity by enumeration
# ---------------------------------------------------------------------------

class Domains:
    """Finite domain of every declared variable, pc variables included.

    The per-variable value order is the declaration order (booleans are
    false before true, intervals ascend, pc domains follow label order);
    counterexamples are therefore minimal in lexicographic variable order.
    """

    def __init__(self, domains: Mapping[str, tuple[Value, ...]]):
        self._domains = dict(domains)

    def __contains__(self, name: str) -> bool:
        return name in self._domains

    def values_of(self, name: str) -> tuple[Value, ...]:
        return self._domains[name]

    def names(self) -> list[str]:
        return sorted(self._domains)

    def with_vars(self, extra: Mapping[str, tuple[Value, ...]]) -> "Domains":
        merged = dict(self._domains)
        merged.update(extra)
        return Domains(merged)

    def valuations(
        self, names: list[str], cap: int = DEFAULT_VALUATION_CAP
    ) -> Iterator[Valuation]:
        size = 1
        for n in names:
            size *= len(self._domains[n])
            if size > cap:
                raise ResourceCapError(
                    f"valuation space exceeds cap ({cap})", size=size
                )
        pools = [self._domains[n] for n in names]
        for combo in itertools.product(*pools):
            yield dict(zip(names, combo))


def valid(
    p: Expr, domains: Domains, cap: int = DEFAULT_VALUATION_CAP
) -> tuple[bool, Optional[Valuation]]:
    """Decide whether `p` holds under every valuation of its free variables.

    Returns (True, None) or (False, counterexample).  The counterexample is
    the first falsifying valuation in lexicographic variable order, extended
    with domain-minimal values for declared variables `p` does not mention.
    """
    names = sorted(free_vars(p))
    for n in names:
        if n not in domains:
            raise ContractError(f"free variable {n!r} has no declared domain")
    for valuation in domains.valuations(names, cap=cap):
        if not evaluate(p, valuation):
            full = {
                n: domains.values_of(n)[0]
                for n in domains.names()
                if n not in valuation
            }
            full.update(valuation)
            return False, full
    return True, None


def implies(
    p: Expr, q: Expr, domains: Domains, cap: int = DEFAULT_VALUATION_CAP
) -> tuple[bool, Optional[Valuation]]:
    """Sugar for ``valid(p ==> q)``."""
    return valid(Binary("==>", p, q), domains, cap=cap)


def bool_domain() -> tuple[Value, ...]:
    return (False, True)


def int_domain(lo: int, hi: int) -> tuple[Value, ...]:
    return tuple(range(lo, hi + 1))
