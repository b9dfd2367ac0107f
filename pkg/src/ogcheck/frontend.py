"""Text format for programs (.ogp) and proof scripts (.ogpf).

The surface syntax mirrors guarded-command notation: guards are written
``B -> S``, branches separated by ``[]``, multiple assignment
``x, y := E1, E2``, atomic blocks ``atomic ... end``, assertions in braces
before the action they annotate, and explicit labels as ``L:`` prefixes.
Counters are referenced ``pc.X`` and label literals ``X.2``.  Line comments
start with ``--``.

Parsing attaches labels (explicit labels win, missing ones are filled in)
and resolves every identifier; the printer renders a canonical form that
reparses to an equal tree, byte-identically on every run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional

from .errors import ContractError, ParseError, ResolveError
from .lang import (
    Assign,
    Atomic,
    Component,
    Do,
    GuardedArm,
    If,
    Program,
    Property,
    Seq,
    Skip,
    Statement,
    VarDecl,
    label_component,
    label_domain,
)
from .predicates import (
    Binary,
    BoolLit,
    Expr,
    IntLit,
    Label,
    LabelLit,
    Quantified,
    Unary,
    VarRef,
)
from .progress import (
    Cancellation,
    Completion,
    CompletionPart,
    Disjunction,
    DisjunctionCase,
    Immediate,
    Implication,
    Impossibility,
    Induction,
    ProofNode,
    Psp,
    Transitivity,
)

PROGRAM_SUFFIX = ".ogp"
PROOF_SUFFIX = ".ogpf"

KEYWORDS = {
    "program", "pre", "var", "bool", "int", "component", "skip", "if", "fi",
    "do", "od", "atomic", "end", "assert", "invariant", "property", "proof",
    "unless", "leadsto", "postcondition", "deadlockfree", "true", "false",
    "forall", "exists", "in", "shared", "private", "local", "to", "aux",
    "pc", "immediate", "implication", "impossibility", "transitivity", "via",
    "disjunction", "case", "cancellation", "psp", "with", "un", "induction",
    "on", "as", "completion", "part",
}

_TOKEN_RE = re.compile(
    r"""(?P<WS>[ \t\r]+)
      | (?P<COMMENT>--[^\n]*)
      | (?P<NL>\n)
      | (?P<NUM>\d+)
      | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<OP>:=|==>|<=>|==|!=|<=|>=|->|\[\]|\.\.|&&|\|\||[-+*!<>(){}:;,.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'NUM' | 'IDENT' | 'KW' | 'OP' | 'EOF'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "NL":
            line += 1
            col = 1
        elif kind in ("WS", "COMMENT"):
            col += len(lexeme)
        else:
            tkind = kind
            if kind == "IDENT" and lexeme in KEYWORDS:
                tkind = "KW"
            tokens.append(Token(tkind, lexeme, line, col))
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("EOF", "", line, col))
    return tokens


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str
    program: Program


_STMT_START_KWS = {"skip", "if", "do", "atomic"}


class Parser:
    def __init__(self, text: str, path: str = "<string>"):
        self.tokens = tokenize(text)
        self.i = 0
        self.path = path

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "EOF":
            self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text if text is not None else kind
            raise ParseError(f"expected {want!r}, found {t.text or 'end of file'!r}",
                             t.line, t.col)
        return self.next()

    def fail(self, message: str) -> ParseError:
        t = self.peek()
        return ParseError(message, t.line, t.col)

    # -- program ------------------------------------------------------------

    def parse_program(self) -> tuple[Program, dict[str, ProofNode]]:
        if self.at("EOF"):
            raise self.fail("empty file: expected 'program'")
        self.expect("KW", "program")
        name = self.expect("IDENT").text
        pre: Expr = BoolLit(True)
        decls: list[VarDecl] = []
        comps: list[Component] = []
        annotation: dict[Label, tuple[Expr, ...]] = {}
        invariants: list[tuple[str, Expr]] = []
        properties: list[Property] = []
        proofs: dict[str, ProofNode] = {}
        while not self.at("EOF"):
            if self.at("KW", "pre"):
                self.next()
                pre = self.parse_pred()
            elif self.at("KW", "var"):
                decls.append(self.parse_var())
            elif self.at("KW", "component"):
                comp, notes = self.parse_component()
                comps.append(comp)
                annotation.update(notes)
            elif self.at("KW", "invariant"):
                self.next()
                iname = self.expect("IDENT").text
                self.expect("OP", ":")
                invariants.append((iname, self.parse_pred()))
            elif self.at("KW", "property"):
                properties.append(self.parse_property())
            elif self.at("KW", "proof"):
                pname, node = self.parse_proof()
                if pname in proofs:
                    raise self.fail(f"second proof for property {pname!r}")
                proofs[pname] = node
            else:
                raise self.fail(f"unexpected {self.peek().text!r} at top level")
        program = Program(
            name,
            pre,
            tuple(decls),
            tuple(comps),
            annotation=annotation,
            invariants=tuple(invariants),
            properties=tuple(properties),
        )
        return program, proofs

    def parse_var(self) -> VarDecl:
        self.expect("KW", "var")
        name = self.expect("IDENT").text
        self.expect("OP", ":")
        if self.at("KW", "bool"):
            self.next()
            kind, lo, hi = "bool", 0, 0
        else:
            self.expect("KW", "int")
            kind = "int"
            lo = self.parse_int_literal()
            self.expect("OP", "..")
            hi = self.parse_int_literal()
        scope, owner = "shared", None
        if self.at("KW", "shared"):
            self.next()
        elif self.at("KW", "private") or self.at("KW", "local"):
            scope = self.next().text
            self.expect("KW", "to")
            owner = self.expect("IDENT").text
        aux = False
        if self.at("KW", "aux"):
            self.next()
            aux = True
        return VarDecl(name, kind, lo, hi, scope=scope, owner=owner, aux=aux)

    def parse_int_literal(self) -> int:
        neg = False
        if self.at("OP", "-"):
            self.next()
            neg = True
        n = int(self.expect("NUM").text)
        return -n if neg else n

    # -- components ---------------------------------------------------------

    def parse_component(self) -> tuple[Component, dict[Label, tuple[Expr, ...]]]:
        self.expect("KW", "component")
        name = self.expect("IDENT").text
        self.expect("OP", ":")
        sidecar: list[tuple[int, list[Expr]]] = []
        body, final_label, final_asserts = self.parse_body(name, sidecar)
        raw = Component(name, body, final=final_label)
        labelled, mapping = label_component(raw)
        annotation: dict[Label, tuple[Expr, ...]] = {}

        def note(lbl: Label, preds: list[Expr]) -> None:
            annotation[lbl] = annotation.get(lbl, ()) + tuple(preds)

        for node_id, preds in sidecar:
            new_node = mapping[node_id]
            assert new_node.ini is not None
            note(Label(name, new_node.ini), preds)
        if final_asserts:
            assert labelled.final is not None
            note(Label(name, labelled.final), final_asserts)
        return labelled, annotation

    def parse_body(
        self, comp: str, sidecar: list[tuple[int, list[Expr]]]
    ) -> tuple[Optional[Statement], Optional[str], list[Expr]]:
        stmts: list[Statement] = []
        while True:
            asserts = self.parse_assertions()
            lbl = self.try_label()
            if not self.at_stmt_start():
                # trailing label closes the component
                if lbl is not None:
                    return self.seq_of(stmts), lbl, asserts
                if asserts:
                    raise self.fail(
                        "assertion must precede an action or the final label"
                    )
                return self.seq_of(stmts), None, []
            stmt = self.parse_base_stmt(comp, lbl, asserts, sidecar)
            stmts.append(stmt)
            if self.at("OP", ";"):
                self.next()
                continue
            # no separator: only assertions plus the final label may follow
            asserts = self.parse_assertions()
            lbl = self.try_label()
            if lbl is not None and not self.at_stmt_start():
                return self.seq_of(stmts), lbl, asserts
            if lbl is not None or asserts or self.at_stmt_start():
                raise self.fail("expected ';' between statements")
            return self.seq_of(stmts), None, []

    def parse_arm_body(
        self, comp: str, sidecar: list[tuple[int, list[Expr]]]
    ) -> Statement:
        stmts: list[Statement] = []
        while True:
            asserts = self.parse_assertions()
            lbl = self.try_label()
            if not self.at_stmt_start():
                if lbl is not None or asserts:
                    raise self.fail(
                        "assertion or label inside a branch must precede an action"
                    )
                break
            stmts.append(self.parse_base_stmt(comp, lbl, asserts, sidecar))
            if self.at("OP", ";"):
                self.next()
                continue
            break
        if not stmts:
            raise self.fail("branch body cannot be empty")
        out = self.seq_of(stmts)
        assert out is not None
        return out

    @staticmethod
    def seq_of(stmts: list[Statement]) -> Optional[Statement]:
        if not stmts:
            return None
        acc = stmts[-1]
        for s in reversed(stmts[:-1]):
            acc = Seq(s, acc)
        return acc

    def parse_assertions(self) -> list[Expr]:
        out: list[Expr] = []
        while self.at("OP", "{"):
            self.next()
            out.append(self.parse_pred())
            self.expect("OP", "}")
        return out

    def try_label(self) -> Optional[str]:
        t = self.peek()
        if t.kind in ("IDENT", "NUM") and self.at("OP", ":", ahead=1):
            self.next()
            self.next()
            return t.text
        return None

    def at_stmt_start(self) -> bool:
        t = self.peek()
        if t.kind == "KW" and t.text in _STMT_START_KWS:
            return True
        if t.kind == "IDENT" and (
            self.at("OP", ":=", ahead=1) or self.at("OP", ",", ahead=1)
        ):
            return True
        return False

    def parse_base_stmt(
        self,
        comp: str,
        label: Optional[str],
        asserts: list[Expr],
        sidecar: list[tuple[int, list[Expr]]],
    ) -> Statement:
        t = self.peek()
        if t.kind == "KW" and t.text == "skip":
            self.next()
            stmt: Statement = Skip(ini=label)
        elif t.kind == "KW" and t.text == "atomic":
            self.next()
            inner_sidecar: list[tuple[int, list[Expr]]] = []
            body = self.parse_arm_body(comp, inner_sidecar)
            if inner_sidecar:
                raise self.fail("atomic bodies carry no assertions")
            if _has_labels(body):
                raise self.fail("atomic bodies are unlabelled")
            self.expect("KW", "end")
            stmt = Atomic(body, ini=label)
        elif t.kind == "KW" and t.text in ("if", "do"):
            kw = self.next().text
            arms = [self.parse_arm(comp, sidecar)]
            while self.at("OP", "[]"):
                self.next()
                arms.append(self.parse_arm(comp, sidecar))
            self.expect("KW", "fi" if kw == "if" else "od")
            stmt = (If if kw == "if" else Do)(tuple(arms), ini=label)
        elif t.kind == "IDENT":
            targets = [self.next().text]
            while self.at("OP", ","):
                self.next()
                targets.append(self.expect("IDENT").text)
            self.expect("OP", ":=")
            exprs = [self.parse_expr()]
            while self.at("OP", ","):
                self.next()
                exprs.append(self.parse_expr())
            if len(exprs) != len(targets):
                raise self.fail(
                    f"{len(targets)} assignment target(s) but {len(exprs)} expression(s)"
                )
            stmt = Assign(tuple(targets), tuple(exprs), ini=label)
        else:
            raise self.fail(f"expected a statement, found {t.text!r}")
        if asserts:
            sidecar.append((id(stmt), asserts))
        return stmt

    def parse_arm(
        self, comp: str, sidecar: list[tuple[int, list[Expr]]]
    ) -> GuardedArm:
        guard = self.parse_pred()
        self.expect("OP", "->")
        body = self.parse_arm_body(comp, sidecar)
        return GuardedArm(guard, body)

    # -- properties and proofs ----------------------------------------------

    def parse_property(self) -> Property:
        self.expect("KW", "property")
        name = self.expect("IDENT").text
        self.expect("OP", ":")
        if self.at("KW", "postcondition"):
            self.next()
            return Property(name, "postcondition", self.parse_pred())
        if self.at("KW", "deadlockfree"):
            self.next()
            return Property(name, "deadlockfree")
        p = self.parse_pred()
        if self.at("KW", "unless"):
            self.next()
            return Property(name, "unless", p, self.parse_pred())
        self.expect("KW", "leadsto")
        return Property(name, "leadsto", p, self.parse_pred())

    def parse_proof(self) -> tuple[str, ProofNode]:
        self.expect("KW", "proof")
        name = self.expect("IDENT").text
        node = self.parse_proof_node()
        self.expect("KW", "end")
        return name, node

    def parse_proof_node(self) -> ProofNode:
        t = self.peek()
        if self.at("KW", "immediate"):
            self.next()
            comp = self.expect("IDENT").text
            self.expect("OP", ".")
            lab = self.next()
            if lab.kind not in ("IDENT", "NUM"):
                raise self.fail("expected a label after the component name")
            return Immediate(Label(comp, lab.text))
        if self.at("KW", "implication"):
            self.next()
            return Implication()
        if self.at("KW", "impossibility"):
            self.next()
            self.expect("OP", "{")
            sub = self.parse_proof_node()
            self.expect("OP", "}")
            return Impossibility(sub)
        if self.at("KW", "transitivity"):
            self.next()
            self.expect("KW", "via")
            mid = self.parse_pred()
            self.expect("OP", "{")
            left = self.parse_proof_node()
            right = self.parse_proof_node()
            self.expect("OP", "}")
            return Transitivity(mid, left, right)
        if self.at("KW", "disjunction"):
            self.next()
            self.expect("OP", "{")
            cases = []
            while self.at("KW", "case"):
                self.next()
                p = self.parse_pred()
                q = None
                if self.at("KW", "leadsto"):
                    self.next()
                    q = self.parse_pred()
                self.expect("OP", ":")
                cases.append(DisjunctionCase(p, self.parse_proof_node(), q))
            self.expect("OP", "}")
            if not cases:
                raise self.fail("disjunction needs at least one case")
            return Disjunction(tuple(cases))
        if self.at("KW", "cancellation"):
            self.next()
            self.expect("KW", "via")
            d = self.parse_pred()
            self.expect("OP", "{")
            sub1 = self.parse_proof_node()
            sub2 = self.parse_proof_node()
            self.expect("OP", "}")
            return Cancellation(d, sub1, sub2)
        if self.at("KW", "psp"):
            self.next()
            p = self.parse_pred()
            self.expect("KW", "leadsto")
            q = self.parse_pred()
            self.expect("KW", "with")
            r = self.parse_pred()
            self.expect("KW", "un")
            d = self.parse_pred()
            self.expect("OP", "{")
            sub = self.parse_proof_node()
            self.expect("OP", "}")
            return Psp(p, q, r, d, sub)
        if self.at("KW", "induction"):
            self.next()
            self.expect("KW", "on")
            measure = self.parse_expr()
            self.expect("KW", "in")
            lo = self.parse_int_literal()
            self.expect("OP", "..")
            hi = self.parse_int_literal()
            self.expect("KW", "as")
            param = self.expect("IDENT").text
            self.expect("OP", "{")
            template = self.parse_proof_node()
            self.expect("OP", "}")
            return Induction(measure, lo, hi, param, template)
        if self.at("KW", "completion"):
            self.next()
            self.expect("KW", "via")
            d = self.parse_pred()
            self.expect("OP", "{")
            parts = []
            while self.at("KW", "part"):
                self.next()
                p = self.parse_pred()
                self.expect("KW", "leadsto")
                q = self.parse_pred()
                self.expect("OP", "{")
                sub = self.parse_proof_node()
                self.expect("OP", "}")
                parts.append(CompletionPart(p, q, sub))
            self.expect("OP", "}")
            if not parts:
                raise self.fail("completion needs at least one part")
            return Completion(d, tuple(parts))
        raise ParseError(f"expected a proof step, found {t.text!r}", t.line, t.col)

    # -- predicates / expressions -------------------------------------------

    def parse_pred(self) -> Expr:
        return self.parse_quantified()

    def parse_quantified(self) -> Expr:
        if self.at("KW", "forall") or self.at("KW", "exists"):
            kind = self.next().text
            var = self.expect("IDENT").text
            self.expect("KW", "in")
            lo = self.parse_int_literal()
            self.expect("OP", "..")
            hi = self.parse_int_literal()
            self.expect("OP", ":")
            return Quantified(kind, var, lo, hi, self.parse_quantified())
        return self.parse_iff()

    def parse_iff(self) -> Expr:
        e = self.parse_implies()
        while self.at("OP", "<=>"):
            self.next()
            e = Binary("<=>", e, self.parse_implies())
        return e

    def parse_implies(self) -> Expr:
        e = self.parse_or()
        if self.at("OP", "==>"):
            self.next()
            return Binary("==>", e, self.parse_implies())
        return e

    def parse_or(self) -> Expr:
        e = self.parse_and()
        while self.at("OP", "||"):
            self.next()
            e = Binary("||", e, self.parse_and())
        return e

    def parse_and(self) -> Expr:
        e = self.parse_not()
        while self.at("OP", "&&"):
            self.next()
            e = Binary("&&", e, self.parse_not())
        return e

    def parse_not(self) -> Expr:
        if self.at("OP", "!"):
            self.next()
            return Unary("!", self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        e = self.parse_add()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at("OP", op):
                self.next()
                return Binary(op, e, self.parse_add())
        return e

    def parse_expr(self) -> Expr:
        return self.parse_add()

    def parse_add(self) -> Expr:
        e = self.parse_mul()
        while self.at("OP", "+") or self.at("OP", "-"):
            op = self.next().text
            e = Binary(op, e, self.parse_mul())
        return e

    def parse_mul(self) -> Expr:
        e = self.parse_unary()
        while self.at("OP", "*"):
            self.next()
            e = Binary("*", e, self.parse_unary())
        return e

    def parse_unary(self) -> Expr:
        if self.at("OP", "-"):
            self.next()
            return Unary("-", self.parse_unary())
        if self.at("OP", "!"):
            self.next()
            return Unary("!", self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        t = self.peek()
        if t.kind == "NUM":
            self.next()
            return IntLit(int(t.text))
        if self.at("KW", "true"):
            self.next()
            return BoolLit(True)
        if self.at("KW", "false"):
            self.next()
            return BoolLit(False)
        if self.at("OP", "("):
            self.next()
            e = self.parse_pred()
            self.expect("OP", ")")
            return e
        if self.at("KW", "pc"):
            self.next()
            self.expect("OP", ".")
            comp = self.expect("IDENT").text
            return VarRef(f"pc.{comp}")
        if t.kind == "IDENT":
            self.next()
            if self.at("OP", "."):
                self.next()
                lab = self.next()
                if lab.kind not in ("IDENT", "NUM"):
                    raise self.fail("expected a label after the component name")
                return LabelLit(Label(t.text, lab.text))
            return VarRef(t.text)
        raise ParseError(
            f"expected an expression, found {t.text or 'end of file'!r}",
            t.line,
            t.col,
        )


def _has_labels(stmt: Statement) -> bool:
    if stmt.ini is not None:
        return True
    if isinstance(stmt, Seq):
        return _has_labels(stmt.first) or _has_labels(stmt.second)
    if isinstance(stmt, Atomic):
        return _has_labels(stmt.body)
    if isinstance(stmt, (If, Do)):
        return any(_has_labels(a.body) for a in stmt.arms)
    return False


# ---------------------------------------------------------------------------
# Resolution and type checking
# ---------------------------------------------------------------------------

_INT = "int"
_BOOL = "bool"


def _resolve_program(program: Program) -> None:
    """Every identifier declared, every expression well-typed."""
    env: dict[str, object] = {}
    for d in program.decls:
        env[d.name] = _BOOL if d.kind == "bool" else _INT
    labels: dict[str, set[str]] = {}
    for comp in program.components:
        labels[comp.name] = set(label_domain(comp))
        env[f"pc.{comp.name}"] = ("label", comp.name)

    def check(e: Expr, where: str, want: Optional[object] = None) -> object:
        got = _typeof(e, env, labels, where)
        if want is not None and got != want:
            raise ResolveError(f"{where}: expected {want}, got {got}")
        return got

    names = [p.name for p in program.properties]
    if len(set(names)) != len(names):
        raise ResolveError("duplicate property names")
    inv_names = [n for n, _ in program.invariants]
    if len(set(inv_names)) != len(inv_names):
        raise ResolveError("duplicate invariant names")
    check(program.pre, "precondition", _BOOL)
    for comp in program.components:
        if comp.body is not None:
            _resolve_stmt(comp.body, comp.name, env, labels)
    for site, preds in program.annotation.items():
        for p in preds:
            check(p, f"assertion at {site}", _BOOL)
    for name, inv in program.invariants:
        check(inv, f"invariant {name}", _BOOL)
    for prop in program.properties:
        for side_name, e in (("left", prop.p), ("right", prop.q)):
            if e is not None:
                check(e, f"property {prop.name} ({side_name})", _BOOL)
        if prop.script is not None:
            _resolve_proof(prop.script, prop.name, env, labels)


def _resolve_stmt(stmt: Statement, comp: str, env, labels) -> None:
    if isinstance(stmt, Assign):
        for tgt, e in zip(stmt.targets, stmt.exprs):
            if tgt not in env or isinstance(env[tgt], tuple):
                raise ResolveError(f"{comp}: assignment to undeclared {tgt!r}")
            want = env[tgt]
            got = _typeof(e, env, labels, f"{comp} assignment to {tgt}")
            if got != want:
                raise ResolveError(
                    f"{comp}: assignment to {tgt!r} needs {want}, got {got}"
                )
    elif isinstance(stmt, Seq):
        _resolve_stmt(stmt.first, comp, env, labels)
        _resolve_stmt(stmt.second, comp, env, labels)
    elif isinstance(stmt, Atomic):
        _resolve_stmt(stmt.body, comp, env, labels)
    elif isinstance(stmt, (If, Do)):
        for arm in stmt.arms:
            got = _typeof(arm.guard, env, labels, f"{comp} guard")
            if got != _BOOL:
                raise ResolveError(f"{comp}: guard must be boolean, got {got}")
            _resolve_stmt(arm.body, comp, env, labels)


def _resolve_proof(node: ProofNode, prop: str, env, labels) -> None:
    where = f"proof of {prop}"

    def check_bool(e: Expr) -> None:
        got = _typeof(e, env, labels, where)
        if got != _BOOL:
            raise ResolveError(f"{where}: expected bool, got {got}")

    if isinstance(node, Immediate):
        comp, lab = node.site.component, node.site.name
        if comp not in labels or lab not in labels[comp]:
            raise ResolveError(f"{where}: no action at label {node.site}")
    elif isinstance(node, Impossibility):
        _resolve_proof(node.sub, prop, env, labels)
    elif isinstance(node, Transitivity):
        check_bool(node.mid)
        _resolve_proof(node.left, prop, env, labels)
        _resolve_proof(node.right, prop, env, labels)
    elif isinstance(node, Disjunction):
        for c in node.cases:
            check_bool(c.p)
            if c.q is not None:
                check_bool(c.q)
            _resolve_proof(c.sub, prop, env, labels)
    elif isinstance(node, Cancellation):
        check_bool(node.d)
        _resolve_proof(node.sub1, prop, env, labels)
        _resolve_proof(node.sub2, prop, env, labels)
    elif isinstance(node, Psp):
        for e in (node.p, node.q, node.r, node.d):
            check_bool(e)
        _resolve_proof(node.sub, prop, env, labels)
    elif isinstance(node, Induction):
        inner = dict(env)
        inner[node.param] = _INT
        got = _typeof(node.measure, inner, labels, where)
        if got != _INT:
            raise ResolveError(f"{where}: induction measure must be int")
        _resolve_proof(node.template, prop, inner, labels)
    elif isinstance(node, Completion):
        check_bool(node.d)
        for part in node.parts:
            check_bool(part.p)
            check_bool(part.q)
            _resolve_proof(part.sub, prop, env, labels)


def _typeof(e: Expr, env, labels, where: str) -> object:
    if isinstance(e, IntLit):
        return _INT
    if isinstance(e, BoolLit):
        return _BOOL
    if isinstance(e, LabelLit):
        comp = e.label.component
        if comp not in labels:
            raise ResolveError(f"{where}: unknown component {comp!r} in {e.label}")
        if e.label.name not in labels[comp]:
            raise ResolveError(f"{where}: unknown label {e.label}")
        return ("label", comp)
    if isinstance(e, VarRef):
        if e.name.startswith("pc."):
            comp = e.name[3:]
            if comp not in labels:
                raise ResolveError(f"{where}: unknown component in {e.name!r}")
            return ("label", comp)
        if e.name not in env:
            raise ResolveError(f"{where}: unresolved identifier {e.name!r}")
        return env[e.name]
    if isinstance(e, Unary):
        t = _typeof(e.operand, env, labels, where)
        want = _BOOL if e.op == "!" else _INT
        if t != want:
            raise ResolveError(f"{where}: operator {e.op!r} needs {want}, got {t}")
        return want
    if isinstance(e, Binary):
        lt = _typeof(e.lhs, env, labels, where)
        rt = _typeof(e.rhs, env, labels, where)
        if e.op in ("&&", "||", "==>", "<=>"):
            if lt != _BOOL or rt != _BOOL:
                raise ResolveError(f"{where}: {e.op!r} needs booleans")
            return _BOOL
        if e.op in ("==", "!="):
            if lt != rt:
                raise ResolveError(
                    f"{where}: cannot compare {lt} with {rt} using {e.op!r}"
                )
            return _BOOL
        if e.op in ("<", "<=", ">", ">="):
            if lt != _INT or rt != _INT:
                raise ResolveError(f"{where}: {e.op!r} compares integers")
            return _BOOL
        if e.op in ("+", "-", "*"):
            if lt != _INT or rt != _INT:
                raise ResolveError(f"{where}: {e.op!r} needs integers")
            return _INT
        raise ResolveError(f"{where}: unknown operator {e.op!r}")
    if isinstance(e, Quantified):
        inner = dict(env)
        inner[e.var] = _INT
        t = _typeof(e.body, inner, labels, where)
        if t != _BOOL:
            raise ResolveError(f"{where}: quantifier body must be boolean")
        return _BOOL
    raise ResolveError(f"{where}: cannot type {e!r}")


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def parse(text: str, path: str = "<string>") -> SourceFile:
    """Parse, label, and resolve a program file."""
    parser = Parser(text, path)
    program, proofs = parser.parse_program()
    program = _attach_proofs(program, proofs)
    _resolve_program(program)
    return SourceFile(path, text, program)


def parse_proofs(text: str, program: Program, path: str = "<string>") -> Program:
    """Parse an .ogpf file and attach its proofs to declared properties."""
    parser = Parser(text, path)
    proofs: dict[str, ProofNode] = {}
    while not parser.at("EOF"):
        name, node = parser.parse_proof()
        if name in proofs:
            raise parser.fail(f"second proof for property {name!r}")
        proofs[name] = node
    out = _attach_proofs(program, proofs)
    _resolve_program(out)
    return out


def _attach_proofs(program: Program, proofs: dict[str, ProofNode]) -> Program:
    known = {p.name for p in program.properties}
    for name in proofs:
        if name not in known:
            raise ResolveError(f"proof for undeclared property {name!r}")
    props = []
    for prop in program.properties:
        if prop.name in proofs:
            if prop.kind != "leadsto":
                raise ResolveError(
                    f"property {prop.name!r} is {prop.kind}; only leads-to "
                    "properties take proof scripts"
                )
            props.append(replace(prop, script=proofs[prop.name]))
        else:
            props.append(prop)
    return replace(program, properties=tuple(props))


def parse_predicate(text: str, program: Program) -> Expr:
    """Parse one predicate in the context of a program (CLI helper)."""
    parser = Parser(text)
    e = parser.parse_pred()
    if not parser.at("EOF"):
        raise parser.fail("trailing input after predicate")
    env: dict[str, object] = {}
    for d in program.decls:
        env[d.name] = _BOOL if d.kind == "bool" else _INT
    labels = {c.name: set(label_domain(c)) for c in program.components}
    _typeof(e, env, labels, "predicate")
    return e


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC = {
    "<=>": 1,
    "==>": 2,
    "||": 3,
    "&&": 4,
    "==": 5, "!=": 5, "<": 5, "<=": 5, ">": 5, ">=": 5,
    "+": 6, "-": 6,
    "*": 7,
}
_RIGHT_ASSOC = {"==>"}
_NON_ASSOC = {"==", "!=", "<", "<=", ">", ">="}


def print_pred(e: Expr) -> str:
    return _pp(e, 0)


def _pp(e: Expr, ctx: int) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, LabelLit):
        return str(e.label)
    if isinstance(e, Unary):
        inner = _pp(e.operand, 8)
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        if e.op in _RIGHT_ASSOC:
            lhs = _pp(e.lhs, prec + 1)
            rhs = _pp(e.rhs, prec)
        elif e.op in _NON_ASSOC:
            lhs = _pp(e.lhs, prec + 1)
            rhs = _pp(e.rhs, prec + 1)
        else:
            lhs = _pp(e.lhs, prec)
            rhs = _pp(e.rhs, prec + 1)
        text = f"{lhs} {e.op} {rhs}"
        return f"({text})" if prec < ctx else text
    if isinstance(e, Quantified):
        body = _pp(e.body, 0)
        text = f"{e.kind} {e.var} in {e.lo}..{e.hi} : {body}"
        return f"({text})" if ctx > 0 else text
    raise ContractError(f"cannot print {e!r}")


def print_program(program: Program) -> str:
    """Canonical rendering; reparses to an equal tree when the program is
    not instrumented.  Instrumented programs render their counter updates
    explicitly and are for reading, not reparsing."""
    out: list[str] = [f"program {program.name}", ""]
    out.append(f"pre {print_pred(program.pre)}")
    out.append("")
    for d in program.decls:
        out.append(_print_var(d))
    if program.decls:
        out.append("")
    for comp in program.components:
        out.extend(_print_component(program, comp))
        out.append("")
    for name, inv in program.invariants:
        out.append(f"invariant {name} : {print_pred(inv)}")
    if program.invariants:
        out.append("")
    for prop in program.properties:
        out.append(_print_property(prop))
    for prop in program.properties:
        if prop.script is not None:
            out.append("")
            out.append(f"proof {prop.name}")
            out.extend(_print_proof_node(prop.script, 1))
            out.append("end")
    return "\n".join(out).rstrip() + "\n"


def _print_var(d: VarDecl) -> str:
    dom = "bool" if d.kind == "bool" else f"int {d.lo}..{d.hi}"
    parts = [f"var {d.name} : {dom}"]
    if d.scope != "shared":
        parts.append(f"{d.scope} to {d.owner}")
    if d.aux:
        parts.append("aux")
    return " ".join(parts)


def _print_component(program: Program, comp: Component) -> list[str]:
    out = [f"component {comp.name}:"]
    if comp.body is not None:
        out.extend(
            _print_stmt(program, comp, comp.body, indent=1, terminator=";")
        )
    for p in program.assertions_at(Label(comp.name, comp.final or "")):
        out.append(f"  {{{print_pred(p)}}}")
    out.append(f"  {comp.final}:")
    return out


def _print_stmt(
    program: Program, comp: Component, stmt: Statement, indent: int, terminator: str
) -> list[str]:
    pad = "  " * indent
    if isinstance(stmt, Seq):
        first = _print_stmt(program, comp, stmt.first, indent, ";")
        second = _print_stmt(program, comp, stmt.second, indent, terminator)
        return first + second
    lines: list[str] = []
    assert stmt.ini is not None
    for p in program.assertions_at(Label(comp.name, stmt.ini)):
        lines.append(f"{pad}{{{print_pred(p)}}}")
    label = f"{stmt.ini}: "
    pc_note = (
        f" || pc.{comp.name} := {comp.name}.{stmt.fin}"
        if program.instrumented
        else ""
    )
    if isinstance(stmt, Skip):
        if program.instrumented:
            lines.append(
                f"{pad}{label}atomic skip ; "
                f"pc.{comp.name} := {comp.name}.{stmt.fin} end{terminator}"
            )
        else:
            lines.append(f"{pad}{label}skip{terminator}")
    elif isinstance(stmt, Assign):
        targets = ", ".join(stmt.targets)
        exprs = ", ".join(print_pred(e) for e in stmt.exprs)
        lines.append(f"{pad}{label}{targets} := {exprs}{pc_note}{terminator}")
    elif isinstance(stmt, Atomic):
        body = _print_inline(stmt.body)
        if program.instrumented:
            lines.append(
                f"{pad}{label}atomic {body} ; "
                f"pc.{comp.name} := {comp.name}.{stmt.fin} end{terminator}"
            )
        else:
            lines.append(f"{pad}{label}atomic {body} end{terminator}")
    elif isinstance(stmt, (If, Do)):
        opener, closer = ("if", "fi") if isinstance(stmt, If) else ("do", "od")
        lines.append(f"{pad}{label}{opener}")
        for k, arm in enumerate(stmt.arms):
            sep = "  " if k == 0 else "[]"
            guard = print_pred(arm.guard)
            if program.instrumented:
                guard = (
                    f"atomic {guard} -> pc.{comp.name} := "
                    f"{comp.name}.{arm.body.ini} end"
                )
            lines.append(f"{pad}{sep} {guard} ->")
            lines.extend(_print_stmt(program, comp, arm.body, indent + 2, ""))
        if program.instrumented and isinstance(stmt, Do):
            guards = " || ".join(print_pred(a.guard) for a in stmt.arms)
            lines.append(
                f"{pad}[] atomic !({guards}) -> pc.{comp.name} := "
                f"{comp.name}.{stmt.fin} end"
            )
        lines.append(f"{pad}{closer}{terminator}")
    else:
        raise ContractError(f"cannot print {stmt!r}")
    return lines


def _print_inline(stmt: Statement) -> str:
    if isinstance(stmt, Skip):
        return "skip"
    if isinstance(stmt, Assign):
        targets = ", ".join(stmt.targets)
        exprs = ", ".join(print_pred(e) for e in stmt.exprs)
        return f"{targets} := {exprs}"
    if isinstance(stmt, Seq):
        return f"{_print_inline(stmt.first)} ; {_print_inline(stmt.second)}"
    if isinstance(stmt, Atomic):
        return f"atomic {_print_inline(stmt.body)} end"
    if isinstance(stmt, If):
        arms = " [] ".join(
            f"{print_pred(a.guard)} -> {_print_inline(a.body)}" for a in stmt.arms
        )
        return f"if {arms} fi"
    if isinstance(stmt, Do):
        arms = " [] ".join(
            f"{print_pred(a.guard)} -> {_print_inline(a.body)}" for a in stmt.arms
        )
        return f"do {arms} od"
    raise ContractError(f"cannot print {stmt!r}")


def _print_proof_node(node: ProofNode, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(node, Immediate):
        return [f"{pad}immediate {node.site}"]
    if isinstance(node, Implication):
        return [f"{pad}implication"]
    if isinstance(node, Impossibility):
        return (
            [f"{pad}impossibility {{"]
            + _print_proof_node(node.sub, indent + 1)
            + [f"{pad}}}"]
        )
    if isinstance(node, Transitivity):
        return (
            [f"{pad}transitivity via {print_pred(node.mid)} {{"]
            + _print_proof_node(node.left, indent + 1)
            + _print_proof_node(node.right, indent + 1)
            + [f"{pad}}}"]
        )
    if isinstance(node, Disjunction):
        lines = [f"{pad}disjunction {{"]
        for c in node.cases:
            goal = f" leadsto {print_pred(c.q)}" if c.q is not None else ""
            lines.append(f"{pad}  case {print_pred(c.p)}{goal}:")
            lines.extend(_print_proof_node(c.sub, indent + 2))
        lines.append(f"{pad}}}")
        return lines
    if isinstance(node, Cancellation):
        return (
            [f"{pad}cancellation via {print_pred(node.d)} {{"]
            + _print_proof_node(node.sub1, indent + 1)
            + _print_proof_node(node.sub2, indent + 1)
            + [f"{pad}}}"]
        )
    if isinstance(node, Psp):
        head = (
            f"{pad}psp {print_pred(node.p)} leadsto {print_pred(node.q)} "
            f"with {print_pred(node.r)} un {print_pred(node.d)} {{"
        )
        return [head] + _print_proof_node(node.sub, indent + 1) + [f"{pad}}}"]
    if isinstance(node, Induction):
        head = (
            f"{pad}induction on {print_pred(node.measure)} in "
            f"{node.lo}..{node.hi} as {node.param} {{"
        )
        return [head] + _print_proof_node(node.template, indent + 1) + [f"{pad}}}"]
    if isinstance(node, Completion):
        lines = [f"{pad}completion via {print_pred(node.d)} {{"]
        for part in node.parts:
            lines.append(
                f"{pad}  part {print_pred(part.p)} leadsto {print_pred(part.q)} {{"
            )
            lines.extend(_print_proof_node(part.sub, indent + 2))
            lines.append(f"{pad}  }}")
        lines.append(f"{pad}}}")
        return lines
    raise ContractError(f"cannot print {node!r}")


def print_proof(name: str, node: ProofNode) -> str:
    return "\n".join([f"proof {name}"] + _print_proof_node(node, 1) + ["end"]) + "\n"


def _print_property(prop: Property) -> str:
    if prop.kind == "postcondition":
        return f"property {prop.name} : postcondition {print_pred(prop.p)}"
    if prop.kind == "deadlockfree":
        return f"property {prop.name} : deadlockfree"
    op = "unless" if prop.kind == "unless" else "leadsto"
    return (
        f"property {prop.name} : {print_pred(prop.p)} {op} {print_pred(prop.q)}"
    )
