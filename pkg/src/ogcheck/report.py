"""Report rendering: human-readable and line-oriented machine text.

The machine format is a sequence of records, one `key: value` pair per
line, records separated by blank lines.  Every obligation id shown in a
report can be re-derived through the `obligations` subcommand.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .frontend import print_pred
from .predicates import Valuation, Value, Label
from .safety import Obligation


def fmt_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def fmt_valuation(cx: Optional[Valuation]) -> str:
    if cx is None:
        return ""
    return " ".join(f"{k}={fmt_value(v)}" for k, v in sorted(cx.items()))


def human_obligation(ob: Obligation, verbose: bool = False) -> list[str]:
    mark = {"valid": "ok", "invalid": "FAIL", "pending": "pending"}[ob.verdict]
    lines = [f"[{mark:7}] {ob.oid}  ({ob.kind}) {ob.rule}"]
    if verbose or not ob.valid:
        lines.append(f"          formula: {print_pred(ob.formula)}")
    if ob.counterexample is not None:
        lines.append(f"          counterexample: {fmt_valuation(ob.counterexample)}")
    if ob.note:
        lines.append(f"          note: {ob.note}")
    return lines


def machine_obligation(ob: Obligation) -> list[str]:
    lines = [
        f"id: {ob.oid}",
        f"kind: {ob.kind}",
        f"site: {ob.site}",
        f"rule: {ob.rule}",
        f"verdict: {ob.verdict}",
        f"formula: {print_pred(ob.formula)}",
    ]
    if ob.counterexample is not None:
        lines.append(f"counterexample: {fmt_valuation(ob.counterexample)}")
    if ob.note:
        lines.append(f"note: {ob.note}")
    return lines


def render_obligations(
    obs: Iterable[Obligation], machine: bool, verbose: bool = False
) -> str:
    blocks: list[list[str]] = []
    for ob in obs:
        blocks.append(
            machine_obligation(ob) if machine else human_obligation(ob, verbose)
        )
    if machine:
        return "\n\n".join("\n".join(b) for b in blocks) + ("\n" if blocks else "")
    return "\n".join("\n".join(b) for b in blocks) + ("\n" if blocks else "")


def summary_line(name: str, verdict: str) -> str:
    return f"{name}: {verdict}"
