"""Query AST nodes and the canonical pretty printer.

The printer emits text that reparses to an equal AST (parse . print == id),
which also makes printed definitions safe to persist in snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass
class Const:
    value: object  # str | int | float | bool | None


@dataclass
class Ref:
    """An item reference constant, written Concept#id."""

    concept: str
    id: int


@dataclass
class HexRef:
    """A raw reference id constant, written 0x...; concept comes from context."""

    id: int


@dataclass
class Path:
    """Identifier with optional dotted steps: binder, parameter or variable."""

    head: str
    steps: tuple = ()


@dataclass
class Unary:
    op: str  # "-" | "NOT"
    operand: object


@dataclass
class Binary:
    op: str  # arithmetic, comparison, AND, OR
    left: object
    right: object


@dataclass
class IsNull:
    operand: object


@dataclass
class Aggregate:
    func: str  # size | sum | avg | min | max
    arg: object  # Query or Path


AGG_FUNCS = ("size", "sum", "avg", "min", "max")


@dataclass
class Source:
    binder: Optional[str]
    sep: str = ":"  # ":" | "in" | "from" (kept for faithful printing)
    path: Optional[Path] = None  # concept/collection path
    restrict: object = None  # optional "=" RHS: Path or constant node
    literal: Optional["LiteralCollection"] = None


@dataclass
class LiteralCollection:
    rows: list = field(default_factory=list)  # list of tuples of Const/Ref
    names: Optional[list] = None


@dataclass
class Ret:
    name: Optional[str]
    expr: object


@dataclass
class Blocks:
    begin: list = field(default_factory=list)  # list of (var, expr)
    before: Optional[list] = None
    after: Optional[list] = None
    end: list = field(default_factory=list)


@dataclass
class Query:
    name: Optional[str] = None
    distinct: bool = False
    sources: list = field(default_factory=list)
    predicate: object = None
    returns: list = field(default_factory=list)  # list of Ret
    blocks: Optional[Blocks] = None


Expr = Union[Const, Ref, HexRef, Path, Unary, Binary, IsNull, Aggregate, Query]


# ---------------------------------------------------------------------------
# pretty printer
# ---------------------------------------------------------------------------

_PREC = {
    "OR": 1,
    "AND": 2,
    # NOT: 3
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6,
}


def print_expr(e, parent_prec: int = 0) -> str:
    if isinstance(e, Const):
        return _print_const(e.value)
    if isinstance(e, Ref):
        return f"{e.concept}#{e.id}"
    if isinstance(e, HexRef):
        return f"0x{e.id:x}"
    if isinstance(e, Path):
        return ".".join((e.head,) + tuple(e.steps))
    if isinstance(e, Unary):
        if e.op == "NOT":
            s = f"NOT {print_expr(e.operand, 3)}"
            return f"({s})" if parent_prec > 3 else s
        s = f"-{print_expr(e.operand, 7)}"
        return f"({s})" if parent_prec > 7 else s
    if isinstance(e, Binary):
        p = _PREC[e.op]
        s = f"{print_expr(e.left, p)} {e.op} {print_expr(e.right, p + 1)}"
        return f"({s})" if parent_prec > p else s
    if isinstance(e, IsNull):
        s = f"{print_expr(e.operand, 5)} is null"
        return f"({s})" if parent_prec > 4 else s
    if isinstance(e, Aggregate):
        return f"{e.func}({print_expr(e.arg)})"
    if isinstance(e, Query):
        return print_query(e)
    raise TypeError(f"cannot print {e!r}")


def _print_const(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _print_stmts(stmts: list) -> str:
    inner = " ".join(f"{var} := {print_expr(expr)};" for var, expr in stmts)
    return "{" + ((" " + inner + " ") if inner else "") + "}"


def _print_source(s: Source) -> str:
    if s.literal is not None:
        body = ", ".join(
            "<" + ", ".join(print_expr(c) for c in row) + ">" if len(row) != 1
            else print_expr(row[0])
            for row in s.literal.rows
        )
        text = "{" + body + "}"
        if s.literal.names is not None:
            text += " <" + ", ".join(s.literal.names) + ">"
    else:
        text = print_expr(s.path)
        if s.restrict is not None:
            text += f" = {print_expr(s.restrict)}"
    if s.binder is not None:
        joiner = ":" if s.sep == ":" else f" {s.sep} "
        return f"{s.binder}{joiner}{text}"
    return text


def _print_rets(rets: list) -> str:
    # Top-level comparisons are parenthesized: a bare ">" would close the tuple.
    parts = []
    for r in rets:
        if r.name is not None:
            parts.append(f"{r.name} = {print_expr(r.expr, 5)}")
        else:
            parts.append(print_expr(r.expr, 5))
    return "<" + ", ".join(parts) + ">"


def print_query(q: Query) -> str:
    prefix = f"{q.name} = " if q.name is not None else ""
    if q.blocks is not None:
        b = q.blocks
        parts = ["begin " + _print_stmts(b.begin)]
        parts.append("over " + _print_source(q.sources[0]))
        if b.before is not None:
            parts.append("before " + _print_stmts(b.before))
        parts.append(f"where ({print_expr(q.predicate)})")
        if b.after is not None:
            parts.append("after " + _print_stmts(b.after))
        parts.append("end " + _print_stmts(b.end))
        parts.append("return " + _print_rets(q.returns))
        return prefix + "{" + " ".join(parts) + "}"
    inner = ", ".join(_print_source(s) for s in q.sources)
    if q.distinct:
        inner = "distinct " + inner
    if q.predicate is not None:
        inner += " | " + print_expr(q.predicate)
    text = prefix + "{" + inner + "}"
    if q.returns:
        text += " " + _print_rets(q.returns)
    return text


# ---------------------------------------------------------------------------
# traversal helpers
# ---------------------------------------------------------------------------

def walk_identifiers(e) -> set:
    """Every identifier mentioned anywhere in an expression (heads and steps)."""
    out: set = set()
    _walk_idents(e, out)
    return out


def _walk_idents(e, out: set) -> None:
    if isinstance(e, Path):
        out.add(e.head)
        out.update(e.steps)
    elif isinstance(e, Unary):
        _walk_idents(e.operand, out)
    elif isinstance(e, Binary):
        _walk_idents(e.left, out)
        _walk_idents(e.right, out)
    elif isinstance(e, IsNull):
        _walk_idents(e.operand, out)
    elif isinstance(e, Aggregate):
        _walk_idents(e.arg, out)
    elif isinstance(e, Query):
        for s in e.sources:
            if s.path is not None:
                _walk_idents(s.path, out)
            if s.restrict is not None:
                _walk_idents(s.restrict, out)
        if e.predicate is not None:
            _walk_idents(e.predicate, out)
        for r in e.returns:
            _walk_idents(r.expr, out)
        if e.blocks is not None:
            for stmts in (e.blocks.begin, e.blocks.before or [], e.blocks.after or [], e.blocks.end):
                for _, expr in stmts:
                    _walk_idents(expr, out)


def expr_heads(e) -> set:
    """Head identifiers of paths in an expression (no steps)."""
    out: set = set()

    def rec(x):
        if isinstance(x, Path):
            out.add(x.head)
        elif isinstance(x, Unary):
            rec(x.operand)
        elif isinstance(x, Binary):
            rec(x.left)
            rec(x.right)
        elif isinstance(x, IsNull):
            rec(x.operand)
        elif isinstance(x, Aggregate):
            rec(x.arg)
        elif isinstance(x, Query):
            for s in x.sources:
                if s.restrict is not None:
                    rec(s.restrict)
                if s.path is not None:
                    out.add(s.path.head)
            if x.predicate is not None:
                rec(x.predicate)
            for r in x.returns:
                rec(r.expr)

    rec(e)
    return out
