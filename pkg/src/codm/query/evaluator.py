"""Query evaluation: nested-loop products, predicates, returns and blocks.

Evaluation is read-only over the database. Sources iterate in declared
order (first source outermost); a binder is visible to every source declared
after it and to the predicate and returns. Null short-circuits path
navigation and makes every comparison false; `is null` is the only
null-positive test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

from ..errors import (
    DomainViolation,
    EvalTypeError,
    UnboundBlockVariable,
    UnknownConcept,
    UnknownParameter,
    UnknownProperty,
)
from ..schema import DimPath
from ..store import Database, ItemRef
from .ast import (
    Aggregate,
    Binary,
    Const,
    HexRef,
    IsNull,
    Path,
    Query,
    Ref,
    Ret,
    Source,
    Unary,
    expr_heads,
)


@dataclass(frozen=True)
class RawId:
    """A 0x... reference constant; the concept comes from context."""

    id: int


@dataclass(frozen=True)
class RowView:
    """A multi-column row bound to a binder (literal collections, views)."""

    columns: tuple
    values: tuple

    def get(self, name: str):
        try:
            return self.values[self.columns.index(name)]
        except ValueError:
            raise UnknownProperty(f"no column {name!r} in row {self.columns}")


@dataclass
class ResultConcept:
    """A derived concept: named columns plus ordered rows of values."""

    name: Optional[str]
    columns: list[str]
    rows: list[tuple]
    domains: list = field(default_factory=list)

    def __post_init__(self):
        if not self.domains:
            self.domains = [None] * len(self.columns)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


@dataclass
class Binding:
    value: Any
    concept: Optional[int]  # concept id when the value is an item reference


class Frame:
    def __init__(self, item_ref: Optional[ItemRef] = None, block: bool = False):
        self.bindings: dict[str, Binding] = {}
        self.item_ref = item_ref  # bare names resolve against this item
        self.block = block

    def set(self, name: str, value, concept=None):
        self.bindings[name] = Binding(value, concept)


class Scope:
    def __init__(self, frames: Optional[list[Frame]] = None):
        self.frames: list[Frame] = frames or []

    def push(self, frame: Frame) -> "Scope":
        return Scope(self.frames + [frame])

    def lookup(self, name: str) -> Optional[Binding]:
        for frame in reversed(self.frames):
            b = frame.bindings.get(name)
            if b is not None:
                return b
        return None

    def in_block(self) -> bool:
        return any(f.block for f in self.frames)

    def item_context(self) -> Optional[ItemRef]:
        for frame in reversed(self.frames):
            if frame.item_ref is not None:
                return frame.item_ref
        return None

    def innermost_of_concept(self, cid: int):
        """Innermost binding whose value is an item of `cid`.

        Raises UnknownParameter when the innermost frame holding candidates
        holds more than one.
        """
        for frame in reversed(self.frames):
            hits = [b for b in frame.bindings.values() if b.concept == cid]
            if frame.item_ref is not None and frame.item_ref.concept == cid:
                hits.append(Binding(frame.item_ref, cid))
            if len(hits) == 1:
                return hits[0].value
            if len(hits) > 1:
                raise UnknownParameter(
                    "ambiguous implicit parent; use the explicit '= p' form"
                )
        return None


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def evaluate_query(db: Database, q: Query, params: Optional[dict] = None) -> ResultConcept:
    scope = Scope()
    if params:
        base = Frame()
        for k, v in params.items():
            base.set(k, v, v.concept if isinstance(v, ItemRef) else None)
        scope = scope.push(base)
    return _eval_query(db, q, scope)


def evaluate_block_query(db: Database, q: Query, params: Optional[dict] = None) -> ResultConcept:
    if q.blocks is None:
        raise EvalTypeError("query has no blocks")
    return evaluate_query(db, q, params)


def eval_expr_for_item(db: Database, ref: ItemRef, expr) -> Any:
    """Evaluate an expression in an item's own scope (bare property names)."""
    return _eval(db, expr, Scope([Frame(item_ref=ref)]))


# ---------------------------------------------------------------------------
# query evaluation
# ---------------------------------------------------------------------------

def _eval_query(db: Database, q: Query, scope: Scope) -> ResultConcept:
    if q.blocks is not None:
        return _eval_block_query(db, q, scope)
    frame = Frame()
    inner = scope.push(frame)
    out_rows: list[tuple] = []
    binder_vals: list = [None] * len(q.sources)

    def rec(k: int):
        if k == len(q.sources):
            if q.predicate is not None and _truth(_eval(db, q.predicate, inner)) is not True:
                return
            if q.returns:
                out_rows.append(tuple(_eval(db, r.expr, inner) for r in q.returns))
            else:
                out_rows.append(tuple(binder_vals))
            return
        src = q.sources[k]
        for value, concept in _source_rows(db, src, inner):
            binder_vals[k] = value
            if src.binder is not None:
                frame.set(src.binder, value, concept)
            rec(k + 1)

    rec(0)
    columns, domains = _result_columns(db, q, scope)
    rows = _dedupe(out_rows) if q.distinct else out_rows
    res = ResultConcept(q.name, columns, rows, domains)
    _infer_domains(res)
    return res


def _dedupe(rows: list[tuple]) -> list[tuple]:
    seen = set()
    out = []
    for r in rows:
        if r not in seen:
            seen.add(r)
            out.append(r)
    return out


def _result_columns(db: Database, q: Query, scope: Scope):
    names: list[str] = []
    if q.returns:
        raw = []
        for r in q.returns:
            if r.name is not None:
                raw.append(r.name)
            else:
                raw.append(_auto_name(r.expr))
    else:
        raw = []
        for s in q.sources:
            if s.binder is not None:
                raw.append(s.binder)
            elif s.path is not None:
                raw.append(s.path.head)
            else:
                raw.append("lit")
    for n in raw:
        if n in names:
            k = 2
            while f"{n}{k}" in names:
                k += 1
            n = f"{n}{k}"
        names.append(n)
    return names, [None] * len(names)


def _auto_name(e) -> str:
    if isinstance(e, Path):
        return e.steps[-1] if e.steps else e.head
    if isinstance(e, Aggregate):
        return e.func
    return "col"


def _infer_domains(res: ResultConcept) -> None:
    for i in range(len(res.columns)):
        for row in res.rows:
            v = row[i]
            if v is None:
                continue
            if isinstance(v, ItemRef):
                res.domains[i] = v.concept
            elif isinstance(v, bool):
                res.domains[i] = "Boolean"
            elif isinstance(v, int):
                res.domains[i] = "Integer"
            elif isinstance(v, float):
                res.domains[i] = "Real"
            elif isinstance(v, str):
                res.domains[i] = "String"
            break


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------

def _source_rows(db: Database, src: Source, scope: Scope) -> Iterator[tuple]:
    """Yield (value, concept-or-None) pairs for one source binding."""
    if src.literal is not None:
        lit = src.literal
        arity = len(lit.rows[0]) if lit.rows else 0
        for row in lit.rows:
            if len(row) != arity:
                raise DomainViolation("ragged literal collection")
        if arity == 1:
            for row in lit.rows:
                yield _eval(db, row[0], scope), _const_concept(db, row[0])
            return
        names = lit.names or [f"v{i + 1}" for i in range(arity)]
        for row in lit.rows:
            yield RowView(tuple(names), tuple(_eval(db, c, scope) for c in row)), None
        return

    head = src.path.head
    steps = src.path.steps
    bound = scope.lookup(head)
    if bound is not None:
        v = _nav(db, bound.value, steps, scope)
        if isinstance(v, list):
            for t in v:
                yield t, t.concept if isinstance(t, ItemRef) else None
            return
        raise EvalTypeError(f"source {head}.{'.'.join(steps)} is not a collection")
    if head in db.views:
        if steps:
            raise UnknownProperty("views have no parent-restricted sources")
        res = _eval_query(db, db.views[head], Scope())
        if len(res.columns) == 1:
            dom = res.domains[0]
            cid = dom if isinstance(dom, int) else None
            for row in res.rows:
                yield row[0], cid
        else:
            for row in res.rows:
                yield RowView(tuple(res.columns), row), None
        return
    if db.schema.has(head):
        cid = db.schema.resolve(head)
        if not steps:
            if src.restrict is not None:
                raise UnknownProperty("a parent restriction needs a dimension path")
            for ref in db.extent(cid):
                yield ref, cid
            return
        dom = _steps_target(db, cid, steps)
        if src.restrict is not None:
            rhs = _eval(db, src.restrict, scope)
        else:
            rhs = scope.innermost_of_concept(dom)
            if rhs is None:
                raise UnknownParameter(
                    f"no enclosing binder of {db.schema.concept(dom).name} for "
                    f"{head}.{'.'.join(steps)}; use the explicit '= p' form"
                )
        if isinstance(rhs, RawId):
            rhs = ItemRef(dom, rhs.id)
        for ref in db.extent(cid):
            if _nav(db, ref, steps, scope) == rhs:
                yield ref, cid
        return
    raise UnknownConcept(f"unknown source {head!r}")


def _const_concept(db: Database, c) -> Optional[int]:
    if isinstance(c, Ref):
        return db.schema.resolve(c.concept)
    return None


def _steps_target(db: Database, cid: int, steps) -> int:
    """Concept reached by navigating `steps` (dimension names, possibly
    spanning several dotted tokens) from `cid`."""
    cur = cid
    rest = list(steps)
    while rest:
        c = db.schema.concept(cur)
        for k in range(1, len(rest) + 1):
            d = c.dim(".".join(rest[:k]))
            if d is not None:
                cur = d.domain
                del rest[:k]
                break
        else:
            raise UnknownProperty(f"no dimension {rest[0]!r} on {c.name}")
    return cur


# ---------------------------------------------------------------------------
# block queries
# ---------------------------------------------------------------------------

def _eval_block_query(db: Database, q: Query, scope: Scope) -> ResultConcept:
    b = q.blocks
    src = q.sources[0]
    frame = Frame(block=True)
    inner = scope.push(frame)

    def run(stmts):
        for var, expr in stmts:
            frame.set(var, _eval(db, expr, inner))

    run(b.begin)
    before_vars = {var for var, _ in (b.before or [])}
    watched = ({src.binder} if src.binder else set()) | before_vars
    per_row = any(expr_heads(r.expr) & watched for r in q.returns)
    out_rows: list[tuple] = []
    for value, concept in _source_rows(db, src, inner):
        if src.binder is not None:
            frame.set(src.binder, value, concept)
        if b.before:
            run(b.before)
        if _truth(_eval(db, q.predicate, inner)) is not True:
            continue
        if b.after:
            run(b.after)
        if per_row:
            out_rows.append(tuple(_eval(db, r.expr, inner) for r in q.returns))
    run(b.end)
    if not per_row:
        out_rows.append(tuple(_eval(db, r.expr, inner) for r in q.returns))
    columns, domains = _result_columns(db, q, scope)
    res = ResultConcept(q.name, columns, out_rows, domains)
    _infer_domains(res)
    return res


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------

def _eval(db: Database, e, scope: Scope):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Ref):
        return ItemRef(db.schema.resolve(e.concept), e.id)
    if isinstance(e, HexRef):
        return RawId(e.id)
    if isinstance(e, Path):
        return _eval_path(db, e, scope)
    if isinstance(e, Unary):
        if e.op == "NOT":
            v = _truth(_eval(db, e.operand, scope))
            return not v
        v = _eval(db, e.operand, scope)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise EvalTypeError(f"cannot negate {v!r}")
        return -v
    if isinstance(e, Binary):
        return _eval_binary(db, e, scope)
    if isinstance(e, IsNull):
        return _eval(db, e.operand, scope) is None
    if isinstance(e, Aggregate):
        return _eval_aggregate(db, e, scope)
    if isinstance(e, Query):
        raise EvalTypeError(
            "a nested query can only be consumed by an aggregate or used as a source"
        )
    raise EvalTypeError(f"cannot evaluate {e!r}")


def _eval_path(db: Database, p: Path, scope: Scope):
    bound = scope.lookup(p.head)
    if bound is not None:
        return _nav(db, bound.value, p.steps, scope)
    ctx = scope.item_context()
    if ctx is not None and _head_resolves(db, ctx.concept, (p.head,) + tuple(p.steps)):
        return _nav(db, ctx, (p.head,) + tuple(p.steps), scope)
    if scope.in_block():
        raise UnboundBlockVariable(f"unbound block variable {p.head!r}")
    raise UnknownParameter(f"unknown name {p.head!r}")


def _head_resolves(db: Database, cid: int, tokens) -> bool:
    """Whether the leading tokens name a dim/property of concept `cid`."""
    c = db.schema.concept(cid)
    for k in range(1, len(tokens) + 1):
        if c.dim(".".join(tokens[:k])) is not None:
            return True
    head = tokens[0]
    return head in db.vprops.get(cid, {}) or head in db.mvprops.get(cid, {})


def _nav(db: Database, value, steps, scope: Scope):
    """Walk property steps over a runtime value.

    Dimension names may span several dotted tokens (merge creates such
    names); the shortest match wins. Virtual properties evaluate in the
    item's own scope; a multi-valued property yields the link targets and
    must be the final step.
    """
    rest = list(steps)
    while rest:
        if value is None:
            return None
        if isinstance(value, RowView):
            value = value.get(rest.pop(0))
            continue
        if isinstance(value, ItemRef):
            c = db.schema.concept(value.concept)
            matched = False
            for k in range(1, len(rest) + 1):
                name = ".".join(rest[:k])
                idx = c.dim_index(name)
                if idx >= 0:
                    value = db.item(value).values[idx]
                    del rest[:k]
                    matched = True
                    break
            if matched:
                continue
            step = rest[0]
            vprop = db.vprops.get(value.concept, {}).get(step)
            if vprop is not None:
                value = eval_expr_for_item(db, value, vprop.body)
                rest.pop(0)
                continue
            if step in db.mvprops.get(value.concept, {}):
                value = db.mv_get(value, step)
                rest.pop(0)
                if rest:
                    raise EvalTypeError(
                        f"multi-valued property {step!r} must be the last step"
                    )
                continue
            raise UnknownProperty(f"no property {step!r} on {c.name}")
        if isinstance(value, list):
            raise EvalTypeError("collections have no properties")
        raise UnknownProperty(f"no property {rest[0]!r} on a primitive value")
    return value


def _truth(v) -> bool:
    if v is None:
        return False
    if isinstance(v, bool):
        return v
    raise EvalTypeError(f"expected a boolean, got {v!r}")


def _eval_binary(db: Database, e: Binary, scope: Scope):
    op = e.op
    if op == "AND":
        return _truth(_eval(db, e.left, scope)) and _truth(_eval(db, e.right, scope))
    if op == "OR":
        return _truth(_eval(db, e.left, scope)) or _truth(_eval(db, e.right, scope))
    left = _eval(db, e.left, scope)
    right = _eval(db, e.right, scope)
    if op in ("+", "-", "*", "/"):
        if left is None or right is None:
            return None
        for v in (left, right):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise EvalTypeError(f"arithmetic needs numbers, got {v!r}")
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if right == 0:
            raise EvalTypeError("division by zero")
        return left / right
    if left is None or right is None:
        return False
    if op == "==":
        return _values_equal(left, right)
    if op == "!=":
        return not _values_equal(left, right)
    # ordering
    if isinstance(left, bool) or isinstance(right, bool):
        raise EvalTypeError("booleans have no ordering")
    if isinstance(left, (int, float)) and isinstance(right, (int, float)):
        pass
    elif isinstance(left, str) and isinstance(right, str):
        pass
    else:
        raise EvalTypeError(f"cannot order {left!r} and {right!r}")
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise EvalTypeError(f"unknown operator {op!r}")


def _values_equal(a, b) -> bool:
    if isinstance(a, RawId) and isinstance(b, ItemRef):
        return a.id == b.id
    if isinstance(b, RawId) and isinstance(a, ItemRef):
        return b.id == a.id
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    if isinstance(a, ItemRef) != isinstance(b, ItemRef):
        return False
    return a == b


def _eval_aggregate(db: Database, e: Aggregate, scope: Scope):
    if isinstance(e.arg, Query):
        res = _eval_query(db, e.arg, scope)
        if e.func == "size":
            return len(res.rows)
        if len(res.columns) != 1:
            raise EvalTypeError(
                f"{e.func} needs a single-column query, got {len(res.columns)} columns"
            )
        values = [r[0] for r in res.rows if r[0] is not None]
    else:
        v = _eval(db, e.arg, scope)
        if not isinstance(v, list):
            raise EvalTypeError(f"{e.func} needs a collection")
        if e.func == "size":
            return len(v)
        values = [x for x in v if x is not None]
    if e.func == "sum":
        total = 0
        for x in values:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise EvalTypeError(f"sum needs numbers, got {x!r}")
            total += x
        return total
    if not values:
        return None
    if e.func == "avg":
        total = 0.0
        for x in values:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise EvalTypeError(f"avg needs numbers, got {x!r}")
            total += x
        return total / len(values)
    if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in values):
        return min(values) if e.func == "min" else max(values)
    if all(isinstance(x, str) for x in values):
        return min(values) if e.func == "min" else max(values)
    raise EvalTypeError(f"{e.func} needs comparable values")


# ---------------------------------------------------------------------------
# constraint triggers
# ---------------------------------------------------------------------------

def collect_trigger_concepts(db: Database, owner: int, expr) -> set[int]:
    """Concepts whose mutation can change `expr`'s value for an owner item."""
    from .ast import walk_identifiers

    out: set[int] = set()

    def rec(e):
        if isinstance(e, Query):
            for s in e.sources:
                if s.path is not None:
                    head = s.path.head
                    if head in db.views:
                        rec(db.views[head])
                    elif db.schema.has(head):
                        out.add(db.schema.resolve(head))
            if e.predicate is not None:
                rec(e.predicate)
            for r in e.returns:
                rec(r.expr)
        elif isinstance(e, Unary):
            rec(e.operand)
        elif isinstance(e, Binary):
            rec(e.left)
            rec(e.right)
        elif isinstance(e, IsNull):
            rec(e.operand)
        elif isinstance(e, Aggregate):
            rec(e.arg)

    rec(expr)
    idents = walk_identifiers(expr)
    for cid, props in db.mvprops.items():
        for name, p in props.items():
            if name in idents:
                out.add(p.hidden)
    for cid, props in db.vprops.items():
        for name, p in props.items():
            if name in idents:
                out.update(collect_trigger_concepts(db, cid, p.body))
    return out
