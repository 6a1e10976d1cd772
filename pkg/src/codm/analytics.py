"""Semantics propagation over the schema: aggregation, cubes, inference,
hierarchy trees.

Everything here is read-only. Cubes aggregate a measure over a fact concept
for every combination of axis items; roll-up and drill-down move one axis
along a dimension without touching fact or measure. Inference propagates
allowed-item constraints down to common subconcepts and survivor sets back up
to a target concept.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

import csv
import itertools

from .errors import (
    EvalTypeError,
    InvalidAxisPath,
    InvalidTreeSpec,
    NoCommonSubconcept,
    NoSuchLevel,
    UnknownProperty,
)
from .query.evaluator import ResultConcept, eval_expr_for_item
from .query.parser import parse_expression
from .schema import DimPath
from .store import Database, ItemRef, render_value


class _Empty:
    """A cell with no fact items at all (distinct from an aggregated null)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"


EMPTY = _Empty()


@dataclass
class Axis:
    concept: int
    path: DimPath  # reach-path from the fact concept


@dataclass
class CubeSpec:
    fact: int
    axes: list[Axis]
    measure: object = None  # Expr over a fact item; None for size
    agg: str = "sum"
    filters: list = field(default_factory=list)


@dataclass
class Cell:
    coords: tuple
    value: object  # number | None | EMPTY


@dataclass
class Level:
    concept: int
    via: object = None  # DimPath or property name; None only for the first level
    show: list = field(default_factory=list)  # (label, Expr) pairs
    filter: object = None


@dataclass
class TreeSpec:
    levels: list[Level]


@dataclass
class TreeNode:
    level: int  # 0 is the virtual root
    ref: Optional[ItemRef]
    props: dict = field(default_factory=dict)
    children: list = field(default_factory=list)


def _as_expr(measure):
    if measure is None or not isinstance(measure, str):
        return measure
    return parse_expression(measure)


def _agg(agg: str, values: list):
    if agg == "size":
        return len(values)
    values = [v for v in values if v is not None]
    if agg == "sum":
        return sum(values)
    if not values:
        return None
    if agg == "avg":
        return sum(values) / len(values)
    if agg == "min":
        return min(values)
    if agg == "max":
        return max(values)
    raise EvalTypeError(f"unknown aggregate {agg!r}")


# ---------------------------------------------------------------------------
# grouping
# ---------------------------------------------------------------------------

def group_aggregate(db: Database, groups: int, member, measure, agg: str) -> ResultConcept:
    """One row per group item, aggregating its member collection.

    `member` names either a subitem path ("Sales.country": items of Sales
    reaching the group via country) or a multi-valued property of the group
    concept. Empty collections aggregate to size 0, sum 0, otherwise null.
    """
    gname = db.schema.concept(groups).name
    measure = _as_expr(measure)
    if isinstance(member, DimPath):
        sub, path = member.source, member
    elif isinstance(member, str) and "." in member:
        head, rest = member.split(".", 1)
        sub = db.schema.resolve(head)
        path = DimPath(sub, tuple(rest.split(".")))
    elif isinstance(member, str):
        db.mv_def(groups, member)  # raises UnknownProperty when absent
        sub, path = None, member
    else:
        raise UnknownProperty(f"cannot interpret member {member!r}")
    rows = []
    for g in db.extent(groups):
        if sub is None:
            members = db.mv_get(g, path)
        else:
            members = db.get_subs(g, sub, path)
        if agg == "size":
            rows.append((g, len(members)))
            continue
        values = [eval_expr_for_item(db, m, measure) for m in members]
        rows.append((g, _agg(agg, values)))
    return ResultConcept(None, [gname, agg], rows)


# ---------------------------------------------------------------------------
# cubes
# ---------------------------------------------------------------------------

def _check_axis(db: Database, fact: int, axis: Axis) -> None:
    if axis.path.source != fact:
        raise InvalidAxisPath("reach-path must start at the fact concept")
    try:
        target = db.schema.path_target(axis.path)
    except Exception as exc:
        raise InvalidAxisPath(str(exc))
    if target != axis.concept:
        raise InvalidAxisPath(
            f"reach-path ends at {db.schema.concept(target).name}, "
            f"axis is {db.schema.concept(axis.concept).name}"
        )


def build_cube(db: Database, spec: CubeSpec) -> list[Cell]:
    """Cells for the full cross product of axis extents, row-major."""
    for axis in spec.axes:
        _check_axis(db, spec.fact, axis)
    measure = _as_expr(spec.measure)
    filters = [_as_expr(f) for f in spec.filters]
    facts = []
    for f in db.extent(spec.fact):
        if all(eval_expr_for_item(db, f, flt) is True for flt in filters):
            coords = tuple(db.get_super(f, a.path) for a in spec.axes)
            facts.append((f, coords))
    cells = []
    for coords in itertools.product(*(db.extent(a.concept) for a in spec.axes)):
        hits = [f for f, fc in facts if fc == coords]
        if not hits:
            cells.append(Cell(coords, EMPTY))
            continue
        if spec.agg == "size" or measure is None:
            cells.append(Cell(coords, _agg("size", hits)))
            continue
        values = [eval_expr_for_item(db, f, measure) for f in hits]
        cells.append(Cell(coords, _agg(spec.agg, values)))
    return cells


def _bind_expr(db: Database, cid: int, expr, binder: str):
    """Rebase bare item-property paths onto an explicit binder name."""
    from .query.ast import Aggregate, Binary, IsNull, Path, Query, Unary
    from .query.evaluator import _head_resolves

    def rec(e):
        if isinstance(e, Path):
            if _head_resolves(db, cid, (e.head,) + tuple(e.steps)):
                return Path(binder, (e.head,) + tuple(e.steps))
            return e
        if isinstance(e, Unary):
            return Unary(e.op, rec(e.operand))
        if isinstance(e, Binary):
            return Binary(e.op, rec(e.left), rec(e.right))
        if isinstance(e, IsNull):
            return IsNull(rec(e.operand))
        if isinstance(e, Aggregate):
            return Aggregate(e.func, rec(e.arg)) if not isinstance(e.arg, Query) else e
        return e

    return rec(expr)


def cube_query_text(db: Database, spec: CubeSpec) -> str:
    """The equivalent plain query: one row per axis combination, aggregated."""
    from .query.ast import print_expr

    binders = []
    conds = []
    for i, a in enumerate(spec.axes):
        binders.append(f"d{i + 1}:{db.schema.concept(a.concept).name}")
        conds.append(f"t.{'.'.join(a.path.steps)} == d{i + 1}")
    for flt in spec.filters:
        conds.append(print_expr(_bind_expr(db, spec.fact, _as_expr(flt), "t"), 3))
    fact = db.schema.concept(spec.fact).name
    pred = " AND ".join(conds)
    if spec.agg == "size" or spec.measure is None:
        agg = f"size({{t:{fact} | {pred}}})"
    else:
        m = _bind_expr(db, spec.fact, _as_expr(spec.measure), "t")
        agg = f"{spec.agg}({{t:{fact} | {pred}}} <{print_expr(m, 5)}>)"
    coords = ", ".join(f"d{i + 1}" for i in range(len(spec.axes)))
    return f"{{{', '.join(binders)}}} <{coords}, {agg}>"


def change_level(db: Database, spec: CubeSpec, axis_index: int, direction: str, via: str) -> CubeSpec:
    """Move one axis up or down a dimension; fact and measure stay put."""
    if not 0 <= axis_index < len(spec.axes):
        raise NoSuchLevel(f"no axis {axis_index}")
    axis = spec.axes[axis_index]
    if direction == "roll_up":
        c = db.schema.concept(axis.concept)
        d = c.dim(via)
        if d is None or d.direct:
            raise NoSuchLevel(f"no dimension {via!r} on {c.name}")
        new_axis = Axis(d.domain, axis.path.extended(via))
    elif direction == "drill_down":
        if not axis.path.steps or axis.path.steps[-1] != via:
            raise NoSuchLevel(
                f"{via!r} is not the dimension reaching this axis on the fact path"
            )
        down = DimPath(axis.path.source, axis.path.steps[:-1])
        new_axis = Axis(db.schema.path_target(down), down)
    else:
        raise NoSuchLevel(f"direction must be roll_up or drill_down, got {direction!r}")
    axes = list(spec.axes)
    axes[axis_index] = new_axis
    return replace(spec, axes=axes)


def cube_csv(db: Database, spec: CubeSpec, cells: Optional[list[Cell]] = None,
             include_empty: bool = False) -> str:
    """CSV dump: axis labels then value, sorted by coordinate labels."""
    if cells is None:
        cells = build_cube(db, spec)
    rows = []
    for cell in cells:
        if cell.value is EMPTY and not include_empty:
            continue
        labels = [_coord_label(db, c) for c in cell.coords]
        value = "" if cell.value is EMPTY else render_value(db, cell.value)
        rows.append(labels + [value])
    rows.sort(key=lambda r: r[:-1])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [db.schema.concept(a.concept).name for a in spec.axes] + [spec.agg]
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _coord_label(db: Database, ref) -> str:
    if not isinstance(ref, ItemRef):
        return render_value(db, ref)
    paths = db.schema.canonical_syntax(ref.concept)
    if paths:
        v = db.get_super(ref, paths[0])
        if isinstance(v, str):
            return v
        return render_value(db, v)
    return db._fmt(ref)


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def infer(db: Database, inputs: dict, target: int) -> list[ItemRef]:
    """Allowed target items under per-concept allowed-item constraints.

    Constraints propagate down to every maximal common subconcept of the
    constrained concepts and the target, filter its items (a fact survives
    only when every path into a constrained concept lands in the allowed
    set; null never does), and the survivors' target items propagate back
    up. Results from several maximal subconcepts are unioned.
    """
    allowed_sets = {cid: set(refs) for cid, refs in inputs.items()}
    relevant = list(allowed_sets.keys())
    candidates = []
    for c in db.schema.user_concepts():
        paths_to_target = db.schema.enumerate_paths(c.id, target)
        paths_to_target = [p for p in paths_to_target if p.rank >= 1]
        if not paths_to_target:
            continue
        if all(db.schema.enumerate_paths(c.id, cid) for cid in relevant):
            candidates.append(c.id)
    if not candidates:
        raise NoCommonSubconcept(
            f"no common subconcept connects the inputs with "
            f"{db.schema.concept(target).name}"
        )
    maximal = [
        f for f in candidates
        if not any(
            g != f and any(p.rank >= 1 for p in db.schema.enumerate_paths(f, g))
            for g in candidates
        )
    ]
    reached: set[ItemRef] = set()
    for fcid in maximal:
        target_paths = [p for p in db.schema.enumerate_paths(fcid, target) if p.rank >= 1]
        for f in db.extent(fcid):
            ok = True
            for cid, allowed in allowed_sets.items():
                for p in db.schema.enumerate_paths(fcid, cid):
                    v = db.get_super(f, p)
                    if v is None or v not in allowed:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            for p in target_paths:
                v = db.get_super(f, p)
                if v is not None:
                    reached.add(v)
    if target in allowed_sets:
        reached &= allowed_sets[target]
    return [r for r in db.extent(target) if r in reached]


# ---------------------------------------------------------------------------
# hierarchy trees
# ---------------------------------------------------------------------------

def hierarchy_tree(db: Database, spec: TreeSpec, depth_limit: Optional[int] = None) -> TreeNode:
    """Expand the database into a tree of items, level by level.

    The root is the virtual top concept. A level expands its parent either
    downward (a path from the level's concept up to the parent: subitems),
    upward (a path from the parent to the level's concept: the referenced
    superitem), or through a named multi-valued or virtual property of the
    parent.
    """
    if not spec.levels:
        raise InvalidTreeSpec("a tree needs at least one level")
    for k, level in enumerate(spec.levels):
        if k == 0:
            continue
        if level.via is None:
            raise InvalidTreeSpec(f"level {k + 1} needs an expansion rule")
        if isinstance(level.via, DimPath):
            src, tgt = level.via.source, db.schema.path_target(level.via)
            prev = spec.levels[k - 1].concept
            ok = (src == level.concept and tgt == prev) or (src == prev and tgt == level.concept)
            if not ok:
                raise InvalidTreeSpec(
                    f"level {k + 1} expansion does not connect the two concepts"
                )
    root = TreeNode(0, None)
    _expand(db, spec, root, None, 0, depth_limit)
    return root


def _expand(db, spec, node, parent_ref, k, depth_limit):
    if k >= len(spec.levels):
        return
    if depth_limit is not None and k >= depth_limit:
        return
    level = spec.levels[k]
    if k == 0:
        children = db.extent(level.concept)
    else:
        children = _expand_rule(db, spec.levels[k - 1], level, parent_ref)
    for ref in children:
        if level.filter is not None and \
                eval_expr_for_item(db, ref, _as_expr(level.filter)) is not True:
            continue
        props = {}
        for label, expr in level.show:
            props[label] = eval_expr_for_item(db, ref, _as_expr(expr))
        child = TreeNode(k + 1, ref, props)
        node.children.append(child)
        _expand(db, spec, child, ref, k + 1, depth_limit)


def _expand_rule(db, prev_level, level, parent_ref) -> list[ItemRef]:
    via = level.via
    if isinstance(via, DimPath):
        if via.source == level.concept:
            return db.get_subs(parent_ref, level.concept, via)
        v = db.get_super(parent_ref, via)
        return [v] if isinstance(v, ItemRef) else []
    # property name on the parent concept
    if via in db.mvprops.get(prev_level.concept, {}):
        return [t for t in db.mv_get(parent_ref, via) if t.concept == level.concept]
    if via in db.vprops.get(prev_level.concept, {}):
        v = eval_expr_for_item(db, parent_ref, db.vprops[prev_level.concept][via].body)
        return [v] if isinstance(v, ItemRef) and v.concept == level.concept else []
    raise InvalidTreeSpec(f"no expansion {via!r} between the two levels")


def tree_dump(db: Database, root: TreeNode) -> str:
    """Indented text form, two spaces per depth."""
    lines = []

    def emit(node, depth):
        if node.ref is None:
            label = "⊤"
        else:
            label = db.label(node.ref)
        props = ""
        if node.props:
            inner = " ".join(f"{k}={render_value(db, v)}" for k, v in node.props.items())
            props = f" [{inner}]"
        lines.append("  " * depth + label + props)
        for child in node.children:
            emit(child, depth + 1)

    emit(root, 0)
    return "\n".join(lines) + "\n"
