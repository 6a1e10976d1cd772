"""Canonical (flat) form of items, concepts and whole databases.

The canonical form of an item maps every primitive path of its concept to the
primitive value reached along it (null as soon as any slot on the way is
null). The database canonical form is the bottom concept's inherited
relation: one flat tuple per item of each bottom parent, null everywhere
outside that parent's block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import IncomparableSchemas
from .schema import BOTTOM, DimPath
from .store import Database, ItemRef


@dataclass
class CanonicalRelation:
    concept: int
    keys: list[str]
    tuples: list[dict] = field(default_factory=list)  # multiset, stable order


def canonical_item(db: Database, ref: ItemRef) -> dict:
    """Flat tuple of `ref`: canonical path-name -> primitive value or null."""
    db.item(ref)
    out = {}
    for path in db.schema.canonical_syntax(ref.concept):
        out[db.schema.path_name(path)] = db.get_super(ref, path)
    return out


def concept_semantics(db: Database, cid: int) -> CanonicalRelation:
    """Canonical relation of one concept, extent order preserved."""
    keys = [db.schema.path_name(p) for p in db.schema.canonical_syntax(cid)]
    rel = CanonicalRelation(cid, keys)
    for ref in db.extent(cid):
        rel.tuples.append(canonical_item(db, ref))
    return rel


def database_semantics(db: Database) -> CanonicalRelation:
    """The bottom concept's relation.

    Each bottom parent contributes one tuple per item; columns of other
    parents stay null. Primitive bottom parents contribute columns only
    (their extents are not materialized).
    """
    paths = db.schema.canonical_syntax(BOTTOM)
    keys = [db.schema.path_name(p) for p in paths]
    rel = CanonicalRelation(BOTTOM, keys)
    for pid in db.schema.bottom_parents():
        parent = db.schema.concept(pid)
        if parent.primitive:
            continue
        prefix = parent.name + "."
        for ref in db.extent(pid):
            flat = canonical_item(db, ref)
            tup = {k: None for k in keys}
            for k, v in flat.items():
                tup[prefix + k if k else parent.name] = v
            rel.tuples.append(tup)
    return rel


def _sort_key(keys: list[str], tup: dict):
    out = []
    for k in keys:
        v = tup[k]
        if v is None:
            out.append((2, "", ""))
        elif isinstance(v, bool):
            out.append((1, "b", str(v)))
        elif isinstance(v, (int, float)):
            out.append((0, "n", v))
        else:
            out.append((1, "s", v))
    return out


def sorted_tuples(rel: CanonicalRelation) -> list[dict]:
    return sorted(rel.tuples, key=lambda t: _sort_key(rel.keys, t))


def semantic_equal(a: Database, b: Database) -> bool:
    """Whether two databases have equal canonical semantics.

    Tuples are matched by path-name string; reference identity is ignored.
    Raises IncomparableSchemas when the canonical key sets differ.
    """
    ra = database_semantics(a)
    rb = database_semantics(b)
    if set(ra.keys) != set(rb.keys):
        raise IncomparableSchemas(
            f"canonical path-name sets differ: {sorted(set(ra.keys) ^ set(rb.keys))}"
        )
    if len(ra.tuples) != len(rb.tuples):
        return False
    keys = sorted(ra.keys)
    norm_a = sorted(([t[k] for k in keys] for t in ra.tuples), key=_row_key)
    norm_b = sorted(([t[k] for k in keys] for t in rb.tuples), key=_row_key)
    return norm_a == norm_b


def _row_key(row: list):
    out = []
    for v in row:
        if v is None:
            out.append((2, "", ""))
        elif isinstance(v, bool):
            out.append((1, "b", str(v)))
        elif isinstance(v, (int, float)):
            out.append((0, "n", v))
        else:
            out.append((1, "s", v))
    return out


def dump_relation(db: Database, rel: CanonicalRelation) -> str:
    """Deterministic text form: sorted header, tab-separated rows, nulls last."""
    from .store import render_value

    keys = sorted(rel.keys)
    lines = ["\t".join(keys)]
    rows = sorted(([t[k] for k in keys] for t in rel.tuples), key=_row_key)
    for row in rows:
        lines.append("\t".join(render_value(db, v) for v in row))
    return "\n".join(lines) + "\n"
