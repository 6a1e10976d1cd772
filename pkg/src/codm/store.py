"""Extents and the item life cycle.

The Database owns a Schema plus one extent per concept. Items are
combinations of superitem references (or primitive values, or null), one slot
per dimension. Deleting an item propagates: referencing slots are nulled when
their dimension is nullable, otherwise the referencing item is deleted too.
Items of local-scope concepts are garbage collected once nothing references
them.

Mutations are serialized under an engine-wide writer lock; reads see
quiescent state only.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .errors import (
    ArityMismatch,
    BadDimensionSubset,
    ConstraintViolation,
    CycleDetected,
    DanglingReference,
    DomainViolation,
    DuplicateLink,
    DuplicateName,
    InvalidPath,
    NotDirectSuper,
    NullForbidden,
    PrimitiveDomain,
    UnknownConcept,
    UnknownDimension,
    UnknownItem,
    UnknownLink,
    UnknownProperty,
    ViewImmutable,
)
from .schema import BOTTOM, TOP, Concept, Dimension, DimPath, Schema

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class ItemRef:
    """Opaque per-concept item identifier. Ids are never reused."""

    concept: int
    id: int


@dataclass
class Item:
    ref: ItemRef
    values: list  # one slot per dimension: ItemRef | primitive | None


@dataclass
class Extent:
    concept: int
    items: dict[int, Item] = field(default_factory=dict)  # insertion-ordered
    next_id: int = 1


@dataclass
class DeletionReport:
    """Cascade outcome: deleted refs (children before parents) and nulled slots."""

    deleted: list[ItemRef] = field(default_factory=list)
    nulled: list[tuple[ItemRef, str]] = field(default_factory=list)


@dataclass
class PropertyDef:
    """A named view/virtual/constraint/multi-valued definition."""

    owner: int
    name: str
    kind: str  # "virtual" | "constraint" | "mv"
    body: Any = None  # Expr for virtual/constraint
    hidden: Optional[int] = None  # link subconcept id for mv
    target: Optional[int] = None  # target concept for mv
    triggers: frozenset = frozenset()  # concepts whose mutation rechecks a constraint


class Database:
    """In-memory concept-oriented database: schema, extents and definitions."""

    def __init__(self):
        self.schema = Schema()
        self.extents: dict[int, Extent] = {}
        self.usage: dict[ItemRef, int] = {}
        self.views: dict[str, Any] = {}  # name -> Query AST
        self.vprops: dict[int, dict[str, PropertyDef]] = {}
        self.constraints: dict[int, dict[str, PropertyDef]] = {}
        self.mvprops: dict[int, dict[str, PropertyDef]] = {}
        self.lock = threading.RLock()

    # ------------------------------------------------------------------
    # schema-level operations
    # ------------------------------------------------------------------

    def define_concept(self, name, dims, gc_scope="persistent", hidden=False) -> int:
        with self.lock:
            if name in self.views:
                raise DuplicateName(f"{name!r} is already a view")
            cid = self.schema.define_concept(name, dims, gc_scope=gc_scope, hidden=hidden)
            self.extents[cid] = Extent(cid)
            return cid

    def remove_concept(self, cid: int) -> None:
        """Allowed only for concepts with empty extent and no referencing dims."""
        with self.lock:
            if self.extents.get(cid) and self.extents[cid].items:
                raise DomainViolation(
                    f"concept {self.schema.concept(cid).name} has a non-empty extent"
                )
            self.schema.remove_concept(cid)
            self.extents.pop(cid, None)

    def neighbors(self, cid, direction):
        return self.schema.neighbors(cid, direction)

    def enumerate_paths(self, source, target):
        return self.schema.enumerate_paths(source, target)

    def canonical_syntax(self, cid):
        return self.schema.canonical_syntax(cid)

    def validate_schema(self):
        return self.schema.validate()

    def resolve(self, name: str) -> int:
        return self.schema.resolve(name)

    def concept(self, cid: int) -> Concept:
        return self.schema.concept(cid)

    # ------------------------------------------------------------------
    # item access
    # ------------------------------------------------------------------

    def item(self, ref: ItemRef) -> Item:
        ext = self.extents.get(ref.concept)
        if ext is None:
            raise UnknownItem(f"unknown concept for ref {ref}")
        it = ext.items.get(ref.id)
        if it is None:
            raise UnknownItem(f"{self._fmt(ref)} is not live")
        return it

    def is_live(self, ref: ItemRef) -> bool:
        ext = self.extents.get(ref.concept)
        return ext is not None and ref.id in ext.items

    def extent(self, cid: int) -> list[ItemRef]:
        """Live items in insertion order. For BOTTOM: the inherited union."""
        if cid == TOP:
            raise UnknownConcept("the top concept has no extent")
        if cid == BOTTOM:
            out = []
            for pid in self.schema.bottom_parents():
                if not self.schema.concept(pid).primitive:
                    out.extend(self.extent(pid))
            return out
        c = self.schema.concept(cid)
        if c.primitive:
            return []  # primitive items exist by value only
        return [it.ref for it in self.extents[cid].items.values()]

    def _fmt(self, ref: ItemRef) -> str:
        try:
            name = self.schema.concept(ref.concept).name
        except UnknownConcept:
            name = f"?{ref.concept}"
        return f"{name}#{ref.id}"

    def label(self, ref: ItemRef) -> str:
        """Human label: concept name + #id + first primitive path value."""
        base = self._fmt(ref)
        try:
            paths = self.schema.canonical_syntax(ref.concept)
        except UnknownConcept:
            return base
        if not paths:
            return base
        v = self.get_super(ref, paths[0])
        return f"{base} ({render_value(self, v)})"

    # ------------------------------------------------------------------
    # slot validation
    # ------------------------------------------------------------------

    def _check_slot(self, concept: Concept, idx: int, value):
        d = concept.intent[idx]
        if value is None:
            if not d.nullable:
                raise NullForbidden(
                    f"dimension {concept.name}.{d.name} does not allow null"
                )
            return None
        dom = self.schema.concept(d.domain)
        if dom.primitive:
            return _check_primitive(dom.name, value, concept.name, d.name)
        if not isinstance(value, ItemRef):
            raise DomainViolation(
                f"slot {concept.name}.{d.name} expects an item of {dom.name}, got {value!r}"
            )
        if value.concept != d.domain:
            got = self.schema.concept(value.concept).name
            raise DomainViolation(
                f"slot {concept.name}.{d.name} expects {dom.name}, got {got}"
            )
        if not self.is_live(value):
            raise DomainViolation(f"{self._fmt(value)} is not a live item")
        return value

    # ------------------------------------------------------------------
    # mutations
    # ------------------------------------------------------------------

    def insert_item(self, cid: int, values: Iterable) -> ItemRef:
        with self.lock:
            c = self.schema.concept(cid)
            if c.primitive:
                raise PrimitiveDomain(f"cannot insert into primitive concept {c.name}")
            vals = list(values)
            if len(vals) != len(c.intent):
                raise ArityMismatch(
                    f"{c.name} expects {len(c.intent)} values, got {len(vals)}"
                )
            vals = [self._check_slot(c, i, v) for i, v in enumerate(vals)]
            ext = self.extents[cid]
            ref = ItemRef(cid, ext.next_id)
            ext.items[ref.id] = Item(ref, vals)
            ext.next_id += 1
            for v in vals:
                if isinstance(v, ItemRef):
                    self.usage[v] = self.usage.get(v, 0) + 1
            try:
                self._check_constraints(cid, ref)
            except ConstraintViolation:
                for v in vals:
                    if isinstance(v, ItemRef):
                        self.usage[v] -= 1
                del ext.items[ref.id]
                raise
            return ref

    def insert_by_name(self, name: str, values: Iterable) -> ItemRef:
        if name in self.views:
            raise ViewImmutable(f"cannot insert into view {name!r}")
        return self.insert_item(self.schema.resolve(name), values)

    def update_value(self, ref: ItemRef, dim: str, value) -> None:
        with self.lock:
            it = self.item(ref)
            c = self.schema.concept(ref.concept)
            idx = c.dim_index(dim)
            if idx < 0:
                raise UnknownDimension(f"no dimension {dim!r} on {c.name}")
            new = self._check_slot(c, idx, value)
            old = it.values[idx]
            it.values[idx] = new
            if isinstance(old, ItemRef):
                self.usage[old] -= 1
            if isinstance(new, ItemRef):
                self.usage[new] = self.usage.get(new, 0) + 1
            try:
                self._check_constraints(ref.concept, ref)
            except ConstraintViolation:
                it.values[idx] = old
                if isinstance(old, ItemRef):
                    self.usage[old] += 1
                if isinstance(new, ItemRef):
                    self.usage[new] -= 1
                raise

    def delete_item(self, ref: ItemRef) -> DeletionReport:
        with self.lock:
            self.item(ref)  # raises UnknownItem when not live
            report = DeletionReport()
            self._cascade_delete(ref, set(), report)
            return report

    def _cascade_delete(self, ref: ItemRef, dying: set, report: DeletionReport) -> None:
        if ref in dying:
            return
        dying.add(ref)
        for owner, idx in self._referrers(ref):
            if owner in dying:
                continue
            d = self.schema.concept(owner.concept).intent[idx]
            if d.nullable:
                self.item(owner).values[idx] = None
                self.usage[ref] -= 1
                report.nulled.append((owner, d.name))
            else:
                self._cascade_delete(owner, dying, report)
        it = self.extents[ref.concept].items.pop(ref.id)
        for v in it.values:
            if isinstance(v, ItemRef) and v in self.usage:
                self.usage[v] -= 1
        self.usage.pop(ref, None)
        report.deleted.append(ref)

    def _referrers(self, ref: ItemRef) -> list[tuple[ItemRef, int]]:
        """All live slots holding `ref`, in (concept, insertion) order."""
        out = []
        for c in self.schema.concepts.values():
            hits = [i for i, d in enumerate(c.intent) if d.domain == ref.concept]
            if not hits:
                continue
            for it in self.extents.get(c.id, Extent(c.id)).items.values():
                for i in hits:
                    if it.values[i] == ref:
                        out.append((it.ref, i))
        return out

    def run_gc(self) -> list[ItemRef]:
        """Delete unused items of local-scope concepts, to fixpoint.

        Only concepts that are some dimension's domain take part: an item of
        a leaf concept can never be referenced, so usage counting would just
        destroy it (multi-valued link items live in such leaves).
        """
        with self.lock:
            collected: list[ItemRef] = []
            domains = set()
            for c in self.schema.concepts.values():
                for d in c.intent:
                    domains.add(d.domain)
            while True:
                batch = []
                for c in self.schema.concepts.values():
                    if c.gc_scope != "local" or c.id not in domains or c.primitive:
                        continue
                    for it in self.extents[c.id].items.values():
                        if self.usage.get(it.ref, 0) == 0:
                            batch.append(it.ref)
                if not batch:
                    return collected
                for ref in batch:
                    if self.is_live(ref):
                        collected.extend(self.delete_item(ref).deleted)

    # ------------------------------------------------------------------
    # navigation
    # ------------------------------------------------------------------

    def get_super(self, ref: ItemRef, path: DimPath):
        """Follow `path` upward from `ref`; null short-circuits."""
        if path.source != ref.concept:
            raise InvalidPath(
                f"path starts at {self.schema.concept(path.source).name}, "
                f"item is in {self.schema.concept(ref.concept).name}"
            )
        cur: Any = ref
        for step in path.steps:
            if cur is None:
                return None
            if not isinstance(cur, ItemRef):
                raise InvalidPath(f"cannot follow {step!r} through a primitive value")
            c = self.schema.concept(cur.concept)
            d = c.dim(step)
            if d is None:
                raise InvalidPath(f"no dimension {step!r} on {c.name}")
            ext = self.extents.get(cur.concept)
            it = ext.items.get(cur.id) if ext else None
            if it is None:
                raise DanglingReference(f"{self._fmt(cur)} is not live")
            cur = it.values[c.dim_index(step)]
        return cur

    def get_subs(self, ref: ItemRef, sub: int, path: DimPath) -> list[ItemRef]:
        """Items of `sub` whose `path` evaluates to `ref`, in insertion order."""
        if path.source != sub:
            raise InvalidPath("path must start at the subconcept")
        if self.schema.path_target(path) != ref.concept:
            raise InvalidPath("path does not end at the item's concept")
        return [s for s in self.extent(sub) if self.get_super(s, path) == ref]

    # ------------------------------------------------------------------
    # schema transformations
    # ------------------------------------------------------------------

    def merge_concept(self, superc: int, subc: int) -> None:
        """Absorb `superc` into `subc`, copying superitem values in place."""
        with self.lock:
            sup = self.schema.concept(superc)
            sub = self.schema.concept(subc)
            if sup.primitive:
                raise PrimitiveDomain(f"cannot merge primitive concept {sup.name}")
            target_idx = [
                i
                for i, d in enumerate(sub.intent)
                if d.domain == superc and not d.direct
            ]
            if not target_idx:
                raise NotDirectSuper(f"{sup.name} is not a direct superconcept of {sub.name}")
            new_intent: list[Dimension] = []
            expansion: list = []  # per old slot: None (keep) or list of sup dims
            for i, d in enumerate(sub.intent):
                if i in target_idx:
                    group = []
                    for x in sup.intent:
                        nd = Dimension(
                            f"{d.name}.{x.name}",
                            x.domain,
                            nullable=d.nullable or x.nullable,
                            direct=x.direct,
                            segment=_compose_segments(d.segment, x.segment),
                        )
                        group.append(nd)
                        new_intent.append(nd)
                    expansion.append(group)
                else:
                    new_intent.append(d)
                    expansion.append(None)
            seen = set()
            for d in new_intent:
                if d.name in seen:
                    raise DuplicateName(f"merged dimension name {d.name!r} collides")
                seen.add(d.name)
            for it in self.extents[subc].items.values():
                new_values = []
                for i, v in enumerate(it.values):
                    if expansion[i] is None:
                        new_values.append(v)
                        continue
                    if v is None:
                        new_values.extend([None] * len(sup.intent))
                        continue
                    s_item = self.item(v)
                    self.usage[v] -= 1
                    for sv in s_item.values:
                        new_values.append(sv)
                        if isinstance(sv, ItemRef):
                            self.usage[sv] = self.usage.get(sv, 0) + 1
                new_values_final = new_values
                it.values = new_values_final
            sub.intent = new_intent
            referenced = any(
                d.domain == superc
                for c in self.schema.concepts.values()
                for d in c.intent
            )
            if not referenced:
                for it in list(self.extents[superc].items.values()):
                    for v in it.values:
                        if isinstance(v, ItemRef) and v in self.usage:
                            self.usage[v] -= 1
                    self.usage.pop(it.ref, None)
                del self.extents[superc]
                self.schema.remove_concept(superc)

    def split_concept(self, cid: int, dim_names: list[str], new_name: str) -> int:
        """Move a proper subset of dimensions into a fresh superconcept."""
        with self.lock:
            c = self.schema.concept(cid)
            if not dim_names:
                raise BadDimensionSubset("no dimensions selected")
            idx = []
            for n in dim_names:
                i = c.dim_index(n)
                if i < 0:
                    raise BadDimensionSubset(f"no dimension {n!r} on {c.name}")
                if i in idx:
                    raise BadDimensionSubset(f"dimension {n!r} selected twice")
                idx.append(i)
            if len(idx) >= len(c.intent):
                raise BadDimensionSubset("a proper subset of the intent is required")
            if new_name in self.schema.by_name or new_name in self.views:
                raise DuplicateName(f"{new_name!r} already in use")
            idx.sort()
            moved = [c.intent[i] for i in idx]
            remaining = [d for i, d in enumerate(c.intent) if i not in idx]
            # When all moved names share a dotted first segment (they came from
            # a merge), strip it and name the replacement after it; otherwise
            # the replacement dimension is canonical-transparent so path names
            # do not change.
            prefix = None
            if all("." in d.name for d in moved):
                firsts = {d.name.split(".", 1)[0] for d in moved}
                if len(firsts) == 1:
                    cand = firsts.pop()
                    if all(r.name != cand for r in remaining):
                        prefix = cand
            new_dims = []
            for d in moved:
                if prefix is not None:
                    nn = d.name.split(".", 1)[1]
                    new_dims.append((nn, d.domain, d.nullable, d.direct, nn))
                else:
                    new_dims.append((d.name, d.domain, d.nullable, d.direct, d.segment))
            sup_cid = self.schema.define_concept(
                new_name, [(n, self.schema.concept(dom).name) for n, dom, _, _, _ in new_dims]
            )
            sup = self.schema.concept(sup_cid)
            for d, (_, _, nullable, direct, seg) in zip(sup.intent, new_dims):
                d.nullable = nullable
                d.direct = direct
                d.segment = seg
            self.extents[sup_cid] = self.extents.get(sup_cid) or Extent(sup_cid)
            if prefix is not None:
                repl = Dimension(prefix, sup_cid, segment=prefix)
            else:
                rname = new_name
                while any(d.name == rname for d in remaining):
                    rname += "_"
                repl = Dimension(rname, sup_cid, segment=None)
                repl.segment = None  # transparent for canonical path names
            # one superitem per distinct projection
            proj_refs: dict[tuple, ItemRef] = {}
            sup_ext = self.extents[sup_cid]
            repl_pos = idx[0]
            for it in self.extents[cid].items.values():
                proj = tuple(it.values[i] for i in idx)
                nref = proj_refs.get(proj)
                if nref is None:
                    nref = ItemRef(sup_cid, sup_ext.next_id)
                    sup_ext.items[nref.id] = Item(nref, list(proj))
                    sup_ext.next_id += 1
                    proj_refs[proj] = nref
                else:
                    for v in proj:  # collapsed duplicate: its slots disappear
                        if isinstance(v, ItemRef):
                            self.usage[v] -= 1
                new_values = []
                for i, v in enumerate(it.values):
                    if i == repl_pos:
                        new_values.append(nref)
                    if i not in idx:
                        new_values.append(v)
                it.values = new_values
                self.usage[nref] = self.usage.get(nref, 0) + 1
            new_intent = []
            for i, d in enumerate(c.intent):
                if i == repl_pos:
                    new_intent.append(repl)
                if i not in idx:
                    new_intent.append(d)
            c.intent = new_intent
            return sup_cid

    # ------------------------------------------------------------------
    # views, properties, constraints, multi-valued properties
    # ------------------------------------------------------------------

    def define_view(self, name: str, query) -> None:
        with self.lock:
            if name in self.views or name in self.schema.by_name:
                raise DuplicateName(f"{name!r} already in use")
            self.views[name] = query

    def define_virtual_property(self, cid: int, name: str, body) -> None:
        with self.lock:
            c = self.schema.concept(cid)
            if c.dim(name) is not None or name in self.vprops.get(cid, {}):
                raise DuplicateName(f"{c.name}.{name} already defined")
            self._check_vprop_cycle(cid, name, body)
            self.vprops.setdefault(cid, {})[name] = PropertyDef(cid, name, "virtual", body)

    def _check_vprop_cycle(self, cid: int, name: str, body) -> None:
        """Reject definitions closing a reference cycle among virtual props.

        References are matched by name alone (binders are not statically
        typed), which errs on the side of rejection.
        """
        from .query.ast import walk_identifiers

        deps: dict[str, set[str]] = {}
        for props in self.vprops.values():
            for p in props.values():
                deps.setdefault(p.name, set()).update(walk_identifiers(p.body))
        deps.setdefault(name, set()).update(walk_identifiers(body))
        seen: list[str] = []

        def visit(n: str) -> None:
            if n in seen:
                raise CycleDetected(
                    "virtual property cycle: " + " -> ".join(seen + [n])
                )
            if n not in deps:
                return
            seen.append(n)
            for m in deps[n]:
                visit(m)
            seen.pop()

        visit(name)

    def define_constraint(self, cid: int, name: str, body) -> None:
        with self.lock:
            from .query.evaluator import collect_trigger_concepts

            c = self.schema.concept(cid)
            if name in self.constraints.get(cid, {}):
                raise DuplicateName(f"constraint {c.name}.{name} already defined")
            triggers = collect_trigger_concepts(self, cid, body)
            self.constraints.setdefault(cid, {})[name] = PropertyDef(
                cid, name, "constraint", body, triggers=frozenset(triggers)
            )
            try:
                for ref in self.extent(cid):
                    self._check_one_constraint(cid, name, ref)
            except ConstraintViolation:
                del self.constraints[cid][name]
                raise

    def _check_constraints(self, mutated: int, ref: ItemRef) -> None:
        for name in self.constraints.get(mutated, {}):
            self._check_one_constraint(mutated, name, ref)
        for owner, defs in self.constraints.items():
            if owner == mutated:
                continue
            for name, cdef in defs.items():
                if mutated in cdef.triggers:
                    for oref in self.extent(owner):
                        self._check_one_constraint(owner, name, oref)

    def _check_one_constraint(self, owner: int, name: str, ref: ItemRef) -> None:
        from .query.evaluator import eval_expr_for_item

        body = self.constraints[owner][name].body
        ok = eval_expr_for_item(self, ref, body)
        if ok is not True:
            raise ConstraintViolation(
                f"constraint {self.schema.concept(owner).name}.{name} fails for {self._fmt(ref)}"
            )

    def define_mv_property(self, cid: int, name: str, target: int) -> None:
        with self.lock:
            c = self.schema.concept(cid)
            tgt = self.schema.concept(target)
            if name in self.mvprops.get(cid, {}) or c.dim(name) is not None:
                raise DuplicateName(f"{c.name}.{name} already defined")
            hidden_name = f"MV_{c.name}_{name}"
            hidden = self.define_concept(
                hidden_name,
                [("src", c.name), ("tgt", tgt.name)],
                gc_scope="local",
                hidden=True,
            )
            self.mvprops.setdefault(cid, {})[name] = PropertyDef(
                cid, name, "mv", hidden=hidden, target=target
            )

    def attach_mv_property(self, cid: int, name: str, target: int, hidden: int) -> None:
        """Bind an mv property to an already existing hidden link concept."""
        with self.lock:
            self.mvprops.setdefault(cid, {})[name] = PropertyDef(
                cid, name, "mv", hidden=hidden, target=target
            )

    def mv_def(self, cid: int, name: str) -> PropertyDef:
        p = self.mvprops.get(cid, {}).get(name)
        if p is None:
            raise UnknownProperty(
                f"no multi-valued property {name!r} on {self.schema.concept(cid).name}"
            )
        return p

    def mv_get(self, ref: ItemRef, name: str) -> list[ItemRef]:
        p = self.mv_def(ref.concept, name)
        out = []
        for it in self.extents[p.hidden].items.values():
            if it.values[0] == ref:
                out.append(it.values[1])
        return out

    def mv_update(self, ref: ItemRef, name: str, mode: str, target: ItemRef) -> None:
        with self.lock:
            p = self.mv_def(ref.concept, name)
            if mode == "add":
                for it in self.extents[p.hidden].items.values():
                    if it.values[0] == ref and it.values[1] == target:
                        raise DuplicateLink(
                            f"{self._fmt(ref)}.{name} already links {self._fmt(target)}"
                        )
                self.insert_item(p.hidden, (ref, target))
                return
            if mode == "delete":
                for it in list(self.extents[p.hidden].items.values()):
                    if it.values[0] == ref and it.values[1] == target:
                        self.delete_item(it.ref)
                        return
                raise UnknownLink(
                    f"{self._fmt(ref)}.{name} does not link {self._fmt(target)}"
                )
            raise ValueError(f"mode must be 'add' or 'delete', got {mode!r}")

    # ------------------------------------------------------------------
    # conveniences
    # ------------------------------------------------------------------

    def query(self, text: str, params: Optional[dict] = None):
        from .query.evaluator import evaluate_query
        from .query.parser import parse_query

        return evaluate_query(self, parse_query(text), params)

    def snapshot(self) -> "Database":
        """Deep, independent copy of the full database state."""
        with self.lock:
            lock, self.lock = self.lock, None
            try:
                dup = copy.deepcopy(self)
            finally:
                self.lock = lock
            dup.lock = threading.RLock()
            return dup

    # -- invariant scans (used by tests and the doctor command) ----------

    def recount_usage(self) -> dict[ItemRef, int]:
        counts: dict[ItemRef, int] = {}
        for ext in self.extents.values():
            for it in ext.items.values():
                for v in it.values:
                    if isinstance(v, ItemRef):
                        counts[v] = counts.get(v, 0) + 1
        return counts

    def check_integrity(self) -> list[str]:
        """Full-scan referential-integrity and usage-count check."""
        problems = []
        for ext in self.extents.values():
            c = self.schema.concept(ext.concept)
            for it in ext.items.values():
                if len(it.values) != len(c.intent):
                    problems.append(f"{self._fmt(it.ref)}: arity mismatch")
                    continue
                for d, v in zip(c.intent, it.values):
                    if v is None:
                        if not d.nullable:
                            problems.append(
                                f"{self._fmt(it.ref)}.{d.name}: null in non-nullable slot"
                            )
                    elif isinstance(v, ItemRef):
                        if v.concept != d.domain:
                            problems.append(f"{self._fmt(it.ref)}.{d.name}: wrong domain")
                        elif not self.is_live(v):
                            problems.append(
                                f"{self._fmt(it.ref)}.{d.name}: dangling {self._fmt(v)}"
                            )
        recount = self.recount_usage()
        for ref, n in recount.items():
            if self.usage.get(ref, 0) != n:
                problems.append(f"{self._fmt(ref)}: usage {self.usage.get(ref, 0)} != {n}")
        for ref, n in self.usage.items():
            if n and ref not in recount:
                problems.append(f"{self._fmt(ref)}: phantom usage {n}")
        return problems


def _compose_segments(a: Optional[str], b: Optional[str]) -> Optional[str]:
    if a is None:
        return b
    if b is None:
        return a
    return f"{a}.{b}"


def _check_primitive(domain: str, value, cname: str, dname: str):
    where = f"{cname}.{dname}"
    if domain == "String":
        if isinstance(value, str):
            return value
    elif domain == "Integer":
        if isinstance(value, bool):
            raise DomainViolation(f"{where} expects Integer, got Boolean")
        if isinstance(value, int):
            if not INT64_MIN <= value <= INT64_MAX:
                raise DomainViolation(f"{where}: integer out of 64-bit range")
            return value
    elif domain == "Real":
        if isinstance(value, bool):
            raise DomainViolation(f"{where} expects Real, got Boolean")
        if isinstance(value, (int, float)):
            return float(value)
    elif domain == "Boolean":
        if isinstance(value, bool):
            return value
    raise DomainViolation(f"{where} expects {domain}, got {value!r}")


def render_value(db: Database, v) -> str:
    """Literal rendering used by dumps and labels."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, ItemRef):
        return db._fmt(v)
    return repr(v)
