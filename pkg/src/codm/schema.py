"""Concept DAG: concept/dimension definitions, paths and canonical syntax.

A schema is a set of concepts whose non-direct dimensions point at other
concepts (their domains) and form a directed acyclic graph. Four primitive
concepts (String, Integer, Real, Boolean) are predefined. The top and bottom
concepts are virtual: they are never stored and are exposed only through the
TOP/BOTTOM sentinels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import (
    BadDimensionSubset,
    CycleDetected,
    DuplicateName,
    InvalidPath,
    UnknownConcept,
    UnknownDomain,
)

# Sentinel concept ids for the virtual top and bottom concepts.
TOP = -1
BOTTOM = -2

PRIMITIVE_NAMES = ("String", "Integer", "Real", "Boolean")


@dataclass
class Dimension:
    """One attribute of a concept.

    `segment` is the piece this dimension contributes to canonical path-name
    strings. It defaults to the dimension name; merge composes segments and
    split may create transparent dimensions (segment None) so that schema
    refactoring never changes canonical path names.
    """

    name: str
    domain: int
    nullable: bool = False
    direct: bool = False
    segment: Optional[str] = None

    def __post_init__(self):
        if self.segment is None and not self.direct:
            self.segment = self.name

    def canon(self) -> Optional[str]:
        return self.segment


@dataclass
class Concept:
    id: int
    name: str
    intent: list[Dimension] = field(default_factory=list)
    primitive: bool = False
    gc_scope: str = "persistent"  # or "local"
    hidden: bool = False

    @property
    def dimensionality(self) -> int:
        return len(self.intent)

    def dim(self, name: str) -> Optional[Dimension]:
        for d in self.intent:
            if d.name == name:
                return d
        return None

    def dim_index(self, name: str) -> int:
        for i, d in enumerate(self.intent):
            if d.name == name:
                return i
        return -1


@dataclass(frozen=True)
class DimPath:
    """A sequence of dimension names leading from `source` upward.

    Rank 0 (no steps) denotes the source concept itself. Paths starting at
    BOTTOM use the parent concept's name as their first pseudo-step.
    """

    source: int
    steps: tuple[str, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.steps)

    def extended(self, step: str) -> "DimPath":
        return DimPath(self.source, self.steps + (step,))

    def name(self) -> str:
        return ".".join(self.steps)


_IDENT_OK = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


def _check_ident(name: str, what: str) -> None:
    if not name or name[0].isdigit() or any(ch not in _IDENT_OK for ch in name):
        raise DuplicateName(f"invalid {what} name: {name!r}")


class Schema:
    """Owns all concepts and the pure (syntax-only) operations over them."""

    def __init__(self):
        self.concepts: dict[int, Concept] = {}
        self.by_name: dict[str, int] = {}
        self._next_id = 1
        for name in PRIMITIVE_NAMES:
            cid = self._next_id
            self._next_id += 1
            self.concepts[cid] = Concept(cid, name, [], primitive=True)
            self.by_name[name] = cid

    # -- lookup --------------------------------------------------------

    def concept(self, cid: int) -> Concept:
        c = self.concepts.get(cid)
        if c is None:
            raise UnknownConcept(f"unknown concept id {cid}")
        return c

    def resolve(self, name: str) -> int:
        cid = self.by_name.get(name)
        if cid is None:
            raise UnknownConcept(f"unknown concept {name!r}")
        return cid

    def has(self, name: str) -> bool:
        return name in self.by_name

    def user_concepts(self) -> list[Concept]:
        return [c for c in self.concepts.values() if not c.primitive]

    def primitives(self) -> list[Concept]:
        return [c for c in self.concepts.values() if c.primitive]

    # -- definition ------------------------------------------------------

    def define_concept(
        self,
        name: str,
        dims: Iterable[tuple],
        gc_scope: str = "persistent",
        hidden: bool = False,
    ) -> int:
        """Register a new concept.

        `dims` is a list of (dim_name, domain_name[, flags]) where flags is an
        optional set/sequence containing "nullable" and/or "direct".
        """
        if name in self.by_name:
            raise DuplicateName(f"concept {name!r} already defined")
        _check_ident(name, "concept")
        parsed: list[Dimension] = []
        seen = set()
        for spec in dims:
            dname, domname = spec[0], spec[1]
            flags = set(spec[2]) if len(spec) > 2 else set()
            if not dname:
                raise DuplicateName(f"empty dimension name in {name!r}")
            if dname in seen:
                raise DuplicateName(f"duplicate dimension {dname!r} in {name!r}")
            seen.add(dname)
            if domname == name:
                dom = self._next_id  # self-domain: only legal when direct
            elif domname in self.by_name:
                dom = self.by_name[domname]
            else:
                raise UnknownDomain(f"unknown domain {domname!r} for {name}.{dname}")
            parsed.append(
                Dimension(
                    dname,
                    dom,
                    nullable="nullable" in flags,
                    direct="direct" in flags,
                    segment=None if "direct" in flags else dname,
                )
            )
        if not parsed:
            raise BadDimensionSubset(
                f"concept {name!r} needs at least one dimension (only the top concept has none)"
            )
        for d in parsed:
            if not d.direct and d.domain == self._next_id:
                raise CycleDetected(f"cycle through edge {name}.{d.name} -> {name}")
        cid = self._next_id
        self._next_id += 1
        self.concepts[cid] = Concept(cid, name, parsed, gc_scope=gc_scope, hidden=hidden)
        self.by_name[name] = cid
        return cid

    def remove_concept(self, cid: int) -> None:
        """Drop a concept. Caller must have checked extent emptiness."""
        c = self.concept(cid)
        for other in self.concepts.values():
            if other.id == cid:
                continue
            for d in other.intent:
                if d.domain == cid:
                    raise UnknownDomain(
                        f"cannot remove {c.name}: referenced by {other.name}.{d.name}"
                    )
        del self.concepts[cid]
        del self.by_name[c.name]

    # -- navigation ------------------------------------------------------

    def neighbors(self, cid: int, direction: str) -> list[int]:
        """Direct super/subconcepts of `cid` in schema-registration order.

        A concept with no non-direct domains is a child of the top concept;
        a concept that is no dimension's domain is a parent of the bottom.
        """
        if direction == "super":
            if cid == BOTTOM:
                return self.bottom_parents()
            if cid == TOP:
                return []
            c = self.concept(cid)
            out: list[int] = []
            for d in c.intent:
                if not d.direct and d.domain not in out:
                    out.append(d.domain)
            return out or [TOP]
        if direction == "sub":
            if cid == TOP:
                return [
                    c.id
                    for c in self.concepts.values()
                    if not any(not d.direct for d in c.intent)
                ]
            if cid == BOTTOM:
                return []
            self.concept(cid)
            out = []
            for c in self.concepts.values():
                if any(d.domain == cid and not d.direct for d in c.intent):
                    out.append(c.id)
            return out or [BOTTOM]
        raise ValueError(f"direction must be 'super' or 'sub', got {direction!r}")

    def bottom_parents(self) -> list[int]:
        """Concepts that are no dimension's domain, in registration order."""
        used = set()
        for c in self.concepts.values():
            for d in c.intent:
                if not d.direct:
                    used.add(d.domain)
        return [c.id for c in self.concepts.values() if c.id not in used]

    def enumerate_paths(self, source: int, target: int) -> list[DimPath]:
        """All dimension sequences from `source` up to `target`.

        Follows non-direct dimensions only. Includes the rank-0 path iff
        source == target.
        """
        self.concept(source)
        self.concept(target)
        out: list[DimPath] = []

        def walk(cid: int, path: DimPath) -> None:
            if cid == target:
                out.append(path)
            for d in self.concept(cid).intent:
                if not d.direct:
                    walk(d.domain, path.extended(d.name))

        walk(source, DimPath(source))
        return out

    def canonical_syntax(self, cid: int) -> list[DimPath]:
        """All paths from `cid` up to primitive concepts, sorted
        lexicographically by step names.

        For BOTTOM the result spans every bottom parent; those paths carry the
        parent concept's name as their first step.
        """
        if cid == TOP:
            raise UnknownConcept("the top concept has no canonical syntax")
        if cid == BOTTOM:
            out = []
            for pid in self.bottom_parents():
                parent = self.concept(pid)
                if parent.primitive:
                    out.append(DimPath(BOTTOM, (parent.name,)))
                else:
                    for p in self.canonical_syntax(pid):
                        out.append(DimPath(BOTTOM, (parent.name,) + p.steps))
            out.sort(key=lambda p: p.steps)
            return out
        c = self.concept(cid)
        out = []

        def walk(concept: Concept, path: DimPath) -> None:
            if concept.primitive:
                out.append(path)
                return
            for d in concept.intent:
                if not d.direct:
                    walk(self.concept(d.domain), path.extended(d.name))

        walk(c, DimPath(cid))
        out.sort(key=lambda p: p.steps)
        return out

    def path_name(self, path: DimPath) -> str:
        """Canonical path-name string: dimension segments joined by dots.

        Transparent dimensions (segment None) contribute nothing, which keeps
        canonical names stable across merge/split refactorings.
        """
        if path.source == BOTTOM:
            parts = [path.steps[0]]
            cid = self.resolve(path.steps[0])
            steps = path.steps[1:]
        else:
            parts = []
            cid = path.source
            steps = path.steps
        for step in steps:
            d = self.concept(cid).dim(step)
            if d is None:
                raise InvalidPath(f"no dimension {step!r} on {self.concept(cid).name}")
            if d.segment is not None:
                parts.append(d.segment)
            cid = d.domain
        return ".".join(parts)

    def path_target(self, path: DimPath) -> int:
        """Concept reached by following `path`; validates every step."""
        cid = path.source
        steps = path.steps
        if cid == BOTTOM:
            if not steps:
                return BOTTOM
            cid = self.resolve(steps[0])
            steps = steps[1:]
        for step in steps:
            c = self.concept(cid)
            d = c.dim(step)
            if d is None:
                raise InvalidPath(f"no dimension {step!r} on {c.name}")
            cid = d.domain
        return cid

    def primitive_dimensionality(self) -> int:
        """Database canonical dimensionality: defined by the bottom concept."""
        return len(self.canonical_syntax(BOTTOM))

    # -- validation -------------------------------------------------------

    def validate(self) -> list[str]:
        """Full invariant check; returns one entry per violation."""
        report: list[str] = []
        for c in self.concepts.values():
            names = set()
            for d in c.intent:
                if d.name in names:
                    report.append(f"duplicate dimension name {c.name}.{d.name}")
                names.add(d.name)
                if d.domain not in self.concepts:
                    report.append(f"unresolved domain of {c.name}.{d.name}")
            if c.primitive and c.intent:
                report.append(f"primitive concept {c.name} has dimensions")
            if not c.primitive and not c.intent:
                report.append(f"concept {c.name} has no dimensions")
        # cycle detection over non-direct edges (3-colour DFS)
        WHITE, GREY, BLACK = 0, 1, 2
        colour = {cid: WHITE for cid in self.concepts}
        stack_names: list[str] = []

        def visit(cid: int) -> None:
            colour[cid] = GREY
            c = self.concepts[cid]
            for d in c.intent:
                if d.direct or d.domain not in self.concepts:
                    continue
                edge = f"{c.name}.{d.name}"
                if colour[d.domain] == GREY:
                    chain = " -> ".join(stack_names + [edge, self.concepts[d.domain].name])
                    report.append(f"CycleDetected: {chain}")
                elif colour[d.domain] == WHITE:
                    stack_names.append(edge)
                    visit(d.domain)
                    stack_names.pop()
            colour[cid] = BLACK

        for cid in list(self.concepts):
            if colour[cid] == WHITE:
                visit(cid)
        return report

    # -- ordering ----------------------------------------------------------

    def topological_order(self) -> list[Concept]:
        """User concepts, superconcepts first, ties broken by name."""
        user = self.user_concepts()
        deps: dict[int, set[int]] = {}
        for c in user:
            deps[c.id] = {
                d.domain
                for d in c.intent
                if not d.direct and not self.concept(d.domain).primitive
            }
        out: list[Concept] = []
        remaining = {c.id: c for c in user}
        while remaining:
            ready = sorted(
                (c for c in remaining.values() if not (deps[c.id] & remaining.keys())),
                key=lambda c: c.name,
            )
            if not ready:  # cycle: emit rest by name to stay deterministic
                ready = sorted(remaining.values(), key=lambda c: c.name)
            for c in ready:
                out.append(c)
                del remaining[c.id]
        return out
