"""Snapshot save/load: a deterministic text form of the whole database.

Layout: a #schema section (one concept per line, supers first), a #defs
section (views, properties, constraints, multi-valued properties), then a
#data section (one item per line, concepts in topological order, items in
insertion order). References are written Concept#id and renumbered
sequentially per concept on save, so a saved file reloads with exactly the
ids it mentions and re-saves byte-identically.
"""

from __future__ import annotations

from typing import Optional

from .errors import DanglingReference, ParseError
from .query.ast import print_expr, print_query
from .query.parser import Token, parse_expression, parse_query, tokenize
from .store import Database, Item, ItemRef


# ---------------------------------------------------------------------------
# save
# ---------------------------------------------------------------------------

def save_text(db: Database) -> str:
    order = db.schema.topological_order()
    renum: dict[ItemRef, int] = {}
    for c in order:
        for new_id, it in enumerate(db.extents[c.id].items.values(), start=1):
            renum[it.ref] = new_id
    lines = ["#schema"]
    for c in order:
        dims = []
        for d in c.intent:
            s = f"{d.name}: {db.schema.concept(d.domain).name}"
            if d.nullable:
                s += " nullable"
            if d.direct:
                s += " direct"
            elif d.segment != d.name:
                s += " as none" if d.segment is None else f" as {d.segment}"
            dims.append(s)
        line = f"concept {c.name} {{ {', '.join(dims)} }}"
        if c.gc_scope == "local":
            line += " local"
        if c.hidden:
            line += " hidden"
        lines.append(line)
    lines.append("#defs")
    for name, q in db.views.items():
        lines.append(f"view {name} = {print_query(q)}")
    for c in order:
        for p in db.vprops.get(c.id, {}).values():
            lines.append(f"property {c.name}.{p.name} := {print_expr(p.body)}")
        for p in db.constraints.get(c.id, {}).values():
            lines.append(f"constraint {c.name}.{p.name} := {print_expr(p.body)}")
        for p in db.mvprops.get(c.id, {}).values():
            tname = db.schema.concept(p.target).name
            lines.append(f"mv {c.name}.{p.name} -> {tname}")
    lines.append("#data")
    for c in order:
        for it in db.extents[c.id].items.values():
            vals = ", ".join(_render(db, v, renum) for v in it.values)
            lines.append(f"{c.name} <{vals}>")
    return "\n".join(lines) + "\n"


def _render(db: Database, v, renum) -> str:
    if isinstance(v, ItemRef):
        return f"{db.schema.concept(v.concept).name}#{renum[v]}"
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'


def save_snapshot(db: Database, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(save_text(db))


# ---------------------------------------------------------------------------
# line parsers (shared with the CLI)
# ---------------------------------------------------------------------------

class LineReader:
    def __init__(self, text: str, lineno: int):
        self.tokens = [t for t in tokenize(text) if t.kind != "EOF"]
        self.pos = 0
        self.lineno = lineno

    def peek(self, ahead: int = 0) -> Optional[Token]:
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of line", self.lineno)
        self.pos += 1
        return t

    def done(self) -> bool:
        return self.pos >= len(self.tokens)

    def expect_sym(self, sym: str) -> None:
        t = self.next()
        if t.kind != "SYM" or t.value != sym:
            raise ParseError(f"expected {sym!r}, got {t.value!r}", self.lineno)

    def word(self, what="name") -> str:
        t = self.next()
        if t.kind not in ("IDENT", "KEYWORD"):
            raise ParseError(f"expected {what}, got {t.value!r}", self.lineno)
        return t.value

    def dotted(self) -> str:
        parts = [self.word()]
        while True:
            t = self.peek()
            if t is not None and t.kind == "SYM" and t.value == ".":
                self.pos += 1
                parts.append(self.word())
            else:
                return ".".join(parts)

    def value(self):
        """One data-line constant: ref, primitive or null."""
        t = self.next()
        if t.kind == "REF":
            return ("ref", t.value[0], t.value[1])
        if t.kind == "STRING":
            return ("val", t.value)
        if t.kind in ("NUMBER", "REAL"):
            return ("val", t.value)
        if t.kind == "SYM" and t.value == "-":
            n = self.next()
            if n.kind not in ("NUMBER", "REAL"):
                raise ParseError("malformed number", self.lineno)
            return ("val", -n.value)
        if t.kind == "KEYWORD" and t.value in ("true", "false", "null"):
            return ("val", {"true": True, "false": False, "null": None}[t.value])
        raise ParseError(f"bad value {t.value!r}", self.lineno)


def parse_ddl_line(text: str, lineno: int = 0):
    """`concept NAME { dim: Domain [nullable] [direct] [as seg], ... } [local] [hidden]`"""
    r = LineReader(text, lineno)
    if r.word() != "concept":
        raise ParseError("expected 'concept'", lineno)
    name = r.word("concept name")
    r.expect_sym("{")
    dims = []
    while True:
        dname = r.dotted()
        r.expect_sym(":")
        domain = r.word("domain name")
        flags = set()
        segment = "<default>"
        while True:
            t = r.peek()
            if t is None or t.kind != "IDENT" and t.kind != "KEYWORD":
                break
            if t.value in ("nullable", "direct"):
                flags.add(t.value)
                r.pos += 1
            elif t.value == "as":
                r.pos += 1
                nxt = r.peek()
                if nxt is not None and nxt.kind == "KEYWORD" and nxt.value == "null":
                    raise ParseError("segment cannot be 'null'; use 'none'", lineno)
                seg = r.dotted()
                segment = None if seg == "none" else seg
            else:
                break
        dims.append((dname, domain, flags, segment))
        t = r.next()
        if t.kind == "SYM" and t.value == ",":
            continue
        if t.kind == "SYM" and t.value == "}":
            break
        raise ParseError(f"expected ',' or '}}', got {t.value!r}", lineno)
    gc_scope = "persistent"
    hidden = False
    while not r.done():
        w = r.word()
        if w == "local":
            gc_scope = "local"
        elif w == "hidden":
            hidden = True
        else:
            raise ParseError(f"unknown concept flag {w!r}", lineno)
    return name, dims, gc_scope, hidden


def apply_ddl(db: Database, text: str, lineno: int = 0) -> int:
    name, dims, gc_scope, hidden = parse_ddl_line(text, lineno)
    cid = db.define_concept(
        name, [(d, dom, flags) for d, dom, flags, _ in dims],
        gc_scope=gc_scope, hidden=hidden,
    )
    concept = db.schema.concept(cid)
    for d, (_, _, _, segment) in zip(concept.intent, dims):
        if segment != "<default>":
            d.segment = segment
    return cid


def parse_data_line(text: str, lineno: int = 0):
    """`CONCEPT <v1, v2, ...>` -> (concept-name, [value-specs])"""
    r = LineReader(text, lineno)
    name = r.word("concept name")
    r.expect_sym("<")
    values = []
    while True:
        values.append(r.value())
        t = r.next()
        if t.kind == "SYM" and t.value == ",":
            continue
        if t.kind == "SYM" and t.value == ">":
            break
        raise ParseError(f"expected ',' or '>', got {t.value!r}", lineno)
    if not r.done():
        raise ParseError("trailing input after item", lineno)
    return name, values


def apply_def(db: Database, text: str, lineno: int = 0) -> None:
    """One #defs line: view, property, constraint or mv."""
    head, _, rest = text.partition(" ")
    rest = rest.strip()
    if head == "view":
        name, _, body = rest.partition("=")
        db.define_view(name.strip(), parse_query(body.strip()))
        return
    if head in ("property", "constraint"):
        target, _, body = rest.partition(":=")
        owner, _, pname = target.strip().rpartition(".")
        if not owner:
            raise ParseError(f"expected Concept.name in {head} definition", lineno)
        cid = db.schema.resolve(owner)
        expr = parse_expression(body.strip())
        if head == "property":
            db.define_virtual_property(cid, pname, expr)
        else:
            db.define_constraint(cid, pname, expr)
        return
    if head == "mv":
        target, _, tname = rest.partition("->")
        owner, _, pname = target.strip().rpartition(".")
        if not owner:
            raise ParseError("expected Concept.name in mv definition", lineno)
        cid = db.schema.resolve(owner)
        tgt = db.schema.resolve(tname.strip())
        hidden_name = f"MV_{owner}_{pname}"
        if db.schema.has(hidden_name):
            db.attach_mv_property(cid, pname, tgt, db.schema.resolve(hidden_name))
        else:
            db.define_mv_property(cid, pname, tgt)
        return
    raise ParseError(f"unknown definition {head!r}", lineno)


# ---------------------------------------------------------------------------
# load
# ---------------------------------------------------------------------------

def load_text(text: str) -> Database:
    db = Database()
    section = None
    data_lines: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line in ("#schema", "#defs", "#data"):
            section = line
            continue
        if line.startswith("#"):
            continue
        try:
            if section == "#schema":
                apply_ddl(db, line, lineno)
            elif section == "#defs":
                apply_def(db, line, lineno)
            elif section == "#data":
                data_lines.append((lineno, line))
            else:
                raise ParseError("content before any section header", lineno)
        except ParseError:
            raise
        except Exception as exc:
            raise ParseError(str(exc), lineno)
    _load_data(db, data_lines)
    return db


def _load_data(db: Database, data_lines: list[tuple[int, str]]) -> None:
    """Two-phase item load so references may point forward in the file."""
    parsed = []
    for lineno, line in data_lines:
        name, values = parse_data_line(line, lineno)
        try:
            cid = db.schema.resolve(name)
        except Exception as exc:
            raise ParseError(str(exc), lineno)
        c = db.schema.concept(cid)
        if len(values) != len(c.intent):
            raise ParseError(
                f"{name} expects {len(c.intent)} values, got {len(values)}", lineno
            )
        ext = db.extents[cid]
        ref = ItemRef(cid, ext.next_id)
        ext.items[ref.id] = Item(ref, [None] * len(c.intent))
        ext.next_id += 1
        parsed.append((lineno, cid, ref, values))
    for lineno, cid, ref, values in parsed:
        c = db.schema.concept(cid)
        item = db.item(ref)
        for i, spec in enumerate(values):
            if spec[0] == "ref":
                _, cname, rid = spec
                try:
                    target = ItemRef(db.schema.resolve(cname), rid)
                except Exception as exc:
                    raise ParseError(str(exc), lineno)
                if not db.is_live(target):
                    raise DanglingReference(f"line {lineno}: {cname}#{rid} does not resolve")
                v = target
            else:
                v = spec[1]
            try:
                item.values[i] = db._check_slot(c, i, v)
            except Exception as exc:
                raise ParseError(str(exc), lineno)
            if isinstance(item.values[i], ItemRef):
                db.usage[item.values[i]] = db.usage.get(item.values[i], 0) + 1
    for owner, defs in db.constraints.items():
        for name in defs:
            for ref in db.extent(owner):
                db._check_one_constraint(owner, name, ref)


def load_snapshot(path: str) -> Database:
    with open(path, "r", encoding="utf-8") as fh:
        return load_text(fh.read())
