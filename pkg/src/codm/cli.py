"""Command-line entry point: REPL, script runner and one-shot queries.

Statements understood by both the REPL and scripts:

    concept NAME { dim: Domain [nullable] [direct], ... } [local]
    view NAME = <query>
    property Concept.name := <expr>
    constraint Concept.name := <expr>
    mv Concept.name -> Target
    CONCEPT <v1, v2, ...>                 (insert one item)
    <query text>                          (evaluate and print)
    update Concept#id dim value
    delete Concept#id
    mvadd Concept#id prop Target#id       / mvdel ...
    infer A={A#1, A#2}, B={...} -> Target
    cube AGG(measure) over Fact by path1, path2 [where <expr>] [include-empty]
    tree Concept [via path] [show a,b] [where <expr>] ; ... [; depth N]
    schema | gc | load FILE | save FILE | format table|csv|jsonl | quit
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field

from . import analytics
from .analytics import Axis, CubeSpec, Level, TreeSpec
from .errors import CodmError, ParseError
from .query.evaluator import ResultConcept, evaluate_query
from .query.parser import parse_expression, parse_query
from .schema import DimPath
from .snapshot import (
    LineReader,
    apply_ddl,
    apply_def,
    load_snapshot,
    parse_data_line,
    save_snapshot,
    save_text,
)
from .store import Database, ItemRef, render_value


@dataclass
class Session:
    db: Database = field(default_factory=Database)
    fmt: str = "table"  # table | csv | jsonl


class QuitRequested(Exception):
    pass


_QUERY_RE = re.compile(r"^(\{|distinct\b|\w+\s*=\s*\{)")
_DATA_RE = re.compile(r"^\w+\s*<")
_INFER_RE = re.compile(r"^infer\s+(.+?)\s*->\s*(\w+)$")
_INFER_GROUP_RE = re.compile(r"(\w+)\s*=\s*\{([^}]*)\}")
_CUBE_RE = re.compile(
    r"^cube\s+(\w+)\s*\(([^)]*)\)\s+over\s+(\w+)\s+by\s+(.+?)"
    r"(?:\s+where\s+(.+?))?(\s+include-empty)?$"
)


def execute_statement(session: Session, text: str) -> list[str]:
    """Run one statement; returns printable output lines."""
    line = text.strip()
    if not line or line.startswith("#"):
        return []
    db = session.db
    first = line.split(None, 1)[0]
    if line in ("quit", "exit"):
        raise QuitRequested()
    if line == "schema":
        return save_text(db).split("#defs")[0].strip().splitlines()
    if line == "gc":
        collected = db.run_gc()
        if not collected:
            return ["collected: none"]
        return ["collected: " + ", ".join(db.label(r) for r in collected)]
    if first == "format":
        fmt = line.split(None, 1)[1].strip()
        if fmt not in ("table", "csv", "jsonl"):
            raise CodmError(f"unknown format {fmt!r}")
        session.fmt = fmt
        return []
    if first == "load":
        session.db = load_snapshot(line.split(None, 1)[1].strip())
        return []
    if first == "save":
        save_snapshot(db, line.split(None, 1)[1].strip())
        return []
    if first == "concept":
        apply_ddl(db, line)
        return []
    if first in ("view", "property", "constraint", "mv"):
        apply_def(db, line)
        return []
    if first in ("mvadd", "mvdel"):
        return _cmd_mv_update(db, line)
    if first == "delete":
        return _cmd_delete(db, line)
    if first == "update":
        return _cmd_update(db, line)
    if first == "infer":
        return _cmd_infer(db, line)
    if first == "cube":
        return _cmd_cube(db, line)
    if first == "tree":
        return _cmd_tree(db, line)
    if _QUERY_RE.match(line):
        res = db.query(line)
        return render_result(db, res, session.fmt)
    if _DATA_RE.match(line):
        name, values = parse_data_line(line)
        db.insert_by_name(name, [_data_value(db, v) for v in values])
        return []
    raise CodmError(f"unrecognized statement: {line!r}")


def _data_value(db: Database, spec):
    if spec[0] == "ref":
        return ItemRef(db.schema.resolve(spec[1]), spec[2])
    return spec[1]


def _parse_ref(db: Database, token: str) -> ItemRef:
    m = re.fullmatch(r"(\w+)#(\d+)", token)
    if not m:
        raise CodmError(f"expected Concept#id, got {token!r}")
    return ItemRef(db.schema.resolve(m.group(1)), int(m.group(2)))


def _cmd_delete(db: Database, line: str) -> list[str]:
    ref = _parse_ref(db, line.split(None, 1)[1].strip())
    report = db.delete_item(ref)
    out = ["deleted: " + ", ".join(db._fmt(r) for r in report.deleted)]
    if report.nulled:
        out.append(
            "nulled: " + ", ".join(f"{db._fmt(r)}.{d}" for r, d in report.nulled)
        )
    return out


def _cmd_update(db: Database, line: str) -> list[str]:
    parts = line.split(None, 3)
    if len(parts) != 4:
        raise CodmError("usage: update Concept#id dim value")
    ref = _parse_ref(db, parts[1])
    value = LineReader(parts[3], 0).value()
    db.update_value(ref, parts[2], _data_value(db, value))
    return []


def _cmd_mv_update(db: Database, line: str) -> list[str]:
    parts = line.split()
    if len(parts) != 4:
        raise CodmError("usage: mvadd|mvdel Concept#id prop Target#id")
    mode = "add" if parts[0] == "mvadd" else "delete"
    db.mv_update(_parse_ref(db, parts[1]), parts[2], mode, _parse_ref(db, parts[3]))
    return []


def _cmd_infer(db: Database, line: str) -> list[str]:
    m = _INFER_RE.match(line)
    if not m:
        raise CodmError("usage: infer A={A#1, ...} -> Target")
    inputs = {}
    for cname, refs in _INFER_GROUP_RE.findall(m.group(1)):
        cid = db.schema.resolve(cname)
        allowed = set()
        for tok in refs.split(","):
            tok = tok.strip()
            if tok:
                allowed.add(_parse_ref(db, tok))
        inputs[cid] = allowed
    target = db.schema.resolve(m.group(2))
    result = analytics.infer(db, inputs, target)
    if not result:
        return ["(none)"]
    return [db.label(r) for r in result]


def _cmd_cube(db: Database, line: str) -> list[str]:
    m = _CUBE_RE.match(line)
    if not m:
        raise CodmError(
            "usage: cube AGG(measure) over Fact by path[, path] [where expr] [include-empty]"
        )
    agg, measure, fact_name, by, where, include_empty = m.groups()
    fact = db.schema.resolve(fact_name)
    axes = []
    for chunk in by.split(","):
        steps = tuple(s.strip() for s in chunk.strip().split("."))
        path = DimPath(fact, steps) if steps != ("",) else DimPath(fact)
        axes.append(Axis(db.schema.path_target(path), path))
    spec = CubeSpec(
        fact=fact,
        axes=axes,
        measure=measure.strip() or None,
        agg=agg,
        filters=[parse_expression(where)] if where else [],
    )
    text = analytics.cube_csv(db, spec, include_empty=bool(include_empty))
    return text.strip().splitlines()


def _cmd_tree(db: Database, line: str) -> list[str]:
    body = line.split(None, 1)[1]
    levels = []
    depth = None
    prev_concept = None
    for segment in body.split(";"):
        segment = segment.strip()
        if not segment:
            continue
        dm = re.fullmatch(r"depth\s+(\d+)", segment)
        if dm:
            depth = int(dm.group(1))
            continue
        m = re.fullmatch(
            r"(\w+)(?:\s+via\s+([\w.]+))?(?:\s+show\s+([\w.,\s]+?))?(?:\s+where\s+(.+))?",
            segment,
        )
        if not m:
            raise CodmError(f"bad tree level: {segment!r}")
        cname, via, show, where = m.groups()
        cid = db.schema.resolve(cname)
        via_rule = None
        if via is not None:
            if prev_concept is None:
                raise CodmError("the first tree level cannot have 'via'")
            via_rule = _resolve_via(db, prev_concept, cid, via)
        show_specs = []
        if show:
            for piece in show.split(","):
                piece = piece.strip()
                show_specs.append((piece, parse_expression(piece)))
        levels.append(
            Level(cid, via=via_rule, show=show_specs,
                  filter=parse_expression(where) if where else None)
        )
        prev_concept = cid
    root = analytics.hierarchy_tree(db, TreeSpec(levels), depth_limit=depth)
    return analytics.tree_dump(db, root).rstrip("\n").splitlines()


def _resolve_via(db: Database, prev: int, cur: int, via: str):
    steps = tuple(via.split("."))
    down = DimPath(cur, steps)
    try:
        if db.schema.path_target(down) == prev:
            return down
    except CodmError:
        pass
    up = DimPath(prev, steps)
    try:
        if db.schema.path_target(up) == cur:
            return up
    except CodmError:
        pass
    if len(steps) == 1:
        return steps[0]  # property name on the parent concept
    raise CodmError(f"expansion {via!r} does not connect the two levels")


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _cell_text(db: Database, v, human: bool) -> str:
    if isinstance(v, ItemRef):
        return db.label(v) if human else db._fmt(v)
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_result(db: Database, res: ResultConcept, fmt: str) -> list[str]:
    if fmt == "csv":
        lines = [",".join(res.columns)]
        for row in res.rows:
            lines.append(",".join(_csv_escape(_cell_text(db, v, False)) for v in row))
        return lines
    if fmt == "jsonl":
        out = []
        for row in res.rows:
            obj = {}
            for col, v in zip(res.columns, row):
                if isinstance(v, ItemRef):
                    obj[col] = db._fmt(v)
                else:
                    obj[col] = v
            out.append(json.dumps(obj, ensure_ascii=False))
        return out
    cells = [[_cell_text(db, v, True) for v in row] for row in res.rows]
    widths = [len(c) for c in res.columns]
    for row in cells:
        for i, c in enumerate(row):
            widths[i] = max(widths[i], len(c))
    header = " | ".join(c.ljust(w) for c, w in zip(res.columns, widths)).rstrip()
    rule = "-+-".join("-" * w for w in widths)
    lines = [header, rule]
    for row in cells:
        lines.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    lines.append(f"({len(res.rows)} rows)")
    return lines


def _csv_escape(s: str) -> str:
    if any(ch in s for ch in ",\"\n"):
        return '"' + s.replace('"', '""') + '"'
    return s


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def run_script(path: str, session: Session | None = None, out=sys.stdout) -> int:
    session = session or Session(fmt=_default_format())
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        print(f"error: {exc}", file=out)
        return 1
    for lineno, raw in enumerate(lines, start=1):
        try:
            for line in execute_statement(session, raw):
                print(line, file=out)
        except QuitRequested:
            return 0
        except CodmError as exc:
            msg = str(exc) if isinstance(exc, ParseError) else f"line {lineno}: {exc}"
            print(f"error: {msg}", file=out)
            return 1
    return 0


def repl(session: Session | None = None, stdin=sys.stdin, out=sys.stdout) -> int:
    session = session or Session(fmt=_default_format())
    interactive = stdin.isatty()
    while True:
        if interactive:
            print("codm> ", end="", file=out, flush=True)
        raw = stdin.readline()
        if not raw:
            return 0
        try:
            for line in execute_statement(session, raw):
                print(line, file=out)
        except QuitRequested:
            return 0
        except CodmError as exc:
            print(f"error: {exc}", file=out)


def _default_format() -> str:
    fmt = os.environ.get("CODM_FORMAT", "table")
    return fmt if fmt in ("table", "csv", "jsonl") else "table"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="codm", description="concept-oriented in-memory database engine"
    )
    parser.add_argument("--format", choices=["table", "csv", "jsonl"])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("repl", help="interactive session")
    run_p = sub.add_parser("run", help="execute a script file")
    run_p.add_argument("script")
    query_p = sub.add_parser("query", help="run one query against a snapshot")
    query_p.add_argument("-d", "--database", required=True, help="snapshot file")
    query_p.add_argument("text")
    args = parser.parse_args(argv)
    fmt = args.format or _default_format()
    if args.command == "repl":
        return repl(Session(fmt=fmt))
    if args.command == "run":
        return run_script(args.script, Session(fmt=fmt))
    db = load_snapshot(args.database)
    try:
        res = evaluate_query(db, parse_query(args.text))
    except CodmError as exc:
        print(f"error: {exc}")
        return 1
    for line in render_result(db, res, fmt):
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
