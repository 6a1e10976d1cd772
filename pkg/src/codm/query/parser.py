"""Tokenizer and recursive-descent parser for the query language.

Grammar (ASCII form):

    query    := [IDENT "="] "{" ["distinct"] sources ["|" expr] "}" ["<" rets ">"]
              | [IDENT "="] "{" block "}"
    sources  := src {"," src}
    src      := [IDENT (":"|"in"|"from")] (path ["=" (path|const)] | literal)
    literal  := "{" tuple {"," tuple} "}" ["<" IDENT {"," IDENT} ">"]
    tuple    := "<" const {"," const} ">" | const
    rets     := ret {"," ret} ;  ret := [IDENT "="] expr
    expr     := precedence OR < AND < NOT < comparison/"is null" < additive
                < multiplicative < unary < primary
    primary  := aggregate | query | path | const | "(" expr ")"
    block    := "begin" stmts "over" src ["before" stmts] "where" "(" expr ")"
                ["after" stmts] "end" stmts "return" "<" rets ">"
    stmts    := "{" {IDENT ":=" expr ";"} "}"

Constants: double-quoted strings, decimal integers/reals, true/false, null,
Concept#id references and raw hex references 0x...
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import QuerySyntaxError
from .ast import (
    AGG_FUNCS,
    Aggregate,
    Binary,
    Blocks,
    Const,
    HexRef,
    IsNull,
    LiteralCollection,
    Path,
    Query,
    Ref,
    Ret,
    Source,
    Unary,
)

KEYWORDS = {
    "in", "from", "is", "null", "true", "false", "distinct",
    "begin", "over", "before", "where", "after", "end", "return",
    "AND", "OR", "NOT", "and", "or", "not",
}

SYMBOLS = (
    ":=", "==", "!=", "<=", ">=",
    "{", "}", "<", ">", "(", ")", "|", ",", ".", ";",
    "=", ":", "+", "-", "*", "/",
)


@dataclass
class Token:
    kind: str  # IDENT KEYWORD NUMBER REAL STRING REF HEXREF SYM EOF
    value: object
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise QuerySyntaxError("unterminated string", start_line, start_col)
            col += j + 1 - i
            i = j + 1
            tokens.append(Token("STRING", "".join(buf), start_line, start_col))
            continue
        if ch == "0" and i + 1 < n and text[i + 1] in "xX":
            j = i + 2
            while j < n and text[j] in "0123456789abcdefABCDEF":
                j += 1
            if j == i + 2:
                raise QuerySyntaxError("malformed hex reference", start_line, start_col)
            tokens.append(Token("HEXREF", int(text[i:j], 16), start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            real = False
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                real = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE" and (
                (j + 1 < n and text[j + 1].isdigit())
                or (j + 2 < n and text[j + 1] in "+-" and text[j + 2].isdigit())
            ):
                real = True
                j += 2
                while j < n and text[j].isdigit():
                    j += 1
            if real:
                tokens.append(Token("REAL", float(text[i:j]), start_line, start_col))
            else:
                tokens.append(Token("NUMBER", int(text[i:j]), start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            col += j - i
            i = j
            if i < n and text[i] == "#":  # Concept#id reference constant
                j = i + 1
                while j < n and text[j].isdigit():
                    j += 1
                if j == i + 1:
                    raise QuerySyntaxError("malformed reference", start_line, start_col)
                tokens.append(Token("REF", (word, int(text[i + 1:j])), start_line, start_col))
                col += j - i
                i = j
                continue
            kind = "KEYWORD" if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, start_line, start_col))
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token("SYM", sym, start_line, start_col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise QuerySyntaxError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(Token("EOF", None, line, col))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        # Inside a return tuple a bare ">"/">=" would close the tuple, so
        # top-level greater-than comparisons there must be parenthesized.
        self._no_gt = False

    # -- token plumbing -----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def at_sym(self, sym: str, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == "SYM" and t.value == sym

    def at_kw(self, word: str, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == "KEYWORD" and t.value == word

    def expect_sym(self, sym: str) -> Token:
        t = self.peek()
        if not self.at_sym(sym):
            raise QuerySyntaxError(f"expected {sym!r}, got {t.value!r}", t.line, t.col)
        return self.next()

    def expect_kw(self, word: str) -> Token:
        t = self.peek()
        if not self.at_kw(word):
            raise QuerySyntaxError(f"expected {word!r}, got {t.value!r}", t.line, t.col)
        return self.next()

    def expect_ident(self, what: str = "identifier") -> str:
        t = self.peek()
        if t.kind != "IDENT":
            raise QuerySyntaxError(f"expected {what}, got {t.value!r}", t.line, t.col)
        self.next()
        return t.value

    def fail(self, message: str):
        t = self.peek()
        raise QuerySyntaxError(message, t.line, t.col)

    # -- query --------------------------------------------------------------

    def parse_query(self) -> Query:
        q = self.query()
        t = self.peek()
        if t.kind != "EOF":
            raise QuerySyntaxError(f"trailing input {t.value!r}", t.line, t.col)
        return q

    def query(self) -> Query:
        name = None
        if self.peek().kind == "IDENT" and self.at_sym("=", 1):
            name = self.next().value
            self.next()
        self.expect_sym("{")
        saved, self._no_gt = self._no_gt, False
        try:
            if self.at_kw("begin"):
                q = self.block_query()
                q.name = name
                return q
            distinct = False
            if self.at_kw("distinct"):
                self.next()
                distinct = True
            sources = [self.source()]
            while self.at_sym(","):
                self.next()
                sources.append(self.source())
            predicate = None
            if self.at_sym("|"):
                self.next()
                predicate = self.expr()
            self.expect_sym("}")
        finally:
            self._no_gt = saved
        returns = []
        if self.at_sym("<"):
            returns = self.rets()
        return Query(name=name, distinct=distinct, sources=sources,
                     predicate=predicate, returns=returns)

    def block_query(self) -> Query:
        self.expect_kw("begin")
        begin = self.stmts()
        self.expect_kw("over")
        src = self.source()
        before = None
        if self.at_kw("before"):
            self.next()
            before = self.stmts()
        self.expect_kw("where")
        self.expect_sym("(")
        predicate = self.expr()
        self.expect_sym(")")
        after = None
        if self.at_kw("after"):
            self.next()
            after = self.stmts()
        self.expect_kw("end")
        end = self.stmts()
        self.expect_kw("return")
        if not self.at_sym("<"):
            self.fail("block query needs a return tuple")
        returns = self.rets()
        self.expect_sym("}")
        return Query(sources=[src], predicate=predicate, returns=returns,
                     blocks=Blocks(begin=begin, before=before, after=after, end=end))

    def stmts(self) -> list:
        self.expect_sym("{")
        out = []
        while not self.at_sym("}"):
            var = self.expect_ident("variable name")
            self.expect_sym(":=")
            expr = self.expr()
            self.expect_sym(";")
            out.append((var, expr))
        self.next()
        return out

    def source(self) -> Source:
        binder = None
        sep = ":"
        if self.peek().kind == "IDENT":
            if self.at_sym(":", 1):
                binder = self.next().value
                self.next()
            elif self.peek(1).kind == "KEYWORD" and self.peek(1).value in ("in", "from"):
                binder = self.next().value
                sep = self.next().value
        if self.at_sym("{"):
            return Source(binder, sep, literal=self.literal())
        path = self.path()
        restrict = None
        if self.at_sym("="):
            self.next()
            restrict = self.restrict_rhs()
        return Source(binder, sep, path=path, restrict=restrict)

    def literal(self) -> LiteralCollection:
        self.expect_sym("{")
        rows = [self.literal_tuple()]
        while self.at_sym(","):
            self.next()
            rows.append(self.literal_tuple())
        self.expect_sym("}")
        names = None
        if self.at_sym("<"):
            self.next()
            names = [self.expect_ident("dimension name")]
            while self.at_sym(","):
                self.next()
                names.append(self.expect_ident("dimension name"))
            self.expect_sym(">")
        return LiteralCollection(rows=rows, names=names)

    def literal_tuple(self) -> tuple:
        if self.at_sym("<"):
            self.next()
            vals = [self.const()]
            while self.at_sym(","):
                self.next()
                vals.append(self.const())
            self.expect_sym(">")
            return tuple(vals)
        return (self.const(),)

    def const(self):
        t = self.peek()
        if t.kind == "STRING":
            self.next()
            return Const(t.value)
        if t.kind == "NUMBER" or t.kind == "REAL":
            self.next()
            return Const(t.value)
        if t.kind == "REF":
            self.next()
            return Ref(t.value[0], t.value[1])
        if t.kind == "HEXREF":
            self.next()
            return HexRef(t.value)
        if self.at_kw("true"):
            self.next()
            return Const(True)
        if self.at_kw("false"):
            self.next()
            return Const(False)
        if self.at_kw("null"):
            self.next()
            return Const(None)
        if self.at_sym("-") and self.peek(1).kind in ("NUMBER", "REAL"):
            self.next()
            t = self.next()
            return Const(-t.value)
        self.fail("expected a constant")

    def restrict_rhs(self):
        t = self.peek()
        if t.kind == "IDENT":
            return self.path()
        return self.const()

    def path(self) -> Path:
        head = self.expect_ident("concept or binder name")
        steps = []
        while self.at_sym(".") and self.peek(1).kind == "IDENT":
            self.next()
            steps.append(self.next().value)
        return Path(head, tuple(steps))

    def rets(self) -> list:
        self.expect_sym("<")
        out = [self.ret()]
        while self.at_sym(","):
            self.next()
            out.append(self.ret())
        self.expect_sym(">")
        return out

    def ret(self) -> Ret:
        name = None
        if self.peek().kind == "IDENT" and self.at_sym("=", 1):
            name = self.next().value
            self.next()
        saved, self._no_gt = self._no_gt, True
        try:
            return Ret(name, self.expr())
        finally:
            self._no_gt = saved

    # -- expressions ----------------------------------------------------------

    def expr(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at_kw("OR") or self.at_kw("or"):
            self.next()
            left = Binary("OR", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.at_kw("AND") or self.at_kw("and"):
            self.next()
            left = Binary("AND", left, self.not_expr())
        return left

    def not_expr(self):
        if self.at_kw("NOT") or self.at_kw("not"):
            self.next()
            return Unary("NOT", self.not_expr())
        return self.comparison()

    def comparison(self):
        left = self.additive()
        if self.at_kw("is"):
            self.next()
            self.expect_kw("null")
            return IsNull(left)
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at_sym(op):
                if self._no_gt and op in (">", ">="):
                    return left
                self.next()
                return Binary(op, left, self.additive())
        return left

    def additive(self):
        left = self.multiplicative()
        while self.at_sym("+") or self.at_sym("-"):
            op = self.next().value
            left = Binary(op, left, self.multiplicative())
        return left

    def multiplicative(self):
        left = self.unary()
        while self.at_sym("*") or self.at_sym("/"):
            op = self.next().value
            left = Binary(op, left, self.unary())
        return left

    def unary(self):
        if self.at_sym("-"):
            self.next()
            operand = self.unary()
            if isinstance(operand, Const) and isinstance(operand.value, (int, float)) \
                    and not isinstance(operand.value, bool):
                return Const(-operand.value)
            return Unary("-", operand)
        return self.primary()

    def primary(self):
        t = self.peek()
        if self.at_sym("("):
            self.next()
            saved, self._no_gt = self._no_gt, False
            try:
                e = self.expr()
            finally:
                self._no_gt = saved
            self.expect_sym(")")
            return e
        if self.at_sym("{"):
            return self.query()
        if t.kind == "IDENT":
            if t.value in AGG_FUNCS and self.at_sym("(", 1):
                self.next()
                self.next()
                if self.at_sym("{") or (self.peek().kind == "IDENT" and self.at_sym("=", 1)):
                    arg = self.query()
                else:
                    arg = self.path()
                self.expect_sym(")")
                return Aggregate(t.value, arg)
            return self.path()
        if t.kind in ("STRING", "NUMBER", "REAL", "REF", "HEXREF") or \
                self.at_kw("true") or self.at_kw("false") or self.at_kw("null"):
            return self.const()
        self.fail("expected an expression")


def parse_query(text: str) -> Query:
    """Parse one full query; raises QuerySyntaxError with line:column."""
    return Parser(text).parse_query()


def parse_expression(text: str):
    """Parse a standalone expression (used by properties and constraints)."""
    p = Parser(text)
    e = p.expr()
    t = p.peek()
    if t.kind != "EOF":
        raise QuerySyntaxError(f"trailing input {t.value!r}", t.line, t.col)
    return e
