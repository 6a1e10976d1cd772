import pytest

from codm import parse_query
from codm.errors import QuerySyntaxError
from codm.query.ast import (
    Aggregate,
    Binary,
    Const,
    HexRef,
    IsNull,
    Path,
    Query,
    Ref,
    Unary,
    print_query,
)
from codm.query.parser import parse_expression

from gen import random_query_ast


def test_parse_filter_query():
    q = parse_query('{c:Objects | c.size.label == "large"} <c.colour.name>')
    assert len(q.sources) == 1
    assert q.sources[0].binder == "c"
    assert q.sources[0].path == Path("Objects")
    assert q.predicate == Binary("==", Path("c", ("size", "label")), Const("large"))
    assert len(q.returns) == 1
    assert q.returns[0].expr == Path("c", ("colour", "name"))


def test_parse_anonymous_source():
    q = parse_query("{Countries}")
    assert q.sources[0].binder is None
    assert q.sources[0].path == Path("Countries")
    assert q.predicate is None
    assert q.returns == []


def test_parse_empty_predicate_is_error():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("{c:C | }")
    assert err.value.line == 1


def test_parse_error_positions():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("{c:C |\n  == }")
    assert err.value.line == 2


def test_parse_binder_separators():
    assert parse_query("{c in C}").sources[0].sep == "in"
    assert parse_query("{c from C}").sources[0].sep == "from"
    assert parse_query("{c:C}").sources[0].sep == ":"


def test_parse_parent_restriction():
    q = parse_query("{Sales.country = DE}")
    s = q.sources[0]
    assert s.path == Path("Sales", ("country",))
    assert s.restrict == Path("DE")
    # dotted right-hand side, needed by zigzag queries
    q2 = parse_query("{t:T | size({C.x = t.p}) < 5}")
    inner = q2.predicate.left.arg
    assert inner.sources[0].restrict == Path("t", ("p",))


def test_parse_constants():
    q = parse_query('{x: {<"a", 1, 1.5, true, false, null, Sizes#2, 0xa0>}}')
    row = q.sources[0].literal.rows[0]
    assert row == (
        Const("a"), Const(1), Const(1.5), Const(True), Const(False),
        Const(None), Ref("Sizes", 2), HexRef(0xA0),
    )


def test_parse_literal_with_names():
    q = parse_query('{c: {<"Germany", 80>, <"France", 50>} <CountryName, CountryPopulation>}')
    lit = q.sources[0].literal
    assert len(lit.rows) == 2
    assert lit.names == ["CountryName", "CountryPopulation"]


def test_parse_precedence():
    e = parse_expression("a OR b AND NOT c == 1 + 2 * 3")
    # OR(a, AND(b, NOT(==(c, +(1, *(2, 3))))))
    assert e == Binary(
        "OR",
        Path("a"),
        Binary(
            "AND",
            Path("b"),
            Unary("NOT", Binary("==", Path("c"), Binary("+", Const(1), Binary("*", Const(2), Const(3))))),
        ),
    )


def test_parse_is_null():
    e = parse_expression("c.x is null")
    assert e == IsNull(Path("c", ("x",)))


def test_parse_aggregates():
    e = parse_expression("sum({t:T} <t.m>)")
    assert isinstance(e, Aggregate) and e.func == "sum"
    assert isinstance(e.arg, Query)
    e2 = parse_expression("size(c.m)")
    assert e2 == Aggregate("size", Path("c", ("m",)))


def test_parse_named_query_and_returns():
    q = parse_query("{t:T} <t.a, t.b, total = t.a + t.b>")
    assert q.returns[2].name == "total"
    q2 = parse_query("R = {c:C}")
    assert q2.name == "R"


def test_parse_distinct():
    q = parse_query("{distinct c:C} <c.x>")
    assert q.distinct


def test_parse_block_query():
    q = parse_query(
        "{begin { n := 0; } over c:Objects where (true) after { n := n + 1; } end {} return <n>}"
    )
    assert q.blocks is not None
    assert q.blocks.begin == [("n", Const(0))]
    assert q.blocks.before is None
    assert q.blocks.after == [("n", Binary("+", Path("n"), Const(1)))]
    assert q.predicate == Const(True)
    assert q.returns[0].expr == Path("n")


def test_parse_negative_number_folds():
    assert parse_expression("-3") == Const(-3)
    assert parse_expression("1 - -2") == Binary("-", Const(1), Const(-2))


def test_print_round_trip_handwritten():
    cases = [
        '{c:Objects | c.size.label == "large"} <c.colour.name>',
        "{Countries}",
        "{a:Sizes, b:Colors}",
        "{Sales.country = DE}",
        "{c:Countries} <c.CountryPopulation + c.CountryPopulation>",
        '{t:T | size({C.x = t.p}) < 5}',
        "R = {distinct c in C | NOT c.x >= 2 AND c.y is null} <c.x, out = c.y * -1.5>",
        '{x: {<"a", 1>, <"b", 2>} <k, v> | x.v > 1} <x.k>',
        "{begin { n := 0; } over c:C before { d := c.p / 10; } where (d >= 5) "
        "after { n := n + 1; } end { m := n; } return <m>}",
        "{p:P | p.z > sum({c:C.x.y | c.u > p.u} <c.u>)}",
        "{v:Large} <(v.n > 2), ok = (v.m >= 1)>",
    ]
    for text in cases:
        ast1 = parse_query(text)
        printed = print_query(ast1)
        ast2 = parse_query(printed)
        assert ast2 == ast1, f"round trip failed for {text!r} -> {printed!r}"


def test_print_round_trip_random():
    import random

    rng = random.Random(5)
    for i in range(200):
        q = random_query_ast(rng)
        text = print_query(q)
        assert parse_query(text) == q, f"case {i}: {text!r}"
