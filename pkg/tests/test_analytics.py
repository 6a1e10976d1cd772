import random

import pytest

from codm import Database, DimPath
from codm.analytics import (
    EMPTY,
    Axis,
    CubeSpec,
    Level,
    TreeSpec,
    build_cube,
    change_level,
    cube_csv,
    cube_query_text,
    group_aggregate,
    hierarchy_tree,
    infer,
    tree_dump,
)
from codm.errors import InvalidAxisPath, NoCommonSubconcept, NoSuchLevel

from fixtures import build_f_sales


def sales_cube(ns, agg="sum", measure="amount", axes=("country", "product")):
    ax = []
    for dim in axes:
        d = ns.db.schema.concept(ns.sales).dim(dim)
        ax.append(Axis(d.domain, DimPath(ns.sales, (dim,))))
    return CubeSpec(fact=ns.sales, axes=ax, measure=measure, agg=agg)


# ---------------------------------------------------------------------------
# group_aggregate
# ---------------------------------------------------------------------------

def test_group_sum(f_sales):
    res = group_aggregate(f_sales.db, f_sales.countries, "Sales.country", "amount", "sum")
    assert res.rows == [(f_sales.de, 15), (f_sales.fr, 7), (f_sales.it, 0)]
    assert res.columns == ["Countries", "sum"]


def test_group_size(f_obj):
    res = group_aggregate(f_obj.db, f_obj.sizes, "Objects.size", None, "size")
    assert res.rows == [(f_obj.s1, 1), (f_obj.s2, 2)]


def test_group_avg_empty_is_null(f_sales):
    res = group_aggregate(f_sales.db, f_sales.products, "Sales.product", "amount", "avg")
    by = dict(res.rows)
    assert by[f_sales.p1] == pytest.approx(8.5)
    assert by[f_sales.p2] == 5.0
    empty = f_sales.db.insert_item(f_sales.products, ("misc",))
    res2 = group_aggregate(f_sales.db, f_sales.products, "Sales.product", "amount", "avg")
    assert dict(res2.rows)[empty] is None


def test_group_over_mv_property(f_sales):
    db = f_sales.db
    db.define_mv_property(f_sales.countries, "products", f_sales.products)
    db.mv_update(f_sales.de, "products", "add", f_sales.p1)
    res = group_aggregate(db, f_sales.countries, "products", None, "size")
    assert res.rows == [(f_sales.de, 1), (f_sales.fr, 0), (f_sales.it, 0)]


# ---------------------------------------------------------------------------
# cubes
# ---------------------------------------------------------------------------

def test_build_cube_sum(f_sales):
    cells = build_cube(f_sales.db, sales_cube(f_sales))
    got = {tuple(c.coords): c.value for c in cells}
    assert got[(f_sales.de, f_sales.p1)] == 10
    assert got[(f_sales.de, f_sales.p2)] == 5
    assert got[(f_sales.fr, f_sales.p1)] == 7
    assert got[(f_sales.fr, f_sales.p2)] is EMPTY
    assert got[(f_sales.it, f_sales.p1)] is EMPTY
    assert got[(f_sales.it, f_sales.p2)] is EMPTY
    assert len(cells) == 6


def test_build_cube_single_axis_size(f_sales):
    spec = sales_cube(f_sales, agg="size", measure=None, axes=("country",))
    cells = build_cube(f_sales.db, spec)
    assert [(c.coords[0], c.value) for c in cells] == [
        (f_sales.de, 2), (f_sales.fr, 1), (f_sales.it, EMPTY),
    ]


def test_cube_axis_at_fact_itself(f_sales):
    spec = CubeSpec(
        fact=f_sales.sales,
        axes=[Axis(f_sales.sales, DimPath(f_sales.sales))],
        measure=None,
        agg="size",
    )
    cells = build_cube(f_sales.db, spec)
    assert all(c.value in (1, EMPTY) for c in cells)  # one or no fact per cell
    assert [c.value for c in cells] == [1, 1, 1]


def test_cube_invalid_axis(f_sales):
    spec = CubeSpec(
        fact=f_sales.sales,
        axes=[Axis(f_sales.countries, DimPath(f_sales.sales, ("product",)))],
    )
    with pytest.raises(InvalidAxisPath):
        build_cube(f_sales.db, spec)


def test_cube_agrees_with_query_form(f_sales):
    spec = sales_cube(f_sales)
    cells = build_cube(f_sales.db, spec)
    res = f_sales.db.query(cube_query_text(f_sales.db, spec))
    assert len(res.rows) == len(cells)
    for cell, row in zip(cells, res.rows):
        assert tuple(row[:-1]) == cell.coords
        want = 0 if cell.value is EMPTY else cell.value
        assert row[-1] == want


def test_cube_with_filter_agrees(f_sales):
    spec = sales_cube(f_sales)
    spec.filters = ["amount > 5"]
    cells = build_cube(f_sales.db, spec)
    got = {c.coords: c.value for c in cells}
    assert got[(f_sales.de, f_sales.p1)] == 10
    assert got[(f_sales.de, f_sales.p2)] is EMPTY  # amount 5 filtered out
    res = f_sales.db.query(cube_query_text(f_sales.db, spec))
    for cell, row in zip(cells, res.rows):
        assert row[-1] == (0 if cell.value is EMPTY else cell.value)


def test_roll_up_and_drill_down():
    db = Database()
    countries = db.define_concept("Countries", [("name", "String")])
    states = db.define_concept("States", [("name", "String"), ("country", "Countries")])
    counties = db.define_concept(
        "Counties", [("name", "String"), ("state", "States"), ("pop", "Integer")]
    )
    us = db.insert_item(countries, ("US",))
    de = db.insert_item(countries, ("DE",))
    ca = db.insert_item(states, ("CA", us))
    tx = db.insert_item(states, ("TX", us))
    by = db.insert_item(states, ("BY", de))
    db.insert_item(counties, ("alameda", ca, 10))
    db.insert_item(counties, ("kern", ca, 4))
    db.insert_item(counties, ("travis", tx, 7))
    db.insert_item(counties, ("munich", by, 9))
    spec = CubeSpec(
        fact=counties,
        axes=[Axis(states, DimPath(counties, ("state",)))],
        measure="pop",
        agg="sum",
    )
    up = change_level(db, spec, 0, "roll_up", "country")
    assert up.axes[0].concept == countries
    assert up.axes[0].path.steps == ("state", "country")
    down = change_level(db, up, 0, "drill_down", "country")
    assert down == spec  # inverse pair

    fine = build_cube(db, spec)
    coarse = build_cube(db, up)
    # sum re-aggregation: each coarse cell equals the sum of its fine cells
    for cell in coarse:
        country = cell.coords[0]
        fine_sum = 0
        for fc in fine:
            st = fc.coords[0]
            if db.get_super(st, DimPath(states, ("country",))) == country:
                fine_sum += 0 if fc.value is EMPTY else fc.value
        assert (0 if cell.value is EMPTY else cell.value) == fine_sum


def test_change_level_errors(f_sales):
    spec = sales_cube(f_sales)
    with pytest.raises(NoSuchLevel):
        change_level(f_sales.db, spec, 0, "roll_up", "nope")
    with pytest.raises(NoSuchLevel):
        change_level(f_sales.db, spec, 0, "drill_down", "product")


def test_cube_csv(f_sales):
    text = cube_csv(f_sales.db, sales_cube(f_sales))
    lines = text.strip().splitlines()
    assert lines[0] == "Countries,Products,sum"
    assert "Germany,food,10" in lines
    assert len(lines) == 4  # header + three non-empty cells
    with_empty = cube_csv(f_sales.db, sales_cube(f_sales), include_empty=True)
    assert len(with_empty.strip().splitlines()) == 7


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def test_infer_small_excludes_green(f_obj):
    got = infer(f_obj.db, {f_obj.sizes: {f_obj.s1}}, f_obj.colors)
    assert got == [f_obj.c2]  # red only


def test_infer_large_allows_both(f_obj):
    got = infer(f_obj.db, {f_obj.sizes: {f_obj.s2}}, f_obj.colors)
    assert set(got) == {f_obj.c1, f_obj.c2}


def test_infer_unconstrained_reaches_referenced(f_obj):
    got = infer(f_obj.db, {}, f_obj.colors)
    assert set(got) == {f_obj.c1, f_obj.c2}


def test_infer_empty_in_empty_out(f_obj):
    assert infer(f_obj.db, {f_obj.sizes: set()}, f_obj.colors) == []


def test_infer_no_common_subconcept(f_obj):
    db = f_obj.db
    iso = db.define_concept("Isolated", [("x", "String")])
    with pytest.raises(NoCommonSubconcept):
        infer(db, {f_obj.sizes: {f_obj.s1}}, iso)


def test_infer_monotonic(f_obj):
    tight = infer(f_obj.db, {f_obj.sizes: {f_obj.s1}}, f_obj.colors)
    loose = infer(f_obj.db, {f_obj.sizes: {f_obj.s1, f_obj.s2}}, f_obj.colors)
    assert set(tight) <= set(loose)


def test_infer_idempotent(f_obj):
    first = infer(f_obj.db, {f_obj.sizes: {f_obj.s1}}, f_obj.colors)
    again = infer(
        f_obj.db,
        {f_obj.sizes: {f_obj.s1}, f_obj.colors: set(first)},
        f_obj.colors,
    )
    assert again == first


def test_infer_target_constrained(f_obj):
    got = infer(f_obj.db, {f_obj.colors: {f_obj.c2}}, f_obj.colors)
    assert got == [f_obj.c2]


def test_infer_null_paths_never_survive():
    from fixtures import build_f_obj

    ns = build_f_obj(size_nullable=True)
    x = ns.db.insert_item(ns.objects, (None, ns.c1))  # green object, unknown size
    got = infer(ns.db, {ns.sizes: {ns.s1, ns.s2}}, ns.colors)
    # the null-size object cannot certify green; o2 still does
    assert ns.c1 in set(got)
    ns.db.delete_item(ns.o2)
    got2 = infer(ns.db, {ns.sizes: {ns.s1, ns.s2}}, ns.colors)
    assert set(got2) == {ns.c2}


def test_infer_matches_flat_oracle():
    from gen import random_inference_instance

    rng = random.Random(37)
    for _ in range(25):
        db, fact, cin, ctgt = random_inference_instance(rng)
        pool = db.extent(cin)
        allowed = set(pool[: max(1, len(pool) // 2)])
        got = set(infer(db, {cin: allowed}, ctgt))
        want = oracle_infer_flat(db, fact, cin, allowed, ctgt)
        assert got == want


def oracle_infer_flat(db, fact_cid, cin, allowed, ctgt):
    """Flat-tuple filter + projection, independent of the path machinery.

    Works on value tuples only; the generator guarantees distinct values so
    projections map back to items unambiguously.
    """
    from oracles import oracle_flat, oracle_keys

    def routes(src, dst):
        out = []

        def walk(cid, acc):
            if cid == dst and acc:
                out.append(tuple(acc))
            c = db.schema.concept(cid)
            for d in c.intent:
                if not d.direct and not db.schema.concept(d.domain).primitive:
                    walk(d.domain, acc + [d.name])

        walk(src, [])
        return out

    def block(tup, route, cid):
        keys = oracle_keys(db, cid)
        prefix = ".".join(route)
        return tuple(tup[prefix + "." + k if k else prefix] for k in keys)

    in_flats = {tuple(oracle_flat(db, r)[k] for k in oracle_keys(db, cin)) for r in allowed}
    tgt_map = {
        tuple(oracle_flat(db, r)[k] for k in oracle_keys(db, ctgt)): r
        for r in db.extent(ctgt)
    }
    out = set()
    for f in db.extent(fact_cid):
        tup = oracle_flat(db, f)
        if any(block(tup, route, cin) not in in_flats for route in routes(fact_cid, cin)):
            continue
        for route in routes(fact_cid, ctgt):
            proj = block(tup, route, ctgt)
            if proj in tgt_map:
                out.add(tgt_map[proj])
    return out


# ---------------------------------------------------------------------------
# hierarchy trees
# ---------------------------------------------------------------------------

def test_tree_basic(f_sales):
    spec = TreeSpec(
        levels=[
            Level(f_sales.countries, show=[("name", "CountryName")]),
            Level(f_sales.sales, via=DimPath(f_sales.sales, ("country",))),
        ]
    )
    root = hierarchy_tree(f_sales.db, spec)
    assert [n.ref for n in root.children] == [f_sales.de, f_sales.fr, f_sales.it]
    de_node = root.children[0]
    assert [n.ref for n in de_node.children] == [f_sales.t1, f_sales.t2]
    assert root.children[2].children == []  # Italy is childless
    assert de_node.props == {"name": "Germany"}


def test_tree_zigzag_expansion(f_sales):
    spec = TreeSpec(
        levels=[
            Level(f_sales.products),
            Level(f_sales.sales, via=DimPath(f_sales.sales, ("product",))),
            Level(f_sales.countries, via=DimPath(f_sales.sales, ("country",))),
        ]
    )
    root = hierarchy_tree(f_sales.db, spec)
    food = root.children[0]
    assert [n.ref for n in food.children] == [f_sales.t1, f_sales.t3]
    countries = [c.ref for sale in food.children for c in sale.children]
    assert countries == [f_sales.de, f_sales.fr]


def test_tree_depth_limit(f_sales):
    spec = TreeSpec(
        levels=[
            Level(f_sales.countries),
            Level(f_sales.sales, via=DimPath(f_sales.sales, ("country",))),
        ]
    )
    root = hierarchy_tree(f_sales.db, spec, depth_limit=1)
    assert root.children and all(not n.children for n in root.children)


def test_tree_filter_removes_subtree(f_sales):
    spec = TreeSpec(
        levels=[
            Level(f_sales.countries, filter='CountryName != "Germany"'),
            Level(f_sales.sales, via=DimPath(f_sales.sales, ("country",))),
        ]
    )
    spec.levels[0].filter = __import__("codm").parse_expression('CountryName != "Germany"')
    root = hierarchy_tree(f_sales.db, spec)
    assert [n.ref for n in root.children] == [f_sales.fr, f_sales.it]
    assert all(c.ref != f_sales.t1 for n in root.children for c in n.children)


def test_tree_soundness(f_sales):
    spec = TreeSpec(
        levels=[
            Level(f_sales.countries),
            Level(f_sales.sales, via=DimPath(f_sales.sales, ("country",))),
        ]
    )
    root = hierarchy_tree(f_sales.db, spec)
    for parent in root.children:
        for child in parent.children:
            got = f_sales.db.get_super(child.ref, DimPath(f_sales.sales, ("country",)))
            assert got == parent.ref


def test_tree_dump(f_sales):
    spec = TreeSpec(
        levels=[
            Level(f_sales.countries, show=[("pop", "CountryPopulation")]),
            Level(f_sales.sales, via=DimPath(f_sales.sales, ("country",))),
        ]
    )
    text = tree_dump(f_sales.db, hierarchy_tree(f_sales.db, spec))
    lines = text.splitlines()
    assert lines[0] == "⊤"
    assert lines[1].startswith("  Countries#1")
    assert "[pop=80]" in lines[1]
    assert lines[2].startswith("    Sales#1")
