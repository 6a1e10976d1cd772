import random

import pytest

from codm import Database, DimPath, ItemRef
from codm.errors import (
    ArityMismatch,
    DomainViolation,
    InvalidPath,
    NullForbidden,
    UnknownItem,
)

from fixtures import build_f_obj
from gen import random_db


def test_insert_basic(f_obj):
    db = f_obj.db
    assert f_obj.o1 == ItemRef(f_obj.objects, 1)
    assert db.item(f_obj.o1).values == [f_obj.s1, f_obj.c2]


def test_insert_null_forbidden(f_obj):
    with pytest.raises(NullForbidden):
        f_obj.db.insert_item(f_obj.objects, (f_obj.s1, None))


def test_insert_domain_violation(f_obj):
    with pytest.raises(DomainViolation):
        f_obj.db.insert_item(f_obj.objects, (f_obj.c1, f_obj.s1))


def test_insert_arity(f_obj):
    with pytest.raises(ArityMismatch):
        f_obj.db.insert_item(f_obj.objects, (f_obj.s1,))


def test_refs_never_reused(f_obj):
    db = f_obj.db
    db.delete_item(f_obj.o3)
    o4 = db.insert_item(f_obj.objects, (f_obj.s1, f_obj.c1))
    assert o4.id == 4


def test_get_super(f_obj):
    db = f_obj.db
    label = DimPath(f_obj.objects, ("size", "label"))
    assert db.get_super(f_obj.o1, label) == "small"
    assert db.get_super(f_obj.o1, DimPath(f_obj.objects)) == f_obj.o1


def test_get_super_null_short_circuit():
    ns = build_f_obj(size_nullable=True)
    x = ns.db.insert_item(ns.objects, (None, ns.c2))
    assert ns.db.get_super(x, DimPath(ns.objects, ("size", "label"))) is None


def test_get_super_invalid_path(f_obj):
    with pytest.raises(InvalidPath):
        f_obj.db.get_super(f_obj.o1, DimPath(f_obj.objects, ("nope",)))
    with pytest.raises(InvalidPath):
        f_obj.db.get_super(f_obj.s1, DimPath(f_obj.objects, ("size",)))


def test_get_subs(f_obj):
    db = f_obj.db
    size = DimPath(f_obj.objects, ("size",))
    assert db.get_subs(f_obj.s2, f_obj.objects, size) == [f_obj.o2, f_obj.o3]
    assert db.get_subs(f_obj.s1, f_obj.objects, size) == [f_obj.o1]


def test_get_subs_sales(f_sales):
    db = f_sales.db
    country = DimPath(f_sales.sales, ("country",))
    assert db.get_subs(f_sales.de, f_sales.sales, country) == [f_sales.t1, f_sales.t2]


def test_update_preserves_identity(f_obj):
    db = f_obj.db
    db.update_value(f_obj.o1, "colour", f_obj.c1)
    assert db.item(f_obj.o1).values == [f_obj.s1, f_obj.c1]
    assert db.usage[f_obj.c2] == 1  # only o3 left
    assert db.usage[f_obj.c1] == 2


def test_update_nullable():
    ns = build_f_obj(colour_nullable=True)
    before = ns.db.usage[ns.c2]
    ns.db.update_value(ns.o1, "colour", None)
    assert ns.db.item(ns.o1).values == [ns.s1, None]
    assert ns.db.usage[ns.c2] == before - 1


def test_update_domain_violation(f_obj):
    with pytest.raises(DomainViolation):
        f_obj.db.update_value(f_obj.o1, "size", f_obj.c1)


# ---------------------------------------------------------------------------
# deletion cascades
# ---------------------------------------------------------------------------

def test_delete_cascades_through_non_nullable(f_obj):
    report = f_obj.db.delete_item(f_obj.s2)
    assert report.deleted == [f_obj.o2, f_obj.o3, f_obj.s2]  # children first
    assert report.nulled == []
    assert f_obj.db.extent(f_obj.objects) == [f_obj.o1]
    assert not f_obj.db.is_live(f_obj.s2)


def test_delete_nullifies_nullable_slots():
    ns = build_f_obj(size_nullable=True)
    report = ns.db.delete_item(ns.s2)
    assert report.deleted == [ns.s2]
    assert report.nulled == [(ns.o2, "size"), (ns.o3, "size")]
    assert ns.db.item(ns.o2).values == [None, ns.c1]
    assert ns.db.item(ns.o3).values == [None, ns.c2]


def test_delete_isolated_item(f_obj):
    fresh = f_obj.db.insert_item(f_obj.sizes, ("medium",))
    report = f_obj.db.delete_item(fresh)
    assert report.deleted == [fresh]
    assert report.nulled == []


def test_delete_unknown(f_obj):
    f_obj.db.delete_item(f_obj.o1)
    with pytest.raises(UnknownItem):
        f_obj.db.delete_item(f_obj.o1)


def test_delete_completeness(f_obj):
    db = f_obj.db
    report = db.delete_item(f_obj.s2)
    gone = set(report.deleted)
    for ext in db.extents.values():
        for it in ext.items.values():
            for v in it.values:
                assert v not in gone
    assert db.check_integrity() == []


def test_insert_delete_inverse(f_obj):
    db = f_obj.db
    before = [(r, list(db.item(r).values)) for r in db.extent(f_obj.objects)]
    tmp = db.insert_item(f_obj.objects, (f_obj.s1, f_obj.c1))
    db.delete_item(tmp)
    after = [(r, list(db.item(r).values)) for r in db.extent(f_obj.objects)]
    assert after == before
    assert db.check_integrity() == []


# ---------------------------------------------------------------------------
# garbage collection
# ---------------------------------------------------------------------------

def test_gc_collects_unused_local():
    ns = build_f_obj(sizes_scope="local")
    ns.db.delete_item(ns.o1)
    collected = ns.db.run_gc()
    assert collected == [ns.s1]  # s1's count fell to zero
    assert ns.db.extent(ns.sizes) == [ns.s2]


def test_gc_skips_persistent():
    ns = build_f_obj(sizes_scope="persistent")
    ns.db.delete_item(ns.o1)
    assert ns.db.run_gc() == []
    assert ns.db.is_live(ns.s1)


def test_gc_fixpoint_chain():
    db = Database()
    a = db.define_concept("A", [("x", "String")], gc_scope="local")
    b = db.define_concept("B", [("a", "A")], gc_scope="local")
    c = db.define_concept("C", [("b", "B")], gc_scope="local")
    ia = db.insert_item(a, ("root",))
    ib = db.insert_item(b, (ia,))
    ic = db.insert_item(c, (ib,))
    db.delete_item(ic)
    assert db.run_gc() == [ib, ia]  # B-item first, then the A-item
    assert db.check_integrity() == []


def test_gc_never_touches_unreferenced_leaf_items():
    # Leaf-concept items can never be referenced; usage-based collection
    # would destroy them (multi-valued links live in such leaves).
    db = Database()
    c = db.define_concept("Logs", [("line", "String")], gc_scope="local")
    ref = db.insert_item(c, ("hello",))
    assert db.run_gc() == []
    assert db.is_live(ref)


def test_extent(f_obj, f_geo):
    assert f_obj.db.extent(f_obj.objects) == [f_obj.o1, f_obj.o2, f_obj.o3]
    fresh = f_obj.db.define_concept("Fresh", [("x", "String")])
    assert f_obj.db.extent(fresh) == []
    assert f_geo.db.extent(f_geo.countries) == [f_geo.de, f_geo.fr, f_geo.it]


def test_usage_counts_match_recount(f_sales):
    db = f_sales.db
    assert {r: n for r, n in db.recount_usage().items()} == {
        r: n for r, n in db.usage.items() if n
    }


def test_random_mutations_keep_invariants():
    rng = random.Random(7)
    db = random_db(rng, max_concepts=4, max_dims=3, max_items=10)
    for _ in range(300):
        op = rng.random()
        cids = [c.id for c in db.schema.user_concepts()]
        cid = rng.choice(cids)
        c = db.schema.concept(cid)
        if op < 0.5:
            values = []
            ok = True
            for d in c.intent:
                dom = db.schema.concept(d.domain)
                if dom.primitive:
                    values.append(
                        {"String": "w", "Integer": 1, "Real": 0.5, "Boolean": True}[dom.name]
                    )
                else:
                    ext = db.extent(d.domain)
                    if ext:
                        values.append(rng.choice(ext))
                    elif d.nullable:
                        values.append(None)
                    else:
                        ok = False
                        break
            if ok:
                db.insert_item(cid, values)
        elif op < 0.8:
            ext = db.extent(cid)
            if ext:
                db.delete_item(rng.choice(ext))
        else:
            db.run_gc()
    db.run_gc()
    assert db.check_integrity() == []
