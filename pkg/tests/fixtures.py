"""Shared desk fixtures used across the test suite."""

from types import SimpleNamespace

from codm import Database


def build_f_obj(size_nullable=False, colour_nullable=False, sizes_scope="persistent"):
    """Sizes/Colors/Objects with the small-green combination absent."""
    db = Database()
    sizes = db.define_concept("Sizes", [("label", "String")], gc_scope=sizes_scope)
    colors = db.define_concept("Colors", [("name", "String")])
    objects = db.define_concept(
        "Objects",
        [
            ("size", "Sizes", {"nullable"} if size_nullable else set()),
            ("colour", "Colors", {"nullable"} if colour_nullable else set()),
        ],
    )
    s1 = db.insert_item(sizes, ("small",))
    s2 = db.insert_item(sizes, ("large",))
    c1 = db.insert_item(colors, ("green",))
    c2 = db.insert_item(colors, ("red",))
    o1 = db.insert_item(objects, (s1, c2))
    o2 = db.insert_item(objects, (s2, c1))
    o3 = db.insert_item(objects, (s2, c2))
    return SimpleNamespace(
        db=db, sizes=sizes, colors=colors, objects=objects,
        s1=s1, s2=s2, c1=c1, c2=c2, o1=o1, o2=o2, o3=o3,
    )


def build_f_geo():
    """Countries with name and population."""
    db = Database()
    countries = db.define_concept(
        "Countries", [("CountryName", "String"), ("CountryPopulation", "Integer")]
    )
    de = db.insert_item(countries, ("Germany", 80))
    fr = db.insert_item(countries, ("France", 50))
    it = db.insert_item(countries, ("Italy", 40))
    return SimpleNamespace(db=db, countries=countries, de=de, fr=fr, it=it)


def build_f_sales():
    """F-GEO plus Products and a Sales fact concept."""
    geo = build_f_geo()
    db = geo.db
    products = db.define_concept("Products", [("cat", "String")])
    p1 = db.insert_item(products, ("food",))
    p2 = db.insert_item(products, ("tools",))
    sales = db.define_concept(
        "Sales",
        [("country", "Countries"), ("product", "Products"), ("amount", "Integer")],
    )
    t1 = db.insert_item(sales, (geo.de, p1, 10))
    t2 = db.insert_item(sales, (geo.de, p2, 5))
    t3 = db.insert_item(sales, (geo.fr, p1, 7))
    return SimpleNamespace(
        db=db, countries=geo.countries, de=geo.de, fr=geo.fr, it=geo.it,
        products=products, p1=p1, p2=p2, sales=sales, t1=t1, t2=t2, t3=t3,
    )
