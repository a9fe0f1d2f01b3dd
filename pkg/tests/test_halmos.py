import pytest
from hypothesis import assume, given, settings, strategies as st

import brute
from lgeom.corpus import CORPUS
from lgeom.halmos import (DefSet, SortMismatch, check_halmos_axioms, constant_set, cylindrify,
                          empty, format_points, full, satisfies, theory_contains, val)
from lgeom.model import Point
from lgeom.syntax import (Equality, Exists, Forall, Not, Op, Or, RelAtom, Var, free_vars,
                          parse_formula)
from strategies import formulas

x, y = Var("x"), Var("y")
e = Op("e", ())


def mul(a, b):
    return Op("mul", (a, b))


def pts(A):
    return A.tuples()


def test_cylindrify_examples(models):
    z2 = models("z2")
    X = ("x", "y")
    assert cylindrify(empty(X, z2), "x").is_empty()
    assert cylindrify(full(X, z2), "y").is_full()
    A = DefSet.from_points(X, z2, [(0, 1)])
    assert pts(cylindrify(A, "y")) == [(0, 0), (0, 1)]
    assert pts(cylindrify(A, "x")) == [(0, 1), (1, 1)]
    with pytest.raises(SortMismatch):
        cylindrify(A, "z")


def test_constant_set_examples(models):
    assert constant_set("==", (x, x), ("x",), models("s3")).is_full()
    assert pts(constant_set("P", (x,), ("x",), models("z2p"))) == [(1,)]
    assert pts(constant_set("==", (mul(x, x), e), ("x",), models("z2"))) == [(0,), (1,)]


def test_val_examples(models):
    z2, z3 = models("z2"), models("z3")
    assert val(Equality(x, x), ("x",), z3).is_full()
    sq = Exists("y", Equality(mul(y, y), x))
    assert pts(val(sq, ("x",), z2)) == [(0,)]
    assert pts(val(sq, ("x",), z3)) == [(0,), (1,), (2,)]
    assert format_points(val(sq, ("x",), z2)) == "{0}"
    with pytest.raises(SortMismatch):
        val(Equality(x, y), ("x",), z2)


def test_satisfies_examples(models):
    p0, p1 = Point(("x",), (0,)), Point(("x",), (1,))
    u = Equality(mul(x, x), e)
    assert satisfies(models("z2"), p1, u)
    assert satisfies(models("z4"), p1, Or(u, Not(u)))
    assert not satisfies(models("z2p"), p0, RelAtom("P", (x,)))


def test_theory_examples(models):
    comm = Forall("x", Forall("y", Equality(mul(x, y), mul(y, x))))
    assert theory_contains(comm, (), models("z2"))
    assert not theory_contains(comm, (), models("s3"))
    assert theory_contains(Equality(x, x), ("x",), models("z3"))
    assert not theory_contains(Equality(x, e), ("x",), models("z3"))


def test_vacuous_and_outside_quantifiers(models):
    z3 = models("z3")
    # exists x over a sort without x is read in the extended sort (x, ...)
    u = Exists("y", Equality(y, e))
    assert val(u, (), z3).is_full()
    assert val(Exists("x", Equality(x, x)), ("y",), z3).is_full()
    assert val(Forall("x", Equality(x, e)), ("y",), z3).is_empty()


@pytest.mark.parametrize("name", ["z2p", "z3", "s3"])
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_val_matches_brute_force(models, name, data):
    m, ref = models(name), brute.load(name)
    u = data.draw(formulas(rels=name == "z2p"))
    X = ("x", "y", "z") if name != "s3" else ("x", "y")
    assume(free_vars(u) <= set(X))
    assert set(pts(val(u, X, m))) == brute.value(ref, u, X)


@settings(max_examples=60, deadline=None)
@given(formulas(), st.sampled_from(["x", "y", "z"]))
def test_quantifier_is_cylindrification(u, v):
    from lgeom.corpus import get_model
    m = get_model("z2p")
    X = ("x", "y", "z")
    assert val(Exists(v, u), X, m) == cylindrify(val(u, X, m), v)


def test_ultrafilter(models):
    m = models("z4")
    mu = Point(("x",), (2,))
    for text in ["mul(x,x) == e", "x == e", "exists y. mul(y,y) == x"]:
        u = parse_formula(text, m.sig, m.rel_sig)
        assert satisfies(m, mu, u) != satisfies(m, mu, Not(u))


@pytest.mark.parametrize("name", CORPUS)
def test_axiom_suite_small(models, name):
    for X in [(), ("x",), ("x", "y")]:
        rep = check_halmos_axioms(models(name), X, instances=40, seed=3)
        assert rep.passed, rep.as_dict()
    d = rep.as_dict()
    assert d["axioms"]["exists_meet"]["checked"] == 40


def test_axiom_suite_is_deterministic(models):
    a = check_halmos_axioms(models("z3"), ("x", "y"), instances=30, seed=7).as_dict()
    b = check_halmos_axioms(models("z3"), ("x", "y"), instances=30, seed=7).as_dict()
    assert a == b
