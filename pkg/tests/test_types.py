import itertools

import pytest

import brute
from lgeom.corpus import CORPUS
from lgeom.halmos import satisfies, val
from lgeom.model import Point, hom_space, is_isomorphism, relabel
from lgeom.syntax import Equality, Not, Op, RelAtom, SignatureError, Var, format_formula, quantifier_rank
from lgeom.types import (ef_equiv, interpretation_constraints, isotypic, lg_equivalent,
                         same_type, separating_formula)

x = Var("x")
e = Op("e", ())


def P(*vals):
    return Point(("x",), vals)


def mul(a, b):
    return Op("mul", (a, b))


def test_same_type_examples(models):
    z3 = models("z3")
    v = same_type(z3, P(1), z3, P(1))
    assert v and v.witness == (0, 1, 2)
    v = same_type(z3, P(1), z3, P(2))
    assert v and v.witness == (0, 2, 1)


def test_same_type_z4_v4(models):
    z4, v4 = models("z4"), models("v4")
    v = same_type(z4, P(1), v4, P(1))
    assert not v
    u = v.witness
    assert satisfies(z4, P(1), u) and not satisfies(v4, P(1), u)
    # every involution of V4 squares to e, the generator of Z4 does not
    assert satisfies(z4, P(1), Not(Equality(mul(x, x), e)))
    assert not satisfies(v4, P(1), Not(Equality(mul(x, x), e)))
    assert v.as_dict()["witness_kind"] == "formula"


def test_same_type_needs_matching_signature(models):
    with pytest.raises(SignatureError):
        same_type(models("z2"), P(0), models("z2p"), P(0))


def brute_same_type(a, mu, b, nu):
    m1, m2 = brute.load(a), brute.load(b)
    return any(brute.is_iso(m1, m2, g) and all(g[p] == q for p, q in zip(mu, nu))
               for g in itertools.permutations(range(m1[0])))


@pytest.mark.parametrize("a, b", [("z3", "z3-relabeled"), ("z4", "v4"), ("z4", "z4"),
                                  ("v4", "v4"), ("q3", "q3"), ("z2", "z2")])
def test_same_type_against_brute_force(models, a, b):
    m1, m2 = models(a), models(b)
    X = ("x", "y")
    for mu in hom_space(X, m1):
        for nu in hom_space(X, m2):
            assert bool(same_type(m1, mu, m2, nu)) == brute_same_type(a, mu.values, b, nu.values)


def test_same_type_is_an_equivalence(models):
    for name in ["z4", "v4", "s3"]:
        m = models(name)
        X = ("x", "y")
        classes = {}
        for mu in hom_space(X, m):
            for rep in classes:
                if same_type(m, mu, m, rep):
                    classes[rep].append(mu)
                    break
            else:
                classes[mu] = [mu]
        for rep, members in classes.items():
            for a, b in itertools.combinations(members, 2):
                assert same_type(m, a, m, b) and same_type(m, b, m, a)
        for r1, r2 in itertools.combinations(classes, 2):
            assert not same_type(m, r1, m, r2)


def test_same_type_implies_ef_equivalence(models):
    for name in ["z3", "z4", "v4"]:
        m = models(name)
        for mu, nu in itertools.product(hom_space(("x",), m), repeat=2):
            same = bool(same_type(m, mu, m, nu))
            for k in range(m.n + 2):
                if same:
                    assert ef_equiv(m, mu.values, m, nu.values, k)
            assert same == ef_equiv(m, mu.values, m, nu.values, m.n + 1)


def test_ef_examples(models):
    z4, v4 = models("z4"), models("v4")
    assert ef_equiv(z4, (), v4, (), 0)
    assert not ef_equiv(z4, (), v4, (), 2)
    assert ef_equiv(z4, (1,), z4, (3,), 5)


def test_ef_is_monotone_in_rank(models):
    z4, v4 = models("z4"), models("v4")
    for a, b in itertools.product(range(4), repeat=2):
        seen_false = False
        for k in range(5):
            r = ef_equiv(z4, (a,), v4, (b,), k)
            assert not (seen_false and r)
            seen_false = seen_false or not r


def test_separating_formula_examples(models):
    z3, z2p = models("z3"), models("z2p")
    assert separating_formula(z3, P(1), z3, P(1)) is None
    u = separating_formula(z2p, P(1), z2p, P(0))
    assert u == RelAtom("P", (x,))
    z4, v4 = models("z4"), models("v4")
    u = separating_formula(z4, P(1), v4, P(1))
    assert quantifier_rank(u) == 0
    assert satisfies(z4, P(1), u) and not satisfies(v4, P(1), u)


def test_isotypic_examples(models):
    z3 = models("z3")
    v = isotypic(z3, z3, ("x",))
    assert v and v.identity and v.describe() == "ISOTYPIC (identity)"
    r = models("z3-relabeled")
    v = isotypic(z3, r, ("x",))
    # any isomorphism will do; the relabeling itself is one of the two
    assert v and is_isomorphism(z3, r, v.isomorphism)
    assert is_isomorphism(z3, r, (1, 2, 0))
    assert v.describe() == "ISOTYPIC, witness: " + ",".join(
        f"{a}->{b}" for a, b in enumerate(v.isomorphism))


def test_isotypic_z4_v4(models):
    z4, v4 = models("z4"), models("v4")
    v = isotypic(z4, v4, ("x",))
    assert not v
    assert v.side == 1 and v.point.values == (1,)
    assert format_formula(v.formula) == "!(x == inv(x))"
    assert satisfies(z4, v.point, v.formula)
    assert val(v.formula, ("x",), v4).is_empty()
    assert v.as_dict()["rank"] <= 2


def test_isotypic_relabel_everything(models):
    for name in CORPUS:
        m = models(name)
        perm = tuple(reversed(range(m.n)))
        v = isotypic(m, relabel(m, perm), ("x",))
        assert v


def test_lg_equivalent_examples(models):
    z3, r = models("z3"), models("z3-relabeled")
    assert lg_equivalent(z3, z3, ("x",)).result is True
    v = lg_equivalent(z3, r, ("x",))
    assert v.result is True and v.rank == 7
    assert v.describe() == "LG-EQUIVALENT at rank 7"


def test_lg_equivalent_z4_v4(models):
    z4, v4 = models("z4"), models("v4")
    v = lg_equivalent(z4, v4, ("x",))
    assert v.result is False
    chi, = v.T
    # the emitted u lies in T^LL over exactly one of the two models
    ma, mb = (z4, v4) if v.side == 1 else (v4, z4)
    assert not (val(chi, ("x",), ma) <= val(v.u, ("x",), ma))
    assert val(chi, ("x",), mb) <= val(v.u, ("x",), mb)


def test_lg_equivalent_low_rank_is_inconclusive(models):
    z3, r = models("z3"), models("z3-relabeled")
    v = lg_equivalent(z3, r, ("x",), rank=1)
    assert v.result is None and not v.conclusive
    # z4 and v4 are already told apart without quantifiers
    assert lg_equivalent(models("z4"), models("v4"), ("x",), rank=0).result is False


def test_interpretation_examples(models):
    z3 = models("z3")
    assert interpretation_constraints(z3, z3, [(P(1), P(1))])
    assert interpretation_constraints(z3, z3, [(P(1), P(2))])
    rep = interpretation_constraints(z3, z3, [(P(1), P(0))])
    assert not rep
    assert rep.violation["kind"] == "equality"
    assert rep.violation["terms"] == ["x", "e"]


def test_interpretation_relations(models):
    z2p = models("z2p")
    rep = interpretation_constraints(z2p, z2p, [(P(0), P(0)), (P(1), P(1))])
    assert rep.passed
    z2 = models("z2")
    assert not interpretation_constraints(z2, z2, [(P(0), P(1))])
