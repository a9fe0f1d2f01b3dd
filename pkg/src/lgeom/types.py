"""LG-types of points, type equality within and across models, isotypeness and
LG-equivalence verdicts.

For finite models two pointed models satisfy the same formulas iff some
isomorphism carries one point to the other, so type equality is decided by
isomorphism search. The EF games in :mod:`lgeom.ef` give the rank-stratified
view and the separating formulas; the two routes are cross-checked in the
test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import syntax as sx
from .ef import _game, ef_equiv, minimal_conjunction
from .ef import separating_formula as _ef_separator
from .galois import formula_closure_contains, orbit_labels
from .halmos import satisfies, val
from .model import (FiniteModel, Point, _check_cap, eval_term, find_isomorphism, is_isomorphism,
                    point_at)
from .syntax import Formula, Term, Var

__all__ = [
    "TypeVerdict", "same_type", "ef_equiv", "separating_formula", "IsotypicVerdict",
    "isotypic", "EquivalenceVerdict", "lg_equivalent", "InterpretationReport",
    "interpretation_constraints", "sufficient_rank",
]


def _check_pair(m1: FiniteModel, m2: FiniteModel):
    if not m1.same_signature(m2):
        raise sx.SignatureError(f"models {m1} and {m2} have different signatures")


def _fmt_map(alpha) -> str:
    return ",".join(f"{a}->{b}" for a, b in enumerate(alpha))


def _formula_key(u: Formula):
    text = sx.format_formula(u)
    return (sx.quantifier_rank(u), sx.max_term_depth(u), len(text), text)


@dataclass
class TypeVerdict:
    """Outcome of comparing the LG-types of two points.

    ``witness`` is a carrier bijection (tuple) when the types agree and a
    formula true at the first point and false at the second otherwise.
    """

    result: bool
    witness: tuple | Formula | None
    rank: int | None = None

    def __bool__(self):
        return self.result

    @property
    def witness_kind(self) -> str:
        return "isomorphism" if self.result else "formula"

    def as_dict(self) -> dict:
        w = self.witness
        return {
            "result": self.result,
            "witness_kind": self.witness_kind,
            "witness": list(w) if self.result else sx.format_formula(w),
            "rank": self.rank,
            "depth": None if self.result else sx.max_term_depth(w),
        }


def _seed(mu: Point, nu: Point) -> dict | None:
    seed: dict[int, int] = {}
    back: dict[int, int] = {}
    for a, b in zip(mu.values, nu.values):
        if seed.get(a, b) != b or back.get(b, a) != a:
            return None
        seed[a] = b
        back[b] = a
    return seed


def separating_formula(m1: FiniteModel, mu: Point, m2: FiniteModel, nu: Point,
                       kmax: int | None = None) -> Formula | None:
    """A formula of least quantifier rank true at mu in m1 and false at nu in m2,
    or None when the types agree. Checked by evaluation before it is returned."""
    _check_pair(m1, m2)
    if tuple(mu.sort) != tuple(nu.sort):
        raise ValueError(f"points have different sorts {mu.sort} and {nu.sort}")
    u = _ef_separator(m1, mu.values, m2, nu.values, mu.sort, kmax)
    if u is not None and not (satisfies(m1, mu, u) and not satisfies(m2, nu, u)):
        raise AssertionError(f"separator {sx.format_formula(u)} failed its check")
    return u


def same_type(m1: FiniteModel, mu: Point, m2: FiniteModel, nu: Point) -> TypeVerdict:
    """LKer(mu) == LKer(nu), decided by extending mu(x) -> nu(x) to an isomorphism."""
    _check_pair(m1, m2)
    if tuple(mu.sort) != tuple(nu.sort):
        raise ValueError(f"points have different sorts {mu.sort} and {nu.sort}")
    if m1 == m2 and mu == nu:
        return TypeVerdict(True, tuple(range(m1.n)))
    seed = _seed(mu, nu)
    alpha = find_isomorphism(m1, m2, seed) if seed is not None else None
    if alpha is not None:
        assert is_isomorphism(m1, m2, alpha)
        return TypeVerdict(True, alpha)
    u = separating_formula(m1, mu, m2, nu)
    assert u is not None, "no isomorphism, yet the EF game found no separator"
    return TypeVerdict(False, u, sx.quantifier_rank(u))


# -- isotypeness ------------------------------------------------------------------

def _orbit_reps(m: FiniteModel, X: tuple) -> list[Point]:
    return [point_at(X, m, int(i)) for i in np.unique(orbit_labels(m, X))]


def _unrealized_witness(ma, mb, mu: Point, X, kmax=None) -> Formula | None:
    """A formula true at mu in ma and false everywhere in mb^X (None if some
    point of mb^X is indistinguishable from mu at rank kmax)."""
    parts = []
    for nu in _orbit_reps(mb, X):
        u = _ef_separator(ma, mu.values, mb, nu.values, X, kmax)
        if u is None:
            return None
        if u not in parts:
            parts.append(u)
    if not parts:
        return None
    return minimal_conjunction(parts, lambda f: val(f, X, mb).is_empty())


@dataclass
class IsotypicVerdict:
    """S^X(f1) == S^X(f2)?

    When true, ``isomorphism`` maps every point of m1 to a same-type point of
    m2. When false, ``side``/``point``/``formula`` name a point of one model
    whose type is not realized in the other: the formula holds at the point
    and nowhere in the other model's point space.
    """

    result: bool
    sort: tuple
    isomorphism: tuple | None = None
    identity: bool = False
    side: int | None = None
    point: Point | None = None
    formula: Formula | None = None

    def __bool__(self):
        return self.result

    @property
    def witness_kind(self) -> str:
        return "isomorphism" if self.result else "point+formula"

    def as_dict(self) -> dict:
        out = {"result": self.result, "sort": list(self.sort), "witness_kind": self.witness_kind}
        if self.result:
            out["witness"] = list(self.isomorphism)
            out["identity"] = self.identity
            out["rank"] = None
            out["depth"] = None
        else:
            out["witness"] = {"model": self.side, "point": list(self.point.values),
                              "formula": sx.format_formula(self.formula)}
            out["rank"] = sx.quantifier_rank(self.formula)
            out["depth"] = sx.max_term_depth(self.formula)
        return out

    def describe(self) -> str:
        if self.result:
            if self.identity:
                return "ISOTYPIC (identity)"
            return f"ISOTYPIC, witness: {_fmt_map(self.isomorphism)}"
        return (f"NOT ISOTYPIC, separating: {sx.format_formula(self.formula)}"
                f" (point {self.point} of model {self.side})")


def isotypic(m1: FiniteModel, m2: FiniteModel, X: Sequence[str]) -> IsotypicVerdict:
    """Whether m1 and m2 realize the same LG-types over X.

    Over finite models a point of m1 has a same-type partner in m2 exactly when
    the models are isomorphic, so the verdict reduces to one isomorphism
    search; the negative witness is the unrealized point whose distinguishing
    formula has the least rank.
    """
    _check_pair(m1, m2)
    X = sx.make_sort(X)
    _check_cap(X, m1)
    _check_cap(X, m2)
    if m1 == m2:
        return IsotypicVerdict(True, X, tuple(range(m1.n)), identity=True)
    alpha = find_isomorphism(m1, m2)
    if alpha is not None:
        assert is_isomorphism(m1, m2, alpha)
        return IsotypicVerdict(True, X, alpha, identity=alpha == tuple(range(m1.n)))
    best = None
    for side, (ma, mb) in ((1, (m1, m2)), (2, (m2, m1))):
        for mu in _orbit_reps(ma, X):
            u = _unrealized_witness(ma, mb, mu, X)
            assert u is not None, "non-isomorphic finite models with an EF-equivalent point"
            key = _formula_key(u) + (side, mu.values)
            if best is None or key < best[0]:
                best = (key, side, mu, u)
    _, side, mu, u = best
    ma, mb = (m1, m2) if side == 1 else (m2, m1)
    assert satisfies(ma, mu, u) and val(u, X, mb).is_empty()
    return IsotypicVerdict(False, X, side=side, point=mu, formula=u)


# -- LG-equivalence ---------------------------------------------------------------

def sufficient_rank(m1: FiniteModel, m2: FiniteModel) -> int:
    """A rank at which EF-equivalence of pointed finite models already implies
    isomorphism: Spoiler can pebble a whole carrier in max(|H1|, |H2|) moves."""
    return max(m1.n, m2.n)


@dataclass
class EquivalenceVerdict:
    """T^LL agreement over X for all formula sets of rank <= ``rank``.

    ``result`` is None when the models agree at the budget but the budget is
    below the rank known to be decisive. A negative verdict carries T and u
    with u in T^LL on exactly one side.
    """

    result: bool | None
    sort: tuple
    rank: int
    depth: int
    types1: int
    types2: int
    T: list = field(default_factory=list)
    u: Formula | None = None
    side: int | None = None
    point: Point | None = None

    def __bool__(self):
        return bool(self.result)

    @property
    def conclusive(self) -> bool:
        return self.result is not None

    def as_dict(self) -> dict:
        out = {"result": self.result, "sort": list(self.sort), "rank": self.rank,
               "depth": self.depth, "types": [self.types1, self.types2]}
        if self.result is False:
            out["witness_kind"] = "formula-set"
            out["witness"] = {"T": [sx.format_formula(t) for t in self.T],
                              "u": sx.format_formula(self.u),
                              "u_in_closure": [self.side == 2, self.side == 1],
                              "model": self.side, "point": list(self.point.values)}
        else:
            out["witness_kind"] = "none"
            out["witness"] = None
        return out

    def describe(self) -> str:
        if self.result is None:
            return f"INCONCLUSIVE at rank {self.rank}"
        if self.result:
            return f"LG-EQUIVALENT at rank {self.rank}"
        T = ", ".join(sx.format_formula(t) for t in self.T)
        return (f"NOT LG-EQUIVALENT: T = {{{T}}}, u = {sx.format_formula(self.u)}"
                f" is in T^LL over model {3 - self.side} only")


def _realized_classes(game, ma, mb, X, k, flip):
    """Orbit reps of ma^X and, for each, whether some point of mb^X matches it
    in the k-round game."""
    out = []
    reps_b = _orbit_reps(mb, X)
    for mu in _orbit_reps(ma, X):
        if flip:
            hit = any(game.equivalent(nu.values, mu.values, k) for nu in reps_b)
        else:
            hit = any(game.equivalent(mu.values, nu.values, k) for nu in reps_b)
        out.append((mu, hit))
    return out


def lg_equivalent(m1: FiniteModel, m2: FiniteModel, X: Sequence[str], rank: int | None = None,
                  depth: int = 3) -> EquivalenceVerdict:
    """Decide T^LL_(f1) == T^LL_(f2) for every T (and u) of quantifier rank <= rank.

    Two sets of rank-k formulas have the same closure in both models iff the
    models realize the same rank-k types over X, which is settled by EF games
    between orbit representatives. Atomic agreement in the games covers terms
    of every depth; ``depth`` is reported with the verdict. The default rank is
    |H1| + |H2| + |X|.
    """
    _check_pair(m1, m2)
    X = sx.make_sort(X)
    _check_cap(X, m1)
    _check_cap(X, m2)
    if rank is None:
        rank = m1.n + m2.n + len(X)
    game = _game(m1, m2)
    left = _realized_classes(game, m1, m2, X, rank, flip=False)
    right = _realized_classes(game, m2, m1, X, rank, flip=True)
    t1, t2 = len(left), len(right)
    missing = [(1, mu) for mu, hit in left if not hit] + [(2, nu) for nu, hit in right if not hit]
    if not missing:
        ok = True if rank >= sufficient_rank(m1, m2) else None
        return EquivalenceVerdict(ok, X, rank, depth, t1, t2)
    best = None
    for side, mu in missing:
        ma, mb = (m1, m2) if side == 1 else (m2, m1)
        chi = _unrealized_witness(ma, mb, mu, X, rank)
        key = _formula_key(chi) + (side, mu.values)
        if best is None or key < best[0]:
            best = (key, side, mu, chi)
    _, side, mu, chi = best
    ma, mb = (m1, m2) if side == 1 else (m2, m1)
    # chi is satisfiable in ma but not in mb, so !chi lies in {chi}^LL over mb only
    u = sx.Not(chi)
    assert not formula_closure_contains([chi], u, X, ma)
    assert formula_closure_contains([chi], u, X, mb)
    return EquivalenceVerdict(False, X, rank, depth, t1, t2, [chi], u, side, mu)


# -- interpretation constraints -----------------------------------------------------

@dataclass
class InterpretationReport:
    passed: bool
    depth: int
    terms_checked: int
    violation: dict | None = None

    def __bool__(self):
        return self.passed

    def as_dict(self) -> dict:
        return {"passed": self.passed, "depth": self.depth,
                "terms_checked": self.terms_checked, "violation": self.violation}


def _joint_terms(m1, m2, pairs, X, depth):
    """Terms over X up to ``depth``, one per joint value vector over all pairs
    (terms with equal vectors impose identical constraints)."""
    level = [Var(x) for x in X] + [sx.Op(k, ()) for k, a, _ in m1.ops if a == 0]
    seen: set = set()
    out: list[tuple[Term, tuple]] = []

    def vec(w):
        return tuple((eval_term(m1, w, mu), eval_term(m2, w, nu)) for mu, nu in pairs)

    def keep(w):
        v = vec(w)
        if v not in seen:
            seen.add(v)
            out.append((w, v))

    for w in level:
        keep(w)
    for _ in range(depth):
        current = [w for w, _ in out]
        for k, a, _ in m1.ops:
            if a == 0:
                continue
            for args in itertools.product(current, repeat=a):
                keep(sx.Op(k, args))
    return out


def interpretation_constraints(m1: FiniteModel, m2: FiniteModel, pairs: Sequence[tuple[Point, Point]],
                               depth: int = 3) -> InterpretationReport:
    """Check that matched points agree on term equalities and relation atoms.

    For each pair (mu, nu): w^mu == w'^mu iff w^nu == w'^nu for all terms up to
    ``depth``, and the term tuples land in f1(R) and f2(R) together. The first
    violation in enumeration order is reported.
    """
    _check_pair(m1, m2)
    pairs = list(pairs)
    if not pairs:
        return InterpretationReport(True, depth, 0)
    X = tuple(pairs[0][0].sort)
    for mu, nu in pairs:
        if tuple(mu.sort) != X or tuple(nu.sort) != X:
            raise ValueError("all matched points must share one sort")
    terms = _joint_terms(m1, m2, pairs, X, depth)
    for j in range(len(terms)):
        for i in range(j):
            (w1, v1), (w2, v2) = terms[i], terms[j]
            for p, ((a1, b1), (a2, b2)) in enumerate(zip(v1, v2)):
                if (a1 == a2) != (b1 == b2):
                    return InterpretationReport(False, depth, len(terms), {
                        "kind": "equality", "pair": p,
                        "terms": [sx.format_term(w1), sx.format_term(w2)],
                        "values": [[a1, a2], [b1, b2]]})
    for (name, arity, t1), (_, _, t2) in zip(m1.rels, m2.rels):
        for combo in itertools.product(range(len(terms)), repeat=arity):
            for p in range(len(pairs)):
                in1 = tuple(terms[c][1][p][0] for c in combo) in t1
                in2 = tuple(terms[c][1][p][1] for c in combo) in t2
                if in1 != in2:
                    return InterpretationReport(False, depth, len(terms), {
                        "kind": "relation", "pair": p, "relation": name,
                        "terms": [sx.format_term(terms[c][0]) for c in combo],
                        "holds": [in1, in2]})
    return InterpretationReport(True, depth, len(terms))
