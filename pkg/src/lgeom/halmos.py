"""The extended boolean algebra of subsets of Hom(W(X), H) and the valuation
of formulas into it.

A :class:`DefSet` is a subset of the point space H^X stored as a dense
boolean array indexed by the mixed-radix point index (first variable most
significant).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import syntax as sx
from .model import (CAPS, CapExceeded, FiniteModel, Point, _check_cap, point_at,
                    point_index, term_values)
from .syntax import (And, Equality, Exists, Forall, Formula, Not, Or, RelAtom, Term,
                     free_vars, term_vars)

__all__ = [
    "SortMismatch", "DefSet", "format_points", "empty", "full", "cylindrify", "constant_set", "val",
    "satisfies", "theory_contains", "AxiomResult", "HalmosReport", "check_halmos_axioms",
]


class SortMismatch(ValueError):
    pass


class DefSet:
    """A sort-tagged subset of the point space of a model."""

    __slots__ = ("sort", "model", "bits", "_h")

    def __init__(self, sort: Sequence[str], model: FiniteModel, bits):
        sort = tuple(sort)
        bits = np.asarray(bits, dtype=bool).reshape(-1)
        if bits.size != model.n ** len(sort):
            raise ValueError(f"expected {model.n ** len(sort)} slots, got {bits.size}")
        if bits.flags.writeable:
            bits = bits.copy()
            bits.setflags(write=False)
        self.sort = sort
        self.model = model
        self.bits = bits
        self._h = None

    # construction
    @classmethod
    def from_points(cls, sort, model, points: Iterable) -> "DefSet":
        sort = tuple(sort)
        _check_cap(sort, model)
        bits = np.zeros(model.n ** len(sort), dtype=bool)
        for p in points:
            vals = p.values if isinstance(p, Point) else (p,) if isinstance(p, int) else tuple(p)
            if len(vals) != len(sort) or any(not 0 <= v < model.n for v in vals):
                raise ValueError(f"{vals} is not a point of {sort}")
            bits[point_index(vals, model.n)] = True
        return cls(sort, model, bits)

    @classmethod
    def from_mask(cls, sort, model, mask: int) -> "DefSet":
        size = model.n ** len(sort)
        bits = np.array([(mask >> i) & 1 for i in range(size)], dtype=bool)
        return cls(sort, model, bits)

    # queries
    def __len__(self):
        return int(self.bits.sum())

    def __contains__(self, p) -> bool:
        vals = p.values if isinstance(p, Point) else (p,) if isinstance(p, int) else tuple(p)
        return bool(self.bits[point_index(vals, self.model.n)])

    def indices(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.bits)]

    def points(self) -> Iterator[Point]:
        for i in np.flatnonzero(self.bits):
            yield point_at(self.sort, self.model, int(i))

    def tuples(self) -> list[tuple[int, ...]]:
        return [p.values for p in self.points()]

    def is_empty(self) -> bool:
        return not self.bits.any()

    def is_full(self) -> bool:
        return bool(self.bits.all())

    @property
    def size(self) -> int:
        return self.bits.size

    def mask(self) -> int:
        out = 0
        for i in np.flatnonzero(self.bits):
            out |= 1 << int(i)
        return out

    # boolean algebra
    def _check(self, other: "DefSet"):
        if not isinstance(other, DefSet):
            raise TypeError(f"expected DefSet, got {type(other).__name__}")
        if self.sort != other.sort:
            raise SortMismatch(f"sorts differ: {self.sort} vs {other.sort}")
        if self.model is not other.model and self.model != other.model:
            raise SortMismatch("sets live over different models")

    def __or__(self, other):
        self._check(other)
        return DefSet(self.sort, self.model, self.bits | other.bits)

    def __and__(self, other):
        self._check(other)
        return DefSet(self.sort, self.model, self.bits & other.bits)

    def __sub__(self, other):
        self._check(other)
        return DefSet(self.sort, self.model, self.bits & ~other.bits)

    def __invert__(self):
        return DefSet(self.sort, self.model, ~self.bits)

    def complement(self):
        return ~self

    def __le__(self, other):
        self._check(other)
        return not (self.bits & ~other.bits).any()

    def __ge__(self, other):
        return other <= self

    def __lt__(self, other):
        return self <= other and self != other

    def __eq__(self, other):
        if not isinstance(other, DefSet):
            return NotImplemented
        return (self.sort == other.sort and (self.model is other.model or self.model == other.model)
                and np.array_equal(self.bits, other.bits))

    def __hash__(self):
        if self._h is None:
            self._h = hash((self.sort, self.model, self.bits.tobytes()))
        return self._h

    def cylindrify(self, x: str) -> "DefSet":
        return cylindrify(self, x)

    def __repr__(self):
        return f"DefSet({self.sort}, {format_points(self)})"

    __str__ = __repr__


def format_points(A: DefSet) -> str:
    """``{1,2}`` for one-variable sorts, ``{(0,1),(1,0)}`` otherwise."""
    if len(A.sort) == 1:
        return "{" + ",".join(str(p.values[0]) for p in A.points()) + "}"
    return "{" + ",".join(str(p) for p in A.points()) + "}"


def empty(sort, model) -> DefSet:
    _check_cap(sort, model)
    return DefSet(sort, model, np.zeros(model.n ** len(sort), dtype=bool))


def full(sort, model) -> DefSet:
    _check_cap(sort, model)
    return DefSet(sort, model, np.ones(model.n ** len(sort), dtype=bool))


def _smear(bits: np.ndarray, n: int, k: int, axis: int) -> np.ndarray:
    shaped = bits.reshape((n,) * k)
    out = np.broadcast_to(shaped.any(axis=axis, keepdims=True), shaped.shape)
    return out.reshape(-1)


def cylindrify(A: DefSet, x: str) -> DefSet:
    """exists x A: smear A along the x axis of the point space."""
    if x not in A.sort:
        raise SortMismatch(f"{x!r} is not in sort {A.sort}")
    return DefSet(A.sort, A.model, _smear(A.bits, A.model.n, len(A.sort), A.sort.index(x)))


def constant_set(rel: str, terms: Sequence[Term], X: Sequence[str], m: FiniteModel) -> DefSet:
    """[rel(w1..wk)]: the points whose term values satisfy rel; ``"=="`` is the diagonal."""
    X = tuple(X)
    _check_cap(X, m)
    return DefSet(X, m, _atom_bits(m, X, rel, tuple(terms)))


def _check_terms(m, X, terms):
    for w in terms:
        extra = term_vars(w) - set(X)
        if extra:
            raise SortMismatch(f"term {sx.format_term(w)} uses {sorted(extra)} outside sort {X}")
        _check_signature(m, w)


def _check_signature(m, w):
    if isinstance(w, sx.Op):
        a = m.sig.arity(w.name)
        if a is None:
            raise sx.SignatureError(f"unknown operation symbol {w.name!r}")
        if a != len(w.args):
            raise sx.SignatureError(f"{w.name} expects {a} argument(s), got {len(w.args)}")
        for arg in w.args:
            _check_signature(m, arg)


def _atom_bits(m, X, rel, terms):
    _check_terms(m, X, terms)
    if rel == sx.EQ:
        if len(terms) != 2:
            raise sx.SignatureError("equality takes two terms")
        return term_values(m, X, terms[0]) == term_values(m, X, terms[1])
    arity = m.rel_sig.arity(rel)
    if arity is None:
        raise sx.SignatureError(f"unknown relation symbol {rel!r}")
    if arity != len(terms):
        raise sx.SignatureError(f"{rel} expects {arity} argument(s), got {len(terms)}")
    rel_bits = _rel_array(m, rel)
    idx = np.zeros(m.n ** len(X), dtype=np.int64)
    for w in terms:
        idx = idx * m.n + term_values(m, X, w)
    return rel_bits[idx]


@lru_cache(maxsize=1024)
def _rel_array(m: FiniteModel, rel: str) -> np.ndarray:
    arity, tuples = m.rel(rel)
    arr = np.zeros(m.n ** arity, dtype=bool)
    for tp in tuples:
        arr[point_index(tp, m.n)] = True
    arr.setflags(write=False)
    return arr


def val(u: Formula, X: Sequence[str], m: FiniteModel) -> DefSet:
    """Val(u): the set of points of H^X satisfying u.

    Quantifiers over variables outside X are evaluated in the extended sort
    and projected back.
    """
    X = tuple(X)
    extra = free_vars(u) - set(X)
    if extra:
        raise SortMismatch(f"free variable(s) {sorted(extra)} outside sort {X}")
    _check_cap(X, m)
    return DefSet(X, m, _val_bits(m, X, u))


@lru_cache(maxsize=1 << 16)
def _val_bits(m: FiniteModel, X: tuple, u: Formula) -> np.ndarray:
    if isinstance(u, Equality):
        out = _atom_bits(m, X, sx.EQ, (u.left, u.right))
    elif isinstance(u, RelAtom):
        out = _atom_bits(m, X, u.rel, u.args)
    elif isinstance(u, Not):
        out = ~_val_bits(m, X, u.body)
    elif isinstance(u, And):
        out = _val_bits(m, X, u.left) & _val_bits(m, X, u.right)
    elif isinstance(u, Or):
        out = _val_bits(m, X, u.left) | _val_bits(m, X, u.right)
    elif isinstance(u, Forall):
        out = _val_bits(m, X, Not(Exists(u.var, Not(u.body))))
    elif isinstance(u, Exists):
        k = len(X)
        if u.var in X:
            out = _smear(_val_bits(m, X, u.body), m.n, k, X.index(u.var))
        else:
            ext = X + (u.var,)
            if m.n ** len(ext) > CAPS.points:
                raise CapExceeded(f"extended sort {ext} exceeds point cap {CAPS.points}")
            inner = _val_bits(m, ext, u.body)
            out = inner.reshape(m.n ** k, m.n).any(axis=1)
    else:
        raise TypeError(f"not a formula: {u!r}")
    out = np.ascontiguousarray(out)
    out.setflags(write=False)
    return out


def satisfies(m: FiniteModel, mu: Point, u: Formula) -> bool:
    """u in LKer(mu)."""
    return mu in val(u, mu.sort, m)


def theory_contains(u: Formula, X: Sequence[str], m: FiniteModel) -> bool:
    """u in Th^X(f): u holds at every point."""
    return val(u, X, m).is_full()


# -- axiom suite ----------------------------------------------------------------

@dataclass
class AxiomResult:
    name: str
    checked: int = 0
    failures: int = 0
    counterexample: str | None = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, ok: bool, detail):
        self.checked += 1
        if not ok:
            self.failures += 1
            if self.counterexample is None:
                self.counterexample = detail() if callable(detail) else str(detail)


@dataclass
class HalmosReport:
    model: str
    sort: tuple
    instances: int
    results: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def as_dict(self) -> dict:
        return {
            "model": self.model, "sort": list(self.sort), "instances": self.instances,
            "passed": self.passed,
            "axioms": {k: {"checked": r.checked, "failures": r.failures,
                           "counterexample": r.counterexample}
                       for k, r in sorted(self.results.items())},
        }


AXIOMS = (
    "exists_zero", "exists_extensive", "exists_meet", "exists_commute", "relational_constant",
    "s_boolean_hom", "s_composition", "s_quantifier_agree", "s_quantifier_rename", "s_atoms",
)


def _random_set(rng: random.Random, sort, m) -> DefSet:
    size = m.n ** len(sort)
    density = rng.choice((0.1, 0.3, 0.5, 0.7, 0.9))
    return DefSet(sort, m, np.array([rng.random() < density for _ in range(size)], dtype=bool))


def random_term(rng: random.Random, m: FiniteModel, variables: Sequence[str], depth: int) -> Term:
    ops = [(k, a) for k, a, _ in m.ops]
    leaves = [sx.Var(v) for v in variables] + [sx.Op(k, ()) for k, a in ops if a == 0]
    inner = [(k, a) for k, a in ops if a > 0]
    if depth <= 0 or not inner or (leaves and rng.random() < 0.35):
        if not leaves:
            raise ValueError("no leaves to build a term from")
        return rng.choice(leaves)
    k, a = rng.choice(inner)
    return sx.Op(k, tuple(random_term(rng, m, variables, depth - 1) for _ in range(a)))


def check_halmos_axioms(m: FiniteModel, X: Sequence[str], instances: int = 1000, seed: int = 0,
                        Y: Sequence[str] | None = None, Z: Sequence[str] | None = None,
                        term_depth: int = 2) -> HalmosReport:
    """Randomised check of the quantifier, constant and morphism axioms.

    Each instance draws subsets A, B of H^X, variables x, y of X and term
    morphisms s: W(Y) -> W(X), s2: W(Z) -> W(Y), and checks every axiom that
    applies. Any failure is an engine bug; the first counterexample is kept.
    """
    from .category import TermMorphism, preimage_set

    X = tuple(X)
    Y = tuple(Y) if Y is not None else tuple(f"{v}_y" for v in X) or ("u",)
    Z = tuple(Z) if Z is not None else tuple(f"{v}_z" for v in X) or ("v",)
    rng = random.Random(seed)
    rep = HalmosReport(str(m), X, instances, {k: AxiomResult(k) for k in AXIOMS})
    R = rep.results
    rel_syms = [(sx.EQ, 2)] + [(k, a) for k, a, _ in m.rels]

    def morphism(src, tgt):
        return TermMorphism(src, tgt, {y: random_term(rng, m, tgt, term_depth) for y in src})

    has_leaves = bool(X) or any(a == 0 for _, a, _ in m.ops)
    for _ in range(instances):
        A, B = _random_set(rng, X, m), _random_set(rng, X, m)
        if X:
            x, y = rng.choice(X), rng.choice(X)
            ex = cylindrify
            R["exists_zero"].record(ex(empty(X, m), x).is_empty(), lambda: f"x={x}")
            R["exists_extensive"].record(A <= ex(A, x), lambda: f"A={A} x={x}")
            lhs = ex(A & ex(B, x), x)
            rhs = ex(A, x) & ex(B, x)
            R["exists_meet"].record(lhs == rhs, lambda: f"A={A} B={B} x={x}")
            R["exists_commute"].record(ex(ex(A, x), y) == ex(ex(A, y), x),
                                       lambda: f"A={A} x={x} y={y}")
        if has_leaves:
            rel, arity = rng.choice(rel_syms)
            ws = tuple(random_term(rng, m, X, term_depth) for _ in range(arity))
            got = constant_set(rel, ws, X, m)
            want = _constant_set_by_points(rel, ws, X, m)
            R["relational_constant"].record(got == want, lambda: f"{rel}{tuple(map(str, ws))}")

        # morphism axioms; s: W(Y) -> W(X) acts as s_*: subsets of H^Y -> subsets of H^X
        if not (X or any(a == 0 for _, a, _ in m.ops)):
            continue
        s = morphism(Y, X)
        C, D = _random_set(rng, Y, m), _random_set(rng, Y, m)
        pc, pd = preimage_set(s, C, m), preimage_set(s, D, m)
        ok = (preimage_set(s, C | D, m) == pc | pd and preimage_set(s, C & D, m) == pc & pd
              and preimage_set(s, ~C, m) == ~pc)
        R["s_boolean_hom"].record(ok, lambda: f"s={s} C={C} D={D}")

        if Y:
            s2 = morphism(Z, Y)
            E = _random_set(rng, Z, m)
            lhs = preimage_set(s, preimage_set(s2, E, m), m)
            rhs = preimage_set(s.compose(s2), E, m)
            R["s_composition"].record(lhs == rhs, lambda: f"s1={s} s2={s2} E={E}")

            yv = rng.choice(Y)
            other = dict(s.images)
            other[yv] = random_term(rng, m, X, term_depth)
            t = TermMorphism(Y, X, other)
            R["s_quantifier_agree"].record(
                preimage_set(s, cylindrify(C, yv), m) == preimage_set(t, cylindrify(C, yv), m),
                lambda: f"s1={s} s2={t} y={yv} C={C}")

            if X:
                xv = rng.choice(X)
                imgs = {}
                for v in Y:
                    if v == yv:
                        imgs[v] = sx.Var(xv)
                    else:
                        rest = [w for w in X if w != xv]
                        if rest or any(a == 0 for _, a, _ in m.ops):
                            imgs[v] = random_term(rng, m, rest, term_depth)
                        else:
                            imgs = None
                            break
                if imgs is not None:
                    r = TermMorphism(Y, X, imgs)
                    lhs = preimage_set(r, cylindrify(C, yv), m)
                    rhs = cylindrify(preimage_set(r, C, m), xv)
                    R["s_quantifier_rename"].record(lhs == rhs, lambda: f"s={r} y={yv} C={C}")

            rel, arity = rng.choice(rel_syms)
            ws = tuple(random_term(rng, m, Y, term_depth) for _ in range(arity))
            lhs = preimage_set(s, constant_set(rel, ws, Y, m), m)
            rhs = constant_set(rel, tuple(s.apply(w) for w in ws), X, m)
            R["s_atoms"].record(lhs == rhs, lambda: f"s={s} atom={rel}{tuple(map(str, ws))}")
    return rep


def _constant_set_by_points(rel, terms, X, m) -> DefSet:
    from .model import eval_term, hom_space

    pts = []
    for mu in hom_space(X, m):
        vals = tuple(eval_term(m, w, mu) for w in terms)
        ok = vals[0] == vals[1] if rel == sx.EQ else m.holds(rel, vals)
        if ok:
            pts.append(mu)
    return DefSet.from_points(X, m, pts)
