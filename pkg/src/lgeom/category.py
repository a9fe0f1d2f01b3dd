"""Sort morphisms and the actions they induce on formulas, points and sets.

Direction table (the one convention to keep straight):

=====================  ===========================================  ==========
action                 maps                                          variance
=====================  ===========================================  ==========
``s``                  W(Y) -> W(X), y |-> term over X               --
``pushforward``        Phi(Y) -> Phi(X), substitution                covariant
``pullback_point``     H^X -> H^Y, mu |-> mu s                       contra
``preimage_set``       subsets of H^Y -> subsets of H^X              covariant
``image_closure``      definable sets over X -> definable over Y     contra
``filter_transport``   closed filters over Y -> closed filters / X   covariant
=====================  ===========================================  ==========

A :class:`TermMorphism` stores ``source`` = Y and ``target`` = X.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from . import syntax as sx
from .halmos import DefSet, SortMismatch, val
from .model import FiniteModel, Point, term_values
from .syntax import Formula, Term, Var, free_vars, substitute, substitute_term, term_vars

__all__ = [
    "TermMorphism", "parse_morphism", "pullback_point", "preimage_set", "point_image",
    "pushforward_formula", "check_diagram1", "is_s_closed", "image_closure",
    "filter_transport", "Diagram2Report", "check_diagram2", "terms_up_to_depth",
    "morphism_grid", "formula_grid",
]


@dataclass(frozen=True)
class TermMorphism:
    """s: W(Y) -> W(X) given by the image s(y), a term over X, of each y in Y."""

    source: tuple
    target: tuple
    images: Mapping[str, Term] = field(hash=False)

    def __post_init__(self):
        src, tgt = tuple(self.source), tuple(self.target)
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)
        imgs = dict(self.images)
        if set(imgs) != set(src):
            raise ValueError(f"images must cover exactly the source sort {src}")
        for y, w in imgs.items():
            extra = term_vars(w) - set(tgt)
            if extra:
                raise ValueError(f"s({y}) = {sx.format_term(w)} uses {sorted(extra)} outside {tgt}")
        object.__setattr__(self, "images", {y: imgs[y] for y in src})

    def __hash__(self):
        return hash((self.source, self.target, tuple(self.images[y] for y in self.source)))

    def __eq__(self, other):
        return (isinstance(other, TermMorphism) and self.source == other.source
                and self.target == other.target and self.images == other.images)

    @classmethod
    def identity(cls, X: Sequence[str]) -> "TermMorphism":
        X = tuple(X)
        return cls(X, X, {x: Var(x) for x in X})

    def __getitem__(self, y: str) -> Term:
        return self.images[y]

    def apply(self, w: Term) -> Term:
        """s(w) for a term w over the source sort."""
        return substitute_term(self.images, w)

    def compose(self, inner: "TermMorphism") -> "TermMorphism":
        """``self . inner``: for inner: W(Z) -> W(Y) and self: W(Y) -> W(X),
        the morphism W(Z) -> W(X), z |-> self(inner(z))."""
        if inner.target != self.source:
            raise SortMismatch(f"cannot compose: {inner.target} != {self.source}")
        return TermMorphism(inner.source, self.target,
                            {z: self.apply(w) for z, w in inner.images.items()})

    def __str__(self):
        body = "; ".join(f"{y} := {sx.format_term(w)}" for y, w in self.images.items())
        return f"[{','.join(self.target)}] {body}" if body else f"[{','.join(self.target)}]"


def parse_morphism(text: str, target: Sequence[str], sig: sx.AlgSignature,
                   source: Sequence[str] | None = None) -> TermMorphism:
    """``"y := mul(x,x); z := e"`` with terms over ``target``."""
    imgs = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":=" not in part:
            raise sx.ParseError("expected 'var := term'", text.find(part), text)
        lhs, rhs = part.split(":=", 1)
        y = lhs.strip()
        sx.make_sort([y])
        if y in imgs:
            raise ValueError(f"{y} assigned twice")
        imgs[y] = sx.parse_term(rhs.strip(), sig)
    src = tuple(source) if source is not None else tuple(imgs)
    return TermMorphism(src, tuple(target), imgs)


def _check_model_sort(s, m):
    for w in s.images.values():
        from .halmos import _check_signature
        _check_signature(m, w)


def pullback_point(s: TermMorphism, mu: Point, m: FiniteModel) -> Point:
    """mu s: the point of H^Y with nu(y) = s(y)^mu."""
    if tuple(mu.sort) != s.target:
        raise SortMismatch(f"point sort {mu.sort} is not the target {s.target}")
    from .model import eval_term
    env = mu.as_dict()
    return Point(s.source, tuple(eval_term(m, s.images[y], env) for y in s.source))


def _pullback_indices(s: TermMorphism, m: FiniteModel) -> np.ndarray:
    """For each point index over X, the index of its pullback over Y."""
    _check_model_sort(s, m)
    idx = np.zeros(m.n ** len(s.target), dtype=np.int64)
    for y in s.source:
        idx = idx * m.n + term_values(m, s.target, s.images[y])
    return idx


def preimage_set(s: TermMorphism, B: DefSet, m: FiniteModel | None = None) -> DefSet:
    """s_* B: all mu over X with mu s in B."""
    m = B.model if m is None else m
    if B.sort != s.source:
        raise SortMismatch(f"set sort {B.sort} is not the source {s.source}")
    return DefSet(s.target, m, B.bits[_pullback_indices(s, m)])


def point_image(s: TermMorphism, A: DefSet) -> DefSet:
    """The plain image {mu s : mu in A} (not closed)."""
    if A.sort != s.target:
        raise SortMismatch(f"set sort {A.sort} is not the target {s.target}")
    m = A.model
    idx = _pullback_indices(s, m)
    bits = np.zeros(m.n ** len(s.source), dtype=bool)
    bits[idx[A.bits]] = True
    return DefSet(s.source, m, bits)


def pushforward_formula(s: TermMorphism, v: Formula) -> Formula:
    """s_* v: capture-avoiding substitution of s into v."""
    extra = free_vars(v) - set(s.source)
    if extra:
        raise SortMismatch(f"free variable(s) {sorted(extra)} of v outside source {s.source}")
    return substitute(s.images, v)


def check_diagram1(s: TermMorphism, v: Formula, m: FiniteModel) -> bool:
    """Val(s_* v) == s_*(Val(v)) over the target sort."""
    return val(pushforward_formula(s, v), s.target, m) == preimage_set(s, val(v, s.source, m), m)


def is_s_closed(A: DefSet, s: TermMorphism) -> bool:
    """Whether s_*(s~ A) == A."""
    return preimage_set(s, point_image(s, A)) == A


def image_closure(s: TermMorphism, A: DefSet, closure: Callable[[DefSet], DefSet] | None = None
                  ) -> DefSet:
    """s~_* A = (s~ A)^LL; pass ``closure=algebraic_closure`` for the regular-map
    (algebraic-set) variant."""
    from .galois import logical_closure
    closure = logical_closure if closure is None else closure
    return closure(point_image(s, A))


def filter_transport(s: TermMorphism, T2, m: FiniteModel | None = None):
    """The closed filter (s_* T2)^LL over X for a closed filter T2 over Y."""
    from .galois import FilterHandle, logical_closure
    B = T2.defset
    return FilterHandle(logical_closure(preimage_set(s, B, m)))


@dataclass
class Diagram2Report:
    morphism: str
    B0: DefSet
    A0: DefSet
    B: DefSet
    T2: object
    T1: object
    A: DefSet
    generator: Formula
    A_from_formulas: DefSet

    @property
    def a0_equals_a(self) -> bool:
        return self.A0 == self.A and self.A0 == self.A_from_formulas

    @property
    def b_within_b0(self) -> bool:
        return self.B <= self.B0

    @property
    def passed(self) -> bool:
        return self.a0_equals_a and self.b_within_b0

    def as_dict(self) -> dict:
        from .halmos import format_points
        return {
            "morphism": self.morphism,
            "B0": format_points(self.B0), "A0": format_points(self.A0),
            "B": format_points(self.B), "A": format_points(self.A),
            "T2_generator": sx.format_formula(self.generator),
            "A0_equals_A": self.a0_equals_a, "B_within_B0": self.b_within_b0,
            "passed": self.passed,
        }


def check_diagram2(s: TermMorphism, B0: DefSet, generator: Formula | None = None) -> Diagram2Report:
    """Run the square T2 -> T1 / B <- A for a definable B0 over the source sort.

    A0 = s~^-1 B0, B = (s~ A0)^LL, T2 = B^L, T1 = (s_* T2)^LL, A = T1^L. The
    filter side is also computed syntactically: T2 is generated by one formula
    defining B, whose pushforward must define A.
    """
    from .galois import FilterHandle, defining_formula, logical_closure

    m = B0.model
    if logical_closure(B0) != B0:
        raise ValueError("B0 is not definable; take its logical closure first")
    A0 = preimage_set(s, B0)
    B = image_closure(s, A0)
    T2 = FilterHandle(B)
    T1 = filter_transport(s, T2)
    A = T1.defset
    gen = defining_formula(B) if generator is None else generator
    if val(gen, B.sort, m) != B:
        raise ValueError("generator does not define B")
    A_syn = val(pushforward_formula(s, gen), s.target, m)
    return Diagram2Report(str(s), B0, A0, B, T2, T1, A, gen, A_syn)


# -- enumeration grids -------------------------------------------------------------

def terms_up_to_depth(m: FiniteModel, X: Sequence[str], depth: int, semantic: bool = True
                      ) -> list[Term]:
    """Terms over X of depth <= depth in breadth-first order.

    With ``semantic`` the list keeps one representative per term function on
    H^X, i.e. one term per element of W(X) when the variety is Var(H).
    """
    X = tuple(X)
    level = [Var(x) for x in X] + [sx.Op(k, ()) for k, a, _ in m.ops if a == 0]
    seen: dict[bytes, Term] = {}
    out: list[Term] = []

    def keep(w):
        if not semantic:
            out.append(w)
            return True
        key = term_values(m, X, w).tobytes()
        if key in seen:
            return False
        seen[key] = w
        out.append(w)
        return True

    for w in level:
        keep(w)
    for _ in range(depth):
        current = list(out)
        for k, a, _ in m.ops:
            if a == 0:
                continue
            for args in itertools.product(current, repeat=a):
                w = sx.Op(k, args)
                if w in out:
                    continue
                keep(w)
    return out


def morphism_grid(m: FiniteModel, source: Sequence[str], target: Sequence[str], depth: int = 2,
                  limit: int | None = None) -> Iterator[TermMorphism]:
    """All morphisms W(source) -> W(target) whose images are depth-bounded
    term representatives, in a fixed order (optionally truncated)."""
    source, target = tuple(source), tuple(target)
    terms = terms_up_to_depth(m, target, depth)
    for count, imgs in enumerate(itertools.product(terms, repeat=len(source))):
        if limit is not None and count >= limit:
            return
        yield TermMorphism(source, target, dict(zip(source, imgs)))


def _grid_atoms(m: FiniteModel, scope: tuple, depth: int) -> list[Formula]:
    terms = terms_up_to_depth(m, scope, depth)
    atoms: list[Formula] = []
    for v in scope:
        for w in terms:
            if w != Var(v):
                atoms.append(sx.Equality(Var(v), w))
    shallow = terms_up_to_depth(m, scope, min(depth, 1))
    for name, arity, _ in m.rels:
        for args in itertools.product(shallow, repeat=arity):
            atoms.append(sx.RelAtom(name, args))
    return atoms


def formula_grid(m: FiniteModel, Y: Sequence[str], rank: int = 2, depth: int = 2,
                 bound: Sequence[str] = ("x", "y", "z")) -> list[Formula]:
    """A fixed finite family of formulas over Y for exhaustive checks.

    Atoms are ``v == w`` (v a variable in scope, w one representative per term
    function of depth <= ``depth``) and relation atoms on depth-1 terms. The
    family holds the atoms over Y, their negations, conjunctions and
    disjunctions of neighbouring atoms, and up to ``rank`` nested quantifiers
    over variables from ``bound`` wrapped around atoms that mention every
    quantified variable. At rank 2 the atoms are restricted to depth 1. Bound
    variables may coincide with variables of Y, so substitution has to rename.
    """
    Y = tuple(Y)
    base = _grid_atoms(m, Y, depth)
    out: list[Formula] = list(base)
    out += [sx.Not(a) for a in base]
    out += [sx.And(a, b) for a, b in zip(base, base[1:])]
    out += [sx.Or(a, b) for a, b in zip(base, base[1:])]
    quants = (sx.Exists, sx.Forall)
    if rank >= 1:
        for v in bound:
            scope = tuple(dict.fromkeys(Y + (v,)))
            for a in _grid_atoms(m, scope, depth):
                if v not in sx.free_vars(a):
                    continue
                out += [q(v, a) for q in quants]
    if rank >= 2:
        for v in bound:
            for w in bound:
                scope = tuple(dict.fromkeys(Y + (v, w)))
                for a in _grid_atoms(m, scope, 1):
                    fv = sx.free_vars(a)
                    if w not in fv or (v != w and v not in fv):
                        continue
                    out += [q1(v, q2(w, a)) for q1 in quants for q2 in quants]
    seen: set = set()
    uniq = []
    for u in out:
        if u not in seen:
            seen.add(u)
            uniq.append(u)
    return uniq
