"""The equational and logical Galois correspondences between formula sets and
point sets, their closure operators, and lattices of definable sets.

Closed filters and closed congruences are never materialised as formula
sets: each is represented by the closed point set it corresponds to, and
membership is decided on demand.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import syntax as sx
from .halmos import DefSet, SortMismatch, empty, format_points, full, val
from .model import (CAPS, CapExceeded, FiniteModel, automorphisms, coordinates,
                    generated_subalgebra, point_at, term_values)
from .syntax import Equality, Formula, Term, disj

__all__ = [
    "definable_set_of", "filter_contains", "FilterHandle", "CongruenceHandle",
    "orbit_labels", "logical_closure", "logical_closure_oracle", "OracleInfeasible",
    "formula_closure_contains", "algebraic_set_of", "congruence_contains",
    "algebraic_closure", "DefinableLattice", "definable_lattice", "defining_formula",
    "orbit_representatives",
]


class OracleInfeasible(RuntimeError):
    pass


# -- logical side -------------------------------------------------------------

def definable_set_of(T: Iterable[Formula], X: Sequence[str], m: FiniteModel) -> DefSet:
    """T^L: the points satisfying every formula of T (full space for T empty)."""
    out = full(X, m)
    for u in T:
        out = out & val(u, X, m)
    return out


def filter_contains(A: DefSet, u: Formula) -> bool:
    """u in A^L, i.e. A is contained in Val(u)."""
    return A <= val(u, A.sort, A.model)


def formula_closure_contains(T: Iterable[Formula], u: Formula, X: Sequence[str],
                             m: FiniteModel) -> bool:
    """u in T^LL."""
    return definable_set_of(T, X, m) <= val(u, X, m)


@dataclass(frozen=True)
class FilterHandle:
    """An H-closed filter A^L, represented by its closed point set A."""

    defset: DefSet

    def __post_init__(self):
        if logical_closure(self.defset) != self.defset:
            raise ValueError("filter representative must be a definable set")

    @classmethod
    def generated_by(cls, T: Iterable[Formula], X, m) -> "FilterHandle":
        """The closed filter T^LL."""
        return cls(definable_set_of(T, X, m))

    def __contains__(self, u: Formula) -> bool:
        return filter_contains(self.defset, u)

    contains = __contains__

    def __le__(self, other: "FilterHandle") -> bool:
        # filters are ordered opposite to their point sets
        return other.defset <= self.defset

    @property
    def sort(self):
        return self.defset.sort


@lru_cache(maxsize=512)
def _automorphism_index_perms(m: FiniteModel, X: tuple) -> np.ndarray:
    """Row g: the point index of g applied coordinatewise to each point."""
    coords = coordinates(X, m.n)
    group = automorphisms(m)
    size = m.n ** len(X)
    perms = np.empty((len(group), size), dtype=np.int64)
    for gi, g in enumerate(group):
        ga = np.asarray(g, dtype=np.int64)
        idx = np.zeros(size, dtype=np.int64)
        for c in coords:
            idx = idx * m.n + ga[c]
        perms[gi] = idx
    perms.setflags(write=False)
    return perms


@lru_cache(maxsize=512)
def orbit_labels(m: FiniteModel, X: tuple) -> np.ndarray:
    """For each point index, the least index in its automorphism orbit."""
    labels = _automorphism_index_perms(m, tuple(X)).min(axis=0)
    labels.setflags(write=False)
    return labels


def orbit_representatives(m: FiniteModel, X: Sequence[str]) -> list[int]:
    return sorted(set(int(v) for v in orbit_labels(m, tuple(X))))


def logical_closure(A: DefSet) -> DefSet:
    """A^LL, computed as the closure of A under the automorphism group.

    Over a finite model the parameter-free definable subsets of H^X are
    exactly the automorphism-invariant ones; see logical_closure_oracle for
    the definitional computation.
    """
    perms = _automorphism_index_perms(A.model, A.sort)
    bits = A.bits[perms].any(axis=0)
    return DefSet(A.sort, A.model, bits)


# -- rank-bounded oracle --------------------------------------------------------

def _atomic_code(m: FiniteModel, tup: tuple) -> tuple:
    """Canonical code of the atomic type of a tuple.

    The generated substructure is explored in a fixed order and each step
    records only label information, so two tuples (in any models of the
    signature) get equal codes iff they satisfy the same atomic formulas.
    """
    index: dict[int, int] = {}
    order: list[int] = []
    code: list[int] = []

    def see(v):
        if v in index:
            code.append(index[v])
        else:
            index[v] = len(order)
            order.append(v)
            code.append(-1)

    for v in tup:
        see(v)
    for k, a, t in m.ops:
        if a == 0:
            see(t[0])
    done = 0
    while done < len(order):
        frontier = len(order)
        snap = order[:frontier]
        for k, a, t in m.ops:
            if a == 0:
                continue
            for combo in itertools.product(range(frontier), repeat=a):
                if max(combo) < done:
                    continue
                see(m.apply(k, [snap[c] for c in combo]))
        done = frontier
    code.append(-2)
    for k, a, ts in m.rels:
        for combo in itertools.product(range(len(order)), repeat=a):
            code.append(int(tuple(order[c] for c in combo) in ts))
    return tuple(code)


@lru_cache(maxsize=128)
def _rank_type_classes(m: FiniteModel, X: tuple, k: int) -> np.ndarray:
    """Class id of the rank-k type of every point of H^X."""
    n = m.n
    L = len(X) + k
    if n ** L > 1 << 20:
        raise OracleInfeasible(f"oracle needs {n}^{L} tuples")
    code_ids: dict = {}

    def atomic_ids(length):
        out = np.empty(n ** length, dtype=np.int64)
        for i, tup in enumerate(itertools.product(range(n), repeat=length)):
            out[i] = code_ids.setdefault(_atomic_code(m, tup), len(code_ids))
        return out

    ids = atomic_ids(L)
    for length in range(L - 1, len(X) - 1, -1):
        base = atomic_ids(length)
        children = ids.reshape(n ** length, n)
        table: dict = {}
        nxt = np.empty(n ** length, dtype=np.int64)
        for i in range(n ** length):
            key = (int(base[i]), frozenset(int(c) for c in children[i]))
            nxt[i] = table.setdefault(key, len(table))
        ids = nxt
    return ids


def logical_closure_oracle(A: DefSet, k: int | None = None) -> DefSet:
    """Smallest set containing A that is defined by a formula of quantifier
    rank <= k: the union of the rank-k type classes that meet A.

    Independent of the automorphism machinery; feasible only for tiny models.
    The default rank is |H| + |X|.
    """
    m, X = A.model, A.sort
    if k is None:
        k = m.n + len(X)
    if k < 0:
        raise ValueError("rank must be non-negative")
    classes = _rank_type_classes(m, X, k)
    hit = np.unique(classes[A.bits])
    return DefSet(X, m, np.isin(classes, hit))


# -- equational side ------------------------------------------------------------

def algebraic_set_of(T: Iterable[Formula], X: Sequence[str], m: FiniteModel) -> DefSet:
    """T'_H for a set of equalities."""
    out = full(X, m)
    for u in T:
        if not isinstance(u, Equality):
            raise ValueError(f"not an equation: {sx.format_formula(u)}")
        out = out & val(u, X, m)
    return out


def congruence_contains(A: DefSet, w: Term, w2: Term) -> bool:
    """(w, w2) in A'_H: w and w2 agree at every point of A."""
    m, X = A.model, A.sort
    extra = (sx.term_vars(w) | sx.term_vars(w2)) - set(X)
    if extra:
        raise SortMismatch(f"term variables {sorted(extra)} outside sort {X}")
    diff = term_values(m, X, w) != term_values(m, X, w2)
    return not (diff & A.bits).any()


@lru_cache(maxsize=256)
def _clone(m: FiniteModel, X: tuple) -> np.ndarray:
    """All term functions H^X -> H as rows over the point space (the free
    algebra of Var(H) on X); raises CapExceeded when it is too large."""
    size = m.n ** len(X)
    seeds = [tuple(int(v) for v in c) for c in coordinates(X, m.n)]
    rows = generated_subalgebra(m, seeds, names=X, width=size).rows
    rows.setflags(write=False)
    return rows


def _determined_columns(F: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Columns mu of F whose value in each row is a function of the row's values on A."""
    if len(F) == 0:
        return np.ones(F.shape[1], dtype=bool)
    if A.any():
        _, first, gid = np.unique(F[:, A], axis=0, return_index=True, return_inverse=True)
        rep = F[first[gid.reshape(-1)]]
    else:
        rep = np.broadcast_to(F[0], F.shape)
    return (F == rep).all(axis=0)


def algebraic_closure(A: DefSet) -> DefSet:
    """A''_H: points mu whose kernel contains every pair identified on all of A.

    Equivalently, mu is in A'' iff every term function's value at mu is
    determined by its values on A. The term functions over X are generated
    once per sort; when there are too many, each point is instead tested by
    checking that adding it as a coordinate does not enlarge the subalgebra
    of H^A generated by the variables. For A empty the result is the set of
    points with full kernel.
    """
    m, X = A.model, A.sort
    try:
        F = _clone(m, X)
    except CapExceeded:
        return _algebraic_closure_pointwise(A)
    return DefSet(X, m, _determined_columns(F, A.bits))


def _algebraic_closure_pointwise(A: DefSet) -> DefSet:
    m, X = A.model, A.sort
    coords = coordinates(X, m.n)
    cols = np.flatnonzero(A.bits)

    # one extra coordinate can multiply the size by at most |H|
    cap = CAPS.subalgebra * m.n

    def size(idx):
        seeds = [tuple(int(v) for v in c[idx]) for c in coords]
        return len(generated_subalgebra(m, seeds, names=X, width=len(idx), cap=cap))

    base = size(cols)
    bits = A.bits.copy()
    for mu in np.flatnonzero(~A.bits):
        bits[mu] = size(np.append(cols, mu)) == base
    return DefSet(X, m, bits)


@dataclass(frozen=True)
class CongruenceHandle:
    """An H-closed congruence A'_H, represented by its algebraic set A."""

    defset: DefSet

    def __post_init__(self):
        if algebraic_closure(self.defset) != self.defset:
            raise ValueError("congruence representative must be an algebraic set")

    @classmethod
    def generated_by(cls, T, X, m) -> "CongruenceHandle":
        return cls(algebraic_set_of(T, X, m))

    def contains(self, w: Term, w2: Term) -> bool:
        return congruence_contains(self.defset, w, w2)


# -- lattices of definable sets ----------------------------------------------

@dataclass
class DefinableLattice:
    """All definable subsets of H^X, as unions of automorphism orbits.

    Element i is the union of the orbits whose bit is set in i, so inclusion,
    meet and join are bitwise on the index.
    """

    sort: tuple
    model: FiniteModel
    orbits: list            # each a sorted list of point indices
    _formulas: list | None = field(default=None, repr=False)

    def __len__(self):
        return 1 << len(self.orbits)

    def __iter__(self):
        return iter(range(len(self)))

    def element(self, i: int) -> DefSet:
        bits = np.zeros(self.model.n ** len(self.sort), dtype=bool)
        for j, orb in enumerate(self.orbits):
            if i >> j & 1:
                bits[orb] = True
        return DefSet(self.sort, self.model, bits)

    def elements(self) -> list[DefSet]:
        return [self.element(i) for i in self]

    def index_of(self, A: DefSet) -> int:
        if A.sort != self.sort:
            raise SortMismatch("sort mismatch")
        i = 0
        for j, orb in enumerate(self.orbits):
            inside = A.bits[orb]
            if inside.all():
                i |= 1 << j
            elif inside.any():
                raise ValueError("set is not a union of orbits (not definable)")
        return i

    @staticmethod
    def leq(i: int, j: int) -> bool:
        return i & ~j == 0

    @staticmethod
    def meet(i: int, j: int) -> int:
        return i & j

    @staticmethod
    def join(i: int, j: int) -> int:
        return i | j

    @property
    def bottom(self) -> int:
        return 0

    @property
    def top(self) -> int:
        return len(self) - 1

    def hasse(self) -> list[tuple[int, int]]:
        """Covering pairs (lower, upper)."""
        return [(i, i | 1 << j) for i in self for j in range(len(self.orbits)) if not i >> j & 1]

    def orbit_formulas(self) -> list[Formula]:
        """One formula per orbit defining exactly that orbit."""
        if self._formulas is None:
            from .ef import orbit_formula
            reps = [orb[0] for orb in self.orbits]
            tuples = [point_at(self.sort, self.model, r).values for r in reps]
            self._formulas = [orbit_formula(self.model, self.sort, t, tuples[:j] + tuples[j + 1:])
                              for j, t in enumerate(tuples)]
        return self._formulas

    def formula(self, i: int) -> Formula:
        """A formula defining element i (a disjunction of orbit formulas)."""
        fs = self.orbit_formulas()
        if i == self.top and len(self.orbits) > 1:
            return sx.TRUE if not self.sort else Equality(sx.Var(self.sort[0]), sx.Var(self.sort[0]))
        return disj(fs[j] for j in range(len(self.orbits)) if i >> j & 1)

    def as_dict(self, with_formulas: bool = True) -> dict:
        out = {
            "sort": list(self.sort),
            "model": str(self.model),
            "orbits": [[list(point_at(self.sort, self.model, p).values) for p in orb]
                       for orb in self.orbits],
            "size": len(self),
            "elements": [[list(p.values) for p in self.element(i).points()] for i in self],
            "hasse": [list(e) for e in self.hasse()],
        }
        if with_formulas:
            out["orbit_formulas"] = [sx.format_formula(f) for f in self.orbit_formulas()]
        return out


def definable_lattice(X: Sequence[str], m: FiniteModel, cap: int | None = None) -> DefinableLattice:
    X = tuple(X)
    cap = CAPS.lattice if cap is None else cap
    labels = orbit_labels(m, X)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    orbits = [groups[k] for k in sorted(groups)]
    if 1 << len(orbits) > cap:
        raise CapExceeded(f"{len(orbits)} orbits give 2^{len(orbits)} definable sets, cap {cap}")
    return DefinableLattice(X, m, orbits)


@lru_cache(maxsize=4096)
def _lattice(m, X):
    return definable_lattice(X, m)


def defining_formula(A: DefSet) -> Formula:
    """A formula whose value is A; A must be definable."""
    lat = _lattice(A.model, A.sort)
    return lat.formula(lat.index_of(A))
