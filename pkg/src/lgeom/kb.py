"""Knowledge bases over a finite model: per-sort content lattices (definable
sets), description lattices (closed filters, via the Galois bijection), the
contravariant map Ct between them, and isomorphism verdicts between two
knowledge bases.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial
from typing import Sequence

import numpy as np

from . import syntax as sx
from .category import image_closure, morphism_grid, preimage_set
from .galois import DefinableLattice, FilterHandle, definable_lattice, definable_set_of
from .halmos import DefSet, val
from .model import CapExceeded, FiniteModel, coordinates
from .syntax import Formula
from .types import isotypic

__all__ = [
    "KnowledgeBase", "KnowledgeTriple", "build_kb", "ct", "AntiReport", "check_anti",
    "KBVerdict", "kb_isomorphic", "FiniteLattice", "lattice_isomorphic",
]


@dataclass(frozen=True)
class KnowledgeTriple:
    """(X, T, A): a description T over X together with its content A = T^L."""

    sort: tuple
    formulas: tuple
    content: DefSet

    def as_dict(self) -> dict:
        return {"sort": list(self.sort), "T": [sx.format_formula(u) for u in self.formulas],
                "A": [list(p.values) for p in self.content.points()]}


@dataclass
class KnowledgeBase:
    model: FiniteModel
    sorts: list
    lattices: dict                      # sort -> DefinableLattice

    def content(self, X) -> DefinableLattice:
        X = tuple(X)
        if X not in self.lattices:
            raise KeyError(f"sort {X} is not materialised in this knowledge base")
        return self.lattices[X]

    def description(self, X, i: int) -> FilterHandle:
        """The closed filter A_i^L for content element i."""
        return FilterHandle(self.content(X).element(i))

    def description_formula(self, X, i: int) -> Formula:
        """A single formula generating the filter of element i."""
        return self.content(X).formula(i)

    def ct(self, T: Sequence[Formula], X) -> KnowledgeTriple:
        return ct(self, T, X)

    def as_dict(self, with_formulas: bool = True) -> dict:
        return {"model": str(self.model),
                "sorts": [{"sort": list(X), "content_size": len(self.lattices[X]),
                           "orbits": len(self.lattices[X].orbits),
                           "lattice": self.lattices[X].as_dict(with_formulas)}
                          for X in self.sorts]}


def build_kb(m: FiniteModel, sorts: Sequence[Sequence[str]]) -> KnowledgeBase:
    sorts = [sx.make_sort(X) for X in sorts]
    if len(set(sorts)) != len(sorts):
        raise ValueError("duplicate sort in the family")
    lattices = {}
    for X in sorts:
        try:
            lattices[X] = definable_lattice(X, m)
        except CapExceeded as exc:
            raise CapExceeded(f"sort ({','.join(X)}): {exc}") from None
    return KnowledgeBase(m, sorts, lattices)


def ct(kb: KnowledgeBase, T: Sequence[Formula], X) -> KnowledgeTriple:
    """Ct_f on a description: the triple (X, T, T^L)."""
    X = tuple(X)
    kb.content(X)
    T = tuple(T)
    for u in T:
        extra = sx.free_vars(u) - set(X)
        if extra:
            raise ValueError(f"{sx.format_formula(u)} has free variables {sorted(extra)} outside {X}")
    return KnowledgeTriple(X, T, definable_set_of(T, X, kb.model))


# -- the Galois anti-isomorphism between the two lattices of a sort -----------------

@dataclass
class AntiReport:
    sort: tuple
    elements: int
    defined: bool            # element formulas define their elements
    injective: bool          # distinct contents get distinct descriptions
    mutual_inverse: bool     # (A^L)^L == A and (T^L)^L == T on the lattice
    order_reversing: bool    # A <= B iff A^L >= B^L

    @property
    def passed(self) -> bool:
        return self.defined and self.injective and self.mutual_inverse and self.order_reversing

    def as_dict(self) -> dict:
        return {"sort": list(self.sort), "elements": self.elements, "defined": self.defined,
                "injective": self.injective, "mutual_inverse": self.mutual_inverse,
                "order_reversing": self.order_reversing, "passed": self.passed}


def _subset_matrix(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """S[i, j] = row i of P is contained in row j of Q (boolean rows)."""
    a = P.astype(np.float32)
    b = (~Q).astype(np.float32)
    return (a @ b.T) == 0


def check_anti(kb: KnowledgeBase, X) -> AntiReport:
    """Verify element by element that A |-> A^L and T |-> T^L are mutually
    inverse order-reversing bijections between the content lattice of X and
    its description lattice.

    A description is recorded by which element formulas phi_j it contains
    (phi_j is evaluated independently, not read off the lattice), so the
    filter side is a genuine formula-level object.
    """
    lat = kb.content(X)
    m = kb.model
    C = np.array([lat.element(i).bits for i in lat])
    V = np.array([val(lat.formula(j), lat.sort, m).bits for j in lat])
    defined = bool((C == V).all())
    D = _subset_matrix(C, V)                    # D[i, j]: phi_j in A_i^L
    # back to content: T^L for T = {phi_j : D[i, j]}
    C_back = ~((D.astype(np.float32) @ (~V).astype(np.float32)) > 0)
    D_back = _subset_matrix(C_back, V)
    injective = len({row.tobytes() for row in D}) == len(D)
    mutual = bool((C_back == C).all() and (D_back == D).all())
    sub_content = _subset_matrix(C, C)
    sub_desc = _subset_matrix(D, D)
    order_rev = bool((sub_content == sub_desc.T).all())
    return AntiReport(lat.sort, len(lat), defined, injective, mutual, order_rev)


# -- knowledge-base isomorphism ---------------------------------------------------

def _point_perm(alpha: Sequence[int], X: tuple, n: int) -> np.ndarray:
    """Index of alpha applied coordinatewise to each point index."""
    a = np.asarray(alpha, dtype=np.int64)
    idx = np.zeros(n ** len(X), dtype=np.int64)
    for c in coordinates(X, n):
        idx = idx * n + a[c]
    return idx


def _atom_map_from_iso(alpha, L1: DefinableLattice, L2: DefinableLattice) -> tuple:
    perm = _point_perm(alpha, L1.sort, L1.model.n)
    where = {}
    for j, orb in enumerate(L2.orbits):
        for p in orb:
            where[p] = j
    return tuple(where[int(perm[orb[0]])] for orb in L1.orbits)


def _apply_beta(atoms: tuple, L1: DefinableLattice, L2: DefinableLattice, A: DefSet) -> DefSet:
    i = L1.index_of(A)
    return L2.element(sum(1 << atoms[j] for j in range(len(atoms)) if i >> j & 1))


@dataclass
class KBVerdict:
    """Outcome of comparing two knowledge bases over the same sort family.

    ``kind`` is ISOMORPHIC (isotypic route, fully verified), ISOMORPHIC_AT_BOUNDS
    (direct route, morphism actions checked only on the sampled grid),
    NOT_ISOMORPHIC (a lattice invariant differs) or UNKNOWN.
    """

    kind: str
    route: str
    sorts: list
    sizes: dict = field(default_factory=dict)
    alpha: tuple | None = None
    beta: dict = field(default_factory=dict)
    obstruction: dict | None = None
    grid: dict = field(default_factory=dict)
    cells: int = 0
    note: str = ""

    def __bool__(self):
        return self.kind in ("ISOMORPHIC", "ISOMORPHIC_AT_BOUNDS")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind, "route": self.route,
            "sorts": [list(X) for X in self.sorts],
            "content_sizes": {",".join(X): list(v) for X, v in self.sizes.items()},
            "alpha": None if self.alpha is None else list(self.alpha),
            "beta": {",".join(X): list(v) for X, v in self.beta.items()},
            "obstruction": self.obstruction, "grid": self.grid, "cells_checked": self.cells,
            "note": self.note,
        }

    def describe(self) -> str:
        if self.kind == "ISOMORPHIC":
            return "ISOMORPHIC (isotypic route)"
        if self.kind == "ISOMORPHIC_AT_BOUNDS":
            return (f"ISOMORPHIC AT BOUNDS (direct route, {self.grid.get('morphisms', 0)}"
                    f" morphisms of depth <= {self.grid.get('depth')})")
        if self.kind == "NOT_ISOMORPHIC":
            ob = self.obstruction
            return (f"NOT ISOMORPHIC: content-lattice sizes differ at sort ({ob['sort']}):"
                    f" {ob['sizes'][0]} vs {ob['sizes'][1]}")
        return f"UNKNOWN at bounds: {self.note}"


def _grid(kb: KnowledgeBase, depth: int, limit: int):
    out = []
    for Y in kb.sorts:
        for X in kb.sorts:
            out.extend(morphism_grid(kb.model, Y, X, depth, limit))
    return out


def _cells_commute(kb1, kb2, atoms: dict, grid) -> tuple[bool, int, dict | None]:
    """Check beta against the morphism actions: preimages s_* and closed images
    s~_* must commute with beta on every lattice element."""
    cells = 0
    for s in grid:
        Y, X = s.source, s.target
        L1y, L2y, L1x, L2x = kb1.content(Y), kb2.content(Y), kb1.content(X), kb2.content(X)
        for i in L1y:
            B = L1y.element(i)
            left = _apply_beta(atoms[X], L1x, L2x, preimage_set(s, B))
            right = preimage_set(s, _apply_beta(atoms[Y], L1y, L2y, B))
            cells += 1
            if left != right:
                return False, cells, {"morphism": str(s), "action": "preimage", "element": i}
        for i in L1x:
            A = L1x.element(i)
            left = _apply_beta(atoms[Y], L1y, L2y, image_closure(s, A))
            right = image_closure(s, _apply_beta(atoms[X], L1x, L2x, A))
            cells += 1
            if left != right:
                return False, cells, {"morphism": str(s), "action": "image", "element": i}
    return True, cells, None


def kb_isomorphic(kb1: KnowledgeBase, kb2: KnowledgeBase, depth: int = 1, limit: int = 64,
                  max_candidates: int = 720) -> KBVerdict:
    """Decide whether KB(H1) and KB(H2) are isomorphic over their common sort family.

    Isotypic models give an isomorphism directly: beta sends each definable set
    to its image under the model isomorphism, and alpha sends the filter
    generated by a formula to the filter that formula generates in the second
    model; the square Ct2 . alpha == beta . Ct1 is checked on every element.
    Otherwise lattice invariants are compared, and if they agree the orbit
    bijections of every sort are searched for one compatible with the
    morphism actions on the depth-bounded grid (``limit`` morphisms per pair
    of sorts).
    """
    if not kb1.model.same_signature(kb2.model):
        raise sx.SignatureError("knowledge bases over different signatures")
    if list(kb1.sorts) != list(kb2.sorts):
        raise ValueError("knowledge bases materialise different sort families")
    sorts = list(kb1.sorts)
    sizes = {X: (len(kb1.content(X)), len(kb2.content(X))) for X in sorts}
    grid = _grid(kb1, depth, limit)
    grid_info = {"depth": depth, "limit_per_sort_pair": limit, "morphisms": len(grid)}

    iso = isotypic(kb1.model, kb2.model, sorts[0]) if sorts else None
    if iso is not None and iso.result:
        alpha = iso.isomorphism
        atoms, cells = {}, 0
        for X in sorts:
            L1, L2 = kb1.content(X), kb2.content(X)
            atoms[X] = _atom_map_from_iso(alpha, L1, L2)
            assert sorted(atoms[X]) == list(range(len(L2.orbits)))
            perm = _point_perm(alpha, X, kb1.model.n)
            for i in L1:
                A = L1.element(i)
                bits = np.zeros_like(A.bits)
                bits[perm[A.bits]] = True
                image = DefSet(X, kb2.model, bits)
                assert _apply_beta(atoms[X], L1, L2, A) == image
                # alpha on descriptions keeps the generating formula
                assert val(L1.formula(i), X, kb2.model) == image, "square fails"
                cells += 1
        ok, more, bad = _cells_commute(kb1, kb2, atoms, grid)
        assert ok, f"isomorphism-induced beta fails a morphism cell: {bad}"
        return KBVerdict("ISOMORPHIC", "isotypic", sorts, sizes, alpha, atoms,
                         grid=grid_info, cells=cells + more)

    for X in sorts:
        a, b = sizes[X]
        if a != b:
            return KBVerdict("NOT_ISOMORPHIC", "invariant", sorts, sizes,
                             obstruction={"sort": ",".join(X), "invariant": "content-lattice size",
                                          "sizes": [a, b]}, grid=grid_info)
    # content lattices are boolean, so equal size gives a lattice isomorphism;
    # search the atom bijections for one compatible with the morphism actions
    per_sort = [len(kb1.content(X).orbits) for X in sorts]
    total = 1
    for k in per_sort:
        total *= factorial(k)
    if total > max_candidates:
        return KBVerdict("UNKNOWN", "direct", sorts, sizes, grid=grid_info,
                         note=f"{total} atom bijections exceed the search bound {max_candidates}")
    cells = 0
    for choice in itertools.product(*(itertools.permutations(range(k)) for k in per_sort)):
        atoms = dict(zip(sorts, choice))
        ok, c, _ = _cells_commute(kb1, kb2, atoms, grid)
        cells += c
        if ok:
            return KBVerdict("ISOMORPHIC_AT_BOUNDS", "direct", sorts, sizes, beta=atoms,
                             grid=grid_info, cells=cells,
                             note="models are not isotypic; compatibility checked on the grid only")
    return KBVerdict("UNKNOWN", "direct", sorts, sizes, grid=grid_info, cells=cells,
                     note="no sort-preserving atom bijection commutes with the sampled morphisms")


# -- generic finite lattices ------------------------------------------------------

class FiniteLattice:
    """A finite lattice given by its order relation on 0..n-1."""

    def __init__(self, leq, labels: Sequence | None = None):
        self.leq = np.asarray(leq, dtype=bool)
        n = len(self.leq)
        if self.leq.shape != (n, n):
            raise ValueError("order relation must be square")
        self.labels = list(labels) if labels is not None else list(range(n))

    def __len__(self):
        return len(self.leq)

    @classmethod
    def from_definable(cls, L: DefinableLattice) -> "FiniteLattice":
        idx = np.arange(len(L))
        return cls((idx[:, None] & ~idx[None, :]) == 0, list(idx))

    @classmethod
    def chain(cls, n: int) -> "FiniteLattice":
        i = np.arange(n)
        return cls(i[:, None] <= i[None, :])

    @classmethod
    def boolean(cls, k: int, labels=None) -> "FiniteLattice":
        i = np.arange(1 << k)
        return cls((i[:, None] & ~i[None, :]) == 0, labels)

    def lower_covers(self, x: int) -> list[int]:
        below = [y for y in range(len(self)) if y != x and self.leq[y, x]]
        return [y for y in below if not any(z != y and self.leq[y, z] for z in below)]

    def join_irreducibles(self) -> list[int]:
        return [x for x in range(len(self)) if len(self.lower_covers(x)) == 1]

    def height(self, x: int) -> int:
        covers = self.lower_covers(x)
        return 0 if not covers else 1 + max(self.height(y) for y in covers)

    def join_of(self, xs) -> int:
        ups = np.ones(len(self), dtype=bool)
        for x in xs:
            ups &= self.leq[x]
        cand = np.flatnonzero(ups)
        for u in cand:
            if self.leq[u, cand].all():
                return int(u)
        raise ValueError("not a lattice: no least upper bound")


def lattice_isomorphic(L1: FiniteLattice, L2: FiniteLattice) -> list[int] | None:
    """An order isomorphism L1 -> L2 as a list of images, or None.

    Join-irreducibles are matched by backtracking (pruned by height and the
    number of join-irreducibles below); every element is the join of the
    join-irreducibles under it, which fixes the rest of the map.
    """
    n = len(L1)
    if n != len(L2):
        return None
    J1, J2 = L1.join_irreducibles(), L2.join_irreducibles()
    if len(J1) != len(J2):
        return None

    def inv(L, J, x):
        return (L.height(x), sum(1 for j in J if L.leq[j, x]), sum(1 for j in J if L.leq[x, j]))

    key1 = {j: inv(L1, J1, j) for j in J1}
    key2 = {j: inv(L2, J2, j) for j in J2}
    if sorted(key1.values()) != sorted(key2.values()):
        return None
    order = sorted(J1, key=lambda j: key1[j])
    bottom2 = L2.join_of([])

    def extend(assign: dict) -> list[int] | None:
        f = [0] * n
        for x in range(n):
            below = [assign[j] for j in J1 if L1.leq[j, x]]
            f[x] = L2.join_of(below) if below else bottom2
        if sorted(f) != list(range(n)):
            return None
        fa = np.asarray(f)
        if (L1.leq != L2.leq[np.ix_(fa, fa)]).any():
            return None
        return f

    def go(k: int, assign: dict, used: set):
        if k == len(order):
            return extend(assign)
        j = order[k]
        for t in J2:
            if t in used or key2[t] != key1[j]:
                continue
            if any(L1.leq[a, j] != L2.leq[assign[a], t] or L1.leq[j, a] != L2.leq[t, assign[a]]
                   for a in assign):
                continue
            assign[j] = t
            used.add(t)
            res = go(k + 1, assign, used)
            if res is not None:
                return res
            del assign[j]
            used.discard(t)
        return None

    return go(0, {}, set())
