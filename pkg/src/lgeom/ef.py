"""Ehrenfeucht-Fraisse games between pointed finite models, and the
separating formulas extracted from Spoiler's winning strategies.

A game position is the partial map generated by the pebbles: the pebbled
pairs closed under the operations of both models. Positions are compared
by that closed map, so two pebble sequences generating the same partial
isomorphism share one memo entry.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from . import syntax as sx
from .model import FiniteModel
from .syntax import Equality, Exists, Forall, Formula, Not, Op, RelAtom, Var, conj, disj

__all__ = ["Closure", "joint_closure", "EFGame", "ef_equiv", "separating_formula",
           "orbit_formula", "minimal_conjunction"]


@dataclass
class Closure:
    """Result of closing pebbled pairs under the operations.

    ``pairs`` is the generated partial map as a frozenset of (a, b), or None
    when the pebbles disagree on some atomic formula; ``conflict`` is then an
    atom that is true on exactly one side, and ``left_true`` says which.
    """

    pairs: frozenset | None
    conflict: Formula | None = None
    left_true: bool = False
    terms: dict | None = None

    @property
    def ok(self) -> bool:
        return self.pairs is not None

    def separator(self) -> Formula:
        """The conflict atom oriented to hold on the left only."""
        return self.conflict if self.left_true else Not(self.conflict)


def joint_closure(m1: FiniteModel, m2: FiniteModel, left: Sequence[int], right: Sequence[int],
                  names: Sequence[str] | None = None) -> Closure:
    """Close the pebbled pairs under all operations and check the relations.

    Elements are discovered breadth-first (generators, constants, then rounds
    of operation applications in symbol order), so the first conflict found
    involves terms of minimal depth.
    """
    fwd: dict[int, tuple[int, object]] = {}
    bwd: dict[int, tuple[int, object]] = {}
    elems: list[tuple[int, int, object]] = []
    want_terms = names is not None
    names = list(names) if want_terms else [None] * len(left)

    def add(a, b, t):
        if a in fwd:
            b0, t0 = fwd[a]
            if b0 != b:
                return Closure(None, Equality(t0, t) if want_terms else None, True)
            return None
        if b in bwd:
            _, t0 = bwd[b]
            return Closure(None, Equality(t0, t) if want_terms else None, False)
        fwd[a] = (b, t)
        bwd[b] = (a, t)
        elems.append((a, b, t))
        return None

    for a, b, nm in zip(left, right, names):
        bad = add(a, b, Var(nm) if want_terms else None)
        if bad:
            return bad
    # relation atoms on the variables alone come before anything involving constants
    bad = _relation_conflict(m1, m2, elems, want_terms)
    if bad:
        return bad
    ops = [(k, a, t) for k, a, t in m1.ops]
    for k, arity, table in ops:
        if arity == 0:
            bad = add(table[0], m2.apply(k, ()), Op(k, ()) if want_terms else None)
            if bad:
                return bad
    done = 0
    while done < len(elems):
        frontier = len(elems)
        snapshot = elems[:frontier]
        for k, arity, table in ops:
            if arity == 0:
                continue
            for combo in itertools.product(range(frontier), repeat=arity):
                if max(combo) < done:
                    continue
                args1 = [snapshot[c][0] for c in combo]
                args2 = [snapshot[c][1] for c in combo]
                t = Op(k, tuple(snapshot[c][2] for c in combo)) if want_terms else None
                bad = add(m1.apply(k, args1), m2.apply(k, args2), t)
                if bad:
                    return bad
        done = frontier
    bad = _relation_conflict(m1, m2, elems, want_terms)
    if bad:
        return bad
    terms = {a: t for a, (_, t) in fwd.items()} if want_terms else None
    return Closure(frozenset((a, b) for a, (b, _) in fwd.items()), terms=terms)


def _relation_conflict(m1, m2, elems, want_terms) -> Closure | None:
    for (k, arity, t1), (_, _, t2) in zip(m1.rels, m2.rels):
        for combo in itertools.product(range(len(elems)), repeat=arity):
            in1 = tuple(elems[c][0] for c in combo) in t1
            in2 = tuple(elems[c][1] for c in combo) in t2
            if in1 != in2:
                atom = RelAtom(k, tuple(elems[c][2] for c in combo)) if want_terms else None
                return Closure(None, atom, in1)
    return None


class EFGame:
    """Memoised EF games between two models of one signature."""

    def __init__(self, m1: FiniteModel, m2: FiniteModel):
        if not m1.same_signature(m2):
            raise ValueError("models have different signatures")
        self.m1, self.m2 = m1, m2
        self._memo: dict = {}
        self._ext: dict = {}

    # -- game values over closed partial maps --------------------------------------

    def start(self, left: Sequence[int], right: Sequence[int]) -> frozenset | None:
        return joint_closure(self.m1, self.m2, left, right).pairs

    def _extend(self, state: frozenset, a: int, b: int):
        key = (state, a, b)
        if key not in self._ext:
            pairs = sorted(state)
            res = joint_closure(self.m1, self.m2, [p[0] for p in pairs] + [a],
                                [p[1] for p in pairs] + [b])
            self._ext[key] = res.pairs
        return self._ext[key]

    def _horizon(self, state: frozenset) -> int:
        # Rounds beyond this cannot help Spoiler: each useful move adds a new
        # element on both sides.
        return max(self.m1.n - len(state), self.m2.n - len(state))

    def wins(self, state: frozenset | None, k: int) -> bool:
        """Duplicator wins the k-round game from a closed position."""
        if state is None:
            return False
        k = min(k, self._horizon(state))
        if k <= 0:
            return True
        key = (state, k)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        result = self._spoiler_move(state, k) is None
        self._memo[key] = result
        return result

    def _spoiler_move(self, state: frozenset, k: int):
        """A winning Spoiler move ("L", a) or ("R", b), or None."""
        dom = {p[0] for p in state}
        rng = {p[1] for p in state}
        free1 = [a for a in range(self.m1.n) if a not in dom]
        free2 = [b for b in range(self.m2.n) if b not in rng]
        for a in free1:
            if not any(self.wins(self._extend(state, a, b), k - 1) for b in free2):
                return ("L", a)
        for b in free2:
            if not any(self.wins(self._extend(state, a, b), k - 1) for a in free1):
                return ("R", b)
        return None

    def equivalent(self, left: Sequence[int], right: Sequence[int], k: int) -> bool:
        return self.wins(self.start(left, right), k)

    def min_rank(self, left: Sequence[int], right: Sequence[int], kmax: int) -> int | None:
        """Least k <= kmax at which Spoiler wins, or None."""
        state = self.start(left, right)
        if state is None:
            return 0
        for k in range(1, kmax + 1):
            if not self.wins(state, k):
                return k
        return None

    # -- formula extraction ---------------------------------------------------------

    def separate(self, left: Sequence[int], right: Sequence[int], names: Sequence[str],
                 kmax: int) -> Formula | None:
        """A formula of minimal rank (<= kmax) true at left and false at right."""
        k = self.min_rank(left, right, kmax)
        if k is None:
            return None
        return self._separate(tuple(left), tuple(right), tuple(names), k)

    def _fresh(self, names):
        i = len(names) + 1
        while f"z{i}" in names:
            i += 1
        return f"z{i}"

    def _separate(self, left, right, names, k) -> Formula:
        clo = joint_closure(self.m1, self.m2, left, right, names)
        if not clo.ok:
            return clo.separator()
        state = clo.pairs
        move = self._spoiler_move(state, min(k, self._horizon(state)))
        assert move is not None, "no Spoiler win at the requested rank"
        z = self._fresh(names)
        names2 = names + (z,)
        if move[0] == "L":
            a = move[1]
            parts = []
            for b in range(self.m2.n):
                sub = self._child(left + (a,), right + (b,), names2, k - 1)
                if sub not in parts:
                    parts.append(sub)
            return Exists(z, conj(parts))
        b = move[1]
        parts = []
        for a in range(self.m1.n):
            sub = self._child(left + (a,), right + (b,), names2, k - 1)
            if sub not in parts:
                parts.append(sub)
        return Forall(z, disj(parts))

    def _child(self, left, right, names, k):
        r = self.min_rank(left, right, k)
        assert r is not None
        return self._separate(left, right, names, r)


@lru_cache(maxsize=256)
def _game(m1: FiniteModel, m2: FiniteModel) -> EFGame:
    return EFGame(m1, m2)


def ef_equiv(m1: FiniteModel, left: Sequence[int], m2: FiniteModel, right: Sequence[int],
             k: int) -> bool:
    """Duplicator wins the k-round game with the given tuples pebbled."""
    return _game(m1, m2).equivalent(tuple(left), tuple(right), k)


def separating_formula(m1: FiniteModel, left: Sequence[int], m2: FiniteModel,
                       right: Sequence[int], names: Sequence[str], kmax: int | None = None
                       ) -> Formula | None:
    """A formula over ``names`` true at left in m1 and false at right in m2,
    of least quantifier rank, or None when no rank up to kmax separates."""
    if kmax is None:
        kmax = m1.n + m2.n + len(names)
    return _game(m1, m2).separate(tuple(left), tuple(right), tuple(names), kmax)


def minimal_conjunction(parts: list[Formula], rejects) -> Formula:
    """Shrink a conjunction while ``rejects(formula)`` stays true.

    Tries each part alone first, then greedy removal in order.
    """
    for p in parts:
        if rejects(p):
            return p
    keep = list(parts)
    i = 0
    while i < len(keep) and len(keep) > 1:
        trial = keep[:i] + keep[i + 1:]
        if rejects(conj(trial)):
            keep = trial
        else:
            i += 1
    return conj(keep)


def orbit_formula(m: FiniteModel, X: Sequence[str], rep: Sequence[int],
                  others: Sequence[Sequence[int]]) -> Formula:
    """A formula over X satisfied by ``rep`` and by none of ``others``
    (representatives of the other automorphism orbits of H^X)."""
    parts = []
    for o in others:
        f = separating_formula(m, rep, m, o, X)
        if f is None:
            raise ValueError(f"points {tuple(rep)} and {tuple(o)} are not separable")
        if f not in parts:
            parts.append(f)
    if not parts:
        return Equality(Var(X[0]), Var(X[0])) if X else sx.TRUE
    return conj(parts)
