"""Finite models (H, Psi, f), point spaces, kernels and automorphisms."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .syntax import AlgSignature, Op, RelSignature, Term, Var, term_vars

__all__ = [
    "Caps", "CAPS", "CapExceeded", "ModelError", "FiniteModel", "Point",
    "load_model", "model_from_dict", "model_to_dict", "eval_term", "hom_space",
    "point_count", "point_index", "point_at", "kernel_contains", "term_values",
    "coordinates", "isomorphisms", "find_isomorphism", "automorphisms",
    "is_isomorphism", "Subalgebra", "generated_subalgebra", "relabel",
]


class ModelError(ValueError):
    """Invalid model document; the message starts with the offending path."""


class CapExceeded(RuntimeError):
    pass


@dataclass
class Caps:
    """Size limits for the exhaustive machinery (mutable, process-wide)."""

    carrier: int = 16
    points: int = 1 << 24
    subalgebra: int = 4096
    lattice: int = 1 << 16


CAPS = Caps()


@dataclass(frozen=True)
class FiniteModel:
    """A finite algebra with interpreted relation symbols.

    ``ops`` maps each operation name to ``(arity, table)`` where the table is
    the flat row-major list of results; ``rels`` maps each relation name to
    ``(arity, frozenset of tuples)``.
    """

    n: int
    ops: tuple = ()
    rels: tuple = ()
    name: str = field(default="", compare=False)
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ops = tuple(sorted((k, int(a), tuple(int(v) for v in t)) for k, a, t in self.ops))
        rels = tuple(sorted((k, int(a), frozenset(tuple(int(v) for v in tp) for tp in ts))
                            for k, a, ts in self.rels))
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "rels", rels)
        object.__setattr__(self, "_h", hash((self.n, ops, rels)))
        _validate(self)

    def __hash__(self):
        return self._h

    @classmethod
    def build(cls, n: int, ops: Mapping[str, tuple[int, Sequence[int]]] = None,
              rels: Mapping[str, tuple[int, Iterable[Sequence[int]]]] = None, name: str = ""):
        ops = ops or {}
        rels = rels or {}
        return cls(n, tuple((k, a, tuple(t)) for k, (a, t) in ops.items()),
                   tuple((k, a, [tuple(x) for x in ts]) for k, (a, ts) in rels.items()), name)

    @property
    def sig(self) -> AlgSignature:
        return AlgSignature(tuple((k, a) for k, a, _ in self.ops))

    @property
    def rel_sig(self) -> RelSignature:
        return RelSignature(tuple((k, a) for k, a, _ in self.rels))

    def same_signature(self, other: "FiniteModel") -> bool:
        return self.sig == other.sig and self.rel_sig == other.rel_sig

    def op(self, name: str) -> tuple[int, tuple[int, ...]]:
        for k, a, t in self.ops:
            if k == name:
                return a, t
        raise KeyError(name)

    def rel(self, name: str) -> tuple[int, frozenset]:
        for k, a, ts in self.rels:
            if k == name:
                return a, ts
        raise KeyError(name)

    def apply(self, name: str, args: Sequence[int]) -> int:
        arity, table = self.op(name)
        idx = 0
        for a in args:
            idx = idx * self.n + a
        return table[idx]

    def holds(self, rel: str, args: Sequence[int]) -> bool:
        return tuple(args) in self.rel(rel)[1]

    @property
    def elements(self) -> range:
        return range(self.n)

    def __str__(self):
        return self.name or f"model(n={self.n})"


def _validate(m: FiniteModel) -> None:
    if not isinstance(m.n, int) or m.n < 1:
        raise ModelError(f"carrier: expected a positive integer, got {m.n!r}")
    seen = set()
    for name, arity, table in m.ops:
        if name in seen:
            raise ModelError(f"ops.{name}: duplicate symbol")
        seen.add(name)
        if arity < 0:
            raise ModelError(f"ops.{name}.arity: negative")
        if len(table) != m.n ** arity:
            raise ModelError(f"ops.{name}.table: expected {m.n ** arity} entries, got {len(table)}")
        for i, v in enumerate(table):
            if not 0 <= v < m.n:
                raise ModelError(f"ops.{name}.table[{i}]: value {v} outside carrier")
    for name, arity, tuples in m.rels:
        if name in seen:
            raise ModelError(f"rels.{name}: name clashes with another symbol")
        seen.add(name)
        if arity < 1:
            raise ModelError(f"rels.{name}.arity: must be >= 1")
        for tp in sorted(tuples):
            if len(tp) != arity:
                raise ModelError(f"rels.{name}.tuples: {list(tp)} has length {len(tp)}, expected {arity}")
            for v in tp:
                if not 0 <= v < m.n:
                    raise ModelError(f"rels.{name}.tuples: {list(tp)} has value {v} outside carrier")


# -- loading ------------------------------------------------------------------

def model_from_dict(doc: Mapping, name: str = "") -> FiniteModel:
    if not isinstance(doc, Mapping):
        raise ModelError("$: expected an object")
    if "carrier" not in doc:
        raise ModelError("carrier: missing")
    n = doc["carrier"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ModelError(f"carrier: expected a positive integer, got {n!r}")
    ops = {}
    for k, spec in (doc.get("ops") or {}).items():
        if not isinstance(spec, Mapping) or "arity" not in spec or "table" not in spec:
            raise ModelError(f"ops.{k}: expected {{arity, table}}")
        a, t = spec["arity"], spec["table"]
        if not isinstance(a, int) or isinstance(a, bool):
            raise ModelError(f"ops.{k}.arity: expected an integer")
        if not isinstance(t, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in t):
            raise ModelError(f"ops.{k}.table: expected a flat list of integers")
        ops[k] = (a, t)
    rels = {}
    for k, spec in (doc.get("rels") or {}).items():
        if not isinstance(spec, Mapping) or "arity" not in spec or "tuples" not in spec:
            raise ModelError(f"rels.{k}: expected {{arity, tuples}}")
        a, ts = spec["arity"], spec["tuples"]
        if not isinstance(a, int) or isinstance(a, bool):
            raise ModelError(f"rels.{k}.arity: expected an integer")
        if not isinstance(ts, list) or not all(isinstance(tp, list) for tp in ts):
            raise ModelError(f"rels.{k}.tuples: expected a list of arrays")
        for i, tp in enumerate(ts):
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in tp):
                raise ModelError(f"rels.{k}.tuples[{i}]: expected integers")
        rels[k] = (a, ts)
    if n > CAPS.carrier:
        raise CapExceeded(f"carrier {n} exceeds cap {CAPS.carrier}")
    return FiniteModel.build(n, ops, rels, name=name or str(doc.get("name", "")))


def load_model(path: str | Path) -> FiniteModel:
    path = Path(path)
    with path.open() as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelError(f"$: invalid JSON ({e})") from None
    return model_from_dict(doc, name=path.stem)


def model_to_dict(m: FiniteModel) -> dict:
    return {
        "carrier": m.n,
        "ops": {k: {"arity": a, "table": list(t)} for k, a, t in m.ops},
        "rels": {k: {"arity": a, "tuples": [list(tp) for tp in sorted(ts)]} for k, a, ts in m.rels},
    }


def relabel(m: FiniteModel, perm: Sequence[int], name: str = "") -> FiniteModel:
    """The isomorphic copy of m obtained by renaming element a to perm[a]."""
    n = m.n
    inv = [0] * n
    for a, b in enumerate(perm):
        inv[b] = a
    ops = {}
    for k, arity, table in m.ops:
        new = []
        for args in itertools.product(range(n), repeat=arity):
            src = [inv[b] for b in args]
            new.append(perm[m.apply(k, src)])
        ops[k] = (arity, new)
    rels = {k: (a, [tuple(perm[v] for v in tp) for tp in ts]) for k, a, ts in m.rels}
    return FiniteModel.build(n, ops, rels, name=name)


# -- points -------------------------------------------------------------------

@dataclass(frozen=True)
class Point:
    """An assignment of carrier elements to the variables of a sort."""

    sort: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "sort", tuple(self.sort))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.sort) != len(self.values):
            raise ValueError("point is not total on its sort")

    def __getitem__(self, var: str) -> int:
        return self.values[self.sort.index(var)]

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.sort, self.values))

    def __str__(self):
        return "(" + ",".join(str(v) for v in self.values) + ")"


def point_count(X: Sequence[str], m: FiniteModel) -> int:
    return m.n ** len(X)


def _check_cap(X, m, cap=None):
    cap = CAPS.points if cap is None else cap
    total = point_count(X, m)
    if total > cap:
        raise CapExceeded(f"|H^X| = {m.n}^{len(X)} = {total} exceeds cap {cap}")
    return total


def hom_space(X: Sequence[str], m: FiniteModel, cap: int | None = None) -> Iterator[Point]:
    """All points of Hom(W(X), H) in lexicographic coordinate order."""
    _check_cap(X, m, cap)
    X = tuple(X)
    for vals in itertools.product(range(m.n), repeat=len(X)):
        yield Point(X, vals)


def point_index(values: Sequence[int], n: int) -> int:
    idx = 0
    for v in values:
        idx = idx * n + v
    return idx


def point_at(X: Sequence[str], m: FiniteModel, idx: int) -> Point:
    vals = []
    for _ in X:
        idx, r = divmod(idx, m.n)
        vals.append(r)
    return Point(tuple(X), tuple(reversed(vals)))


def eval_term(m: FiniteModel, w: Term, mu) -> int:
    """w^mu: evaluate a term at a point (or any variable->element mapping)."""
    env = mu.as_dict() if isinstance(mu, Point) else mu
    return _eval(m, w, env)


def _eval(m, w, env):
    if isinstance(w, Var):
        try:
            return env[w.name]
        except KeyError:
            raise KeyError(f"unbound variable {w.name!r}") from None
    return m.apply(w.name, [_eval(m, a, env) for a in w.args])


def kernel_contains(m: FiniteModel, mu: Point, w: Term, w2: Term) -> bool:
    """(w, w2) in Ker(mu)."""
    return eval_term(m, w, mu) == eval_term(m, w2, mu)


# -- vectorised evaluation over a whole point space ---------------------------

@lru_cache(maxsize=256)
def coordinates(X: tuple, n: int) -> tuple:
    """Per-variable coordinate arrays over the point space n^|X|."""
    k = len(X)
    total = n ** k
    idx = np.arange(total, dtype=np.int64)
    out = []
    for i in range(k):
        c = (idx // (n ** (k - 1 - i))) % n
        c.setflags(write=False)
        out.append(c)
    return tuple(out)


@lru_cache(maxsize=8192)
def _op_array(m: FiniteModel, name: str) -> np.ndarray:
    arr = np.asarray(m.op(name)[1], dtype=np.int64)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=65536)
def term_values(m: FiniteModel, X: tuple, w: Term) -> np.ndarray:
    """The term function of w on H^X, as an array indexed by point index."""
    if isinstance(w, Var):
        if w.name not in X:
            raise KeyError(f"unbound variable {w.name!r} (sort {X})")
        return coordinates(X, m.n)[X.index(w.name)]
    table = _op_array(m, w.name)
    if not w.args:
        out = np.full(m.n ** len(X), table[0], dtype=np.int64)
    else:
        idx = np.zeros(m.n ** len(X), dtype=np.int64)
        for a in w.args:
            idx = idx * m.n + term_values(m, X, a)
        out = table[idx]
    out.setflags(write=False)
    return out


# -- isomorphisms and automorphisms -------------------------------------------

def _element_invariants(m: FiniteModel) -> list[tuple]:
    """Isomorphism-invariant fingerprints of elements (used only for pruning)."""
    n = m.n
    inv = [[] for _ in range(n)]
    for name, arity, table in m.ops:
        counts = [0] * n
        for v in table:
            counts[v] += 1
        fixed = [0] * n
        if arity >= 1:
            for a in range(n):
                fixed[a] = int(m.apply(name, [a] * arity) == a)
        for a in range(n):
            inv[a].append((counts[a], fixed[a]))
    for name, arity, tuples in m.rels:
        for a in range(n):
            per_pos = tuple(sum(1 for tp in tuples if tp[i] == a) for i in range(arity))
            inv[a].append(per_pos)
    return [tuple(x) for x in inv]


class _IsoSearch:
    """Backtracking over partial bijections H1 -> H2 with propagation through
    the operation tables and checks against the relation tables."""

    def __init__(self, m1: FiniteModel, m2: FiniteModel):
        self.m1, self.m2 = m1, m2
        self.n = m1.n
        self.inv1 = _element_invariants(m1)
        self.inv2 = _element_invariants(m2)
        self.entries = []
        for name, arity, table in m1.ops:
            for i, args in enumerate(itertools.product(range(self.n), repeat=arity)):
                self.entries.append((name, args, table[i]))
        order = sorted(range(self.n), key=lambda a: (sum(1 for inv in self.inv1 if inv == self.inv1[a]), a))
        self.order = order

    def search(self, seed: Mapping[int, int]) -> Iterator[tuple[int, ...]]:
        if self.m1.n != self.m2.n or not self.m1.same_signature(self.m2):
            return
        fwd = [-1] * self.n
        bwd = [-1] * self.n
        trail: list[int] = []
        for a, b in sorted(seed.items()):
            if not self._assign(a, b, fwd, bwd, trail):
                return
        if not self._propagate(fwd, bwd, trail):
            return
        yield from self._branch(fwd, bwd)

    def _assign(self, a, b, fwd, bwd, trail) -> bool:
        if fwd[a] != -1:
            return fwd[a] == b
        if bwd[b] != -1 or self.inv1[a] != self.inv2[b]:
            return False
        fwd[a] = b
        bwd[b] = a
        trail.append(a)
        return True

    def _propagate(self, fwd, bwd, trail) -> bool:
        m2 = self.m2
        changed = True
        while changed:
            changed = False
            for name, args, res in self.entries:
                if any(fwd[a] == -1 for a in args):
                    continue
                img = m2.apply(name, [fwd[a] for a in args])
                if fwd[res] == -1:
                    if not self._assign(res, img, fwd, bwd, trail):
                        return False
                    changed = True
                elif fwd[res] != img:
                    return False
        return self._relations_ok(fwd, bwd)

    def _relations_ok(self, fwd, bwd) -> bool:
        for (name, _, t1), (_, _, t2) in zip(self.m1.rels, self.m2.rels):
            for tp in t1:
                if all(fwd[a] != -1 for a in tp) and tuple(fwd[a] for a in tp) not in t2:
                    return False
            for tp in t2:
                if all(bwd[b] != -1 for b in tp) and tuple(bwd[b] for b in tp) not in t1:
                    return False
        return True

    def _branch(self, fwd, bwd):
        a = next((x for x in self.order if fwd[x] == -1), None)
        if a is None:
            yield tuple(fwd)
            return
        for b in range(self.n):
            if bwd[b] != -1:
                continue
            trail: list[int] = []
            if self._assign(a, b, fwd, bwd, trail) and self._propagate(fwd, bwd, trail):
                yield from self._branch(fwd, bwd)
            for x in trail:
                bwd[fwd[x]] = -1
                fwd[x] = -1


def isomorphisms(m1: FiniteModel, m2: FiniteModel, seed: Mapping[int, int] | None = None
                 ) -> Iterator[tuple[int, ...]]:
    """All isomorphisms m1 -> m2 (as image tuples) extending the partial map seed."""
    return _IsoSearch(m1, m2).search(seed or {})


def find_isomorphism(m1, m2, seed=None) -> tuple[int, ...] | None:
    return next(isomorphisms(m1, m2, seed), None)


def is_isomorphism(m1: FiniteModel, m2: FiniteModel, alpha: Sequence[int]) -> bool:
    """Exhaustive check of a claimed isomorphism."""
    n = m1.n
    if m2.n != n or sorted(alpha) != list(range(n)) or not m1.same_signature(m2):
        return False
    for name, arity, table in m1.ops:
        for i, args in enumerate(itertools.product(range(n), repeat=arity)):
            if alpha[table[i]] != m2.apply(name, [alpha[a] for a in args]):
                return False
    for (name, _, t1), (_, _, t2) in zip(m1.rels, m2.rels):
        if {tuple(alpha[a] for a in tp) for tp in t1} != set(t2):
            return False
    return True


@lru_cache(maxsize=256)
def automorphisms(m: FiniteModel) -> tuple[tuple[int, ...], ...]:
    """The full automorphism group, sorted; verified to be a group."""
    group = tuple(sorted(isomorphisms(m, m)))
    gs = set(group)
    for g in group:
        inv = [0] * m.n
        for a, b in enumerate(g):
            inv[b] = a
        assert tuple(inv) in gs, "automorphism set not closed under inverse"
        for h in group:
            assert tuple(g[h[a]] for a in range(m.n)) in gs, "not closed under composition"
    return group


# -- generated subalgebras of powers ------------------------------------------

@dataclass
class Subalgebra:
    """Subalgebra of H^A: rows are elements (tuples over the index set A)."""

    rows: np.ndarray            # shape (size, |A|)
    witnesses: list             # one Term per row
    seeds: list                 # row index of each seed

    def __len__(self):
        return len(self.witnesses)

    def elements(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in r) for r in self.rows]


def _row_keys(block: np.ndarray) -> list[bytes]:
    block = np.ascontiguousarray(block, dtype=np.int64)
    return [r.tobytes() for r in block]


def generated_subalgebra(m: FiniteModel, seeds: Sequence[Sequence[int]], names: Sequence[str] = None,
                         width: int | None = None, cap: int | None = None) -> Subalgebra:
    """Close the seed tuples of H^A under coordinatewise operations.

    ``names`` gives the variable witnessing each seed (default x1, x2, ...).
    Every element is paired with one witness term that evaluates to it.
    Each round applies every operation to all argument tuples that involve
    at least one element found in the previous round, with the last argument
    vectorised.
    """
    cap = CAPS.subalgebra if cap is None else cap
    seeds = [tuple(int(v) for v in s) for s in seeds]
    if width is None:
        if not seeds:
            raise ValueError("width is required when there are no seeds")
        width = len(seeds[0])
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(len(seeds))]
    index: dict[bytes, int] = {}
    rows: list[np.ndarray] = []
    wit: list = []

    def add(row: np.ndarray, key: bytes, term) -> int:
        r = index.get(key)
        if r is not None:
            return r
        if len(rows) >= cap:
            raise CapExceeded(f"generated subalgebra exceeds {cap} elements")
        index[key] = len(rows)
        rows.append(row)
        wit.append(term)
        return index[key]

    seed_rows = []
    for s, nm in zip(seeds, names):
        if len(s) != width:
            raise ValueError("seed tuples must share one index set")
        row = np.asarray(s, dtype=np.int64)
        seed_rows.append(add(row, row.tobytes(), Var(nm)))
    tables = sorted((name, arity, np.asarray(table, dtype=np.int64)) for name, arity, table in m.ops)
    for name, arity, table in tables:
        if arity == 0:
            row = np.full(width, table[0], dtype=np.int64)
            add(row, row.tobytes(), Op(name, ()))
    done = 0
    while done < len(rows):
        frontier = len(rows)
        cur = np.asarray(rows, dtype=np.int64).reshape(frontier, width)
        for name, arity, table in tables:
            if arity == 0:
                continue
            for prefix in itertools.product(range(frontier), repeat=arity - 1):
                # the tuple must involve a new element somewhere
                lo = 0 if any(c >= done for c in prefix) else done
                if lo >= frontier:
                    continue
                idx = np.zeros(width, dtype=np.int64)
                for c in prefix:
                    idx = idx * m.n + cur[c]
                block = table[idx[None, :] * m.n + cur[lo:frontier]]
                for off, (row, key) in enumerate(zip(block, _row_keys(block))):
                    if key not in index:
                        args = tuple(wit[c] for c in prefix) + (wit[lo + off],)
                        add(row, key, Op(name, args))
        done = frontier
    arr = np.asarray(rows, dtype=np.int64).reshape(len(rows), width)
    return Subalgebra(arr, wit, seed_rows)


def term_support_ok(w: Term, X: Sequence[str]) -> bool:
    return term_vars(w) <= set(X)
