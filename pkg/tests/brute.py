"""Independent brute-force reference computations used to freeze and
cross-check engine values. Nothing here imports the engine's evaluators: models
are read straight from the corpus JSON and formulas are walked by hand."""

import itertools
import json
from importlib import resources


def load(name):
    doc = json.loads(resources.files("lgeom").joinpath("corpus", f"{name}.json").read_text())
    n = doc["carrier"]
    ops = {}
    for k, spec in doc.get("ops", {}).items():
        a, t = spec["arity"], spec["table"]
        ops[k] = (a, {args: t[i] for i, args in enumerate(itertools.product(range(n), repeat=a))})
    rels = {k: (spec["arity"], {tuple(tp) for tp in spec["tuples"]})
            for k, spec in doc.get("rels", {}).items()}
    return n, ops, rels


def term(model, w, env):
    n, ops, _ = model
    kind = type(w).__name__
    if kind == "Var":
        return env[w.name]
    a, table = ops[w.name]
    return table[tuple(term(model, x, env) for x in w.args)]


def holds(model, u, env):
    n, ops, rels = model
    kind = type(u).__name__
    if kind == "Equality":
        return term(model, u.left, env) == term(model, u.right, env)
    if kind == "RelAtom":
        return tuple(term(model, x, env) for x in u.args) in rels[u.rel][1]
    if kind == "Not":
        return not holds(model, u.body, env)
    if kind == "And":
        return holds(model, u.left, env) and holds(model, u.right, env)
    if kind == "Or":
        return holds(model, u.left, env) or holds(model, u.right, env)
    if kind == "Exists":
        return any(holds(model, u.body, {**env, u.var: a}) for a in range(n))
    if kind == "Forall":
        return all(holds(model, u.body, {**env, u.var: a}) for a in range(n))
    raise TypeError(kind)


def points(model, X):
    return list(itertools.product(range(model[0]), repeat=len(X)))


def value(model, u, X):
    return {p for p in points(model, X) if holds(model, u, dict(zip(X, p)))}


def is_auto(model, g):
    n, ops, rels = model
    for a, table in ops.values():
        for args, r in table.items():
            if table[tuple(g[x] for x in args)] != g[r]:
                return False
    for a, ts in rels.values():
        if {tuple(g[x] for x in tp) for tp in ts} != ts:
            return False
    return True


def is_iso(m1, m2, g):
    if m1[0] != m2[0]:
        return False
    for k, (a, table) in m1[1].items():
        t2 = m2[1][k][1]
        for args, r in table.items():
            if t2[tuple(g[x] for x in args)] != g[r]:
                return False
    for k, (a, ts) in m1[2].items():
        if {tuple(g[x] for x in tp) for tp in ts} != m2[2][k][1]:
            return False
    return True


def automorphisms(model):
    return [g for g in itertools.permutations(range(model[0])) if is_auto(model, g)]


def isomorphic(m1, m2):
    return m1[0] == m2[0] and any(is_iso(m1, m2, g) for g in itertools.permutations(range(m1[0])))


def orbits(model, X):
    group = automorphisms(model)
    seen, out = set(), []
    for p in points(model, X):
        if p in seen:
            continue
        orb = {tuple(g[v] for v in p) for g in group}
        seen |= orb
        out.append(sorted(orb))
    return out


def orbit_closure(model, X, A):
    return {q for orb in orbits(model, X) if set(orb) & set(A) for q in orb}


def term_functions(model, X):
    """All term functions H^X -> H as value tuples over points(X)."""
    n, ops, _ = model
    pts = points(model, X)
    funcs = {tuple(p[i] for p in pts) for i in range(len(X))}
    for a, table in ops.values():
        if a == 0:
            funcs.add(tuple(table[()] for _ in pts))
    while True:
        new = set()
        cur = list(funcs)
        for a, table in ops.values():
            if a == 0:
                continue
            for args in itertools.product(cur, repeat=a):
                new.add(tuple(table[tuple(f[i] for f in args)] for i in range(len(pts))))
        if new <= funcs:
            return pts, funcs
        funcs |= new


def algebraic_closure(model, X, A):
    pts, funcs = term_functions(model, X)
    idx = {p: i for i, p in enumerate(pts)}
    A = [idx[p] for p in A]
    funcs = sorted(funcs)
    out = set()
    for p in pts:
        i = idx[p]
        if all(f[i] == g[i] for f in funcs for g in funcs if all(f[j] == g[j] for j in A)):
            out.add(p)
    return out
