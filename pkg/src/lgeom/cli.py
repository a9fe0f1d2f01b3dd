"""Command-line front end.

Exit codes: 0 success, 1 negative verdict or failed check, 2 usage or parse
error, 3 cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from . import syntax as sx
from .category import check_diagram1, check_diagram2, formula_grid, morphism_grid
from .corpus import CORPUS, resolve_model
from .galois import (algebraic_closure, algebraic_set_of, definable_set_of, logical_closure)
from .halmos import DefSet, check_halmos_axioms, format_points, val
from .kb import build_kb, check_anti, kb_isomorphic
from .model import CAPS, CapExceeded, FiniteModel, ModelError
from .types import isotypic, lg_equivalent

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3
SUITES = ("halmos", "diagrams", "anti", "all")
POOL = ("x", "y", "z", "w")


class UsageError(Exception):
    pass


@dataclass
class Session:
    models: dict = field(default_factory=dict)
    json: bool = False

    def model(self, ref: str) -> FiniteModel:
        if ref not in self.models:
            try:
                self.models[ref] = resolve_model(ref)
            except (KeyError, OSError) as exc:
                raise UsageError(str(exc).strip("'\"")) from None
        return self.models[ref]


def _sorts(args, default=(("x",),)) -> list[tuple]:
    if getattr(args, "sweep", None):
        return [POOL[:k] for k in range(1, args.sweep + 1)]
    if not args.X:
        return [tuple(X) for X in default]
    try:
        return [sx.parse_sort(X) for X in args.X]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _one_sort(args) -> tuple:
    sorts = _sorts(args)
    if len(sorts) != 1:
        raise UsageError("this command takes exactly one -X sort")
    return sorts[0]


def _points_line(A: DefSet) -> str:
    total = A.model.n ** len(A.sort)
    return f"{len(A)}/{total} points: " + " ".join(str(p) for p in A.points())


def _emit(session: Session, doc: dict, lines: list[str]):
    if session.json:
        print(json.dumps(doc, sort_keys=True, indent=1))
    else:
        for line in lines:
            print(line)


# -- commands -----------------------------------------------------------------------

def cmd_eval(session: Session, args) -> int:
    m = session.model(args.model)
    X = _one_sort(args)
    u = sx.parse_formula(args.formula, m.sig, m.rel_sig)
    A = val(u, X, m)
    line = _points_line(A) if A.is_full() else " ".join(str(p) for p in A.points()) or "(none)"
    _emit(session, {"model": str(m), "sort": list(X), "formula": sx.format_formula(u),
                    "points": [list(p.values) for p in A.points()], "size": len(A)}, [line])
    return EXIT_OK


def _parse_points(texts, X, m) -> DefSet:
    pts = []
    for text in texts:
        for chunk in text.split(";"):
            chunk = chunk.strip().strip("()")
            if not chunk:
                continue
            try:
                vals = tuple(int(v) for v in chunk.split(","))
            except ValueError:
                raise UsageError(f"bad point {chunk!r}: expected comma-separated integers") from None
            if len(vals) != len(X) or not all(0 <= v < m.n for v in vals):
                raise UsageError(f"point {chunk!r} is not in H^({','.join(X)}) for carrier {m.n}")
            pts.append(vals)
    return DefSet.from_points(X, m, pts)


def cmd_closure(session: Session, args) -> int:
    m = session.model(args.model)
    X = _one_sort(args)
    notes = []
    if args.formulas is not None or args.points is None:
        # no input at all is read as the empty formula set
        T = [sx.parse_formula(t, m.sig, m.rel_sig) for t in args.formulas or () if t.strip()]
        if not T:
            notes.append("empty formula set: its set of points is the whole space")
        if args.mode == "algebraic":
            try:
                A = algebraic_set_of(T, X, m)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            what = "T'"
        else:
            A = definable_set_of(T, X, m)
            what = "T^L"
        source = {"formulas": [sx.format_formula(t) for t in T]}
    else:
        A0 = _parse_points(args.points or [], X, m)
        if A0.is_empty():
            if args.mode == "algebraic":
                notes.append("empty point set: A'' is the set of points whose kernel is everything")
            else:
                notes.append("empty point set: the empty set is already closed")
        A = algebraic_closure(A0) if args.mode == "algebraic" else logical_closure(A0)
        what = "A''" if args.mode == "algebraic" else "A^LL"
        source = {"points": [list(p.values) for p in A0.points()]}
    doc = {"model": str(m), "sort": list(X), "mode": args.mode, "closure": what,
           "result": [list(p.values) for p in A.points()], "notes": notes, **source}
    _emit(session, doc, [format_points(A)] + [f"note: {n}" for n in notes])
    return EXIT_OK


def cmd_compare(session: Session, args) -> int:
    m1, m2 = session.model(args.model1), session.model(args.model2)
    if not m1.same_signature(m2):
        raise UsageError(f"models {m1} and {m2} have different signatures")
    sorts = _sorts(args)
    docs, lines, code = [], [], EXIT_OK
    for X in sorts:
        iso = isotypic(m1, m2, X)
        eq = lg_equivalent(m1, m2, X, rank=args.rank, depth=args.depth)
        agree = eq.result is None or eq.result == iso.result
        prefix = f"({','.join(X)}) " if len(sorts) > 1 else ""
        lines.append(prefix + iso.describe())
        lines.append(prefix + eq.describe())
        if not agree:
            lines.append(prefix + "ENGINE BUG: isotypic and LG-equivalence verdicts disagree")
        if not iso.result or not agree:
            code = EXIT_NEGATIVE
        docs.append({"sort": list(X), "isotypic": iso.as_dict(), "lg_equivalent": eq.as_dict(),
                     "agree": agree})
    _emit(session, {"models": [str(m1), str(m2)], "results": docs}, lines)
    return code


def cmd_kb(session: Session, args) -> int:
    m = session.model(args.model)
    kb = build_kb(m, _sorts(args))
    lines = []
    for X in kb.sorts:
        lat = kb.content(X)
        lines.append(f"sort ({','.join(X)}): {len(lat)} definable sets, {len(lat.orbits)} orbits")
        if len(lat) <= args.list_max:
            for i in lat:
                A = lat.element(i)
                lines.append(f"  [{i}] {format_points(A)}  :  {sx.format_formula(lat.formula(i))}")
        else:
            lines.append(f"  (listing suppressed above {args.list_max} elements)")
    _emit(session, kb.as_dict(with_formulas=True), lines)
    return EXIT_OK


def cmd_kb_iso(session: Session, args) -> int:
    m1, m2 = session.model(args.model1), session.model(args.model2)
    if not m1.same_signature(m2):
        raise UsageError(f"models {m1} and {m2} have different signatures")
    sorts = _sorts(args)
    v = kb_isomorphic(build_kb(m1, sorts), build_kb(m2, sorts), depth=args.depth)
    _emit(session, {"models": [str(m1), str(m2)], **v.as_dict()}, [v.describe()])
    return EXIT_NEGATIVE if v.kind == "NOT_ISOMORPHIC" else EXIT_OK


def _suite_halmos(m, sorts, args):
    out = []
    for X in sorts:
        rep = check_halmos_axioms(m, X, instances=args.instances, seed=args.seed)
        out.append(("halmos", X, rep.passed, rep.as_dict(),
                    f"halmos ({','.join(X)}): {'pass' if rep.passed else 'FAIL'}"
                    f" ({rep.instances} instances)"))
    return out


def _suite_diagrams(m, sorts, args):
    out = []
    cells = bad = 0
    first = None
    grids = {Y: formula_grid(m, Y, rank=args.rank, depth=args.depth) for Y in sorts}
    morphisms = 0
    for Y in sorts:
        for X in sorts:
            for s in morphism_grid(m, Y, X, args.depth):
                morphisms += 1
                for v in grids[Y]:
                    cells += 1
                    if not check_diagram1(s, v, m):
                        bad += 1
                        first = first or f"{s} / {sx.format_formula(v)}"
    out.append(("diagram1", None, bad == 0,
                {"cells": cells, "failures": bad, "morphisms": morphisms,
                 "formulas": {",".join(Y): len(g) for Y, g in grids.items()}, "first_failure": first},
                f"diagram1: {'pass' if bad == 0 else 'FAIL'} ({cells} cells, {morphisms} morphisms)"))
    cells = bad = 0
    first = None
    for Y in sorts:
        kb = build_kb(m, [Y])
        lat = kb.content(Y)
        for X in sorts:
            for s in morphism_grid(m, Y, X, args.depth):
                for i in lat:
                    rep = check_diagram2(s, lat.element(i))
                    cells += 1
                    if not rep.passed:
                        bad += 1
                        first = first or rep.as_dict()
    out.append(("diagram2", None, bad == 0, {"cells": cells, "failures": bad, "first_failure": first},
                f"diagram2: {'pass' if bad == 0 else 'FAIL'} ({cells} cells)"))
    return out


def _suite_anti(m, sorts, args):
    kb = build_kb(m, sorts)
    out = []
    for X in sorts:
        rep = check_anti(kb, X)
        out.append(("anti", X, rep.passed, rep.as_dict(),
                    f"anti ({','.join(X)}): {'pass' if rep.passed else 'FAIL'} ({rep.elements} elements)"))
    return out


def cmd_check(session: Session, args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r} (choose from {', '.join(SUITES)})")
    m = session.model(args.model)
    sorts = _sorts(args, default=(("x",), ("x", "y")))
    runs = []
    for name in ("halmos", "diagrams", "anti"):
        if args.suite in (name, "all"):
            runs += globals()[f"_suite_{name}"](m, sorts, args)
    ok = all(r[2] for r in runs)
    doc = {"model": str(m), "suite": args.suite, "passed": ok,
           "checks": [{"check": r[0], "sort": None if r[1] is None else list(r[1]), "passed": r[2],
                       "detail": r[3]} for r in runs]}
    _emit(session, doc, [r[4] for r in runs] + [("all pass" if ok else "FAILURES")])
    return EXIT_OK if ok else EXIT_NEGATIVE


# -- argument parsing -----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lgeom", description="Finite-model logical geometry engine. Models are "
                f"bundled names ({', '.join(CORPUS)}) or JSON files.")
    p.add_argument("--json", action="store_true", help="structured output")
    p.add_argument("--cap-points", type=int, default=None, help="cap on |H^X|")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, depth=3):
        sp.add_argument("-X", action="append", metavar="VARS", help="sort, e.g. x or x,y (repeatable)")
        sp.add_argument("--depth", type=int, default=depth)
        sp.add_argument("--rank", type=int, default=None)
        sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
        sp.add_argument("--cap-points", type=int, default=argparse.SUPPRESS)

    sp = sub.add_parser("eval", help="print Val(u) over a sort")
    sp.add_argument("model")
    sp.add_argument("formula")
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("closure", help="logical or algebraic closure of points or formulas")
    sp.add_argument("model")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--points", action="append", help="points like 1 or 0,1;1,2")
    group.add_argument("--formulas", action="append", help="formula (repeatable)")
    sp.add_argument("--mode", choices=("logical", "algebraic"), default="logical")
    common(sp)
    sp.set_defaults(func=cmd_closure)

    sp = sub.add_parser("compare", help="isotypic and LG-equivalence verdicts")
    sp.add_argument("model1")
    sp.add_argument("model2")
    sp.add_argument("--sweep", type=int, default=None, help="use sorts x, (x,y), ... up to this size")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("kb", help="build a knowledge base and list its lattices")
    sp.add_argument("model")
    sp.add_argument("--list-max", type=int, default=64)
    common(sp)
    sp.set_defaults(func=cmd_kb)

    sp = sub.add_parser("kb-iso", help="knowledge-base isomorphism verdict")
    sp.add_argument("model1")
    sp.add_argument("model2")
    common(sp, depth=1)
    sp.set_defaults(func=cmd_kb_iso)

    sp = sub.add_parser("check", help="run a property suite")
    sp.add_argument("model")
    sp.add_argument("--suite", default="all")
    sp.add_argument("--instances", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    common(sp, depth=2)
    sp.set_defaults(func=cmd_check, rank=2)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    saved_cap = CAPS.points
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing command")
        session = Session(json=args.json)
        if args.cap_points is not None:
            if args.cap_points < 1:
                raise UsageError("--cap-points must be positive")
            CAPS.points = args.cap_points
        return args.func(session, args)
    except UsageError as exc:
        print(f"lgeom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except sx.ParseError as exc:
        print(f"lgeom: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (sx.SignatureError, ModelError, ValueError) as exc:
        print(f"lgeom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceeded as exc:
        print(f"lgeom: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    finally:
        CAPS.points = saved_cap


if __name__ == "__main__":
    sys.exit(main())
