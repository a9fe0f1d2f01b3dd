"""Terms, formulas, parsing, printing and capture-avoiding substitution.

Terms are syntactic representatives of elements of the free algebra W(X);
formulas are representatives of elements of Phi(X). Nothing here knows
about models: all semantics lives in :mod:`lgeom.model` and
:mod:`lgeom.halmos`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

__all__ = [
    "AlgSignature", "RelSignature", "Sort", "make_sort",
    "Term", "Var", "Op", "Formula", "Equality", "RelAtom", "Not", "And", "Or",
    "Exists", "Forall", "TRUE", "FALSE", "conj", "disj",
    "ParseError", "SignatureError", "SubstitutionError",
    "parse_term", "parse_formula", "parse_sort", "format_term", "format_formula",
    "term_vars", "term_depth", "free_vars", "all_vars", "quantifier_rank",
    "max_term_depth", "substitute", "substitute_term", "fresh_name",
]

EQ = "=="
RESERVED = frozenset({"exists", "forall"})


class ParseError(ValueError):
    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class SignatureError(ValueError):
    """Unknown symbol or arity mismatch."""


class SubstitutionError(ValueError):
    pass


# -- signatures ---------------------------------------------------------------

@dataclass(frozen=True)
class AlgSignature:
    """Operation symbols of the variety; arity 0 means a constant."""

    ops: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        names = [n for n, _ in self.ops]
        if len(set(names)) != len(names):
            raise SignatureError(f"duplicate operation names in {names}")
        for name, arity in self.ops:
            if arity < 0:
                raise SignatureError(f"negative arity for {name}")
        object.__setattr__(self, "ops", tuple(sorted(self.ops)))

    @classmethod
    def of(cls, arities: Mapping[str, int]) -> "AlgSignature":
        return cls(tuple(arities.items()))

    def arity(self, name: str) -> int | None:
        for n, a in self.ops:
            if n == name:
                return a
        return None

    def __contains__(self, name: str) -> bool:
        return self.arity(name) is not None

    def names(self) -> list[str]:
        return [n for n, _ in self.ops]


@dataclass(frozen=True)
class RelSignature:
    """Relation symbols; equality is built in and never listed."""

    rels: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        names = [n for n, _ in self.rels]
        if len(set(names)) != len(names):
            raise SignatureError(f"duplicate relation names in {names}")
        for name, arity in self.rels:
            if arity < 1:
                raise SignatureError(f"relation {name} needs arity >= 1")
            if name == EQ:
                raise SignatureError("equality is built in")
        object.__setattr__(self, "rels", tuple(sorted(self.rels)))

    @classmethod
    def of(cls, arities: Mapping[str, int]) -> "RelSignature":
        return cls(tuple(arities.items()))

    def arity(self, name: str) -> int | None:
        for n, a in self.rels:
            if n == name:
                return a
        return None

    def __contains__(self, name: str) -> bool:
        return self.arity(name) is not None

    def names(self) -> list[str]:
        return [n for n, _ in self.rels]


Sort = tuple  # ordered tuple of distinct variable names


def make_sort(names: Iterable[str]) -> tuple[str, ...]:
    s = tuple(names)
    if len(set(s)) != len(s):
        raise ValueError(f"duplicate variables in sort {s}")
    for v in s:
        if not _IDENT.fullmatch(v) or v in RESERVED:
            raise ValueError(f"bad variable name {v!r}")
    return s


def parse_sort(text: str) -> tuple[str, ...]:
    """``"x,y"`` -> ``("x", "y")``; the empty string is the empty sort."""
    text = text.strip()
    if not text:
        return ()
    return make_sort(p.strip() for p in text.split(","))


# -- terms --------------------------------------------------------------------
# Hashes are cached because terms and formulas key the evaluation caches.

@dataclass(frozen=True)
class Var:
    name: str
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("Var", self.name)))

    def __hash__(self):
        return self._h

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Op:
    name: str
    args: tuple = ()
    _h: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "_h", hash(("Op", self.name, self.args)))

    def __hash__(self):
        return self._h

    def __str__(self):
        return format_term(self)


Term = Union[Var, Op]


# -- formulas -----------------------------------------------------------------

class _Node:
    __slots__ = ()

    def __hash__(self):
        return self._h

    def __str__(self):
        return format_formula(self)

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __post_init__(self):
        vals = tuple(getattr(self, f) for f in self.__dataclass_fields__ if f != "_h")
        object.__setattr__(self, "_h", hash((type(self).__name__,) + vals))


@dataclass(frozen=True, eq=True)
class Equality(_Node):
    left: Term
    right: Term
    _h: int = field(init=False, repr=False, compare=False)
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class RelAtom(_Node):
    rel: str
    args: tuple
    _h: int = field(init=False, repr=False, compare=False)
    __hash__ = _Node.__hash__

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        super().__post_init__()


@dataclass(frozen=True, eq=True)
class Not(_Node):
    body: "Formula"
    _h: int = field(init=False, repr=False, compare=False)
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class And(_Node):
    left: "Formula"
    right: "Formula"
    _h: int = field(init=False, repr=False, compare=False)
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Or(_Node):
    left: "Formula"
    right: "Formula"
    _h: int = field(init=False, repr=False, compare=False)
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Exists(_Node):
    var: str
    body: "Formula"
    _h: int = field(init=False, repr=False, compare=False)
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Forall(_Node):
    var: str
    body: "Formula"
    _h: int = field(init=False, repr=False, compare=False)
    __hash__ = _Node.__hash__


Formula = Union[Equality, RelAtom, Not, And, Or, Exists, Forall]

# Closed truth constants; the carrier is never empty.
TRUE = Exists("t", Equality(Var("t"), Var("t")))
FALSE = Not(TRUE)


def conj(parts: Iterable[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts: Iterable[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


# -- structural queries -------------------------------------------------------

def term_vars(w: Term) -> set[str]:
    if isinstance(w, Var):
        return {w.name}
    out: set[str] = set()
    for a in w.args:
        out |= term_vars(a)
    return out


def term_depth(w: Term) -> int:
    if isinstance(w, Var) or not w.args:
        return 0
    return 1 + max(term_depth(a) for a in w.args)


def _atom_terms(u) -> tuple:
    return (u.left, u.right) if isinstance(u, Equality) else u.args


def free_vars(u: Formula) -> set[str]:
    if isinstance(u, (Equality, RelAtom)):
        out: set[str] = set()
        for w in _atom_terms(u):
            out |= term_vars(w)
        return out
    if isinstance(u, Not):
        return free_vars(u.body)
    if isinstance(u, (And, Or)):
        return free_vars(u.left) | free_vars(u.right)
    if isinstance(u, (Exists, Forall)):
        return free_vars(u.body) - {u.var}
    raise TypeError(f"not a formula: {u!r}")


def all_vars(u: Formula) -> set[str]:
    """Every variable name occurring in u, free or bound."""
    if isinstance(u, (Equality, RelAtom)):
        return free_vars(u)
    if isinstance(u, Not):
        return all_vars(u.body)
    if isinstance(u, (And, Or)):
        return all_vars(u.left) | all_vars(u.right)
    return all_vars(u.body) | {u.var}


def quantifier_rank(u: Formula) -> int:
    if isinstance(u, (Equality, RelAtom)):
        return 0
    if isinstance(u, Not):
        return quantifier_rank(u.body)
    if isinstance(u, (And, Or)):
        return max(quantifier_rank(u.left), quantifier_rank(u.right))
    return 1 + quantifier_rank(u.body)


def max_term_depth(u: Formula) -> int:
    if isinstance(u, (Equality, RelAtom)):
        return max((term_depth(w) for w in _atom_terms(u)), default=0)
    if isinstance(u, Not):
        return max_term_depth(u.body)
    if isinstance(u, (And, Or)):
        return max(max_term_depth(u.left), max_term_depth(u.right))
    return max_term_depth(u.body)


# -- printing -----------------------------------------------------------------

def format_term(w: Term) -> str:
    if isinstance(w, Var):
        return w.name
    if not w.args:
        return w.name
    return f"{w.name}({', '.join(format_term(a) for a in w.args)})"


_PREC = {Or: 1, And: 2}


def format_formula(u: Formula) -> str:
    if isinstance(u, Equality):
        return f"{format_term(u.left)} == {format_term(u.right)}"
    if isinstance(u, RelAtom):
        return f"{u.rel}({', '.join(format_term(a) for a in u.args)})"
    if isinstance(u, (Exists, Forall)):
        q = "exists" if isinstance(u, Exists) else "forall"
        return f"{q} {u.var}. {format_formula(u.body)}"
    if isinstance(u, Not):
        if isinstance(u.body, Equality):
            return f"!({format_formula(u.body)})"
        return "!" + _operand(u.body, 3)
    sym = " | " if isinstance(u, Or) else " & "
    prec = _PREC[type(u)]
    # binary connectives parse left-associatively
    return _operand(u.left, prec) + sym + _operand(u.right, prec + 1)


def _operand(u: Formula, min_prec: int) -> str:
    s = format_formula(u)
    if isinstance(u, (Exists, Forall)):
        return f"({s})"
    p = _PREC.get(type(u), 4)
    return s if p >= min_prec else f"({s})"


# -- parsing ------------------------------------------------------------------

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_TOKEN = re.compile(r"\s*(?:(==)|([A-Za-z_][A-Za-z0-9_']*)|([(),.!&|]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:]
            if rest.strip() == "":
                break
            bad = pos + len(rest) - len(rest.lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad, text)
        if m.group(1):
            toks.append(("op", "==", m.start(1)))
        elif m.group(2):
            toks.append(("id", m.group(2), m.start(2)))
        else:
            toks.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, sig: AlgSignature, rels: RelSignature | None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.sig = sig
        self.rels = rels if rels is not None else RelSignature()

    def peek(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, v, pos = self.advance()
        if v != value or kind == "eof":
            found = "end of input" if kind == "eof" else repr(v)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def fail(self, msg: str):
        raise ParseError(msg, self.peek()[2], self.text)

    def done(self):
        kind, v, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected {v!r}", pos, self.text)

    def term(self) -> Term:
        kind, name, pos = self.advance()
        if kind != "id":
            raise ParseError("expected a term", pos, self.text)
        if name in RESERVED:
            raise ParseError(f"reserved word {name!r} used as a term", pos, self.text)
        if name in self.rels:
            raise SignatureError(f"relation symbol {name!r} used as a term at position {pos}")
        arity = self.sig.arity(name)
        if self.peek()[1] == "(" and self.peek()[0] == "op":
            if arity is None:
                raise SignatureError(f"unknown operation symbol {name!r} at position {pos}")
            self.advance()
            args = [self.term()]
            while self.peek()[1] == ",":
                self.advance()
                args.append(self.term())
            self.expect(")")
            if len(args) != arity:
                raise SignatureError(
                    f"{name} expects {arity} argument(s), got {len(args)} at position {pos}")
            return Op(name, tuple(args))
        if arity is None:
            return Var(name)
        if arity != 0:
            raise SignatureError(f"{name} expects {arity} argument(s), got 0 at position {pos}")
        return Op(name, ())

    def formula(self) -> Formula:
        left = self.conjunction()
        while self.peek()[:2] == ("op", "|"):
            self.advance()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        while self.peek()[:2] == ("op", "&"):
            self.advance()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        kind, v, pos = self.peek()
        if kind == "op" and v == "!":
            self.advance()
            return Not(self.unary())
        if kind == "op" and v == "(":
            self.advance()
            u = self.formula()
            self.expect(")")
            return u
        if kind == "id" and v in RESERVED:
            self.advance()
            kind2, var, pos2 = self.advance()
            if kind2 != "id" or var in RESERVED:
                raise ParseError("expected a bound variable", pos2, self.text)
            if var in self.sig or var in self.rels:
                raise SignatureError(f"cannot bind symbol {var!r} at position {pos2}")
            self.expect(".")
            body = self.formula()
            return Exists(var, body) if v == "exists" else Forall(var, body)
        if kind == "id" and v in self.rels:
            self.advance()
            arity = self.rels.arity(v)
            self.expect("(")
            args = [self.term()]
            while self.peek()[1] == ",":
                self.advance()
                args.append(self.term())
            self.expect(")")
            if len(args) != arity:
                raise SignatureError(
                    f"{v} expects {arity} argument(s), got {len(args)} at position {pos}")
            return RelAtom(v, tuple(args))
        if kind == "id":
            left = self.term()
            if self.peek()[:2] != ("op", "=="):
                kind3, v3, pos3 = self.peek()
                if kind3 == "op" and v3 == "(" and isinstance(left, Var):
                    raise SignatureError(f"unknown symbol {left.name!r} at position {pos}")
                self.fail("expected '=='")
            self.advance()
            return Equality(left, self.term())
        if kind == "eof":
            self.fail("unexpected end of input")
        self.fail(f"unexpected {v!r}")


def parse_term(text: str, sig: AlgSignature, rels: RelSignature | None = None) -> Term:
    p = _Parser(text, sig, rels)
    w = p.term()
    p.done()
    return w


def parse_formula(text: str, sig: AlgSignature, rels: RelSignature | None = None) -> Formula:
    p = _Parser(text, sig, rels)
    u = p.formula()
    p.done()
    return u


# -- substitution -------------------------------------------------------------

def fresh_name(base: str, avoid: set[str]) -> str:
    """Deterministic fresh variant ``base_k`` with the smallest free k >= 1."""
    stem = re.sub(r"_\d+$", "", base)
    k = 1
    while f"{stem}_{k}" in avoid:
        k += 1
    return f"{stem}_{k}"


def substitute_term(s: Mapping[str, Term], w: Term) -> Term:
    if isinstance(w, Var):
        try:
            return s[w.name]
        except KeyError:
            raise SubstitutionError(f"variable {w.name!r} is not mapped") from None
    return Op(w.name, tuple(substitute_term(s, a) for a in w.args))


def substitute(s, u: Formula) -> Formula:
    """Apply a variable-to-term map to u, renaming bound variables that would
    capture a variable of a substituted term.

    ``s`` is a mapping or anything with an ``images`` mapping (a TermMorphism).
    Every free variable of u must be mapped.
    """
    images = getattr(s, "images", s)
    missing = free_vars(u) - set(images)
    if missing:
        raise SubstitutionError(f"unmapped free variable(s): {sorted(missing)}")
    return _subst(dict(images), u)


def _subst(s: dict, u: Formula) -> Formula:
    if isinstance(u, Equality):
        return Equality(substitute_term(s, u.left), substitute_term(s, u.right))
    if isinstance(u, RelAtom):
        return RelAtom(u.rel, tuple(substitute_term(s, a) for a in u.args))
    if isinstance(u, Not):
        return Not(_subst(s, u.body))
    if isinstance(u, (And, Or)):
        return type(u)(_subst(s, u.left), _subst(s, u.right))
    x = u.var
    support: set[str] = set()
    for y in free_vars(u):
        support |= term_vars(s[y])
    inner = dict(s)
    if x in support:
        avoid = support | all_vars(u)
        for y in free_vars(u):
            avoid.add(y)
        x2 = fresh_name(x, avoid)
        inner[x] = Var(x2)
        return type(u)(x2, _subst(inner, u.body))
    inner[x] = Var(x)
    return type(u)(x, _subst(inner, u.body))


def walk_terms(u: Formula) -> Iterator[Term]:
    """Yield every top-level term of every atom of u."""
    if isinstance(u, (Equality, RelAtom)):
        yield from _atom_terms(u)
    elif isinstance(u, Not):
        yield from walk_terms(u.body)
    elif isinstance(u, (And, Or)):
        yield from walk_terms(u.left)
        yield from walk_terms(u.right)
    else:
        yield from walk_terms(u.body)
