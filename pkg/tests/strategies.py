"""Hypothesis strategies for group-signature formulas with one unary relation P."""

from hypothesis import strategies as st

from lgeom.syntax import And, Equality, Exists, Forall, Not, Op, Or, RelAtom, Var

VARS = ["x", "y", "z"]


def terms(depth=2):
    leaf = st.sampled_from([Var(v) for v in VARS] + [Op("e", ())])
    return st.recursive(leaf, lambda t: st.one_of(
        st.builds(lambda a: Op("inv", (a,)), t),
        st.builds(lambda a, b: Op("mul", (a, b)), t, t)), max_leaves=4)


def formulas(rels=True):
    atom = st.builds(Equality, terms(), terms())
    if rels:
        atom = st.one_of(atom, st.builds(lambda t: RelAtom("P", (t,)), terms()))
    return st.recursive(atom, lambda f: st.one_of(
        st.builds(Not, f), st.builds(And, f, f), st.builds(Or, f, f),
        st.builds(Exists, st.sampled_from(VARS), f),
        st.builds(Forall, st.sampled_from(VARS), f)), max_leaves=6)
