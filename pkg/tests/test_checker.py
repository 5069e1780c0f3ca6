import random

import pytest
from hypothesis import given, settings, strategies as st

from topodep.checker import (
    EvalError, StandardChecker, eval, eval_all, eval_extended, eval_standard,
    eval_standard_direct, failing_states, valid_in_model,
)
from topodep.formula import (
    ContAtom, IndepAtom, KnowMod, PointContAtom, TopoIndepAtom, implies, parse,
    random_formula, subsets,
)
from topodep.models import (
    StandardModel, expand_standard, random_lud_model, random_standard_model, rt_closure,
)

seeds = st.integers(0, 10**6)


@settings(max_examples=80, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 2), seeds)
def test_bitmask_checker_matches_direct_clauses(mseed, n, nv, fseed):
    SM = random_standard_model(n, nv, seed=mseed)
    V = SM.variables
    f = random_formula(random.Random(fseed), V, {"P": 1}, 2, "lcd")
    truth = StandardChecker(SM).eval_all(f)
    for s in SM.states:
        assert (s in truth) == eval_standard_direct(SM, s, f)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 2))
def test_extended_atoms_match_direct_clauses(mseed, n, nv):
    SM = random_standard_model(n, nv, seed=mseed)
    sc = StandardChecker(SM)
    subs = subsets(SM.variables)
    for X in subs:
        for Y in subs:
            for a in (PointContAtom(X, Y), IndepAtom(X, Y), TopoIndepAtom(X, Y)):
                m = sc.eval_all(a)
                for s in SM.states:
                    assert (s in m) == eval_standard_direct(SM, s, a)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 2))
def test_continuity_and_independence_equivalences(mseed, n, nv):
    SM = random_standard_model(n, nv, seed=mseed)
    sc = StandardChecker(SM)
    subs = subsets(SM.variables)
    for X in subs:
        for Y in subs:
            assert sc.eval_all(ContAtom(X, Y)) == sc.eval_all(KnowMod(X, PointContAtom(X, Y)))
            assert sc.valid(implies(ContAtom(X, Y), KnowMod(X, ContAtom(X, Y))))
            assert sc.valid(KnowMod((), IndepAtom(X, Y))) == sc.valid(KnowMod((), IndepAtom(Y, X)))
            assert sc.valid(implies(IndepAtom(X, Y), TopoIndepAtom(X, Y)))


def test_global_topological_independence_is_not_symmetric():
    W = ("a", "b", "c")
    SM = StandardModel(("x", "y"), {}, W, {
        "x": rt_closure([("a", "b"), ("b", "a"), ("c", "a")], W),
        "y": rt_closure([("b", "c"), ("c", "b"), ("b", "a")], W),
    }, {})
    sc = StandardChecker(SM)
    assert sc.eval_all(TopoIndepAtom(("x",), ("y",))) == frozenset(W)
    assert sc.eval_all(TopoIndepAtom(("y",), ("x",))) == frozenset({"b", "c"})
    assert sc.valid(parse("K{} Ig{x}{y}"))
    assert not sc.valid(parse("K{} Ig{y}{x}"))


def test_simple_examples():
    W = ("a", "b")
    SM = StandardModel(("x",), {"P": 1}, W, {"x": rt_closure([("a", "b")], W)},
                       {parse("P(x)"): frozenset({"a"})})
    M = expand_standard(SM)
    assert eval(M, "a", parse("P(x)"))
    assert not eval(M, "a", parse("K{x} P(x)"))
    assert eval(M, "a", parse("D{x} P(x)"))
    assert eval_all(M, parse("D{} P(x)")) == frozenset()
    assert failing_states(M, parse("~K{}{x}")) == []
    assert valid_in_model(M, parse("K{x}{x}"))
    assert eval_standard(SM, "b", parse("K{x} ~P(x)"))
    assert eval_extended(SM, "a", parse("k{x}{}"))
    assert not eval_extended(SM, "a", parse("K{} I{x}{x}"))


def test_errors():
    SM = random_standard_model(2, 1, seed=0)
    M = expand_standard(SM)
    with pytest.raises(EvalError):
        eval(M, "s0", parse("U(x;x)"))
    with pytest.raises(EvalError):
        eval(M, "s0", parse("k{x}{x}"))
    with pytest.raises(EvalError):
        eval(M, "s0", parse("P(y)"))
    with pytest.raises(EvalError):
        eval(M, "s0", parse("Q(x)"))
    with pytest.raises(EvalError):
        eval(M, "nowhere", parse("P(x)"))
    with pytest.raises(EvalError):
        eval_extended(SM, "s0", parse("P(x)"))
    L = random_lud_model(2, 1, seed=0)
    assert isinstance(eval(L, "s0", parse("U(x;x)")), bool)
