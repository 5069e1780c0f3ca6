import random

import pytest
from hypothesis import given, settings, strategies as st

from topodep.formula import (
    And, ContAtom, DepAtom, DepMod, FormulaSyntaxError, KnowMod, Not, PredAtom, UnifAtom,
    closure, expand_abbrev, in_language, language, modal_depth, parse, parse_vkey,
    random_formula, size, subsets, to_text, variables, varset, vkey,
)


def test_varsets_are_sorted_and_deduplicated():
    assert varset(["y", "x", "y"]) == ("x", "y")
    assert vkey(("x", "y")) == "x,y"
    assert parse_vkey("y, x") == ("x", "y")
    assert parse_vkey("") == ()
    assert subsets(("x", "y")) == [(), ("x",), ("y",), ("x", "y")]


def test_parse_basic_shapes():
    assert parse("P(x)") == PredAtom("P", ("x",))
    assert parse("D{x}{y}") == DepAtom(("x",), ("y",))
    assert parse("K{x}{y}") == ContAtom(("x",), ("y",))
    assert parse("U(x;y)") == UnifAtom(("x",), ("y",))
    assert parse("D{x,y} P(x)") == DepMod(("x", "y"), PredAtom("P", ("x",)))
    assert parse("K{} ~P(x)") == KnowMod((), Not(PredAtom("P", ("x",))))


def test_abbreviations_expand():
    assert parse("C(x)") == DepAtom((), ("x",))
    assert parse("A P(x)") == DepMod((), PredAtom("P", ("x",)))
    f = parse("D{x}{y} -> K{x}{y}")
    assert f == Not(And(DepAtom(("x",), ("y",)), Not(ContAtom(("x",), ("y",)))))
    assert parse("D{x}{y} -> K{x}{y}", expand=False) != f
    assert expand_abbrev(parse("D{x}{y} -> K{x}{y}", expand=False)) == f


@pytest.mark.parametrize("text", ["P(x", "D{x P(x)", "P(x) &", "U(x,y)", "", "&"])
def test_syntax_errors(text):
    with pytest.raises(FormulaSyntaxError):
        parse(text)


def test_declared_arity_is_enforced():
    with pytest.raises(FormulaSyntaxError):
        parse("R(x)", predicates={"R": 2})
    assert parse("R(x,y)", predicates={"R": 2}).args == ("x", "y")


def test_measures():
    f = parse("K{x} (P(x) & D{y} D{x}{y})")
    assert modal_depth(f) == 2
    assert variables(f) == ("x", "y")
    assert size(f) >= 4
    assert language(parse("D{x}{y}")) == "lfd"
    assert language(f) == "lcd"
    assert language(parse("U(x;y)")) == "lud"
    assert language(parse("k{x}{y}")) == "ext"
    assert in_language(parse("D{x}{y}"), "lud")
    assert not in_language(f, "lfd")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["lfd", "lcd", "lud"]), st.integers(0, 3))
def test_print_parse_round_trip(seed, lang, depth):
    f = random_formula(random.Random(seed), ("x", "y"), {"P": 1, "R": 2}, depth, lang)
    assert parse(to_text(f), expand=False) == f
    assert in_language(f, lang)
    assert modal_depth(f) <= depth


def test_closure_properties():
    phi = parse("K{x} P(x)")
    c = closure(phi, "lcd")
    m = c.members
    assert phi in m and PredAtom("P", ("x",)) in m
    for f in m:
        if not isinstance(f, Not):
            assert Not(f) in m
    for X in subsets(c.variables):
        for Y in subsets(c.variables):
            assert DepMod(X, DepAtom(X, Y)) in m
            assert KnowMod(X, ContAtom(X, Y)) in m
            assert DepMod(X, ContAtom(X, Y)) in m
    assert DepMod(("x",), phi) in m
    assert not any(isinstance(f, UnifAtom) for f in m)
    assert any(isinstance(f, UnifAtom) for f in closure(phi, "lud").members)
    assert not any(isinstance(f, (ContAtom, KnowMod)) for f in closure(parse("D{x}P(x)"), "lfd").members)


def test_closure_is_deterministic_and_finite():
    phi = parse("D{x} (P(x) & ~K{} P(x))")
    a, b = closure(phi, "lcd"), closure(phi, "lcd")
    assert a.ordered == b.ordered
    assert len(a.members) == len(a.ordered) < 400
