import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from topodep.formula import ContAtom, DepAtom, PredAtom, UnifAtom
from topodep.models import (
    ModelError, PreorderModel, PseudoMetricModel, StandardModel, armstrong_closure,
    as_preorder_model, check_pseudometric, check_standard, dump_model, expand_pseudometric,
    expand_standard, is_preorder_model, load_model, model_from_json, model_to_json,
    pseudometric_atoms_direct, random_lud_model, random_pseudometric_model,
    random_standard_model, rt_closure, validate_preorder_model, with_uniform_atoms,
)

seeds = st.integers(0, 10**6)
shapes = st.tuples(st.integers(1, 4), st.integers(0, 2))


@settings(max_examples=60, deadline=None)
@given(seeds, shapes)
def test_expand_standard_is_a_preorder_model(seed, shape):
    SM = random_standard_model(*shape, seed=seed)
    assert check_standard(SM) == []
    assert validate_preorder_model(expand_standard(SM)) == []


@settings(max_examples=60, deadline=None)
@given(seeds, shapes)
def test_expand_pseudometric_is_a_preorder_model(seed, shape):
    PM = random_pseudometric_model(*shape, seed=seed)
    assert check_pseudometric(PM) == []
    M = expand_pseudometric(PM)
    assert M.language == "lud"
    assert validate_preorder_model(M) == []


@settings(max_examples=40, deadline=None)
@given(seeds, shapes)
def test_pseudometric_expansion_matches_direct_clauses(seed, shape):
    PM = random_pseudometric_model(*shape, seed=seed)
    M = expand_pseudometric(PM)
    direct = pseudometric_atoms_direct(PM)
    for atom, ext in direct.items():
        assert M.val[atom] == ext, atom


@settings(max_examples=40, deadline=None)
@given(seeds, shapes)
def test_lud_generator_is_valid(seed, shape):
    assert validate_preorder_model(random_lud_model(*shape, seed=seed)) == []


def _model():
    SM = StandardModel(("x",), {"P": 1}, ("a", "b"),
                       {"x": frozenset({("a", "a"), ("b", "b"), ("a", "b")})},
                       {PredAtom("P", ("x",)): frozenset({"a"})})
    return expand_standard(SM)


def _replace_val(M, atom, ext, language=None):
    val = dict(M.val)
    val[atom] = frozenset(ext)
    return PreorderModel(M.variables, M.predicates, M.states, M.eq, M.leq, val, language or M.language)


def test_hand_model_values():
    M = _model()
    assert M.val[ContAtom(("x",), ())] == {"a", "b"}
    assert M.val[DepAtom((), ("x",))] == frozenset()
    assert ("a", "b") in M.leq[("x",)] and ("b", "a") not in M.leq[("x",)]


@pytest.mark.parametrize("atom,ext,cond", [
    (DepAtom(("x",), ()), {"a"}, "4"),           # inclusion: D_X Y must hold everywhere when Y <= X
    (ContAtom(("x",), ("x",)), {"b"}, "4"),
    (DepAtom((), ("x",)), {"a"}, "3"),
    (ContAtom((), ("x",)), {"a", "b"}, None),    # K_0 x everywhere contradicts a non-total <=_x
])
def test_validator_catches_mutations(atom, ext, cond):
    bad = validate_preorder_model(_replace_val(_model(), atom, ext))
    assert bad
    if cond is not None:
        assert any(v.condition == cond for v in bad)


def test_validator_reports_non_equivalence():
    M = _model()
    eq = dict(M.eq)
    eq[("x",)] = eq[("x",)] | {("a", "b")}
    bad = validate_preorder_model(PreorderModel(M.variables, M.predicates, M.states, eq, M.leq, M.val))
    assert any(v.condition == "E" for v in bad)
    assert not is_preorder_model(PreorderModel(M.variables, M.predicates, M.states, eq, M.leq, M.val))


def test_uniform_knowledge_condition():
    lud = with_uniform_atoms(_model(), random.Random(1))
    assert validate_preorder_model(lud) == []
    broken = _replace_val(lud, UnifAtom((), ()), frozenset())
    assert validate_preorder_model(broken)
    # U holding at one state only violates condition (10)
    half = _replace_val(lud, UnifAtom(("x",), ()), {"a"})
    assert any(v.condition == "10" for v in validate_preorder_model(half))
    # K_0 x holding everywhere forces U(X;x): condition UK
    W = ("a", "b")
    tot = frozenset((s, w) for s in W for w in W)
    SM = StandardModel(("x",), {}, W, {"x": tot}, {})
    const = with_uniform_atoms(expand_standard(SM), random.Random(0))
    assert validate_preorder_model(const) == []
    uk = _replace_val(const, UnifAtom((), ("x",)), frozenset())
    assert any(v.condition == "UK" for v in validate_preorder_model(uk))


def test_armstrong_closure():
    R = armstrong_closure([(("x",), ("y",)), (("y",), ("z",))], ("x", "y", "z"))
    assert (("x",), ("z",)) in R
    assert (("x",), ("x", "y", "z")) in R
    assert ((), ("x",)) not in R


@settings(max_examples=40, deadline=None)
@given(seeds, shapes, st.sampled_from(["standard", "pseudo", "lud"]))
def test_json_round_trip(seed, shape, kind):
    if kind == "standard":
        M = random_standard_model(*shape, seed=seed)
    elif kind == "pseudo":
        M = random_pseudometric_model(*shape, seed=seed)
    else:
        M = random_lud_model(*shape, seed=seed)
    text = dump_model(M)
    N = load_model(text)
    assert N == M
    assert dump_model(N) == text
    assert as_preorder_model(N) == as_preorder_model(M)


def test_json_rejects_bad_input():
    obj = model_to_json(random_standard_model(2, 1, seed=0))
    broken = json.loads(json.dumps(obj))
    broken["kind"] = "nonsense"
    with pytest.raises(ModelError):
        model_from_json(broken)
    with pytest.raises(ValueError):
        load_model("{not json")
    pm = model_to_json(random_pseudometric_model(3, 1, seed=0))
    pm["dist"]["x"] = pm["dist"]["x"][:-1]
    with pytest.raises(ModelError):
        model_from_json(pm)


def test_pseudometric_check_flags_triangle_violation():
    W = ("a", "b", "c")
    d = {("a", "b"): Fraction(1, 4), ("b", "c"): Fraction(1, 4), ("a", "c"): Fraction(1)}
    full = {}
    for s in W:
        full[(s, s)] = Fraction(0)
    for (s, w), v in d.items():
        full[(s, w)] = full[(w, s)] = v
    PM = PseudoMetricModel(("x",), {}, W, {"x": full}, {})
    assert check_pseudometric(PM)


def test_rt_closure():
    R = rt_closure([("a", "b"), ("b", "c")], ("a", "b", "c"))
    assert ("a", "c") in R and ("a", "a") in R and ("c", "a") not in R
