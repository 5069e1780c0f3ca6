from hypothesis import given, settings, strategies as st

from topodep.finitetopo import (
    FiniteSpace, OpenFamily, alexandroff_opens, generate_topology, interior_closure,
    is_open_family, is_preorder, is_t0, neighbourhoods, quotient_space,
    reflexive_transitive_closure, specialization_preorder, upsets,
)

S = FiniteSpace(("a", "b", "c"))


def test_generate_topology_from_subbasis():
    fam = generate_topology(S, [{"a", "b"}, {"b", "c"}])
    assert is_open_family(fam)
    assert frozenset({"b"}) in fam.opens
    assert frozenset() in fam.opens and S.full in fam.opens
    assert len(fam.opens) == 5


def test_interior_and_closure():
    fam = generate_topology(S, [{"a"}, {"a", "b"}])
    inter, clo = interior_closure({"a", "c"}, fam)
    assert inter == {"a"}
    assert clo == S.full
    assert interior_closure({"b", "c"}, fam)[1] == {"b", "c"}
    assert neighbourhoods("c", fam) == [S.full]


def test_specialization_of_sierpinski():
    fam = generate_topology(FiniteSpace((0, 1)), [{1}])
    pre = specialization_preorder(fam)
    assert pre.leq(0, 1) and not pre.leq(1, 0)
    assert is_t0(fam)


def test_quotient_merges_indistinguishable_points():
    fam = generate_topology(S, [{"a", "b"}])
    rep, q, was_t0 = quotient_space(fam)
    assert not was_t0
    assert rep["b"] == "a"
    assert is_t0(q)


@st.composite
def edge_sets(draw):
    pts = ("p", "q", "r", "s")
    edges = draw(st.lists(st.tuples(st.sampled_from(pts), st.sampled_from(pts)), max_size=8))
    return FiniteSpace(pts), edges


@settings(max_examples=100, deadline=None)
@given(edge_sets())
def test_alexandroff_round_trip(data):
    space, edges = data
    pre = reflexive_transitive_closure(space, edges)
    assert is_preorder(pre)
    fam = alexandroff_opens(pre)
    assert is_open_family(fam)
    assert specialization_preorder(fam).pairs == pre.pairs
    assert set(fam.opens) == set(upsets(pre))


def test_open_family_detection():
    bad = OpenFamily(S, frozenset({frozenset(), S.full, frozenset({"a"}), frozenset({"b"})}))
    assert not is_open_family(bad)
