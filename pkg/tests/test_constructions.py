import random
from fractions import Fraction

import numpy as np
import pytest

from topodep import checker
from topodep.constructions import (
    DEFAULT_BETAS, ProbeRefused, TreeBudgetError, as_standard_model, beta_set, count_nodes,
    history_metrics, modal_equivalence_probe, parse_betas, pseudo_metrize, report_json,
    tree_truth, unravel, verify_representation,
)
from topodep.formula import ContAtom, UnifAtom, modal_depth, parse
from topodep.models import (
    StandardModel, check_standard, expand_standard, random_lud_model, rt_closure,
    with_uniform_atoms,
)

W = ("a", "b")


def chain_model():
    """a <=_x b, P(x) true at a only."""
    SM = StandardModel(("x",), {"P": 1}, W, {"x": rt_closure([("a", "b")], W)},
                       {parse("P(x)"): frozenset({"a"})})
    return expand_standard(SM)


def two_var_model():
    """a <= b for both x and y; K_y x holds everywhere but U(y;x) does not."""
    up = rt_closure([("a", "b")], W)
    SM = StandardModel(("x", "y"), {}, W, {"x": up, "y": up}, {})
    return with_uniform_atoms(expand_standard(SM), random.Random(0), p=0.0)


def constant_model():
    """x is constant: D_0 x holds."""
    tot = frozenset((s, w) for s in W for w in W)
    SM = StandardModel(("x",), {"P": 1}, W, {"x": tot}, {parse("P(x)"): frozenset(W)})
    return with_uniform_atoms(expand_standard(SM), random.Random(0))


def b(t):
    return Fraction(t)


def test_beta_sets():
    assert beta_set([0, "1/2", "1/4", "1/8"]) == DEFAULT_BETAS[:1] + tuple(sorted(DEFAULT_BETAS[1:]))
    assert parse_betas("0, 1/2, 1/4, 1/8")[0] == 0
    for bad in ([b("1/2"), b("1/4"), b("1/8")], [0, 1, b("1/2"), b("1/4")], [0, b("1/2")]):
        with pytest.raises(ValueError):
            beta_set(bad)


def test_depth_one_nodes():
    M = chain_model()
    T = unravel(M, "a", depth=1)
    assert T.n == count_nodes(M, "a", 1) == T.n
    assert T.history(0) == ("a",)
    assert T.level[0] == 0 and T.source.states[T.last[0]] == "a"
    hs = {T.history(i) for i in range(1, T.n)}
    for s in W:
        assert ("a", ((), b(0), s)) in hs
    # a =_x b fails, so no x-step with label 0 goes to b
    assert ("a", (("x",), b(0), "b")) not in hs
    assert ("a", (("x",), b("1/2"), "b")) in hs
    assert ("b",) not in hs
    for i in range(1, T.n):
        assert T.level[i] == 1 and T.parent[i] == 0


def test_budget_and_preconditions():
    M = chain_model()
    with pytest.raises(TreeBudgetError):
        unravel(M, "a", depth=3, max_nodes=50)
    with pytest.raises(ValueError):
        unravel(M, "zz", depth=1)
    with pytest.raises(ValueError):
        unravel(M, "a", depth=0)
    with pytest.raises(ValueError):
        pseudo_metrize(unravel(M, "a", depth=1))


def test_history_metrics_basics():
    M = with_uniform_atoms(chain_model(), random.Random(0))
    T = pseudo_metrize(unravel(M, "a", depth=2))
    m = history_metrics(T, 0, 0)
    assert m["density"] == 1
    rng = random.Random(1)
    for _ in range(50):
        i, j = rng.randrange(T.n), rng.randrange(T.n)
        hm = history_metrics(T, i, j)
        assert hm["close"][""]
        assert hm["interval"][0] == i and hm["interval"][-1] == j
        assert hm["dist"] == len(hm["interval"]) - 1
        assert T.distance((), i, j) == 0
        assert T.distance(("x",), i, i) == 0
    with pytest.raises(IndexError):
        history_metrics(T, 0, T.n)


def test_far_neighbour_has_distance_one():
    M = two_var_model()
    assert M.val[ContAtom(("y",), ("x",))] == M.full
    assert not M.val[UnifAtom(("y",), ("x",))]
    T = pseudo_metrize(unravel(M, "a", depth=2))
    h = T.node_of(("a", ((), b("1/8"), "a")))
    hp = T.node_of(("a", ((), b("1/8"), "a"), (("y",), b("1/4"), "b")))
    hm = history_metrics(T, h, hp)
    assert hm["x_roots"]["x"] == h and hm["density"] == b("1/8")
    assert not hm["close"]["x"]
    assert T.distance(("x",), h, hp) == 1


def test_close_neighbour_distance_is_its_label():
    M = two_var_model()
    T = pseudo_metrize(unravel(M, "a", depth=1))
    h = T.node_of(("a", (("x", "y"), b("1/4"), "b")))
    assert T.distance(("x",), 0, h) == b("1/4")
    assert T.distance(("x", "y"), 0, h) == b("1/4")


@pytest.mark.parametrize("seed", range(6))
def test_random_trees_pass_the_battery(seed):
    M = random_lud_model(2 + seed % 2, 1, seed=seed)
    T = pseudo_metrize(unravel(M, depth=2))
    assert verify_representation(T) == []


@pytest.mark.parametrize("make", [chain_model, two_var_model])
def test_hand_models_pass_the_battery(make):
    M = make()
    if M.language != "lud":
        M = with_uniform_atoms(M, random.Random(0))
    assert verify_representation(pseudo_metrize(unravel(M, "a", depth=2))) == []


def test_tree_is_a_standard_model():
    M = with_uniform_atoms(chain_model(), random.Random(0))
    T = unravel(M, "a", depth=1)
    SM = as_standard_model(T)
    assert check_standard(SM) == []
    P = expand_standard(SM)
    for Y in range(len(T.subs)):
        X = T.subs[Y]
        got = frozenset((f"h{i}", f"h{j}") for i, j in zip(*np.nonzero(T.path_leq(Y))))
        assert P.leq[X] == got
    phi = parse("K{x} P(x) | D{x}{}")
    truth = tree_truth(T, phi)
    for i in range(T.n):
        assert checker.eval(P, f"h{i}", phi) == truth[i]


def test_literal_construction_breaks_constant_variables():
    M = constant_model()
    repaired = pseudo_metrize(unravel(M, "a", depth=2))
    assert verify_representation(repaired) == []
    literal = pseudo_metrize(unravel(M, "a", depth=2, repair_constants=False))
    found = {(f.claim, f.item) for f in verify_representation(literal)}
    assert ("C3", "D-atom") in found


def test_corrupted_beta_label_is_reported():
    M = random_lud_model(2, 1, seed=2)
    T = pseudo_metrize(unravel(M, depth=2))
    i = next(k for k in range(1, T.n) if T.beta[k] == 0)
    T.beta[i] = 2
    T._cache.clear()
    assert verify_representation(T)


def test_corrupted_distance_is_reported():
    M = random_lud_model(2, 1, seed=2)
    T = pseudo_metrize(unravel(M, depth=2))
    x = T.src.sub_index[("x",)]
    D = T.dist_code(x)
    a, c = next((int(p), int(q)) for p, q in zip(*np.nonzero(D == 1)) if p < q)
    D[a, c] = D[c, a] = 0
    found = {(f.claim, f.item) for f in verify_representation(T)}
    assert found & {("C4", "3"), ("C4", "6")}
    assert report_json(verify_representation(T))[0].keys() == {"claim", "item", "witness", "detail"}


def test_probe_agreement_and_refusal():
    M = with_uniform_atoms(chain_model(), random.Random(0))
    T = unravel(M, "a", depth=2)
    for text in ("P(x)", "K{x} P(x)", "D{x}{}", "K{x}{}", "~K{x} P(x)"):
        t, s, ok = modal_equivalence_probe(T, 0, parse(text))
        assert ok, text
    with pytest.raises(ProbeRefused):
        modal_equivalence_probe(T, 0, parse("K{x} K{x} K{x} P(x)"))
    leaf = T.n - 1
    with pytest.raises(ProbeRefused):
        modal_equivalence_probe(T, leaf, parse("K{x} P(x)"))
    with pytest.raises(ProbeRefused):
        modal_equivalence_probe(T, 0, parse("U(x;x)"))


def test_probe_contract_fails_for_global_boxes():
    # D_0 ranges over frontier histories whose upsets are cut off by the
    # depth bound, so depth-respecting formulas can still disagree
    T = unravel(chain_model(), "a", depth=2)
    phi = parse("D{} ~K{x} P(x)")
    assert modal_depth(phi) == 2
    t, s, ok = modal_equivalence_probe(T, 0, phi)
    assert s and not t and not ok


def test_tree_json_export():
    M = with_uniform_atoms(chain_model(), random.Random(0))
    T = pseudo_metrize(unravel(M, "a", depth=1))
    obj = T.to_json(relations=True)
    assert obj["nodes"][0] == "a" and len(obj["nodes"]) == T.n
    assert set(obj["relations"]) == {"", "x"}
    assert all(isinstance(r[2], str) for r in obj["dist"]["x"])
