"""Finite models: general preorder models, standard preorder models given by
basic preorders, and standard pseudo-metric models given by basic rational
pseudo-distances.

Relations are frozensets of (state, state) pairs keyed by variable set.  The
valuation maps atom formulas (predicate atoms and the D/K/U dependence atoms)
to frozensets of states.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from . import finitetopo as ft
from .formula import (
    ContAtom, DepAtom, Formula, PredAtom, UnifAtom, VarSet, is_subset, parse, parse_vkey,
    subsets, to_text, union, varset, vkey,
)

VAR_NAMES = ("x", "y", "z", "u", "v", "w")


class ModelError(ValueError):
    """Malformed model input."""


# ---------------------------------------------------------------------------
# presentations


@dataclass(eq=False)
class PreorderModel:
    variables: VarSet
    predicates: dict
    states: tuple
    eq: dict   # VarSet -> frozenset of pairs
    leq: dict  # VarSet -> frozenset of pairs
    val: dict  # atom -> frozenset of states
    language: str = "lcd"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PreorderModel):
            return NotImplemented
        return (self.variables, self.predicates, self.states, self.eq, self.leq, self.val,
                self.language) == (other.variables, other.predicates, other.states, other.eq,
                                   other.leq, other.val, other.language)

    @property
    def full(self) -> frozenset:
        return frozenset(self.states)

    def index(self) -> "ModelIndex":
        idx = self._cache.get("index")
        if idx is None:
            idx = self._cache["index"] = ModelIndex(self)
        return idx

    def truth(self, atom: Formula) -> frozenset:
        try:
            return self.val[atom]
        except KeyError:
            raise ModelError(f"atom outside valuation domain: {to_text(atom)}") from None

    def pred_atoms(self) -> list:
        return sorted((a for a in self.val if isinstance(a, PredAtom)), key=to_text)


class ModelIndex:
    """Bitmask view of a preorder model: state i is bit i."""

    def __init__(self, M: PreorderModel):
        self.states = M.states
        self.pos = {s: i for i, s in enumerate(M.states)}
        self.n = len(M.states)
        self.all = (1 << self.n) - 1
        self.eq_up = {X: self._succ(r) for X, r in M.eq.items()}
        self.leq_up = {X: self._succ(r) for X, r in M.leq.items()}
        self.val = {a: self.mask(v) for a, v in M.val.items()}

    def _succ(self, pairs) -> list:
        out = [0] * self.n
        for s, w in pairs:
            out[self.pos[s]] |= 1 << self.pos[w]
        return out

    def mask(self, states: Iterable) -> int:
        m = 0
        for s in states:
            m |= 1 << self.pos[s]
        return m

    def unmask(self, m: int) -> frozenset:
        return frozenset(s for i, s in enumerate(self.states) if m >> i & 1)


@dataclass(eq=True)
class StandardModel:
    variables: VarSet
    predicates: dict
    states: tuple
    basic_leq: dict  # var -> frozenset of pairs (reflexive, transitive)
    val: dict        # PredAtom -> frozenset


@dataclass(eq=True)
class PseudoMetricModel:
    variables: VarSet
    predicates: dict
    states: tuple
    basic_dist: dict  # var -> {(s, w): Fraction} over all ordered pairs
    val: dict


@dataclass
class ConcreteModel:
    """Variables as maps into value spaces with T0 topologies."""
    states: tuple
    values: dict      # var -> tuple of values (var, representative state)
    assign: dict      # var -> {state: value}
    topology: dict    # var -> OpenFamily on the values
    interp: dict      # predicate name -> frozenset of value tuples

    def holds(self, atom: PredAtom, s) -> bool:
        return tuple(self.assign[x][s] for x in atom.args) in self.interp.get(atom.pred, frozenset())


# ---------------------------------------------------------------------------
# relation helpers


def total(states: Sequence) -> frozenset:
    return frozenset((s, w) for s in states for w in states)


def identity(states: Sequence) -> frozenset:
    return frozenset((s, s) for s in states)


def up(rel: frozenset, s) -> frozenset:
    return frozenset(w for (a, w) in rel if a == s)


def _succ_sets(rel, states) -> dict:
    out = {s: set() for s in states}
    for a, b in rel:
        out[a].add(b)
    return out


def is_equivalence(rel, states) -> tuple | None:
    """None if rel is an equivalence on states, else a witness tuple."""
    succ = _succ_sets(rel, states)
    for s in states:
        if s not in succ[s]:
            return (s,)
    for a, b in rel:
        if a not in succ[b]:
            return (a, b)
    for a in states:
        for b in succ[a]:
            for c in succ[b]:
                if c not in succ[a]:
                    return (a, b, c)
    return None


def is_preorder_rel(rel, states) -> tuple | None:
    succ = _succ_sets(rel, states)
    for s in states:
        if s not in succ[s]:
            return (s,)
    for a in states:
        for b in succ[a]:
            for c in succ[b]:
                if c not in succ[a]:
                    return (a, b, c)
    return None


def rt_closure(edges: Iterable, states: Sequence) -> frozenset:
    return ft.reflexive_transitive_closure(ft.FiniteSpace(tuple(states)), edges).pairs


def classes(rel, states) -> list:
    """Equivalence classes in state order (each a tuple)."""
    seen: set = set()
    out = []
    for s in states:
        if s in seen:
            continue
        cls = tuple(w for w in states if (s, w) in rel)
        seen.update(cls)
        out.append(cls)
    return out


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    condition: str
    witness: tuple
    detail: str = ""

    def to_json(self) -> dict:
        return {"condition": self.condition, "witness": list(self.witness), "detail": self.detail}


def dependence_atoms(V: VarSet, lang: str) -> list:
    subs = subsets(V)
    out = [DepAtom(X, Y) for X in subs for Y in subs]
    out += [ContAtom(X, Y) for X in subs for Y in subs]
    if lang == "lud":
        out += [UnifAtom(X, Y) for X in subs for Y in subs]
    return out


def _check_structure(M: PreorderModel) -> None:
    if not M.states:
        raise ModelError("empty state set")
    if len(set(M.states)) != len(M.states):
        raise ModelError("duplicate states")
    if M.language not in ("lcd", "lud"):
        raise ModelError(f"unknown language {M.language!r}")
    S = set(M.states)
    for X in subsets(M.variables):
        if X not in M.eq or X not in M.leq:
            raise ModelError(f"missing relation for variable set {{{vkey(X)}}}")
    for rel in list(M.eq.values()) + list(M.leq.values()):
        for a, b in rel:
            if a not in S or b not in S:
                raise ModelError(f"pair ({a}, {b}) mentions an unknown state")
    for a in dependence_atoms(M.variables, M.language):
        if a not in M.val:
            raise ModelError(f"missing valuation for {to_text(a)}")
    for a, v in M.val.items():
        if not set(v) <= S:
            raise ModelError(f"valuation of {to_text(a)} mentions an unknown state")
        if isinstance(a, UnifAtom) and M.language != "lud":
            raise ModelError("U-atoms are only allowed in lud models")
        if isinstance(a, PredAtom):
            if M.predicates.get(a.pred) != len(a.args):
                raise ModelError(f"predicate atom {to_text(a)} does not match declared arity")
            if not set(a.args) <= set(M.variables):
                raise ModelError(f"predicate atom {to_text(a)} uses unknown variables")


def validate_preorder_model(M: PreorderModel, first_only: bool = False) -> list:
    """List every violated condition of the preorder-model definition.

    Conditions are labelled "1" to "11" as in the definition; "E" and "P" flag
    =_X that is not an equivalence and <=_X that is not a preorder.  In lud
    mode "UK" additionally requires ||K_0 Y|| to be contained in ||U(X;Y)||,
    which is needed for the Uniformity of Knowledge axiom to be sound.
    An empty list means M is a preorder model.
    """
    _check_structure(M)
    out: list = []
    W = M.states
    full = M.full
    subs = subsets(M.variables)
    lud = M.language == "lud"

    def add(cond, wit, detail=""):
        out.append(Violation(cond, tuple(wit), detail))
        if first_only:
            raise _Stop

    try:
        for X in subs:
            w = is_equivalence(M.eq[X], W)
            if w is not None:
                add("E", w, f"={{{vkey(X)}}} is not an equivalence")
            w = is_preorder_rel(M.leq[X], W)
            if w is not None:
                add("P", w, f"<={{{vkey(X)}}} is not a preorder")
        # (1)
        for a in M.pred_atoms():
            ext = M.val[a]
            for X in subs:
                if not set(a.args) <= set(X):
                    continue
                for s, w in sorted(M.eq[X]):
                    if (s in ext) != (w in ext):
                        add("1", (s, w), f"{to_text(a)} under ={{{vkey(X)}}}")
                        break
        # (2)
        for name, rel in (("=", M.eq[()]), ("<=", M.leq[()])):
            for s in W:
                for w in W:
                    if (s, w) not in rel:
                        add("2", (s, w), f"{name}{{}} not total")
                        break
                else:
                    continue
                break
        # (3), (5), (6)
        for X in subs:
            for Y in subs:
                d = M.val[DepAtom(X, Y)]
                for s, w in sorted(M.eq[X]):
                    if s in d and ((s, w) not in M.eq[Y] or w not in d):
                        add("3", (s, w), f"X={vkey(X)} Y={vkey(Y)}")
                        break
                k = M.val[ContAtom(X, Y)]
                for s, w in sorted(M.leq[X]):
                    if s in k and w not in k:
                        add("5", (s, w), f"X={vkey(X)} Y={vkey(Y)}")
                        break
                for s, w in sorted(M.leq[X]):
                    if s in k and (s, w) not in M.leq[Y]:
                        add("6", (s, w), f"X={vkey(X)} Y={vkey(Y)}")
                        break
        # (4)
        kinds = [DepAtom, ContAtom] + ([UnifAtom] if lud else [])
        for kind in kinds:
            tag = kind.__name__
            for X in subs:
                for Y in subs:
                    v = M.val[kind(X, Y)]
                    if is_subset(Y, X) and v != full:
                        add("4", tuple(sorted(full - v)), f"{tag} inclusion X={vkey(X)} Y={vkey(Y)}")
                    for Z in subs:
                        vz = M.val[kind(X, Z)]
                        vyz = M.val[kind(X, union(Y, Z))]
                        if vyz != (v & vz):
                            add("4", tuple(sorted(vyz ^ (v & vz))),
                                f"{tag} additivity X={vkey(X)} Y={vkey(Y)} Z={vkey(Z)}")
                        bad = (v & M.val[kind(Y, Z)]) - vz
                        if bad:
                            add("4", tuple(sorted(bad)),
                                f"{tag} transitivity X={vkey(X)} Y={vkey(Y)} Z={vkey(Z)}")
        # (7)
        for X in subs:
            bad = M.eq[X] - M.leq[X]
            if bad:
                add("7", min(bad), f"X={vkey(X)}")
        # (8), (9), (10), (11), UK
        for X in subs:
            for Y in subs:
                bad = M.val[ContAtom(X, Y)] - M.val[DepAtom(X, Y)]
                if bad:
                    add("8", (min(bad),), f"X={vkey(X)} Y={vkey(Y)}")
        for Y in subs:
            bad = M.val[DepAtom((), Y)] - M.val[ContAtom((), Y)]
            if bad:
                add("9", (min(bad),), f"Y={vkey(Y)}")
        if lud:
            for X in subs:
                for Y in subs:
                    u = M.val[UnifAtom(X, Y)]
                    if u and u != full:
                        add("10", (min(u), min(full - u)), f"X={vkey(X)} Y={vkey(Y)}")
                    bad = u - M.val[ContAtom(X, Y)]
                    if bad:
                        add("11", (min(bad),), f"X={vkey(X)} Y={vkey(Y)}")
                    bad = M.val[ContAtom((), Y)] - u
                    if bad:
                        add("UK", (min(bad),), f"X={vkey(X)} Y={vkey(Y)}")
    except _Stop:
        pass
    return out


class _Stop(Exception):
    pass


def is_preorder_model(M: PreorderModel) -> bool:
    return not validate_preorder_model(M, first_only=True)


# ---------------------------------------------------------------------------
# standard models


def standard_leq(SM: StandardModel, X: VarSet) -> frozenset:
    rel = total(SM.states)
    for x in X:
        rel = rel & SM.basic_leq[x]
    return rel


def check_standard(SM: StandardModel) -> list:
    """Violations of the standard-model invariants (preorders + condition (0))."""
    out = []
    if not SM.states:
        raise ModelError("empty state set")
    for x in SM.variables:
        if x not in SM.basic_leq:
            raise ModelError(f"missing preorder for variable {x}")
        w = is_preorder_rel(SM.basic_leq[x], SM.states)
        if w is not None:
            out.append(Violation("P", w, f"<={x} is not a preorder"))
    for a, ext in sorted(SM.val.items(), key=lambda kv: to_text(kv[0])):
        X = varset(a.args)
        L = standard_leq(SM, X)
        for s, w in sorted(L):
            if (w, s) in L and (s in ext) != (w in ext):
                out.append(Violation("0", (s, w), to_text(a)))
                break
    return out


def expand_standard(SM: StandardModel) -> PreorderModel:
    """The preorder model determined by a standard model's basic preorders."""
    bad = check_standard(SM)
    if bad:
        raise ModelError(f"standard model invariant violated: {bad[0]}")
    W = SM.states
    subs = subsets(SM.variables)
    leq = {X: standard_leq(SM, X) for X in subs}
    eq = {X: frozenset((s, w) for (s, w) in leq[X] if (w, s) in leq[X]) for X in subs}
    upl = {X: _succ_sets(leq[X], W) for X in subs}
    upe = {X: _succ_sets(eq[X], W) for X in subs}
    val = dict(SM.val)
    for X in subs:
        for Y in subs:
            val[DepAtom(X, Y)] = frozenset(s for s in W if upe[X][s] <= upe[Y][s])
            # s <= t <= w (all in X) implies t <=_Y w: every t above s has
            # its X-upset inside its Y-upset
            good_t = {t for t in W if upl[X][t] <= upl[Y][t]}
            val[ContAtom(X, Y)] = frozenset(s for s in W if upl[X][s] <= good_t)
    return PreorderModel(SM.variables, dict(SM.predicates), W, eq, leq, val, "lcd")


def extract_dependence_model(SM: StandardModel) -> ConcreteModel:
    W = SM.states
    values, assign, topo = {}, {}, {}
    for x in SM.variables:
        L = SM.basic_leq[x]
        E = frozenset((s, w) for (s, w) in L if (w, s) in L)
        rep = {}
        for cls in classes(E, W):
            for s in cls:
                rep[s] = (x, cls[0])
        vals = tuple(dict.fromkeys(rep[s] for s in W))
        values[x] = vals
        assign[x] = rep
        pre = ft.Preorder(ft.FiniteSpace(tuple(W)), L)
        opens = frozenset(frozenset(rep[s] for s in u) for u in ft.upsets(pre))
        topo[x] = ft.OpenFamily(ft.FiniteSpace(vals), opens)
    interp: dict = {}
    for a, ext in SM.val.items():
        rows = interp.setdefault(a.pred, set())
        for w in ext:
            rows.add(tuple(assign[x][w] for x in a.args))
    for p in SM.predicates:
        interp.setdefault(p, set())
    return ConcreteModel(tuple(W), values, assign, topo, {p: frozenset(r) for p, r in interp.items()})


# ---------------------------------------------------------------------------
# pseudo-metric models


def dist_X(PM: PseudoMetricModel, X: VarSet, s, w) -> Fraction:
    return max((PM.basic_dist[x][(s, w)] for x in X), default=Fraction(0))


def check_pseudometric(PM: PseudoMetricModel) -> list:
    out = []
    W = PM.states
    if not W:
        raise ModelError("empty state set")
    for x in PM.variables:
        d = PM.basic_dist.get(x)
        if d is None:
            raise ModelError(f"missing distance for variable {x}")
        for s in W:
            for w in W:
                if (s, w) not in d:
                    raise ModelError(f"missing distance d_{x}({s},{w})")
                if d[(s, w)] < 0:
                    out.append(Violation("M", (s, w), f"negative distance for {x}"))
        for s in W:
            if d[(s, s)] != 0:
                out.append(Violation("M", (s,), f"d_{x}(s,s) != 0"))
            for w in W:
                if d[(s, w)] != d[(w, s)]:
                    out.append(Violation("M", (s, w), f"d_{x} not symmetric"))
                for t in W:
                    if d[(s, w)] > d[(s, t)] + d[(t, w)]:
                        out.append(Violation("M", (s, t, w), f"triangle inequality for {x}"))
    for a, ext in sorted(PM.val.items(), key=lambda kv: to_text(kv[0])):
        X = varset(a.args)
        for s in W:
            for w in W:
                if dist_X(PM, X, s, w) == 0 and (s in ext) != (w in ext):
                    out.append(Violation("0", (s, w), to_text(a)))
    return out


def _candidates(values: Iterable[Fraction]) -> list:
    """Representatives of every distinct behaviour of a strict threshold r > 0
    against a finite set of distances."""
    pos = sorted({v for v in values if v > 0})
    return pos + [(pos[-1] if pos else Fraction(0)) + 1]


def _k_clause(PM, X, Y, s, cands) -> bool:
    W = PM.states
    dX = lambda a, b: dist_X(PM, X, a, b)
    dY = lambda a, b: dist_X(PM, Y, a, b)
    for d0 in cands:
        ball = [t for t in W if dX(s, t) < d0]
        ok = all(
            any(all(not (dX(t, w) < dl) or dY(t, w) < eps for w in ball) for dl in cands)
            for t in ball for eps in cands
        )
        if ok:
            return True
    return False


def _u_clause(PM, X, Y, cands) -> bool:
    W = PM.states
    return all(
        any(all(not (dist_X(PM, X, t, w) < dl) or dist_X(PM, Y, t, w) < eps
                for t in W for w in W) for dl in cands)
        for eps in cands
    )


def pseudometric_atoms_direct(PM: PseudoMetricModel) -> dict:
    """D/K/U valuations by evaluating the epsilon-delta clauses directly over
    the finitely many distinct thresholds (cross-check for expand_pseudometric)."""
    W = PM.states
    subs = subsets(PM.variables)
    allv = [PM.basic_dist[x][p] for x in PM.variables for p in PM.basic_dist[x]]
    cands = _candidates(allv)
    val = {}
    for X in subs:
        for Y in subs:
            val[DepAtom(X, Y)] = frozenset(
                s for s in W
                if all(dist_X(PM, X, s, w) != 0 or dist_X(PM, Y, s, w) == 0 for w in W))
            val[ContAtom(X, Y)] = frozenset(s for s in W if _k_clause(PM, X, Y, s, cands))
            val[UnifAtom(X, Y)] = frozenset(W) if _u_clause(PM, X, Y, cands) else frozenset()
    return val


def expand_pseudometric(PM: PseudoMetricModel) -> PreorderModel:
    """Preorder model of a standard pseudo-metric model.

    On a finite state set every ball of small enough radius is an
    indistinguishability class, so K_XY reduces to D_XY and U(X;Y) holds
    (everywhere) iff D_XY holds everywhere.
    """
    bad = check_pseudometric(PM)
    if bad:
        raise ModelError(f"pseudo-metric invariant violated: {bad[0]}")
    W = PM.states
    subs = subsets(PM.variables)
    eq = {X: frozenset((s, w) for s in W for w in W if dist_X(PM, X, s, w) == 0) for X in subs}
    val = dict(PM.val)
    full = frozenset(W)
    cls = {X: _succ_sets(eq[X], W) for X in subs}
    for X in subs:
        for Y in subs:
            d = frozenset(s for s in W if cls[X][s] <= cls[Y][s])
            val[DepAtom(X, Y)] = d
            val[ContAtom(X, Y)] = d
            val[UnifAtom(X, Y)] = full if d == full else frozenset()
    return PreorderModel(PM.variables, dict(PM.predicates), W, eq, dict(eq), val, "lud")


# ---------------------------------------------------------------------------
# generators


def _pred_atoms(V: VarSet, preds: dict) -> list:
    out = []
    for p in sorted(preds):
        for args in itertools.product(V, repeat=preds[p]):
            out.append(PredAtom(p, tuple(args)))
    return out


def _repair(val: dict, eq_of) -> dict:
    out = {}
    for a, ext in val.items():
        E = eq_of(varset(a.args))
        out[a] = frozenset(w for (s, w) in E if s in ext)
    return out


def random_standard_model(n_states: int, n_vars: int, preds: dict | None = None,
                          seed: int = 0, edge_prob: float | None = None) -> StandardModel:
    """Deterministic random standard model: basic preorders are closures of
    random edge sets; predicate truth is saturated across the relevant
    indistinguishability classes."""
    if n_states < 1 or n_vars < 0:
        raise ValueError("need at least one state")
    rng = random.Random(seed)
    preds = {"P": 1} if preds is None else dict(preds)
    V = VAR_NAMES[:n_vars]
    W = tuple(f"s{i}" for i in range(n_states))
    basic = {}
    for x in V:
        p = rng.choice([0.15, 0.3, 0.5]) if edge_prob is None else edge_prob
        edges = [(a, b) for a in W for b in W if a != b and rng.random() < p]
        basic[x] = rt_closure(edges, W)
    raw = {a: frozenset(s for s in W if rng.random() < 0.5) for a in _pred_atoms(V, preds)}
    SM0 = StandardModel(V, preds, W, basic, {})

    def eq_of(X):
        L = standard_leq(SM0, X)
        return frozenset((s, w) for (s, w) in L if (w, s) in L)

    return StandardModel(V, preds, W, basic, _repair(raw, eq_of))


def random_pseudometric_model(n_states: int, n_vars: int, preds: dict | None = None,
                              seed: int = 0) -> PseudoMetricModel:
    """Distances are |c(s) - c(w)| / 2 for random small integer coordinates."""
    rng = random.Random(seed)
    preds = {"P": 1} if preds is None else dict(preds)
    V = VAR_NAMES[:n_vars]
    W = tuple(f"s{i}" for i in range(n_states))
    dist = {}
    for x in V:
        spread = rng.choice([1, 2, 3])
        c = {s: rng.randint(0, spread) for s in W}
        dist[x] = {(s, w): Fraction(abs(c[s] - c[w]), 2) for s in W for w in W}
    PM0 = PseudoMetricModel(V, preds, W, dist, {})
    raw = {a: frozenset(s for s in W if rng.random() < 0.5) for a in _pred_atoms(V, preds)}

    def eq_of(X):
        return frozenset((s, w) for s in W for w in W if dist_X(PM0, X, s, w) == 0)

    return PseudoMetricModel(V, preds, W, dist, _repair(raw, eq_of))


def armstrong_closure(pairs: Iterable[tuple], V: VarSet) -> set:
    """Closure of a set of (X, Y) pairs under Inclusion, Additivity and Transitivity."""
    subs = subsets(V)
    R = set(pairs) | {(X, Y) for X in subs for Y in subs if is_subset(Y, X)}
    changed = True
    while changed:
        changed = False
        for (X, Y) in list(R):
            for (X2, Z) in list(R):
                if X2 == X and (X, union(Y, Z)) not in R:
                    R.add((X, union(Y, Z)))
                    changed = True
                if X2 == Y and (X, Z) not in R:
                    R.add((X, Z))
                    changed = True
    return R


def with_uniform_atoms(M: PreorderModel, rng: random.Random, p: float = 0.5) -> PreorderModel:
    """Extend an lcd preorder model with a U-valuation satisfying (4), (10),
    (11) and Uniformity of Knowledge: a random Armstrong-closed set of pairs
    among those where K_XY holds everywhere."""
    subs = subsets(M.variables)
    full = M.full
    cand = [(X, Y) for X in subs for Y in subs if M.val[ContAtom(X, Y)] == full]
    forced = [(X, Y) for X in subs for Y in subs if M.val[ContAtom((), Y)] == full]
    chosen = [c for c in cand if rng.random() < p]
    R = armstrong_closure(forced + chosen, M.variables)
    val = dict(M.val)
    for X in subs:
        for Y in subs:
            val[UnifAtom(X, Y)] = full if (X, Y) in R else frozenset()
    return PreorderModel(M.variables, dict(M.predicates), M.states, dict(M.eq), dict(M.leq), val, "lud")


def random_lud_model(n_states: int, n_vars: int, preds: dict | None = None, seed: int = 0) -> PreorderModel:
    SM = random_standard_model(n_states, n_vars, preds, seed)
    return with_uniform_atoms(expand_standard(SM), random.Random(seed * 7919 + 1))


# ---------------------------------------------------------------------------
# JSON


def _pairs_out(rel, states, symmetric=False) -> list:
    order = {s: i for i, s in enumerate(states)}
    rows = []
    for a, b in rel:
        if a == b:
            continue
        if symmetric and order[a] > order[b]:
            continue
        rows.append([a, b])
    return sorted(rows, key=lambda r: (order[r[0]], order[r[1]]))


def _states_out(ext, states) -> list:
    return [s for s in states if s in ext]


def _pairs_in(rows, states, symmetric=False, what="relation") -> frozenset:
    S = set(states)
    seen = set()
    for r in rows:
        if not isinstance(r, list) or len(r) != 2:
            raise ModelError(f"bad pair {r!r} in {what}")
        a, b = r
        if a not in S or b not in S:
            raise ModelError(f"unknown state in pair {r!r} of {what}")
        if (a, b) in seen:
            raise ModelError(f"duplicate pair {r!r} in {what}")
        seen.add((a, b))
    rel = set(seen) | {(s, s) for s in states}
    if symmetric:
        rel |= {(b, a) for (a, b) in seen}
    return frozenset(rel)


def _predvals_out(val, states) -> dict:
    return {to_text(a): _states_out(v, states)
            for a, v in sorted(val.items(), key=lambda kv: to_text(kv[0])) if isinstance(a, PredAtom)}


def _predvals_in(d, predicates, states) -> dict:
    out = {}
    S = set(states)
    for key, ext in d.items():
        try:
            a = parse(key, predicates)
        except ValueError as e:
            raise ModelError(f"bad valuation key {key!r}: {e}") from None
        if not isinstance(a, PredAtom):
            raise ModelError(f"valuation key {key!r} is not a predicate atom")
        if len(set(ext)) != len(ext) or not set(ext) <= S:
            raise ModelError(f"bad state list for {key!r}")
        out[a] = frozenset(ext)
    return out


_DEP_KINDS = (("D", DepAtom), ("K", ContAtom), ("U", UnifAtom))


def model_to_json(M) -> dict:
    """Canonical JSON object for any of the three presentations."""
    if isinstance(M, StandardModel):
        return {
            "kind": "standard-preorder", "language": "lcd",
            "variables": list(M.variables), "predicates": dict(sorted(M.predicates.items())),
            "states": list(M.states),
            "leq": {x: _pairs_out(M.basic_leq[x], M.states) for x in M.variables},
            "valuation": _predvals_out(M.val, M.states),
        }
    if isinstance(M, PseudoMetricModel):
        order = {s: i for i, s in enumerate(M.states)}
        dist = {}
        for x in M.variables:
            rows = []
            for (a, b), v in M.basic_dist[x].items():
                if order[a] < order[b]:
                    rows.append([a, b, _frac_out(v)])
            dist[x] = sorted(rows, key=lambda r: (order[r[0]], order[r[1]]))
        return {
            "kind": "pseudo-metric", "language": "lud",
            "variables": list(M.variables), "predicates": dict(sorted(M.predicates.items())),
            "states": list(M.states), "dist": dist,
            "valuation": _predvals_out(M.val, M.states),
        }
    subs = subsets(M.variables)
    dep = {}
    for tag, kind in _DEP_KINDS:
        if kind is UnifAtom and M.language != "lud":
            continue
        dep[tag] = {f"{vkey(X)}|{vkey(Y)}": _states_out(M.val[kind(X, Y)], M.states)
                    for X in subs for Y in subs}
    return {
        "kind": "preorder", "language": M.language,
        "variables": list(M.variables), "predicates": dict(sorted(M.predicates.items())),
        "states": list(M.states),
        "eq": {vkey(X): _pairs_out(M.eq[X], M.states, symmetric=True) for X in subs},
        "leq": {vkey(X): _pairs_out(M.leq[X], M.states) for X in subs},
        "dep": dep,
        "valuation": _predvals_out(M.val, M.states),
    }


def _frac_out(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ModelError(f"bad rational {text!r}") from None


def model_from_json(d: dict):
    try:
        kind = d["kind"]
        V = varset(d.get("variables", []))
        if list(V) != list(d.get("variables", [])):
            raise ModelError("variables must be listed in sorted order without duplicates")
        preds = {str(k): int(v) for k, v in d.get("predicates", {}).items()}
        W = tuple(d["states"])
    except (KeyError, TypeError) as e:
        raise ModelError(f"malformed model: {e}") from None
    if not W:
        raise ModelError("empty state set")
    if len(set(W)) != len(W):
        raise ModelError("duplicate states")
    val = _predvals_in(d.get("valuation", {}), preds, W)
    if kind == "standard-preorder":
        leq = d.get("leq", {})
        basic = {x: _pairs_in(leq.get(x, []), W, what=f"leq[{x}]") for x in V}
        extra = set(leq) - set(V)
        if extra:
            raise ModelError(f"unknown variables in leq: {sorted(extra)}")
        return StandardModel(V, preds, W, basic, val)
    if kind == "pseudo-metric":
        dist = {}
        for x in V:
            rows = d.get("dist", {}).get(x, [])
            dx = {(s, s): Fraction(0) for s in W}
            for r in rows:
                if not isinstance(r, list) or len(r) != 3:
                    raise ModelError(f"bad distance row {r!r}")
                a, b, v = r
                if a not in W or b not in W:
                    raise ModelError(f"unknown state in {r!r}")
                if (a, b) in dx and a != b:
                    raise ModelError(f"duplicate distance {r!r}")
                f = parse_fraction(str(v))
                if (b, a) in dx and dx[(b, a)] != f:
                    raise ModelError(f"asymmetric distance {r!r}")
                dx[(a, b)] = dx[(b, a)] = f
            if len(dx) != len(W) ** 2:
                raise ModelError(f"incomplete distance table for {x}")
            dist[x] = dx
        return PseudoMetricModel(V, preds, W, dist, val)
    if kind == "preorder":
        lang = d.get("language", "lcd")
        subs = subsets(V)
        eq, leq = {}, {}
        for X in subs:
            k = vkey(X)
            eq[X] = _pairs_in(d.get("eq", {}).get(k, []), W, symmetric=True, what=f"eq[{k}]")
            leq[X] = _pairs_in(d.get("leq", {}).get(k, []), W, what=f"leq[{k}]")
        for tag, kind_ in _DEP_KINDS:
            table = d.get("dep", {}).get(tag)
            if table is None:
                continue
            for key, ext in table.items():
                if key.count("|") != 1:
                    raise ModelError(f"bad dependence key {key!r}")
                a, b = key.split("|")
                X, Y = parse_vkey(a), parse_vkey(b)
                if not (set(X) <= set(V) and set(Y) <= set(V)):
                    raise ModelError(f"dependence key {key!r} uses unknown variables")
                if len(set(ext)) != len(ext) or not set(ext) <= set(W):
                    raise ModelError(f"bad state list for {tag}[{key}]")
                val[kind_(X, Y)] = frozenset(ext)
        M = PreorderModel(V, preds, W, eq, leq, val, lang)
        _check_structure(M)
        return M
    raise ModelError(f"unknown model kind {kind!r}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def dump_model(M) -> str:
    return dumps(model_to_json(M))


def load_model(text: str):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"invalid JSON: {e}") from None
    return model_from_json(d)


def as_preorder_model(M) -> PreorderModel:
    if isinstance(M, PreorderModel):
        return M
    if isinstance(M, StandardModel):
        return expand_standard(M)
    if isinstance(M, PseudoMetricModel):
        return expand_pseudometric(M)
    raise TypeError(f"not a model: {type(M).__name__}")
