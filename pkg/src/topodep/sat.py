"""Decision procedure for LFD / LCD / LUD by type elimination over the finite
closure set, with certificate extraction and a brute-force oracle.

Types are truth assignments to the closure set that respect the local
saturation constraints.  Types are grouped into universes that agree on the
=_0 signature and on the U-atoms; inside a universe, types whose diamonds lack
a witness are removed until a fixpoint is reached.  Every SAT answer carries a
preorder model that is re-checked by the validator and the model checker.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import checker
from .formula import (
    And, ContAtom, DepAtom, DepMod, Formula, KnowMod, Not, PredAtom, UnifAtom,
    closure, expand_abbrev, in_language, is_subset, language, neg, predicates, subsets,
    to_text, union, variables, walk,
)
from .models import (
    PreorderModel, classes, is_preorder_rel, total, validate_preorder_model,
)

DEFAULT_MAX_CLOSURE = 400
DEFAULT_MAX_TYPES = 200_000


class SatResourceError(RuntimeError):
    """Closure set or type space beyond the configured budget."""


class SoundnessError(RuntimeError):
    """A certificate was rejected by the validator or the checker (internal bug)."""


@dataclass
class SatResult:
    status: str                      # "SAT" or "UNSAT"
    model: PreorderModel | None = None
    state: str | None = None
    trace: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.status == "SAT"


@dataclass
class ValidResult:
    status: str                      # "VALID" or "NOT_VALID"
    countermodel: PreorderModel | None = None
    state: str | None = None
    trace: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.status == "VALID"


_BASIC = (PredAtom, DepAtom, ContAtom, UnifAtom, DepMod, KnowMod)


@dataclass(frozen=True)
class Rule:
    premises: tuple
    conclusion: Formula
    name: str


def _default_lang(phi: Formula) -> str:
    lang = language(phi)
    if lang == "ext":
        raise ValueError("extended atoms k, I, Ig have no decision procedure")
    return lang


def saturation_rules(phi_set) -> list:
    """Sound local constraints over the closure set (premises => conclusion)."""
    members = phi_set.members
    V = phi_set.variables
    lang = phi_set.language
    subs = subsets(V)
    rules: list = []

    def add(prem, concl, name):
        if concl in members and all(p in members for p in prem):
            rules.append(Rule(tuple(prem), concl, name))

    kinds = [DepAtom] + ([ContAtom] if lang != "lfd" else []) + ([UnifAtom] if lang == "lud" else [])
    for kind in kinds:
        tag = {DepAtom: "", ContAtom: "K-", UnifAtom: "U-"}[kind]
        for X in subs:
            for Y in subs:
                if is_subset(Y, X):
                    add((), kind(X, Y), tag + "Inclusion")
                for Z in subs:
                    add((kind(X, Y), kind(X, Z)), kind(X, union(Y, Z)), tag + "Additivity")
                    add((kind(X, Y), kind(Y, Z)), kind(X, Z), tag + "Transitivity")
                    if is_subset(Z, Y):
                        add((kind(X, Y),), kind(X, Z), tag + "Additivity")
    for X in subs:
        for Y in subs:
            add((DepAtom(X, Y),), DepMod(X, DepAtom(X, Y)), "DeterminedDependence")
            if lang != "lfd":
                add((ContAtom(X, Y),), KnowMod(X, ContAtom(X, Y)), "KnowabilityOfEpistemicDependence")
                add((ContAtom(X, Y),), DepAtom(X, Y), "KnowableDependence")
                add((ContAtom(X, Y),), DepMod(X, ContAtom(X, Y)), "KnowableDetermination")
            if lang == "lud":
                add((UnifAtom(X, Y),), ContAtom(X, Y), "UniformityImpliesContinuity")
                add((ContAtom((), Y),), UnifAtom(X, Y), "UniformityOfKnowledge")
        if lang != "lfd":
            add((DepAtom((), X),), ContAtom((), X), "KnowledgeOfConstants")
    for f in phi_set.ordered:
        if isinstance(f, DepMod):
            X, psi = f.X, f.sub
            add((f,), psi, "Factivity")
            add((f,), DepMod(X, f), "Axiom4")
            add((Not(f),), DepMod(X, Not(f)), "Axiom5")
            for Y in subs:
                add((DepAtom(Y, X), f), DepMod(Y, psi), "Transfer")
            if X == () and lang != "lfd":
                add((f,), KnowMod((), psi), "KnowledgeOfNecessity")
        elif isinstance(f, KnowMod):
            X, psi = f.X, f.sub
            add((f,), psi, "Veracity")
            add((f,), KnowMod(X, f), "PositiveIntrospection")
            add((f,), DepMod(X, psi), "KnowableDetermination")
            add((f,), DepMod(X, f), "KnowableDetermination")
            for Y in subs:
                add((ContAtom(Y, X), f), KnowMod(Y, psi), "KnowabilityTransfer")
        elif isinstance(f, PredAtom):
            A = tuple(sorted(set(f.args)))
            add((f,), DepMod(A, f), "DeterminedAtoms")
            add((Not(f),), DepMod(A, Not(f)), "DeterminedAtoms")
    return rules


class TypeSpace:
    """Enumerated types of a closure set, as bitmasks over its members."""

    def __init__(self, phi_set, max_types: int = DEFAULT_MAX_TYPES):
        self.phi = phi_set
        self.members = list(phi_set.ordered)
        self.bit = {f: i for i, f in enumerate(self.members)}
        self.basics = [f for f in self.members if isinstance(f, _BASIC)]
        self.rules = saturation_rules(phi_set)
        self.types = self._enumerate(max_types)

    def _basics_of(self, f, out: set):
        if isinstance(f, Not):
            self._basics_of(f.sub, out)
        elif isinstance(f, And):
            self._basics_of(f.left, out)
            self._basics_of(f.right, out)
        else:
            out.add(f)

    def _enumerate(self, max_types: int) -> list:
        basics = self.basics
        pos = {f: i for i, f in enumerate(basics)}
        at: list = [[] for _ in basics]
        forced_true: set = set()
        for r in self.rules:
            deps: set = set()
            for p in r.premises:
                self._basics_of(p, deps)
            self._basics_of(r.conclusion, deps)
            if not r.premises and isinstance(r.conclusion, _BASIC):
                forced_true.add(r.conclusion)
            at[max(pos[d] for d in deps)].append(r)
        assign: dict = {}

        def val(f):
            if isinstance(f, Not):
                return not val(f.sub)
            if isinstance(f, And):
                return val(f.left) and val(f.right)
            return assign[f]

        out: list = []

        def rec(i):
            if i == len(basics):
                out.append(self._mask(assign))
                if len(out) > max_types:
                    raise SatResourceError(f"more than {max_types} types")
                return
            f = basics[i]
            for v in ((True,) if f in forced_true else (True, False)):
                assign[f] = v
                if all(not all(val(p) for p in r.premises) or val(r.conclusion) for r in at[i]):
                    rec(i + 1)
            del assign[f]

        rec(0)
        return out

    def _mask(self, assign: dict) -> int:
        memo: dict = {}

        def val(f):
            r = memo.get(f)
            if r is None:
                if isinstance(f, Not):
                    r = not val(f.sub)
                elif isinstance(f, And):
                    r = val(f.left) and val(f.right)
                else:
                    r = assign[f]
                memo[f] = r
            return r

        m = 0
        for i, f in enumerate(self.members):
            if val(f):
                m |= 1 << i
        return m

    def has(self, t: int, f: Formula) -> bool:
        return bool(t >> self.bit[f] & 1)

    def members_of(self, t: int) -> list:
        return [f for i, f in enumerate(self.members) if t >> i & 1]


def saturate_types(phi_set, max_types: int = DEFAULT_MAX_TYPES) -> list:
    """All locally saturated types, each a frozenset of closure-set members."""
    ts = TypeSpace(phi_set, max_types)
    return [frozenset(ts.members_of(t)) for t in ts.types]


class _Canon:
    """Canonical relations on the types of a TypeSpace."""

    def __init__(self, ts: TypeSpace):
        self.ts = ts
        V = ts.phi.variables
        self.subs = subsets(V)
        lang = ts.phi.language
        bit = ts.bit
        self.dmods = [f for f in ts.members if isinstance(f, DepMod)]
        self.kmods = [f for f in ts.members if isinstance(f, KnowMod)]
        self.dsel = {X: [(1 << bit[f], 1 << bit[DepAtom(X, f.X)]) for f in self.dmods] for X in self.subs}
        self.ksel = ({X: [(1 << bit[f], 1 << bit[ContAtom(X, f.X)]) for f in self.kmods] for X in self.subs}
                     if lang != "lfd" else {})
        self.umask = 0
        if lang == "lud":
            for X in self.subs:
                for Y in self.subs:
                    self.umask |= 1 << bit[UnifAtom(X, Y)]

    def dsig(self, t: int, X) -> int:
        s = 0
        for fb, ab in self.dsel[X]:
            if t & fb and t & ab:
                s |= fb
        return s

    def ksig(self, t: int, X) -> int:
        s = 0
        for fb, ab in self.ksel[X]:
            if t & fb and t & ab:
                s |= fb
        return s


def _eliminate(ts: TypeSpace, canon: _Canon, universe: list, names: dict) -> tuple:
    bit = ts.bit
    full = (1 << len(ts.members)) - 1
    alive = list(universe)
    dsig = {(t, X): canon.dsig(t, X) for t in universe for X in canon.subs}
    ksig = {(t, X): canon.ksig(t, X) for t in universe for X in canon.ksel}
    dia_d = [(f, 1 << bit[f], 1 << bit[f.sub]) for f in canon.dmods]
    dia_k = [(f, 1 << bit[f], 1 << bit[f.sub]) for f in canon.kmods]
    trace = []
    while True:
        fals = {}
        for X in canon.subs:
            g: dict = {}
            for u in alive:
                k = dsig[(u, X)]
                g[k] = g.get(k, 0) | (full & ~u)
            fals[X] = g
        removed = set()
        for t in alive:
            why = None
            for f, fb, sb in dia_d:
                if not t & fb and not fals[f.X][dsig[(t, f.X)]] & sb:
                    why = f
                    break
            if why is None and dia_k:
                cache: dict = {}
                for f, fb, sb in dia_k:
                    if t & fb:
                        continue
                    X = f.X
                    if X not in cache:
                        a = ksig[(t, X)]
                        acc = 0
                        for u in alive:
                            if a & ~ksig[(u, X)] == 0:
                                acc |= full & ~u
                        cache[X] = acc
                    if not cache[X] & sb:
                        why = f
                        break
            if why is not None:
                removed.add(t)
                trace.append({"type": names[t], "missing": to_text(neg(why))})
        if not removed:
            return alive, trace
        alive = [t for t in alive if t not in removed]


def _certificate(ts: TypeSpace, canon: _Canon, alive: list, root: int, phi0: Formula,
                 lang: str) -> PreorderModel:
    """Witness-closed submodel of the surviving universe generated from root."""
    bit = ts.bit
    chosen = [root]
    seen = {root}
    dsig = lambda t, X: canon.dsig(t, X)
    k = 0
    while k < len(chosen):
        t = chosen[k]
        k += 1
        for f in canon.dmods + canon.kmods:
            if t >> bit[f] & 1:
                continue
            sb = 1 << bit[f.sub]
            if isinstance(f, DepMod):
                ok = lambda u: dsig(u, f.X) == dsig(t, f.X)
            else:
                a = canon.ksig(t, f.X)
                ok = lambda u: a & ~canon.ksig(u, f.X) == 0
            if any(not u & sb and ok(u) for u in chosen):
                continue
            w = next(u for u in alive if not u & sb and ok(u))
            chosen.append(w)
            seen.add(w)
    names = [f"t{i}" for i in range(len(chosen))]
    V = ts.phi.variables
    subs = canon.subs
    eq, leq = {}, {}
    for X in subs:
        sig = [canon.dsig(t, X) for t in chosen]
        eq[X] = frozenset((names[i], names[j]) for i in range(len(chosen))
                          for j in range(len(chosen)) if sig[i] == sig[j])
        if lang == "lfd":
            leq[X] = eq[X]
        else:
            ks = [canon.ksig(t, X) for t in chosen]
            leq[X] = frozenset((names[i], names[j]) for i in range(len(chosen))
                               for j in range(len(chosen)) if ks[i] & ~ks[j] == 0)
    val = {}
    for f in ts.members:
        if isinstance(f, (PredAtom, DepAtom, ContAtom, UnifAtom)):
            val[f] = frozenset(names[i] for i, t in enumerate(chosen) if t >> bit[f] & 1)
    if lang == "lfd":
        for X in subs:
            for Y in subs:
                val[ContAtom(X, Y)] = val[DepAtom(X, Y)]
    preds = {}
    for f in ts.members:
        if isinstance(f, PredAtom):
            preds[f.pred] = len(f.args)
    return PreorderModel(V, preds, tuple(names), eq, leq, val, "lud" if lang == "lud" else "lcd")


def decide_sat(phi0: Formula, lang: str | None = None, max_closure: int = DEFAULT_MAX_CLOSURE,
               max_types: int = DEFAULT_MAX_TYPES) -> SatResult:
    """Satisfiability of phi0 on preorder models of the given language."""
    phi0 = expand_abbrev(phi0)
    predicates(phi0)
    lang = lang or _default_lang(phi0)
    if lang not in ("lfd", "lcd", "lud"):
        raise ValueError(f"unknown language {lang!r}")
    if not in_language(phi0, lang):
        raise ValueError(f"formula is not in {lang}: {to_text(phi0)}")
    Phi = closure(phi0, lang)
    if len(Phi) > max_closure:
        raise SatResourceError(f"closure set has {len(Phi)} members (limit {max_closure})")
    ts = TypeSpace(Phi, max_types)
    canon = _Canon(ts)
    root_bit = 1 << ts.bit[phi0]
    names = {t: f"type{i}" for i, t in enumerate(ts.types)}
    groups: dict = {}
    for t in ts.types:
        key = (canon.dsig(t, ()), t & canon.umask)
        groups.setdefault(key, []).append(t)
    trace: list = []
    stats = {"closure": len(Phi), "types": len(ts.types), "universes": len(groups)}
    for key, universe in groups.items():
        if not any(t & root_bit for t in universe):
            continue
        alive, tr = _eliminate(ts, canon, universe, names)
        trace.extend(tr)
        roots = [t for t in alive if t & root_bit]
        if roots:
            M = _certificate(ts, canon, alive, roots[0], phi0, lang)
            _verify_certificate(M, phi0)
            stats["certificate_states"] = len(M.states)
            return SatResult("SAT", M, "t0", trace, stats)
    if not any(t & root_bit for t in ts.types):
        trace.append({"type": None, "missing": "no saturated type contains the formula"})
    return SatResult("UNSAT", None, None, trace, stats)


def _verify_certificate(M: PreorderModel, phi0: Formula) -> None:
    bad = validate_preorder_model(M)
    if bad:
        raise SoundnessError(f"certificate rejected by validator: {bad[0]}")
    if not checker.eval(M, "t0", phi0):
        raise SoundnessError("certificate does not satisfy the formula at t0")


def decide_valid(phi: Formula, lang: str | None = None, **kw) -> ValidResult:
    phi = expand_abbrev(phi)
    lang = lang or _default_lang(phi)
    r = decide_sat(Not(phi), lang, **kw)
    if r.sat:
        return ValidResult("NOT_VALID", r.model, r.state, r.trace)
    return ValidResult("VALID", None, None, r.trace)


# ---------------------------------------------------------------------------
# brute-force oracle


class OracleBudgetError(RuntimeError):
    pass


@dataclass
class OracleResult:
    status: str                      # "SAT" or "NO-MODEL-UP-TO-BOUND"
    model: PreorderModel | None = None
    state: str | None = None
    examined: int = 0

    @property
    def sat(self) -> bool:
        return self.status == "SAT"


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in _set_partitions(rest):
        yield [[first]] + p
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]


def _equivalences(W):
    for p in _set_partitions(list(W)):
        yield frozenset((a, b) for block in p for a in block for b in block)


def _preorders_over(W, base: frozenset):
    """All preorders on W containing base (which is reflexive)."""
    extra = [(a, b) for a in W for b in W if (a, b) not in base]
    for bits in itertools.product((0, 1), repeat=len(extra)):
        rel = base | {p for p, b in zip(extra, bits) if b}
        if is_preorder_rel(rel, W) is None:
            yield frozenset(rel)


def _unions_of_blocks(blocks: list):
    for bits in itertools.product((0, 1), repeat=len(blocks)):
        yield frozenset(s for blk, b in zip(blocks, bits) if b for s in blk)


def _upsets_within(rel, W, allowed: frozenset):
    """Upward-closed subsets of W (under rel) consisting of allowed states."""
    succ = {s: {w for (a, w) in rel if a == s} for s in W}
    out = []
    for bits in itertools.product((0, 1), repeat=len(W)):
        S = frozenset(s for s, b in zip(W, bits) if b)
        if S <= allowed and all(succ[s] <= S for s in S):
            out.append(S)
    return out


def _join_classes(rels: list, W) -> list:
    parent = {s: s for s in W}

    def find(s):
        while parent[s] != s:
            s = parent[s]
        return s

    for r in rels:
        for a, b in r:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    blocks: dict = {}
    for s in W:
        blocks.setdefault(find(s), []).append(s)
    return list(blocks.values())


def enumerate_preorder_models(V, preds: dict, n: int, lang: str = "lcd", pred_atoms=None,
                              budget: int = 2_000_000):
    """Every preorder model over states s0..s{n-1} (conditions 1-11, plus UK in lud)."""
    W = tuple(f"s{i}" for i in range(n))
    subs = subsets(tuple(V))
    full = frozenset(W)
    if pred_atoms is None:
        pred_atoms = [PredAtom(p, args) for p in sorted(preds)
                      for args in itertools.product(V, repeat=preds[p])]
    count = [0]

    def tick():
        count[0] += 1
        if count[0] > budget:
            raise OracleBudgetError(f"more than {budget} candidate structures")

    nonempty = [X for X in subs if X]
    eq_opts = list(_equivalences(W))

    def rel_choices(i, eq, leq):
        if i == len(nonempty):
            yield dict(eq), dict(leq)
            return
        X = nonempty[i]
        for e in eq_opts:
            for l in _preorders_over(W, e):
                tick()
                eq[X], leq[X] = e, l
                yield from rel_choices(i + 1, eq, leq)
        eq.pop(X, None)
        leq.pop(X, None)

    kinds = [DepAtom, ContAtom] + ([UnifAtom] if lang == "lud" else [])
    atoms = [k(X, Y) for k in kinds for X in subs for Y in subs]

    for eq, leq in rel_choices(0, {(): total(W)}, {(): total(W)}):
        cls = {X: {s: frozenset(w for (a, w) in eq[X] if a == s) for s in W} for X in subs}
        ups = {X: {s: frozenset(w for (a, w) in leq[X] if a == s) for s in W} for X in subs}
        cands = {}
        for a in atoms:
            X, Y = a.X, a.Y
            if isinstance(a, UnifAtom):
                opts = [full, frozenset()]
            elif isinstance(a, DepAtom):
                ok = frozenset(s for s in W if cls[X][s] <= cls[Y][s])
                opts = [S for S in _unions_of_blocks(classes(eq[X], W)) if S <= ok]
            else:
                ok = frozenset(s for s in W if ups[X][s] <= ups[Y][s])
                opts = _upsets_within(leq[X], W, ok)
            if is_subset(Y, X):
                opts = [S for S in opts if S == full]
            cands[a] = opts
        val: dict = {}

        def consistent() -> bool:
            # check every condition-4/8/9/10/11/UK constraint whose atoms are all set
            for kind in kinds:
                for X in subs:
                    for Y in subs:
                        for Z in subs:
                            trip = (kind(X, Y), kind(X, Z), kind(X, union(Y, Z)))
                            if all(t in val for t in trip) and val[trip[2]] != (val[trip[0]] & val[trip[1]]):
                                return False
                            trip = (kind(X, Y), kind(Y, Z), kind(X, Z))
                            if all(t in val for t in trip) and not (val[trip[0]] & val[trip[1]]) <= val[trip[2]]:
                                return False
            for X in subs:
                for Y in subs:
                    k, d = ContAtom(X, Y), DepAtom(X, Y)
                    if k in val and d in val and not val[k] <= val[d]:
                        return False
                    if lang == "lud":
                        u = UnifAtom(X, Y)
                        if u in val and k in val and not val[u] <= val[k]:
                            return False
                        k0 = ContAtom((), Y)
                        if u in val and k0 in val and not val[k0] <= val[u]:
                            return False
            for Y in subs:
                d, k = DepAtom((), Y), ContAtom((), Y)
                if d in val and k in val and not val[d] <= val[k]:
                    return False
            return True

        def atom_rec(i):
            if i == len(atoms):
                yield dict(val)
                return
            a = atoms[i]
            for S in cands[a]:
                tick()
                val[a] = S
                if consistent():
                    yield from atom_rec(i + 1)
            val.pop(a, None)

        pred_opts = []
        for a in pred_atoms:
            A = set(a.args)
            rels = [eq[X] for X in subs if A <= set(X)]
            pred_opts.append(list(_unions_of_blocks(_join_classes(rels, W))))
        for depval in atom_rec(0):
            for choice in itertools.product(*pred_opts):
                tick()
                v = dict(depval)
                v.update(zip(pred_atoms, choice))
                yield PreorderModel(tuple(V), dict(preds), W, dict(eq), dict(leq), v,
                                    "lud" if lang == "lud" else "lcd")


def brute_force_oracle(phi0: Formula, max_states: int = 3, lang: str | None = None,
                       budget: int = 2_000_000) -> OracleResult:
    phi0 = expand_abbrev(phi0)
    lang = lang or _default_lang(phi0)
    V = variables(phi0)
    if len(V) > 2:
        raise OracleBudgetError("the oracle supports at most two variables")
    preds = predicates(phi0)
    atoms = sorted({g for g in walk(phi0) if isinstance(g, PredAtom)}, key=to_text)
    examined = 0
    for n in range(1, max_states + 1):
        for M in enumerate_preorder_models(V, preds, n, "lud" if lang == "lud" else "lcd",
                                           atoms, budget):
            examined += 1
            m = checker.eval_mask(M, phi0)
            if m:
                s = next(s for i, s in enumerate(M.states) if m >> i & 1)
                return OracleResult("SAT", M, s, examined)
    return OracleResult("NO-MODEL-UP-TO-BOUND", None, None, examined)

