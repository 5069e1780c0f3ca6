"""Axiom schemes of the LFD / LCD / LUD Hilbert systems, scheme matching,
tautology checking, and a derivation verifier.

Patterns are ordinary core formulas whose leaves may be metavariables:
``PredAtom("?phi", ())`` stands for an arbitrary formula, and a VarSet of the
form ``("?X",)`` stands for an arbitrary set of variables.  ``("?Y+?Z",)``
denotes the union of two VarSet metavariables bound elsewhere.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from .formula import (
    LANGUAGES, And, ContAtom, DepAtom, DepMod, Formula, FormulaSyntaxError, KnowMod, Not,
    PredAtom, UnifAtom, expand_abbrev, implies, in_language, is_subset, parse, subsets,
    to_text, union, varset,
)


# ---------------------------------------------------------------------------
# patterns


def fvar(name: str) -> PredAtom:
    return PredAtom("?" + name, ())


def svar(name: str) -> tuple:
    return ("?" + name,)


def _is_fvar(p) -> bool:
    return isinstance(p, PredAtom) and p.pred.startswith("?")


def _is_svar(p) -> bool:
    return isinstance(p, tuple) and len(p) == 1 and p[0].startswith("?")


P_, Q_ = fvar("phi"), fvar("psi")
X_, Y_, Z_ = svar("X"), svar("Y"), svar("Z")
YZ_ = ("?Y+?Z",)
E = ()


@dataclass(frozen=True)
class AxiomScheme:
    name: str
    pattern: Formula
    language: str
    table: int  # 1 core schemes, 2 continuous additions, 3 uniform additions
    side: Callable | None = field(default=None, compare=False, repr=False)
    side_text: str = ""

    @property
    def formula_vars(self) -> list:
        return sorted({g.pred[1:] for g in _pattern_leaves(self.pattern) if _is_fvar(g)})

    @property
    def set_vars(self) -> list:
        out = set()
        for X in _pattern_sets(self.pattern):
            if _is_svar(X):
                out.update(n.lstrip("?") for n in X[0].split("+"))
        return sorted(out)


def _pattern_leaves(p) -> Iterator:
    if _is_fvar(p):
        yield p
        return
    for name in getattr(p, "_fields", ()):
        v = getattr(p, name)
        if isinstance(v, Formula):
            yield from _pattern_leaves(v)


def _pattern_sets(p) -> Iterator:
    for name in getattr(p, "_fields", ()):
        v = getattr(p, name)
        if isinstance(v, Formula):
            yield from _pattern_sets(v)
        elif name in ("X", "Y"):
            yield v


def _incl(b) -> bool:
    return is_subset(b["Y"], b["X"])


def _det_atom(b) -> bool:
    a = b["phi"]
    return isinstance(a, PredAtom) and b["X"] == varset(a.args)


def _schemes() -> list:
    I = implies
    out = []

    def add(name, pat, lang, table, side=None, side_text=""):
        out.append(AxiomScheme(name, pat, lang, table, side, side_text))

    # core schemes for functional dependence
    add("D-Distribution", I(DepMod(X_, I(P_, Q_)), I(DepMod(X_, P_), DepMod(X_, Q_))), "lfd", 1)
    add("Factivity", I(DepMod(X_, P_), P_), "lfd", 1)
    add("Axiom4", I(DepMod(X_, P_), DepMod(X_, DepMod(X_, P_))), "lfd", 1)
    add("Axiom5", I(Not(DepMod(X_, P_)), DepMod(X_, Not(DepMod(X_, P_)))), "lfd", 1)
    add("Inclusion", DepAtom(X_, Y_), "lfd", 1, _incl, "Y subset of X")
    add("Additivity", I(And(DepAtom(X_, Y_), DepAtom(X_, Z_)), DepAtom(X_, YZ_)), "lfd", 1)
    add("Transitivity", I(And(DepAtom(X_, Y_), DepAtom(Y_, Z_)), DepAtom(X_, Z_)), "lfd", 1)
    add("DeterminedDependence", I(DepAtom(X_, Y_), DepMod(X_, DepAtom(X_, Y_))), "lfd", 1)
    add("Transfer", I(DepAtom(X_, Y_), I(DepMod(Y_, P_), DepMod(X_, P_))), "lfd", 1)
    add("DeterminedAtoms", I(P_, DepMod(X_, P_)), "lfd", 1, _det_atom,
        "phi is a predicate atom and X is its set of arguments")
    # schemes added for continuous dependence
    add("K-Distribution", I(KnowMod(X_, I(P_, Q_)), I(KnowMod(X_, P_), KnowMod(X_, Q_))), "lcd", 2)
    add("Veracity", I(KnowMod(X_, P_), P_), "lcd", 2)
    add("PositiveIntrospection", I(KnowMod(X_, P_), KnowMod(X_, KnowMod(X_, P_))), "lcd", 2)
    add("K-Inclusion", ContAtom(X_, Y_), "lcd", 2, _incl, "Y subset of X")
    add("K-Additivity", I(And(ContAtom(X_, Y_), ContAtom(X_, Z_)), ContAtom(X_, YZ_)), "lcd", 2)
    add("K-Transitivity", I(And(ContAtom(X_, Y_), ContAtom(Y_, Z_)), ContAtom(X_, Z_)), "lcd", 2)
    add("KnowabilityOfEpistemicDependence", I(ContAtom(X_, Y_), KnowMod(X_, ContAtom(X_, Y_))), "lcd", 2)
    add("KnowabilityTransfer", I(ContAtom(X_, Y_), I(KnowMod(Y_, P_), KnowMod(X_, P_))), "lcd", 2)
    add("KnowableDetermination", I(KnowMod(X_, P_), DepMod(X_, P_)), "lcd", 2)
    add("KnowableDependence", I(ContAtom(X_, Y_), DepAtom(X_, Y_)), "lcd", 2)
    add("KnowledgeOfNecessity", I(DepMod(E, P_), KnowMod(E, P_)), "lcd", 2)
    add("KnowledgeOfConstants", I(DepAtom(E, Y_), ContAtom(E, Y_)), "lcd", 2)
    # schemes added for uniform dependence
    add("U-Inclusion", UnifAtom(X_, Y_), "lud", 3, _incl, "Y subset of X")
    add("U-Additivity", I(And(UnifAtom(X_, Y_), UnifAtom(X_, Z_)), UnifAtom(X_, YZ_)), "lud", 3)
    add("U-Transitivity", I(And(UnifAtom(X_, Y_), UnifAtom(Y_, Z_)), UnifAtom(X_, Z_)), "lud", 3)
    add("UniformDependenceIsKnown", I(UnifAtom(X_, Y_), KnowMod(E, UnifAtom(X_, Y_))), "lud", 3)
    add("UniformityImpliesContinuity", I(UnifAtom(X_, Y_), KnowMod(E, ContAtom(X_, Y_))), "lud", 3)
    add("UniformityOfKnowledge", I(ContAtom(E, Y_), UnifAtom(X_, Y_)), "lud", 3)
    return out


SCHEMES: tuple = tuple(_schemes())
SCHEME_BY_NAME: dict = {s.name: s for s in SCHEMES}
TAUTOLOGY = "Tautology"
MAX_TAUTOLOGY_ATOMS = 20


def schemes_for(lang: str) -> list:
    k = LANGUAGES.index(lang)
    return [s for s in SCHEMES if LANGUAGES.index(s.language) <= k]


# ---------------------------------------------------------------------------
# matching


class _NoMatch(Exception):
    pass


def _bind(b: dict, name: str, value) -> None:
    old = b.get(name)
    if old is None:
        b[name] = value
    elif old != value:
        raise _NoMatch


def _unify(p, f, b: dict, deferred: list) -> None:
    if _is_fvar(p):
        _bind(b, p.pred[1:], f)
        return
    if type(p) is not type(f):
        raise _NoMatch
    for name in p._fields:
        pv, fv = getattr(p, name), getattr(f, name)
        if isinstance(pv, Formula):
            _unify(pv, fv, b, deferred)
        elif name in ("X", "Y"):
            if _is_svar(pv):
                if "+" in pv[0]:
                    deferred.append((pv[0], fv))
                else:
                    _bind(b, pv[0][1:], fv)
            elif pv != fv:
                raise _NoMatch
        elif pv != fv:
            raise _NoMatch


def match_scheme(s: AxiomScheme, f: Formula) -> dict | None:
    b: dict = {}
    deferred: list = []
    try:
        _unify(s.pattern, f, b, deferred)
    except _NoMatch:
        return None
    for expr, value in deferred:
        names = [n[1:] for n in expr.split("+")]
        if any(n not in b for n in names):
            return None
        u = ()
        for n in names:
            u = union(u, b[n])
        if u != value:
            return None
    if s.side is not None and not s.side(b):
        return None
    return b


def instantiate(s: AxiomScheme, bindings: dict) -> Formula:
    """Substitute bindings into the scheme's pattern (side conditions are not checked)."""

    def sub(p):
        if _is_fvar(p):
            return bindings[p.pred[1:]]
        if not isinstance(p, Formula):
            return p
        vals = []
        for name in p._fields:
            v = getattr(p, name)
            if isinstance(v, Formula):
                vals.append(sub(v))
            elif name in ("X", "Y") and _is_svar(v):
                u = ()
                for n in v[0].split("+"):
                    u = union(u, bindings[n[1:]])
                vals.append(u)
            else:
                vals.append(v)
        return type(p)(*vals)

    return sub(s.pattern)


def _boolean_atoms(f: Formula, out: dict) -> None:
    if isinstance(f, Not):
        _boolean_atoms(f.sub, out)
    elif isinstance(f, And):
        _boolean_atoms(f.left, out)
        _boolean_atoms(f.right, out)
    else:
        out.setdefault(f, len(out))


def is_tautology(f: Formula) -> bool:
    """Truth-table check treating atoms and modal formulas as propositional letters."""
    f = expand_abbrev(f)
    atoms: dict = {}
    _boolean_atoms(f, atoms)
    n = len(atoms)
    if n > MAX_TAUTOLOGY_ATOMS:
        raise ValueError(f"too many propositional letters for truth-table check: {n}")
    # evaluate on all assignments at once using bit-parallel masks
    full = (1 << (1 << n)) - 1
    letter = {}
    for a, i in atoms.items():
        m = 0
        for row in range(1 << n):
            if row >> i & 1:
                m |= 1 << row
        letter[a] = m
    memo: dict = {}

    def ev(g):
        r = memo.get(g)
        if r is None:
            if isinstance(g, Not):
                r = full & ~ev(g.sub)
            elif isinstance(g, And):
                r = ev(g.left) & ev(g.right)
            else:
                r = letter[g]
            memo[g] = r
        return r

    return ev(f) == full


def match_axiom(f: Formula, lang: str = "lud") -> list:
    """All (scheme, bindings) pairs that f instantiates; tautologies are reported
    with scheme name "Tautology" and empty bindings."""
    f = expand_abbrev(f)
    out = [(s, b) for s in schemes_for(lang) if (b := match_scheme(s, f)) is not None]
    try:
        if is_tautology(f):
            out.append((TAUTOLOGY, {}))
    except ValueError:
        pass
    return out


def bindings_text(b: dict) -> dict:
    return {k: ("{" + ",".join(v) + "}" if isinstance(v, tuple) else to_text(v)) for k, v in sorted(b.items())}


# ---------------------------------------------------------------------------
# derivations


@dataclass(frozen=True)
class Axiom:
    scheme: str
    bindings: dict | None = None


@dataclass(frozen=True)
class ModusPonens:
    i: int  # 1-based indices
    j: int


@dataclass(frozen=True)
class KNecessitation:
    of: int
    X: tuple


@dataclass(frozen=True)
class DNecessitation:
    of: int
    X: tuple


@dataclass(frozen=True)
class Derivation:
    lines: tuple  # of (Formula, justification)

    @property
    def conclusion(self) -> Formula | None:
        return self.lines[-1][0] if self.lines else None


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    line: int | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _cite(k: int, here: int) -> None:
    if not isinstance(k, int) or k < 1 or k >= here:
        raise _LineError(f"bad index {k}: must cite an earlier line")


class _LineError(Exception):
    pass


def check_line(lines: list, n: int, lang: str = "lud") -> None:
    """Validate line n (1-based) against earlier lines; raises _LineError."""
    f, by = lines[n - 1]
    f = expand_abbrev(f)
    if not in_language(f, lang):
        raise _LineError(f"formula is not in {lang}")
    if isinstance(by, Axiom):
        if by.scheme == TAUTOLOGY:
            try:
                ok = is_tautology(f)
            except ValueError as e:
                raise _LineError(str(e)) from None
            if not ok:
                raise _LineError("not a propositional tautology")
            return
        s = SCHEME_BY_NAME.get(by.scheme)
        if s is None:
            raise _LineError(f"unknown axiom scheme {by.scheme!r}")
        if LANGUAGES.index(s.language) > LANGUAGES.index(lang):
            raise _LineError(f"scheme {s.name} is not part of {lang}")
        b = match_scheme(s, f)
        if b is None:
            plain = AxiomScheme(s.name, s.pattern, s.language, s.table)
            if match_scheme(plain, f) is not None:
                raise _LineError(f"side condition of {s.name} fails ({s.side_text})")
            raise _LineError(f"pattern mismatch for {s.name}")
        if by.bindings:
            got = bindings_text(b)
            for k, v in by.bindings.items():
                if got.get(k) != v:
                    raise _LineError(f"binding {k} = {v} does not match {got.get(k)}")
        return
    if isinstance(by, ModusPonens):
        _cite(by.i, n)
        _cite(by.j, n)
        a = expand_abbrev(lines[by.i - 1][0])
        c = expand_abbrev(lines[by.j - 1][0])
        if c == implies(a, f) or a == implies(c, f):
            return
        raise _LineError("modus ponens premises do not fit")
    if isinstance(by, (KNecessitation, DNecessitation)):
        _cite(by.of, n)
        if isinstance(by, KNecessitation) and lang == "lfd":
            raise _LineError("K-necessitation is not part of lfd")
        mod = KnowMod if isinstance(by, KNecessitation) else DepMod
        if f != mod(varset(by.X), expand_abbrev(lines[by.of - 1][0])):
            raise _LineError("necessitation conclusion does not fit")
        return
    raise _LineError(f"unknown justification {by!r}")


def check_derivation(d: Derivation, lang: str = "lud") -> CheckResult:
    if not d.lines:
        return CheckResult(False, None, "empty derivation")
    lines = list(d.lines)
    for n in range(1, len(lines) + 1):
        try:
            check_line(lines, n, lang)
        except _LineError as e:
            return CheckResult(False, n, str(e))
    return CheckResult(True)


class ProofFormatError(ValueError):
    pass


def derivation_from_json(obj: dict, predicates: dict | None = None) -> Derivation:
    try:
        rows = obj["lines"]
    except (KeyError, TypeError):
        raise ProofFormatError("proof must be an object with a 'lines' list") from None
    lines = []
    for k, row in enumerate(rows, 1):
        try:
            f = parse(row["formula"], predicates)
            by = row["by"]
        except FormulaSyntaxError as e:
            raise ProofFormatError(f"line {k}: {e}") from None
        except (KeyError, TypeError):
            raise ProofFormatError(f"line {k}: needs 'formula' and 'by'") from None
        if not isinstance(by, dict) or len(by) != 1:
            raise ProofFormatError(f"line {k}: 'by' must have exactly one key")
        (tag, arg), = by.items()
        if tag == "axiom":
            j = Axiom(str(arg))
        elif tag == "mp":
            if not (isinstance(arg, list) and len(arg) == 2):
                raise ProofFormatError(f"line {k}: mp needs two indices")
            j = ModusPonens(int(arg[0]), int(arg[1]))
        elif tag in ("knec", "dnec"):
            try:
                of, X = int(arg["of"]), varset(arg.get("X", []))
            except (KeyError, TypeError, ValueError):
                raise ProofFormatError(f"line {k}: {tag} needs 'of' and 'X'") from None
            j = KNecessitation(of, X) if tag == "knec" else DNecessitation(of, X)
        else:
            raise ProofFormatError(f"line {k}: unknown rule {tag!r}")
        lines.append((f, j))
    return Derivation(tuple(lines))


def load_derivation(text: str, predicates: dict | None = None) -> Derivation:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProofFormatError(f"invalid JSON: {e}") from None
    return derivation_from_json(obj, predicates)


def derivation_to_json(d: Derivation) -> dict:
    rows = []
    for f, by in d.lines:
        if isinstance(by, Axiom):
            j = {"axiom": by.scheme}
        elif isinstance(by, ModusPonens):
            j = {"mp": [by.i, by.j]}
        else:
            tag = "knec" if isinstance(by, KNecessitation) else "dnec"
            j = {tag: {"of": by.of, "X": list(by.X)}}
        rows.append({"formula": to_text(f), "by": j})
    return {"lines": rows}


def shift(d: Derivation, k: int) -> Derivation:
    """Renumber citations so d can be appended after k existing lines."""
    out = []
    for f, by in d.lines:
        if isinstance(by, ModusPonens):
            by = ModusPonens(by.i + k, by.j + k)
        elif isinstance(by, KNecessitation):
            by = KNecessitation(by.of + k, by.X)
        elif isinstance(by, DNecessitation):
            by = DNecessitation(by.of + k, by.X)
        out.append((f, by))
    return Derivation(tuple(out))


def concat(a: Derivation, b: Derivation) -> Derivation:
    return Derivation(a.lines + shift(b, len(a.lines)).lines)


# ---------------------------------------------------------------------------
# instances


def instances(s: AxiomScheme, V, pool: Iterable[Formula], atoms: Iterable[PredAtom] = ()) -> Iterator:
    """Every instance of s with formula metavariables drawn from pool and VarSet
    metavariables ranging over subsets of V.  For DeterminedAtoms the formula
    metavariable ranges over the given predicate atoms instead."""
    pool = list(pool)
    subs = subsets(tuple(sorted(V)))
    fnames, snames = s.formula_vars, s.set_vars
    fdomain = list(atoms) if s.name == "DeterminedAtoms" else pool
    for fs in itertools.product(fdomain, repeat=len(fnames)):
        for ss in itertools.product(subs, repeat=len(snames)):
            b = dict(zip(fnames, fs))
            b.update(zip(snames, ss))
            if s.side is not None and not s.side(b):
                continue
            yield instantiate(s, b), b
