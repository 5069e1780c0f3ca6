"""Formulas of the dependence logics: syntax tree, parser, printer and closure sets.

Variable sets are tuples of names in sorted order, so equal sets compare and
hash equal and print the same way.  Formula nodes are frozen dataclasses with
a cached hash; they are used heavily as dictionary keys by the checker and the
satisfiability procedure.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

VarSet = tuple  # tuple[str, ...], sorted, no duplicates

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

KEYWORDS = frozenset({"D", "K", "A", "Know", "U", "k", "I", "Ig", "C", "KofV", "GD", "GK"})

LANGUAGES = ("lfd", "lcd", "lud", "ext")


def varset(names: Iterable[str] = ()) -> VarSet:
    out = tuple(sorted(set(names)))
    for n in out:
        if not isinstance(n, str) or not _IDENT.fullmatch(n):
            raise ValueError(f"bad variable name {n!r}")
    return out


def vkey(X: VarSet) -> str:
    """Canonical textual key: sorted members joined by commas, "" for the empty set."""
    return ",".join(X)


def parse_vkey(key: str) -> VarSet:
    return varset(p.strip() for p in key.split(",")) if key.strip() else ()


def subsets(V: VarSet) -> list[VarSet]:
    """All subsets of V, ordered by size then lexicographically."""
    return [tuple(c) for r in range(len(V) + 1) for c in itertools.combinations(V, r)]


def union(X: VarSet, Y: VarSet) -> VarSet:
    return tuple(sorted(set(X) | set(Y)))


def is_subset(Y: VarSet, X: VarSet) -> bool:
    return set(Y) <= set(X)


# ---------------------------------------------------------------------------
# syntax tree


class Formula:
    __slots__ = ()
    _fields: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self, "_h", hash((type(self).__name__,) + tuple(getattr(self, f) for f in self._fields))
        )

    def __str__(self) -> str:
        return to_text(self)

    def __lt__(self, other: "Formula") -> bool:
        return sort_key(self) < sort_key(other)


def _hash(self) -> int:
    return self._h


def _node(cls):
    cls = dataclass(frozen=True, slots=True)(cls)
    cls._fields = tuple(f for f in cls.__dataclass_fields__ if f != "_h")
    cls.__hash__ = _hash
    return cls


def _h():
    return field(default=0, init=False, repr=False, compare=False)


@_node
class PredAtom(Formula):
    pred: str
    args: tuple
    _h: int = _h()


@_node
class Not(Formula):
    sub: Formula
    _h: int = _h()


@_node
class And(Formula):
    left: Formula
    right: Formula
    _h: int = _h()


@_node
class DepMod(Formula):
    """D_X phi."""
    X: VarSet
    sub: Formula
    _h: int = _h()


@_node
class KnowMod(Formula):
    """K_X phi."""
    X: VarSet
    sub: Formula
    _h: int = _h()


@_node
class DepAtom(Formula):
    """D_X Y."""
    X: VarSet
    Y: VarSet
    _h: int = _h()


@_node
class ContAtom(Formula):
    """K_X Y."""
    X: VarSet
    Y: VarSet
    _h: int = _h()


@_node
class UnifAtom(Formula):
    """U(X;Y)."""
    X: VarSet
    Y: VarSet
    _h: int = _h()


@_node
class PointContAtom(Formula):
    """k_X Y, checked on standard models only."""
    X: VarSet
    Y: VarSet
    _h: int = _h()


@_node
class IndepAtom(Formula):
    """I_X Y, checked on standard models only."""
    X: VarSet
    Y: VarSet
    _h: int = _h()


@_node
class TopoIndepAtom(Formula):
    """Ig_X Y, checked on standard models only."""
    X: VarSet
    Y: VarSet
    _h: int = _h()


# abbreviation nodes; expand_abbrev removes them


@_node
class Or(Formula):
    left: Formula
    right: Formula
    _h: int = _h()


@_node
class Implies(Formula):
    left: Formula
    right: Formula
    _h: int = _h()


@_node
class Univ(Formula):
    """A phi."""
    sub: Formula
    _h: int = _h()


@_node
class Know(Formula):
    """Know phi."""
    sub: Formula
    _h: int = _h()


@_node
class Const(Formula):
    """C(Y)."""
    Y: VarSet
    _h: int = _h()


@_node
class KofV(Formula):
    Y: VarSet
    _h: int = _h()


@_node
class GD(Formula):
    X: VarSet
    Y: VarSet
    _h: int = _h()


@_node
class GK(Formula):
    X: VarSet
    Y: VarSet
    _h: int = _h()


PAIR_ATOMS = (DepAtom, ContAtom, UnifAtom, PointContAtom, IndepAtom, TopoIndepAtom)
MODALITIES = (DepMod, KnowMod)
ABBREVIATIONS = (Or, Implies, Univ, Know, Const, KofV, GD, GK)


def pred(name: str, *args: str) -> PredAtom:
    return PredAtom(name, tuple(args))


def D(X: Iterable[str], sub: Formula) -> DepMod:
    return DepMod(varset(X), sub)


def K(X: Iterable[str], sub: Formula) -> KnowMod:
    return KnowMod(varset(X), sub)


def dep(X: Iterable[str], Y: Iterable[str]) -> DepAtom:
    return DepAtom(varset(X), varset(Y))


def cont(X: Iterable[str], Y: Iterable[str]) -> ContAtom:
    return ContAtom(varset(X), varset(Y))


def unif(X: Iterable[str], Y: Iterable[str]) -> UnifAtom:
    return UnifAtom(varset(X), varset(Y))


def implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


def disj(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def conj(*fs: Formula) -> Formula:
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def neg(f: Formula) -> Formula:
    """Single negation: strips one outer negation if present, adds one otherwise."""
    return f.sub if isinstance(f, Not) else Not(f)


def is_atom(f: Formula) -> bool:
    return isinstance(f, PredAtom) or isinstance(f, PAIR_ATOMS)


def is_core(f: Formula) -> bool:
    return not any(isinstance(g, ABBREVIATIONS) for g in walk(f))


# ---------------------------------------------------------------------------
# traversal


def children(f: Formula) -> tuple:
    if isinstance(f, (Not, DepMod, KnowMod, Univ, Know)):
        return (f.sub,)
    if isinstance(f, (And, Or, Implies)):
        return (f.left, f.right)
    return ()


def walk(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(children(g)))


def subformulas(f: Formula) -> set:
    return set(walk(f))


def size(f: Formula) -> int:
    return sum(1 for _ in walk(f))


def modal_depth(f: Formula) -> int:
    """Nesting depth of D_X / K_X operators (A and Know count too); atoms are depth 0."""
    if isinstance(f, (DepMod, KnowMod, Univ, Know)):
        return 1 + modal_depth(f.sub)
    if isinstance(f, GD) or isinstance(f, GK):
        return 1
    ch = children(f)
    return max((modal_depth(c) for c in ch), default=0)


def variables(f: Formula) -> VarSet:
    out: set = set()
    for g in walk(f):
        if isinstance(g, PredAtom):
            out.update(g.args)
        elif isinstance(g, (DepMod, KnowMod)):
            out.update(g.X)
        elif isinstance(g, PAIR_ATOMS) or isinstance(g, (GD, GK)):
            out.update(g.X)
            out.update(g.Y)
        elif isinstance(g, (Const, KofV)):
            out.update(g.Y)
    return tuple(sorted(out))


def predicates(f: Formula) -> dict:
    """Predicate symbols with their arities; inconsistent arities raise ValueError."""
    out: dict = {}
    for g in walk(f):
        if isinstance(g, PredAtom):
            n = out.setdefault(g.pred, len(g.args))
            if n != len(g.args):
                raise ValueError(f"predicate {g.pred} used with arities {n} and {len(g.args)}")
    return out


def pred_atoms(f: Formula) -> set:
    return {g for g in walk(f) if isinstance(g, PredAtom)}


def language(f: Formula) -> str:
    """Smallest language tag among lfd < lcd < lud < ext containing f."""
    rank = 0
    for g in walk(expand_abbrev(f)):
        if isinstance(g, (PointContAtom, IndepAtom, TopoIndepAtom)):
            return "ext"
        if isinstance(g, UnifAtom):
            rank = max(rank, 2)
        elif isinstance(g, (KnowMod, ContAtom)):
            rank = max(rank, 1)
    return LANGUAGES[rank]


def in_language(f: Formula, lang: str) -> bool:
    return LANGUAGES.index(language(f)) <= LANGUAGES.index(lang)


# ---------------------------------------------------------------------------
# printing


def _vs(X: VarSet) -> str:
    return "{" + ",".join(X) + "}"


def to_text(f: Formula) -> str:
    """Canonical, fully parenthesised text; parse(to_text(f)) == f."""
    out: list = []
    _emit(f, out)
    return "".join(out)


_PAIR_PREFIX = {
    DepAtom: "D", ContAtom: "K", PointContAtom: "k", IndepAtom: "I", TopoIndepAtom: "Ig",
}


def _emit(f: Formula, out: list) -> None:
    t = type(f)
    if t is PredAtom:
        out.append(f"{f.pred}({','.join(f.args)})")
    elif t is Not:
        out.append("~")
        _emit(f.sub, out)
    elif t in (And, Or, Implies):
        op = {And: " & ", Or: " | ", Implies: " -> "}[t]
        out.append("(")
        _emit(f.left, out)
        out.append(op)
        _emit(f.right, out)
        out.append(")")
    elif t in (DepMod, KnowMod):
        out.append(("D" if t is DepMod else "K") + _vs(f.X) + " ")
        _emit(f.sub, out)
    elif t in _PAIR_PREFIX:
        out.append(_PAIR_PREFIX[t] + _vs(f.X) + _vs(f.Y))
    elif t is UnifAtom:
        out.append(f"U({','.join(f.X)};{','.join(f.Y)})")
    elif t is Univ:
        out.append("A ")
        _emit(f.sub, out)
    elif t is Know:
        out.append("Know ")
        _emit(f.sub, out)
    elif t is Const:
        out.append("C" + _vs(f.Y))
    elif t is KofV:
        out.append("KofV" + _vs(f.Y))
    elif t in (GD, GK):
        out.append(f"{t.__name__}({','.join(f.X)};{','.join(f.Y)})")
    else:  # pragma: no cover
        raise TypeError(f"not a formula: {f!r}")


def sort_key(f: Formula) -> tuple:
    return (size(f), to_text(f))


# ---------------------------------------------------------------------------
# parsing


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(->)|([A-Za-z_][A-Za-z0-9_]*)|([~&|(){},;]))")


def _tokenize(text: str) -> list:
    toks = []
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        tok = m.group(1) or m.group(2) or m.group(3)
        toks.append((tok, m.start(m.lastindex)))
        pos = m.end()
    toks.append(("", n))
    return toks


class _Parser:
    def __init__(self, text: str, declared: dict | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.declared = declared
        self.arities: dict = {}

    def peek(self, k: int = 0) -> str:
        return self.toks[min(self.i + k, len(self.toks) - 1)][0]

    def pos(self) -> int:
        return self.toks[self.i][1]

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if expected is not None and tok != expected:
            shown = repr(tok) if tok else "end of input"
            raise FormulaSyntaxError(f"expected {expected!r}, found {shown}", self.pos())
        if not tok:
            raise FormulaSyntaxError("unexpected end of input", self.pos())
        self.i += 1
        return tok

    def ident(self) -> str:
        tok = self.peek()
        if not tok or not _IDENT.fullmatch(tok):
            raise FormulaSyntaxError(f"expected identifier, found {tok!r}", self.pos())
        self.i += 1
        return tok

    def vlist(self, closer: str) -> VarSet:
        names = []
        if self.peek() != closer:
            names.append(self.ident())
            while self.peek() == ",":
                self.take(",")
                names.append(self.ident())
        return varset(names)

    def vset(self) -> VarSet:
        self.take("{")
        X = self.vlist("}")
        self.take("}")
        return X

    def pair_args(self) -> tuple:
        self.take("(")
        X = self.vlist(";")
        self.take(";")
        Y = self.vlist(")")
        self.take(")")
        return X, Y

    def formula(self) -> Formula:
        f = self.implication()
        return f

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take("->")
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.peek() == "|":
            self.take("|")
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        while self.peek() == "&":
            self.take("&")
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        start = self.pos()
        if tok == "~":
            self.take()
            return Not(self.unary())
        if tok == "(":
            self.take()
            f = self.formula()
            self.take(")")
            return f
        if tok in ("D", "K"):
            self.take()
            X = self.vset()
            if self.peek() == "{":
                Y = self.vset()
                return DepAtom(X, Y) if tok == "D" else ContAtom(X, Y)
            sub = self.unary()
            return DepMod(X, sub) if tok == "D" else KnowMod(X, sub)
        if tok in ("k", "I", "Ig"):
            self.take()
            X = self.vset()
            Y = self.vset()
            return {"k": PointContAtom, "I": IndepAtom, "Ig": TopoIndepAtom}[tok](X, Y)
        if tok == "A":
            self.take()
            return Univ(self.unary())
        if tok == "Know":
            self.take()
            return Know(self.unary())
        if tok in ("C", "KofV"):
            self.take()
            if self.peek() == "(":
                self.take("(")
                Y = self.vlist(")")
                self.take(")")
            else:
                Y = self.vset()
            return Const(Y) if tok == "C" else KofV(Y)
        if tok in ("U", "GD", "GK"):
            self.take()
            X, Y = self.pair_args()
            return {"U": UnifAtom, "GD": GD, "GK": GK}[tok](X, Y)
        if tok and _IDENT.fullmatch(tok):
            name = self.ident()
            if self.peek() != "(":
                raise FormulaSyntaxError(f"unknown abbreviation or missing argument list for {name!r}", start)
            self.take("(")
            args = []
            if self.peek() != ")":
                args.append(self.ident())
                while self.peek() == ",":
                    self.take(",")
                    args.append(self.ident())
            self.take(")")
            self.check_arity(name, len(args), start)
            return PredAtom(name, tuple(args))
        shown = repr(tok) if tok else "end of input"
        raise FormulaSyntaxError(f"unexpected {shown}", start)

    def check_arity(self, name: str, n: int, pos: int) -> None:
        if self.declared is not None:
            if name not in self.declared:
                raise FormulaSyntaxError(f"undeclared predicate {name!r}", pos)
            if self.declared[name] != n:
                raise FormulaSyntaxError(
                    f"arity mismatch for {name}: declared {self.declared[name]}, got {n}", pos)
        prev = self.arities.setdefault(name, n)
        if prev != n:
            raise FormulaSyntaxError(f"arity mismatch for {name}: {prev} vs {n}", pos)


def parse(text: str, predicates: dict | None = None, expand: bool = True) -> Formula:
    """Parse surface syntax.  Abbreviations are expanded unless ``expand`` is false.

    ``predicates`` optionally declares arities; undeclared or mismatched uses
    are syntax errors.
    """
    p = _Parser(text, predicates)
    f = p.formula()
    if p.peek():
        raise FormulaSyntaxError(f"trailing input {p.peek()!r}", p.pos())
    return expand_abbrev(f) if expand else f


# ---------------------------------------------------------------------------
# abbreviations


def expand_abbrev(f: Formula) -> Formula:
    t = type(f)
    if t is Or:
        return disj(expand_abbrev(f.left), expand_abbrev(f.right))
    if t is Implies:
        return implies(expand_abbrev(f.left), expand_abbrev(f.right))
    if t is Univ:
        return DepMod((), expand_abbrev(f.sub))
    if t is Know:
        return KnowMod((), expand_abbrev(f.sub))
    if t is Const:
        return DepAtom((), f.Y)
    if t is KofV:
        return ContAtom((), f.Y)
    if t is GD:
        return DepMod((), DepAtom(f.X, f.Y))
    if t is GK:
        return KnowMod((), ContAtom(f.X, f.Y))
    if t is Not:
        s = expand_abbrev(f.sub)
        return f if s is f.sub else Not(s)
    if t is And:
        a, b = expand_abbrev(f.left), expand_abbrev(f.right)
        return f if (a is f.left and b is f.right) else And(a, b)
    if t in (DepMod, KnowMod):
        s = expand_abbrev(f.sub)
        return f if s is f.sub else t(f.X, s)
    return f


# ---------------------------------------------------------------------------
# closure sets


@dataclass(frozen=True)
class ClosureSet:
    seed: Formula
    variables: VarSet
    members: frozenset
    language: str
    ordered: tuple  # members sorted by (size, text)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, f) -> bool:
        return f in self.members

    def __iter__(self):
        return iter(self.ordered)


def closure(seed: Formula, lang: str = "lcd", V: Sequence[str] | None = None) -> ClosureSet:
    """Smallest set containing ``seed`` with the closure properties used by the
    finite canonical model: subformulas, single negations, D_X D_X Y, K_X K_X Y,
    D_X K_X Y (and U(X;Y) in lud) for all X, Y in V, D_X alpha for occurring
    predicate atoms alpha, and D_X K_X psi whenever K_X psi is present.

    In lfd mode only the D-clauses apply.  ``V`` defaults to the variables of
    the seed; passing a superset is allowed (used for idempotence checks).
    """
    if lang not in ("lfd", "lcd", "lud"):
        raise ValueError(f"unknown language {lang!r}")
    seed = expand_abbrev(seed)
    if not in_language(seed, lang):
        raise ValueError(f"seed is not a {lang} formula: {to_text(seed)}")
    V = varset(V) if V is not None else variables(seed)
    if not set(variables(seed)) <= set(V):
        raise ValueError("V must contain the variables of the seed")
    subs = subsets(V)
    start = [seed]
    for X in subs:
        for Y in subs:
            start.append(DepMod(X, DepAtom(X, Y)))
            if lang != "lfd":
                start.append(KnowMod(X, ContAtom(X, Y)))
                start.append(DepMod(X, ContAtom(X, Y)))
            if lang == "lud":
                start.append(UnifAtom(X, Y))
    members: set = set()
    todo = list(start)
    while todo:
        f = todo.pop()
        if f in members:
            continue
        members.add(f)
        todo.extend(children(f))
        todo.append(neg(f))
        if isinstance(f, PredAtom):
            todo.extend(DepMod(X, f) for X in subs)
        elif isinstance(f, KnowMod):
            todo.append(DepMod(f.X, f))
    ordered = tuple(sorted(members, key=sort_key))
    return ClosureSet(seed, V, frozenset(members), lang, ordered)


# ---------------------------------------------------------------------------
# random formulas (test corpora)


def random_formula(
    rng: random.Random,
    V: Sequence[str],
    preds: dict,
    depth: int,
    lang: str = "lcd",
    size_budget: int = 6,
) -> Formula:
    """A random core formula over variables V with modal depth at most ``depth``."""
    V = list(V)
    subs = subsets(tuple(sorted(V)))
    allowed = {
        "lfd": ["P", "D"],
        "lcd": ["P", "D", "K"],
        "lud": ["P", "D", "K", "U"],
        "ext": ["P", "D", "K", "U", "k", "I", "Ig"],
    }[lang]

    def atom() -> Formula:
        kind = rng.choice(allowed)
        if kind == "P" or not subs:
            name = rng.choice(sorted(preds))
            return PredAtom(name, tuple(rng.choice(V) for _ in range(preds[name]))) if V or preds[name] == 0 else PredAtom(name, ())
        X, Y = rng.choice(subs), rng.choice(subs)
        return {"D": DepAtom, "K": ContAtom, "U": UnifAtom, "k": PointContAtom,
                "I": IndepAtom, "Ig": TopoIndepAtom}[kind](X, Y)

    def gen(d: int, budget: int) -> Formula:
        if budget <= 1:
            return atom()
        r = rng.random()
        if r < 0.2:
            return atom()
        if r < 0.4:
            return Not(gen(d, budget - 1))
        if r < 0.65:
            k = rng.randint(1, budget - 1)
            return And(gen(d, k), gen(d, budget - k))
        if d == 0:
            return atom() if rng.random() < 0.5 else Not(atom())
        X = rng.choice(subs) if subs else ()
        if lang == "lfd" or rng.random() < 0.5:
            return DepMod(X, gen(d - 1, budget - 1))
        return KnowMod(X, gen(d - 1, budget - 1))

    return gen(depth, size_budget)
