"""Model checking over preorder models, plus the extended atoms k, I and Ig on
standard (Alexandroff) models.

Truth sets are computed bottom-up as integer bitmasks, memoized per
subformula for the duration of one call.
"""

from __future__ import annotations

from typing import Callable

from .formula import (
    LANGUAGES, And, ContAtom, DepAtom, DepMod, Formula, IndepAtom, KnowMod, Not,
    PointContAtom, PredAtom, TopoIndepAtom, UnifAtom, expand_abbrev, language, to_text,
    variables, walk,
)
from .models import (
    ModelError, PreorderModel, StandardModel, expand_standard, standard_leq,
)

EXTENDED = (PointContAtom, IndepAtom, TopoIndepAtom)


class EvalError(ValueError):
    """Evaluation request that the model cannot answer."""


def _prepare(M: PreorderModel, phi: Formula, allow_ext: bool) -> Formula:
    phi = expand_abbrev(phi)
    lang = language(phi)
    if lang == "ext":
        if not allow_ext:
            raise EvalError("extended atoms k, I, Ig are only defined on standard models")
    elif LANGUAGES.index(lang) > LANGUAGES.index(M.language):
        raise EvalError(f"language mismatch: formula is {lang}, model is {M.language}")
    if not set(variables(phi)) <= set(M.variables):
        raise EvalError(f"formula uses variables outside V: {to_text(phi)}")
    for g in walk(phi):
        if isinstance(g, PredAtom) and g not in M.val:
            raise EvalError(f"atom outside valuation domain: {to_text(g)}")
    return phi


class _Evaluator:
    def __init__(self, M: PreorderModel, ext: Callable | None = None):
        self.M = M
        self.idx = M.index()
        self.ext = ext
        self.memo: dict = {}

    def box(self, succ: list, m: int) -> int:
        out = 0
        miss = ~m
        for i, u in enumerate(succ):
            if not (u & miss):
                out |= 1 << i
        return out

    def mask(self, f: Formula) -> int:
        r = self.memo.get(f)
        if r is not None:
            return r
        idx = self.idx
        if isinstance(f, Not):
            r = idx.all & ~self.mask(f.sub)
        elif isinstance(f, And):
            r = self.mask(f.left) & self.mask(f.right)
        elif isinstance(f, DepMod):
            r = self.box(idx.eq_up[f.X], self.mask(f.sub))
        elif isinstance(f, KnowMod):
            r = self.box(idx.leq_up[f.X], self.mask(f.sub))
        elif isinstance(f, EXTENDED):
            if self.ext is None:
                raise EvalError("extended atoms are only defined on standard models")
            r = self.ext(f)
        else:
            r = idx.val.get(f)
            if r is None:
                raise EvalError(f"atom outside valuation domain: {to_text(f)}")
        self.memo[f] = r
        return r


def _state_index(M: PreorderModel, s) -> int:
    try:
        return M.index().pos[s]
    except KeyError:
        raise EvalError(f"unknown state {s!r}") from None


def eval_mask(M: PreorderModel, phi: Formula, memo: dict | None = None) -> int:
    """Truth set of phi as a bitmask over M.states (bit i is state i)."""
    phi = _prepare(M, phi, allow_ext=False)
    ev = _Evaluator(M)
    if memo is not None:
        ev.memo = memo
    return ev.mask(phi)


def eval_all(M: PreorderModel, phi: Formula) -> frozenset:
    return M.index().unmask(eval_mask(M, phi))


def eval(M: PreorderModel, s, phi: Formula) -> bool:  # noqa: A001 - mirrors the semantics
    i = _state_index(M, s)
    return bool(eval_mask(M, phi) >> i & 1)


def valid_in_model(M: PreorderModel, phi: Formula) -> bool:
    return eval_mask(M, phi) == M.index().all


def failing_states(M: PreorderModel, phi: Formula) -> list:
    m = eval_mask(M, phi)
    return [s for i, s in enumerate(M.states) if not m >> i & 1]


# ---------------------------------------------------------------------------
# standard models


class StandardChecker:
    """Evaluator for standard models that also understands k, I and Ig."""

    def __init__(self, SM: StandardModel):
        self.SM = SM
        self.M = expand_standard(SM)
        self.idx = self.M.index()
        self._classes: dict = {}

    def eq_classes(self, Y) -> list:
        c = self._classes.get(Y)
        if c is None:
            seen, c = 0, []
            for u in self.idx.eq_up[Y]:
                if not u & seen:
                    c.append(u)
                    seen |= u
            self._classes[Y] = c
        return c

    def ext_mask(self, a: Formula) -> int:
        idx = self.idx
        out = 0
        if isinstance(a, PointContAtom):
            for i in range(idx.n):
                if not idx.leq_up[a.X][i] & ~idx.leq_up[a.Y][i]:
                    out |= 1 << i
            return out
        cls = self.eq_classes(a.Y)
        rel = idx.eq_up if isinstance(a, IndepAtom) else idx.leq_up
        for i in range(idx.n):
            u = rel[a.X][i]
            if all(u & c for c in cls):
                out |= 1 << i
        return out

    def mask(self, phi: Formula) -> int:
        phi = _prepare(self.M, phi, allow_ext=True)
        return _Evaluator(self.M, ext=self.ext_mask).mask(phi)

    def eval(self, s, phi: Formula) -> bool:
        return bool(self.mask(phi) >> _state_index(self.M, s) & 1)

    def eval_all(self, phi: Formula) -> frozenset:
        return self.idx.unmask(self.mask(phi))

    def valid(self, phi: Formula) -> bool:
        return self.mask(phi) == self.idx.all


def _is_extended_query(atom: Formula) -> bool:
    if isinstance(atom, EXTENDED):
        return True
    return isinstance(atom, KnowMod) and atom.X == () and isinstance(atom.sub, EXTENDED)


def eval_extended(SM: StandardModel, s, atom: Formula) -> bool:
    """Truth of k_XY, I_XY, Ig_XY or a global version K_0(...) at s."""
    if not _is_extended_query(atom):
        raise EvalError(f"not an extended atom: {to_text(atom)}")
    return StandardChecker(SM).eval(s, atom)


def eval_standard(SM: StandardModel, s, phi: Formula) -> bool:
    return StandardChecker(SM).eval(s, phi)


# ---------------------------------------------------------------------------
# direct clause evaluator (independent cross-check)


def eval_standard_direct(SM: StandardModel, s, phi: Formula) -> bool:
    """Recursive evaluator written directly from the standard preorder clauses.

    Relations are recomputed from the basic preorders; no valuation of
    dependence atoms is consulted.  Intended for small models only.
    """
    if s not in SM.states:
        raise EvalError(f"unknown state {s!r}")
    phi = expand_abbrev(phi)
    W = SM.states
    leq_cache: dict = {}

    def le(X, a, b):
        L = leq_cache.get(X)
        if L is None:
            L = leq_cache[X] = standard_leq(SM, X)
        return (a, b) in L

    def eq(X, a, b):
        return le(X, a, b) and le(X, b, a)

    def ev(f, w) -> bool:
        if isinstance(f, PredAtom):
            if f not in SM.val:
                raise EvalError(f"atom outside valuation domain: {to_text(f)}")
            return w in SM.val[f]
        if isinstance(f, Not):
            return not ev(f.sub, w)
        if isinstance(f, And):
            return ev(f.left, w) and ev(f.right, w)
        if isinstance(f, DepMod):
            return all(ev(f.sub, v) for v in W if eq(f.X, w, v))
        if isinstance(f, KnowMod):
            return all(ev(f.sub, v) for v in W if le(f.X, w, v))
        if isinstance(f, DepAtom):
            return all(eq(f.Y, w, v) for v in W if eq(f.X, w, v))
        if isinstance(f, ContAtom):
            return all(le(f.Y, t, v) for t in W if le(f.X, w, t) for v in W if le(f.X, t, v))
        if isinstance(f, PointContAtom):
            return all(le(f.Y, w, v) for v in W if le(f.X, w, v))
        if isinstance(f, (IndepAtom, TopoIndepAtom)):
            rel = eq if isinstance(f, IndepAtom) else le
            return all(any(rel(f.X, w, v) and eq(f.Y, c, v) for v in W) for c in W)
        if isinstance(f, UnifAtom):
            raise EvalError("U-atoms have no standard preorder clause")
        raise EvalError(f"cannot evaluate {to_text(f)}")

    return ev(phi, s)


__all__ = [
    "EvalError", "ModelError", "eval", "eval_all", "eval_mask", "valid_in_model",
    "failing_states", "StandardChecker", "eval_extended", "eval_standard",
    "eval_standard_direct",
]
