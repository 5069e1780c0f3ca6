"""Finite topological spaces: generated topologies, interior/closure,
specialization preorders, Alexandroff opens and T0 quotients.

Subsets are frozensets of point identifiers; an open family is a frozenset of
such frozensets.  All spaces are finite, so closure under pairwise unions is
closure under arbitrary unions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable

Point = Hashable


@dataclass(frozen=True)
class FiniteSpace:
    points: tuple

    def __post_init__(self):
        if len(set(self.points)) != len(self.points):
            raise ValueError("duplicate points")

    @property
    def full(self) -> frozenset:
        return frozenset(self.points)


@dataclass(frozen=True)
class OpenFamily:
    space: FiniteSpace
    opens: frozenset

    def sorted_opens(self) -> list:
        order = {p: i for i, p in enumerate(self.space.points)}
        rows = [sorted(u, key=order.__getitem__) for u in self.opens]
        return sorted(rows, key=lambda r: (len(r), [order[p] for p in r]))


@dataclass(frozen=True)
class Preorder:
    space: FiniteSpace
    pairs: frozenset  # {(d, c)} meaning d <= c

    def up(self, p: Point) -> frozenset:
        return frozenset(c for (d, c) in self.pairs if d == p)

    def leq(self, a: Point, b: Point) -> bool:
        return (a, b) in self.pairs


def _check_subset(A: Iterable, space: FiniteSpace) -> frozenset:
    A = frozenset(A)
    if not A <= space.full:
        raise ValueError(f"not a subset of the space: {sorted(map(str, A - space.full))}")
    return A


def is_open_family(fam: OpenFamily) -> bool:
    S = fam.space.full
    o = fam.opens
    if frozenset() not in o or S not in o:
        return False
    if any(not u <= S for u in o):
        return False
    return all((u & v) in o and (u | v) in o for u in o for v in o)


def generate_topology(space: FiniteSpace, subbasis: Iterable[Iterable]) -> OpenFamily:
    """Smallest topology containing the subbasis (finite intersections, then unions)."""
    sub = {_check_subset(A, space) for A in subbasis}
    basis = {space.full} | sub
    # close under pairwise intersection
    changed = True
    while changed:
        changed = False
        for u in list(basis):
            for v in list(basis):
                w = u & v
                if w not in basis:
                    basis.add(w)
                    changed = True
    opens = {frozenset()} | basis
    changed = True
    while changed:
        changed = False
        for u in list(opens):
            for v in list(opens):
                w = u | v
                if w not in opens:
                    opens.add(w)
                    changed = True
    return OpenFamily(space, frozenset(opens))


def interior_closure(A: Iterable, fam: OpenFamily) -> tuple:
    A = _check_subset(A, fam.space)
    interior = frozenset().union(*[u for u in fam.opens if u <= A])
    comp = fam.space.full - A
    int_comp = frozenset().union(*[u for u in fam.opens if u <= comp])
    return interior, fam.space.full - int_comp


def neighbourhoods(p: Point, fam: OpenFamily) -> list:
    return [u for u in fam.opens if p in u]


def specialization_preorder(fam: OpenFamily) -> Preorder:
    """d <= c iff every open containing d contains c."""
    pts = fam.space.points
    nb = {p: frozenset(u for u in fam.opens if p in u) for p in pts}
    pairs = frozenset((d, c) for d in pts for c in pts if nb[d] <= nb[c])
    return Preorder(fam.space, pairs)


def is_preorder(pre: Preorder) -> bool:
    pts = pre.space.points
    if any((p, p) not in pre.pairs for p in pts):
        return False
    up = {p: pre.up(p) for p in pts}
    return all(up[c] <= up[d] for d in pts for c in up[d])


def reflexive_transitive_closure(space: FiniteSpace, edges: Iterable[tuple]) -> Preorder:
    pts = space.points
    up = {p: {p} for p in pts}
    for a, b in edges:
        if a not in up or b not in up:
            raise ValueError(f"edge outside the space: {(a, b)}")
        up[a].add(b)
    changed = True
    while changed:
        changed = False
        for p in pts:
            new = set().union(*(up[q] for q in up[p]))
            if new != up[p]:
                up[p] = new
                changed = True
    return Preorder(space, frozenset((p, q) for p in pts for q in up[p]))


def upsets(pre: Preorder) -> list:
    """All upward-closed subsets (the Alexandroff opens)."""
    pts = pre.space.points
    up = {p: pre.up(p) for p in pts}
    found = {frozenset()}
    for p in pts:
        found |= {u | up[p] for u in found}
    return sorted(found, key=lambda u: (len(u), sorted(map(str, u))))


def alexandroff_opens(pre: Preorder) -> OpenFamily:
    if not is_preorder(pre):
        raise ValueError("relation is not a preorder")
    return OpenFamily(pre.space, frozenset(upsets(pre)))


def quotient_space(fam: OpenFamily) -> tuple:
    """Indistinguishability classes, the quotient topology on class
    representatives, and whether the input was already T0.

    Classes are returned as a map point -> representative (the first point of
    its class in space order); the quotient space's points are these
    representatives.
    """
    pre = specialization_preorder(fam)
    pts = fam.space.points
    rep: dict = {}
    for p in pts:
        if p in rep:
            continue
        for q in pts:
            if q not in rep and pre.leq(p, q) and pre.leq(q, p):
                rep[q] = p
    reps = tuple(p for p in pts if rep[p] == p)
    qopens = frozenset(frozenset(rep[p] for p in u) for u in fam.opens)
    qspace = FiniteSpace(reps)
    return rep, OpenFamily(qspace, qopens), len(reps) == len(pts)


def is_t0(fam: OpenFamily) -> bool:
    nb = [frozenset(u for u in fam.opens if p in u) for p in fam.space.points]
    return len(set(nb)) == len(nb)
