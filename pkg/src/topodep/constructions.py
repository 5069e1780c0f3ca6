"""Bounded unravelling of a finite preorder model into a tree of histories,
the pseudo-metric layer on that tree, and a verification battery for the
representation claims.

Nodes are numbered in breadth-first order.  History h_i is stored through
``parent[i]`` and the label of its last step: variable set ``lab[i]`` (index
into ``subsets(V)``), beta code ``beta[i]`` (index into ``values``) and last
state ``last[i]`` (index into the source states).  Relations between
histories are materialized as N x N boolean numpy arrays.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import checker
from .formula import (
    And, ContAtom, DepAtom, DepMod, Formula, KnowMod, Not, PredAtom, UnifAtom, expand_abbrev,
    language, modal_depth, subsets, to_text, vkey, walk,
)
from .models import PreorderModel, StandardModel, validate_preorder_model

DEFAULT_BETAS = (Fraction(0), Fraction(1, 2), Fraction(1, 4), Fraction(1, 8))
DEFAULT_DEPTH = 3
DEFAULT_MAX_NODES = 8000


class TreeBudgetError(RuntimeError):
    """The unravelled tree would exceed the node budget."""


class ProbeRefused(ValueError):
    """Probe request violates l(h) + modal_depth(phi) <= D."""


def beta_set(values) -> tuple:
    """Validate a set of beta labels: rationals in [0,1), containing 0 and at
    least three positive values."""
    vals = sorted({Fraction(v) for v in values})
    if not vals or vals[0] != 0:
        raise ValueError("the beta set must contain 0")
    if any(not (0 <= v < 1) for v in vals):
        raise ValueError("beta labels must lie in [0,1)")
    if len(vals) < 4:
        raise ValueError("the beta set needs at least three positive values")
    return tuple(vals)


def parse_betas(text: str) -> tuple:
    return beta_set(Fraction(t.strip()) for t in text.split(",") if t.strip())


class _Source:
    """Numpy view of a source preorder model."""

    def __init__(self, M: PreorderModel):
        self.M = M
        self.states = M.states
        self.pos = {s: i for i, s in enumerate(M.states)}
        S = len(M.states)
        self.subs = subsets(M.variables)
        self.sub_index = {X: i for i, X in enumerate(self.subs)}
        self.union = [[self.sub_index[tuple(sorted(set(X) | set(Y)))] for Y in self.subs] for X in self.subs]

        def mat(rel):
            m = np.zeros((S, S), dtype=bool)
            for a, b in rel:
                m[self.pos[a], self.pos[b]] = True
            return m

        def vec(ext):
            v = np.zeros(S, dtype=bool)
            for s in ext:
                v[self.pos[s]] = True
            return v

        self.eq = [mat(M.eq[X]) for X in self.subs]
        self.leq = [mat(M.leq[X]) for X in self.subs]
        n = len(self.subs)
        self.D = [[vec(M.val[DepAtom(X, Y)]) for Y in self.subs] for X in self.subs]
        self.K = [[vec(M.val[ContAtom(X, Y)]) for Y in self.subs] for X in self.subs]
        self.lud = M.language == "lud"
        self.U = [[bool(M.val[UnifAtom(X, Y)]) if self.lud else False for Y in self.subs] for X in self.subs]
        # constant variable sets: D_0 Y holds (everywhere, by condition 3)
        self.const = [bool(self.D[0][j].all()) for j in range(n)]


def count_nodes(M: PreorderModel, root, depth: int, betas=DEFAULT_BETAS) -> int:
    """Number of histories of length <= depth (computed without building them)."""
    src = _Source(M)
    S = len(M.states)
    nb = len(betas) - 1
    m = np.zeros((S, S), dtype=object)
    for X in range(len(src.subs)):
        m = m + src.eq[X].astype(object) + nb * src.leq[X].astype(object)
    cur = np.zeros(S, dtype=object)
    cur[M.states.index(root)] = 1
    total = 1
    for _ in range(depth):
        cur = cur.dot(m)
        total += int(sum(cur))
    return int(total)


@dataclass(eq=False)
class UnravelledTree:
    source: PreorderModel
    root: str
    depth: int
    betas: tuple
    values: tuple          # sorted betas plus 1 (distance codes)
    parent: np.ndarray
    level: np.ndarray
    lab: np.ndarray
    beta: np.ndarray
    last: np.ndarray
    repair_constants: bool = True
    metrized: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    # -- basic structure -------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def src(self) -> _Source:
        s = self._cache.get("src")
        if s is None:
            s = self._cache["src"] = _Source(self.source)
        return s

    @property
    def subs(self) -> list:
        return self.src.subs

    def history(self, i: int) -> tuple:
        """(s0, (X, beta, s1), ..., (X, beta, sn)) for node i."""
        steps = []
        while self.parent[i] >= 0:
            steps.append((self.subs[self.lab[i]], self.values[self.beta[i]], self.source.states[self.last[i]]))
            i = self.parent[i]
        return (self.root,) + tuple(reversed(steps))

    def history_text(self, i: int) -> str:
        h = self.history(i)
        parts = [h[0]]
        for X, b, s in h[1:]:
            parts.append(f"{{{vkey(X)}}}^{_frac(b)} {s}")
        return " ".join(parts)

    def node_of(self, history: tuple) -> int:
        idx = self._cache.get("index")
        if idx is None:
            idx = self._cache["index"] = {self.history(i): i for i in range(self.n)}
        try:
            return idx[history]
        except KeyError:
            raise KeyError(f"history not in tree: {history!r}") from None

    def children(self, i: int) -> list:
        return [int(j) for j in np.nonzero(self.parent == i)[0]]

    @property
    def anc(self) -> np.ndarray:
        """anc[i, d] = ancestor of node i at depth d (or -1 if d > level[i])."""
        A = self._cache.get("anc")
        if A is None:
            A = np.full((self.n, self.depth + 1), -1, dtype=np.int64)
            for i in range(self.n):
                d = self.level[i]
                A[i, d] = i
                if d > 0:
                    A[i, :d] = A[self.parent[i], :d]
            self._cache["anc"] = A
        return A

    @property
    def meet_level(self) -> np.ndarray:
        ml = self._cache.get("meet")
        if ml is None:
            A = self.anc
            ml = np.zeros((self.n, self.n), dtype=np.int64)
            for d in range(1, self.depth + 1):
                same = (A[:, d][:, None] == A[:, d][None, :]) & (A[:, d][:, None] >= 0)
                ml[same] = d
            self._cache["meet"] = ml
        return ml

    def meet(self, a: int, b: int) -> int:
        return int(self.anc[a, self.meet_level[a, b]])

    def interval(self, a: int, b: int) -> list:
        m = self.meet_level[a, b]
        up = [int(self.anc[a, d]) for d in range(self.level[a], m, -1)]
        down = [int(self.anc[b, d]) for d in range(m, self.level[b] + 1)]
        return up + down

    def tree_dist(self, a: int, b: int) -> int:
        return int(self.level[a] + self.level[b] - 2 * self.meet_level[a, b])

    def ancestor_matrix(self) -> np.ndarray:
        """M[a, b] = a is an ancestor of (or equal to) b."""
        A = self.anc
        out = np.zeros((self.n, self.n), dtype=bool)
        for d in range(self.depth + 1):
            col = A[:, d]
            ok = col >= 0
            out[col[ok], np.nonzero(ok)[0]] = True
        return out

    # -- one-step edges and relations on histories ------------------------

    def edge_flags(self, Y: int) -> tuple:
        """(eq_edge, leq_edge) arrays: flag for the edge parent[i] -> i."""
        key = ("edges", Y)
        r = self._cache.get(key)
        if r is None:
            src = self.src
            n = self.n
            eqe = np.zeros(n, dtype=bool)
            leqe = np.zeros(n, dtype=bool)
            for i in range(1, n):
                p = self.parent[i]
                s = self.last[p]
                Z = self.lab[i]
                dz = src.D[Z][Y][s]
                if self.beta[i] == 0:
                    eqe[i] = dz
                elif self.repair_constants and src.D[0][Y][s]:
                    eqe[i] = dz
                leqe[i] = src.K[Z][Y][s]
            r = self._cache[key] = (eqe, leqe)
        return r

    def _chain_root(self, flag: np.ndarray) -> np.ndarray:
        root = np.arange(self.n)
        for i in range(1, self.n):
            if flag[i]:
                root[i] = root[self.parent[i]]
        return root

    def eq_root(self, Y: int) -> np.ndarray:
        key = ("eqroot", Y)
        if key not in self._cache:
            self._cache[key] = self._chain_root(self.edge_flags(Y)[0])
        return self._cache[key]

    def x_root(self, Y: int) -> np.ndarray:
        """h_Y: highest ancestor e with e <=_Y h."""
        key = ("xroot", Y)
        if key not in self._cache:
            e, l = self.edge_flags(Y)
            self._cache[key] = self._chain_root(e | l)
        return self._cache[key]

    def path_eq(self, Y: int) -> np.ndarray:
        """=_Y on histories via the non-redundant path characterization."""
        key = ("peq", Y)
        if key not in self._cache:
            if Y == 0:
                m = np.ones((self.n, self.n), dtype=bool)
            else:
                r = self.eq_root(Y)
                m = r[:, None] == r[None, :]
            self._cache[key] = m
        return self._cache[key]

    def path_leq(self, Y: int) -> np.ndarray:
        key = ("pleq", Y)
        if key not in self._cache:
            if Y == 0:
                m = np.ones((self.n, self.n), dtype=bool)
            else:
                anc = self._anc_mat()
                er, xr = self.eq_root(Y), self.x_root(Y)
                # eqroot(h) is an ancestor of h' and xroot(h') is an ancestor of h
                m = anc[er, :] & anc[xr, :].T
            self._cache[key] = m
        return self._cache[key]

    def _anc_mat(self) -> np.ndarray:
        m = self._cache.get("ancmat")
        if m is None:
            m = self._cache["ancmat"] = self.ancestor_matrix()
        return m

    def basic_leq(self, x: str) -> np.ndarray:
        return self.path_leq(self.src.sub_index[(x,)])

    def std_leq(self, Y: int) -> np.ndarray:
        """<=_Y by standardness: intersection of the basic preorders."""
        key = ("sleq", Y)
        if key not in self._cache:
            m = np.ones((self.n, self.n), dtype=bool)
            for x in self.subs[Y]:
                m &= self.basic_leq(x)
            self._cache[key] = m
        return self._cache[key]

    def std_eq(self, Y: int) -> np.ndarray:
        key = ("seq", Y)
        if key not in self._cache:
            L = self.std_leq(Y)
            self._cache[key] = L & L.T
        return self._cache[key]

    # -- metric layer -----------------------------------------------------

    def density(self) -> np.ndarray:
        """delta^h as a code into values (1 if no nonzero label)."""
        d = self._cache.get("density")
        if d is None:
            one = len(self.values) - 1
            d = np.full(self.n, one, dtype=np.int64)
            for i in range(1, self.n):
                b = self.beta[i]
                d[i] = d[self.parent[i]] if b == 0 else min(d[self.parent[i]], b)
            self._cache["density"] = d
        return d

    def close_edges(self, x: int) -> np.ndarray:
        """X-closeness of each edge parent[i] -> i (X indexes subsets)."""
        key = ("close", x)
        if key not in self._cache:
            src = self.src
            dens = self.density()
            xr = self.x_root(x)
            c = np.zeros(self.n, dtype=bool)
            for i in range(1, self.n):
                p = self.parent[i]
                s = self.last[p]
                Z = self.lab[i]
                b = self.beta[i]
                c[i] = (src.U[Z][x]
                        or (src.K[Z][x][s] and b < dens[xr[p]])
                        or (src.D[Z][x][s] and b == 0))
            self._cache[key] = c
        return self._cache[key]

    def path_max_beta(self) -> np.ndarray:
        """Code of the largest beta label on the edges of the path between two nodes."""
        m = self._cache.get("pathmax")
        if m is None:
            A = self.anc
            ml = self.meet_level
            m = np.zeros((self.n, self.n), dtype=np.int64)
            for d in range(1, self.depth + 1):
                col = A[:, d]
                b = np.where(col >= 0, self.beta[np.maximum(col, 0)], 0)
                on = (col >= 0)[:, None] & (ml < d)
                m = np.maximum(m, np.where(on, b[:, None], 0))
                m = np.maximum(m, np.where(on.T, b[None, :], 0))
            self._cache["pathmax"] = m
        return m

    def dist_code(self, X: int) -> np.ndarray:
        """d_X^W as codes into values."""
        if not self.metrized:
            raise ValueError("tree has no pseudo-metric layer; call pseudo_metrize")
        key = ("dist", X)
        if key not in self._cache:
            one = len(self.values) - 1
            out = np.zeros((self.n, self.n), dtype=np.int64)
            for x in self.subs[X]:
                xi = self.src.sub_index[(x,)]
                if self.repair_constants and self.src.const[xi]:
                    continue
                r = self._chain_root(self.close_edges(xi))
                close = r[:, None] == r[None, :]
                dx = np.where(close, self.path_max_beta(), one)
                out = np.maximum(out, dx)
            self._cache[key] = out
        return self._cache[key]

    def distance(self, X, a: int, b: int) -> Fraction:
        Xi = X if isinstance(X, int) else self.src.sub_index[tuple(sorted(X))]
        return self.values[self.dist_code(Xi)[a, b]]

    def to_json(self, relations: bool = False) -> dict:
        out = {
            "root": self.root, "depth": self.depth,
            "betas": [_frac(b) for b in self.betas],
            "repair_constants": self.repair_constants,
            "nodes": [self.history_text(i) for i in range(self.n)],
            "parent": [int(p) for p in self.parent],
        }
        if relations:
            rel = {}
            for Y, X in enumerate(self.subs):
                E, L = self.std_eq(Y), self.std_leq(Y)
                rel[vkey(X)] = {
                    "eq": [[int(a), int(b)] for a, b in zip(*np.nonzero(np.triu(E, 1)))],
                    "leq": [[int(a), int(b)] for a, b in zip(*np.nonzero(L & ~np.eye(self.n, dtype=bool)))],
                }
            out["relations"] = rel
            if self.metrized:
                out["dist"] = {
                    x: [[int(a), int(b), _frac(self.values[c])]
                        for (a, b), c in np.ndenumerate(self.dist_code(self.src.sub_index[(x,)]))
                        if a < b]
                    for x in self.source.variables
                }
        return out


def _frac(v: Fraction) -> str:
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def unravel(M: PreorderModel, s0=None, depth: int = DEFAULT_DEPTH, betas=DEFAULT_BETAS,
            max_nodes: int = DEFAULT_MAX_NODES, repair_constants: bool = True) -> UnravelledTree:
    """All histories of length <= depth starting at s0.

    With ``repair_constants`` (the default) a step with a nonzero label also
    counts as an =_Y step when Y is constant in the source (D_0 Y holds), so
    that constant variables stay constant on the tree.  With the flag off the
    construction is the literal one, whose ∅-relations are nevertheless total.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    betas = beta_set(betas)
    s0 = M.states[0] if s0 is None else s0
    if s0 not in M.states:
        raise ValueError(f"unknown state {s0!r}")
    bad = validate_preorder_model(M, first_only=True)
    if bad:
        raise ValueError(f"source is not a preorder model: {bad[0]}")
    total = count_nodes(M, s0, depth, betas)
    if total > max_nodes:
        raise TreeBudgetError(f"tree would have {total} nodes (limit {max_nodes})")
    src = _Source(M)
    values = tuple(betas) + (Fraction(1),)
    parent, level, lab, beta, last = [-1], [0], [0], [0], [src.pos[s0]]
    frontier = [0]
    S = len(M.states)
    for d in range(1, depth + 1):
        nxt = []
        for i in frontier:
            s = last[i]
            for Xi in range(len(src.subs)):
                for bi in range(len(betas)):
                    rel = src.eq[Xi] if bi == 0 else src.leq[Xi]
                    for t in range(S):
                        if rel[s, t]:
                            parent.append(i)
                            level.append(d)
                            lab.append(Xi)
                            beta.append(bi)
                            last.append(t)
                            nxt.append(len(parent) - 1)
        frontier = nxt
    arr = lambda v: np.array(v, dtype=np.int64)
    T = UnravelledTree(M, s0, depth, betas, values, arr(parent), arr(level), arr(lab), arr(beta),
                       arr(last), repair_constants)
    assert T.n == total
    return T


def pseudo_metrize(T: UnravelledTree) -> UnravelledTree:
    if T.source.language != "lud":
        raise ValueError("the source model lacks a U-valuation (needs an lud model)")
    T2 = UnravelledTree(T.source, T.root, T.depth, T.betas, T.values, T.parent, T.level, T.lab,
                        T.beta, T.last, T.repair_constants, True, dict(T._cache))
    return T2


def history_metrics(T: UnravelledTree, a: int, b: int) -> dict:
    if not (0 <= a < T.n and 0 <= b < T.n):
        raise IndexError("node not in tree")
    dens = T.density()
    roots = {vkey(X): int(T.x_root(i)[a]) for i, X in enumerate(T.subs)}
    close = {}
    for i, X in enumerate(T.subs):
        r = T._chain_root(T.close_edges(i))
        close[vkey(X)] = bool(r[a] == r[b])
    return {
        "x_roots": roots,
        "density": T.values[dens[a]],
        "close": close,
        "interval": T.interval(a, b),
        "meet": T.meet(a, b),
        "dist": T.tree_dist(a, b),
    }


def as_standard_model(T: UnravelledTree, max_nodes: int = 400) -> StandardModel:
    """The tree as a StandardModel over the basic preorders <=_x^W (small trees only).

    States are named h0, h1, ... in node order; atoms are valued through last.
    """
    if T.n > max_nodes:
        raise TreeBudgetError(f"{T.n} nodes is too many for an explicit standard model (limit {max_nodes})")
    names = tuple(f"h{i}" for i in range(T.n))
    basic = {}
    for x in T.source.variables:
        L = T.basic_leq(x)
        basic[x] = frozenset((names[a], names[b]) for a, b in zip(*np.nonzero(L)))
    val = {}
    for a in T.source.pred_atoms():
        ext = T.source.val[a]
        val[a] = frozenset(names[i] for i in range(T.n) if T.source.states[T.last[i]] in ext)
    return StandardModel(T.source.variables, dict(T.source.predicates), names, basic, val)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Finding:
    claim: str
    item: str
    witness: tuple
    detail: str = ""

    def to_json(self) -> dict:
        return {"claim": self.claim, "item": self.item, "witness": [int(w) for w in self.witness],
                "detail": self.detail}


class _Report:
    def __init__(self, limit: int):
        self.items: list = []
        self.limit = limit
        self.checked: list = []

    def check(self, claim, item, bad: np.ndarray | bool, detail="", witness=None):
        """Record a violation if ``bad`` (a boolean array or flag) has any true entry."""
        self.checked.append(f"{claim}.{item}")
        if isinstance(bad, (bool, np.bool_)):
            if bad:
                self.items.append(Finding(claim, item, tuple(witness or ()), detail))
            return
        if bad.any():
            idx = tuple(int(v) for v in np.argwhere(bad)[0])
            self.items.append(Finding(claim, item, idx if witness is None else tuple(witness), detail))


def _class_labels(R: np.ndarray) -> np.ndarray:
    """First related index per row; for an equivalence this names the class."""
    return np.argmax(R, axis=1)


def _equivalence_witness(R: np.ndarray) -> tuple | None:
    """None if symmetric reflexive R is transitive, else a triple (a, b, c)
    with R[a,b], R[b,c] and not R[a,c]."""
    lab = _class_labels(R)
    bad = R != (lab[:, None] == lab[None, :])
    if not bad.any():
        return None
    a, b = (int(v) for v in np.argwhere(bad)[0])
    if not R[a, b]:
        return (a, int(lab[a]), b)
    diff = np.nonzero(R[a] != R[b])[0]
    c = int(diff[0])
    return (a, b, c) if R[b, c] else (b, a, c)


def _closure_checks(T: UnravelledTree, rep: _Report, R: np.ndarray, fwd: np.ndarray,
                    back: np.ndarray, name: str) -> None:
    """R equals the reflexive-transitive closure of the one-step relation G,
    where G contains parent[i] -> i when fwd[i] and i -> parent[i] when back[i]."""
    n = T.n
    rep.check("path", f"{name}.refl", ~np.diag(R))
    kids = np.arange(1, n)
    f = kids[fwd[kids]]
    if len(f):
        rep.check("path", f"{name}.closed", R[:, T.parent[f]] & ~R[:, f], "R;G not in R")
    bk = kids[back[kids]]
    if len(bk):
        rep.check("path", f"{name}.closed", R[:, bk] & ~R[:, T.parent[bk]], "R;G not in R")
    # minimality: each related pair is reached by one G-step from a related pair
    A = T.anc
    lv = T.level
    anc = T._anc_mat()
    a_idx, b_idx = np.nonzero(R & ~np.eye(n, dtype=bool))
    b_anc = anc[b_idx, a_idx]                       # b is an ancestor of a
    step_up = A[a_idx, np.minimum(lv[b_idx] + 1, T.depth)]
    c = np.where(b_anc, step_up, T.parent[b_idx])
    g = np.where(b_anc, back[c], fwd[b_idx])
    ok = R[a_idx, c] & g
    if not ok.all():
        k = int(np.nonzero(~ok)[0][0])
        rep.check("path", f"{name}.minimal", True, "related pair without a G-path",
                  (int(a_idx[k]), int(b_idx[k])))
    else:
        rep.check("path", f"{name}.minimal", False)


def verify_representation(T: UnravelledTree, limit: int = 50) -> list:
    """Run the battery; returns a list of Finding (empty when every check passes)."""
    rep = _Report(limit)
    src = T.src
    n = T.n
    subs = T.subs
    nsub = len(subs)
    S = len(T.source.states)
    last = T.last
    interior = T.level < T.depth

    # tree axioms
    rep.check("tree", "root", (T.parent < 0).sum() != 1, "exactly one root")
    rep.check("tree", "parent", bool(np.any(T.level[1:] != T.level[T.parent[1:]] + 1)), "levels")
    for i in range(1, n):
        p = T.parent[i]
        Z = T.lab[i]
        okstep = src.leq[Z][last[p], last[i]] and (T.beta[i] != 0 or src.eq[Z][last[p], last[i]])
        if not okstep:
            rep.check("tree", "history", True, "ill-formed step", (i,))
            break
    rep.check("tree", "distinct", len({T.history(i) for i in range(n)}) != n, "duplicate histories")
    rng = random.Random(0)
    for _ in range(500):
        a, b, c = rng.randrange(n), rng.randrange(n), rng.randrange(n)
        m3 = T.meet(a, T.meet(b, c))
        if T.level[m3] != min(T.meet_level[a, b], T.meet_level[a, c]):
            rep.check("tree", "meet", True, "inf of three is not the lower pairwise meet", (a, b, c))
            break

    eqs = [T.path_eq(Y) for Y in range(nsub)]
    leqs = [T.path_leq(Y) for Y in range(nsub)]
    for Y in range(1, nsub):
        e, l = T.edge_flags(Y)
        _closure_checks(T, rep, eqs[Y], e, e, f"eq{{{vkey(subs[Y])}}}")
        _closure_checks(T, rep, leqs[Y], e | l, e, f"leq{{{vkey(subs[Y])}}}")
    for Y in range(nsub):
        tag = f"Y={vkey(subs[Y])}"
        E, L = eqs[Y], leqs[Y]
        rep.check("C1", "1", E != E.T, tag)
        rep.check("C1", "2", E & ~L, tag)
        rep.check("C1", "3", (L & L.T) != E, tag)
        std = np.ones((n, n), dtype=bool)
        for x in subs[Y]:
            std &= leqs[src.sub_index[(x,)]]
        rep.check("C1", "4", std != L, tag + " (<=)")
        stde = np.ones((n, n), dtype=bool)
        for x in subs[Y]:
            stde &= eqs[src.sub_index[(x,)]]
        rep.check("C1", "4", stde != E, tag + " (=)")
        rep.check("C1", "5", E & ~src.eq[Y][last[:, None], last[None, :]], tag)
        rep.check("C1", "6", L & ~src.leq[Y][last[:, None], last[None, :]], tag)
    for X in range(nsub):
        for Y in range(nsub):
            tag = f"X={vkey(subs[X])} Y={vkey(subs[Y])}"
            dxy = src.D[X][Y][last]
            pre = eqs[X] & dxy[:, None]
            rep.check("C1", "7", pre & ~(eqs[Y] & dxy[None, :]), tag)
            kxy = src.K[X][Y][last]
            pre = leqs[X] & kxy[:, None]
            rep.check("C1", "8", pre & ~(leqs[Y] & kxy[None, :]), tag)
    A = T.anc
    ml = T.meet_level
    for Y in range(nsub):
        E, L = eqs[Y], leqs[Y]
        for d in range(T.depth + 1):
            col = A[:, d]
            has = col >= 0
            c = np.maximum(col, 0)
            idx = np.arange(n)
            for R, item in ((E, "9"), (L, "10")):
                # node of [h, h'] at depth d on the side of h, then on the side of h'
                on = has[:, None] & (ml <= d)
                bad = on & R & ~(R[idx, c][:, None] & R[c, :])
                rep.check("C1", item, bad, f"Y={vkey(subs[Y])}")
                on = has[None, :] & (ml <= d)
                bad = on & R & ~(R[:, c] & R[c, idx][None, :])
                rep.check("C1", item, bad, f"Y={vkey(subs[Y])}")

    # standard model on histories: basic preorders, condition (0)
    for a in T.source.pred_atoms():
        X = src.sub_index[tuple(sorted(set(a.args)))]
        truth = np.zeros(S, dtype=bool)
        for s in T.source.val[a]:
            truth[src.pos[s]] = True
        t = truth[last]
        rep.check("C2", "0", eqs[X] & (t[:, None] != t[None, :]), to_text(a))

    # p-morphism: forth clauses are C1.5/6; back clauses at interior nodes
    onehot = np.zeros((n, S), dtype=np.int64)
    onehot[np.arange(n), last] = 1
    for X in range(nsub):
        reach_e = (eqs[X].astype(np.int64) @ onehot) > 0
        reach_l = (leqs[X].astype(np.int64) @ onehot) > 0
        need_e = src.eq[X][last]
        need_l = src.leq[X][last]
        rep.check("C3", "back=", interior[:, None] & need_e & ~reach_e, f"X={vkey(subs[X])}")
        rep.check("C3", "back<=", interior[:, None] & need_l & ~reach_l, f"X={vkey(subs[X])}")
    # atomic clauses for D and K at interior nodes
    for X in range(nsub):
        for Y in range(nsub):
            tag = f"X={vkey(subs[X])} Y={vkey(subs[Y])}"
            tree_d = ~(eqs[X] & ~eqs[Y]).any(axis=1)
            good = ~(leqs[X] & ~leqs[Y]).any(axis=1)
            tree_k = ~(leqs[X] & ~good[None, :]).any(axis=1)
            rep.check("C3", "D-atom", interior & (tree_d != src.D[X][Y][last]), tag)
            rep.check("C3", "K-atom", interior & (tree_k != src.K[X][Y][last]), tag)

    if T.metrized:
        _verify_metric(T, rep, eqs, leqs, interior)
    return rep.items


def _verify_metric(T, rep, eqs, leqs, interior) -> None:
    src = T.src
    subs = T.subs
    nsub = len(subs)
    n = T.n
    vals = T.values
    one = len(vals) - 1
    dens = T.density()
    positive = list(range(1, one))  # codes of positive betas
    d = [T.dist_code(X) for X in range(nsub)]

    rep.check("M1", "1", dens == 0, "density positive")
    rep.check("M1", "2", dens[1:] > dens[T.parent[1:]], "density monotone")
    for X in range(nsub):
        for Y in range(nsub):
            XY = src.union[X][Y]
            lhs = dens[T.x_root(XY)]
            rhs = np.minimum(dens[T.x_root(X)], dens[T.x_root(Y)])
            rep.check("M1", "6", lhs != rhs, f"X={vkey(subs[X])} Y={vkey(subs[Y])}")

    rep.check("C4", "1", d[0] != 0, "d_0 is not identically 0")
    for X in range(nsub):
        tag = f"X={vkey(subs[X])}"
        D = d[X]
        rep.check("C4", "1", np.diag(D) != 0, tag)
        rep.check("C4", "2", D != D.T, tag)
        rep.check("C4", "3", (D == 0) != eqs[X], tag)
        for r in range(len(vals)):
            R = D <= r
            w = _equivalence_witness(R)
            rep.check("C4", "6", w is not None, f"{tag} r={_frac(vals[r])}", w)
        ball = D < dens[:, None]
        rep.check("C4", "9", ball & ~leqs[X], tag)
    nonconst = [X for X in range(1, nsub)
                if any(not src.const[src.sub_index[(x,)]] for x in subs[X]) or not T.repair_constants]
    for X in nonconst:
        for Y in nonconst:
            both = (d[X] < one) & (d[Y] < one)
            rep.check("Lip", "collapse", both & (d[X] != d[Y]), f"X={vkey(subs[X])} Y={vkey(subs[Y])}")
    for Y in range(nsub):
        for X in range(nsub):
            tag = f"Y={vkey(subs[Y])} X={vkey(subs[X])}"
            dY, dX = d[Y], d[X]
            # C6: uniform continuity of X on Y inside B_Y(h, delta^h)
            kyx = src.K[Y][X][T.last] & interior
            for r in sorted(set(int(v) for v in dens[kyx])):
                R = dY < r
                lab = _class_labels(R)
                centres = kyx & (dens == r)
                qual = np.zeros(n, dtype=bool)
                qual[lab[centres]] = True
                inside = (lab[:, None] == lab[None, :]) & qual[lab][:, None]
                for e in positive:
                    rep.check("C6", "uniform", inside & (dY < e) & (dX >= e), f"{tag} eps={_frac(vals[e])}")
            # C7: uniform dependence transfers to the tree
            if src.U[Y][X]:
                for e in positive + [one]:
                    rep.check("C7", "U", (dY < e) & (dX >= e), f"{tag} eps={_frac(vals[e])}")
            elif T.depth >= 2 and len(positive):
                # finite evidence of failure: (s0, 0^g, s0) and (.., Y^g, s0) with g = min beta
                g = positive[0]
                try:
                    h1 = T.node_of((T.root, ((), vals[g], T.root)))
                    h2 = T.node_of((T.root, ((), vals[g], T.root), (subs[Y], vals[g], T.root)))
                    rep.check("C7", "not-U", not (dY[h1, h2] <= g and dX[h1, h2] == one), tag, (h1, h2))
                except KeyError:
                    rep.check("C7", "not-U", True, tag + " (witness histories missing)")


def report_json(findings: list) -> list:
    return [f.to_json() for f in findings]


# ---------------------------------------------------------------------------
# modal equivalence probe


def tree_truth(T: UnravelledTree, phi: Formula, memo: dict | None = None) -> np.ndarray:
    """Truth vector of an lcd formula on the tree viewed as a standard preorder model."""
    phi = expand_abbrev(phi)
    if language(phi) not in ("lfd", "lcd"):
        raise ValueError("tree evaluation supports lcd formulas only")
    memo = T._cache.setdefault("truth", {}) if memo is None else memo
    src = T.src

    def ev(f):
        r = memo.get(f)
        if r is not None:
            return r
        if isinstance(f, Not):
            r = ~ev(f.sub)
        elif isinstance(f, And):
            r = ev(f.left) & ev(f.right)
        elif isinstance(f, DepMod):
            X = src.sub_index[f.X]
            r = ~(T.std_eq(X) & ~ev(f.sub)[None, :]).any(axis=1)
        elif isinstance(f, KnowMod):
            X = src.sub_index[f.X]
            r = ~(T.std_leq(X) & ~ev(f.sub)[None, :]).any(axis=1)
        elif isinstance(f, DepAtom):
            X, Y = src.sub_index[f.X], src.sub_index[f.Y]
            r = ~(T.std_eq(X) & ~T.std_eq(Y)).any(axis=1)
        elif isinstance(f, ContAtom):
            X, Y = src.sub_index[f.X], src.sub_index[f.Y]
            LX, LY = T.std_leq(X), T.std_leq(Y)
            good = ~(LX & ~LY).any(axis=1)
            r = ~(LX & ~good[None, :]).any(axis=1)
        elif isinstance(f, PredAtom):
            ext = T.source.val.get(f)
            if ext is None:
                raise checker.EvalError(f"atom outside valuation domain: {to_text(f)}")
            truth = np.array([s in ext for s in T.source.states])
            r = truth[T.last]
        else:
            raise ValueError(f"cannot evaluate {to_text(f)} on the tree")
        memo[f] = r
        return r

    return ev(phi)


def modal_equivalence_probe(T: UnravelledTree, h: int, phi: Formula) -> tuple:
    """(truth at h in the tree, truth at last(h) in the source, agreement)."""
    phi = expand_abbrev(phi)
    if not 0 <= h < T.n:
        raise IndexError("node not in tree")
    if T.level[h] + modal_depth(phi) > T.depth:
        raise ProbeRefused(f"l(h) + modal depth = {T.level[h] + modal_depth(phi)} exceeds D = {T.depth}")
    if any(isinstance(g, UnifAtom) for g in walk(phi)):
        raise ProbeRefused("U-atoms are not evaluated on the tree")
    t = bool(tree_truth(T, phi)[h])
    s = checker.eval(T.source, T.source.states[T.last[h]], phi)
    return t, s, t == s
