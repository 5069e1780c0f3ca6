"""Fixed, seeded corpora shared by the test modules."""

import random

from topodep.constructions import count_nodes
from topodep.formula import parse, random_formula
from topodep.models import random_lud_model, random_pseudometric_model, random_standard_model

N_MODELS = 500
TREE_BUDGET = 4500


def standard_corpus(n=N_MODELS):
    """2-5 states, one or two variables, seed i for model i."""
    for i in range(n):
        yield i, random_standard_model(2 + i % 4, 1 + (i // 4) % 2, seed=i)


def pseudometric_corpus(n=N_MODELS):
    for i in range(n):
        yield i, random_pseudometric_model(2 + i % 4, 1 + (i // 4) % 2, seed=10_000 + i)


# formula metavariable pool for the soundness sweep
POOL_TEXT = [
    "P(x)", "~P(x)", "P(y)", "D{x} P(x)", "K{y} P(x)", "D{x}{y}", "K{x}{y}",
    "P(x) & P(y)", "K{} ~P(y)", "~D{y} K{x} P(x)",
]


def pool():
    return [parse(t) for t in POOL_TEXT]


def tree_corpus(k=20, budget=TREE_BUDGET):
    """The first k seeded lud models (one variable, two or three states) whose
    depth-3 unravelling fits in the node budget."""
    out, seed = [], 0
    while len(out) < k:
        M = random_lud_model(2 + seed % 2, 1, seed=seed)
        if count_nodes(M, M.states[0], 3) <= budget:
            out.append((seed, M))
        seed += 1
    return out


def formula_corpus(n, V=("x",), preds=None, depth=2, lang="lcd", seed=0):
    rng = random.Random(seed)
    preds = {"P": 1} if preds is None else preds
    return [random_formula(rng, V, preds, depth, lang) for _ in range(n)]
