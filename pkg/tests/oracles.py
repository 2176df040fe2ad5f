"""Reference implementations written without the package's code paths."""

import math
from decimal import Decimal, localcontext
from fractions import Fraction
from itertools import combinations

import numpy as np


def shapley_by_subsets(f, x, Z):
    """Shapley values of v(S) = mean over rows z of f(x on S, z elsewhere).

    Every coalition value is computed once; each phi_i then walks the subsets
    of the other features with weight |S|! (F-|S|-1)! / F!.
    """
    x = np.asarray(x)
    Z = np.asarray(Z)
    F = len(x)
    subsets = [S for size in range(F + 1) for S in combinations(range(F), size)]
    rows = []
    for S in subsets:
        comp = Z.copy()
        comp[:, list(S)] = x[list(S)]
        rows.append(comp)
    out = np.asarray(f(np.concatenate(rows)), dtype=np.float64).reshape(len(subsets), len(Z))
    v = {S: math.fsum(r) / len(Z) for S, r in zip(subsets, out)}
    phi = []
    for i in range(F):
        others = [j for j in range(F) if j != i]
        terms = []
        for size in range(F):
            w = math.factorial(size) * math.factorial(F - size - 1) / math.factorial(F)
            for S in combinations(others, size):
                with_i = tuple(sorted(S + (i,)))
                terms.append(w * (v[with_i] - v[S]))
        phi.append(math.fsum(terms))
    return np.array(phi), v[()], v[tuple(range(F))]


def pair_count_auc(scores, labels) -> Fraction:
    """Concordant pairs plus half the ties, over all (positive, negative) pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    pos, neg = scores[labels], scores[~labels]
    greater = int((pos[:, None] > neg[None, :]).sum())
    ties = int((pos[:, None] == neg[None, :]).sum())
    return Fraction(2 * greater + ties, 2 * len(pos) * len(neg))


def pearson_two_pass(x, y, digits: int = 50) -> Decimal:
    """Mean first, then centred moments, all in exact integer arithmetic.

    Deviations are scaled by n so they stay integral; the scale cancels in r.
    """
    x = [int(v) for v in x]
    y = [int(v) for v in y]
    n = len(x)
    sx, sy = sum(x), sum(y)
    dx = [n * v - sx for v in x]
    dy = [n * v - sy for v in y]
    sxx = sum(d * d for d in dx)
    syy = sum(d * d for d in dy)
    sxy = sum(a * b for a, b in zip(dx, dy))
    with localcontext() as ctx:
        ctx.prec = digits
        return Decimal(sxy) / (Decimal(sxx) * Decimal(syy)).sqrt()
