"""Independent constructions and reference values shared by the tests.

Nothing here calls into the package; each helper is a plain restatement of
the quantity it produces.
"""

import math

import numpy as np
from scipy.stats import binom

SIM_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)
K_GRID = (1, 2, 4, 6, 8, 12)


def sets_with_resemblance(R, universe=100):
    """Two sets over ``range(universe)`` whose union is the universe and |x & y| = R * universe."""
    inter = round(R * universe)
    if abs(inter - R * universe) > 1e-9:
        raise ValueError("resemblance not representable at this universe size")
    rest = universe - inter
    only_x = rest // 2
    x = set(range(inter + only_x))
    y = set(range(inter)) | set(range(inter + only_x, universe))
    return x, y


def vectors_with_cosine(c, dim, rng):
    """Unit x and y with x . y == c (to rounding), via Gram-Schmidt on Gaussian draws."""
    a = rng.standard_normal(dim)
    b = rng.standard_normal(dim)
    x = a / np.linalg.norm(a)
    b = b - (b @ x) * x
    u = b / np.linalg.norm(b)
    return x, c * x + math.sqrt(max(0.0, 1 - c * c)) * u


def minhash_law(R, k):
    return (R**k + 1) / 2


def simhash_law(c, k):
    P = 1 - math.acos(c) / math.pi
    return P if k == 1 else (P**k + 1) / 2


def binomial_ok(successes, n, p, level=0.99):
    """True if the count lies in the central ``level`` acceptance region of Bin(n, p)."""
    lo, hi = binom.interval(level, n, p)
    return lo <= successes <= hi


def random_unit(rng, n, dim):
    X = rng.standard_normal((n, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def bucket_hit(P, b, T):
    """Probability a pair with per-bit collision P shares a bucket in at least one of T b-bit tables."""
    return 1 - (1 - P**b) ** T


def banded_recall(P, tables):
    """Exact P(some table's bits all agree) for i.i.d. per-bit agreement P.

    Inclusion-exclusion over the table subsets: a set S of tables all hit
    with probability P^|union of their positions|.
    """
    masks = [sum(1 << int(p) for p in pos) for pos in tables]
    T = len(masks)
    union = [0] * (1 << T)
    total = 0.0
    for s in range(1, 1 << T):
        low = (s & -s).bit_length() - 1
        union[s] = union[s & (s - 1)] | masks[low]
        sign = 1 if bin(s).count("1") % 2 else -1
        total += sign * P ** bin(union[s]).count("1")
    return total
