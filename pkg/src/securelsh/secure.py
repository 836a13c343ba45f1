"""Secure k-composition of LSH bits and the privacy-budget calculus.

A secure bit feeds k independent base hashes through a universal hash
``((r_{k+1} + sum r_i x_i) mod p) mod 2``.  Two inputs then collide with
probability ``(P**k + 1) / 2`` where ``P`` is the base collision
probability, so pairs below a similarity threshold look like coin flips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._hashing import MERSENNE61, is_prime, universal_bit
from ._validation import check_dense, check_sets, is_set_input
from .lsh import (
    MINHASH_BITS,
    base_collision,
    collision_model,
    inner_hashes,
    minhash_values,
    projection_vectors,
    vanilla_bits,
)
from .scheme import BitEmbedding, FamilyKind, SchemeConfig

LN2 = math.log(2.0)


def _universal_bit_generic(values, r, p):
    """Exact big-integer h_univ for moduli other than 2**61 - 1."""
    values = np.asarray(values, dtype=np.uint64).astype(object)
    r = np.asarray(r, dtype=np.uint64).astype(object)
    k = values.shape[-1]
    acc = r[..., k] + (r[..., :k] * values).sum(axis=-1)
    return (np.vectorize(lambda a: (a % p) % 2, otypes=[np.uint8]))(acc)


def compose(inner: np.ndarray, universal: np.ndarray, p: int = MERSENNE61) -> np.ndarray:
    """h_univ over the last axis of ``inner`` (n, l, k) -> (n, l) bits."""
    if p == MERSENNE61:
        return universal_bit(inner, universal)
    return _universal_bit_generic(inner, universal, p)


def secure_bit(x, family, inner_seeds, universal_seeds, p: int = MERSENNE61) -> int:
    """One secure bit h_univ(h_1(x), ..., h_k(x)), computed with exact integers.

    ``inner_seeds`` are k permutation keys (MinHash) or projection seeds
    (SimHash); ``universal_seeds`` are r_1..r_{k+1}.
    """
    family = FamilyKind.parse(family)
    inner_seeds = [int(s) & (2**64 - 1) for s in np.atleast_1d(inner_seeds)]
    r = [int(v) for v in np.atleast_1d(universal_seeds)]
    k = len(inner_seeds)
    if k == 0:
        raise ValueError("composition order k must be >= 1")
    if len(r) != k + 1:
        raise ValueError(f"need k + 1 = {k + 1} universal seeds, got {len(r)}")
    if not is_prime(p):
        raise ValueError(f"universal-hash modulus {p} is not prime")
    if any(not 1 <= v < p for v in r):
        raise ValueError("universal seeds must lie in [1, p - 1]")
    seeds = np.array(inner_seeds, dtype=np.uint64)
    if family.is_minhash:
        (ids,) = check_sets([x])
        values = [int(v) for v in minhash_values(ids, seeds)]
    else:
        xv = check_dense(x)[0]
        W = projection_vectors(seeds, xv.size, family.style)
        values = [int(b) for b in (W @ xv >= 0)]
    if max(values) >= p:
        raise ValueError("modulus p must exceed every hashed value")
    acc = r[k] + sum(ri * vi for ri, vi in zip(r, values))
    return (acc % p) % 2


def secure_embed_bits(X, cfg: SchemeConfig) -> np.ndarray:
    """Batch S(x); (n, l) uint8.  ``k == 1`` is the vanilla embedding."""
    if cfg.family.is_minhash and cfg.seeds.p <= 2**MINHASH_BITS:
        raise ValueError("modulus p must exceed every hashed value")
    inner = inner_hashes(X, cfg)
    if cfg.k == 1:
        return vanilla_bits(inner, cfg)
    return compose(inner, cfg.seeds.universal_seeds(cfg.l, cfg.k), cfg.seeds.p)


def secure_embed(x, cfg: SchemeConfig) -> BitEmbedding:
    """S(x): the concatenation of l independent secure bits."""
    if cfg.family.is_minhash or isinstance(x, (set, frozenset)):
        batch = [x]
    else:
        batch = np.asarray(x, dtype=np.float64)[None, :]
    return BitEmbedding(secure_embed_bits(batch, cfg)[0], cfg.scheme_id)


# -- privacy budget -----------------------------------------------------------

@dataclass(frozen=True)
class PrivacyBudget:
    """Non-neighbours (sim <= s0) may collide with probability <= 1/2 + epsilon."""

    s0: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")
        if not -1.0 <= self.s0 <= 1.0:
            raise ValueError("s0 must be a valid similarity")


def _secure_at(family: FamilyKind, s0: float, epsilon: float, k: int) -> bool:
    """Exact test of collision_model(family, s0, k) <= 1/2 + epsilon."""
    eps = Fraction(epsilon)
    if family.is_minhash:
        # (s0**k + 1)/2 <= 1/2 + eps  <=>  s0**k <= 2 eps, in rationals
        return Fraction(s0) ** k <= 2 * eps
    with mpmath.workdps(80):
        P = 1 - mpmath.acos(mpmath.mpf(s0)) / mpmath.pi
        if k == 1:
            return P <= mpmath.mpf(0.5) + mpmath.mpf(epsilon)
        return P**k <= 2 * mpmath.mpf(epsilon)


def required_k(family, budget: PrivacyBudget) -> int:
    """Smallest k making the composed family epsilon-secure at s0.

    Starts from ``ceil(log 2eps / log P(s0))`` and then walks to the least
    integer that passes an exact closed-form check.
    """
    family = FamilyKind.parse(family)
    P = float(base_collision(family, budget.s0))
    if not 0.0 < P < 1.0:
        raise ValueError(f"base collision probability {P} at s0 must lie in (0, 1)")
    k = max(1, math.ceil(math.log(2 * budget.epsilon) / math.log(P)))
    while not _secure_at(family, budget.s0, budget.epsilon, k):
        k += 1
    while k > 1 and _secure_at(family, budget.s0, budget.epsilon, k - 1):
        k -= 1
    return k


def channel_mutual_info(P) -> float:
    """Exact MI (bits) between two bits that agree w.p. P, uniform marginals."""
    P = float(P)
    out = 0.0
    for q in (P, 1.0 - P):
        if q > 0:
            out += q * math.log2(2.0 * q)
    return out


def mutual_info_bound_from_p(P, l: int = 1) -> float:
    """l * (2P - 1) * log2(P / (1 - P))."""
    P = float(P)
    if P >= 1.0 or P <= 0.0:
        raise ValueError("bound diverges at identical inputs")
    return l * (2.0 * P - 1.0) * math.log2(P / (1.0 - P))


def mutual_info_bound(family, sim, k: int, l: int = 1) -> float:
    """Upper bound (bits) on I(S(x); S(y)) for l secure bits at similarity ``sim``."""
    P = collision_model(family, sim, k)
    if P >= 1.0:
        raise ValueError("bound diverges at identical inputs")
    return mutual_info_bound_from_p(P, l)


def triangulation_info_bound(m: int, epsilon: float) -> float:
    """Leakage bound (bits) about h(x) from m independent probe hashes."""
    if m < 1:
        raise ValueError("probe count m must be >= 1")
    if not 0.0 <= epsilon < 0.5:
        raise ValueError("epsilon must lie in [0, 0.5)")
    if epsilon == 0.0:
        return 0.0
    return 2.0 * m * epsilon * math.log2((1 + 2 * epsilon) / (1 - 2 * epsilon))


def rho(p1: float, p2: float) -> float:
    """Vanilla LSH query exponent log p1 / log p2."""
    return math.log(p1) / math.log(p2)


def _check_rho_args(p1, p2, k):
    if not 0.0 < p2 < p1 <= 1.0:
        raise ValueError("need 0 < p2 < p1 <= 1")
    if k < 1:
        raise ValueError("k must be >= 1")


def rho_prime(p1: float, p2: float, k: int) -> float:
    """Query exponent after composition: log((p1^k+1)/2) / log((p2^k+1)/2)."""
    _check_rho_args(p1, p2, k)
    num = math.log1p(p1**k) - LN2
    den = math.log1p(p2**k) - LN2
    return num / den


def rho_prime_exact(p1, p2, k: int, dps: int = 0):
    """``rho_prime`` as an mpmath number, precise enough to order consecutive k.

    For small p the terms p**k vanish next to log 2 in double precision;
    the working precision here grows with k * log10(1/p2).
    """
    _check_rho_args(float(p1), float(p2), k)
    digits = dps or 30 + int(k * -math.log10(float(p2))) + 10
    with mpmath.workdps(digits):
        p1, p2 = mpmath.mpf(p1), mpmath.mpf(p2)
        return mpmath.log((p1**k + 1) / 2) / mpmath.log((p2**k + 1) / 2)


@dataclass(frozen=True)
class TradeoffReport:
    """Sensitivity of the base family at (s_near, s_far) and the cost of k.

    ``rho_prime`` composes the raw base hashes; ``rho_prime_post_rehash``
    plugs the 1-bit rehashed probabilities (P + 1)/2 into the same formula.
    """

    p1: float
    p2: float
    k: int
    rho: float
    rho_prime: float
    rho_prime_post_rehash: float
    mi_bound_bits: float


def tradeoff_report(family, s_near: float, s_far: float, k: int) -> TradeoffReport:
    family = FamilyKind.parse(family)
    p1 = float(base_collision(family, s_near))
    p2 = float(base_collision(family, s_far))
    if not 0.0 < p2 < p1 < 1.0:
        raise ValueError("need 0 < p2 < p1 < 1; choose s_far < s_near < exact match")
    return TradeoffReport(
        p1=p1,
        p2=p2,
        k=int(k),
        rho=rho(p1, p2),
        rho_prime=rho_prime(p1, p2, k),
        rho_prime_post_rehash=rho_prime((p1 + 1) / 2, (p2 + 1) / 2, k),
        mi_bound_bits=mutual_info_bound(family, s_far, k),
    )


# -- estimator ------------------------------------------------------------------

class SecureLSHEmbedder(TransformerMixin, BaseEstimator):
    """Transform vectors (or sets) into l-bit secure LSH signatures.

    Parameters
    ----------
    family : {"simhash", "minhash", "simhash:gaussian"}
    k : int
        Composition order; 1 gives vanilla LSH.
    n_bits : int
        Signature length l.
    random_state : int
        Master seed from which every hash seed is derived.

    Attributes
    ----------
    scheme_ : SchemeConfig
    scheme_id_ : str
    n_features_in_ : int
        Only set for dense input.
    """

    def __init__(self, family="simhash", k=4, n_bits=64, random_state=0):
        self.family = family
        self.k = k
        self.n_bits = n_bits
        self.random_state = random_state

    def fit(self, X, y=None):
        self.scheme_ = SchemeConfig.create(self.family, self.k, self.n_bits, self.random_state)
        self.scheme_id_ = self.scheme_.scheme_id
        if self.scheme_.family.is_minhash:
            check_sets(X)
        else:
            if is_set_input(X):
                raise ValueError("incompatible input: SimHash needs dense vectors")
            self.n_features_in_ = check_dense(X).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "scheme_")
        if not self.scheme_.family.is_minhash:
            X = check_dense(X)
            if X.shape[1] != self.n_features_in_:
                raise ValueError(
                    f"X has {X.shape[1]} features, but {type(self).__name__} "
                    f"was fitted with {self.n_features_in_}"
                )
        return secure_embed_bits(X, self.scheme_)

    def embeddings(self, X) -> list[BitEmbedding]:
        return [BitEmbedding(row, self.scheme_id_) for row in self.transform(X)]
