"""Vanilla LSH families and their closed-form collision laws.

MinHash realises each permutation of the universe as a keyed 64-bit
bijection of the element ids (truncated to 48 bits), and SimHash draws its
projection vectors from a keyed PRF.  Both are pure functions of their
inputs and seeds.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numba
import numpy as np

from ._hashing import derive, fmix64, to_unit_float
from ._validation import check_dense, check_sets, is_set_input
from .scheme import (
    GAUSSIAN,
    MINHASH,
    RADEMACHER,
    SIMHASH,
    BitEmbedding,
    FamilyKind,
    SchemeConfig,
    SchemeMismatchError,
)

MINHASH_BITS = 48
REHASH_WORD_BITS = 64


# -- MinHash -----------------------------------------------------------------

def permute(ids, keys):
    """Keyed pseudorandom mapping of element ids to 48-bit values.

    Broadcasts ``keys[..., None]`` against ``ids``.
    """
    ids = np.asarray(ids, dtype=np.uint64)
    keys = np.asarray(keys, dtype=np.uint64)[..., None]
    with np.errstate(over="ignore"):
        mixed = fmix64(fmix64(ids ^ keys) + keys)
    return mixed >> np.uint64(64 - MINHASH_BITS)


_SHIFT = np.uint64(64 - MINHASH_BITS)
_K1 = np.uint64(0xBF58476D1CE4E5B9)
_K2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True)
def _fmix(z):
    z = (z ^ (z >> np.uint64(30))) * _K1
    z = (z ^ (z >> np.uint64(27))) * _K2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _minhash_kernel(ids, keys):
    out = np.empty(keys.size, dtype=np.uint64)
    for j in range(keys.size):
        key = keys[j]
        best = np.uint64(0xFFFFFFFFFFFFFFFF)
        for e in ids:
            v = _fmix(_fmix(e ^ key) + key) >> _SHIFT
            if v < best:
                best = v
        out[j] = best
    return out


def minhash_values(ids, keys):
    """min over the set of the permuted ids, for every key in ``keys``.

    Same values as ``permute(ids, keys).min(axis=-1)`` without the
    (keys, ids) temporary.
    """
    ids = np.ascontiguousarray(ids, dtype=np.uint64).ravel()
    keys = np.asarray(keys, dtype=np.uint64)
    if ids.size == 0:
        raise ValueError("empty input set")
    flat = _minhash_kernel(ids, np.ascontiguousarray(keys).ravel())
    return flat.reshape(keys.shape)


def minhash(x, seed) -> int:
    """MinHash of one non-empty set under the permutation keyed by ``seed``."""
    (ids,) = check_sets([x])
    return int(minhash_values(ids, np.uint64(int(seed) & (2**64 - 1))))


# -- SimHash -----------------------------------------------------------------

def projection_vectors(seeds, dim: int, style: str = RADEMACHER) -> np.ndarray:
    """Projection vectors for each seed; shape ``seeds.shape + (dim,)``."""
    seeds = np.asarray(seeds, dtype=np.uint64)[..., None]
    d = np.arange(dim, dtype=np.uint64)
    if style == RADEMACHER:
        words = derive(seeds, d)
        return 1.0 - 2.0 * (words >> np.uint64(63)).astype(np.float64)
    if style == GAUSSIAN:
        u1 = to_unit_float(derive(seeds, 2 * d))
        u2 = to_unit_float(derive(seeds, 2 * d + 1))
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    raise ValueError(f"unknown projection style {style!r}")


def simhash_bit(x, seed, style: str = RADEMACHER) -> int:
    """1 iff w . x >= 0 for the projection vector keyed by ``seed``."""
    x = check_dense(x)[0]
    w = projection_vectors(np.uint64(int(seed) & (2**64 - 1)), x.size, style)
    return int(w @ x >= 0)


# -- 1-bit rehash --------------------------------------------------------------

def one_bit_rehash(v, a) -> int:
    """``(a * v mod 2**64) mod 2`` for an odd multiplier ``a``."""
    if int(a) % 2 == 0:
        raise ValueError("seed must be odd")
    if int(v) < 0:
        raise ValueError("value must be non-negative")
    return ((int(a) * int(v)) % (1 << REHASH_WORD_BITS)) % 2


def rehash_bits(values, multipliers) -> np.ndarray:
    """Vectorised :func:`one_bit_rehash`; multipliers broadcast."""
    multipliers = np.asarray(multipliers, dtype=np.uint64)
    if np.any(multipliers % np.uint64(2) == 0):
        raise ValueError("seed must be odd")
    with np.errstate(over="ignore"):
        prod = np.asarray(values, dtype=np.uint64) * multipliers
    return (prod & np.uint64(1)).astype(np.uint8)


# -- inner hashes and embeddings ------------------------------------------------

def _as_batch(X, family: FamilyKind):
    if family.is_minhash:
        try:
            return check_sets(X)
        except TypeError as exc:
            raise ValueError("incompatible input: MinHash needs sets of integer ids") from exc
    if is_set_input(X):
        raise ValueError("incompatible input: SimHash needs dense vectors")
    return check_dense(X)


# elements per temporary (l-chunk, k, width) block
_CHUNK_ELEMS = 1 << 22


def _row_chunks(l: int, per_row: int):
    step = max(1, _CHUNK_ELEMS // max(per_row, 1))
    for start in range(0, l, step):
        yield slice(start, min(l, start + step))


def projections(X, cfg: SchemeConfig) -> np.ndarray:
    """Raw SimHash projections, shape (n, l, k)."""
    X = check_dense(X, allow_zero=True)
    seeds = cfg.seeds.projection_seeds(cfg.l, cfg.k)
    out = np.empty((X.shape[0], cfg.l, cfg.k))
    for rows in _row_chunks(cfg.l, cfg.k * X.shape[1]):
        W = projection_vectors(seeds[rows], X.shape[1], cfg.family.style)
        out[:, rows] = np.einsum("nd,lkd->nlk", X, W)
    return out


def inner_hashes(X, cfg: SchemeConfig) -> np.ndarray:
    """All l*k base LSH values, shape (n, l, k).

    MinHash gives 48-bit integers, SimHash gives sign bits.
    """
    batch = _as_batch(X, cfg.family)
    if cfg.family.name == SIMHASH:
        return (projections(batch, cfg) >= 0).astype(np.uint64)
    keys = cfg.seeds.permutation_keys(cfg.l, cfg.k)
    out = np.empty((len(batch), cfg.l, cfg.k), dtype=np.uint64)
    for n, ids in enumerate(batch):
        out[n] = minhash_values(ids, keys)
    return out


def vanilla_bits(inner: np.ndarray, cfg: SchemeConfig) -> np.ndarray:
    """1-bit vanilla LSH from slot 0 of the inner hashes, shape (n, l)."""
    first = inner[..., 0]
    if cfg.family.is_minhash:
        return rehash_bits(first, cfg.seeds.rehash_multipliers(cfg.l))
    return first.astype(np.uint8)


def embed_bits(X, cfg: SchemeConfig) -> np.ndarray:
    """Batch vanilla embedding; returns an (n, l) uint8 matrix."""
    if cfg.k != 1:
        raise ValueError("embed is vanilla LSH (k=1); use secure_embed for k > 1")
    return vanilla_bits(inner_hashes(X, cfg.with_k(1)), cfg)


def embed(x, cfg: SchemeConfig) -> BitEmbedding:
    """E(x): l independent vanilla 1-bit hashes, concatenated."""
    if cfg.family.is_minhash or isinstance(x, (set, frozenset)):
        batch = [x]
    else:
        batch = np.asarray(x, dtype=np.float64)[None, :]
    return BitEmbedding(embed_bits(batch, cfg)[0], cfg.scheme_id)


# -- collision laws --------------------------------------------------------------

def base_collision(family, sim):
    """Collision probability of one raw (un-rehashed) base hash."""
    family = FamilyKind.parse(family)
    sim = np.asarray(sim, dtype=np.float64)
    if family.is_minhash:
        if np.any((sim < 0) | (sim > 1)):
            raise ValueError("resemblance must lie in [0, 1]")
        return sim
    if np.any((sim < -1) | (sim > 1)):
        raise ValueError("cosine similarity must lie in [-1, 1]")
    return 1.0 - np.arccos(sim) / np.pi


def collision_model(family, sim, k: int = 1):
    """Closed-form per-bit collision probability of a scheme.

    MinHash (1-bit rehashed) and every composed scheme follow
    ``(P**k + 1) / 2``; vanilla SimHash (k=1) keeps the raw sign-bit law
    ``1 - theta/pi``.
    """
    family = FamilyKind.parse(family)
    if int(k) < 1:
        raise ValueError("k must be >= 1")
    P = base_collision(family, sim)
    if family.name == SIMHASH and k == 1:
        out = P
    else:
        out = (P ** int(k) + 1.0) / 2.0
    return float(out) if np.ndim(out) == 0 else out


class SimilarityEstimate(NamedTuple):
    similarity: float
    saturated: bool
    match_fraction: float


def invert_collision(family, match_fraction, k: int = 1) -> SimilarityEstimate:
    """Invert :func:`collision_model` at an observed match fraction.

    The fraction is clamped into the invertible range; ``saturated`` is set
    when a composed scheme sees m/l <= 1/2 or when clamping occurred.
    """
    family = FamilyKind.parse(family)
    frac = float(match_fraction)
    if not 0.0 <= frac <= 1.0:
        raise ValueError("match fraction must lie in [0, 1]")
    composed = k > 1 or family.is_minhash
    if composed:
        saturated = frac <= 0.5 if k > 1 else frac < 0.5
        P = max(2.0 * frac - 1.0, 0.0) ** (1.0 / k)
    else:
        saturated = False
        P = frac
    if family.is_minhash:
        sim = P
    else:
        sim = math.cos(math.pi * (1.0 - P))
    return SimilarityEstimate(sim, bool(saturated), frac)


def estimate_similarity(a: BitEmbedding, b: BitEmbedding, family, k: int = 1) -> SimilarityEstimate:
    """Similarity estimate f^{-1}(m/l) from the bit matches of two embeddings."""
    if a.scheme_id != b.scheme_id:
        raise SchemeMismatchError(f"scheme mismatch: {a.scheme_id} vs {b.scheme_id}")
    return invert_collision(family, a.matches(b) / len(a), k)


__all__ = [
    "MINHASH",
    "SIMHASH",
    "SimilarityEstimate",
    "base_collision",
    "collision_model",
    "embed",
    "embed_bits",
    "estimate_similarity",
    "inner_hashes",
    "invert_collision",
    "minhash",
    "minhash_values",
    "one_bit_rehash",
    "permute",
    "projection_vectors",
    "projections",
    "rehash_bits",
    "simhash_bit",
    "vanilla_bits",
]
