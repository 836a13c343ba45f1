"""Noise-addition baseline: randomly corrupted vanilla 1-bit LSH.

Two mechanisms are provided.  ``bitflip`` replaces each vanilla bit by a
fair coin with probability ``f``; ``projection`` adds N(0, sigma^2) to each
SimHash projection of the unit-normalised input before taking the sign.
The bit-flip replace mask is keyed by (noise seed, bit) and shared by all
vectors; the replacement coin is drawn per (vector id, bit).  Two corrupted
signatures then collide per bit with probability (1 - f) P + f / 2.
Projection noise is drawn per (vector id, bit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._hashing import derive, to_unit_float
from ._validation import check_dense
from .lsh import collision_model, inner_hashes, projections, vanilla_bits
from .scheme import DOMAIN_NOISE, BitEmbedding, FamilyKind, SchemeConfig, scheme_digest
from .secure import PrivacyBudget

BITFLIP = "bitflip"
PROJECTION = "projection"


@dataclass(frozen=True)
class NoiseParams:
    f: float = 0.0
    sigma: float = 0.0
    seed: int = 0
    mode: str = BITFLIP

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed))
        if not 0.0 <= self.f <= 1.0:
            raise ValueError("corruption probability f must lie in [0, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.mode not in (BITFLIP, PROJECTION):
            raise ValueError(f"unknown noise mode {self.mode!r}")


def _noise_words(params: NoiseParams, vector_ids, bit_ids, slot: int):
    return derive(params.seed, DOMAIN_NOISE, vector_ids, bit_ids, slot)


def corrupt_bits(B, params: NoiseParams, vector_ids=None) -> np.ndarray:
    """Corrupt an (n, l) bit matrix; row r uses noise stream ``vector_ids[r]``."""
    B = np.asarray(B, dtype=np.uint8)
    B2 = np.atleast_2d(B)
    n, l = B2.shape
    vid = np.arange(n) if vector_ids is None else np.asarray(vector_ids)
    vid = vid.astype(np.int64)[:, None]
    bit = np.arange(l)[None, :]
    replace = to_unit_float(_noise_words(params, 0, bit, 4)) <= params.f
    coin = (_noise_words(params, vid, bit, 1) >> np.uint64(63)).astype(np.uint8)
    out = np.where(replace, coin, B2).astype(np.uint8)
    return out.reshape(B.shape)


def corrupt_bit(b: int, params: NoiseParams, trial_id: int) -> int:
    """h_corr: a fair coin with probability f, else ``b``.

    Trial t is bit t of vector t in the ``corrupt_bits`` stream, so trials
    draw independent replace decisions.
    """
    if to_unit_float(_noise_words(params, 0, trial_id, 4)) <= params.f:
        return int(_noise_words(params, trial_id, trial_id, 1) >> np.uint64(63))
    return int(b)


def noisy_scheme_id(cfg: SchemeConfig, params: NoiseParams) -> str:
    d = cfg.to_dict()
    d.update(noise=params.mode, noise_seed=params.seed)
    d.update(f=params.f) if params.mode == BITFLIP else d.update(sigma=params.sigma)
    return scheme_digest(d)


def noisy_embed_bits(X, cfg: SchemeConfig, params: NoiseParams, vector_ids=None) -> np.ndarray:
    """Batch noisy vanilla embedding, (n, l) uint8."""
    if cfg.k != 1:
        raise ValueError("the noise baseline corrupts vanilla LSH (k=1)")
    if params.mode == BITFLIP:
        return corrupt_bits(vanilla_bits(inner_hashes(X, cfg), cfg), params, vector_ids)
    if cfg.family.is_minhash:
        raise ValueError("mode requires SimHash")
    X = check_dense(X)
    proj = projections(X, cfg)[..., 0] / np.linalg.norm(X, axis=1, keepdims=True)
    if params.sigma > 0:
        n, l = proj.shape
        vid = (np.arange(n) if vector_ids is None else np.asarray(vector_ids)).astype(np.int64)
        vid = vid[:, None]
        bit = np.arange(l)[None, :]
        u1 = to_unit_float(_noise_words(params, vid, bit, 2))
        u2 = to_unit_float(_noise_words(params, vid, bit, 3))
        proj = proj + params.sigma * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return (proj >= 0).astype(np.uint8)


def noisy_embed(x, cfg: SchemeConfig, params: NoiseParams, trial_id: int = 0) -> BitEmbedding:
    batch = [x] if cfg.family.is_minhash or isinstance(x, (set, frozenset)) else np.asarray(x, float)[None]
    bits = noisy_embed_bits(batch, cfg, params, [trial_id])[0]
    return BitEmbedding(bits, noisy_scheme_id(cfg, params))


def noisy_collision(family, sim, f: float):
    """(1 - f) * P_1bit(sim) + f / 2."""
    return (1.0 - f) * collision_model(family, sim, 1) + f / 2.0


def required_f(family, budget: PrivacyBudget) -> float:
    """Least corruption probability making h_corr epsilon-secure at s0."""
    P = collision_model(FamilyKind.parse(family), budget.s0, 1)
    if P <= 0.5:
        raise ValueError("vanilla LSH is already secure at this threshold (P(s0) <= 1/2)")
    return max(0.0, 1.0 - budget.epsilon / (P - 0.5))


class NoisyLSHEmbedder(TransformerMixin, BaseEstimator):
    """Vanilla LSH signatures with bit-flip or projection noise.

    ``transform`` keys the noise of row r by ``ids[r]`` (default: the row
    index), so pass distinct ids when embedding disjoint collections.
    """

    def __init__(self, family="simhash", n_bits=64, mode=PROJECTION, f=0.0, sigma=0.0,
                 random_state=0, noise_seed=1):
        self.family = family
        self.n_bits = n_bits
        self.mode = mode
        self.f = f
        self.sigma = sigma
        self.random_state = random_state
        self.noise_seed = noise_seed

    def fit(self, X, y=None):
        self.scheme_ = SchemeConfig.create(self.family, 1, self.n_bits, self.random_state)
        self.params_ = NoiseParams(self.f, self.sigma, self.noise_seed, self.mode)
        if self.mode == PROJECTION and self.scheme_.family.is_minhash:
            raise ValueError("mode requires SimHash")
        self.scheme_id_ = noisy_scheme_id(self.scheme_, self.params_)
        if not self.scheme_.family.is_minhash:
            self.n_features_in_ = check_dense(X).shape[1]
        return self

    def transform(self, X, ids=None):
        check_is_fitted(self, "scheme_")
        return noisy_embed_bits(X, self.scheme_, self.params_, ids)
