import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import binomial_ok, sets_with_resemblance, vectors_with_cosine

from securelsh.lsh import (
    collision_model,
    embed,
    embed_bits,
    estimate_similarity,
    invert_collision,
    minhash,
    minhash_values,
    one_bit_rehash,
    permute,
    projection_vectors,
    simhash_bit,
)
from securelsh.scheme import BitEmbedding, SchemeConfig, SchemeMismatchError

N = 100_000


def three_sigma(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)


# -- minhash ----------------------------------------------------------------------

def test_minhash_singleton_is_mapped_element():
    assert minhash({5}, 1234) == int(permute(np.array([5]), np.uint64(1234))[0])


def test_minhash_identical_sets_collide():
    for seed in range(50):
        assert minhash({3, 9, 27}, seed) == minhash({27, 9, 3}, seed)


def test_minhash_collision_rate_at_half_resemblance():
    keys = np.arange(N, dtype=np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    a = minhash_values(np.array([1, 2, 3], np.uint64), keys)
    b = minhash_values(np.array([2, 3, 4], np.uint64), keys)
    rate = np.mean(a == b)
    assert abs(rate - 0.5) <= three_sigma(0.5, N)


def test_minhash_values_match_permute():
    ids = np.array([0, 7, 2**40], dtype=np.uint64)
    keys = np.array([[1, 2], [3, 4]], dtype=np.uint64)
    assert np.array_equal(minhash_values(ids, keys), permute(ids, keys).min(axis=-1))
    assert int(permute(ids, keys).max()) < 2**48


def test_minhash_empty_set():
    with pytest.raises(ValueError, match="empty input set"):
        minhash(set(), 1)


# -- simhash ----------------------------------------------------------------------

def test_simhash_scale_invariant_and_antipodal():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(10)
    for seed in range(200):
        assert simhash_bit(x, seed) == simhash_bit(2 * x, seed)
        assert simhash_bit(x, seed) != simhash_bit(-x, seed)


def test_simhash_orthogonal_collision_half():
    seeds = np.arange(N, dtype=np.uint64)
    W = projection_vectors(seeds, 2, "gaussian")
    a = W @ np.array([1.0, 0.0]) >= 0
    b = W @ np.array([0.0, 1.0]) >= 0
    assert abs(np.mean(a == b) - 0.5) <= three_sigma(0.5, N)


def test_simhash_zero_vector():
    with pytest.raises(ValueError, match="undefined direction"):
        simhash_bit(np.zeros(4), 1)


def test_projection_styles():
    R = projection_vectors(np.arange(100, dtype=np.uint64), 50)
    assert set(np.unique(R)) == {-1.0, 1.0}
    G = projection_vectors(np.arange(2000, dtype=np.uint64), 50, "gaussian").ravel()
    assert abs(G.mean()) < 0.01 and abs(G.std() - 1) < 0.01
    with pytest.raises(ValueError):
        projection_vectors(np.arange(2, dtype=np.uint64), 3, "uniform")


# -- rehash -----------------------------------------------------------------------

def test_rehash_basics():
    assert one_bit_rehash(12345, 77) == one_bit_rehash(12345, 77)
    assert one_bit_rehash(0, 12345) == 0
    assert one_bit_rehash(3, 2**64 - 1) == (3 * (2**64 - 1)) % 2**64 % 2
    with pytest.raises(ValueError, match="seed must be odd"):
        one_bit_rehash(5, 4)


def test_minhash_rehash_collision_at_half_resemblance():
    x, y = {1, 2, 3}, {2, 3, 4}
    B = embed_bits([x, y], SchemeConfig.create("minhash", 1, N, 5))
    m = int((B[0] == B[1]).sum())
    assert abs(m / N - 0.75) <= three_sigma(0.75, N)


# -- embeddings -------------------------------------------------------------------

def test_embed_deterministic_and_self_distance():
    cfg = SchemeConfig.create("simhash", 1, 128, 3)
    x = np.linspace(-1, 1, 9)
    assert embed(x, cfg) == embed(x, cfg)
    assert embed(x, cfg).hamming(embed(x.copy(), cfg)) == 0
    assert embed(x, cfg).scheme_id == cfg.scheme_id


def test_embed_minhash_matches_at_r08():
    x, y = sets_with_resemblance(0.8, universe=10)
    matches = [
        int((lambda B: (B[0] == B[1]).sum())(embed_bits([x, y], SchemeConfig.create("minhash", 1, 32, s))))
        for s in range(200)
    ]
    # per draw Bin(32, 0.9); the mean of 200 draws
    assert abs(np.mean(matches) - 28.8) <= 3 * math.sqrt(32 * 0.9 * 0.1 / 200)


def test_embed_incompatible_inputs():
    with pytest.raises(ValueError, match="incompatible input"):
        embed_bits(np.ones((2, 3)), SchemeConfig.create("minhash", 1, 8, 0))
    with pytest.raises(ValueError, match="incompatible input"):
        embed_bits([{1, 2}], SchemeConfig.create("simhash", 1, 8, 0))
    with pytest.raises(ValueError):
        embed_bits(np.ones((1, 3)), SchemeConfig.create("simhash", 2, 8, 0))


# -- collision model and estimation -----------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 5, 12])
def test_collision_model_minhash_endpoints(k):
    assert collision_model("minhash", 1.0, k) == 1.0
    assert collision_model("minhash", 0.0, k) == 0.5


def test_collision_model_values():
    assert collision_model("minhash", 0.5, 2) == 0.625
    assert collision_model("simhash", 0.0, 1) == pytest.approx(0.5)
    assert collision_model("simhash", 0.0, 3) == pytest.approx((0.5**3 + 1) / 2)
    with pytest.raises(ValueError):
        collision_model("minhash", 1.2, 1)
    with pytest.raises(ValueError):
        collision_model("simhash", -1.5, 1)
    with pytest.raises(ValueError):
        collision_model("simhash", 0.5, 0)


@given(st.sampled_from(["minhash", "simhash"]), st.integers(1, 16),
       st.floats(0, 1), st.floats(0, 1))
def test_collision_model_monotone(family, k, a, b):
    lo, hi = sorted((a, b))
    if family == "simhash":
        lo, hi = 2 * lo - 1, 2 * hi - 1
    # non-decreasing in floats; P**k can underflow next to 1 for large k
    assert collision_model(family, hi, k) >= collision_model(family, lo, k)


@pytest.mark.parametrize("family", ["minhash", "simhash"])
@pytest.mark.parametrize("k", [1, 2, 4, 6, 8, 12])
def test_collision_model_strictly_increasing_on_grid(family, k):
    sims = np.linspace(0.3, 1.0, 50)
    vals = collision_model(family, sims, k)
    assert np.all(np.diff(vals) > 0)


def test_estimate_similarity_examples():
    assert invert_collision("minhash", 0.65, 1).similarity == pytest.approx(0.3)
    for fam, k in [("minhash", 1), ("simhash", 1), ("simhash", 4), ("minhash", 8)]:
        assert invert_collision(fam, 1.0, k).similarity == pytest.approx(1.0)
    est = invert_collision("simhash", 0.75, 1)
    assert est.similarity == pytest.approx(math.cos(math.pi / 4))
    # m/l <= 1/2 under composition: clamped to the bottom of the curve
    sat = invert_collision("simhash", 0.45, 4)
    assert sat.saturated and sat.similarity == pytest.approx(-1.0)
    assert invert_collision("minhash", 0.5, 4).similarity == 0.0
    assert not invert_collision("simhash", 0.55, 4).saturated


def test_estimate_similarity_scheme_mismatch():
    a = BitEmbedding([1, 0], "a")
    with pytest.raises(SchemeMismatchError):
        estimate_similarity(a, BitEmbedding([1, 0], "b"), "simhash")


@pytest.mark.parametrize("family", ["minhash", "simhash:gaussian"])
def test_estimator_consistency_at_4096_bits(family):
    rng = np.random.default_rng(11)
    errs = []
    for i, s in enumerate((0.2, 0.5, 0.8, 0.9)):
        if family == "minhash":
            x, y = sets_with_resemblance(s)
        else:
            x, y = vectors_with_cosine(s, 32, rng)
        cfg = SchemeConfig.create(family, 1, 4096, 100 + i)
        est = estimate_similarity(embed(x, cfg), embed(y, cfg), family)
        errs.append(abs(est.similarity - s))
    assert max(errs) < 0.05


def test_collision_law_spot_check():
    x, y = sets_with_resemblance(0.6)
    B = embed_bits([x, y], SchemeConfig.create("minhash", 1, N, 17))
    assert binomial_ok(int((B[0] == B[1]).sum()), N, 0.8)
