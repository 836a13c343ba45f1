import math

import numpy as np
import pytest
from oracles import binomial_ok, sets_with_resemblance

from securelsh.lsh import collision_model, embed, embed_bits
from securelsh.noise import (
    NoiseParams,
    NoisyLSHEmbedder,
    corrupt_bit,
    corrupt_bits,
    noisy_collision,
    noisy_embed,
    noisy_embed_bits,
    required_f,
)
from securelsh.scheme import SchemeConfig
from securelsh.secure import PrivacyBudget

N = 100_000


def within_3sigma(m, n, p):
    return abs(m / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_f_zero_is_identity():
    B = np.random.default_rng(0).integers(0, 2, (5, 300), dtype=np.uint8)
    assert np.array_equal(corrupt_bits(B, NoiseParams(f=0.0, seed=3)), B)
    assert corrupt_bit(1, NoiseParams(f=0.0), 7) == 1


def test_f_one_is_coin():
    B = np.ones((1, N), dtype=np.uint8)
    out = corrupt_bits(B, NoiseParams(f=1.0, seed=4))
    assert within_3sigma(int(out.sum()), N, 0.5)


def test_corrupt_bit_deterministic_per_trial():
    p = NoiseParams(f=0.5, seed=9)
    assert [corrupt_bit(0, p, t) for t in range(50)] == [corrupt_bit(0, p, t) for t in range(50)]
    assert len({tuple(corrupt_bit(0, p, t) for t in range(50)), tuple(corrupt_bit(0, NoiseParams(0.5, seed=10), t) for t in range(50))}) == 2


def test_minhash_noise_collision_at_half():
    x, y = sets_with_resemblance(0.5)
    cfg = SchemeConfig.create("minhash", 1, N, 12)
    B = noisy_embed_bits([x, y], cfg, NoiseParams(f=0.5, seed=1), [0, 1])
    assert within_3sigma(int((B[0] == B[1]).sum()), N, 0.625)
    assert noisy_collision("minhash", 0.5, 0.5) == pytest.approx(0.625)


def test_projection_sigma_zero_is_vanilla():
    X = np.random.default_rng(2).standard_normal((4, 9))
    cfg = SchemeConfig.create("simhash", 1, 256, 5)
    B = noisy_embed_bits(X, cfg, NoiseParams(sigma=0.0, mode="projection"))
    assert np.array_equal(B, embed_bits(X, cfg))


def test_bitflip_f_one_half_matches():
    cfg = SchemeConfig.create("simhash", 1, 4096, 5)
    x = np.arange(1.0, 8.0)
    a = embed(x, cfg)
    b = noisy_embed(x, cfg, NoiseParams(f=1.0, seed=2))
    assert within_3sigma(int((a.bits == b.bits).sum()), 4096, 0.5)


def test_identical_inputs_f02():
    cfg = SchemeConfig.create("simhash", 1, N, 6)
    x = np.array([[0.2, 0.4, -1.0]] * 2)
    B = noisy_embed_bits(x, cfg, NoiseParams(f=0.2, seed=3), [0, 1])
    assert within_3sigma(int((B[0] == B[1]).sum()), N, 0.9)


def test_projection_noise_needs_simhash_and_k1():
    cfg = SchemeConfig.create("minhash", 1, 8, 0)
    with pytest.raises(ValueError, match="mode requires SimHash"):
        noisy_embed_bits([{1}], cfg, NoiseParams(sigma=1.0, mode="projection"))
    with pytest.raises(ValueError):
        noisy_embed_bits(np.ones((1, 3)), SchemeConfig.create("simhash", 2, 8, 0), NoiseParams(f=0.1))
    with pytest.raises(ValueError):
        NoiseParams(f=1.5)
    with pytest.raises(ValueError):
        NoiseParams(mode="laplace")


def test_required_f_examples():
    assert required_f("minhash", PrivacyBudget(0.75, 0.05)) == pytest.approx(1 - 0.1 / 0.75)
    assert required_f("minhash", PrivacyBudget(0.75, 0.05)) == pytest.approx(0.8667, abs=1e-4)
    assert required_f("simhash", PrivacyBudget(0.75, 0.05)) == pytest.approx(0.8148, abs=1e-4)
    P = collision_model("minhash", 0.6, 1)
    assert required_f("minhash", PrivacyBudget(0.6, P - 0.5 - 1e-12)) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        required_f("simhash", PrivacyBudget(0.0, 0.05))


@pytest.mark.parametrize("family,s0", [("minhash", 0.75), ("minhash", 0.4), ("simhash", 0.75), ("simhash", 0.2)])
def test_noise_floor_is_exactly_epsilon_secure(family, s0):
    f = required_f(family, PrivacyBudget(s0, 0.05))
    assert noisy_collision(family, s0, f) == pytest.approx(0.55, abs=1e-12)


def test_utility_collapse_vs_secure():
    f = required_f("minhash", PrivacyBudget(0.75, 0.05))
    noisy = noisy_collision("minhash", 0.95, f)
    assert noisy == pytest.approx(0.5633, abs=1e-4)
    assert noisy < 0.60 < collision_model("minhash", 0.95, 8)


def test_noise_is_resampled_per_vector():
    cfg = SchemeConfig.create("simhash", 1, 2000, 6)
    x = np.array([[1.0, 2.0, 3.0]] * 2)
    B = noisy_embed_bits(x, cfg, NoiseParams(sigma=2.0, mode="projection"), [10, 11])
    assert not np.array_equal(B[0], B[1])
    C = noisy_embed_bits(x, cfg, NoiseParams(sigma=2.0, mode="projection"), [10, 10])
    assert np.array_equal(C[0], C[1])


def test_noisy_embedder():
    X = np.random.default_rng(3).standard_normal((10, 4))
    est = NoisyLSHEmbedder(n_bits=32, mode="projection", sigma=0.5).fit(X)
    assert est.transform(X).shape == (10, 32)
    assert np.array_equal(est.transform(X, ids=np.arange(10)), est.transform(X))
    with pytest.raises(ValueError):
        NoisyLSHEmbedder("minhash", mode="projection").fit([{1}])


def test_corrupt_bit_replace_rate_is_f():
    p = NoiseParams(f=0.3, seed=5)
    n = 20000
    flips = sum(corrupt_bit(0, p, t) for t in range(n))
    # P(output 1) = f / 2
    assert binomial_ok(flips, n, 0.15)
