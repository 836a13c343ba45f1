import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import mannwhitneyu

from securelsh.attack import (
    AttackScheme,
    PocsParams,
    ProbeSet,
    TriangulationAttack,
    distance_from_fraction,
    estimate_distance,
    pocs,
    project_onto_sphere,
    run_attack,
)
from securelsh.noise import NoiseParams
from securelsh.scheme import BitEmbedding, SchemeMismatchError

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def exact_probes(q, m, rng):
    X = rng.standard_normal((m, q.size))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return ProbeSet(X, np.linalg.norm(X - q, axis=1))


def test_identical_embeddings_distance_zero():
    e = BitEmbedding([1, 0, 1, 1], "s")
    assert estimate_distance(e, e).distance == 0.0


def test_three_quarter_match_distance():
    # theta = pi/4, d = sqrt(2 - 2 cos(pi/4))
    a = BitEmbedding([1] * 8, "s")
    b = BitEmbedding([1] * 6 + [0] * 2, "s")
    d = estimate_distance(a, b).distance
    assert d == pytest.approx(math.sqrt(2 - math.sqrt(2)), abs=1e-12)
    assert d == pytest.approx(0.7654, abs=1e-4)


def test_five_bit_match_count():
    a = BitEmbedding([1, 1, 0, 1, 0], "s")
    b = BitEmbedding([1, 0, 1, 1, 0], "s")
    assert a.matches(b) == 3


def test_estimate_distance_scheme_mismatch():
    with pytest.raises(SchemeMismatchError):
        estimate_distance(BitEmbedding([1], "a"), BitEmbedding([1], "b"))


def test_composed_saturation_flagged():
    est = distance_from_fraction(0.5, "simhash", 4)
    assert est.saturated and est.distance == pytest.approx(2.0)
    assert not distance_from_fraction(0.9, "simhash", 4).saturated


def test_projection_examples():
    p = np.array([0.6, 0.8, 0.0])
    assert np.allclose(project_onto_sphere(p, np.zeros(3), 1.0), p)
    assert np.allclose(project_onto_sphere([2.0, 0, 0], np.zeros(3), 1.0), [1, 0, 0])
    c = np.array([1.0, 2.0, 3.0])
    assert np.allclose(project_onto_sphere(c, c, 2.0), c + [2, 0, 0])


@settings(max_examples=100)
@given(arrays(float, 5, elements=finite), arrays(float, 5, elements=finite), st.floats(0.01, 5))
def test_projection_lands_on_sphere_and_is_idempotent(t, c, r):
    p = project_onto_sphere(t, c, r)
    assert abs(np.linalg.norm(p - c) - r) < 1e-12 * max(1.0, r, np.abs(c).max())
    assert np.allclose(project_onto_sphere(p, c, r), p, atol=1e-12)


def test_pocs_exact_distances_d3():
    rng = np.random.default_rng(0)
    q = rng.standard_normal(3)
    q /= np.linalg.norm(q)
    res = pocs(exact_probes(q, 4, rng))
    assert np.linalg.norm(res.point - q) < 1e-6


def test_pocs_exact_recovery_up_to_d10():
    rng = np.random.default_rng(1)
    for D in (2, 5, 10):
        for _ in range(10):
            q = rng.standard_normal(D)
            q /= np.linalg.norm(q)
            res = pocs(exact_probes(q, D + 1, rng), seed=int(rng.integers(1 << 30)))
            assert np.linalg.norm(res.point - q) < 1e-6


def test_pocs_single_sphere_one_projection():
    probes = ProbeSet(np.array([[0.0, 0.0, 1.0]]), [0.5])
    res = pocs(probes, PocsParams(restarts=1))
    assert res.iterations <= 2
    assert abs(np.linalg.norm(res.point - [0, 0, 1]) - 0.5) < 1e-12


def test_pocs_degenerate_returns_center():
    X = np.tile([0.0, 1.0, 0.0], (4, 1))
    res = pocs(ProbeSet(X, np.zeros(4)))
    assert np.allclose(res.point, [0, 1, 0])


def test_pocs_all_saturated_returns_unit_start():
    X = np.eye(3)
    res = pocs(ProbeSet(X, [2.0] * 3, np.ones(3, bool)), seed=3)
    assert res.iterations == 0 and abs(np.linalg.norm(res.point) - 1) < 1e-12


def test_pocs_params_validated():
    with pytest.raises(ValueError):
        PocsParams(max_iter=0)
    with pytest.raises(ValueError):
        PocsParams(tol=0)


def test_run_attack_zero_trials():
    with pytest.raises(ValueError):
        run_attack(AttackScheme(k=1, l=64), trials=0)


def test_run_attack_deterministic():
    a = run_attack(AttackScheme(k=1, l=128), trials=3, dim=8, seed=5)
    b = run_attack(AttackScheme(k=1, l=128), trials=3, dim=8, seed=5)
    assert a.errors == b.errors and a.trials == 3


def test_vanilla_attack_beats_random_small():
    r = run_attack(AttackScheme(k=1, l=1024), trials=20, dim=10, seed=1)
    assert r.mean_error < 0.5 * r.baseline_mean
    assert r.baseline_mean == pytest.approx(math.sqrt(2), abs=0.05)


def test_noise_f1_indistinguishable_from_random():
    scheme = AttackScheme(k=1, l=256, noise=NoiseParams(f=1.0, seed=9))
    r = run_attack(scheme, trials=60, dim=10, seed=2)
    assert mannwhitneyu(r.errors, r.baseline_errors).pvalue > 0.01


def test_saturation_blindness():
    # k=16 at l=128: nearly every probe estimate sits at or below 1/2
    r = run_attack(AttackScheme(k=16, l=128), trials=60, dim=10, seed=3)
    assert r.saturated_fraction > 0.5
    assert mannwhitneyu(r.errors, r.baseline_errors).pvalue > 0.01


def test_report_fields():
    r = run_attack(AttackScheme(k=2, l=64), trials=4, dim=5, seed=4)
    d = r.to_dict()
    assert d["scheme"] == {"family": "simhash", "k": 2, "l": 64}
    assert len(d["errors"]) == 4 and all(e >= 0 for e in d["errors"])
    lo, hi = r.ci95()
    assert lo <= r.mean_error <= hi


def test_estimator_reconstruct_unit():
    att = TriangulationAttack(n_probes=12, random_state=0)
    scheme = AttackScheme(k=1, l=512)
    oracle = scheme.oracle(7)
    q = np.ones(6) / math.sqrt(6)
    bits = oracle(q[None, :], np.array([0]))[0]
    q_hat = att.reconstruct(bits, oracle, 6)
    assert abs(np.linalg.norm(q_hat) - 1) < 1e-9
    assert len(att.probes_.distances) == 12
    assert np.linalg.norm(q_hat - q) < 0.7
