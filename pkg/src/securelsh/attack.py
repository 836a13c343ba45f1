"""Triangulation attack on public LSH signatures.

The adversary embeds random unit probes through the public embedding
oracle, estimates each probe's distance to the target from bit matches,
and locates the target as a point in the intersection of the spheres
S(X_i, d_i) by cyclic projections (POCS).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numba
import numpy as np
from sklearn.base import BaseEstimator

from ._hashing import derive
from .lsh import invert_collision
from .noise import NoiseParams, noisy_embed_bits
from .scheme import BitEmbedding, FamilyKind, SchemeConfig, SchemeMismatchError, SeedMaterial
from .secure import secure_embed_bits


class DistanceEstimate(NamedTuple):
    distance: float
    saturated: bool


@dataclass(frozen=True)
class PocsParams:
    max_iter: int = 10_000
    tol: float = 1e-8
    restarts: int = 5

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


class PocsResult(NamedTuple):
    point: np.ndarray
    converged: bool
    iterations: int
    max_violation: float


@dataclass
class ProbeSet:
    """Unit-norm probe points with their estimated distances to the target."""

    centers: np.ndarray
    distances: np.ndarray
    saturated: np.ndarray = None

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.distances = np.asarray(self.distances, dtype=np.float64).ravel()
        if self.saturated is None:
            self.saturated = np.zeros(self.distances.size, dtype=bool)
        if self.centers.shape[0] != self.distances.size:
            raise ValueError("one distance per probe required")

    def active(self):
        keep = ~np.asarray(self.saturated, dtype=bool)
        return self.centers[keep], self.distances[keep]


# -- distance estimation ----------------------------------------------------------

def distance_from_fraction(match_fraction, family, k=1) -> DistanceEstimate:
    est = invert_collision(family, match_fraction, k)
    s = min(1.0, max(-1.0, est.similarity))
    return DistanceEstimate(math.sqrt(max(0.0, 2.0 - 2.0 * s)), est.saturated)


def estimate_distance(target: BitEmbedding, probe: BitEmbedding, family="simhash", k=1) -> DistanceEstimate:
    """Euclidean distance between unit vectors implied by their bit matches."""
    if target.scheme_id != probe.scheme_id:
        raise SchemeMismatchError(f"scheme mismatch: {target.scheme_id} vs {probe.scheme_id}")
    return distance_from_fraction(target.matches(probe) / len(target), family, k)


# -- projections ----------------------------------------------------------------------

def project_onto_sphere(t, center, radius):
    """Nearest point to ``t`` on the sphere S(center, radius).

    When ``t`` is the centre every point is nearest; the first coordinate
    axis is used as the fixed direction.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    t = np.asarray(t, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    diff = t - center
    norm = np.linalg.norm(diff)
    if norm == 0.0:
        diff = np.zeros_like(diff)
        diff[0] = 1.0
        norm = 1.0
    return center + radius * diff / norm


@numba.njit(cache=True)
def _pocs_kernel(centers, radii, t, max_iter, tol):
    m, D = centers.shape
    prev = np.empty(D)
    diff = np.empty(D)
    for it in range(max_iter):
        prev[:] = t
        for i in range(m):
            nrm = 0.0
            for d in range(D):
                diff[d] = t[d] - centers[i, d]
                nrm += diff[d] * diff[d]
            nrm = math.sqrt(nrm)
            if nrm == 0.0:
                diff[:] = 0.0
                diff[0] = 1.0
                nrm = 1.0
            scale = radii[i] / nrm
            for d in range(D):
                t[d] = centers[i, d] + scale * diff[d]
        shift = 0.0
        for d in range(D):
            shift += (t[d] - prev[d]) ** 2
        if math.sqrt(shift) < tol:
            return t, it + 1, True
    return t, max_iter, False


def max_violation(point, centers, radii) -> float:
    if len(radii) == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.norm(centers - point, axis=1) - radii)))


def polish(point, centers, radii, steps: int = 20):
    """Gauss-Newton refinement of the sphere residuals ||t - X_i|| - d_i.

    Cyclic projections converge only linearly near the intersection; a few
    Newton steps finish the job.  A step is kept only if it lowers the
    maximum violation.
    """
    t = np.asarray(point, dtype=np.float64).copy()
    best = max_violation(t, centers, radii)
    for _ in range(steps):
        diff = t - centers
        norms = np.linalg.norm(diff, axis=1)
        if np.any(norms == 0.0) or best == 0.0:
            break
        J = diff / norms[:, None]
        step = np.linalg.lstsq(J, norms - radii, rcond=None)[0]
        cand = t - step
        v = max_violation(cand, centers, radii)
        if not v < best:
            break
        t, best = cand, v
    return t, best


def pocs(probes: ProbeSet, params: PocsParams = PocsParams(), seed: int = 0) -> PocsResult:
    """Cyclic projections onto the probe spheres from random unit starts.

    Each restart's end point is refined by :func:`polish`.  Returns the
    restart whose final point violates the sphere constraints least;
    if that is still above ``sqrt(tol)`` up to ``4 * restarts`` further
    starts are tried.  Saturated probes are skipped.
    """
    centers, radii = probes.active()
    D = probes.centers.shape[1]
    rng = np.random.default_rng(seed)
    best = None
    budget = 5 * params.restarts
    for attempt in range(budget):
        if attempt >= params.restarts and best.max_violation <= math.sqrt(params.tol):
            break
        start = rng.standard_normal(D)
        start /= np.linalg.norm(start)
        if len(radii) == 0:
            return PocsResult(start, True, 0, 0.0)
        point, iters, conv = _pocs_kernel(
            np.ascontiguousarray(centers), np.ascontiguousarray(radii),
            start.copy(), int(params.max_iter), float(params.tol),
        )
        point, viol = polish(point, centers, radii)
        result = PocsResult(point, bool(conv), int(iters), viol)
        if best is None or result.max_violation < best.max_violation:
            best = result
    return best


# -- attack driver ------------------------------------------------------------------

def random_unit(rng, n, dim):
    X = rng.standard_normal((n, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


@dataclass(frozen=True)
class AttackScheme:
    """What the adversary attacks: a (secure) SimHash scheme, optionally noised."""

    family: str = "simhash"
    k: int = 1
    l: int = 1024
    noise: NoiseParams | None = None

    def descriptor(self) -> dict:
        d = {"family": str(self.family), "k": self.k, "l": self.l}
        if self.noise is not None:
            d["noise"] = self.noise.mode
            d["f" if self.noise.mode == "bitflip" else "sigma"] = (
                self.noise.f if self.noise.mode == "bitflip" else self.noise.sigma
            )
        return d

    def label(self) -> tuple:
        if self.noise is None:
            return ("secure" if self.k > 1 else "vanilla", f"k={self.k}")
        if self.noise.mode == "bitflip":
            return ("noise-bitflip", f"f={self.noise.f:g}")
        return ("noise-projection", f"sigma={self.noise.sigma:g}")

    def oracle(self, master_seed: int) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """The public embedding function S(.) under hidden seeds."""
        cfg = SchemeConfig(FamilyKind.parse(self.family), self.k, self.l, SeedMaterial(master_seed))
        if self.noise is None:
            return lambda X, ids: secure_embed_bits(X, cfg)
        return lambda X, ids: noisy_embed_bits(X, cfg, self.noise, ids)

    @property
    def model_k(self) -> int:
        # the noised schemes are inverted with the vanilla curve
        return self.k if self.noise is None else 1


@dataclass
class AttackReport:
    scheme: dict
    errors: list
    baseline_errors: list
    trials: int = field(init=False)
    mean_error: float = field(init=False)
    std_error: float = field(init=False)
    baseline_mean: float = field(init=False)
    baseline_std: float = field(init=False)
    saturated_fraction: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.errors, dtype=float)
        b = np.asarray(self.baseline_errors, dtype=float)
        self.trials = int(e.size)
        self.mean_error = float(e.mean())
        self.std_error = float(e.std(ddof=1)) if e.size > 1 else 0.0
        self.baseline_mean = float(b.mean())
        self.baseline_std = float(b.std(ddof=1)) if b.size > 1 else 0.0

    def ci95(self) -> tuple:
        half = 1.96 * self.std_error / math.sqrt(max(self.trials, 1))
        return (self.mean_error - half, self.mean_error + half)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class TriangulationAttack(BaseEstimator):
    """Reconstruct a unit target vector from its public signature.

    Parameters
    ----------
    n_probes : int or None
        Probe count; ``None`` uses D + 1.
    max_iter, tol, restarts :
        POCS settings.
    random_state : int
    """

    def __init__(self, n_probes=None, max_iter=10_000, tol=1e-8, restarts=5, random_state=0):
        self.n_probes = n_probes
        self.max_iter = max_iter
        self.tol = tol
        self.restarts = restarts
        self.random_state = random_state

    def probe(self, target_bits, oracle, dim, family="simhash", k=1, seed=None) -> ProbeSet:
        """Embed random probes via ``oracle`` and estimate their distances."""
        rng = np.random.default_rng(self.random_state if seed is None else seed)
        m = self.n_probes or dim + 1
        if m < 2:
            raise ValueError("need at least two probes")
        X = random_unit(rng, m, dim)
        bits = oracle(X, np.arange(1, m + 1))
        target_bits = np.asarray(target_bits, dtype=np.uint8)
        frac = (bits == target_bits[None, :]).mean(axis=1)
        est = [distance_from_fraction(f, family, k) for f in frac]
        return ProbeSet(X, [e.distance for e in est], np.array([e.saturated for e in est]))

    def reconstruct(self, target_bits, oracle, dim, family="simhash", k=1, seed=None) -> np.ndarray:
        seed = self.random_state if seed is None else seed
        probes = self.probe(target_bits, oracle, dim, family, k, seed)
        self.probes_ = probes
        res = pocs(probes, PocsParams(self.max_iter, self.tol, self.restarts), seed + 1)
        self.result_ = res
        norm = np.linalg.norm(res.point)
        return res.point / norm if norm > 0 else res.point


def random_guess_errors(targets, rng) -> np.ndarray:
    guesses = random_unit(rng, len(targets), targets.shape[1])
    return np.linalg.norm(guesses - targets, axis=1)


def run_attack(scheme: AttackScheme, trials: int = 100, dim: int = 50, targets=None,
               attack: TriangulationAttack | None = None, seed: int = 0,
               baseline_samples: int = 1000) -> AttackReport:
    """Repeat the triangulation attack on independent targets.

    Trial t is a pure function of ``(seed, t)``: it draws fresh hidden
    scheme seeds, a target (random unit or row t of ``targets``), probes and
    POCS starts.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    attack = attack or TriangulationAttack()
    family = FamilyKind.parse(scheme.family)
    if family.is_minhash:
        raise ValueError("the triangulation attack targets SimHash signatures")
    if targets is not None:
        targets = np.asarray(targets, dtype=np.float64)
        targets = targets / np.linalg.norm(targets, axis=1, keepdims=True)
        dim = targets.shape[1]
    errors, saturated = [], 0.0
    for t in range(trials):
        trial_seed = int(derive(seed, 0xA77AC4, t))
        rng = np.random.default_rng(trial_seed)
        q = targets[t % len(targets)] if targets is not None else random_unit(rng, 1, dim)[0]
        oracle = scheme.oracle(trial_seed)
        target_bits = oracle(q[None, :], np.array([0]))[0]
        q_hat = attack.reconstruct(target_bits, oracle, dim, family, scheme.model_k, trial_seed % 2**32)
        errors.append(float(np.linalg.norm(q_hat - q)))
        saturated += float(np.mean(attack.probes_.saturated))
    rng = np.random.default_rng(int(derive(seed, 0xBA5E)))
    pool = targets if targets is not None else random_unit(rng, baseline_samples, dim)
    baseline = random_guess_errors(pool[rng.integers(0, len(pool), baseline_samples)], rng)
    return AttackReport(scheme.descriptor(), errors, baseline.tolist(), saturated / trials)
