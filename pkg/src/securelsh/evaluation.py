"""Datasets, gold neighbours and precision-recall / attack experiments."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._hashing import derive
from ._validation import check_dense
from .attack import AttackReport, AttackScheme, TriangulationAttack, random_unit, run_attack
from .noise import BITFLIP, PROJECTION, NoiseParams, NoisyLSHEmbedder
from .secure import SecureLSHEmbedder


class CsvParseError(ValueError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(", ".join(where) + ": " + message if where else message)
        self.row = row
        self.column = column


@dataclass
class Dataset:
    """Records keyed by integer id: dense (n, D) vectors or a list of sets."""

    ids: np.ndarray
    vectors: object
    name: str = "data"
    normalized: bool = False

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if not self.is_sets:
            self.vectors = np.asarray(self.vectors, dtype=np.float64)
            if self.vectors.ndim != 2:
                raise ValueError("dense vectors must form an (n, D) array")
        if len(self.vectors) != self.ids.size:
            raise ValueError("one id per vector required")
        uniq, counts = np.unique(self.ids, return_counts=True)
        if np.any(counts > 1):
            raise ValueError(f"duplicate id {uniq[counts > 1][0]}")

    @property
    def is_sets(self) -> bool:
        return isinstance(self.vectors, list)

    @property
    def n(self) -> int:
        return int(self.ids.size)

    @property
    def dim(self):
        return None if self.is_sets else int(self.vectors.shape[1])

    def metadata(self) -> dict:
        return {"name": self.name, "D": self.dim, "n": self.n, "normalized": self.normalized}

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        vecs = [self.vectors[i] for i in idx] if self.is_sets else self.vectors[idx]
        return Dataset(self.ids[idx], vecs, self.name, self.normalized)

    def split(self, train_fraction: float, seed: int = 0) -> tuple["Dataset", "Dataset"]:
        if not 0.0 < train_fraction < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")
        perm = np.random.default_rng(derive(seed, 0x5B17)).permutation(self.n)
        cut = min(max(1, int(round(train_fraction * self.n))), self.n - 1)
        return self.take(np.sort(perm[:cut])), self.take(np.sort(perm[cut:]))


def normalize_rows(X) -> np.ndarray:
    X = check_dense(X)
    return X / np.linalg.norm(X, axis=1, keepdims=True)


# -- csv ------------------------------------------------------------------------

def load_csv(path, id_column: str | None = "id", set_column: str | None = None,
             normalize: bool = False, name: str | None = None) -> Dataset:
    """Read a headed CSV.

    Dense mode uses every column except ``id_column`` as a coordinate.  Set
    mode reads ``set_column`` as ';'-separated integer ids.  Without an id
    column, ids are the 0-based row order.  Row numbers in errors count the
    header as row 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvParseError("empty file, header expected") from None
        if id_column is not None and id_column not in header:
            id_column = None
        if set_column is not None and set_column not in header:
            raise CsvParseError(f"set column {set_column!r} not in header")
        id_pos = header.index(id_column) if id_column else None
        if set_column:
            value_cols = [header.index(set_column)]
        else:
            value_cols = [i for i in range(len(header)) if i != id_pos]
            if not value_cols:
                raise CsvParseError("no dense columns in header")
        ids, rows, seen = [], [], {}
        for rownum, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise CsvParseError(f"expected {len(header)} fields, got {len(rec)}", row=rownum)
            if id_pos is not None:
                rid = _parse_int(rec[id_pos], rownum, header[id_pos])
            else:
                rid = len(ids)
            if rid in seen:
                raise CsvParseError(f"duplicate id {rid} (first at row {seen[rid]})", row=rownum)
            seen[rid] = rownum
            ids.append(rid)
            if set_column:
                cell = rec[value_cols[0]].strip()
                if not cell:
                    raise CsvParseError("missing value", row=rownum, column=set_column)
                rows.append({_parse_int(t, rownum, set_column) for t in cell.split(";") if t.strip()})
            else:
                rows.append([_parse_float(rec[i], rownum, header[i]) for i in value_cols])
    if not ids:
        raise CsvParseError("no data rows")
    if set_column:
        return Dataset(np.array(ids), rows, name or str(path))
    X = np.array(rows, dtype=np.float64)
    if normalize:
        X = normalize_rows(X)
    return Dataset(np.array(ids), X, name or str(path), normalized=normalize)


def _parse_float(cell, row, col):
    cell = cell.strip()
    if not cell:
        raise CsvParseError("missing value", row=row, column=col)
    try:
        v = float(cell)
    except ValueError:
        raise CsvParseError(f"non-numeric value {cell!r}", row=row, column=col) from None
    if not math.isfinite(v):
        raise CsvParseError(f"non-finite value {cell!r}", row=row, column=col)
    return v


def _parse_int(cell, row, col):
    cell = cell.strip()
    if not cell:
        raise CsvParseError("missing value", row=row, column=col)
    try:
        return int(cell)
    except ValueError:
        raise CsvParseError(f"not an integer: {cell!r}", row=row, column=col) from None


def write_csv(dataset: Dataset, path):
    """Write a dataset so that :func:`load_csv` reproduces it exactly (repr floats)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if dataset.is_sets:
            w.writerow(["id", "members"])
            for rid, s in zip(dataset.ids, dataset.vectors):
                w.writerow([int(rid), ";".join(str(int(e)) for e in sorted(s))])
        else:
            w.writerow(["id"] + [f"x{j}" for j in range(dataset.dim)])
            for rid, row in zip(dataset.ids, dataset.vectors):
                w.writerow([int(rid)] + [repr(float(v)) for v in row])


# -- synthetic data -------------------------------------------------------------

@dataclass(frozen=True)
class ClusterSpec:
    """``n_clusters`` groups of ``size`` points whose pairwise cosines are >= ``min_cosine``.

    Each member sits at angle alpha ~ U[0, alpha_max] from its centre, in a
    random orthogonal direction, with alpha_max = arccos(min_cosine) / 2.
    """

    n_clusters: int = 0
    size: int = 2
    min_cosine: float = 0.95

    def __post_init__(self):
        if self.n_clusters < 0 or self.size < 1:
            raise ValueError("infeasible cluster spec: counts must be positive")
        if not -1.0 < self.min_cosine <= 1.0:
            raise ValueError("infeasible cluster spec: min_cosine must lie in (-1, 1]")


def default_clusters(n: int, size: int = 20, min_cosine: float = 0.8) -> ClusterSpec:
    """Every point in a cluster of ``size`` (250 clusters at n = 5000)."""
    return ClusterSpec(n // size, size, min_cosine)


def at_cosine(x, cosine: float, rng) -> np.ndarray:
    """A unit vector at exactly ``cosine`` to unit vector ``x``."""
    x = np.asarray(x, dtype=np.float64)
    u = rng.standard_normal(x.size)
    u -= (u @ x) * x
    u /= np.linalg.norm(u)
    return cosine * x + math.sqrt(max(0.0, 1.0 - cosine * cosine)) * u


def synth_dataset(n: int = 5000, dim: int = 128, clusters: ClusterSpec | None = None,
                  seed: int = 0, name: str = "synthetic") -> Dataset:
    """Unit vectors: planted clusters plus a uniform background on the sphere.

    ``clusters=None`` uses :func:`default_clusters`; pass ``ClusterSpec()``
    for pure background.
    """
    if n < 1 or dim < 1:
        raise ValueError("n and dim must be >= 1")
    clusters = default_clusters(n) if clusters is None else clusters
    planted = clusters.n_clusters * clusters.size
    if planted > n:
        raise ValueError(f"infeasible cluster spec: {planted} clustered points exceed n={n}")
    if clusters.n_clusters and clusters.size > 1 and dim < 2:
        raise ValueError("infeasible cluster spec: clusters need dim >= 2")
    rng = np.random.default_rng(derive(seed, 0x5E7))
    X = random_unit(rng, n, dim)
    alpha_max = math.acos(clusters.min_cosine) / 2.0
    row = 0
    for _ in range(clusters.n_clusters):
        centre = random_unit(rng, 1, dim)[0]
        for _ in range(clusters.size):
            X[row] = at_cosine(centre, math.cos(rng.uniform(0.0, alpha_max)), rng)
            row += 1
    order = rng.permutation(n)
    return Dataset(np.arange(n), X[order], name, normalized=True)


# -- gold standard --------------------------------------------------------------

def cosine_matrix(A, B) -> np.ndarray:
    return normalize_rows(A) @ normalize_rows(B).T


def gold_neighbors(dataset: Dataset, queries: Dataset, threshold: float = 0.95) -> dict:
    """query id -> set of dataset ids with cosine >= threshold (brute force)."""
    if dataset.is_sets or queries.is_sets:
        raise ValueError("gold neighbours need dense vectors")
    C = cosine_matrix(queries.vectors, dataset.vectors)
    return {int(q): set(dataset.ids[C[i] >= threshold].tolist()) for i, q in enumerate(queries.ids)}


# -- schemes --------------------------------------------------------------------

VANILLA = "vanilla"
SECURE = "secure"
NOISE_PROJ = "noise-projection"
NOISE_FLIP = "noise-bitflip"
ORACLE = "oracle"
RANDOM = "random"


@dataclass(frozen=True)
class SchemeSpec:
    kind: str
    value: float = 0.0

    @property
    def param(self) -> str:
        if self.kind in (VANILLA, SECURE):
            return f"k={int(self.value)}"
        if self.kind == NOISE_PROJ:
            return f"sigma={self.value:g}"
        if self.kind == NOISE_FLIP:
            return f"f={self.value:g}"
        return "-"


@dataclass(frozen=True)
class ExperimentSpec:
    family: str = "simhash"
    ks: tuple = (2, 4, 6, 8, 12)
    sigmas: tuple = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    fs: tuple = ()
    l: int = 64
    threshold: float = 0.95
    train_fraction: float = 0.8
    seeds: tuple = (0,)
    vanilla: bool = True
    controls: bool = False
    # attack settings
    trials: int = 100
    attack_dim: int = 50
    attack_l: int = 1024

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")
        if not self.seeds:
            raise ValueError("seed list must be non-empty")
        if not self.schemes():
            raise ValueError("scheme grid is empty")

    def schemes(self) -> list:
        out = [SchemeSpec(VANILLA, 1)] if self.vanilla else []
        out += [SchemeSpec(SECURE, k) for k in self.ks if k > 1]
        out += [SchemeSpec(NOISE_PROJ, s) for s in self.sigmas]
        out += [SchemeSpec(NOISE_FLIP, f) for f in self.fs]
        if self.controls:
            out += [SchemeSpec(ORACLE), SchemeSpec(RANDOM)]
        return out


def embed_pair(scheme: SchemeSpec, family: str, l: int, train: Dataset, queries: Dataset, seed: int):
    """Bit matrices for train and query records under one scheme."""
    if scheme.kind in (VANILLA, SECURE):
        est = SecureLSHEmbedder(family, int(scheme.value), l, seed).fit(train.vectors)
        return est.transform(train.vectors), est.transform(queries.vectors)
    if scheme.kind in (NOISE_PROJ, NOISE_FLIP):
        mode = PROJECTION if scheme.kind == NOISE_PROJ else BITFLIP
        kw = {"sigma": scheme.value} if mode == PROJECTION else {"f": scheme.value}
        est = NoisyLSHEmbedder(family, l, mode, random_state=seed, noise_seed=derive(seed, 0x2015), **kw)
        est.fit(train.vectors)
        return est.transform(train.vectors, train.ids), est.transform(queries.vectors, queries.ids)
    if scheme.kind == RANDOM:
        rng = np.random.default_rng(derive(seed, 0x4A4D))
        return (rng.integers(0, 2, (train.n, l), dtype=np.uint8),
                rng.integers(0, 2, (queries.n, l), dtype=np.uint8))
    raise ValueError(f"scheme {scheme.kind!r} has no embedding")


def hamming_matrix(Q, T) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.int32)
    T = np.asarray(T, dtype=np.int32)
    return Q.sum(1)[:, None] + T.sum(1)[None, :] - 2 * (Q @ T.T)


def rank_by_distance(dist, train_ids) -> np.ndarray:
    """Per query, train positions ordered by (distance, id)."""
    by_id = np.argsort(train_ids, kind="stable")
    order = np.argsort(dist[:, by_id], axis=1, kind="stable")
    return by_id[order]


@dataclass
class PrCurve:
    """Mean (recall, precision) over queries at every ranking depth 1..n."""

    recall: np.ndarray
    precision: np.ndarray
    average_precision: float
    queries: int

    @property
    def depths(self) -> np.ndarray:
        return np.arange(1, self.recall.size + 1)

    def points(self):
        return list(zip(self.recall.tolist(), self.precision.tolist()))


def pr_curve(ranking, train_ids, query_ids, gold: dict) -> PrCurve:
    """Precision/recall of a ranking (query x train positions) against gold sets.

    Queries with an empty gold set are skipped.  Average precision is the
    mean over queries of the precision at each relevant item's rank.
    """
    train_ids = np.asarray(train_ids)
    keep = [i for i, q in enumerate(query_ids) if gold[int(q)]]
    n = train_ids.size
    if not keep:
        return PrCurve(np.zeros(n), np.zeros(n), 0.0, 0)
    depth = np.arange(1, n + 1)
    rec_sum = np.zeros(n)
    prec_sum = np.zeros(n)
    aps = []
    for i in keep:
        g = gold[int(query_ids[i])]
        rel = np.isin(train_ids[ranking[i]], list(g))
        hits = np.cumsum(rel)
        prec = hits / depth
        rec_sum += hits / len(g)
        prec_sum += prec
        aps.append(float(prec[rel].sum() / len(g)))
    m = len(keep)
    return PrCurve(rec_sum / m, prec_sum / m, float(np.mean(aps)), m)


@dataclass
class PrResult:
    scheme: str
    param: str
    seed: int
    curve: PrCurve


def pr_experiment(dataset: Dataset, spec: ExperimentSpec, queries: Dataset | None = None) -> list:
    """PR curves for every scheme in ``spec`` and every seed.

    With ``queries`` given the whole dataset is the train side; otherwise
    each seed draws its own split.
    """
    out = []
    for seed in spec.seeds:
        train, qs = (dataset, queries) if queries is not None else dataset.split(spec.train_fraction, seed)
        gold = gold_neighbors(train, qs, spec.threshold)
        nonempty = sum(bool(g) for g in gold.values())
        if nonempty < 0.5 * len(gold):
            warnings.warn(f"only {nonempty}/{len(gold)} queries have gold neighbours", stacklevel=2)
        for scheme in spec.schemes():
            if scheme.kind == ORACLE:
                dist = -cosine_matrix(qs.vectors, train.vectors)
            else:
                Btr, Bq = embed_pair(scheme, spec.family, spec.l, train, qs, seed)
                dist = hamming_matrix(Bq, Btr)
            ranking = rank_by_distance(dist, train.ids)
            out.append(PrResult(scheme.kind, scheme.param, seed, pr_curve(ranking, train.ids, qs.ids, gold)))
    return out


def summarize_pr(results) -> list:
    """[(scheme, param, mean AP, std AP, seeds)] in first-seen order."""
    groups: dict = {}
    for r in results:
        groups.setdefault((r.scheme, r.param), []).append(r.curve.average_precision)
    rows = []
    for (scheme, param), aps in groups.items():
        a = np.asarray(aps)
        rows.append((scheme, param, float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0, a.size))
    return rows


def write_pr_csv(results, path):
    """pr_curves.csv: (scheme, param, depth, recall, precision), curves averaged over seeds."""
    groups: dict = {}
    for r in results:
        groups.setdefault((r.scheme, r.param), []).append(r.curve)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "param", "depth", "recall", "precision"])
        for (scheme, param), curves in groups.items():
            rec = np.mean([c.recall for c in curves], axis=0)
            prec = np.mean([c.precision for c in curves], axis=0)
            for d, (r, p) in enumerate(zip(rec, prec), start=1):
                w.writerow([scheme, param, d, repr(float(r)), repr(float(p))])


# -- attack benchmark -----------------------------------------------------------

@dataclass
class AttackCell:
    scheme: str
    param: str
    report: AttackReport = field(repr=False)


def attack_experiment(spec: ExperimentSpec, seed: int = 0, attack: TriangulationAttack | None = None) -> list:
    """One AttackReport per k (vanilla included) and per noise level."""
    cells = []
    for s in spec.schemes():
        if s.kind in (VANILLA, SECURE):
            target = AttackScheme(spec.family, int(s.value), spec.attack_l)
        elif s.kind == NOISE_PROJ:
            target = AttackScheme(spec.family, 1, spec.attack_l, NoiseParams(sigma=s.value, mode=PROJECTION, seed=seed))
        elif s.kind == NOISE_FLIP:
            target = AttackScheme(spec.family, 1, spec.attack_l, NoiseParams(f=s.value, mode=BITFLIP, seed=seed))
        else:
            continue
        rep = run_attack(target, spec.trials, spec.attack_dim, attack=attack, seed=seed)
        cells.append(AttackCell(s.kind, s.param, rep))
    return cells


def write_attack_csv(cells, path):
    """attack.csv: (scheme, param, trial, error, baseline); baseline is the random-guess mean."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "param", "trial", "error", "baseline"])
        for c in cells:
            for t, e in enumerate(c.report.errors):
                w.writerow([c.scheme, c.param, t, repr(float(e)), repr(c.report.baseline_mean)])
