"""Banded hash tables for sub-linear Hamming near-neighbour search.

Each of ``n_tables`` tables keys the stored signatures on a random subset of
``band_bits`` bit positions.  A query probes one bucket per table, unions
the hits and re-ranks them by exact Hamming distance (ties by ascending id).

Queries only read the index; ``insert`` mutates it, so callers must not
insert while other threads query (single writer, many readers).
"""

from __future__ import annotations

import math
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import check_bits
from .scheme import BitEmbedding, SchemeMismatchError

MAGIC = b"SLSI"
FORMAT_VERSION = 1


class QueryResult(NamedTuple):
    neighbors: list  # [(id, hamming distance)], ranked
    candidates_examined: int
    overflow: bool


@dataclass(frozen=True)
class IndexParams:
    n_tables: int = 16
    band_bits: int = 16
    candidate_cap: "int | str | None" = "auto"
    top_k: "int | None" = None
    max_distance: "int | None" = None


def _split_embeddings(embeddings, scheme_id=None):
    """Normalise a mapping / sequence of embeddings into (ids, bits, scheme_id)."""
    if isinstance(embeddings, Mapping):
        ids = list(embeddings)
        embs = [embeddings[i] for i in ids]
    else:
        ids, embs = None, embeddings
    if len(embs) and isinstance(next(iter(embs)), BitEmbedding):
        schemes = {e.scheme_id for e in embs}
        if len(schemes) > 1:
            raise SchemeMismatchError("embeddings come from mixed schemes")
        scheme_id = schemes.pop()
        lengths = {len(e) for e in embs}
        if len(lengths) > 1:
            raise SchemeMismatchError("embeddings differ in length")
        bits = np.stack([e.bits for e in embs]) if embs else np.zeros((0, 0), np.uint8)
    else:
        bits = check_bits(embs) if len(embs) else np.zeros((0, 0), np.uint8)
    if ids is None:
        ids = list(range(bits.shape[0]))
    return [int(i) for i in ids], bits, scheme_id or ""


def hamming_rank(ids, bits: np.ndarray, q: np.ndarray, top_k=None, max_distance=None):
    """Rank rows of ``bits`` by Hamming distance to ``q``; ties by id."""
    if len(ids) == 0:
        return []
    ids = np.asarray(ids, dtype=np.int64)
    dist = np.count_nonzero(bits != q[None, :], axis=1)
    order = np.lexsort((ids, dist))
    if max_distance is not None:
        order = order[dist[order] <= max_distance]
    if top_k is not None:
        order = order[:top_k]
    return [(int(ids[i]), int(dist[i])) for i in order]


def brute_force_rank(embeddings, q, K=None, max_distance=None):
    """Exact full-scan ranking; same tie-break as :meth:`HammingIndex.query`."""
    ids, bits, scheme_id = _split_embeddings(embeddings)
    if isinstance(q, BitEmbedding):
        if scheme_id and q.scheme_id != scheme_id:
            raise SchemeMismatchError(f"scheme mismatch: {q.scheme_id} vs {scheme_id}")
        q = q.bits
    return hamming_rank(ids, bits, np.asarray(q, dtype=np.uint8), K, max_distance)


@dataclass
class _Table:
    positions: np.ndarray
    buckets: dict = field(default_factory=dict)


class HammingIndex:
    """T banded hash tables over l-bit signatures.

    Parameters
    ----------
    n_tables : int
    band_bits : int
        Bits per table key; must not exceed l.
    candidate_cap : int, "auto" or None
        Maximum candidates re-ranked per query.  ``"auto"`` caps at
        10 * top_k when a top_k is requested and is unbounded otherwise.
    random_state : int
        Seed for the choice of bit subsets.
    """

    def __init__(self, n_tables=16, band_bits=16, candidate_cap="auto", random_state=0):
        self.n_tables = n_tables
        self.band_bits = band_bits
        self.candidate_cap = candidate_cap
        self.random_state = random_state

    # -- construction --------------------------------------------------------

    def _draw_positions(self, l):
        T, b = int(self.n_tables), int(self.band_bits)
        if T < 1:
            raise ValueError("n_tables must be >= 1")
        if not 1 <= b <= l:
            raise ValueError(f"band width b={b} must lie in [1, l={l}]")
        if b > 64:
            raise ValueError("band width is limited to 64 bits")
        if math.comb(l, b) < T:
            raise ValueError(f"only {math.comb(l, b)} distinct {b}-bit subsets of {l} bits exist")
        rng = np.random.default_rng(self.random_state)
        seen, out = set(), []
        while len(out) < T:
            pos = np.sort(rng.choice(l, size=b, replace=False))
            if pos.tobytes() not in seen:
                seen.add(pos.tobytes())
                out.append(pos)
        return out

    def _keys(self, bits: np.ndarray) -> np.ndarray:
        """(n, T) uint64 bucket keys."""
        pos = np.stack([t.positions for t in self.tables_])  # (T, b)
        weights = np.uint64(1) << np.arange(pos.shape[1], dtype=np.uint64)
        sub = bits[:, pos].astype(np.uint64)  # (n, T, b)
        return (sub * weights).sum(axis=2, dtype=np.uint64)

    def fit(self, X, ids=None, scheme_id=None, l=None):
        """Build the tables over a bit matrix or a mapping id -> BitEmbedding."""
        got_ids, bits, sid = _split_embeddings(X)
        if ids is not None:
            got_ids = [int(i) for i in ids]
        if len(set(got_ids)) != len(got_ids):
            raise ValueError("id exists: duplicate ids in input")
        if got_ids and l is not None and bits.shape[1] != l:
            raise ValueError("embedding length does not match l")
        self.scheme_id_ = scheme_id if scheme_id is not None else sid
        self.l_ = None
        self.tables_ = []
        self._row = {}
        self.n_ = 0
        if got_ids:
            l = bits.shape[1]
        if l is not None:
            self._init_storage(int(l), len(got_ids))
        if got_ids:
            self._append(got_ids, bits)
        return self

    def _init_storage(self, l, n=0):
        self.l_ = l
        self.tables_ = [_Table(p) for p in self._draw_positions(l)]
        self._ids = np.zeros(max(16, n), dtype=np.int64)
        self._packed = np.zeros((self._ids.size, (l + 7) // 8), dtype=np.uint8)

    def _append(self, ids, bits):
        n0, n = self.n_, len(ids)
        if n0 + n > self._ids.size:
            cap = max(2 * self._ids.size, n0 + n)
            self._ids = np.resize(self._ids, cap)
            packed = np.zeros((cap, self._packed.shape[1]), dtype=np.uint8)
            packed[:n0] = self._packed[:n0]
            self._packed = packed
        self._ids[n0 : n0 + n] = ids
        self._packed[n0 : n0 + n] = np.packbits(bits, axis=1)
        for r, i in enumerate(ids):
            self._row[i] = n0 + r
        self.n_ = n0 + n
        keys = self._keys(bits)
        for t, table in enumerate(self.tables_):
            col = keys[:, t]
            order = np.argsort(col, kind="stable")
            uniq, starts = np.unique(col[order], return_index=True)
            for key, chunk in zip(uniq.tolist(), np.split(order, starts[1:])):
                table.buckets.setdefault(key, []).extend(ids[c] for c in chunk)

    def _as_bits(self, embedding):
        if isinstance(embedding, BitEmbedding):
            if self.scheme_id_ and embedding.scheme_id != self.scheme_id_:
                raise SchemeMismatchError(
                    f"scheme mismatch: {embedding.scheme_id} vs {self.scheme_id_}"
                )
            embedding = embedding.bits
        bits = check_bits(embedding)[0]
        if self.l_ is None:
            return bits
        if bits.size != self.l_:
            raise SchemeMismatchError(f"expected {self.l_} bits, got {bits.size}")
        return bits

    def insert(self, id, embedding):
        """Add one signature; raises ``ValueError("id exists")`` on duplicates."""
        if not hasattr(self, "tables_"):
            self.fit({})
        bits = self._as_bits(embedding)
        if int(id) in self._row:
            raise ValueError(f"id exists: {id}")
        if self.l_ is None:
            self._init_storage(bits.size)
        if not self.scheme_id_ and isinstance(embedding, BitEmbedding):
            self.scheme_id_ = embedding.scheme_id
        self._append([int(id)], bits[None, :])
        return self

    # -- querying -------------------------------------------------------------

    def candidates(self, q) -> list:
        """Union of the probed buckets, deduplicated in probe order."""
        if not hasattr(self, "tables_"):
            self.fit({})
        bits = self._as_bits(q)
        if self.n_ == 0:
            return []
        keys = self._keys(bits[None, :])[0]
        seen = {}
        for table, key in zip(self.tables_, keys.tolist()):
            for i in table.buckets.get(key, ()):
                seen.setdefault(i, None)
        return list(seen)

    def query(self, q, top_k=None, max_distance=None, candidate_cap="default") -> QueryResult:
        bits = self._as_bits(q)
        cand = self.candidates(bits)
        cap = self.candidate_cap if candidate_cap == "default" else candidate_cap
        if cap == "auto":
            cap = 10 * top_k if top_k is not None else None
        overflow = cap is not None and len(cand) > cap
        if overflow:
            cand = cand[:cap]
        if not cand:
            return QueryResult([], 0, False)
        rows = np.array([self._row[i] for i in cand])
        stored = np.unpackbits(self._packed[rows], axis=1)[:, : self.l_]
        ranked = hamming_rank(cand, stored, bits, top_k, max_distance)
        return QueryResult(ranked, len(cand), overflow)

    def embedding(self, id) -> np.ndarray:
        return np.unpackbits(self._packed[self._row[int(id)]])[: self.l_]

    def __len__(self):
        return getattr(self, "n_", 0)

    def __contains__(self, id):
        return int(id) in self._row

    # -- persistence -----------------------------------------------------------

    def save(self, path):
        if self.l_ is None:
            raise ValueError("cannot save an index that has never seen an embedding")
        sid = self.scheme_id_.encode()
        T, b = len(self.tables_), int(self.tables_[0].positions.size)
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<HIIIH", FORMAT_VERSION, self.l_, T, b, len(sid)))
            fh.write(sid)
            for table in self.tables_:
                fh.write(table.positions.astype("<u4").tobytes())
                fh.write(struct.pack("<Q", len(table.buckets)))
                for key, ids in table.buckets.items():
                    fh.write(struct.pack("<QQ", key, len(ids)))
                    fh.write(np.asarray(ids, dtype="<i8").tobytes())
            fh.write(struct.pack("<Q", self.n_))
            fh.write(self._ids[: self.n_].astype("<i8").tobytes())
            fh.write(self._packed[: self.n_].tobytes())

    @classmethod
    def load(cls, path) -> "HammingIndex":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[:4] != MAGIC:
            raise ValueError("not an SLSI index file")
        off = 4
        version, l, T, b, nsid = struct.unpack_from("<HIIIH", data, off)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported index format version {version}")
        off += struct.calcsize("<HIIIH")
        sid = data[off : off + nsid].decode()
        off += nsid
        index = cls(n_tables=T, band_bits=b)
        index.l_, index.scheme_id_, index.tables_ = l, sid, []
        for _ in range(T):
            pos = np.frombuffer(data, "<u4", b, off).astype(np.int64)
            off += 4 * b
            (nb,) = struct.unpack_from("<Q", data, off)
            off += 8
            table = _Table(pos)
            for _ in range(nb):
                key, cnt = struct.unpack_from("<QQ", data, off)
                off += 16
                table.buckets[key] = np.frombuffer(data, "<i8", cnt, off).tolist()
                off += 8 * cnt
            index.tables_.append(table)
        (n,) = struct.unpack_from("<Q", data, off)
        off += 8
        nbytes = (l + 7) // 8
        index._ids = np.frombuffer(data, "<i8", n, off).astype(np.int64).copy()
        off += 8 * n
        index._packed = np.frombuffer(data, np.uint8, n * nbytes, off).reshape(n, nbytes).copy()
        index.n_ = n
        index._row = {int(i): r for r, i in enumerate(index._ids)}
        if index._ids.size == 0:
            index._ids = np.zeros(16, np.int64)
            index._packed = np.zeros((16, nbytes), np.uint8)
        return index


def build(embeddings, params: IndexParams = IndexParams(), seed: int = 0) -> HammingIndex:
    """Functional constructor over a mapping id -> BitEmbedding (or bit matrix)."""
    index = HammingIndex(params.n_tables, params.band_bits, params.candidate_cap, seed)
    return index.fit(embeddings)


def insert(index: HammingIndex, id, embedding) -> HammingIndex:
    return index.insert(id, embedding)


def query(index: HammingIndex, q, params: IndexParams = IndexParams()) -> QueryResult:
    return index.query(q, params.top_k, params.max_distance, params.candidate_cap)
