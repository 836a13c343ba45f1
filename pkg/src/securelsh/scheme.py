"""Scheme descriptors shared by every hashing module.

A :class:`SchemeConfig` fully determines an embedding function: the LSH
family, the composition order ``k``, the output length ``l`` and the seed
material.  All per-bit randomness is derived from a single master seed with
a counter-mode PRF, so an embedding is reproducible from one integer.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ._hashing import MERSENNE61, MASK64, derive, is_prime

MINHASH = "minhash"
SIMHASH = "simhash"
RADEMACHER = "rademacher"
GAUSSIAN = "gaussian"

# PRF domain tags; never reuse a tag for a different purpose.
DOMAIN_PERMUTATION = 1
DOMAIN_PROJECTION = 2
DOMAIN_UNIVERSAL = 3
DOMAIN_REHASH = 4
DOMAIN_NOISE = 5


class SchemeMismatchError(ValueError):
    """Raised when embeddings from different schemes are compared."""


@dataclass(frozen=True)
class FamilyKind:
    """An LSH family: MinHash over sets, or SimHash over dense vectors."""

    name: str
    style: str | None = None

    def __post_init__(self):
        if self.name == SIMHASH:
            style = self.style or RADEMACHER
            if style not in (RADEMACHER, GAUSSIAN):
                raise ValueError(f"unknown projection style {style!r}")
            object.__setattr__(self, "style", style)
        elif self.name == MINHASH:
            if self.style is not None:
                raise ValueError("MinHash takes no projection style")
        else:
            raise ValueError(f"unknown LSH family {self.name!r}")

    @classmethod
    def parse(cls, text: "str | FamilyKind") -> "FamilyKind":
        """Accept ``"minhash"``, ``"simhash"`` or ``"simhash:gaussian"``."""
        if isinstance(text, FamilyKind):
            return text
        name, _, style = str(text).lower().partition(":")
        return cls(name, style or None)

    @property
    def is_minhash(self) -> bool:
        return self.name == MINHASH

    def __str__(self):
        return self.name if self.style in (None, RADEMACHER) else f"{self.name}:{self.style}"


@dataclass(frozen=True)
class SeedMaterial:
    """Master seed plus the modulus of the universal hash.

    Every derived seed is a pure function of ``(master_seed, i, j)``.
    """

    master_seed: int
    p: int = MERSENNE61

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & MASK64)
        if not is_prime(self.p):
            raise ValueError(f"universal-hash modulus {self.p} is not prime")
        if self.p > MERSENNE61:
            raise ValueError("modulus must not exceed 2**61 - 1")

    def permutation_keys(self, l: int, k: int) -> np.ndarray:
        """(l, k) keys of the pseudorandom MinHash permutations."""
        i, j = np.ogrid[:l, :k]
        return derive(self.master_seed, DOMAIN_PERMUTATION, i, j)

    def projection_seeds(self, l: int, k: int) -> np.ndarray:
        """(l, k) seeds of the SimHash projection vectors."""
        i, j = np.ogrid[:l, :k]
        return derive(self.master_seed, DOMAIN_PROJECTION, i, j)

    def universal_seeds(self, l: int, k: int) -> np.ndarray:
        """(l, k + 1) multipliers r_1..r_{k+1}, each in [1, p - 1]."""
        i, j = np.ogrid[:l, : k + 1]
        words = derive(self.master_seed, DOMAIN_UNIVERSAL, i, j)
        return words % np.uint64(self.p - 1) + np.uint64(1)

    def rehash_multipliers(self, l: int) -> np.ndarray:
        """(l,) odd multipliers for the 1-bit universal rehash."""
        return derive(self.master_seed, DOMAIN_REHASH, np.arange(l)) | np.uint64(1)


@dataclass(frozen=True)
class SchemeConfig:
    """family + composition order k + bit count l + seeds.

    ``k == 1`` is vanilla LSH; ``k > 1`` is the secure composition.
    """

    family: FamilyKind
    k: int
    l: int
    seeds: SeedMaterial = field(default_factory=lambda: SeedMaterial(0))

    def __post_init__(self):
        object.__setattr__(self, "family", FamilyKind.parse(self.family))
        if int(self.k) < 1:
            raise ValueError("composition order k must be >= 1")
        if int(self.l) < 1:
            raise ValueError("bit count l must be >= 1")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "l", int(self.l))

    @classmethod
    def create(cls, family, k=1, l=64, master_seed=0) -> "SchemeConfig":
        return cls(FamilyKind.parse(family), k, l, SeedMaterial(master_seed))

    def with_k(self, k: int) -> "SchemeConfig":
        return SchemeConfig(self.family, k, self.l, self.seeds)

    def to_dict(self) -> dict:
        out = {
            "master_seed": self.seeds.master_seed,
            "family": self.family.name,
            "k": self.k,
            "l": self.l,
            "p": self.seeds.p,
        }
        if self.family.style is not None:
            out["style"] = self.family.style
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: "str | dict") -> "SchemeConfig":
        d = json.loads(text) if isinstance(text, str) else dict(text)
        family = FamilyKind(d["family"], d.get("style"))
        return cls(family, d["k"], d["l"], SeedMaterial(d["master_seed"], d.get("p", MERSENNE61)))

    @property
    def scheme_id(self) -> str:
        return scheme_digest(self.to_dict())


def scheme_digest(descriptor: dict) -> str:
    blob = json.dumps(descriptor, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class BitEmbedding:
    """An l-bit signature bound to the scheme that produced it."""

    __slots__ = ("bits", "scheme_id")

    def __init__(self, bits, scheme_id: str):
        bits = np.array(bits, dtype=np.uint8).ravel()
        if bits.size and bits.max() > 1:
            raise ValueError("bits must be 0/1")
        bits.flags.writeable = False
        self.bits = bits
        self.scheme_id = str(scheme_id)

    def __len__(self):
        return self.bits.size

    def __eq__(self, other):
        if not isinstance(other, BitEmbedding):
            return NotImplemented
        return self.scheme_id == other.scheme_id and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.scheme_id, self.bits.tobytes()))

    def __repr__(self):
        return f"BitEmbedding(l={len(self)}, scheme_id={self.scheme_id!r}, hex={self.to_hex()!r})"

    def _check(self, other: "BitEmbedding"):
        if other.scheme_id != self.scheme_id:
            raise SchemeMismatchError(
                f"scheme mismatch: {self.scheme_id} vs {other.scheme_id}"
            )
        if len(other) != len(self):
            raise SchemeMismatchError("embeddings differ in length")

    def matches(self, other: "BitEmbedding") -> int:
        self._check(other)
        return int(np.count_nonzero(self.bits == other.bits))

    def hamming(self, other: "BitEmbedding") -> int:
        self._check(other)
        return int(np.count_nonzero(self.bits != other.bits))

    def to_hex(self) -> str:
        """Packed hex; the most significant bit of the first byte is bit 0."""
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, l: int, scheme_id: str) -> "BitEmbedding":
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        if raw.size != (l + 7) // 8:
            raise ValueError(f"hex string does not encode {l} bits")
        return cls(np.unpackbits(raw)[:l], scheme_id)
