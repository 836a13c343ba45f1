"""Secure locality-sensitive hashing: embeddings that keep near neighbours
findable while making non-neighbours look like independent random bits."""

__version__ = "0.1.0"

from .attack import AttackScheme, PocsParams, ProbeSet, TriangulationAttack, pocs, run_attack
from .index import HammingIndex, IndexParams, QueryResult, brute_force_rank
from .lsh import collision_model, embed, estimate_similarity, invert_collision
from .noise import NoiseParams, NoisyLSHEmbedder, required_f
from .protocol import ProtocolConfig, TwoServerProtocol, audit_views
from .scheme import BitEmbedding, FamilyKind, SchemeConfig, SchemeMismatchError, SeedMaterial
from .secure import (
    PrivacyBudget,
    SecureLSHEmbedder,
    mutual_info_bound,
    required_k,
    rho_prime,
    secure_embed,
    tradeoff_report,
)

__all__ = [
    "AttackScheme", "BitEmbedding", "FamilyKind", "HammingIndex", "IndexParams", "NoiseParams",
    "NoisyLSHEmbedder", "PocsParams", "PrivacyBudget", "ProbeSet", "ProtocolConfig", "QueryResult",
    "SchemeConfig", "SchemeMismatchError", "SecureLSHEmbedder", "SeedMaterial", "TriangulationAttack",
    "TwoServerProtocol", "audit_views", "brute_force_rank", "collision_model", "embed",
    "estimate_similarity", "invert_collision", "mutual_info_bound", "pocs", "required_f",
    "required_k", "rho_prime", "run_attack", "secure_embed", "tradeoff_report",
]
