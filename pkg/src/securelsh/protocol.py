"""In-process simulation of two-server black-box hash computation.

The client XOR-shares its encoded input between the servers.  Each server
holds a private seed share, and an ideal functionality (standing in for a
garbled circuit) returns XOR shares of S(x) computed under the combined
seed.  Server1 unmasks the hash and keeps the index.  Every message lands
in an append-only party view so the views can be audited afterwards.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from ._hashing import derive
from ._validation import check_dense, check_sets
from .scheme import SchemeConfig
from .secure import secure_embed_bits

CLIENT = "Client"
SERVER1 = "Server1"
SERVER2 = "Server2"
FUNCTIONALITY = "F"

PAD = "pad"
CIPHERTEXT = "ciphertext"
SHARE1 = "hash_share_1"
SHARE2 = "hash_share_2"

# labels each party may legitimately receive
ALLOWED_LABELS = {
    CLIENT: frozenset(),
    SERVER1: frozenset({PAD, SHARE1, SHARE2}),
    SERVER2: frozenset({CIPHERTEXT, SHARE2}),
}


class PadReuseError(RuntimeError):
    pass


@dataclass(frozen=True)
class Message:
    session: int
    sender: str
    recipient: str
    label: str
    payload: bytes

    def to_json(self) -> str:
        return json.dumps({
            "session": self.session, "from": self.sender, "to": self.recipient,
            "label": self.label, "payload": self.payload.hex(),
        })


class PartyView:
    """Append-only transcript of the messages one party received."""

    def __init__(self, party: str):
        self.party = party
        self._transcript: list[Message] = []

    def receive(self, msg: Message):
        if msg.recipient != self.party:
            raise ValueError(f"message for {msg.recipient} delivered to {self.party}")
        self._transcript.append(msg)

    @property
    def transcript(self) -> tuple:
        return tuple(self._transcript)

    def payload(self, label: str) -> bytes:
        for m in self._transcript:
            if m.label == label:
                return m.payload
        raise KeyError(label)


@dataclass(frozen=True)
class SeedShare:
    server: str
    value: int

    def __post_init__(self):
        if not 0 <= self.value < 2**64:
            raise ValueError("seed share must be a 64-bit unsigned integer")

    def __repr__(self):
        return f"SeedShare(server={self.server!r}, value=<hidden>)"


@dataclass(frozen=True)
class ProtocolConfig:
    """Scheme parameters the servers agree on; ``dim`` is D, or the universe size for sets."""

    family: str = "simhash"
    k: int = 4
    l: int = 64
    dim: int = 16

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def is_sets(self) -> bool:
        return self.family.split(":")[0] == "minhash"

    @property
    def n_bytes(self) -> int:
        return (self.dim + 7) // 8 if self.is_sets else 8 * self.dim

    def scheme(self, combined_seed: int) -> SchemeConfig:
        return SchemeConfig.create(self.family, self.k, self.l, combined_seed)


# -- encoding -------------------------------------------------------------------

def encode_input(x, cfg: ProtocolConfig) -> bytes:
    """Dense vectors as little-endian float64 per attribute; sets as a universe bitmap."""
    if cfg.is_sets:
        (ids,) = check_sets([x], universe=cfg.dim)
        mask = np.zeros(cfg.dim, dtype=np.uint8)
        mask[ids] = 1
        return np.packbits(mask).tobytes()
    x = check_dense(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
    if x.size != cfg.dim:
        raise ValueError(f"expected {cfg.dim} attributes, got {x.size}")
    return x.astype("<f8").tobytes()


def decode_input(data: bytes, cfg: ProtocolConfig):
    if len(data) != cfg.n_bytes:
        raise ValueError(f"encoded input has {len(data)} bytes, expected {cfg.n_bytes}")
    if cfg.is_sets:
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: cfg.dim]
        return set(np.flatnonzero(bits).tolist())
    return np.frombuffer(data, dtype="<f8").copy()


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return (np.frombuffer(a, np.uint8) ^ np.frombuffer(b, np.uint8)).tobytes()


def client_share(x: bytes, rng: np.random.Generator) -> tuple[bytes, bytes]:
    """One-time pad: returns (v, x ^ v) with v uniform."""
    v = rng.bytes(len(x))
    return v, xor_bytes(x, v)


def new_seed_share(server: str, rng: np.random.Generator) -> SeedShare:
    return SeedShare(server, int(rng.integers(0, 2**64, dtype=np.uint64)))


def combine_shares(share1: SeedShare, share2: SeedShare) -> int:
    return share1.value ^ share2.value


def bits_to_bytes(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def bytes_to_bits(data: bytes, l: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:l]


def ideal_hash_functionality(v: bytes, c: bytes, share1: SeedShare, share2: SeedShare,
                             cfg: ProtocolConfig, rng: np.random.Generator) -> tuple[bytes, bytes]:
    """Trusted stand-in for the two-party computation.

    Returns packed shares (S1, S2) with S1 ^ S2 = S(x) under the combined
    seed; S2 is uniform.  Nothing internal is exposed.
    """
    x = decode_input(xor_bytes(v, c), cfg)
    scheme = cfg.scheme(combine_shares(share1, share2))
    batch = [x] if cfg.is_sets else x[None, :]
    s = secure_embed_bits(batch, scheme)[0]
    s2 = rng.integers(0, 2, size=cfg.l, dtype=np.uint8)
    return bits_to_bytes(s ^ s2), bits_to_bytes(s2)


# -- sessions -------------------------------------------------------------------

class PadRegistry:
    """Run-scoped record of pad digests; a repeated pad is refused."""

    def __init__(self):
        self._seen: set[bytes] = set()

    def register(self, pad: bytes):
        digest = hashlib.sha256(pad).digest()
        if digest in self._seen:
            raise PadReuseError("one-time pad reused")
        self._seen.add(digest)

    def __len__(self):
        return len(self._seen)


@dataclass
class SessionResult:
    session: int
    views: dict
    messages: list
    hash_bits: np.ndarray

    def view_bits(self, party: str, label: str) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.views[party].payload(label), dtype=np.uint8))


def run_session(x, cfg: ProtocolConfig, share1: SeedShare, share2: SeedShare, session: int,
                rng: np.random.Generator, registry: PadRegistry | None = None,
                leak: bool = False) -> SessionResult:
    """One client hashing request, in fixed message order.

    ``leak=True`` runs a faulty functionality that copies the plaintext into
    Server1's view; it exists as a negative control for the audit.
    """
    views = {p: PartyView(p) for p in (CLIENT, SERVER1, SERVER2)}
    messages = []

    def send(sender, recipient, label, payload):
        msg = Message(session, sender, recipient, label, payload)
        views[recipient].receive(msg)
        messages.append(msg)

    encoded = encode_input(x, cfg)
    v, c = client_share(encoded, rng)
    if registry is not None:
        registry.register(v)
    send(CLIENT, SERVER1, PAD, v)
    send(CLIENT, SERVER2, CIPHERTEXT, c)
    s1, s2 = ideal_hash_functionality(v, c, share1, share2, cfg, rng)
    if leak:
        send(FUNCTIONALITY, SERVER1, "debug_input", xor_bytes(v, c))
    send(FUNCTIONALITY, SERVER1, SHARE1, s1)
    send(FUNCTIONALITY, SERVER2, SHARE2, s2)
    send(SERVER2, SERVER1, SHARE2, s2)
    hash_bits = bytes_to_bits(xor_bytes(s1, s2), cfg.l)
    return SessionResult(session, views, messages, hash_bits)


class TwoServerProtocol:
    """A deployment: two servers with fixed seed shares serving many clients.

    Server1 keeps the unmasked signatures in ``index`` (a HammingIndex or
    anything with ``insert(id, bits)``) when one is attached.
    """

    def __init__(self, cfg: ProtocolConfig, seed: int = 0, index=None, leak: bool = False):
        self.cfg = cfg
        self.seed = seed
        self.leak = leak
        self.index = index
        # each server draws its share from its own stream
        self.share1 = new_seed_share(SERVER1, np.random.default_rng(derive(seed, 0x51)))
        self.share2 = new_seed_share(SERVER2, np.random.default_rng(derive(seed, 0x52)))
        self.registry = PadRegistry()
        self.sessions = 0

    @property
    def combined_seed(self) -> int:
        return combine_shares(self.share1, self.share2)

    def run(self, x) -> SessionResult:
        sid = self.sessions
        rng = np.random.default_rng(derive(self.seed, 0xC1, sid))
        res = run_session(x, self.cfg, self.share1, self.share2, sid, rng, self.registry, self.leak)
        self.sessions += 1
        return res

    def enroll(self, record_id: int, x) -> SessionResult:
        res = self.run(x)
        if self.index is not None:
            self.index.insert(record_id, res.hash_bits)
        return res


# -- audit ----------------------------------------------------------------------

@dataclass
class AuditReport:
    violations: list = field(default_factory=list)
    sessions: int = 0
    tests: int = 0
    threshold: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, name: str, detail: str):
        self.violations.append(f"{name}: {detail}")


def audit_views(results, inputs, combined_seed: int, cfg: ProtocolConfig,
                alpha: float = 0.01, min_runs: int = 100) -> AuditReport:
    """Check every view against the honest-but-curious contract.

    Structural checks per session: only allowed labels, no plaintext and
    no combined seed inside any payload.  With at least ``min_runs``
    sessions, each single-message bit is also tested for correlation with
    each input bit, Bonferroni-corrected at level ``alpha``.
    """
    report = AuditReport(sessions=len(results))
    seed_bytes = [int(combined_seed).to_bytes(8, order) for order in ("little", "big")]
    for res, x in zip(results, inputs):
        plain = encode_input(x, cfg)
        for party, view in res.views.items():
            for m in view.transcript:
                if m.label not in ALLOWED_LABELS[party]:
                    report.add("unexpected message", f"{party} received {m.label!r} in session {res.session}")
                if len(plain) >= 4 and plain in m.payload:
                    report.add("plaintext in view", f"{party} {m.label!r} in session {res.session}")
                if any(s in m.payload for s in seed_bytes):
                    report.add("seed in view", f"{party} {m.label!r} in session {res.session}")
    if len(results) >= min_runs:
        _correlation_audit(results, inputs, cfg, alpha, report)
    return report


def _correlation_audit(results, inputs, cfg, alpha, report):
    X = np.array([np.unpackbits(np.frombuffer(encode_input(x, cfg), np.uint8)) for x in inputs], float)
    X = X[:, X.std(axis=0) > 0]
    n = len(results)
    if X.shape[1] == 0:
        return
    Xz = (X - X.mean(0)) / X.std(0)
    streams = [(SERVER1, PAD), (SERVER1, SHARE1), (SERVER1, SHARE2), (SERVER2, CIPHERTEXT), (SERVER2, SHARE2)]
    mats = []
    for party, label in streams:
        try:
            M = np.array([r.view_bits(party, label) for r in results], float)
        except KeyError:
            continue
        mats.append((party, label, M[:, M.std(axis=0) > 0]))
    total = sum(M.shape[1] for *_, M in mats) * X.shape[1]
    if total == 0:
        return
    # corr ~ N(0, 1/n) under independence
    thr = norm.isf(alpha / (2 * total)) / np.sqrt(n)
    report.tests, report.threshold = int(total), float(thr)
    for party, label, M in mats:
        if M.shape[1] == 0:
            continue
        Mz = (M - M.mean(0)) / M.std(0)
        corr = Mz.T @ Xz / n
        worst = float(np.abs(corr).max())
        if worst > thr:
            report.add("correlated view bits", f"{party} {label!r} |corr|={worst:.3f} > {thr:.3f}")


def write_trace(results, path):
    with open(path, "w") as fh:
        for res in results:
            for m in res.messages:
                fh.write(m.to_json() + "\n")
