"""Near-duplicate removal over token shingles.

MinHash + LSH banding proposes candidate pairs; every drop is gated by an
exact Jaccard check, so LSH can miss duplicates but never fabricate them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import logging
from typing import Iterable, Sequence

import numpy as np

from .samples import Sample
from .vlex import Token, lex

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.85
DEFAULT_SHINGLE_K = 5
DEFAULT_PERMS = 128
DEFAULT_BANDS = 32
DEFAULT_SEED = 42

# Minima are clamped below the empty-set sentinel so an empty signature can
# only ever equal another empty signature.
_EMPTY_SENTINEL = np.uint64(2**64 - 1)
_MAX_MINIMUM = np.uint64(2**64 - 2)


@dataclasses.dataclass(frozen=True)
class ShingleSet:
    sample_id: str
    shingles: frozenset[int]


@dataclasses.dataclass
class MinHashSignature:
    sample_id: str
    sig: np.ndarray  # uint64, length = number of permutations
    seed: int


@dataclasses.dataclass
class DedupDecision:
    kept_id: str
    dropped: list[tuple[str, float]]  # (dropped_id, exact jaccard vs a verified partner)

    def to_dict(self) -> dict:
        return {
            "kept_id": self.kept_id,
            "dropped": [{"id": i, "jaccard": j} for i, j in self.dropped],
        }


def _window_hash(texts: Sequence[str]) -> int:
    digest = hashlib.blake2b("\x1f".join(texts).encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def shingle(sample_id: str, tokens: Sequence[Token | str], k: int = DEFAULT_SHINGLE_K) -> ShingleSet:
    """Hash each consecutive k-token window of token texts to a 64-bit value.

    Fewer than k tokens yields the empty set. Comment/whitespace robustness
    comes from the lexer, which never emits them.
    """
    if k < 1:
        raise ValueError(f"shingle window k must be >= 1, got {k}")
    texts = [t.text if isinstance(t, Token) else t for t in tokens]
    hashes = frozenset(_window_hash(texts[i : i + k]) for i in range(len(texts) - k + 1))
    return ShingleSet(sample_id=sample_id, shingles=hashes)


def exact_jaccard(a: ShingleSet, b: ShingleSet) -> float:
    """|a n b| / |a u b|, with J(empty, empty) defined as 1.0."""
    if not a.shingles and not b.shingles:
        return 1.0
    union = len(a.shingles | b.shingles)
    if union == 0:
        return 1.0
    return len(a.shingles & b.shingles) / union


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps mod 2**64.
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _salts(perms: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2**63, size=perms, dtype=np.uint64) * np.uint64(2) + np.uint64(1)


def minhash(s: ShingleSet, perms: int = DEFAULT_PERMS, seed: int = DEFAULT_SEED) -> MinHashSignature:
    """Componentwise minima over a seeded family of 64-bit hash functions."""
    if perms < 1:
        raise ValueError(f"number of permutations must be >= 1, got {perms}")
    if not s.shingles:
        sig = np.full(perms, _EMPTY_SENTINEL, dtype=np.uint64)
        return MinHashSignature(sample_id=s.sample_id, sig=sig, seed=seed)
    salts = _salts(perms, seed)
    values = np.fromiter(s.shingles, dtype=np.uint64, count=len(s.shingles))
    mixed = _mix64(values[None, :] ^ salts[:, None])
    sig = np.minimum(mixed.min(axis=1), _MAX_MINIMUM)
    return MinHashSignature(sample_id=s.sample_id, sig=sig, seed=seed)


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of equal signature components."""
    return float(np.mean(a.sig == b.sig))


def lsh_candidates(
    signatures: Sequence[MinHashSignature], bands: int, rows: int
) -> set[tuple[str, str]]:
    """Pairs whose signatures agree on every row of at least one band.

    Band keys are the raw row bytes, so two signatures collide in a band
    iff those rows are actually equal.
    """
    if not signatures:
        return set()
    perms = len(signatures[0].sig)
    if bands * rows != perms:
        raise ValueError(f"bands*rows must equal signature length: {bands}*{rows} != {perms}")
    buckets: dict[tuple[int, bytes], list[str]] = {}
    for s in signatures:
        for b in range(bands):
            key = (b, s.sig[b * rows : (b + 1) * rows].tobytes())
            buckets.setdefault(key, []).append(s.sample_id)
    pairs: set[tuple[str, str]] = set()
    for ids in buckets.values():
        if len(ids) > 1:
            for x, y in itertools.combinations(sorted(set(ids)), 2):
                pairs.add((x, y))
    return pairs


class UnionFind:
    """Disjoint sets keyed by sample id; the root is always the smallest id
    in its component, which fixes the surviving duplicate deterministically."""

    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        if x not in self.parent:
            self.parent[x] = x
            return x
        if self.parent[x] != x:
            self.parent[x] = self.find(self.parent[x])
        return self.parent[x]

    def union(self, x: str, y: str) -> None:
        px, py = self.find(x), self.find(y)
        self.parent[px] = self.parent[py] = min(px, py)


def dedup(
    samples: Sequence[Sample],
    threshold: float = DEFAULT_THRESHOLD,
    k: int = DEFAULT_SHINGLE_K,
    perms: int = DEFAULT_PERMS,
    bands: int = DEFAULT_BANDS,
    rows: int | None = None,
    seed: int = DEFAULT_SEED,
) -> tuple[list[Sample], list[DedupDecision]]:
    """Remove samples whose verified Jaccard similarity reaches ``threshold``.

    Expects a module-filtered stream (everything must lex). Rows that share
    a content id are collapsed first; remaining duplicates are grouped by
    union-find over the verified pairs and represented by the smallest id.
    Output preserves input order and is deterministic given inputs + seed.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if rows is None:
        if perms % bands != 0:
            raise ValueError(f"perms {perms} not divisible by bands {bands}")
        rows = perms // bands
    if bands * rows != perms:
        raise ValueError(f"bands*rows must equal perms: {bands}*{rows} != {perms}")

    # Exact-content collapse: identical ids are trivially J=1 duplicates.
    unique: list[Sample] = []
    seen: dict[str, Sample] = {}
    id_dup_dropped: dict[str, int] = {}
    for s in samples:
        if s.id in seen:
            id_dup_dropped[s.id] = id_dup_dropped.get(s.id, 0) + 1
        else:
            seen[s.id] = s
            unique.append(s)

    shingle_sets = {s.id: shingle(s.id, lex(s.code), k) for s in unique}
    signatures = [minhash(shingle_sets[s.id], perms, seed) for s in unique]
    candidates = lsh_candidates(signatures, bands, rows)

    uf = UnionFind()
    best_edge: dict[str, float] = {}  # id -> max verified J on an incident edge
    for a, b in sorted(candidates):
        j = exact_jaccard(shingle_sets[a], shingle_sets[b])
        if j >= threshold:
            uf.union(a, b)
            best_edge[a] = max(best_edge.get(a, 0.0), j)
            best_edge[b] = max(best_edge.get(b, 0.0), j)

    groups: dict[str, list[str]] = {}
    for s in unique:
        root = uf.find(s.id)
        if root != s.id or s.id in best_edge:
            groups.setdefault(root, []).append(s.id)

    decisions: list[DedupDecision] = []
    for root in sorted(groups):
        dropped = [(i, best_edge[i]) for i in sorted(groups[root]) if i != root]
        if dropped:
            decisions.append(DedupDecision(kept_id=root, dropped=dropped))
    for dup_id in sorted(id_dup_dropped):
        entry = DedupDecision(kept_id=dup_id, dropped=[(dup_id, 1.0)] * id_dup_dropped[dup_id])
        decisions.append(entry)

    kept = [s for s in unique if uf.find(s.id) == s.id]
    logger.info("dedup: %d in, %d kept, %d decisions", len(samples), len(kept), len(decisions))
    return kept, decisions
