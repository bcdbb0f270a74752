"""Curriculum manifest construction and the shuffled-field corruption tool.

A manifest is a flat JSONL training order: 24 phases (6 layers x 4
complexity tiers), descending quality, ascending complexity within a layer.
"""

from __future__ import annotations

import dataclasses
import random
from typing import Iterable, Sequence

from .layering import LAYER_WEIGHTS, assign_layer
from .samples import Complexity, Sample, TIER_ORDER, dump_json_line

DEFAULT_EPOCHS = 1
DEFAULT_SHUFFLE_SEED = 7

PHASE_COUNT = 6 * len(TIER_ORDER)


class IncompleteSample(Exception):
    """Raised when a sample is missing a field the manifest needs."""


@dataclasses.dataclass
class ManifestEntry:
    sample_id: str
    phase: int
    order: int
    loss_weight: float
    epochs: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def phase_of(layer: int, complexity: Complexity) -> int:
    """Phases 0..23: layer majors the order, complexity tier minors it."""
    if layer not in LAYER_WEIGHTS:
        raise ValueError(f"layer must be in 1..6, got {layer!r}")
    return 4 * (layer - 1) + TIER_ORDER[complexity]


def build_manifest(
    samples: Sequence[Sample],
    epochs_per_phase: int = DEFAULT_EPOCHS,
    shuffle_seed: int = DEFAULT_SHUFFLE_SEED,
) -> list[ManifestEntry]:
    """Order samples into the phase curriculum.

    Within a phase, ids are sorted ascending and then shuffled by
    ``random.Random(f"{shuffle_seed}:{phase}")``; that rule is a stable
    contract so independent writers can reproduce an order byte for byte.
    ``order`` numbers the full sequence 0..N-1.
    """
    if epochs_per_phase < 1:
        raise ValueError(f"epochs_per_phase must be >= 1, got {epochs_per_phase}")
    by_phase: dict[int, list[str]] = {}
    weights: dict[str, float] = {}
    seen: set[str] = set()
    for s in samples:
        if s.layer is None:
            raise IncompleteSample(f"sample {s.id} has no layer")
        if s.complexity is None:
            raise IncompleteSample(f"sample {s.id} has no complexity tier")
        if s.id in seen:
            raise IncompleteSample(f"duplicate sample id {s.id}")
        seen.add(s.id)
        by_phase.setdefault(phase_of(s.layer, s.complexity), []).append(s.id)
        weights[s.id] = LAYER_WEIGHTS[s.layer]

    entries: list[ManifestEntry] = []
    order = 0
    for phase in sorted(by_phase):
        ids = sorted(by_phase[phase])
        random.Random(f"{shuffle_seed}:{phase}").shuffle(ids)
        for sample_id in ids:
            entries.append(
                ManifestEntry(
                    sample_id=sample_id,
                    phase=phase,
                    order=order,
                    loss_weight=weights[sample_id],
                    epochs=epochs_per_phase,
                )
            )
            order += 1
    return entries


def write_manifest(path, entries: Sequence[ManifestEntry], samples: Sequence[Sample]) -> None:
    """Write one JSON object per entry, inlining description and code.

    Field order is fixed so equal inputs produce byte-identical files.
    """
    by_id = {s.id: s for s in samples}
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            s = by_id.get(e.sample_id)
            if s is None:
                raise IncompleteSample(f"manifest entry {e.sample_id} has no sample row")
            if s.description is None:
                raise IncompleteSample(f"sample {e.sample_id} has no description")
            row = {
                "sample_id": e.sample_id,
                "phase": e.phase,
                "order": e.order,
                "loss_weight": e.loss_weight,
                "epochs": e.epochs,
                "description": s.description,
                "code": s.code,
            }
            fh.write(dump_json_line(row) + "\n")


def _derangement(n: int, rng: random.Random) -> list[int]:
    # Rejection sampling: expected ~e tries; requires n >= 2.
    idx = list(range(n))
    while True:
        perm = idx[:]
        rng.shuffle(perm)
        if all(perm[i] != i for i in idx):
            return perm


def corrupt_dataset(samples: Sequence[Sample], seed: int = 13) -> list[Sample]:
    """Reassign codes, descriptions, and ranks by three independent
    fixed-point-free permutations, then re-layer from the moved rank.

    Every sample keeps its identity fields (id, source path, origin,
    compile status, complexity) but no sample keeps its own code,
    description, or rank. Needs at least two samples.
    """
    n = len(samples)
    if n < 2:
        raise ValueError(f"corruption needs at least 2 samples, got {n}")
    perms = {
        field: _derangement(n, random.Random(f"{seed}:{field}"))
        for field in ("codes", "descriptions", "ranks")
    }
    out: list[Sample] = []
    for i, s in enumerate(samples):
        if s.rank is None or s.compile_status is None:
            raise IncompleteSample(f"sample {s.id} has no rank or compile status")
        moved_rank = samples[perms["ranks"][i]].rank
        out.append(
            dataclasses.replace(
                s,
                code=samples[perms["codes"][i]].code,
                description=samples[perms["descriptions"][i]].description,
                rank=moved_rank,
                layer=assign_layer(moved_rank, s.compile_status),
            )
        )
    return out
