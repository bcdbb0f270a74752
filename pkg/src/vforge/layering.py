"""Rank-and-compile-status to layer assignment, plus loss weights.

Layers form a six-tier pyramid: 1 is the narrow high-quality top, 6 the
wide base of code that is broken or depends on missing units.
"""

from __future__ import annotations

import dataclasses
from collections import Counter

from .samples import Complexity, CompileStatus, Sample

LAYER_WEIGHTS: dict[int, float] = {1: 1.0, 2: 0.8, 3: 0.6, 4: 0.4, 5: 0.2, 6: 0.1}


class UnlabeledSample(Exception):
    """Raised when a sample reaches layering without a rank or compile status."""


def assign_layer(rank: int, compile_status: CompileStatus) -> int:
    """Map a quality rank and compile outcome onto layers 1..6.

    Code that compiles but references units missing from the corpus lands in
    layer 6 regardless of rank; otherwise the rank alone decides.
    """
    if not isinstance(rank, int) or isinstance(rank, bool) or not 0 <= rank <= 20:
        raise ValueError(f"rank must be an int in [0, 20], got {rank!r}")
    if compile_status == CompileStatus.DEPENDENCY_ISSUE:
        return 6
    if rank == 20:
        return 1
    if rank >= 15:
        return 2
    if rank >= 10:
        return 3
    if rank >= 5:
        return 4
    if rank >= 1:
        return 5
    return 6


def layer_samples(samples: list[Sample]) -> list[Sample]:
    """Return samples with ``layer`` filled in; order is preserved."""
    out = []
    for s in samples:
        if s.rank is None:
            raise UnlabeledSample(f"sample {s.id} has no rank")
        if s.compile_status is None:
            raise UnlabeledSample(f"sample {s.id} has no compile status")
        out.append(dataclasses.replace(s, layer=assign_layer(s.rank, s.compile_status)))
    return out


def layer_report(samples: list[Sample]) -> dict:
    """Counts per layer and per (layer, complexity tier), with weights."""
    layer_counts: Counter[int] = Counter()
    tier_counts: Counter[tuple[int, str]] = Counter()
    for s in samples:
        if s.layer is None:
            raise UnlabeledSample(f"sample {s.id} has no layer")
        layer_counts[s.layer] += 1
        if s.complexity is not None:
            tier_counts[(s.layer, s.complexity.value)] += 1
    return {
        "total": len(samples),
        "layers": {
            str(layer): {
                "count": layer_counts.get(layer, 0),
                "loss_weight": LAYER_WEIGHTS[layer],
                "tiers": {
                    tier.value: tier_counts.get((layer, tier.value), 0)
                    for tier in Complexity
                    if tier_counts.get((layer, tier.value), 0)
                },
            }
            for layer in range(1, 7)
        },
    }


def render_pyramid(report: dict) -> str:
    """Crude text pyramid of layer sizes, widest layer scaled to 40 chars."""
    counts = [(layer, report["layers"][str(layer)]["count"]) for layer in range(1, 7)]
    widest = max((c for _, c in counts), default=0)
    lines = []
    for layer, count in counts:
        width = 0 if widest == 0 else max(1 if count else 0, round(40 * count / widest))
        bar = "#" * width
        lines.append(f"L{layer} {bar:<40} {count}")
    return "\n".join(lines)
