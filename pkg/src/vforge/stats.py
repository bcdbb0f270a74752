"""Run-level telemetry: per-stage attrition, dedup group sizes, rank
histogram, layer pyramid, complexity distribution.

Every CLI stage leaves a ``<output>.stage.json`` sidecar; this module
aggregates a directory of them plus the layered sample file into one
report. Count conservation (in = out + dropped) is a hard failure.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .samples import Complexity, Sample, iter_samples

STAGE_ORDER = ["ingest", "filter-modules", "dedup", "compile-gate", "label", "layer", "manifest"]

# Published layer sizes of the original full-scale corpus. Local runs on
# other corpora will not reproduce these; they are embedded for orientation.
REFERENCE_LAYER_COUNTS = {1: 235, 2: 150_279, 3: 105_973, 4: 5_015, 5: 275, 6: 430_461}


class IntegrityError(Exception):
    """Stage counts do not add up; the pipeline itself is suspect."""


@dataclasses.dataclass
class StageRecord:
    stage: str
    in_count: int
    out_count: int
    dropped: int
    input: str | None = None
    output: str | None = None
    params: dict = dataclasses.field(default_factory=dict)
    extra: dict = dataclasses.field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StageRecord":
        return cls(
            stage=d["stage"],
            in_count=d["in_count"],
            out_count=d["out_count"],
            dropped=d["dropped"],
            input=d.get("input"),
            output=d.get("output"),
            params=d.get("params", {}),
            extra=d.get("extra", {}),
        )


def write_sidecar(output_path, record: StageRecord) -> Path:
    path = Path(str(output_path) + ".stage.json")
    path.write_text(json.dumps(record.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def read_sidecars(run_dir) -> list[StageRecord]:
    """All stage sidecars in a directory, in pipeline order."""
    records = []
    for path in sorted(Path(run_dir).glob("*.stage.json")):
        with open(path, encoding="utf-8") as fh:
            records.append(StageRecord.from_dict(json.load(fh)))
    known = {name: i for i, name in enumerate(STAGE_ORDER)}
    records.sort(key=lambda r: (known.get(r.stage, len(STAGE_ORDER)), r.stage))
    return records


def check_conservation(records: list[StageRecord]) -> None:
    for r in records:
        if r.in_count != r.out_count + r.dropped:
            raise IntegrityError(
                f"stage {r.stage}: in={r.in_count} != out={r.out_count} + dropped={r.dropped}"
            )


def rank_histogram(samples: list[Sample]) -> list[int]:
    bins = [0] * 21
    for s in samples:
        if s.rank is not None:
            bins[s.rank] += 1
    return bins


def summarize(run_dir) -> dict:
    """Aggregate a run directory into one deterministic report."""
    run_dir = Path(run_dir)
    records = read_sidecars(run_dir)
    check_conservation(records)

    report: dict = {
        "stages": [
            {"stage": r.stage, "in": r.in_count, "out": r.out_count, "dropped": r.dropped}
            for r in records
        ],
        "reference_layer_counts": {
            "note": (
                "published layer sizes of the original full-scale corpus, "
                "for orientation only; local runs will not reproduce them"
            ),
            "counts": {str(k): v for k, v in REFERENCE_LAYER_COUNTS.items()},
        },
    }

    by_stage = {r.stage: r for r in records}

    dedup_rec = by_stage.get("dedup")
    if dedup_rec is not None and dedup_rec.extra.get("decisions"):
        decisions_path = run_dir / dedup_rec.extra["decisions"]
        if decisions_path.exists():
            with open(decisions_path, encoding="utf-8") as fh:
                decisions = json.load(fh)
            sizes: dict[str, int] = {}
            for d in decisions:
                size = 1 + len(d["dropped"])
                sizes[str(size)] = sizes.get(str(size), 0) + 1
            report["dedup_group_sizes"] = sizes

    labeled_rec = by_stage.get("layer") or by_stage.get("label")
    if labeled_rec is not None and labeled_rec.output:
        sample_path = run_dir / labeled_rec.output
        if sample_path.exists():
            samples = list(iter_samples(sample_path))
            hist = rank_histogram(samples)
            if sum(hist) != labeled_rec.out_count:
                raise IntegrityError(
                    f"rank histogram sums to {sum(hist)} but stage "
                    f"{labeled_rec.stage} reports {labeled_rec.out_count} rows"
                )
            report["rank_histogram"] = hist
            layer_counts = {str(n): 0 for n in range(1, 7)}
            tier_counts = {
                str(n): {t.value: 0 for t in Complexity} for n in range(1, 7)
            }
            have_layers = False
            for s in samples:
                if s.layer is not None:
                    have_layers = True
                    layer_counts[str(s.layer)] += 1
                    if s.complexity is not None:
                        tier_counts[str(s.layer)][s.complexity.value] += 1
            if have_layers:
                report["layer_counts"] = layer_counts
                report["tier_counts"] = tier_counts
    return report


def render_text(report: dict) -> str:
    lines = ["stage            in       out   dropped"]
    for row in report["stages"]:
        lines.append(f"{row['stage']:<14}{row['in']:>7}{row['out']:>10}{row['dropped']:>10}")
    if "rank_histogram" in report:
        lines.append("")
        lines.append("rank histogram (0..20):")
        lines.append(" ".join(str(n) for n in report["rank_histogram"]))
    if "layer_counts" in report:
        lines.append("")
        widest = max(report["layer_counts"].values()) or 1
        for layer in range(1, 7):
            count = report["layer_counts"][str(layer)]
            bar = "#" * (0 if count == 0 else max(1, round(40 * count / widest)))
            lines.append(f"L{layer} {bar:<40} {count}")
    return "\n".join(lines)
