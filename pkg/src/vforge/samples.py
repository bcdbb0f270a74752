"""Core sample record shared by every pipeline stage, plus JSONL IO."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator


class Origin(str, enum.Enum):
    COLLECTED = "Collected"
    SYNTHESIZED = "Synthesized"


class Complexity(str, enum.Enum):
    BASIC = "Basic"
    INTERMEDIATE = "Intermediate"
    ADVANCED = "Advanced"
    EXPERT = "Expert"


# Curriculum position of each tier within a layer.
TIER_ORDER: dict[Complexity, int] = {
    Complexity.BASIC: 0,
    Complexity.INTERMEDIATE: 1,
    Complexity.ADVANCED: 2,
    Complexity.EXPERT: 3,
}


class CompileStatus(str, enum.Enum):
    CLEAN = "Clean"
    DEPENDENCY_ISSUE = "DependencyIssue"
    SYNTAX_ERROR = "SyntaxError"


def normalize_source(text: str) -> str:
    """Canonicalize source text: drop a leading BOM, CRLF -> LF, strip
    trailing whitespace per line and trailing newlines. Idempotent, so ids
    can be recomputed from stored code; whitespace-only input becomes ""."""
    if text.startswith("﻿"):
        text = text[1:]
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in text.split("\n")).rstrip("\n")


def content_id(code: str) -> str:
    """Stable content-derived identifier: sha256 of the normalized bytes."""
    return hashlib.sha256(normalize_source(code).encode("utf-8")).hexdigest()


@dataclasses.dataclass
class Sample:
    """One Verilog source unit with its labels and provenance.

    ``code`` is stored normalized, so ``id == content_id(code)`` holds for
    every record minted by this package.
    """

    id: str
    source_path: str
    origin: Origin
    code: str
    rank: int | None = None
    complexity: Complexity | None = None
    description: str | None = None
    compile_status: CompileStatus | None = None
    layer: int | None = None

    def __post_init__(self) -> None:
        if not self.code:
            raise ValueError(f"sample {self.id}: empty code is never admitted")
        if self.rank is not None and not 0 <= self.rank <= 20:
            raise ValueError(f"sample {self.id}: rank {self.rank} outside [0, 20]")
        if self.layer is not None and not 1 <= self.layer <= 6:
            raise ValueError(f"sample {self.id}: layer {self.layer} outside [1, 6]")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source_path": self.source_path,
            "origin": self.origin.value,
            "code": self.code,
            "rank": self.rank,
            "complexity": self.complexity.value if self.complexity else None,
            "description": self.description,
            "compile_status": self.compile_status.value if self.compile_status else None,
            "layer": self.layer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Sample":
        return cls(
            id=d["id"],
            source_path=d["source_path"],
            origin=Origin(d["origin"]),
            code=d["code"],
            rank=d.get("rank"),
            complexity=Complexity(d["complexity"]) if d.get("complexity") else None,
            description=d.get("description"),
            compile_status=CompileStatus(d["compile_status"]) if d.get("compile_status") else None,
            layer=d.get("layer"),
        )


def dump_json_line(obj: dict) -> str:
    """Canonical single-line JSON used for every artifact this package
    writes; key order is insertion order, no ASCII escaping."""
    return json.dumps(obj, ensure_ascii=False)


def write_samples(path: str | Path, samples: Iterable[Sample]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(dump_json_line(s.to_dict()) + "\n")
            n += 1
    return n


def iter_samples(path: str | Path) -> Iterator[Sample]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield Sample.from_dict(json.loads(line))


def read_samples(path: str | Path) -> list[Sample]:
    return list(iter_samples(path))
