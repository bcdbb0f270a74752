"""Corpus ingestion: walk a source tree, reject broken files, mint samples."""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path

from .samples import Origin, Sample, content_id, normalize_source

logger = logging.getLogger(__name__)

VERILOG_EXTENSIONS = {".v", ".sv", ".vh"}


@dataclasses.dataclass
class IngestReport:
    """Per-reason rejection counts for one ingest run."""

    scanned: int = 0
    admitted: int = 0
    encoding_error: int = 0
    empty: int = 0
    non_verilog_extension: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def ingest_corpus(root: str | Path) -> tuple[list[Sample], IngestReport]:
    """Walk ``root`` and return admitted samples plus rejection counts.

    Files are admitted when their suffix is .v/.sv/.vh (case-insensitive),
    they decode as UTF-8, and they are non-empty after normalization.
    Unreadable files count as encoding errors; per-file failures never
    abort the run. Output is sorted by source_path, so repeated runs over
    the same tree are byte-identical.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root {root} missing or not a directory")

    report = IngestReport()
    samples: list[Sample] = []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        report.scanned += 1
        rel = path.relative_to(root).as_posix()
        if path.suffix.lower() not in VERILOG_EXTENSIONS:
            report.non_verilog_extension += 1
            continue
        try:
            raw = path.read_bytes()
            text = raw.decode("utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            logger.debug("rejecting %s: %s", rel, exc)
            report.encoding_error += 1
            continue
        code = normalize_source(text)
        if not code:
            report.empty += 1
            continue
        samples.append(
            Sample(id=content_id(code), source_path=rel, origin=Origin.COLLECTED, code=code)
        )
        report.admitted += 1
    return samples, report
