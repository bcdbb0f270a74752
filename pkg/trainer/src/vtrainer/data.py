"""Manifest reading and character-level encoding.

The trainer consumes the curriculum manifest JSONL exactly as the dataset
pipeline emits it: one object per line with sample_id, phase, order,
loss_weight, epochs, description, and code. Each pair is encoded as
[BOS] description [SEP] code [EOS]; the loss mask covers the code
characters and the terminator, never the description.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import torch

MANIFEST_FIELDS = ("sample_id", "phase", "order", "loss_weight", "epochs", "description", "code")

PAD_ID = 0
BOS_ID = 1
SEP_ID = 2
EOS_ID = 3
SPECIAL_COUNT = 4

HOLDOUT_MODULUS = 5


class ManifestError(Exception):
    """Raised when a manifest file violates the emitted-format contract."""


class VocabError(Exception):
    """Raised when text contains a character outside the vocabulary."""


@dataclasses.dataclass
class ManifestRow:
    sample_id: str
    phase: int
    order: int
    loss_weight: float
    epochs: int
    description: str
    code: str


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_row(obj, line_no: int) -> ManifestRow:
    if not isinstance(obj, dict):
        raise ManifestError(f"line {line_no}: expected an object, got {type(obj).__name__}")
    missing = [f for f in MANIFEST_FIELDS if f not in obj]
    if missing:
        raise ManifestError(f"line {line_no}: missing fields {missing}")
    unknown = [k for k in obj if k not in MANIFEST_FIELDS]
    if unknown:
        raise ManifestError(f"line {line_no}: unknown fields {unknown}")
    if not isinstance(obj["sample_id"], str) or not obj["sample_id"]:
        raise ManifestError(f"line {line_no}: sample_id must be a non-empty string")
    if not _is_int(obj["phase"]) or obj["phase"] < 0:
        raise ManifestError(f"line {line_no}: phase must be a non-negative integer")
    if not _is_int(obj["order"]) or obj["order"] < 0:
        raise ManifestError(f"line {line_no}: order must be a non-negative integer")
    weight = obj["loss_weight"]
    if isinstance(weight, bool) or not isinstance(weight, (int, float)):
        raise ManifestError(f"line {line_no}: loss_weight must be a number")
    if not math.isfinite(weight) or weight <= 0:
        raise ManifestError(f"line {line_no}: loss_weight must be finite and > 0")
    if not _is_int(obj["epochs"]) or obj["epochs"] < 1:
        raise ManifestError(f"line {line_no}: epochs must be an integer >= 1")
    if not isinstance(obj["description"], str):
        raise ManifestError(f"line {line_no}: description must be a string")
    if not isinstance(obj["code"], str) or not obj["code"]:
        raise ManifestError(f"line {line_no}: code must be a non-empty string")
    return ManifestRow(
        sample_id=obj["sample_id"],
        phase=obj["phase"],
        order=obj["order"],
        loss_weight=float(weight),
        epochs=obj["epochs"],
        description=obj["description"],
        code=obj["code"],
    )


def read_manifest(path: str | Path) -> list[ManifestRow]:
    """Parse and validate a manifest; rows come back in file order."""
    rows: list[ManifestRow] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                raise ManifestError(f"line {line_no}: blank line")
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            row = _check_row(obj, line_no)
            if row.order != line_no - 1:
                raise ManifestError(f"line {line_no}: order is {row.order}, expected {line_no - 1}")
            if rows and row.phase < rows[-1].phase:
                raise ManifestError(
                    f"line {line_no}: phase {row.phase} after phase {rows[-1].phase}"
                )
            if row.sample_id in seen:
                raise ManifestError(f"line {line_no}: duplicate sample_id {row.sample_id}")
            seen.add(row.sample_id)
            rows.append(row)
    if not rows:
        raise ManifestError(f"{path}: manifest is empty")
    return rows


class Vocab:
    """Character vocabulary with four reserved control ids."""

    def __init__(self, chars: Iterable[str]):
        self.chars = sorted(set(chars))
        self._to_id = {c: SPECIAL_COUNT + i for i, c in enumerate(self.chars)}

    @classmethod
    def from_rows(cls, rows: Sequence[ManifestRow]) -> "Vocab":
        chars: set[str] = set()
        for row in rows:
            chars.update(row.description)
            chars.update(row.code)
        return cls(chars)

    def __len__(self) -> int:
        return SPECIAL_COUNT + len(self.chars)

    def encode_text(self, text: str) -> list[int]:
        try:
            return [self._to_id[c] for c in text]
        except KeyError as exc:
            raise VocabError(f"character {exc.args[0]!r} not in vocabulary") from exc


def encode_example(vocab: Vocab, description: str, code: str) -> tuple[list[int], list[int]]:
    """Token ids and loss mask for one description -> code pair.

    For next-token training on ids[:-1] -> ids[1:], mask[j] is 1 exactly
    when target j is a code character or the terminator, so the mask has
    len(ids) - 1 entries and at least one is set.
    """
    desc_ids = vocab.encode_text(description)
    code_ids = vocab.encode_text(code)
    ids = [BOS_ID] + desc_ids + [SEP_ID] + code_ids + [EOS_ID]
    mask = [0] * (len(desc_ids) + 1) + [1] * (len(code_ids) + 1)
    return ids, mask


def collate(examples: Sequence[tuple[list[int], list[int]]]):
    """Right-pad a batch into (inputs, targets, mask) tensors.

    Padding sits after the terminator, so with causal attention it cannot
    influence any masked-in target position.
    """
    width = max(len(ids) for ids, _ in examples) - 1
    xs, ys, ms = [], [], []
    for ids, mask in examples:
        pad = width - (len(ids) - 1)
        xs.append(ids[:-1] + [PAD_ID] * pad)
        ys.append(ids[1:] + [PAD_ID] * pad)
        ms.append(mask + [0] * pad)
    x = torch.tensor(xs, dtype=torch.long)
    y = torch.tensor(ys, dtype=torch.long)
    m = torch.tensor(ms, dtype=torch.float32)
    return x, y, m


def is_holdout(sample_id: str) -> bool:
    """Stable membership test for the held-out evaluation split."""
    digest = hashlib.blake2b(sample_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % HOLDOUT_MODULUS == 0
