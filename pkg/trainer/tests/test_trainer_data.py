"""Manifest parsing, vocabulary, encoding, and batching tests."""

import json

import pytest
import torch

from trainer_fixtures import build_rows, write_manifest
from vtrainer.data import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    SEP_ID,
    SPECIAL_COUNT,
    ManifestError,
    Vocab,
    VocabError,
    collate,
    encode_example,
    is_holdout,
    read_manifest,
)


def good_row(idx=0, **overrides):
    row = {
        "sample_id": f"s{idx:06d}",
        "phase": 0,
        "order": idx,
        "loss_weight": 1.0,
        "epochs": 1,
        "description": "two input and gate",
        "code": "assign y = a & b;",
    }
    row.update(overrides)
    return row


def dump(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


def test_read_manifest_roundtrip(tmp_path):
    rows = build_rows(9)
    path = write_manifest(tmp_path / "m.jsonl", rows)
    parsed = read_manifest(path)
    assert len(parsed) == 9
    for raw, row in zip(rows, parsed):
        assert row.sample_id == raw["sample_id"]
        assert row.phase == raw["phase"]
        assert row.order == raw["order"]
        assert row.loss_weight == raw["loss_weight"]
        assert row.epochs == raw["epochs"]
        assert row.description == raw["description"]
        assert row.code == raw["code"]


def test_rejects_missing_field(tmp_path):
    row = good_row()
    del row["loss_weight"]
    path = dump(tmp_path / "m.jsonl", [row])
    with pytest.raises(ManifestError, match="missing fields.*loss_weight"):
        read_manifest(path)


def test_rejects_unknown_field(tmp_path):
    path = dump(tmp_path / "m.jsonl", [good_row(extra=1)])
    with pytest.raises(ManifestError, match="unknown fields.*extra"):
        read_manifest(path)


@pytest.mark.parametrize(
    "overrides, fragment",
    [
        ({"sample_id": ""}, "sample_id"),
        ({"sample_id": 7}, "sample_id"),
        ({"phase": "0"}, "phase"),
        ({"phase": -1}, "phase"),
        ({"phase": True}, "phase"),
        ({"order": 0.5}, "order"),
        ({"loss_weight": 0}, "loss_weight"),
        ({"loss_weight": -0.5}, "loss_weight"),
        ({"loss_weight": True}, "loss_weight"),
        ({"loss_weight": "1.0"}, "loss_weight"),
        ({"epochs": 0}, "epochs"),
        ({"epochs": 1.5}, "epochs"),
        ({"description": 5}, "description"),
        ({"code": ""}, "code"),
        ({"code": None}, "code"),
    ],
)
def test_rejects_bad_values(tmp_path, overrides, fragment):
    path = dump(tmp_path / "m.jsonl", [good_row(**overrides)])
    with pytest.raises(ManifestError, match=fragment):
        read_manifest(path)


def test_rejects_nonfinite_weight(tmp_path):
    line = json.dumps(good_row()).replace("1.0", "Infinity", 1)
    path = tmp_path / "m.jsonl"
    path.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="loss_weight"):
        read_manifest(path)


def test_rejects_order_gap(tmp_path):
    path = dump(tmp_path / "m.jsonl", [good_row(0), good_row(2)])
    with pytest.raises(ManifestError, match="order is 2, expected 1"):
        read_manifest(path)


def test_rejects_decreasing_phase(tmp_path):
    rows = [good_row(0, phase=4), good_row(1, phase=0)]
    path = dump(tmp_path / "m.jsonl", rows)
    with pytest.raises(ManifestError, match="phase 0 after phase 4"):
        read_manifest(path)


def test_rejects_duplicate_sample_id(tmp_path):
    rows = [good_row(0), good_row(1, sample_id="s000000")]
    path = dump(tmp_path / "m.jsonl", rows)
    with pytest.raises(ManifestError, match="duplicate sample_id"):
        read_manifest(path)


def test_rejects_empty_manifest(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ManifestError, match="empty"):
        read_manifest(path)


def test_rejects_blank_line(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text(json.dumps(good_row()) + "\n\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="blank line"):
        read_manifest(path)


def test_rejects_invalid_json(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("{not json\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="invalid JSON"):
        read_manifest(path)


def test_rejects_non_object_line(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("[1, 2]\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="expected an object"):
        read_manifest(path)


def test_vocab_sorted_unique_and_specials():
    vocab = Vocab("banana")
    assert vocab.chars == ["a", "b", "n"]
    assert len(vocab) == SPECIAL_COUNT + 3
    assert (PAD_ID, BOS_ID, SEP_ID, EOS_ID) == (0, 1, 2, 3)
    assert vocab.encode_text("ban") == [SPECIAL_COUNT + 1, SPECIAL_COUNT + 0, SPECIAL_COUNT + 2]


def test_vocab_from_rows_covers_both_texts(tmp_path):
    path = write_manifest(tmp_path / "m.jsonl", build_rows(6))
    rows = read_manifest(path)
    vocab = Vocab.from_rows(rows)
    for row in rows:
        vocab.encode_text(row.description)
        vocab.encode_text(row.code)


def test_vocab_rejects_unknown_char():
    vocab = Vocab("ab")
    with pytest.raises(VocabError, match="'z' not in vocabulary"):
        vocab.encode_text("baz")


def test_encode_example_layout():
    vocab = Vocab("abxy")
    ids, mask = encode_example(vocab, "ab", "xy")
    a, b, x, y = (SPECIAL_COUNT + i for i in range(4))
    assert ids == [BOS_ID, a, b, SEP_ID, x, y, EOS_ID]
    assert mask == [0, 0, 0, 1, 1, 1]
    assert len(mask) == len(ids) - 1


def test_encode_example_mask_counts():
    vocab = Vocab("abcdefgh ")
    for desc, code in [("abc", "defgh"), ("", "a"), ("ab cd", "e")]:
        ids, mask = encode_example(vocab, desc, code)
        assert sum(mask) == len(code) + 1
        assert mask.count(0) == len(desc) + 1
        assert mask[-1] == 1


def test_collate_pads_and_masks():
    short = ([1, 4, 2, 6, 3], [0, 0, 1, 1])
    long = ([1, 4, 5, 2, 6, 7, 3], [0, 0, 0, 1, 1, 1])
    x, y, m = collate([short, long])
    assert x.shape == (2, 6) and y.shape == (2, 6) and m.shape == (2, 6)
    assert x[0].tolist() == [1, 4, 2, 6, PAD_ID, PAD_ID]
    assert y[0].tolist() == [4, 2, 6, 3, PAD_ID, PAD_ID]
    assert m[0].tolist() == [0, 0, 1, 1, 0, 0]
    assert x[1].tolist() == long[0][:-1]
    assert y[1].tolist() == long[0][1:]
    assert m[1].tolist() == [0, 0, 0, 1, 1, 1]
    assert x.dtype == torch.long and m.dtype == torch.float32


def test_is_holdout_pinned_values():
    # Regression pin: the split must stay stable across releases.
    assert [is_holdout(f"s{i:06d}") for i in range(6)] == [True, False, False, True, False, False]


def test_is_holdout_deterministic_and_spread():
    ids = [f"id{i}" for i in range(1000)]
    first = [is_holdout(i) for i in ids]
    assert first == [is_holdout(i) for i in ids]
    fraction = sum(first) / len(first)
    assert 0.1 < fraction < 0.35
