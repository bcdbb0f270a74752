#!/usr/bin/env python3
"""Builds the golden manifest for the fixture corpus from first principles.

Everything here is derived by hand from the corpus files plus the
documented output contracts; nothing is imported from the package under
test, so a byte-for-byte match against the pipeline's manifest is an
independent check, not a tautology.

Documented contracts encoded below:
  - sample id: sha256 hex of normalized code (BOM stripped, CRLF -> LF,
    per-line trailing whitespace and trailing newlines removed)
  - duplicate groups keep the lexicographically smallest id
  - layer: rank 20 -> 1, 15-19 -> 2, 10-14 -> 3, 5-9 -> 4, 1-4 -> 5,
    0 -> 6; DependencyIssue forces layer 6
  - loss weight per layer: 1.0 / 0.8 / 0.6 / 0.4 / 0.2 / 0.1
  - phase = 4*(layer-1) + tier index (Basic 0, Intermediate 1,
    Advanced 2, Expert 3)
  - within a phase, ids are sorted ascending then shuffled by
    random.Random(f"{shuffle_seed}:{phase}"); shuffle_seed defaults to 7
  - rows are single-line JSON, ensure_ascii off, fields in the order
    sample_id, phase, order, loss_weight, epochs, description, code

The per-file ranks repeat what mock_table.json feeds the pipeline's mock
client; tiers and descriptions marked "fallback" were hand-derived from
the documented mock fallbacks (structural score -> tier thresholds, and
the "Verilog design containing modules: <names>." template).
"""

import hashlib
import json
import random
from pathlib import Path

HERE = Path(__file__).parent
CORPUS = HERE / "corpus"

SHUFFLE_SEED = 7
EPOCHS = 1
TIER_INDEX = {"Basic": 0, "Intermediate": 1, "Advanced": 2, "Expert": 3}
LAYER_WEIGHT = {1: 1.0, 2: 0.8, 3: 0.6, 4: 0.4, 5: 0.2, 6: 0.1}

TEMPLATE = "Verilog design containing modules: {}."

# relpath -> (rank, tier, description, dependency_issue)
# description None means the fallback template over the named modules.
FILES = {
    "basic/half_adder.v": (20, "Basic", "A combinational half adder producing the XOR sum and AND carry of two input bits.", False),
    "basic/xor_dup_a.v": (20, "Basic", TEMPLATE.format("xor_gate"), False),
    "basic/xor_dup_b.v": (20, "Basic", TEMPLATE.format("xor_gate"), False),
    "basic/mux4.v": (15, "Basic", TEMPLATE.format("mux4"), False),
    "arith/full_adder_structural.v": (20, "Intermediate", TEMPLATE.format("ha, full_adder"), False),
    "arith/alu8.v": (19, "Advanced", "An 8-bit arithmetic logic unit selecting between add, subtract, AND, and OR, with a zero flag.", False),
    "arith/adder_tree.v": (13, "Advanced", "A balanced adder tree summing four 8-bit inputs into a 10-bit result.", False),
    "arith/big_system.v": (19, "Expert", "A two-channel accumulator and smoothing datapath with a grand-total register.", False),
    "seq/counter_4bit.v": (17, "Intermediate", TEMPLATE.format("counter_4bit"), False),
    "seq/fsm_traffic.v": (16, "Intermediate", "A three-state traffic light controller cycling green, yellow, and red on a tick counter.", False),
    "seq/shift_reg.v": (12, "Basic", TEMPLATE.format("shift_reg"), False),
    "seq/gray_counter.v": (10, "Intermediate", TEMPLATE.format("gray_counter"), False),
    "seq/div_clock.v": (14, "Intermediate", TEMPLATE.format("div_clock"), False),
    "seq/pwm_gen.v": (11, "Advanced", "A pulse width modulator comparing a free-running counter against a programmable duty value.", False),
    "seq/fifo.v": (8, "Intermediate", "A 16-entry by 8-bit synchronous FIFO with wrap-around pointers and full and empty flags.", False),
    "seq/ram_dp.v": (11, "Expert", TEMPLATE.format("ram_dp"), False),
    "seq/edge_detect.v": (2, "Intermediate", TEMPLATE.format("edge_detect"), False),
    "gen/tone_gen_a.v": (15, "Intermediate", TEMPLATE.format("tone_gen"), False),
    "gen/tone_gen_b.v": (15, "Intermediate", TEMPLATE.format("tone_gen"), False),
    "low/latch_bad_style.v": (7, "Basic", TEMPLATE.format("latch_bad_style"), False),
    "low/blocking_mix.v": (5, "Intermediate", "A two-stage register pipeline mixing blocking and nonblocking assignments.", False),
    "low/messy_mux.v": (9, "Basic", TEMPLATE.format("messy_mux"), False),
    "low/sloppy1.v": (3, "Basic", TEMPLATE.format("sloppy1"), False),
    "low/sloppy2.v": (1, "Basic", TEMPLATE.format("sloppy2"), False),
    "low/sloppy3.v": (4, "Intermediate", TEMPLATE.format("sloppy3"), False),
    "low/zero_rank.v": (0, "Basic", TEMPLATE.format("zero_rank"), False),
    "misc/warned.v": (16, "Advanced", "A shift-and-mask combinational unit producing a shifted OR of two operands.", False),
    "dep/dep_missing_child.v": (13, "Intermediate", "A wrapper that instantiates an external processing block on a 4-bit datapath.", True),
    "dep/dep_include.v": (18, "Intermediate", TEMPLATE.format("dep_include_top"), True),
    "dep/dep_undef_wire.v": (6, "Basic", TEMPLATE.format("dep_undef"), True),
}

# Planted duplicate groups: xor_dup_* are byte-identical, tone_gen_* differ
# by one token (J ~ 0.91 >= 0.85). Exactly one of each group survives.
DUP_GROUPS = [
    ("basic/xor_dup_a.v", "basic/xor_dup_b.v"),
    ("gen/tone_gen_a.v", "gen/tone_gen_b.v"),
]


def normalize(text):
    if text.startswith("﻿"):
        text = text[1:]
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in text.split("\n")).rstrip("\n")


def layer_of(rank, dependency_issue):
    if dependency_issue:
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


def build_rows():
    codes = {}
    meta = {}
    for rel, (rank, tier, desc, dep) in FILES.items():
        code = normalize((CORPUS / rel).read_text(encoding="utf-8"))
        sid = hashlib.sha256(code.encode("utf-8")).hexdigest()
        codes[rel] = (sid, code)
        meta[sid] = (rank, tier, desc, dep, code)

    dropped = set()
    for group in DUP_GROUPS:
        ids = {rel: codes[rel][0] for rel in group}
        survivor = min(ids.values())
        for rel, sid in ids.items():
            if sid != survivor:
                dropped.add(sid)

    by_phase = {}
    for sid, (rank, tier, desc, dep, code) in meta.items():
        if sid in dropped:
            continue
        phase = 4 * (layer_of(rank, dep) - 1) + TIER_INDEX[tier]
        by_phase.setdefault(phase, []).append(sid)

    rows = []
    order = 0
    for phase in sorted(by_phase):
        ids = sorted(by_phase[phase])
        random.Random(f"{SHUFFLE_SEED}:{phase}").shuffle(ids)
        for sid in ids:
            rank, tier, desc, dep, code = meta[sid]
            rows.append(
                {
                    "sample_id": sid,
                    "phase": phase,
                    "order": order,
                    "loss_weight": LAYER_WEIGHT[layer_of(rank, dep)],
                    "epochs": EPOCHS,
                    "description": desc,
                    "code": code,
                }
            )
            order += 1
    return rows


def render(rows):
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)


def main():
    rows = build_rows()
    out = HERE / "golden_manifest.jsonl"
    out.write_text(render(rows), encoding="utf-8")
    print(f"wrote {out} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
