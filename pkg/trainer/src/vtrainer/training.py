"""Curriculum training with per-sample loss weights, and the corruption ablation.

The batch objective is L = sum(w_i * l_i) / sum(w_i), where l_i is the
token-averaged cross-entropy of sample i over its code characters only;
description characters never contribute. Dividing by sum(w_i) keeps
learning-rate semantics invariant to the overall weight scale. Phases are
consumed strictly in the order the manifest presents them, with a constant
learning rate throughout.

This is a reference consumer of the manifest format, not a replica of
fine-tuning a multi-billion-parameter code model: it exists to validate
the weighting math, the phase schedule, and the clean-versus-corrupted
training direction at desk scale.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import random
from typing import Sequence

import torch

from .data import ManifestRow, Vocab, collate, encode_example, is_holdout, read_manifest
from .model import MAX_PARAMETERS, CharLM, param_count


class ConfigError(Exception):
    """Raised when a training configuration is unusable."""


class NonFiniteLoss(Exception):
    """Raised when training produces a NaN or infinite loss."""


@dataclasses.dataclass
class TrainConfig:
    manifest: str | None = None
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    max_len: int = 2048
    learning_rate: float = 2e-4
    epochs_per_phase: int | None = None
    batch_size: int = 16
    seed: int = 0
    max_steps_per_phase: int | None = None
    ignore_weights: bool = False

    def validate(self) -> None:
        lr = self.learning_rate
        if isinstance(lr, bool) or not isinstance(lr, (int, float)):
            raise ConfigError("learning_rate must be a number")
        if not math.isfinite(lr) or lr <= 0:
            raise ConfigError(f"learning_rate must be finite and > 0, got {lr}")
        for name in ("d_model", "n_heads", "n_layers", "max_len", "batch_size"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        for name in ("epochs_per_phase", "max_steps_per_phase"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or isinstance(value, bool) or value < 1):
                raise ConfigError(f"{name} must be an integer >= 1 or omitted, got {value!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")


@dataclasses.dataclass
class TrainLogRow:
    phase: int
    step: int
    mean_weighted_loss: float
    mean_unweighted_loss: float

    def __post_init__(self):
        if self.phase < 0 or self.step < 1:
            raise ValueError(f"bad log coordinates phase={self.phase} step={self.step}")
        for name in ("mean_weighted_loss", "mean_unweighted_loss"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclasses.dataclass
class TrainResult:
    model: CharLM
    vocab: Vocab
    log: list[TrainLogRow]
    summary: dict


def per_sample_losses(model, x, y, mask) -> torch.Tensor:
    """Token-averaged cross-entropy per sample, restricted to masked targets."""
    logits = model(x)
    flat = torch.nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), y.reshape(-1), reduction="none"
    )
    per_token = flat.reshape(y.shape) * mask
    return per_token.sum(dim=1) / mask.sum(dim=1)


def weighted_batch_loss(losses: torch.Tensor, weights: torch.Tensor,
                        ignore_weights: bool = False) -> torch.Tensor:
    """L = sum(w_i * l_i) / sum(w_i); with ignore_weights, the plain mean."""
    if ignore_weights:
        return losses.mean()
    return (losses * weights).sum() / weights.sum()


def _check_lengths(rows: Sequence[ManifestRow], max_len: int) -> None:
    for row in rows:
        needed = len(row.description) + len(row.code) + 2
        if needed > max_len:
            raise ConfigError(
                f"sample {row.sample_id} needs {needed} positions, max_len is {max_len}"
            )


def _phase_batches(rows, epochs, batch_size, cap, rng):
    produced = 0
    for _ in range(epochs):
        order = list(rows)
        rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            if cap is not None and produced >= cap:
                return
            produced += 1
            yield order[start : start + batch_size]


def _fit(rows: Sequence[ManifestRow], vocab: Vocab, config: TrainConfig):
    """Train a fresh model on rows that are already phase-ordered."""
    _check_lengths(rows, config.max_len)
    torch.manual_seed(config.seed)
    model = CharLM(len(vocab), config.d_model, config.n_heads, config.n_layers, config.max_len)
    total = param_count(model)
    if total > MAX_PARAMETERS:
        raise ConfigError(f"model has {total} parameters, cap is {MAX_PARAMETERS}")
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    rng = random.Random(config.seed)
    encoded = {row.sample_id: encode_example(vocab, row.description, row.code) for row in rows}

    log: list[TrainLogRow] = []
    step = 0
    for phase, group in itertools.groupby(rows, key=lambda r: r.phase):
        phase_rows = list(group)
        epochs = config.epochs_per_phase if config.epochs_per_phase is not None else phase_rows[0].epochs
        for batch in _phase_batches(phase_rows, epochs, config.batch_size,
                                    config.max_steps_per_phase, rng):
            x, y, mask = collate([encoded[row.sample_id] for row in batch])
            losses = per_sample_losses(model, x, y, mask)
            weights = torch.tensor([row.loss_weight for row in batch], dtype=losses.dtype)
            loss = weighted_batch_loss(losses, weights, config.ignore_weights)
            step += 1
            weighted = loss.item()
            unweighted = losses.mean().item()
            if not (math.isfinite(weighted) and math.isfinite(unweighted)):
                raise NonFiniteLoss(
                    f"non-finite loss at phase {phase} step {step}: "
                    f"weighted={weighted} unweighted={unweighted}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            log.append(TrainLogRow(phase=phase, step=step,
                                   mean_weighted_loss=weighted,
                                   mean_unweighted_loss=unweighted))
    return model, log


def train(config: TrainConfig) -> TrainResult:
    """Train on config.manifest and return the model, log, and a summary."""
    config.validate()
    if config.manifest is None:
        raise ConfigError("manifest path is required")
    rows = read_manifest(config.manifest)
    vocab = Vocab.from_rows(rows)
    model, log = _fit(rows, vocab, config)
    summary = {
        "steps": len(log),
        "phases": sorted({row.phase for row in rows}),
        "samples": len(rows),
        "parameters": param_count(model),
        "vocab_size": len(vocab),
        "seed": config.seed,
        "final_weighted_loss": log[-1].mean_weighted_loss,
        "final_unweighted_loss": log[-1].mean_unweighted_loss,
    }
    return TrainResult(model=model, vocab=vocab, log=log, summary=summary)


@torch.no_grad()
def evaluate(model: CharLM, vocab: Vocab, pairs: Sequence[tuple[str, str]],
             batch_size: int = 16) -> float:
    """Mean per-sample code cross-entropy over (description, code) pairs."""
    if not pairs:
        raise ConfigError("no evaluation pairs")
    model.eval()
    total = 0.0
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        x, y, mask = collate([encode_example(vocab, d, c) for d, c in chunk])
        total += float(per_sample_losses(model, x, y, mask).sum())
    model.train()
    return total / len(pairs)


def compare_corrupted(clean_manifest, corrupted_manifest, config: TrainConfig) -> dict:
    """Train one model per manifest with identical seeds; compare held-out loss.

    Held-out pairs are the clean manifest's true pairings, selected by a
    stable hash of sample_id and excluded from training in both arms. Both
    models share one vocabulary so the losses are comparable. The summary
    flags whether the clean-trained model scored lower.
    """
    config.validate()
    clean_rows = read_manifest(clean_manifest)
    corrupted_rows = read_manifest(corrupted_manifest)
    if {r.sample_id for r in clean_rows} != {r.sample_id for r in corrupted_rows}:
        raise ConfigError("manifests cover different sample ids")
    holdout_ids = {r.sample_id for r in clean_rows if is_holdout(r.sample_id)}
    if not holdout_ids:
        raise ConfigError("holdout split is empty; need more samples")
    if len(holdout_ids) == len(clean_rows):
        raise ConfigError("holdout split swallowed every sample")
    vocab = Vocab.from_rows(clean_rows + corrupted_rows)
    eval_pairs = [(r.description, r.code) for r in clean_rows if r.sample_id in holdout_ids]

    arms = {}
    for name, rows in (("clean", clean_rows), ("corrupted", corrupted_rows)):
        train_rows = [r for r in rows if r.sample_id not in holdout_ids]
        model, log = _fit(train_rows, vocab, config)
        arms[name] = {"holdout_loss": evaluate(model, vocab, eval_pairs), "steps": len(log)}
    return {
        "clean_loss": arms["clean"]["holdout_loss"],
        "corrupted_loss": arms["corrupted"]["holdout_loss"],
        "clean_better": arms["clean"]["holdout_loss"] < arms["corrupted"]["holdout_loss"],
        "holdout_size": len(eval_pairs),
        "train_steps": {"clean": arms["clean"]["steps"], "corrupted": arms["corrupted"]["steps"]},
        "seed": config.seed,
    }


def ablate(clean_manifest, corrupted_manifest, config: TrainConfig,
           seeds: Sequence[int]) -> dict:
    """Run compare_corrupted across seeds and tally the direction."""
    if not seeds:
        raise ConfigError("need at least one seed")
    runs = []
    for seed in seeds:
        run_config = dataclasses.replace(config, seed=seed)
        runs.append(compare_corrupted(clean_manifest, corrupted_manifest, run_config))
    return {
        "seeds": list(seeds),
        "runs": runs,
        "clean_better_count": sum(1 for run in runs if run["clean_better"]),
        "total": len(runs),
    }
