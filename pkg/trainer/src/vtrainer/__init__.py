"""Reference trainer for curriculum manifests.

Trains a tiny character-level causal model on description -> code pairs
with per-sample loss weights, in manifest phase order, and compares clean
against corrupted manifests on held-out loss.
"""

from .data import ManifestError, ManifestRow, Vocab, VocabError, is_holdout, read_manifest
from .model import MAX_PARAMETERS, CharLM, param_count
from .training import (
    ConfigError,
    NonFiniteLoss,
    TrainConfig,
    TrainLogRow,
    TrainResult,
    ablate,
    compare_corrupted,
    evaluate,
    train,
    weighted_batch_loss,
)

__all__ = [
    "CharLM",
    "ConfigError",
    "ManifestError",
    "ManifestRow",
    "MAX_PARAMETERS",
    "NonFiniteLoss",
    "TrainConfig",
    "TrainLogRow",
    "TrainResult",
    "Vocab",
    "VocabError",
    "ablate",
    "compare_corrupted",
    "evaluate",
    "is_holdout",
    "param_count",
    "read_manifest",
    "train",
    "weighted_batch_loss",
]
