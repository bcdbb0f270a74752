"""Command line entry points: fit one manifest, or ablate clean vs corrupted."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import torch

from .data import ManifestError, VocabError
from .training import ConfigError, NonFiniteLoss, TrainConfig, ablate, train

LOG_COLUMNS = ("phase", "step", "mean_weighted_loss", "mean_unweighted_loss")


def _add_hyperparams(parser: argparse.ArgumentParser, with_seed: bool) -> None:
    parser.add_argument("--lr", dest="learning_rate", type=float, default=2e-4,
                        help="constant learning rate (default 2e-4)")
    parser.add_argument("--epochs-per-phase", type=int, default=None,
                        help="override the per-phase epoch counts in the manifest")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-steps-per-phase", type=int, default=None)
    parser.add_argument("--d-model", type=int, default=64)
    parser.add_argument("--n-heads", type=int, default=4)
    parser.add_argument("--n-layers", type=int, default=2)
    parser.add_argument("--max-len", type=int, default=2048)
    parser.add_argument("--ignore-weights", action="store_true",
                        help="drop the weight column and use the plain mean loss")
    if with_seed:
        parser.add_argument("--seed", type=int, default=0)


def _config_from(args: argparse.Namespace, manifest=None) -> TrainConfig:
    return TrainConfig(
        manifest=manifest,
        d_model=args.d_model,
        n_heads=args.n_heads,
        n_layers=args.n_layers,
        max_len=args.max_len,
        learning_rate=args.learning_rate,
        epochs_per_phase=args.epochs_per_phase,
        batch_size=args.batch_size,
        seed=getattr(args, "seed", 0),
        max_steps_per_phase=args.max_steps_per_phase,
        ignore_weights=args.ignore_weights,
    )


def cmd_fit(args: argparse.Namespace) -> int:
    config = _config_from(args, manifest=args.manifest)
    result = train(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "log.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for row in result.log:
            writer.writerow([row.phase, row.step, row.mean_weighted_loss, row.mean_unweighted_loss])
    torch.save(
        {
            "state_dict": result.model.state_dict(),
            "vocab_chars": result.vocab.chars,
            "config": vars(config),
        },
        out_dir / "checkpoint.pt",
    )
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"trained {result.summary['steps']} steps over {len(result.summary['phases'])} phases; "
        f"final weighted loss {result.summary['final_weighted_loss']:.4f}"
    )
    print(f"wrote {out_dir / 'log.csv'}, {out_dir / 'checkpoint.pt'}, {out_dir / 'summary.json'}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config_from(args)
    report = ablate(args.clean, args.corrupted, config, args.seeds)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for seed, run in zip(report["seeds"], report["runs"]):
        verdict = "clean better" if run["clean_better"] else "corrupted better"
        print(
            f"seed {seed}: clean {run['clean_loss']:.4f} "
            f"corrupted {run['corrupted_loss']:.4f} ({verdict})"
        )
    print(f"clean better in {report['clean_better_count']}/{report['total']} seeds")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trainer",
        description="Reference trainer for curriculum manifests (tiny character-level model).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="train on one manifest; write CSV log, checkpoint, summary")
    fit.add_argument("--manifest", required=True, help="manifest JSONL path")
    fit.add_argument("--out-dir", default="train_out", help="output directory (default train_out)")
    _add_hyperparams(fit, with_seed=True)

    ab = sub.add_parser("ablate", help="train on clean and corrupted manifests; compare held-out loss")
    ab.add_argument("--clean", required=True, help="clean manifest JSONL path")
    ab.add_argument("--corrupted", required=True, help="corrupted manifest JSONL path")
    ab.add_argument("--out", default="ablation.json", help="JSON report path (default ablation.json)")
    ab.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    _add_hyperparams(ab, with_seed=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"fit": cmd_fit, "ablate": cmd_ablate}
    try:
        return handlers[args.command](args)
    except (ManifestError, VocabError, ConfigError, NonFiniteLoss, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
