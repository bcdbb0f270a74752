"""`forge`: one entry point for every stage plus a `pipeline` meta-command.

`pipeline` runs ingest, filter-modules, dedup, compile-gate, label, layer,
manifest in that fixed cheap-first order, persists every intermediate, and
resumes from the last completed stage via a state marker file. All
randomness flows from config seeds, so equal configs give byte-identical
manifests.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import shlex
import sys
from pathlib import Path

from . import compile_gate as cg
from . import dedup as dd
from . import ingest as ing
from . import labeler as lab
from . import layering as lay
from . import manifest as man
from . import stats as st
from .samples import Sample, read_samples, write_samples
from .vlex import filter_no_module

logger = logging.getLogger(__name__)

STATE_FILE = "pipeline_state.json"


class ConfigError(Exception):
    pass


@dataclasses.dataclass
class PipelineConfig:
    corpus_root: str
    output_dir: str
    threshold: float = dd.DEFAULT_THRESHOLD
    shingle_k: int = dd.DEFAULT_SHINGLE_K
    perms: int = dd.DEFAULT_PERMS
    bands: int = dd.DEFAULT_BANDS
    rows: int = dd.DEFAULT_PERMS // dd.DEFAULT_BANDS
    dedup_seed: int = dd.DEFAULT_SEED
    tool_path: str = cg.DEFAULT_TOOL
    tool_args: list = dataclasses.field(default_factory=lambda: list(cg.DEFAULT_TOOL_ARGS))
    timeout_s: float = cg.DEFAULT_TIMEOUT_S
    jobs: int = 4
    client: str = "mock"
    endpoint: str | None = None
    mock_table: str | None = None
    mock_seed: int = 0
    epochs_per_phase: int = man.DEFAULT_EPOCHS
    shuffle_seed: int = man.DEFAULT_SHUFFLE_SEED

    def validate(self) -> None:
        if self.bands * self.rows != self.perms:
            raise ConfigError(
                f"bands*rows must equal perms: {self.bands}*{self.rows} != {self.perms}"
            )
        if not 0 < self.threshold <= 1:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.client not in ("mock", "http"):
            raise ConfigError(f"client must be 'mock' or 'http', got {self.client!r}")
        if self.client == "http" and not self.endpoint:
            raise ConfigError("http client requires an endpoint")
        if self.epochs_per_phase < 1:
            raise ConfigError(f"epochs_per_phase must be >= 1, got {self.epochs_per_phase}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"corpus_root", "output_dir"} - set(d)
        if missing:
            raise ConfigError(f"config missing required keys: {sorted(missing)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _make_client(config: PipelineConfig) -> lab.CompletionClient:
    if config.client == "http":
        return lab.HttpCompletionClient(config.endpoint)
    if config.mock_table:
        return lab.MockCompletionClient.from_table_file(config.mock_table, seed=config.mock_seed)
    return lab.MockCompletionClient(seed=config.mock_seed)


# ---------------------------------------------------------------------------
# stage implementations shared by subcommands and `pipeline`
# ---------------------------------------------------------------------------

def _stage_ingest(root, out_path) -> st.StageRecord:
    samples, report = ing.ingest_corpus(root)
    write_samples(out_path, samples)
    return st.StageRecord(
        stage="ingest",
        in_count=report.scanned,
        out_count=report.admitted,
        dropped=report.scanned - report.admitted,
        input=str(root),
        output=Path(out_path).name,
        params={},
        extra=report.to_dict(),
    )


def _stage_filter_modules(in_path, out_path, report_path=None) -> st.StageRecord:
    samples = read_samples(in_path)
    kept, dropped = filter_no_module(samples)
    write_samples(out_path, kept)
    if report_path is not None:
        Path(report_path).write_text(
            json.dumps({"in": len(samples), "kept": len(kept), "dropped_no_module": dropped}, indent=2)
            + "\n",
            encoding="utf-8",
        )
    return st.StageRecord(
        stage="filter-modules",
        in_count=len(samples),
        out_count=len(kept),
        dropped=dropped,
        input=Path(in_path).name,
        output=Path(out_path).name,
    )


def _stage_dedup(
    in_path, out_path, decisions_path, threshold, shingle_k, perms, bands, seed
) -> st.StageRecord:
    samples = read_samples(in_path)
    if perms % bands != 0:
        raise ConfigError(f"perms {perms} not divisible by bands {bands}")
    kept, decisions = dd.dedup(
        samples, threshold=threshold, k=shingle_k, perms=perms, bands=bands, seed=seed
    )
    write_samples(out_path, kept)
    extra = {}
    if decisions_path is not None:
        Path(decisions_path).write_text(
            json.dumps([d.to_dict() for d in decisions], indent=2) + "\n", encoding="utf-8"
        )
        extra["decisions"] = Path(decisions_path).name
    return st.StageRecord(
        stage="dedup",
        in_count=len(samples),
        out_count=len(kept),
        dropped=len(samples) - len(kept),
        input=Path(in_path).name,
        output=Path(out_path).name,
        params={
            "threshold": threshold,
            "shingle_k": shingle_k,
            "perms": perms,
            "bands": bands,
            "seed": seed,
        },
        extra=extra,
    )


def _warn_if_not_deduped(in_path) -> None:
    sidecar = Path(str(in_path) + ".stage.json")
    try:
        deduped = json.loads(sidecar.read_text(encoding="utf-8")).get("stage") == "dedup"
    except (OSError, ValueError):
        deduped = False
    if not deduped:
        print(
            "warning: input has no dedup sidecar; compiling an un-deduplicated "
            "stream wastes compiler time on duplicates",
            file=sys.stderr,
        )


def _stage_compile_gate(in_path, out_path, tool_path, tool_args, timeout_s, jobs) -> st.StageRecord:
    samples = read_samples(in_path)
    _warn_if_not_deduped(in_path)
    reports = cg.run_compile_gate(
        samples, tool_path=tool_path, tool_args=tool_args, timeout_s=timeout_s, jobs=jobs
    )
    kept, discarded = cg.gate(samples, reports)
    write_samples(out_path, kept)
    reports_path = Path(str(out_path) + ".reports.jsonl")
    with open(reports_path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    return st.StageRecord(
        stage="compile-gate",
        in_count=len(samples),
        out_count=len(kept),
        dropped=discarded,
        input=Path(in_path).name,
        output=Path(out_path).name,
        params={"tool": tool_path, "tool_args": list(tool_args), "timeout_s": timeout_s},
        extra={"reports": reports_path.name},
    )


def _stage_label(in_path, out_path, client, jobs) -> st.StageRecord:
    samples = read_samples(in_path)
    labeled, quarantine = lab.label_samples(samples, client, max_workers=jobs)
    write_samples(out_path, labeled)
    extra = {}
    if quarantine:
        qpath = Path(str(out_path) + ".quarantine.jsonl")
        with open(qpath, "w", encoding="utf-8") as fh:
            for row in quarantine:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        extra["quarantine"] = qpath.name
        print(f"warning: {len(quarantine)} sample(s) quarantined, see {qpath}", file=sys.stderr)
    return st.StageRecord(
        stage="label",
        in_count=len(samples),
        out_count=len(labeled),
        dropped=len(quarantine),
        input=Path(in_path).name,
        output=Path(out_path).name,
        extra=extra,
    )


def _stage_layer(in_path, out_path, report_path=None) -> st.StageRecord:
    samples = read_samples(in_path)
    layered = lay.layer_samples(samples)
    write_samples(out_path, layered)
    if report_path is not None:
        Path(report_path).write_text(
            json.dumps(lay.layer_report(layered), indent=2) + "\n", encoding="utf-8"
        )
    return st.StageRecord(
        stage="layer",
        in_count=len(samples),
        out_count=len(layered),
        dropped=0,
        input=Path(in_path).name,
        output=Path(out_path).name,
    )


def _stage_manifest(in_path, out_path, epochs, seed) -> st.StageRecord:
    samples = read_samples(in_path)
    entries = man.build_manifest(samples, epochs_per_phase=epochs, shuffle_seed=seed)
    man.write_manifest(out_path, entries, samples)
    return st.StageRecord(
        stage="manifest",
        in_count=len(samples),
        out_count=len(entries),
        dropped=0,
        input=Path(in_path).name,
        output=Path(out_path).name,
        params={"epochs_per_phase": epochs, "shuffle_seed": seed},
    )


# ---------------------------------------------------------------------------
# pipeline meta-command
# ---------------------------------------------------------------------------

def _read_state(out_dir: Path) -> dict:
    path = out_dir / STATE_FILE
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return {"completed": []}


def _write_state(out_dir: Path, state: dict) -> None:
    (out_dir / STATE_FILE).write_text(json.dumps(state, indent=2) + "\n", encoding="utf-8")


def run_pipeline(config: PipelineConfig) -> int:
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.json")
    state = _read_state(out)
    state.pop("failed_stage", None)

    files = {
        "ingest": out / "samples.jsonl",
        "filter-modules": out / "kept.jsonl",
        "dedup": out / "unique.jsonl",
        "compile-gate": out / "compiled.jsonl",
        "label": out / "labeled.jsonl",
        "layer": out / "layered.jsonl",
        "manifest": out / "manifest.jsonl",
    }

    def stages():
        yield "ingest", lambda: _stage_ingest(config.corpus_root, files["ingest"])
        yield "filter-modules", lambda: _stage_filter_modules(
            files["ingest"], files["filter-modules"], out / "filter_report.json"
        )
        yield "dedup", lambda: _stage_dedup(
            files["filter-modules"],
            files["dedup"],
            out / "dedup.json",
            config.threshold,
            config.shingle_k,
            config.perms,
            config.bands,
            config.dedup_seed,
        )
        yield "compile-gate", lambda: _stage_compile_gate(
            files["dedup"],
            files["compile-gate"],
            config.tool_path,
            config.tool_args,
            config.timeout_s,
            config.jobs,
        )
        yield "label", lambda: _stage_label(
            files["compile-gate"], files["label"], _make_client(config), config.jobs
        )
        yield "layer", lambda: _stage_layer(files["label"], files["layer"], out / "layers.json")
        yield "manifest", lambda: _stage_manifest(
            files["layer"], files["manifest"], config.epochs_per_phase, config.shuffle_seed
        )

    ran_any = False
    for name, fn in stages():
        if name in state["completed"]:
            logger.info("skipping completed stage %s", name)
            continue
        ran_any = True
        logger.info("running stage %s", name)
        try:
            record = fn()
        except Exception as exc:
            state["failed_stage"] = name
            _write_state(out, state)
            print(f"error: stage {name} failed: {exc}", file=sys.stderr)
            return 1
        st.write_sidecar(files[name], record)
        state["completed"].append(name)
        _write_state(out, state)

    if not ran_any:
        print("pipeline already complete; nothing to do")
    else:
        print(f"pipeline complete: {files['manifest']}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_io(sp, out_required=True):
    sp.add_argument("--in", dest="infile", required=True, help="input samples JSONL")
    sp.add_argument("--out", dest="outfile", required=out_required, help="output path")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="forge", description="Verilog dataset construction and curriculum pipeline"
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="walk a source tree and emit raw samples")
    sp.add_argument("--root", required=True, help="corpus root directory")
    sp.add_argument("--out", dest="outfile", required=True)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("filter-modules", help="drop files with no module declaration")
    _add_io(sp)
    sp.add_argument("--report", default=None, help="write drop counts as JSON")
    sp.set_defaults(func=cmd_filter_modules)

    sp = sub.add_parser("dedup", help="remove near-duplicates")
    _add_io(sp)
    sp.add_argument("--threshold", type=float, default=dd.DEFAULT_THRESHOLD)
    sp.add_argument("--shingle-k", type=int, default=dd.DEFAULT_SHINGLE_K)
    sp.add_argument("--perms", type=int, default=dd.DEFAULT_PERMS)
    sp.add_argument("--bands", type=int, default=dd.DEFAULT_BANDS)
    sp.add_argument("--seed", type=int, default=dd.DEFAULT_SEED)
    sp.add_argument("--decisions", default=None, help="write duplicate groups as JSON")
    sp.set_defaults(func=cmd_dedup)

    sp = sub.add_parser("compile-gate", help="compile each sample and drop syntax errors")
    _add_io(sp)
    sp.add_argument("--tool", default=cg.DEFAULT_TOOL, help="compiler executable")
    sp.add_argument(
        "--tool-args",
        default=shlex.join(cg.DEFAULT_TOOL_ARGS),
        help="compiler flags as one shell-quoted string",
    )
    sp.add_argument("--timeout", type=float, default=cg.DEFAULT_TIMEOUT_S)
    sp.add_argument("--jobs", type=int, default=4)
    sp.set_defaults(func=cmd_compile_gate)

    sp = sub.add_parser("label", help="rank, classify, and describe each sample")
    _add_io(sp)
    sp.add_argument("--client", choices=("mock", "http"), default="mock")
    sp.add_argument("--endpoint", default=None, help="completion endpoint URL (http client)")
    sp.add_argument("--mock-table", default=None, help="JSON response table (mock client)")
    sp.add_argument("--mock-seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=4)
    sp.set_defaults(func=cmd_label)

    sp = sub.add_parser("synthesize", help="generate new samples from a keyword file")
    sp.add_argument("--keywords", required=True, help="JSON file of keyword entries")
    sp.add_argument("--out", dest="outfile", required=True)
    sp.add_argument("--client", choices=("mock", "http"), default="mock")
    sp.add_argument("--endpoint", default=None)
    sp.add_argument("--mock-seed", type=int, default=0)
    sp.add_argument("--n-queries", type=int, default=10)
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("layer", help="assign pyramid layers from rank and compile status")
    _add_io(sp)
    sp.add_argument("--report", default=None, help="write layer counts as JSON")
    sp.set_defaults(func=cmd_layer)

    sp = sub.add_parser("manifest", help="emit the phase-ordered training manifest")
    _add_io(sp)
    sp.add_argument("--epochs", type=int, default=man.DEFAULT_EPOCHS)
    sp.add_argument("--seed", type=int, default=man.DEFAULT_SHUFFLE_SEED)
    sp.add_argument(
        "--replay",
        action="store_true",
        help="reserved: revisit earlier phases' data (not implemented)",
    )
    sp.set_defaults(func=cmd_manifest)

    sp = sub.add_parser("corrupt", help="shuffle codes/descriptions/ranks across rows")
    _add_io(sp)
    sp.add_argument("--seed", type=int, default=13)
    sp.set_defaults(func=cmd_corrupt)

    sp = sub.add_parser("stats", help="aggregate a run directory into one report")
    sp.add_argument("--run-dir", required=True)
    sp.add_argument("--out", dest="outfile", default=None, help="write report JSON here")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("pipeline", help="run all stages in order with resume")
    sp.add_argument("--config", default=None, help="pipeline config JSON")
    sp.add_argument("--root", default=None, help="corpus root (overrides config)")
    sp.add_argument("--out-dir", default=None, help="output directory (overrides config)")
    sp.set_defaults(func=cmd_pipeline)

    return p


def _sidecar(args_outfile, record: st.StageRecord) -> None:
    st.write_sidecar(args_outfile, record)


def cmd_ingest(args) -> int:
    record = _stage_ingest(args.root, args.outfile)
    _sidecar(args.outfile, record)
    print(f"ingest: {record.out_count}/{record.in_count} files admitted")
    return 0


def cmd_filter_modules(args) -> int:
    record = _stage_filter_modules(args.infile, args.outfile, args.report)
    _sidecar(args.outfile, record)
    print(f"filter-modules: kept {record.out_count}, dropped {record.dropped}")
    return 0


def cmd_dedup(args) -> int:
    record = _stage_dedup(
        args.infile,
        args.outfile,
        args.decisions,
        args.threshold,
        args.shingle_k,
        args.perms,
        args.bands,
        args.seed,
    )
    _sidecar(args.outfile, record)
    print(f"dedup: kept {record.out_count}, dropped {record.dropped}")
    return 0


def cmd_compile_gate(args) -> int:
    record = _stage_compile_gate(
        args.infile, args.outfile, args.tool, shlex.split(args.tool_args), args.timeout, args.jobs
    )
    _sidecar(args.outfile, record)
    print(f"compile-gate: kept {record.out_count}, discarded {record.dropped}")
    return 0


def cmd_label(args) -> int:
    config = PipelineConfig(
        corpus_root="",
        output_dir="",
        client=args.client,
        endpoint=args.endpoint,
        mock_table=args.mock_table,
        mock_seed=args.mock_seed,
    )
    if config.client == "http" and not config.endpoint:
        raise ConfigError("http client requires --endpoint")
    record = _stage_label(args.infile, args.outfile, _make_client(config), args.jobs)
    _sidecar(args.outfile, record)
    print(f"label: labeled {record.out_count}, quarantined {record.dropped}")
    return 0


def cmd_synthesize(args) -> int:
    if args.client == "http" and not args.endpoint:
        raise ConfigError("http client requires --endpoint")
    keywords = lab.load_keywords(args.keywords)
    client = (
        lab.HttpCompletionClient(args.endpoint)
        if args.client == "http"
        else lab.MockCompletionClient(seed=args.mock_seed)
    )
    samples = lab.synthesize_samples(keywords, client, n_queries=args.n_queries)
    write_samples(args.outfile, samples)
    requested = sum(len(e.expansions) for e in keywords) * args.n_queries
    record = st.StageRecord(
        stage="synthesize",
        in_count=requested,
        out_count=len(samples),
        dropped=requested - len(samples),
        input=Path(args.keywords).name,
        output=Path(args.outfile).name,
        params={"n_queries": args.n_queries},
    )
    _sidecar(args.outfile, record)
    print(f"synthesize: {len(samples)} samples from {requested} requests")
    return 0


def cmd_layer(args) -> int:
    record = _stage_layer(args.infile, args.outfile, args.report)
    _sidecar(args.outfile, record)
    print(f"layer: {record.out_count} samples layered")
    return 0


def cmd_manifest(args) -> int:
    if args.replay:
        raise ConfigError("--replay is reserved and not implemented")
    record = _stage_manifest(args.infile, args.outfile, args.epochs, args.seed)
    _sidecar(args.outfile, record)
    print(f"manifest: {record.out_count} entries")
    return 0


def cmd_corrupt(args) -> int:
    samples = read_samples(args.infile)
    corrupted = man.corrupt_dataset(samples, seed=args.seed)
    write_samples(args.outfile, corrupted)
    print(f"corrupt: {len(corrupted)} rows rewritten")
    return 0


def cmd_stats(args) -> int:
    report = st.summarize(args.run_dir)
    if args.outfile:
        Path(args.outfile).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(st.render_text(report))
    return 0


def cmd_pipeline(args) -> int:
    if args.config:
        config = PipelineConfig.load(args.config)
        if args.root:
            config.corpus_root = args.root
        if args.out_dir:
            config.output_dir = args.out_dir
    else:
        if not (args.root and args.out_dir):
            raise ConfigError("pipeline needs --config or both --root and --out-dir")
        config = PipelineConfig(corpus_root=args.root, output_dir=args.out_dir)
    return run_pipeline(config)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (
        ConfigError,
        st.IntegrityError,
        cg.ToolMissing,
        cg.GateError,
        lay.UnlabeledSample,
        man.IncompleteSample,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
