"""Per-sample compiler invocation and Clean / DependencyIssue / SyntaxError
classification.

Each sample is written to its own temp file and compiled in isolation.
Classification is a pure function of (exit code, diagnostic texts): code
that compiles is Clean, code whose only errors are unresolved references
to units outside the file is DependencyIssue, everything else is
SyntaxError and gets discarded.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import json
import logging
import re
import shutil
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from .samples import CompileStatus, Sample

logger = logging.getLogger(__name__)

DEFAULT_TOOL = "iverilog"
DEFAULT_TOOL_ARGS = ("-t", "null")  # compile to the null target: no artifact, full checking
DEFAULT_TIMEOUT_S = 10.0
TIMEOUT_EXIT_CODE = -1


class ToolMissing(Exception):
    """The external compiler executable was not found."""


class GateError(Exception):
    """Sample/report streams are inconsistent."""


@dataclasses.dataclass(frozen=True)
class Diagnostic:
    line: int | None
    text: str

    def to_dict(self) -> dict:
        return {"line": self.line, "text": self.text}


@dataclasses.dataclass
class CompileReport:
    sample_id: str
    status: CompileStatus
    diagnostics: list[Diagnostic]
    tool_exit_code: int

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "status": self.status.value,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "tool_exit_code": self.tool_exit_code,
        }


@dataclasses.dataclass(frozen=True)
class DependencyRule:
    name: str
    pattern: re.Pattern

    def matches(self, text: str) -> bool:
        return self.pattern.search(text) is not None


def load_dependency_rules(path=None) -> list[DependencyRule]:
    """Ordered diagnostic-pattern rules; shipped as editable package data."""
    if path is None:
        raw = importlib.resources.files("vforge").joinpath("dependency_rules.json").read_text()
    else:
        raw = Path(path).read_text(encoding="utf-8")
    return [DependencyRule(name=r["name"], pattern=re.compile(r["pattern"])) for r in json.loads(raw)]


_LOCATION_RE = re.compile(r"^(.*?):(\d+):\s*(.*)$")
_SUMMARY_RE = re.compile(r"^\s*\d+\s+error\(s\)")


def parse_diagnostics(output: str) -> list[Diagnostic]:
    out = []
    for line in output.splitlines():
        if not line.strip():
            continue
        m = _LOCATION_RE.match(line)
        if m:
            out.append(Diagnostic(line=int(m.group(2)), text=line))
        else:
            out.append(Diagnostic(line=None, text=line))
    return out


def is_summary_line(text: str) -> bool:
    # e.g. "2 error(s) during elaboration." counts errors, it is not one.
    return bool(_SUMMARY_RE.match(text)) or "error(s) during" in text


def is_error_diagnostic(d: Diagnostic) -> bool:
    if is_summary_line(d.text):
        return False
    if ": warning:" in d.text or d.text.lstrip().startswith("warning:"):
        return False
    if d.line is not None:
        return True
    return "error" in d.text.lower()


def classify(exit_code: int, diagnostics: Sequence[Diagnostic], rules: Sequence[DependencyRule]) -> CompileStatus:
    if exit_code == 0:
        return CompileStatus.CLEAN
    errors = [d for d in diagnostics if is_error_diagnostic(d)]
    if errors and all(any(r.matches(d.text) for r in rules) for d in errors):
        return CompileStatus.DEPENDENCY_ISSUE
    return CompileStatus.SYNTAX_ERROR


def compile_check(
    sample: Sample,
    tool_path: str = DEFAULT_TOOL,
    tool_args: Sequence[str] = DEFAULT_TOOL_ARGS,
    timeout_s: float = DEFAULT_TIMEOUT_S,
    rules: Sequence[DependencyRule] | None = None,
) -> CompileReport:
    if timeout_s <= 0:
        raise ValueError(f"timeout_s must be > 0, got {timeout_s}")
    if rules is None:
        rules = load_dependency_rules()
    with tempfile.TemporaryDirectory(prefix="vforge-compile-") as tmp:
        src = Path(tmp) / f"{sample.id}.v"
        src.write_text(sample.code + "\n", encoding="utf-8")
        try:
            proc = subprocess.run(
                [tool_path, *tool_args, str(src)],
                capture_output=True,
                text=True,
                timeout=timeout_s,
                cwd=tmp,
            )
        except subprocess.TimeoutExpired:
            return CompileReport(
                sample_id=sample.id,
                status=CompileStatus.SYNTAX_ERROR,
                diagnostics=[Diagnostic(line=None, text=f"compilation timed out after {timeout_s}s")],
                tool_exit_code=TIMEOUT_EXIT_CODE,
            )
    diagnostics = parse_diagnostics(proc.stderr + ("\n" + proc.stdout if proc.stdout else ""))
    status = classify(proc.returncode, diagnostics, rules)
    if status == CompileStatus.SYNTAX_ERROR and not any(is_error_diagnostic(d) for d in diagnostics):
        # keep the invariant that a SyntaxError report shows why
        diagnostics.append(
            Diagnostic(line=None, text=f"tool exited {proc.returncode} with no parseable error diagnostics")
        )
    return CompileReport(
        sample_id=sample.id,
        status=status,
        diagnostics=diagnostics,
        tool_exit_code=proc.returncode,
    )


def run_compile_gate(
    samples: Sequence[Sample],
    tool_path: str = DEFAULT_TOOL,
    tool_args: Sequence[str] = DEFAULT_TOOL_ARGS,
    timeout_s: float = DEFAULT_TIMEOUT_S,
    jobs: int = 4,
    rules: Sequence[DependencyRule] | None = None,
) -> list[CompileReport]:
    """Compile every sample on a bounded worker pool.

    Raises ToolMissing before touching any sample; reports come back sorted
    by sample id so results do not depend on completion order.
    """
    if shutil.which(tool_path) is None:
        raise ToolMissing(f"compiler executable not found: {tool_path!r}")
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    if rules is None:
        rules = load_dependency_rules()

    def one(sample: Sample) -> CompileReport:
        return compile_check(sample, tool_path, tool_args, timeout_s, rules)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        reports = list(pool.map(one, samples))
    reports.sort(key=lambda r: r.sample_id)
    counts = {s.value: 0 for s in CompileStatus}
    for r in reports:
        counts[r.status.value] += 1
    logger.info("compile gate: %s", counts)
    return reports


def gate(samples: Sequence[Sample], reports: Sequence[CompileReport]) -> tuple[list[Sample], int]:
    """Drop SyntaxError samples, annotate the rest; order preserved."""
    by_id = {r.sample_id: r for r in reports}
    kept: list[Sample] = []
    discarded = 0
    for s in samples:
        report = by_id.get(s.id)
        if report is None:
            raise GateError(f"missing compile report for sample {s.id}")
        if report.status == CompileStatus.SYNTAX_ERROR:
            discarded += 1
            continue
        kept.append(dataclasses.replace(s, compile_status=report.status))
    return kept, discarded
