"""Rank, complexity, and description labeling through a pluggable
text-completion client, plus keyword-driven synthesis of new samples.

Two clients implement the same one-method interface: an HTTP client for a
live endpoint and a deterministic mock (lookup table + template fallback)
so the whole pipeline runs offline.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import os
import random
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Protocol, Sequence

import numpy as np
import requests

from .samples import Complexity, Origin, Sample, content_id, normalize_source
from .vlex import LexError, TokenKind, find_modules, lex

logger = logging.getLogger(__name__)

TOKEN_ENV_VAR = "VFORGE_API_TOKEN"

RANK_INSTRUCTION = (
    "Act as a teacher and rank the quality of this Verilog code in scale of 0 to 20, "
    "with 0 being syntactically incorrect and 20 being a good Verilog code in terms of "
    "efficiency and coding style:"
)
RANK_SUFFIX = "Just give me the score only."

COMPLEXITY_INSTRUCTION = (
    "Classify the complexity of this Verilog code as exactly one of Basic, Intermediate, "
    "Advanced, or Expert:"
)
COMPLEXITY_SUFFIX = "Just give me the tier name only."

DESCRIBE_INSTRUCTION = "Describe in one paragraph what this Verilog code implements:"
DESCRIBE_SUFFIX = "Just give me the description only."

MAX_ATTEMPTS = 4  # one initial try plus three retries


class LabelParseError(Exception):
    """Client output stayed unparseable after all retries."""


class LabelKind(str, enum.Enum):
    RANK = "Rank"
    COMPLEXITY = "Complexity"
    DESCRIBE = "Describe"


class CircuitClass(str, enum.Enum):
    COMBINATIONAL = "Combinational"
    SEQUENTIAL = "Sequential"


@dataclasses.dataclass(frozen=True)
class LabelRequest:
    sample_id: str
    kind: LabelKind
    prompt: str
    temperature: float

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclasses.dataclass(frozen=True)
class KeywordEntry:
    keyword: str
    circuit_class: CircuitClass
    expansions: tuple[str, ...]


def load_keywords(path) -> list[KeywordEntry]:
    with open(path, encoding="utf-8") as fh:
        rows = json.load(fh)
    return [
        KeywordEntry(
            keyword=r["keyword"],
            circuit_class=CircuitClass(r["circuit_class"]),
            expansions=tuple(r["expansions"]),
        )
        for r in rows
    ]


class CompletionClient(Protocol):
    def complete(self, prompt: str, temperature: float) -> str: ...


# ---------------------------------------------------------------------------
# prompt construction and response parsing
# ---------------------------------------------------------------------------

def _wrap(instruction: str, code: str, suffix: str) -> str:
    return f"{instruction}\n{code}\n{suffix}"


def rank_request(sample: Sample) -> LabelRequest:
    if not sample.code:
        raise ValueError("sample code must be non-empty")
    return LabelRequest(
        sample_id=sample.id,
        kind=LabelKind.RANK,
        prompt=_wrap(RANK_INSTRUCTION, sample.code, RANK_SUFFIX),
        temperature=0.0,
    )


def complexity_request(sample: Sample) -> LabelRequest:
    if not sample.code:
        raise ValueError("sample code must be non-empty")
    return LabelRequest(
        sample_id=sample.id,
        kind=LabelKind.COMPLEXITY,
        prompt=_wrap(COMPLEXITY_INSTRUCTION, sample.code, COMPLEXITY_SUFFIX),
        temperature=0.0,
    )


def describe_request(sample: Sample) -> LabelRequest:
    if not sample.code:
        raise ValueError("sample code must be non-empty")
    return LabelRequest(
        sample_id=sample.id,
        kind=LabelKind.DESCRIBE,
        prompt=_wrap(DESCRIBE_INSTRUCTION, sample.code, DESCRIBE_SUFFIX),
        temperature=0.0,
    )


_RANK_RE = re.compile(r"(\d+)(?:\s*/\s*(\d+))?")


def parse_rank(text: str) -> int | None:
    """First integer in [0, 20]; a fraction like 18/20 counts as its numerator."""
    for m in _RANK_RE.finditer(text):
        value = int(m.group(1))
        if 0 <= value <= 20:
            return value
    return None


def parse_complexity(text: str) -> Complexity | None:
    """Earliest case-insensitive tier-name occurrence in the response."""
    lowered = text.lower()
    hits = [(lowered.find(t.value.lower()), t) for t in Complexity]
    hits = [(pos, t) for pos, t in hits if pos >= 0]
    if not hits:
        return None
    return min(hits, key=lambda pair: pair[0])[1]


def parse_description(text: str) -> str | None:
    """Whitespace-collapsed single paragraph; None when effectively empty."""
    collapsed = " ".join(text.split())
    return collapsed or None


def _ask(client: CompletionClient, request: LabelRequest, parse: Callable):
    last = ""
    for _ in range(MAX_ATTEMPTS):
        last = client.complete(request.prompt, request.temperature)
        value = parse(last)
        if value is not None:
            return value
    raise LabelParseError(
        f"{request.kind.value} response for {request.sample_id} unparseable after "
        f"{MAX_ATTEMPTS} attempts; last response: {last[:200]!r}"
    )


def rank_sample(sample: Sample, client: CompletionClient) -> int:
    return _ask(client, rank_request(sample), parse_rank)


def classify_complexity(sample: Sample, client: CompletionClient) -> Complexity:
    return _ask(client, complexity_request(sample), parse_complexity)


def describe_sample(sample: Sample, client: CompletionClient) -> str:
    return _ask(client, describe_request(sample), parse_description)


def label_samples(
    samples: Sequence[Sample], client: CompletionClient, max_workers: int = 4
) -> tuple[list[Sample], list[dict]]:
    """Label every sample; unparseable ones land in a quarantine list.

    Requests run concurrently (max_workers is the rate limit); results are
    joined by sample id, so output order matches input order regardless of
    completion order.
    """

    def one(sample: Sample):
        try:
            return sample.id, (
                rank_sample(sample, client),
                classify_complexity(sample, client),
                describe_sample(sample, client),
            ), None
        except LabelParseError as exc:
            return sample.id, None, str(exc)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = {sid: (labels, err) for sid, labels, err in pool.map(one, samples)}

    labeled: list[Sample] = []
    quarantine: list[dict] = []
    for s in samples:
        labels, err = results[s.id]
        if labels is None:
            quarantine.append({"sample_id": s.id, "error": err})
            continue
        rank, tier, description = labels
        labeled.append(
            dataclasses.replace(s, rank=rank, complexity=tier, description=description)
        )
    return labeled, quarantine


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)


def extract_code_block(text: str) -> str | None:
    m = _FENCE_RE.search(text)
    if m is None:
        return None
    code = normalize_source(m.group(1))
    return code or None


def synthesis_prompt(entry: KeywordEntry, expansion: str) -> str:
    return (
        f"Write complete synthesizable Verilog code implementing a {expansion} "
        f"({entry.circuit_class.value.lower()} circuit, category: {entry.keyword}). "
        "Reply with a single fenced Verilog code block."
    )


def synthesize_samples(
    keywords: Sequence[KeywordEntry], client: CompletionClient, n_queries: int = 10
) -> list[Sample]:
    """Query the client n_queries times per expansion at temperatures spread
    evenly over [0.1, 1.0]; every parseable code block becomes a sample.

    Request failures are logged and skipped; the successful subset is
    returned. Synthesized samples go through the same downstream gates as
    collected ones, differing only in origin.
    """
    if n_queries < 1:
        raise ValueError(f"n_queries must be >= 1, got {n_queries}")
    temperatures = [round(float(t), 6) for t in np.linspace(0.1, 1.0, n_queries)]
    out: list[Sample] = []
    for entry in keywords:
        for expansion in entry.expansions:
            prompt = synthesis_prompt(entry, expansion)
            slug = _slugify(expansion)
            for q, temperature in enumerate(temperatures):
                try:
                    response = client.complete(prompt, temperature)
                except Exception as exc:
                    logger.warning("synthesis request failed (%s, t=%s): %s", expansion, temperature, exc)
                    continue
                code = extract_code_block(response)
                if code is None:
                    logger.warning("no code block in synthesis response (%s, t=%s)", expansion, temperature)
                    continue
                out.append(
                    Sample(
                        id=content_id(code),
                        source_path=f"synthesized/{slug}_q{q:02d}.v",
                        origin=Origin.SYNTHESIZED,
                        code=code,
                    )
                )
    return out


def _slugify(text: str) -> str:
    return re.sub(r"\W+", "_", text.strip()).strip("_").lower() or "design"


# ---------------------------------------------------------------------------
# clients
# ---------------------------------------------------------------------------

class HttpCompletionClient:
    """POSTs {"prompt", "temperature"} as JSON and reads {"text"} back.

    The bearer token is taken from the environment so it never appears in
    configs or process listings.
    """

    def __init__(self, endpoint: str, token_env: str = TOKEN_ENV_VAR, timeout: float = 60.0):
        self.endpoint = endpoint
        self.token_env = token_env
        self.timeout = timeout

    def complete(self, prompt: str, temperature: float) -> str:
        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        resp = requests.post(
            self.endpoint,
            json={"prompt": prompt, "temperature": temperature},
            headers=headers,
            timeout=self.timeout,
        )
        resp.raise_for_status()
        body = resp.json()
        if "text" not in body:
            raise ValueError(f"completion response missing 'text' field: {body!r}")
        return body["text"]


def structural_complexity_score(code: str) -> int:
    """Modules + always blocks + instantiations. A non-normative stand-in
    for a real complexity rubric; exists so offline runs are deterministic."""
    tokens = lex(code)
    modules = len(find_modules(tokens))
    always = sum(
        1 for t in tokens if t.kind == TokenKind.KEYWORD and t.text.startswith("always")
    )
    instantiations = 0
    for i, t in enumerate(tokens[:-2]):
        # module_type instance_name ( ...  or  module_type #(params) ...
        if t.kind != TokenKind.IDENTIFIER:
            continue
        nxt, nxt2 = tokens[i + 1], tokens[i + 2]
        if nxt.kind == TokenKind.IDENTIFIER and nxt2.text == "(":
            instantiations += 1
        elif nxt.text == "#" and nxt2.text == "(":
            instantiations += 1
    return modules + always + instantiations


def score_to_tier(score: int) -> Complexity:
    if score <= 1:
        return Complexity.BASIC
    if score <= 4:
        return Complexity.INTERMEDIATE
    if score <= 9:
        return Complexity.ADVANCED
    return Complexity.EXPERT


class MockCompletionClient:
    """Deterministic offline client.

    Recognizes the labeling prompt shapes, recovers the embedded code, and
    answers from a per-sample-id table when one is given; otherwise falls
    back to seeded templates. Synthesis prompts yield small generated
    modules that vary with (expansion, temperature, seed).
    """

    def __init__(self, seed: int = 0, table: dict | None = None):
        self.seed = seed
        self.table = table or {}

    @classmethod
    def from_table_file(cls, path, seed: int = 0) -> "MockCompletionClient":
        with open(path, encoding="utf-8") as fh:
            return cls(seed=seed, table=json.load(fh))

    def complete(self, prompt: str, temperature: float) -> str:
        for kind, instruction, suffix in (
            ("rank", RANK_INSTRUCTION, RANK_SUFFIX),
            ("complexity", COMPLEXITY_INSTRUCTION, COMPLEXITY_SUFFIX),
            ("describe", DESCRIBE_INSTRUCTION, DESCRIBE_SUFFIX),
        ):
            code = _unwrap(prompt, instruction, suffix)
            if code is not None:
                return self._label_response(kind, code)
        if prompt.startswith("Write complete synthesizable Verilog code"):
            return self._synthesis_response(prompt, temperature)
        raise ValueError(f"mock client got an unrecognized prompt: {prompt[:80]!r}")

    def _label_response(self, kind: str, code: str) -> str:
        sid = content_id(code)
        entry = self.table.get(sid, {})
        if kind in entry:
            return entry[kind]
        if kind == "rank":
            return f"Score: {int(sid[:8], 16) % 21} out of 20."
        try:
            tokens = lex(code)
        except LexError:
            tokens = []
        if kind == "complexity":
            score = structural_complexity_score(code) if tokens else 0
            return f"Tier: {score_to_tier(score).value}."
        names = [m.name for m in find_modules(tokens)] or ["(none)"]
        return "Verilog design containing modules: " + ", ".join(names) + "."

    def _synthesis_response(self, prompt: str, temperature: float) -> str:
        m = re.search(r"implementing a (.+?) \((combinational|sequential) circuit", prompt)
        expansion = m.group(1) if m else "design"
        sequential = bool(m) and m.group(2) == "sequential"
        rng = random.Random(f"{self.seed}:{expansion}:{temperature:.6f}")
        width = rng.choice([2, 4, 8, 16])
        name = f"{_slugify(expansion)}_t{int(round(temperature * 1000)):04d}"
        if sequential:
            body = (
                f"module {name}(\n"
                f"    input clk,\n"
                f"    input rst,\n"
                f"    input [{width - 1}:0] d,\n"
                f"    output reg [{width - 1}:0] q\n"
                f");\n"
                f"    always @(posedge clk) begin\n"
                f"        if (rst) q <= {width}'d0;\n"
                f"        else q <= d;\n"
                f"    end\n"
                f"endmodule"
            )
        else:
            op = rng.choice(["&", "|", "^", "+"])
            body = (
                f"module {name}(\n"
                f"    input [{width - 1}:0] a,\n"
                f"    input [{width - 1}:0] b,\n"
                f"    output [{width - 1}:0] y\n"
                f");\n"
                f"    assign y = a {op} b;\n"
                f"endmodule"
            )
        return f"Here is the design:\n```verilog\n{body}\n```\n"


def _unwrap(prompt: str, instruction: str, suffix: str) -> str | None:
    prefix = instruction + "\n"
    tail = "\n" + suffix
    if prompt.startswith(prefix) and prompt.endswith(tail):
        return prompt[len(prefix) : len(prompt) - len(tail)]
    return None
