import json

import pytest

from vforge import labeler
from vforge.labeler import (
    CircuitClass,
    HttpCompletionClient,
    KeywordEntry,
    LabelKind,
    LabelParseError,
    LabelRequest,
    MAX_ATTEMPTS,
    MockCompletionClient,
    TOKEN_ENV_VAR,
    classify_complexity,
    complexity_request,
    describe_request,
    extract_code_block,
    label_samples,
    load_keywords,
    parse_complexity,
    parse_description,
    parse_rank,
    rank_request,
    rank_sample,
    score_to_tier,
    structural_complexity_score,
    synthesis_prompt,
    synthesize_samples,
)
from vforge.samples import Complexity, Origin, content_id

from forge_fixtures import HALF_ADDER, MOCK_TABLE, mk


class ScriptedClient:
    """Replays canned responses and counts calls."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, prompt, temperature):
        self.calls += 1
        if self.responses:
            return self.responses.pop(0)
        return "nothing useful"


# -- parsing ----------------------------------------------------------------

@pytest.mark.parametrize(
    "text,expected",
    [
        ("Score: 20 out of 20.", 20),
        ("Score: 7/20", 7),
        ("18/20", 18),
        ("0", 0),
        ("I'd say 12.", 12),
        ("25. Maybe 19.", 19),       # first in-range integer wins
        ("21/20", None),             # fraction consumed whole; numerator out of range
        ("100", None),
        ("no number here", None),
        ("", None),
    ],
)
def test_parse_rank(text, expected):
    assert parse_rank(text) == expected


@pytest.mark.parametrize(
    "text,expected",
    [
        ("Tier: expert", Complexity.EXPERT),
        ("BASIC", Complexity.BASIC),
        ("This is Intermediate-level work.", Complexity.INTERMEDIATE),
        ("Basic, bordering on Advanced", Complexity.BASIC),  # earliest occurrence
        ("advanced", Complexity.ADVANCED),
        ("no tier named", None),
        ("", None),
    ],
)
def test_parse_complexity(text, expected):
    assert parse_complexity(text) == expected


def test_parse_description_collapses_whitespace():
    assert parse_description("  a\n  counter\t design ") == "a counter design"
    assert parse_description("   \n\t ") is None
    assert parse_description("") is None


# -- requests ---------------------------------------------------------------

def test_request_prompt_shapes():
    s = mk(HALF_ADDER, "ha.v")
    r = rank_request(s)
    assert r.kind is LabelKind.RANK
    assert r.temperature == 0.0
    assert r.prompt.startswith(labeler.RANK_INSTRUCTION + "\n")
    assert r.prompt.endswith("\n" + labeler.RANK_SUFFIX)
    assert HALF_ADDER in r.prompt
    assert complexity_request(s).prompt.startswith(labeler.COMPLEXITY_INSTRUCTION)
    assert describe_request(s).prompt.startswith(labeler.DESCRIBE_INSTRUCTION)


def test_label_request_validation():
    with pytest.raises(ValueError):
        LabelRequest("sid", LabelKind.RANK, "", 0.0)
    with pytest.raises(ValueError):
        LabelRequest("sid", LabelKind.RANK, "p", -0.1)


# -- retry loop -------------------------------------------------------------

def test_rank_retries_until_parseable():
    client = ScriptedClient(["garbage", "??", "Score: 9 out of 20."])
    assert rank_sample(mk(HALF_ADDER), client) == 9
    assert client.calls == 3


def test_rank_gives_up_after_max_attempts():
    client = ScriptedClient([])
    with pytest.raises(LabelParseError):
        rank_sample(mk(HALF_ADDER), client)
    assert client.calls == MAX_ATTEMPTS


# -- label_samples ----------------------------------------------------------

def test_label_samples_fills_fields_in_input_order():
    a = mk("module a1(input x, output y); assign y = x; endmodule", "a.v")
    b = mk("module b1(input x, output y); assign y = ~x; endmodule", "b.v")
    labeled, quarantine = label_samples([a, b], MockCompletionClient(seed=0))
    assert quarantine == []
    assert [s.source_path for s in labeled] == ["a.v", "b.v"]
    for s in labeled:
        assert 0 <= s.rank <= 20
        assert isinstance(s.complexity, Complexity)
        assert s.description


class PoisonRankClient:
    """Unparseable rank responses for any code containing 'poison'."""

    def __init__(self):
        self.inner = MockCompletionClient(seed=0)

    def complete(self, prompt, temperature):
        if prompt.startswith(labeler.RANK_INSTRUCTION) and "poison" in prompt:
            return "I cannot rate this."
        return self.inner.complete(prompt, temperature)


def test_label_samples_quarantines_unparseable():
    good = mk("module fine(input x, output y); assign y = x; endmodule", "g.v")
    bad = mk("module poison_unit(input x, output y); assign y = x; endmodule", "p.v")
    labeled, quarantine = label_samples([good, bad], PoisonRankClient())
    assert [s.id for s in labeled] == [good.id]
    assert len(quarantine) == 1
    assert quarantine[0]["sample_id"] == bad.id
    assert "Rank" in quarantine[0]["error"]


# -- mock client ------------------------------------------------------------

def test_mock_table_lookup_by_content_id():
    s = mk(HALF_ADDER)
    sid = content_id(HALF_ADDER)
    client = MockCompletionClient(table={sid: {"rank": "3/20"}})
    assert client.complete(rank_request(s).prompt, 0.0) == "3/20"
    # kinds missing from the entry fall back to templates
    tier = client.complete(complexity_request(s).prompt, 0.0)
    assert parse_complexity(tier) is Complexity.BASIC


def test_mock_fixture_table_covers_half_adder():
    client = MockCompletionClient.from_table_file(MOCK_TABLE)
    s = mk(HALF_ADDER)
    assert parse_rank(client.complete(rank_request(s).prompt, 0.0)) == 20


def test_mock_fallback_rank_is_id_derived():
    code = "module z(input a, output y); assign y = a; endmodule"
    s = mk(code)
    expected = int(s.id[:8], 16) % 21
    resp = MockCompletionClient().complete(rank_request(s).prompt, 0.0)
    assert resp == f"Score: {expected} out of 20."


def test_mock_fallback_describe_lists_module_names():
    code = "module alpha; endmodule\nmodule beta; endmodule"
    resp = MockCompletionClient().complete(describe_request(mk(code)).prompt, 0.0)
    assert resp == "Verilog design containing modules: alpha, beta."


def test_mock_handles_unlexable_code():
    s = mk('module broken; initial $display("no close')  # unterminated string
    client = MockCompletionClient()
    assert parse_rank(client.complete(rank_request(s).prompt, 0.0)) is not None
    assert parse_complexity(client.complete(complexity_request(s).prompt, 0.0)) is Complexity.BASIC
    assert "(none)" in client.complete(describe_request(s).prompt, 0.0)


def test_mock_is_deterministic():
    s = mk(HALF_ADDER)
    a = MockCompletionClient(seed=5).complete(rank_request(s).prompt, 0.0)
    b = MockCompletionClient(seed=5).complete(rank_request(s).prompt, 0.0)
    assert a == b


def test_mock_rejects_unknown_prompts():
    with pytest.raises(ValueError):
        MockCompletionClient().complete("tell me a joke", 0.0)


# -- structural heuristic ---------------------------------------------------

def test_structural_score_counts_pieces():
    assert structural_complexity_score(HALF_ADDER) == 1  # one module, nothing else
    seq = (
        "module t(input clk, input d, output reg q);\n"
        "always @(posedge clk) q <= d;\nendmodule"
    )
    assert structural_complexity_score(seq) == 2
    inst = (
        "module top(input a, input b, output s, output c);\n"
        "halfAdder u1(.A(a), .B(b), .Sum(s), .Cout(c));\nendmodule"
    )
    assert structural_complexity_score(inst) == 2


def test_score_to_tier_boundaries():
    assert score_to_tier(0) is Complexity.BASIC
    assert score_to_tier(1) is Complexity.BASIC
    assert score_to_tier(2) is Complexity.INTERMEDIATE
    assert score_to_tier(4) is Complexity.INTERMEDIATE
    assert score_to_tier(5) is Complexity.ADVANCED
    assert score_to_tier(9) is Complexity.ADVANCED
    assert score_to_tier(10) is Complexity.EXPERT


# -- synthesis --------------------------------------------------------------

def test_extract_code_block():
    assert extract_code_block("```verilog\nmodule m; endmodule\n```") == "module m; endmodule"
    assert extract_code_block("pre\n```\nmodule m; endmodule\n```\npost") == "module m; endmodule"
    two = "```v\nfirst\n```\n```v\nsecond\n```"
    assert extract_code_block(two) == "first"
    assert extract_code_block("no fence") is None
    assert extract_code_block("```verilog\n   \n```") is None


def test_synthesis_prompt_mentions_expansion_and_class():
    entry = KeywordEntry("counter", CircuitClass.SEQUENTIAL, ("4-bit ripple counter",))
    p = synthesis_prompt(entry, entry.expansions[0])
    assert "4-bit ripple counter" in p
    assert "sequential circuit" in p
    assert "category: counter" in p


def test_synthesize_samples_counts_and_fields():
    keywords = [
        KeywordEntry("counter", CircuitClass.SEQUENTIAL, ("4-bit ripple counter",)),
        KeywordEntry("mux", CircuitClass.COMBINATIONAL, ("2-to-1 multiplexer", "4-to-1 multiplexer")),
    ]
    out = synthesize_samples(keywords, MockCompletionClient(seed=0), n_queries=3)
    assert len(out) == 9  # 3 expansions x 3 queries
    assert all(s.origin is Origin.SYNTHESIZED for s in out)
    assert all(s.id == content_id(s.code) for s in out)
    paths = [s.source_path for s in out]
    assert paths[0] == "synthesized/4_bit_ripple_counter_q00.v"
    assert paths[2] == "synthesized/4_bit_ripple_counter_q02.v"
    assert len(set(paths)) == 9
    # temperature is baked into the module name, so queries differ
    assert "_t0100" in out[0].code and "_t1000" in out[2].code


def test_synthesize_skips_failing_queries():
    class Flaky:
        def __init__(self):
            self.inner = MockCompletionClient()

        def complete(self, prompt, temperature):
            if temperature > 0.9:
                raise RuntimeError("rate limited")
            return self.inner.complete(prompt, temperature)

    keywords = [KeywordEntry("mux", CircuitClass.COMBINATIONAL, ("2-to-1 multiplexer",))]
    out = synthesize_samples(keywords, Flaky(), n_queries=3)  # temps 0.1, 0.55, 1.0
    assert len(out) == 2


def test_synthesize_skips_responses_without_code():
    class NoCode:
        def complete(self, prompt, temperature):
            return "I decline to write Verilog today."

    keywords = [KeywordEntry("mux", CircuitClass.COMBINATIONAL, ("2-to-1 multiplexer",))]
    assert synthesize_samples(keywords, NoCode(), n_queries=2) == []


def test_synthesize_validates_n_queries():
    with pytest.raises(ValueError):
        synthesize_samples([], MockCompletionClient(), n_queries=0)
    assert synthesize_samples([], MockCompletionClient(), n_queries=3) == []


def test_load_keywords_roundtrip(tmp_path):
    path = tmp_path / "kw.json"
    path.write_text(json.dumps([
        {"keyword": "adder", "circuit_class": "Combinational",
         "expansions": ["carry lookahead adder"]},
    ]))
    [entry] = load_keywords(path)
    assert entry.keyword == "adder"
    assert entry.circuit_class is CircuitClass.COMBINATIONAL
    assert entry.expansions == ("carry lookahead adder",)


# -- http client ------------------------------------------------------------

class FakeResponse:
    def __init__(self, payload, error=None):
        self.payload = payload
        self.error = error

    def raise_for_status(self):
        if self.error:
            raise self.error

    def json(self):
        return self.payload


def test_http_client_posts_prompt_and_reads_text(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(url=url, json=json, headers=headers, timeout=timeout)
        return FakeResponse({"text": "Score: 12 out of 20."})

    monkeypatch.setattr(labeler.requests, "post", fake_post)
    monkeypatch.setenv(TOKEN_ENV_VAR, "sekrit")
    client = HttpCompletionClient("http://api.test/v1/complete", timeout=5.0)
    out = client.complete("rate this", 0.3)
    assert out == "Score: 12 out of 20."
    assert seen["url"] == "http://api.test/v1/complete"
    assert seen["json"] == {"prompt": "rate this", "temperature": 0.3}
    assert seen["headers"]["Authorization"] == "Bearer sekrit"
    assert seen["timeout"] == 5.0


def test_http_client_omits_header_without_token(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(headers=headers)
        return FakeResponse({"text": "ok"})

    monkeypatch.setattr(labeler.requests, "post", fake_post)
    monkeypatch.delenv(TOKEN_ENV_VAR, raising=False)
    HttpCompletionClient("http://api.test").complete("p", 0.0)
    assert seen["headers"] == {}


def test_http_client_requires_text_field(monkeypatch):
    monkeypatch.setattr(
        labeler.requests, "post", lambda *a, **k: FakeResponse({"output": "x"})
    )
    with pytest.raises(ValueError):
        HttpCompletionClient("http://api.test").complete("p", 0.0)


def test_http_client_propagates_http_errors(monkeypatch):
    err = RuntimeError("503")
    monkeypatch.setattr(
        labeler.requests, "post", lambda *a, **k: FakeResponse({}, error=err)
    )
    with pytest.raises(RuntimeError):
        HttpCompletionClient("http://api.test").complete("p", 0.0)
