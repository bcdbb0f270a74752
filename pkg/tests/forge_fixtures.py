"""Shared paths and sample builders for the vforge test suite.

Lives outside conftest.py so tests can import it by a globally unique
name; conftest.py holds only pytest fixtures.
"""

from pathlib import Path

from vforge.samples import Origin, Sample, content_id, normalize_source

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
STUB_TOOL_PATH = FIXTURES / "fake_iverilog.py"
MOCK_TABLE = FIXTURES / "mock_table.json"
GOLDEN_MANIFEST = FIXTURES / "golden_manifest.jsonl"

HALF_ADDER = """module halfAdder(
    input A,
    input B,
    output Sum,
    output Cout
    );

    assign Sum = A ^ B;
    assign Cout = A & B;
endmodule"""


def mk(code, path="x.v", **kw):
    code = normalize_source(code)
    return Sample(id=content_id(code), source_path=path, origin=Origin.COLLECTED, code=code, **kw)
