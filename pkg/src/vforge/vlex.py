"""Lightweight Verilog lexer and module-declaration detection.

This is deliberately not a grammar parser: it exists to strip comments,
produce a stable token stream for shingling, and find ``module``
declarations. Full syntax checking is delegated to the external compiler
gate.
"""

from __future__ import annotations

import dataclasses
import enum
import re

# IEEE 1364-2005 reserved words plus the SystemVerilog subset that shows up
# in real .sv corpora. Anything else lexes as an identifier, which is
# harmless for module detection and shingling.
KEYWORDS = frozenset(
    """
    always and assign automatic begin buf bufif0 bufif1 case casex casez cell
    cmos config deassign default defparam design disable edge else end endcase
    endconfig endfunction endgenerate endmodule endprimitive endspecify
    endtable endtask event for force forever fork function generate genvar
    highz0 highz1 if ifnone incdir include initial inout input instance
    integer join large liblist library localparam macromodule medium module
    nand negedge nmos nor noshowcancelled not notif0 notif1 or output
    parameter pmos posedge primitive pull0 pull1 pulldown pullup
    pulsestyle_ondetect pulsestyle_onevent rcmos real realtime reg release
    repeat rnmos rpmos rtran rtranif0 rtranif1 scalared showcancelled signed
    small specify specparam strong0 strong1 supply0 supply1 table task time
    tran tranif0 tranif1 tri tri0 tri1 triand trior trireg unsigned use uwire
    vectored wait wand weak0 weak1 while wire wor xnor xor
    always_comb always_ff always_latch assert bit byte class endclass enum
    export extends final import int interface endinterface logic longint
    modport package endpackage priority program endprogram property
    endproperty sequence endsequence shortint struct typedef union unique var
    void
    """.split()
)

MODULE_KEYWORDS = frozenset({"module", "macromodule"})


class TokenKind(enum.Enum):
    KEYWORD = "Keyword"
    IDENTIFIER = "Identifier"
    OPERATOR = "Operator"
    PUNCT = "Punct"
    NUMBER = "Number"
    STRING = "String"


@dataclasses.dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int


@dataclasses.dataclass(frozen=True)
class ModuleInfo:
    name: str
    decl_line: int


class LexError(Exception):
    """Raised for input the lexer cannot tokenize; callers treat the file
    as broken and filter it."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


_OPERATORS = sorted(
    [
        "<<<=", ">>>=", "===", "!==", "==?", "!=?", "<<<", ">>>",
        "<<=", ">>=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
        "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "**",
        "~&", "~|", "~^", "^~", "->", "=>", "++", "--", "::", "+:", "-:",
        "+", "-", "*", "%", "&", "|", "^", "~", "!", "<", ">", "=", "?", ":", "'",
    ],
    key=len,
    reverse=True,
)

# `/` is special-cased with a lookahead so an unterminated `/*` comment
# fails the scan instead of lexing as two operators.
_OPERATOR_RE = "|".join(re.escape(op) for op in _OPERATORS) + r"|/(?!\*)"

_NUMBER_RE = r"""
      \d[\d_]*'[sS]?[bBoOdDhH][0-9a-fA-FxXzZ?_]+
    | '[sS]?[bBoOdDhH][0-9a-fA-FxXzZ?_]+
    | '[01xXzZ]
    | \d[\d_]*\.\d[\d_]*(?:[eE][+-]?\d+)?
    | \d[\d_]*[eE][+-]?\d+
    | \d[\d_]*
"""

_MASTER_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<line_comment>//[^\n]*)
    | (?P<block_comment>/\*.*?\*/)
    | (?P<string>"(?:[^"\\\n]|\\[^\n])*")
    | (?P<number>{number})
    | (?P<directive>`[a-zA-Z_][a-zA-Z0-9_$]*)
    | (?P<ident>[a-zA-Z_][a-zA-Z0-9_$]*|\$[a-zA-Z_][a-zA-Z0-9_$]*|\\\S+)
    | (?P<operator>{operator})
    | (?P<punct>[()\[\]{{}};,.@\#])
    """.format(number=_NUMBER_RE, operator=_OPERATOR_RE),
    re.VERBOSE | re.DOTALL,
)


def lex(code: str) -> list[Token]:
    """Tokenize Verilog source. Comments and whitespace are dropped.

    Raises LexError with a 1-based line number for unterminated block
    comments or strings and for characters outside the language.
    """
    tokens: list[Token] = []
    pos = 0
    line = 1
    n = len(code)
    while pos < n:
        m = _MASTER_RE.match(code, pos)
        if m is None:
            if code.startswith("/*", pos):
                raise LexError(line, "unterminated block comment")
            if code[pos] == '"':
                raise LexError(line, "unterminated string")
            raise LexError(line, f"unexpected character {code[pos]!r}")
        text = m.group(0)
        group = m.lastgroup
        if group == "ident":
            kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENTIFIER
            tokens.append(Token(kind, text, line))
        elif group == "operator":
            tokens.append(Token(TokenKind.OPERATOR, text, line))
        elif group == "punct":
            tokens.append(Token(TokenKind.PUNCT, text, line))
        elif group == "number":
            tokens.append(Token(TokenKind.NUMBER, text, line))
        elif group == "string":
            tokens.append(Token(TokenKind.STRING, text, line))
        elif group == "directive":
            tokens.append(Token(TokenKind.KEYWORD, text, line))
        # ws / comments: dropped
        line += text.count("\n")
        pos = m.end()
    return tokens


_IDENT_START_RE = re.compile(r"[a-zA-Z_]")


def find_modules(tokens: list[Token]) -> list[ModuleInfo]:
    """One ModuleInfo per ``module``/``macromodule`` keyword followed by a
    legal identifier, in source order."""
    found: list[ModuleInfo] = []
    for i, tok in enumerate(tokens):
        if tok.kind is TokenKind.KEYWORD and tok.text in MODULE_KEYWORDS:
            if i + 1 < len(tokens):
                nxt = tokens[i + 1]
                if nxt.kind is TokenKind.IDENTIFIER and _IDENT_START_RE.match(nxt.text):
                    found.append(ModuleInfo(name=nxt.text, decl_line=tok.line))
    return found


def filter_no_module(samples):
    """Keep samples that lex cleanly and declare at least one module.

    Returns (kept, dropped_count); order is preserved.
    """
    kept = []
    dropped = 0
    for sample in samples:
        try:
            tokens = lex(sample.code)
        except LexError:
            dropped += 1
            continue
        if find_modules(tokens):
            kept.append(sample)
        else:
            dropped += 1
    return kept, dropped
