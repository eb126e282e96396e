from __future__ import annotations

import re
from dataclasses import dataclass

from ..diagnostics import Diagnostic, SourceSpan, error


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, NUMBER, STRING, PUNCT, EOF
    text: str
    line: int
    col: int
    end_line: int
    end_col: int

    def span(self, file: str) -> SourceSpan:
        return SourceSpan(file, self.line, self.col, self.end_line, self.end_col)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n﻿]+)
  | (?P<comment>//[^\n]*)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*")
  | (?P<NUMBER>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<PUNCT><->|->|==|!=|<=|>=|[{}(),.;:=<>+\-*/\#])
    """,
    re.VERBOSE,
)


def tokenize(text: str, file: str = "<input>") -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    pos = 0
    line, col = 1, 1
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            ch = text[pos]
            if ch == '"':
                msg = "unterminated string literal"
                end = text.find("\n", pos)
                end = n if end < 0 else end
            else:
                msg = f"unexpected character {ch!r}"
                end = pos + 1
            diags.append(error(SourceSpan(file, line, col, line, col + (end - pos)), msg))
            col += end - pos
            pos = end
            continue
        lexeme = m.group(0)
        kind = m.lastgroup
        nl = lexeme.count("\n")
        if nl:
            end_line = line + nl
            end_col = len(lexeme) - lexeme.rfind("\n")
        else:
            end_line, end_col = line, col + len(lexeme)
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, lexeme, line, col, end_line, end_col))
        line, col = end_line, end_col
        pos = m.end()
    tokens.append(Token("EOF", "", line, col, line, col))
    return tokens, diags
