"""Structural self-check for emitted ProVerif text.

Not a full ProVerif front end: it tokenizes, splits top-level statements,
checks bracket balance, and verifies that every identifier is declared (or
bound earlier in its statement) and that applications use the declared arity.
That is enough to catch the hygiene mistakes a generator can make.
"""

from __future__ import annotations

import re

_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<comment>\(\*.*?\*\))|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<num>\d+)"
    r"|(?P<punct>==>|<>|&&|\|\||<=|>=|[=(),;:.!|\[\]\-<>])",
    re.S,
)

HEADS = {"free", "const", "fun", "reduc", "event", "query", "let", "process", "type"}
KEYWORDS = {
    "forall", "in", "out", "new", "if", "then", "else", "let", "event", "inj", "attacker",
    "not", "private", "data", "process", "is_name",
}
TYPES = {"bitstring", "channel", "bool"}


def _tokens(text: str, problems: list[str]):
    out = []
    pos = 0
    line = 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            problems.append(f"line {line}: unexpected character {text[pos]!r}")
            pos += 1
            continue
        kind = m.lastgroup
        if kind in ("ident", "num", "punct"):
            out.append((kind, m.group(), line))
        line += m.group().count("\n")
        pos = m.end()
    return out


def _statements(toks, problems):
    stmts, cur, depth = [], [], 0
    for tok in toks:
        cur.append(tok)
        if tok[1] in "([":
            depth += 1
        elif tok[1] in ")]":
            depth -= 1
            if depth < 0:
                problems.append(f"line {tok[2]}: unbalanced '{tok[1]}'")
                depth = 0
        elif tok[1] == "." and depth == 0:
            stmts.append(cur)
            cur = []
    if cur:
        if cur[0][1] != "process":
            problems.append(f"line {cur[0][2]}: statement not terminated by '.'")
        stmts.append(cur)
    for s in stmts:
        d = sum(1 if t[1] in "([" else -1 if t[1] in ")]" else 0 for t in s)
        if d != 0:
            problems.append(f"line {s[0][2]}: unbalanced brackets in '{s[0][1]}' statement")
    return stmts


def _arg_count(stmt, i) -> int:
    """Number of arguments of the application whose '(' is at index ``i``."""
    depth, count, empty = 0, 1, True
    for tok in stmt[i:]:
        t = tok[1]
        if t in "([":
            depth += 1
            if depth == 1:
                continue
        elif t in ")]":
            depth -= 1
            if depth == 0:
                break
        elif t == "," and depth == 1:
            count += 1
        empty = False
    return 0 if empty else count


def check_pv(text: str) -> list[str]:
    """Problems found in ``text``; empty when the specification is well-formed."""
    problems: list[str] = []
    stmts = _statements(_tokens(text, problems), problems)
    arity: dict[str, int] = {}  # functions, destructors, events, macros
    names: set[str] = set()
    events: set[str] = set()
    new_bound = {
        s[i + 1][1]
        for s in stmts
        for i in range(len(s) - 1)
        if s[i][1] == "new" and s[i + 1][0] == "ident"
    }
    seen_process = False

    for s in stmts:
        head = s[0][1]
        where = f"line {s[0][2]}"
        if head not in HEADS:
            problems.append(f"{where}: unknown declaration '{head}'")
            continue
        if seen_process:
            problems.append(f"{where}: declaration after the main process")
        if head in ("free", "const"):
            if len(s) < 4 or s[2][1] != ":" or s[3][1] not in TYPES:
                problems.append(f"{where}: malformed {head} declaration")
                continue
            names.add(s[1][1])
            continue
        if head in ("fun", "event"):
            if len(s) < 3 or s[2][1] != "(":
                problems.append(f"{where}: malformed {head} declaration")
                continue
            arity[s[1][1]] = _arg_count(s, 2)
            if head == "event":
                events.add(s[1][1])
            for tok in s[3:]:
                if tok[0] == "ident" and tok[1] not in TYPES and tok[1] not in KEYWORDS:
                    problems.append(f"{where}: unknown type '{tok[1]}'")
            continue

        local: set[str] = set()
        start = 1
        defining = None
        if head == "let":
            defining = s[1][1]
            start = 2
        elif head == "reduc":
            semi = next((i for i, t in enumerate(s) if t[1] == ";"), None)
            if semi is None or semi + 1 >= len(s):
                problems.append(f"{where}: malformed reduc")
                continue
            defining = s[semi + 1][1]
            arity[defining] = _arg_count(s, semi + 2)
        for i in range(start, len(s)):
            kind, tok, line = s[i]
            if kind != "ident":
                continue
            nxt = s[i + 1][1] if i + 1 < len(s) else ""
            prev = s[i - 1][1] if i else ""
            if nxt == ":" or (prev == "let" and nxt == "="):
                local.add(tok)
                continue
            if tok in TYPES or tok in KEYWORDS:
                continue
            if head == "reduc" and tok == defining:
                continue
            if head == "query" and prev == "new":
                if tok not in new_bound:
                    problems.append(f"line {line}: query refers to unrestricted name '{tok}'")
                continue
            if prev == "event" or (head == "query" and nxt == "(" and tok in events):
                if tok not in events:
                    problems.append(f"line {line}: undeclared event '{tok}'")
                    continue
            if tok in local:
                continue
            if tok not in names and tok not in arity:
                problems.append(f"line {line}: undeclared identifier '{tok}'")
                continue
            if tok in arity:
                got = _arg_count(s, i + 1) if nxt == "(" else 0
                if got != arity[tok]:
                    problems.append(f"line {line}: '{tok}' expects {arity[tok]} argument(s), got {got}")
        if head == "let" and defining:
            arity[defining] = _arg_count(s, 2) if len(s) > 2 and s[2][1] == "(" else 0
        if head == "process":
            seen_process = True
    if not seen_process:
        problems.append("missing main process")
    return problems
