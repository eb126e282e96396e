"""Recursive-descent parser for ``.ssec`` model files.

Declarations are keyword-led. Pragma and property declarations are
line-oriented: all their tokens must sit on the line of the leading keyword,
so the ``# Confidentiality block.attribute`` form can be pasted as-is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..diagnostics import Diagnostic, SourceSpan, error
from ..model import (
    CRYPTO_ROLES,
    NODE_KINDS,
    OPERATOR_KINDS,
    REQUIREMENT_KINDS,
    SEMANTIC_TYPES,
    Action,
    ArchNode,
    Asset,
    Assign,
    AttackNode,
    AttackOperator,
    Attribute,
    AuthenticityProperty,
    BinOp,
    Call,
    ChannelMap,
    ConfidentialityProperty,
    Decl,
    DesignBlock,
    Expr,
    KnowledgePragma,
    Link,
    Lit,
    Method,
    Model,
    Port,
    Receive,
    Ref,
    Requirement,
    Send,
    State,
    StateMachine,
    Task,
    TaskChannel,
    TaskMap,
    Transition,
    UnOp,
)
from .lexer import Token, tokenize

DECL_KEYWORDS = frozenset(
    {
        "requirement",
        "asset",
        "attack",
        "operator",
        "block",
        "link",
        "statemachine",
        "pragma",
        "property",
        "task",
        "channel",
        "node",
        "map",
    }
)
PRAGMA_KINDS = {"InitialSystemKnowledge": "system", "InitialSessionKnowledge": "session"}


@dataclass(frozen=True)
class ParseTree:
    decls: tuple[Decl, ...]
    file: str = field(default="<input>", compare=False)

    def to_model(self) -> Model:
        return Model(self.decls)


class DslError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class _Fail(Exception):
    pass


class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.file = file
        self.pos = 0
        self.diags: list[Diagnostic] = []
        self.sync = self._sync_points()

    # --- token helpers ------------------------------------------------------

    def _sync_points(self) -> list[int]:
        depth = 0
        points = []
        prev_line = 0
        for i, t in enumerate(self.toks):
            if t.kind == "PUNCT" and t.text == "{":
                depth += 1
            elif t.kind == "PUNCT" and t.text == "}":
                depth = max(0, depth - 1)
            elif depth == 0 and t.line != prev_line and (
                (t.kind == "IDENT" and t.text in DECL_KEYWORDS) or t.text == "#"
            ):
                points.append(i)
            prev_line = t.end_line
        return points

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("PUNCT", "IDENT") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "EOF":
            self.pos += 1
        return t

    def fail(self, msg: str, tok: Token | None = None) -> None:
        tok = tok or self.tok
        self.diags.append(error(tok.span(self.file), msg))
        raise _Fail

    def describe(self, t: Token) -> str:
        return "end of file" if t.kind == "EOF" else repr(t.text)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self.describe(self.tok)}")
        return self.advance()

    def ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind != "IDENT":
            self.fail(f"expected {what}, found {self.describe(t)}")
        self.advance()
        return t.text

    def number(self) -> int | float:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        t = self.tok
        if t.kind != "NUMBER":
            self.fail(f"expected number, found {self.describe(t)}")
        self.advance()
        v: int | float = int(t.text) if t.text.isdigit() else float(t.text)
        return -v if neg else v

    def string(self) -> str:
        import json

        t = self.tok
        if t.kind != "STRING":
            self.fail(f"expected string, found {self.describe(t)}")
        self.advance()
        try:
            return json.loads(t.text)
        except ValueError:
            self.fail("invalid escape in string literal", t)
            raise

    def idlist(self) -> tuple[str, ...]:
        items = [self.ident()]
        while self.at(","):
            self.advance()
            items.append(self.ident())
        return tuple(items)

    def span_from(self, start: Token) -> SourceSpan:
        last = self.toks[max(self.pos - 1, 0)]
        return SourceSpan(self.file, start.line, start.col, last.end_line, last.end_col)

    # --- top level ----------------------------------------------------------

    def parse(self) -> list[Decl]:
        decls: list[Decl] = []
        while self.tok.kind != "EOF":
            start = self.pos
            try:
                decls.append(self.decl())
            except _Fail:
                nxt = next((p for p in self.sync if p > start), len(self.toks) - 1)
                self.pos = nxt
        return decls

    def decl(self) -> Decl:
        t = self.tok
        if t.text == "#":
            return self.pragma_line(t)
        if t.kind != "IDENT" or t.text not in DECL_KEYWORDS:
            self.fail(f"expected a declaration, found {self.describe(t)}")
        return getattr(self, f"d_{t.text}")(self.advance())

    def d_requirement(self, start: Token) -> Requirement:
        rid = self.ident("requirement id")
        fields: dict = {}
        seen: set[str] = set()
        self.expect("{")
        while not self.at("}"):
            key_tok = self.tok
            key = self.ident("requirement field")
            if key in seen:
                self.fail(f"field {key!r} given twice", key_tok)
            seen.add(key)
            if key == "kind":
                kind_tok = self.tok
                kind = self.ident("requirement kind")
                if kind not in REQUIREMENT_KINDS:
                    self.fail(f"unknown requirement kind {kind!r}", kind_tok)
                fields["kind"] = kind
                if kind == "other":
                    self.expect("(")
                    fields["kind_text"] = self.string()
                    self.expect(")")
            elif key in ("title", "description"):
                fields[key] = self.string()
            elif key == "contains":
                fields["children"] = self.idlist()
            elif key == "derives":
                fields["derived_from"] = self.idlist()
            else:
                self.fail(f"unknown requirement field {key!r}", key_tok)
        self.expect("}")
        return Requirement(rid, span=self.span_from(start), **fields)

    def d_asset(self, start: Token) -> Asset:
        return Asset(self.ident("asset name"), span=self.span_from(start))

    def d_attack(self, start: Token) -> AttackNode:
        aid = self.ident("attack id")
        fields: dict = {}
        seen: set[str] = set()
        self.expect("{")
        while not self.at("}"):
            key_tok = self.tok
            key = self.ident("attack field")
            if key in seen:
                self.fail(f"field {key!r} given twice", key_tok)
            seen.add(key)
            if key == "asset":
                fields["asset"] = self.ident("asset name")
            elif key == "label":
                fields["label"] = self.string()
            elif key == "root":
                fields["is_root"] = True
            elif key == "requirements":
                fields["linked_requirements"] = self.idlist()
            elif key == "xref":
                fields["cross_refs"] = self.idlist()
            else:
                self.fail(f"unknown attack field {key!r}", key_tok)
        close = self.expect("}")
        if "asset" not in fields:
            self.fail(f"attack {aid!r} has no asset", close)
        return AttackNode(aid, span=self.span_from(start), **fields)

    def d_operator(self, start: Token) -> AttackOperator:
        oid = self.ident("operator id")
        op_tok = self.tok
        op = self.ident("operator kind")
        if op not in OPERATOR_KINDS:
            self.fail(f"unknown operator {op!r}; expected one of {', '.join(OPERATOR_KINDS)}", op_tok)
        self.expect("(")
        inputs = self.idlist()
        self.expect(")")
        self.expect("->")
        output = self.ident("output attack")
        duration = None
        if self.at("max_duration"):
            self.advance()
            duration = self.number()
        return AttackOperator(oid, op, inputs, output, duration, span=self.span_from(start))

    def d_block(self, start: Token) -> DesignBlock:
        name = self.ident("block name")
        attrs: list[Attribute] = []
        methods: list[Method] = []
        ports: list[Port] = []
        self.expect("{")
        while not self.at("}"):
            item = self.tok
            key = self.ident("block member")
            if key == "attribute":
                aname = self.ident("attribute name")
                self.expect(":")
                ty_tok = self.tok
                ty = self.ident("attribute type")
                if ty not in SEMANTIC_TYPES:
                    self.fail(f"unknown attribute type {ty!r}", ty_tok)
                attrs.append(Attribute(aname, ty, span=self.span_from(item)))
            elif key == "method":
                mname = self.ident("method name")
                self.expect("(")
                ar_tok = self.tok
                arity = self.number()
                if not isinstance(arity, int) or arity < 0:
                    self.fail("method arity must be a non-negative integer", ar_tok)
                self.expect(")")
                self.expect(":")
                role_tok = self.tok
                role = self.ident("crypto role")
                if role not in CRYPTO_ROLES:
                    self.fail(f"unknown method role {role!r}", role_tok)
                methods.append(Method(mname, arity, role, span=self.span_from(item)))
            elif key == "port":
                ports.append(Port(self.ident("port name"), span=self.span_from(item)))
            else:
                self.fail(f"unknown block member {key!r}", item)
        self.expect("}")
        return DesignBlock(name, tuple(attrs), tuple(methods), tuple(ports), span=self.span_from(start))

    def d_link(self, start: Token) -> Link:
        ba = self.ident("block name")
        self.expect(".")
        pa = self.ident("port name")
        self.expect("<->")
        bb = self.ident("block name")
        self.expect(".")
        pb = self.ident("port name")
        vis_tok = self.tok
        vis = self.ident("'public' or 'private'")
        if vis not in ("public", "private"):
            self.fail(f"link visibility must be 'public' or 'private', found {vis!r}", vis_tok)
        return Link(ba, pa, bb, pb, vis, span=self.span_from(start))

    def d_statemachine(self, start: Token) -> StateMachine:
        owner = self.ident("block name")
        states: list[State] = []
        transitions: list[Transition] = []
        self.expect("{")
        while not self.at("}"):
            item = self.tok
            if self.at("initial") or self.at("state"):
                initial = False
                if self.at("initial"):
                    self.advance()
                    initial = True
                self.expect("state")
                states.append(State(self.ident("state name"), initial, span=self.span_from(item)))
            elif self.at("transition"):
                self.advance()
                transitions.append(self.transition(item))
            else:
                self.fail(f"expected 'state' or 'transition', found {self.describe(item)}")
        self.expect("}")
        return StateMachine(owner, tuple(states), tuple(transitions), span=self.span_from(start))

    def transition(self, start: Token) -> Transition:
        src = self.ident("source state")
        self.expect("->")
        dst = self.ident("target state")
        guard = None
        after = None
        actions: list[Action] = []
        if self.at("when"):
            self.advance()
            guard = self.expr()
        if self.at("after"):
            self.advance()
            self.expect("(")
            lo = self.number()
            self.expect(",")
            hi = self.number()
            self.expect(")")
            after = (lo, hi)
        if self.at("{"):
            self.advance()
            while not self.at("}"):
                actions.append(self.action())
                if self.at(";"):
                    self.advance()
                elif not self.at("}"):
                    self.fail(f"expected ';' or '}}', found {self.describe(self.tok)}")
            self.expect("}")
        return Transition(src, dst, guard, after, tuple(actions), span=self.span_from(start))

    def action(self) -> Action:
        t = self.tok
        if t.kind == "IDENT" and t.text in ("send", "receive") and self.peek().text != "=":
            self.advance()
            port = self.ident("port name")
            self.expect("(")
            if t.text == "send":
                args = [self.expr()]
                while self.at(","):
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                return Send(port, tuple(args))
            targets = self.idlist()
            self.expect(")")
            return Receive(port, targets)
        target = self.ident("attribute or action")
        self.expect("=")
        return Assign(target, self.expr())

    # --- expressions --------------------------------------------------------

    def expr(self) -> Expr:
        left = self.and_expr()
        while self.at("or"):
            self.advance()
            left = BinOp("or", left, self.and_expr())
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self.at("and"):
            self.advance()
            left = BinOp("and", left, self.not_expr())
        return left

    def not_expr(self) -> Expr:
        if self.at("not"):
            self.advance()
            return UnOp("not", self.not_expr())
        return self.cmp_expr()

    def cmp_expr(self) -> Expr:
        left = self.add_expr()
        if self.tok.kind == "PUNCT" and self.tok.text in ("==", "!=", "<", "<=", ">", ">="):
            op = self.advance().text
            left = BinOp(op, left, self.add_expr())
        return left

    def add_expr(self) -> Expr:
        left = self.mul_expr()
        while self.tok.kind == "PUNCT" and self.tok.text in ("+", "-"):
            op = self.advance().text
            left = BinOp(op, left, self.mul_expr())
        return left

    def mul_expr(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "PUNCT" and self.tok.text in ("*", "/"):
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.at("-"):
            self.advance()
            return UnOp("-", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "NUMBER":
            return Lit(self.number())
        if t.kind == "IDENT" and t.text in ("true", "false"):
            self.advance()
            return Lit(t.text == "true")
        if t.kind == "IDENT":
            self.advance()
            if self.at("("):
                self.advance()
                args: list[Expr] = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.expr())
                self.expect(")")
                return Call(t.text, tuple(args))
            return Ref(t.text)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.fail(f"expected expression, found {self.describe(t)}")
        raise AssertionError

    # --- pragmas and properties (line-oriented) -----------------------------

    def d_pragma(self, start: Token) -> Decl:
        return self.pragma_line(start, want="pragma")

    def d_property(self, start: Token) -> Decl:
        return self.pragma_line(start, want="property")

    def pragma_line(self, start: Token, want: str | None = None) -> Decl:
        if start.text == "#":
            self.advance()
        line = start.line

        def on_line() -> bool:
            return self.tok.kind != "EOF" and self.tok.line == line

        def dotted(n: int) -> tuple[str, ...]:
            parts = []
            for i in range(n):
                if i:
                    self.expect(".")
                if not on_line():
                    self.fail("pragma continues past the end of its line")
                parts.append(self.ident())
            if self.at(".") and on_line():
                self.fail(f"expected a reference with {n} parts")
            return tuple(parts)

        if not on_line():
            self.fail("pragma keyword must be followed by its kind on the same line")
        kind_tok = self.tok
        kind = self.ident("pragma kind")
        if kind in PRAGMA_KINDS:
            if want == "property":
                self.fail(f"{kind} is a pragma, not a property", kind_tok)
            members = []
            while on_line() and self.tok.kind == "IDENT" and self.tok.text != "traces":
                members.append(dotted(2))
            if not members:
                self.fail(f"{kind} needs at least one Block.attribute member")
            decl: Decl = KnowledgePragma(PRAGMA_KINDS[kind], tuple(members))
        elif kind == "Confidentiality":
            if want == "pragma":
                self.fail("Confidentiality is a property, not a pragma", kind_tok)
            b, a = dotted(2)
            decl = ConfidentialityProperty(b, a)
        elif kind == "Authenticity":
            if want == "pragma":
                self.fail("Authenticity is a property, not a pragma", kind_tok)
            sender = dotted(3)
            receiver = dotted(3)
            decl = AuthenticityProperty(sender, receiver)
        else:
            self.fail(f"unknown pragma {kind!r}", kind_tok)
            raise AssertionError
        traces = None
        if on_line() and self.at("traces"):
            self.advance()
            if not on_line():
                self.fail("expected requirement id after 'traces'")
            traces = self.ident("requirement id")
        if on_line():
            self.fail(f"unexpected {self.describe(self.tok)} after pragma")
        return _with(decl, traces_to=traces, span=self.span_from(start))

    # --- partitioning -------------------------------------------------------

    def d_task(self, start: Token) -> Task:
        name = self.ident("task name")
        self.expect("cost")
        cost = self.number()
        self.expect("rate")
        rate = self.number()
        return Task(name, cost, rate, span=self.span_from(start))

    def d_channel(self, start: Token) -> TaskChannel:
        name = self.ident("channel name")
        kind_tok = self.tok
        kind = self.ident("'data' or 'event'")
        if kind not in ("data", "event"):
            self.fail(f"channel kind must be 'data' or 'event', found {kind!r}", kind_tok)
        src = self.ident("source task")
        self.expect("->")
        dst = self.ident("target task")
        return TaskChannel(name, kind, src, dst, span=self.span_from(start))

    def d_node(self, start: Token) -> ArchNode:
        name = self.ident("node name")
        kind_tok = self.tok
        kind = self.ident("node kind")
        if kind not in NODE_KINDS:
            self.fail(f"unknown node kind {kind!r}", kind_tok)
        capacity = None
        if self.tok.kind == "NUMBER" or self.at("-"):
            capacity = self.number()
        return ArchNode(name, kind, capacity, span=self.span_from(start))

    def d_map(self, start: Token) -> Decl:
        what_tok = self.tok
        what = self.ident("'task' or 'channel'")
        if what == "task":
            task = self.ident("task name")
            self.expect("->")
            node = self.ident("node name")
            crypto: int | float = 0
            if self.at("crypto"):
                self.advance()
                crypto = self.number()
            return TaskMap(task, node, crypto, span=self.span_from(start))
        if what == "channel":
            ch = self.ident("channel name")
            buses: tuple[str, ...] = ()
            if self.at("->"):
                self.advance()
                buses = self.idlist()
            self.expect("size")
            size = self.number()
            self.expect("rate")
            rate = self.number()
            mac: int | float = 0
            memory = None
            if self.at("mac"):
                self.advance()
                mac = self.number()
            if self.at("memory"):
                self.advance()
                memory = self.ident("memory node")
            return ChannelMap(ch, buses, size, rate, mac, memory, span=self.span_from(start))
        self.fail(f"expected 'task' or 'channel' after 'map', found {what!r}", what_tok)
        raise AssertionError


def _with(decl, **changes):
    from dataclasses import replace

    return replace(decl, **changes)


def parse(text: str, file: str | Path = "<input>") -> ParseTree:
    """Parse one source file. Raises :class:`DslError` carrying all diagnostics."""
    file = str(file)
    tokens, diags = tokenize(text, file)
    p = _Parser(tokens, file)
    decls = p.parse()
    diags = diags + p.diags
    if not diags:
        from ..validate import duplicate_diagnostics

        diags = duplicate_diagnostics(decls)
    if diags:
        raise DslError(sorted(diags))
    return ParseTree(tuple(decls), file)


def parse_file(path: str | Path) -> ParseTree:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        span = SourceSpan(str(path), 1, 1, 1, 1)
        raise DslError([error(span, f"cannot read file: {exc.strerror or exc}")]) from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        span = SourceSpan(str(path), 1, 1, 1, 1)
        raise DslError([error(span, f"file is not valid UTF-8: {exc.reason}")]) from None
    return parse(text, path)


def load_model(paths) -> Model:
    """Parse and merge several files into one model (declaration order preserved)."""
    decls: list[Decl] = []
    diags: list[Diagnostic] = []
    for p in paths:
        try:
            decls.extend(parse_file(p).decls)
        except DslError as exc:
            diags.extend(exc.diagnostics)
    if diags:
        raise DslError(diags)
    return Model(tuple(decls))
