"""Symbolic abstraction of the design view.

Timing (``after``) is dropped; arithmetic, comparisons, literals and plain
methods become public one-way ``combK`` terms or ``lit_*`` constants; crypto
methods become constructor or destructor terms. A guard is kept only when it
can be decided on symbolic terms (``verify_*`` calls and syntactic equality,
combined with and/or/not); any other guard is erased, which lets the
transition fire whatever the concrete values would be.

The guard of a transition is evaluated after its leading ``receive`` actions,
so a guard may inspect the message just received.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..diagnostics import Diagnostic, SourceSpan, error
from ..model import (
    Assign,
    AuthenticityProperty,
    BinOp,
    Call,
    ConfidentialityProperty,
    DesignBlock,
    Expr,
    Lit,
    Model,
    Receive,
    Ref,
    Send,
    UnOp,
)
from ..terms import App, Name, Term, Var, comb_name, tuple_term

PUBLIC_CHANNEL = "ch"
ATTACKER_NAME = Name("attacker_n", fresh=False)


class AbstractionError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


# --- guard conditions -------------------------------------------------------


@dataclass(frozen=True)
class CEq:
    left: Term
    right: Term


@dataclass(frozen=True)
class CNot:
    cond: Cond


@dataclass(frozen=True)
class CAnd:
    conds: tuple[Cond, ...]


@dataclass(frozen=True)
class COr:
    conds: tuple[Cond, ...]


Cond = Union[CEq, CNot, CAnd, COr]


def cond_vars(c) -> set[str]:
    if isinstance(c, CEq):
        return term_vars(c.left) | term_vars(c.right)
    if isinstance(c, CNot):
        return cond_vars(c.cond)
    return set().union(*(cond_vars(x) for x in c.conds))


def term_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.id}
    if isinstance(t, App):
        return set().union(*(term_vars(a) for a in t.args)) if t.args else set()
    return set()


# --- abstract actions -------------------------------------------------------


@dataclass(frozen=True)
class ARecv:
    channel: str
    public: bool
    port: str
    targets: tuple[str, ...]


@dataclass(frozen=True)
class AAssign:
    target: str
    term: Term


@dataclass(frozen=True)
class ASend:
    channel: str
    public: bool
    port: str
    term: Term


@dataclass(frozen=True)
class AGuard:
    cond: Cond


@dataclass(frozen=True)
class AEvent:
    name: str
    term: Term


AAction = Union[ARecv, AAssign, ASend, AGuard, AEvent]


@dataclass(frozen=True)
class AbstractTransition:
    index: int
    source: str
    target: str
    actions: tuple[AAction, ...]
    guard_erased: bool = False
    timing_dropped: bool = False

    @property
    def label(self) -> str:
        return f"{self.source}->{self.target}#{self.index}"

    @property
    def receives(self) -> list[ARecv]:
        return [a for a in self.actions if isinstance(a, ARecv)]


@dataclass(frozen=True)
class AbstractBlock:
    name: str
    initial: str
    states: tuple[str, ...]
    attributes: tuple[tuple[str, str], ...]
    transitions: tuple[AbstractTransition, ...]

    def outgoing(self, state: str) -> list[AbstractTransition]:
        return [t for t in self.transitions if t.source == state]

    @property
    def attr_names(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.attributes)


@dataclass(frozen=True)
class Channel:
    name: str
    public: bool
    sender: tuple[str, str] | None = None
    receiver: tuple[str, str] | None = None


@dataclass(frozen=True)
class InitialName:
    """How an attribute's initial value is created."""

    scope: str  # "system" | "session" | "fresh"
    id: str


@dataclass(frozen=True)
class EventSpec:
    name: str
    kind: str  # "send" | "accept"
    block: str
    state: str
    attribute: str


@dataclass(frozen=True)
class AbstractQuery:
    label: str
    kind: str  # "confidentiality" | "authenticity"
    block: str = ""
    attribute: str = ""
    send_event: str = ""
    accept_event: str = ""
    span: SourceSpan | None = None


@dataclass
class AbstractDesign:
    blocks: tuple[AbstractBlock, ...]
    channels: dict[str, Channel]
    initial: dict[tuple[str, str], InitialName]
    literals: tuple[Name, ...]
    comb_arities: tuple[int, ...]
    events: tuple[EventSpec, ...]
    queries: tuple[AbstractQuery, ...]
    notes: list[str] = field(default_factory=list)

    def block(self, name: str) -> AbstractBlock:
        return next(b for b in self.blocks if b.name == name)

    def names_of(self, scope: str) -> list[str]:
        return sorted({n.id for n in self.initial.values() if n.scope == scope})


# --- expression translation -------------------------------------------------

_CRYPTO_CTOR = {
    "encrypt": "senc",
    "decrypt": "sdec",
    "aencrypt": "aenc",
    "adecrypt": "adec",
    "pk": "pk",
    "sign": "sign",
    "mac": "mac",
    "hash": "hash",
}


def literal_name(value) -> Name:
    if isinstance(value, bool):
        text = "true" if value else "false"
    else:
        text = str(value).replace("-", "m").replace(".", "_").replace("+", "")
    return Name(f"lit_{text}", fresh=False)


class _Translator:
    def __init__(self, block: DesignBlock):
        self.block = block
        self.literals: set[Name] = set()
        self.combs: set[int] = set()

    def comb(self, args: list[Term]) -> Term:
        self.combs.add(len(args))
        return App(comb_name(len(args)), args)

    def term(self, e: Expr) -> Term:
        if isinstance(e, Ref):
            return Var(e.name)
        if isinstance(e, Lit):
            n = literal_name(e.value)
            self.literals.add(n)
            return n
        if isinstance(e, Call):
            args = [self.term(a) for a in e.args]
            m = self.block.method(e.fn)
            role = m.role if m else "plain"
            if role in _CRYPTO_CTOR:
                return App(_CRYPTO_CTOR[role], args)
            # verify_* in value position and plain methods are opaque
            return self.comb(args)
        if isinstance(e, BinOp):
            return self.comb([self.term(e.left), self.term(e.right)])
        return self.comb([self.term(e.operand)])

    def cond(self, e: Expr):
        """A decidable condition, or ``None`` when the guard must be erased."""
        if isinstance(e, Call):
            m = self.block.method(e.fn)
            if m and m.role == "verify_mac":
                msg, key, tag = (self.term(a) for a in e.args)
                return CEq(App("mac", (msg, key)), tag)
            if m and m.role == "verify_sign":
                msg, sig, pub = (self.term(a) for a in e.args)
                return CEq(App("checksign", (sig, pub)), msg)
            return None
        if isinstance(e, BinOp) and e.op in ("==", "!="):
            if _symbolic(e.left, self.block) and _symbolic(e.right, self.block):
                c = CEq(self.term(e.left), self.term(e.right))
                return c if e.op == "==" else CNot(c)
            return None
        if isinstance(e, BinOp) and e.op == "and":
            parts = [self.cond(x) for x in (e.left, e.right)]
            kept = tuple(p for p in parts if p is not None)
            # an erased conjunct is treated as true
            return None if not kept else kept[0] if len(kept) == 1 else CAnd(kept)
        if isinstance(e, BinOp) and e.op == "or":
            parts = [self.cond(x) for x in (e.left, e.right)]
            return None if any(p is None for p in parts) else COr(tuple(parts))
        if isinstance(e, UnOp) and e.op == "not":
            inner = self.cond(e.operand)
            return None if inner is None else CNot(inner)
        return None


def _symbolic(e: Expr, block: DesignBlock) -> bool:
    """Terms whose syntactic equality is meaningful: refs and crypto calls over them."""
    if isinstance(e, Ref):
        return True
    if isinstance(e, Call):
        m = block.method(e.fn)
        return bool(m) and m.role in _CRYPTO_CTOR and all(_symbolic(a, block) for a in e.args)
    return False


# --- design abstraction -----------------------------------------------------


def _channels(model: Model):
    """Map (block, port) -> (outgoing channel, incoming channel)."""
    chans: dict[str, Channel] = {PUBLIC_CHANNEL: Channel(PUBLIC_CHANNEL, True)}
    ends: dict[tuple[str, str], tuple[str, str]] = {}
    for ln in model.links:
        a, b = ln.endpoints
        if ln.visibility == "public":
            ends[a] = ends[b] = (PUBLIC_CHANNEL, PUBLIC_CHANNEL)
            continue
        ab = f"c__{a[0]}_{a[1]}__{b[0]}_{b[1]}"
        ba = f"c__{b[0]}_{b[1]}__{a[0]}_{a[1]}"
        chans[ab] = Channel(ab, False, a, b)
        chans[ba] = Channel(ba, False, b, a)
        ends[a] = (ab, ba)
        ends[b] = (ba, ab)
    return chans, ends


def _initial_names(model: Model) -> dict[tuple[str, str], InitialName]:
    init: dict[tuple[str, str], InitialName] = {}
    for b in model.blocks:
        for a in b.attributes:
            init[(b.name, a.name)] = InitialName("fresh", f"{b.name}__{a.name}")
    for p in model.pragmas:
        b0, a0 = p.members[0]
        scope = "system" if p.scope == "system" else "session"
        for m in p.members:
            init[m] = InitialName(scope, f"{b0}__{a0}")
    return init


def _written(machine) -> set[str]:
    out: set[str] = set()
    for t in machine.transitions if machine else ():
        for a in t.actions:
            if isinstance(a, Assign):
                out.add(a.target)
            elif isinstance(a, Receive):
                out.update(a.targets)
    return out


def send_event_name(block: str, state: str, attr: str) -> str:
    return f"authSend__{block}__{state}__{attr}"


def accept_event_name(block: str, state: str, attr: str) -> str:
    return f"authAccept__{block}__{state}__{attr}"


def abstract_design(model: Model) -> AbstractDesign:
    chans, ends = _channels(model)
    init = _initial_names(model)
    errs: list[Diagnostic] = []

    send_events: dict[tuple[str, str], set[str]] = {}
    accept_events: dict[tuple[str, str], set[str]] = {}
    events: dict[str, EventSpec] = {}
    queries: list[AbstractQuery] = []
    for p in model.properties:
        if isinstance(p, ConfidentialityProperty):
            if p.attribute in _written(model.machine(p.block)):
                errs.append(
                    error(
                        p.span,
                        f"{p.label}: '{p.block}.{p.attribute}' is overwritten by an assignment or receive, "
                        "so the abstraction has no single name to protect; declare a separate attribute for "
                        "the secret and keep it read-only",
                    )
                )
                continue
            queries.append(AbstractQuery(p.label, "confidentiality", p.block, p.attribute, span=p.span))
        elif isinstance(p, AuthenticityProperty):
            (b1, s1, m1), (b2, s2, m2) = p.sender, p.receiver
            se, ae = send_event_name(b1, s1, m1), accept_event_name(b2, s2, m2)
            events.setdefault(se, EventSpec(se, "send", b1, s1, m1))
            events.setdefault(ae, EventSpec(ae, "accept", b2, s2, m2))
            send_events.setdefault((b1, s1), set()).add(m1)
            accept_events.setdefault((b2, s2), set()).add(m2)
            queries.append(AbstractQuery(p.label, "authenticity", send_event=se, accept_event=ae, span=p.span))
    if errs:
        raise AbstractionError(errs)

    literals: set[Name] = set()
    combs: set[int] = set()
    blocks: list[AbstractBlock] = []
    notes: list[str] = []
    for blk in model.blocks:
        sm = model.machine(blk.name)
        if sm is None:
            continue
        tr = _Translator(blk)
        out: list[AbstractTransition] = []
        for i, t in enumerate(sm.transitions):
            acts: list = []
            lead = 0
            while lead < len(t.actions) and isinstance(t.actions[lead], Receive):
                lead += 1
            cond = tr.cond(t.guard) if t.guard is not None else None
            for j, a in enumerate(t.actions):
                if j == lead and cond is not None:
                    acts.append(AGuard(cond))
                if isinstance(a, Receive):
                    ch = ends.get((blk.name, a.port), (PUBLIC_CHANNEL, PUBLIC_CHANNEL))[1]
                    acts.append(ARecv(ch, chans[ch].public, a.port, a.targets))
                elif isinstance(a, Assign):
                    acts.append(AAssign(a.target, tr.term(a.expr)))
                elif isinstance(a, Send):
                    ch = ends.get((blk.name, a.port), (PUBLIC_CHANNEL, PUBLIC_CHANNEL))[0]
                    for m in sorted(send_events.get((blk.name, t.source), ())):
                        if Ref(m) in a.args:
                            acts.append(AEvent(send_event_name(blk.name, t.source, m), Var(m)))
                    payload = tuple_term([tr.term(x) for x in a.args])
                    acts.append(ASend(ch, chans[ch].public, a.port, payload))
                else:
                    raise TypeError(f"unsupported action {a!r}")
            if lead == len(t.actions) and cond is not None:
                acts.append(AGuard(cond))
            received = {x for a in t.actions if isinstance(a, Receive) for x in a.targets}
            for m in sorted(accept_events.get((blk.name, t.target), ())):
                if m in received:
                    acts.append(AEvent(accept_event_name(blk.name, t.target, m), Var(m)))
            erased = t.guard is not None and cond is None
            if erased:
                notes.append(f"{blk.name}: guard on {t.source}->{t.target} is not symbolic; branching is nondeterministic")
            out.append(AbstractTransition(i, t.source, t.target, tuple(acts), erased, t.after is not None))
        literals |= tr.literals
        combs |= tr.combs
        blocks.append(
            AbstractBlock(
                blk.name,
                sm.initial_states[0],
                tuple(s.name for s in sm.states),
                tuple((a.name, a.type) for a in blk.attributes),
                tuple(out),
            )
        )

    return AbstractDesign(
        blocks=tuple(blocks),
        channels=chans,
        initial=init,
        literals=tuple(sorted(literals, key=lambda n: n.id)),
        comb_arities=tuple(sorted(combs)),
        events=tuple(events[k] for k in sorted(events)),
        queries=tuple(queries),
        notes=notes,
    )
