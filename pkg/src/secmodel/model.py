"""In-memory model: requirements, attack graphs, partitioning and security design.

All element types are frozen dataclasses. Source spans never take part in
equality, so two models are structurally equal iff their declarations are.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

from .diagnostics import NO_SPAN, SourceSpan

REQUIREMENT_KINDS = (
    "functional",
    "confidentiality",
    "access_control",
    "integrity",
    "freshness",
    "authenticity",
    "anonymity",
    "other",
)
OPERATOR_KINDS = ("OR", "AND", "SEQUENCE", "BEFORE", "AFTER")
SEMANTIC_TYPES = ("data", "key", "nonce", "bool", "int")
CRYPTO_ROLES = (
    "encrypt",
    "decrypt",
    "aencrypt",
    "adecrypt",
    "pk",
    "sign",
    "verify_sign",
    "mac",
    "verify_mac",
    "hash",
    "plain",
)
# arity demanded by each crypto role; plain methods take any arity
ROLE_ARITY = {
    "encrypt": 2,
    "decrypt": 2,
    "aencrypt": 2,
    "adecrypt": 2,
    "pk": 1,
    "sign": 2,
    "verify_sign": 3,
    "mac": 2,
    "verify_mac": 3,
    "hash": 1,
}
NODE_KINDS = ("cpu", "hw_accelerator", "bus", "memory")
EXEC_KINDS = ("cpu", "hw_accelerator")


def _span() -> SourceSpan:
    return field(default=NO_SPAN, compare=False, repr=False)


# --- requirements -----------------------------------------------------------


@dataclass(frozen=True)
class Requirement:
    id: str
    title: str = ""
    kind: str = "functional"
    kind_text: str | None = None  # only for kind == "other"
    description: str = ""
    children: tuple[str, ...] = ()
    derived_from: tuple[str, ...] = ()
    span: SourceSpan = _span()

    @property
    def is_security(self) -> bool:
        return self.kind != "functional"


# --- attacks ----------------------------------------------------------------


@dataclass(frozen=True)
class Asset:
    name: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class AttackNode:
    id: str
    asset: str
    label: str = ""
    is_root: bool = False
    linked_requirements: tuple[str, ...] = ()
    cross_refs: tuple[str, ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class AttackOperator:
    id: str
    op: str
    inputs: tuple[str, ...]
    output: str
    max_duration: float | int | None = None
    span: SourceSpan = _span()


# --- expressions and actions ------------------------------------------------


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Lit:
    value: int | float | bool


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class UnOp:
    op: str  # "-" or "not"
    operand: Expr


Expr = Union[Ref, Lit, Call, BinOp, UnOp]

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("and", "or")


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr


@dataclass(frozen=True)
class Send:
    port: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Receive:
    port: str
    targets: tuple[str, ...]


Action = Union[Assign, Send, Receive]


def expr_refs(e: Expr) -> list[str]:
    if isinstance(e, Ref):
        return [e.name]
    if isinstance(e, Lit):
        return []
    if isinstance(e, Call):
        return [r for a in e.args for r in expr_refs(a)]
    if isinstance(e, BinOp):
        return expr_refs(e.left) + expr_refs(e.right)
    return expr_refs(e.operand)


def expr_calls(e: Expr) -> list[Call]:
    if isinstance(e, Call):
        return [e] + [c for a in e.args for c in expr_calls(a)]
    if isinstance(e, BinOp):
        return expr_calls(e.left) + expr_calls(e.right)
    if isinstance(e, UnOp):
        return expr_calls(e.operand)
    return []


# --- design -----------------------------------------------------------------


@dataclass(frozen=True)
class Attribute:
    name: str
    type: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Method:
    name: str
    arity: int
    role: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Port:
    name: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class DesignBlock:
    name: str
    attributes: tuple[Attribute, ...] = ()
    methods: tuple[Method, ...] = ()
    ports: tuple[Port, ...] = ()
    span: SourceSpan = _span()

    def attribute(self, name: str) -> Attribute | None:
        return next((a for a in self.attributes if a.name == name), None)

    def method(self, name: str) -> Method | None:
        return next((m for m in self.methods if m.name == name), None)

    def has_port(self, name: str) -> bool:
        return any(p.name == name for p in self.ports)


@dataclass(frozen=True)
class Link:
    block_a: str
    port_a: str
    block_b: str
    port_b: str
    visibility: str = "public"
    span: SourceSpan = _span()

    @property
    def endpoints(self) -> tuple[tuple[str, str], tuple[str, str]]:
        return (self.block_a, self.port_a), (self.block_b, self.port_b)

    @property
    def id(self) -> str:
        return f"{self.block_a}__{self.port_a}__{self.block_b}__{self.port_b}"


@dataclass(frozen=True)
class State:
    name: str
    initial: bool = False
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: Expr | None = None
    after: tuple[float | int, float | int] | None = None
    actions: tuple[Action, ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class StateMachine:
    owner: str
    states: tuple[State, ...] = ()
    transitions: tuple[Transition, ...] = ()
    span: SourceSpan = _span()

    @property
    def initial_states(self) -> list[str]:
        return [s.name for s in self.states if s.initial]

    def outgoing(self, state: str) -> list[tuple[int, Transition]]:
        return [(i, t) for i, t in enumerate(self.transitions) if t.source == state]


# --- pragmas and properties -------------------------------------------------


@dataclass(frozen=True)
class KnowledgePragma:
    scope: str  # "system" | "session"
    members: tuple[tuple[str, str], ...]
    traces_to: str | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ConfidentialityProperty:
    block: str
    attribute: str
    traces_to: str | None = None
    span: SourceSpan = _span()

    @property
    def label(self) -> str:
        return f"Confidentiality {self.block}.{self.attribute}"


@dataclass(frozen=True)
class AuthenticityProperty:
    sender: tuple[str, str, str]
    receiver: tuple[str, str, str]
    traces_to: str | None = None
    span: SourceSpan = _span()

    @property
    def label(self) -> str:
        return "Authenticity {} {}".format(".".join(self.sender), ".".join(self.receiver))


Property = Union[ConfidentialityProperty, AuthenticityProperty]


# --- partitioning -----------------------------------------------------------


@dataclass(frozen=True)
class Task:
    name: str
    exec_cost: float | int
    rate: float | int
    span: SourceSpan = _span()


@dataclass(frozen=True)
class TaskChannel:
    """A data or event flow between two tasks of the application model."""

    name: str
    kind: str  # "data" | "event"
    source: str
    target: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ArchNode:
    name: str
    kind: str
    capacity: float | int | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class TaskMap:
    task: str
    node: str
    crypto_cycles: float | int = 0
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ChannelMap:
    channel: str
    buses: tuple[str, ...]
    message_size: float | int
    rate: float | int
    mac_bytes: float | int = 0
    memory: str | None = None
    span: SourceSpan = _span()


Decl = Union[
    Requirement,
    Asset,
    AttackNode,
    AttackOperator,
    DesignBlock,
    Link,
    StateMachine,
    KnowledgePragma,
    ConfidentialityProperty,
    AuthenticityProperty,
    Task,
    TaskChannel,
    ArchNode,
    TaskMap,
    ChannelMap,
]


@dataclass(frozen=True)
class Model:
    """Root container; ``decls`` keeps declaration order for serialization."""

    decls: tuple[Decl, ...] = ()

    @classmethod
    def merge(cls, *parts: Model) -> Model:
        return cls(tuple(d for p in parts for d in p.decls))

    def _of(self, kind) -> tuple:
        return tuple(d for d in self.decls if isinstance(d, kind))

    @cached_property
    def requirements(self) -> tuple[Requirement, ...]:
        return self._of(Requirement)

    @cached_property
    def assets(self) -> tuple[Asset, ...]:
        return self._of(Asset)

    @cached_property
    def attacks(self) -> tuple[AttackNode, ...]:
        return self._of(AttackNode)

    @cached_property
    def operators(self) -> tuple[AttackOperator, ...]:
        return self._of(AttackOperator)

    @cached_property
    def blocks(self) -> tuple[DesignBlock, ...]:
        return self._of(DesignBlock)

    @cached_property
    def links(self) -> tuple[Link, ...]:
        return self._of(Link)

    @cached_property
    def machines(self) -> tuple[StateMachine, ...]:
        return self._of(StateMachine)

    @cached_property
    def pragmas(self) -> tuple[KnowledgePragma, ...]:
        return self._of(KnowledgePragma)

    @cached_property
    def properties(self) -> tuple[Property, ...]:
        return self._of((ConfidentialityProperty, AuthenticityProperty))

    @cached_property
    def tasks(self) -> tuple[Task, ...]:
        return self._of(Task)

    @cached_property
    def task_channels(self) -> tuple[TaskChannel, ...]:
        return self._of(TaskChannel)

    @cached_property
    def nodes(self) -> tuple[ArchNode, ...]:
        return self._of(ArchNode)

    @cached_property
    def task_maps(self) -> tuple[TaskMap, ...]:
        return self._of(TaskMap)

    @cached_property
    def channel_maps(self) -> tuple[ChannelMap, ...]:
        return self._of(ChannelMap)

    def block(self, name: str) -> DesignBlock | None:
        return next((b for b in self.blocks if b.name == name), None)

    def machine(self, owner: str) -> StateMachine | None:
        return next((m for m in self.machines if m.owner == owner), None)

    def requirement(self, rid: str) -> Requirement | None:
        return next((r for r in self.requirements if r.id == rid), None)
