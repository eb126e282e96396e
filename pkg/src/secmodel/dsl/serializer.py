from __future__ import annotations

import json

from ..model import (
    ArchNode,
    Asset,
    Assign,
    AttackNode,
    AttackOperator,
    AuthenticityProperty,
    BinOp,
    Call,
    ChannelMap,
    ConfidentialityProperty,
    DesignBlock,
    Expr,
    KnowledgePragma,
    Link,
    Lit,
    Model,
    Receive,
    Ref,
    Requirement,
    Send,
    StateMachine,
    Task,
    TaskChannel,
    TaskMap,
    UnOp,
)

_PREC = {
    "or": 1,
    "and": 2,
    "==": 4,
    "!=": 4,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
}
_NOT_PREC = 3
_NEG_PREC = 7
_ATOM_PREC = 8


def fmt_number(v: int | float) -> str:
    if isinstance(v, bool):
        raise TypeError("boolean where a number was expected")
    return str(v) if isinstance(v, int) else repr(float(v))


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, UnOp):
        return _NOT_PREC if e.op == "not" else _NEG_PREC
    return _ATOM_PREC


def fmt_expr(e: Expr, min_prec: int = 0) -> str:
    if isinstance(e, Ref):
        s = e.name
    elif isinstance(e, Lit):
        if isinstance(e.value, bool):
            s = "true" if e.value else "false"
        else:
            s = fmt_number(e.value)
    elif isinstance(e, Call):
        s = f"{e.fn}({', '.join(fmt_expr(a) for a in e.args)})"
    elif isinstance(e, BinOp):
        p = _PREC[e.op]
        left_min = p + 1 if p == 4 else p
        s = f"{fmt_expr(e.left, left_min)} {e.op} {fmt_expr(e.right, p + 1)}"
    elif e.op == "not":
        s = f"not {fmt_expr(e.operand, _NOT_PREC)}"
    else:
        s = f"-{fmt_expr(e.operand, _NEG_PREC)}"
    return f"({s})" if _prec(e) < min_prec else s


def _action(a) -> str:
    if isinstance(a, Assign):
        return f"{a.target} = {fmt_expr(a.expr)}"
    if isinstance(a, Send):
        return f"send {a.port}({', '.join(fmt_expr(x) for x in a.args)})"
    if isinstance(a, Receive):
        return f"receive {a.port}({', '.join(a.targets)})"
    raise TypeError(a)


def _braced(head: str, lines: list[str]) -> str:
    if not lines:
        return f"{head} {{}}"
    body = "\n".join(f"  {ln}" for ln in lines)
    return f"{head} {{\n{body}\n}}"


def _traces(d) -> str:
    return f" traces {d.traces_to}" if d.traces_to else ""


def fmt_decl(d) -> str:
    if isinstance(d, Requirement):
        kind = f"kind other({json.dumps(d.kind_text or '', ensure_ascii=False)})" if d.kind == "other" else f"kind {d.kind}"
        lines = [kind]
        if d.title:
            lines.append(f"title {json.dumps(d.title, ensure_ascii=False)}")
        if d.description:
            lines.append(f"description {json.dumps(d.description, ensure_ascii=False)}")
        if d.children:
            lines.append("contains " + ", ".join(d.children))
        if d.derived_from:
            lines.append("derives " + ", ".join(d.derived_from))
        return _braced(f"requirement {d.id}", lines)
    if isinstance(d, Asset):
        return f"asset {d.name}"
    if isinstance(d, AttackNode):
        lines = [f"asset {d.asset}"]
        if d.is_root:
            lines.append("root")
        if d.label:
            lines.append(f"label {json.dumps(d.label, ensure_ascii=False)}")
        if d.linked_requirements:
            lines.append("requirements " + ", ".join(d.linked_requirements))
        if d.cross_refs:
            lines.append("xref " + ", ".join(d.cross_refs))
        return _braced(f"attack {d.id}", lines)
    if isinstance(d, AttackOperator):
        s = f"operator {d.id} {d.op} ({', '.join(d.inputs)}) -> {d.output}"
        if d.max_duration is not None:
            s += f" max_duration {fmt_number(d.max_duration)}"
        return s
    if isinstance(d, DesignBlock):
        lines = [f"attribute {a.name} : {a.type}" for a in d.attributes]
        lines += [f"method {m.name}({m.arity}) : {m.role}" for m in d.methods]
        lines += [f"port {p.name}" for p in d.ports]
        return _braced(f"block {d.name}", lines)
    if isinstance(d, Link):
        return f"link {d.block_a}.{d.port_a} <-> {d.block_b}.{d.port_b} {d.visibility}"
    if isinstance(d, StateMachine):
        lines = [f"{'initial ' if s.initial else ''}state {s.name}" for s in d.states]
        for t in d.transitions:
            head = f"transition {t.source} -> {t.target}"
            if t.guard is not None:
                head += f" when {fmt_expr(t.guard)}"
            if t.after is not None:
                head += f" after({fmt_number(t.after[0])}, {fmt_number(t.after[1])})"
            if t.actions:
                lines.append(head + " {")
                acts = [_action(a) for a in t.actions]
                lines.extend(f"  {a};" if i < len(acts) - 1 else f"  {a}" for i, a in enumerate(acts))
                lines.append("}")
            else:
                lines.append(head)
        return _braced(f"statemachine {d.owner}", lines)
    if isinstance(d, KnowledgePragma):
        kind = "InitialSystemKnowledge" if d.scope == "system" else "InitialSessionKnowledge"
        members = " ".join(f"{b}.{a}" for b, a in d.members)
        return f"pragma {kind} {members}{_traces(d)}"
    if isinstance(d, ConfidentialityProperty):
        return f"property Confidentiality {d.block}.{d.attribute}{_traces(d)}"
    if isinstance(d, AuthenticityProperty):
        return f"property Authenticity {'.'.join(d.sender)} {'.'.join(d.receiver)}{_traces(d)}"
    if isinstance(d, Task):
        return f"task {d.name} cost {fmt_number(d.exec_cost)} rate {fmt_number(d.rate)}"
    if isinstance(d, TaskChannel):
        return f"channel {d.name} {d.kind} {d.source} -> {d.target}"
    if isinstance(d, ArchNode):
        cap = f" {fmt_number(d.capacity)}" if d.capacity is not None else ""
        return f"node {d.name} {d.kind}{cap}"
    if isinstance(d, TaskMap):
        crypto = f" crypto {fmt_number(d.crypto_cycles)}" if d.crypto_cycles else ""
        return f"map task {d.task} -> {d.node}{crypto}"
    if isinstance(d, ChannelMap):
        s = f"map channel {d.channel}"
        if d.buses:
            s += " -> " + ", ".join(d.buses)
        s += f" size {fmt_number(d.message_size)} rate {fmt_number(d.rate)}"
        if d.mac_bytes:
            s += f" mac {fmt_number(d.mac_bytes)}"
        if d.memory:
            s += f" memory {d.memory}"
        return s
    raise TypeError(f"cannot serialize {type(d).__name__}")


def serialize(model_or_tree) -> str:
    """Render declarations in order; output ends with a single newline."""
    decls = model_or_tree.decls
    if not decls:
        return ""
    return "\n\n".join(fmt_decl(d) for d in decls) + "\n"


__all__ = ["serialize", "fmt_expr", "fmt_decl", "fmt_number", "Model"]
