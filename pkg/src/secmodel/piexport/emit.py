"""Typed ProVerif 2.x output for an abstract design."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..model import Model
from ..terms import App, Name, Term, Var, comb_name
from .abstract import (
    PUBLIC_CHANNEL,
    AAssign,
    AbstractBlock,
    AbstractDesign,
    AEvent,
    AGuard,
    ARecv,
    ASend,
    CAnd,
    CEq,
    CNot,
    COr,
    abstract_design,
)
from .pvcheck import check_pv

CRYPTO_DECLS = [
    "fun senc(bitstring, bitstring): bitstring.",
    "reduc forall m: bitstring, k: bitstring; sdec(senc(m, k), k) = m.",
    "fun pk(bitstring): bitstring.",
    "fun aenc(bitstring, bitstring): bitstring.",
    "reduc forall m: bitstring, sk: bitstring; adec(aenc(m, pk(sk)), sk) = m.",
    "fun sign(bitstring, bitstring): bitstring.",
    "reduc forall m: bitstring, sk: bitstring; checksign(sign(m, sk), pk(sk)) = m.",
    "fun mac(bitstring, bitstring): bitstring.",
    "fun hash(bitstring): bitstring.",
    "fun pair(bitstring, bitstring): bitstring [data].",
    "reduc forall a: bitstring, b: bitstring; proj1(pair(a, b)) = a.",
    "reduc forall a: bitstring, b: bitstring; proj2(pair(a, b)) = b.",
]


class EmitError(Exception):
    pass


@dataclass
class PiSpec:
    declarations: list[str] = field(default_factory=list)
    queries: list[str] = field(default_factory=list)
    processes: list[tuple[str, list[str]]] = field(default_factory=list)
    main: list[str] = field(default_factory=list)

    def render(self) -> str:
        out = ["(* generated by secmodel; symbolic abstraction of the design view *)", ""]
        out += self.declarations
        if self.queries:
            out.append("")
            out += self.queries
        for header, body in self.processes:
            out.append("")
            out.append(header)
            out += body
        out.append("")
        out += self.main
        return "\n".join(out) + "\n"


def _term(t: Term, env: dict[str, str]) -> str:
    if isinstance(t, Var):
        return env[t.id]
    if isinstance(t, Name):
        return t.id
    assert isinstance(t, App)
    return f"{t.fn}({', '.join(_term(a, env) for a in t.args)})"


def _cond(c, env: dict[str, str]) -> str:
    if isinstance(c, CEq):
        return f"{_term(c.left, env)} = {_term(c.right, env)}"
    if isinstance(c, CNot):
        return f"not({_cond(c.cond, env)})"
    joiner = " && " if isinstance(c, CAnd) else " || "
    assert isinstance(c, (CAnd, COr))
    return "(" + joiner.join(_cond(x, env) for x in c.conds) + ")"


def _pattern(names: list[str]) -> str:
    if len(names) == 1:
        return f"{names[0]}: bitstring"
    return f"pair({names[0]}: bitstring, {_pattern(names[1:])})"


class _BlockEmitter:
    def __init__(self, blk: AbstractBlock, design: AbstractDesign):
        self.blk = blk
        self.design = design
        self.counter = 0
        self.max_branch = 0

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{self.blk.name}__{base}__{self.counter}"

    def state(self, s: str, env: dict[str, str], path: frozenset[str], ind: str) -> list[str]:
        outs = self.blk.outgoing(s)
        if not outs or s in path:
            # terminal state, or a cycle closed: stop unfolding
            return [f"{ind}0"]
        path = path | {s}
        if len(outs) == 1:
            return self.transition(outs[0], dict(env), path, ind)
        self.max_branch = max(self.max_branch, len(outs))
        sel = self.fresh("sel")
        lines = [f"{ind}in({PUBLIC_CHANNEL}, {sel}: bitstring);"]
        for k, t in enumerate(outs):
            kw = "if" if k == 0 else "else if"
            lines.append(f"{ind}{kw} {sel} = br__{k} then (")
            lines += self.transition(t, dict(env), path, ind + "  ")
            lines.append(f"{ind})")
        lines.append(f"{ind}else 0")
        return lines

    def transition(self, t, env: dict[str, str], path, ind: str) -> list[str]:
        lines = [f"{ind}(* {t.source} -> {t.target} *)"]
        for a in t.actions:
            if isinstance(a, ARecv):
                names = [self.fresh(x) for x in a.targets]
                if len(names) == 1:
                    lines.append(f"{ind}in({a.channel}, {names[0]}: bitstring);")
                else:
                    v = self.fresh("in")
                    lines.append(f"{ind}in({a.channel}, {v}: bitstring);")
                    lines.append(f"{ind}let {_pattern(names)} = {v} in")
                env.update(zip(a.targets, names))
            elif isinstance(a, AGuard):
                lines.append(f"{ind}if {_cond(a.cond, env)} then")
            elif isinstance(a, AAssign):
                v = self.fresh(a.target)
                lines.append(f"{ind}let {v} = {_term(a.term, env)} in")
                env[a.target] = v
            elif isinstance(a, ASend):
                lines.append(f"{ind}out({a.channel}, {_term(a.term, env)});")
            elif isinstance(a, AEvent):
                lines.append(f"{ind}event {a.name}({_term(a.term, env)});")
            else:
                raise EmitError(f"unsupported abstract action {a!r}")
        lines += self.state(t.target, env, path, ind)
        return lines


def emit_proverif(abstract: AbstractDesign | None = None, model: Model | None = None, injective: bool = False) -> str:
    """ProVerif text for ``abstract`` (derived from ``model`` when omitted)."""
    if abstract is None:
        if model is None:
            raise ValueError("need an abstract design or a model")
        abstract = abstract_design(model)
    d = abstract
    spec = PiSpec()
    decls = spec.declarations
    decls.append("free ch: channel.")
    for name in sorted(d.channels):
        if not d.channels[name].public:
            decls.append(f"free {name}: channel [private].")
    decls += CRYPTO_DECLS
    for k in d.comb_arities:
        args = ", ".join(["bitstring"] * k)
        decls.append(f"fun {comb_name(k)}({args}): bitstring.")
    for lit in d.literals:
        decls.append(f"const {lit.id}: bitstring.")

    system = d.names_of("system")
    session = d.names_of("session")
    for n in system:
        decls.append(f"free {n}: bitstring [private].")

    bodies: list[tuple[str, list[str]]] = []
    params_of: dict[str, list[str]] = {}
    max_branch = 0
    for blk in d.blocks:
        em = _BlockEmitter(blk, d)
        env: dict[str, str] = {}
        fresh: list[str] = []
        params: list[str] = []
        for attr in blk.attr_names:
            init = d.initial[(blk.name, attr)]
            env[attr] = init.id
            if init.scope == "fresh":
                fresh.append(init.id)
            elif init.scope == "session" and init.id not in params:
                params.append(init.id)
        body = [f"  new {n}: bitstring;" for n in fresh]
        body += em.state(blk.initial, env, frozenset(), "  ")
        body[-1] += "."
        if params:
            header = f"let proc_{blk.name}({', '.join(f'{p}: bitstring' for p in params)}) ="
        else:
            header = f"let proc_{blk.name} ="
        bodies.append((header, body))
        params_of[blk.name] = params
        max_branch = max(max_branch, em.max_branch)
    for k in range(max_branch):
        decls.append(f"const br__{k}: bitstring.")
    for ev in d.events:
        decls.append(f"event {ev.name}(bitstring).")

    for q in d.queries:
        if q.kind == "confidentiality":
            init = d.initial[(q.block, q.attribute)]
            target = init.id if init.scope == "system" else f"new {init.id}"
            spec.queries.append(f"(* {q.label} *)")
            spec.queries.append(f"query attacker({target}).")
        else:
            spec.queries.append(f"(* {q.label} *)")
            if injective:
                spec.queries.append(
                    f"query x: bitstring; inj-event({q.accept_event}(x)) ==> inj-event({q.send_event}(x))."
                )
            else:
                spec.queries.append(f"query x: bitstring; event({q.accept_event}(x)) ==> event({q.send_event}(x)).")

    spec.processes = bodies
    calls = []
    for blk in d.blocks:
        ps = params_of[blk.name]
        calls.append(f"proc_{blk.name}({', '.join(ps)})" if ps else f"proc_{blk.name}")
    main = ["process", "  ! ("]
    for n in session:
        main.append(f"    new {n}: bitstring;")
    if calls:
        main.append("    (" + " | ".join(calls) + ")")
    else:
        main.append("    0")
    main.append("  )")
    spec.main = main
    text = spec.render()
    problems = check_pv(text)
    if problems:
        raise EmitError("emitted specification failed the self-check:\n" + "\n".join(problems))
    return text
