"""Well-formedness checks and requirement traceability over a :class:`Model`."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import networkx as nx

from .diagnostics import Diagnostic, error, warning
from .model import (
    EXEC_KINDS,
    ROLE_ARITY,
    ArchNode,
    Asset,
    Assign,
    AttackNode,
    AttackOperator,
    AuthenticityProperty,
    ChannelMap,
    ConfidentialityProperty,
    DesignBlock,
    KnowledgePragma,
    Model,
    Receive,
    Ref,
    Requirement,
    Send,
    StateMachine,
    Task,
    TaskChannel,
    TaskMap,
    expr_calls,
    expr_refs,
)

_OP_ARITY = {"OR": (2, None), "AND": (2, None), "SEQUENCE": (2, None), "BEFORE": (2, 2), "AFTER": (2, 2)}


def _namespace(d) -> tuple[str, str] | None:
    if isinstance(d, Requirement):
        return ("requirement", d.id)
    if isinstance(d, (AttackNode, AttackOperator)):
        return ("attack or operator", d.id)
    if isinstance(d, Asset):
        return ("asset", d.name)
    if isinstance(d, DesignBlock):
        return ("block", d.name)
    if isinstance(d, StateMachine):
        return ("state machine for block", d.owner)
    if isinstance(d, Task):
        return ("task", d.name)
    if isinstance(d, TaskChannel):
        return ("channel", d.name)
    if isinstance(d, ArchNode):
        return ("architecture node", d.name)
    if isinstance(d, TaskMap):
        return ("mapping of task", d.task)
    if isinstance(d, ChannelMap):
        return ("mapping of channel", d.channel)
    return None


def duplicate_diagnostics(decls) -> list[Diagnostic]:
    """One error per occurrence of an identifier declared more than once."""
    counts = Counter(ns for d in decls if (ns := _namespace(d)) is not None)
    out = []
    for d in decls:
        ns = _namespace(d)
        if ns is not None and counts[ns] > 1:
            out.append(error(d.span, f"duplicate {ns[0]} '{ns[1]}'"))
    return out


def _cycle_members(edges) -> set[str]:
    g = nx.DiGraph()
    g.add_edges_from(edges)
    members: set[str] = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1:
            members |= comp
    members |= {u for u, v in g.edges if u == v}
    return members


def _unique(items, key) -> dict:
    """Index ``items`` by ``key``, dropping ambiguous (duplicated) keys."""
    counts = Counter(key(i) for i in items)
    return {key(i): i for i in items if counts[key(i)] == 1}


class _Validator:
    def __init__(self, model: Model):
        self.m = model
        self.diags: list[Diagnostic] = []
        self.reqs = _unique(model.requirements, lambda r: r.id)
        self.req_ids = {r.id for r in model.requirements}
        self.blocks = _unique(model.blocks, lambda b: b.name)
        self.block_names = {b.name for b in model.blocks}
        self.machines = _unique(model.machines, lambda sm: sm.owner)

    def err(self, span, msg):
        self.diags.append(error(span, msg))

    def warn(self, span, msg):
        self.diags.append(warning(span, msg))

    def run(self) -> list[Diagnostic]:
        self.diags.extend(duplicate_diagnostics(self.m.decls))
        self.requirements()
        self.attacks()
        self.design()
        self.pragmas()
        self.properties()
        self.partitioning()
        return sorted(set(self.diags))

    # --- requirements -------------------------------------------------------

    def check_req_ref(self, span, rid, who):
        if rid is not None and rid not in self.req_ids:
            self.err(span, f"{who} references unknown requirement '{rid}'")

    def requirements(self):
        contain, derive = [], []
        for r in self.m.requirements:
            for c in r.children:
                self.check_req_ref(r.span, c, f"containment in '{r.id}'")
                contain.append((r.id, c))
            for p in r.derived_from:
                self.check_req_ref(r.span, p, f"derivation of '{r.id}'")
                derive.append((p, r.id))
        for rel, edges in (("containment", contain), ("deriveReqt", derive)):
            cyc = _cycle_members(edges)
            for r in self.m.requirements:
                if r.id in cyc:
                    self.err(r.span, f"requirement '{r.id}' is part of a {rel} cycle")

    # --- attacks ------------------------------------------------------------

    def attacks(self):
        m = self.m
        targets = (
            {a.name for a in m.assets}
            | {n.name for n in m.nodes}
            | self.block_names
        )
        attack_ids = {a.id for a in m.attacks}
        op_ids = {o.id for o in m.operators}
        for a in m.attacks:
            if a.asset not in targets:
                self.err(a.span, f"attack '{a.id}' targets unknown asset '{a.asset}'")
            for rid in a.linked_requirements:
                self.check_req_ref(a.span, rid, f"attack '{a.id}'")
            for x in a.cross_refs:
                if x not in attack_ids:
                    self.err(a.span, f"attack '{a.id}' cross-references unknown attack '{x}'")
                elif x == a.id:
                    self.warn(a.span, f"attack '{a.id}' cross-references itself")
        outputs = Counter(o.output for o in m.operators)
        for o in m.operators:
            lo, hi = _OP_ARITY[o.op]
            n = len(o.inputs)
            if n < lo or (hi is not None and n > hi):
                need = f"exactly {lo}" if hi == lo else f"at least {lo}"
                self.err(o.span, f"operator '{o.id}' ({o.op}) needs {need} inputs, has {n}")
            for i in o.inputs:
                if i not in attack_ids and i not in op_ids:
                    self.err(o.span, f"operator '{o.id}' has unknown input '{i}'")
            if len(set(o.inputs)) != n:
                self.err(o.span, f"operator '{o.id}' lists an input more than once")
            if o.output not in attack_ids:
                self.err(o.span, f"operator '{o.id}' outputs unknown attack '{o.output}'")
            elif outputs[o.output] > 1:
                self.err(o.span, f"attack '{o.output}' is the output of more than one operator")
            if o.max_duration is not None:
                if o.max_duration < 0:
                    self.err(o.span, f"operator '{o.id}' has a negative max_duration")
                elif o.op in ("OR", "AND"):
                    self.warn(o.span, f"max_duration on {o.op} operator '{o.id}' has no meaning and is ignored")
        from .threats import AttackGraph

        graph = AttackGraph.from_model(m)
        for oid in sorted(graph.cyclic_operators()):
            op = next(o for o in m.operators if o.id == oid)
            self.err(op.span, f"operator '{oid}' is part of a cycle in the attack graph")
        for a, msg in graph.cross_asset_warnings():
            self.warn(a.span, msg)

    # --- design -------------------------------------------------------------

    def design(self):
        m = self.m
        for b in m.blocks:
            for what, names in (
                ("attribute", [a.name for a in b.attributes]),
                ("method", [x.name for x in b.methods]),
                ("port", [p.name for p in b.ports]),
            ):
                for name, c in Counter(names).items():
                    if c > 1:
                        self.err(b.span, f"block '{b.name}' declares {what} '{name}' more than once")
            for meth in b.methods:
                need = ROLE_ARITY.get(meth.role)
                if need is not None and meth.arity != need:
                    self.err(
                        meth.span,
                        f"method '{b.name}.{meth.name}' with role {meth.role} must have arity {need}, has {meth.arity}",
                    )
        port_uses: dict[tuple[str, str], list] = defaultdict(list)
        for link in m.links:
            for blk, port in link.endpoints:
                b = self.blocks.get(blk)
                if blk not in self.block_names:
                    self.err(link.span, f"link references unknown block '{blk}'")
                elif b is not None and not b.has_port(port):
                    self.err(link.span, f"link references unknown port '{blk}.{port}'")
                port_uses[(blk, port)].append(link)
            if link.endpoints[0] == link.endpoints[1]:
                self.err(link.span, f"link connects port '{link.block_a}.{link.port_a}' to itself")
        for (blk, port), links in port_uses.items():
            if len(links) > 1:
                for link in links:
                    self.err(link.span, f"port '{blk}.{port}' appears in more than one link")
        self.linked_ports = set(port_uses)
        for sm in m.machines:
            self.machine(sm)

    def machine(self, sm: StateMachine):
        b = self.blocks.get(sm.owner)
        if sm.owner not in self.block_names:
            self.err(sm.span, f"state machine for unknown block '{sm.owner}'")
            return
        if b is None:
            return
        inits = sm.initial_states
        if len(inits) != 1:
            self.err(sm.span, f"state machine of '{sm.owner}' must have exactly one initial state, has {len(inits)}")
        names = Counter(s.name for s in sm.states)
        for s in sm.states:
            if names[s.name] > 1:
                self.err(s.span, f"state '{sm.owner}.{s.name}' declared more than once")
        for t in sm.transitions:
            for end in (t.source, t.target):
                if end not in names:
                    self.err(t.span, f"transition references unknown state '{sm.owner}.{end}'")
            if t.after is not None:
                lo, hi = t.after
                if lo < 0 or hi < lo:
                    self.err(t.span, f"after({lo}, {hi}) needs 0 <= min <= max")
            exprs = [t.guard] if t.guard is not None else []
            for a in t.actions:
                if isinstance(a, Assign):
                    self.attr_ref(b, t, a.target)
                    exprs.append(a.expr)
                elif isinstance(a, Send):
                    self.port_ref(b, t, a.port)
                    exprs.extend(a.args)
                elif isinstance(a, Receive):
                    self.port_ref(b, t, a.port)
                    for x in a.targets:
                        self.attr_ref(b, t, x)
            for e in exprs:
                for r in expr_refs(e):
                    self.attr_ref(b, t, r)
                for c in expr_calls(e):
                    meth = b.method(c.fn)
                    if meth is None:
                        self.err(t.span, f"call to undeclared method '{sm.owner}.{c.fn}'")
                    elif meth.arity != len(c.args):
                        self.err(
                            t.span,
                            f"method '{sm.owner}.{c.fn}' takes {meth.arity} arguments, called with {len(c.args)}",
                        )

    def attr_ref(self, b: DesignBlock, t, name):
        if b.attribute(name) is None:
            self.err(t.span, f"'{name}' is not an attribute of block '{b.name}'")

    def port_ref(self, b: DesignBlock, t, port):
        if not b.has_port(port):
            self.err(t.span, f"'{port}' is not a port of block '{b.name}'")
        elif (b.name, port) not in self.linked_ports:
            self.warn(t.span, f"port '{b.name}.{port}' is not linked; messages on it go nowhere")

    # --- pragmas and properties ---------------------------------------------

    def member(self, span, blk, attr):
        if blk not in self.block_names:
            self.err(span, f"unknown block '{blk}'")
            return None
        b = self.blocks.get(blk)
        if b is None:
            return None
        a = b.attribute(attr)
        if a is None:
            self.err(span, f"unknown attribute '{blk}.{attr}'")
        return a

    def pragmas(self):
        seen: Counter = Counter(m for p in self.m.pragmas for m in set(p.members))
        for p in self.m.pragmas:
            types = set()
            for blk, attr in p.members:
                a = self.member(p.span, blk, attr)
                if a is not None:
                    types.add(a.type)
                if seen[(blk, attr)] > 1:
                    self.err(p.span, f"attribute '{blk}.{attr}' appears in more than one knowledge pragma")
            if len(types) > 1:
                self.err(p.span, f"knowledge pragma mixes attribute types: {', '.join(sorted(types))}")
            if len(set(p.members)) != len(p.members):
                self.warn(p.span, "knowledge pragma lists a member twice")
            self.check_req_ref(p.span, p.traces_to, "pragma")

    def properties(self):
        for p in self.m.properties:
            self.check_req_ref(p.span, p.traces_to, "property")
            if isinstance(p, ConfidentialityProperty):
                self.member(p.span, p.block, p.attribute)
            else:
                self.authenticity(p)

    def authenticity(self, p: AuthenticityProperty):
        for (blk, state, attr), role in ((p.sender, "sender"), (p.receiver, "receiver")):
            if self.member(p.span, blk, attr) is None:
                continue
            sm = self.machines.get(blk)
            if sm is None:
                self.err(p.span, f"authenticity {role} block '{blk}' has no state machine")
                continue
            if state not in {s.name for s in sm.states}:
                self.err(p.span, f"unknown state '{blk}.{state}'")
                continue
            if role == "sender":
                ok = any(
                    t.source == state
                    and any(isinstance(a, Send) and Ref(attr) in a.args for a in t.actions)
                    for t in sm.transitions
                )
                if not ok:
                    self.err(
                        p.span,
                        f"authenticity anchor: state '{blk}.{state}' must be the source of a transition that sends '{attr}'",
                    )
            else:
                ok = any(
                    t.target == state
                    and any(isinstance(a, Receive) and attr in a.targets for a in t.actions)
                    for t in sm.transitions
                )
                if not ok:
                    self.err(
                        p.span,
                        f"authenticity anchor: state '{blk}.{state}' must be the target of a transition that receives into '{attr}'",
                    )

    # --- partitioning -------------------------------------------------------

    def partitioning(self):
        m = self.m
        nodes = _unique(m.nodes, lambda n: n.name)
        node_names = {n.name for n in m.nodes}
        tasks = {t.name for t in m.tasks}
        for t in m.tasks:
            if t.exec_cost < 0:
                self.err(t.span, f"task '{t.name}' has negative cost")
            if t.rate <= 0:
                self.err(t.span, f"task '{t.name}' must have a positive rate")
        for n in m.nodes:
            if n.kind != "memory":
                if n.capacity is None:
                    self.err(n.span, f"{n.kind} node '{n.name}' needs a capacity")
                elif n.capacity <= 0:
                    self.err(n.span, f"{n.kind} node '{n.name}' must have a positive capacity")
        mapped: dict[str, str] = {}
        for tm in m.task_maps:
            if tm.task not in tasks:
                self.err(tm.span, f"mapping of unknown task '{tm.task}'")
            if tm.node not in node_names:
                self.err(tm.span, f"task '{tm.task}' mapped to unknown node '{tm.node}'")
            elif tm.node in nodes and nodes[tm.node].kind not in EXEC_KINDS:
                self.err(tm.span, f"task '{tm.task}' mapped to non-execution node '{tm.node}'")
            if tm.crypto_cycles < 0:
                self.err(tm.span, f"task '{tm.task}' has negative crypto cycles")
            mapped[tm.task] = tm.node
        for t in m.tasks:
            if t.name not in mapped:
                self.err(t.span, f"task '{t.name}' is not mapped to any execution node")
        channels = _unique(m.task_channels, lambda c: c.name)
        for c in m.task_channels:
            for end in (c.source, c.target):
                if end not in tasks:
                    self.err(c.span, f"channel '{c.name}' references unknown task '{end}'")
        cmapped = {cm.channel for cm in m.channel_maps}
        for c in m.task_channels:
            if c.name not in cmapped:
                self.warn(c.span, f"channel '{c.name}' is not mapped; it is left out of estimates")
        for cm in m.channel_maps:
            c = channels.get(cm.channel)
            if cm.channel not in {x.name for x in m.task_channels}:
                self.err(cm.span, f"mapping of unknown channel '{cm.channel}'")
            for bus in cm.buses:
                if bus not in node_names:
                    self.err(cm.span, f"channel '{cm.channel}' mapped to unknown bus '{bus}'")
                elif bus in nodes and nodes[bus].kind != "bus":
                    self.err(cm.span, f"channel '{cm.channel}' mapped to '{bus}', which is not a bus")
            if cm.memory is not None:
                if cm.memory not in node_names:
                    self.err(cm.span, f"channel '{cm.channel}' uses unknown memory '{cm.memory}'")
                elif cm.memory in nodes and nodes[cm.memory].kind != "memory":
                    self.err(cm.span, f"'{cm.memory}' is not a memory node")
            if cm.message_size < 0:
                self.err(cm.span, f"channel '{cm.channel}' has negative message size")
            if cm.rate <= 0:
                self.err(cm.span, f"channel '{cm.channel}' must have a positive rate")
            if cm.mac_bytes < 0:
                self.err(cm.span, f"channel '{cm.channel}' has negative mac bytes")
            if c is not None and not cm.buses:
                a, b = mapped.get(c.source), mapped.get(c.target)
                if a is not None and b is not None and a != b:
                    self.err(cm.span, f"channel '{cm.channel}' crosses execution nodes but is mapped to no bus")


def validate(model: Model) -> list[Diagnostic]:
    """All invariant violations, sorted by location; empty iff the model is well-formed."""
    return _Validator(model).run()


# --- traceability ---------------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    kind: str  # "property" | "pragma"
    label: str


@dataclass
class TraceabilityReport:
    traces: dict[str, list[TraceEntry]] = field(default_factory=dict)
    untraced_requirements: list[str] = field(default_factory=list)
    untraced_properties: list[str] = field(default_factory=list)

    @property
    def covered(self) -> list[str]:
        return [r for r, entries in self.traces.items() if entries]

    def to_json(self) -> dict:
        return {
            "requirements": {
                rid: [{"kind": e.kind, "label": e.label} for e in entries]
                for rid, entries in self.traces.items()
            },
            "untraced_requirements": list(self.untraced_requirements),
            "untraced_properties": list(self.untraced_properties),
        }


def _pragma_label(p: KnowledgePragma) -> str:
    kind = "InitialSystemKnowledge" if p.scope == "system" else "InitialSessionKnowledge"
    return kind + " " + " ".join(f"{b}.{a}" for b, a in p.members)


def trace_requirements(model: Model) -> TraceabilityReport:
    report = TraceabilityReport()
    for r in model.requirements:
        if r.is_security and r.id not in report.traces:
            report.traces[r.id] = []
    for p in model.properties:
        if p.traces_to is None:
            report.untraced_properties.append(p.label)
        elif p.traces_to in report.traces:
            report.traces[p.traces_to].append(TraceEntry("property", p.label))
    for p in model.pragmas:
        if p.traces_to in report.traces:
            report.traces[p.traces_to].append(TraceEntry("pragma", _pragma_label(p)))
    report.untraced_requirements = [rid for rid, e in report.traces.items() if not e]
    return report
