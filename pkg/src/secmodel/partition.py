"""Analytic load estimates for a task-to-architecture mapping.

First-order model: each resource is charged its average demand and no
contention, queueing or arbitration is modelled. Arithmetic is exact
(``fractions.Fraction``) and converted to ``float`` at the boundary, so
ratios such as the MAC overhead come out exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .diagnostics import Diagnostic, warning
from .model import EXEC_KINDS, ArchNode, ChannelMap, Model, Task

NO_CONTENTION = (
    "first-order estimate: average demand per resource, no contention, "
    "queueing or bus arbitration is modelled"
)


class PartitionError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0])


def _q(x) -> Fraction:
    # via str so that 0.1 means one tenth, not its binary approximation
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


@dataclass
class Mapping:
    tasks: dict[str, Task] = field(default_factory=dict)
    nodes: dict[str, ArchNode] = field(default_factory=dict)
    task_node: dict[str, str] = field(default_factory=dict)
    crypto_cycles: dict[str, float] = field(default_factory=dict)
    channels: dict[str, ChannelMap] = field(default_factory=dict)
    channel_source: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: Model) -> Mapping:
        m = cls()
        m.tasks = {t.name: t for t in model.tasks}
        m.nodes = {n.name: n for n in model.nodes}
        for tm in model.task_maps:
            m.task_node[tm.task] = tm.node
            m.crypto_cycles[tm.task] = tm.crypto_cycles
        m.channels = {c.channel: c for c in model.channel_maps}
        m.channel_source = {c.name: c.source for c in model.task_channels}
        return m

    def node(self, name: str, kinds) -> ArchNode:
        n = self.nodes.get(name)
        if n is None or n.kind not in kinds:
            raise PartitionError(f"unknown {'/'.join(kinds)} node '{name}'")
        return n


def _bus_load(mapping: Mapping, bus: str) -> Fraction:
    node = mapping.node(bus, ("bus",))
    bits = sum(
        ((_q(c.message_size) + _q(c.mac_bytes)) * 8 * _q(c.rate) for c in mapping.channels.values() if bus in c.buses),
        Fraction(0),
    )
    return bits / _q(node.capacity)


def bus_load(mapping: Mapping, bus: str) -> float:
    """Fraction of ``bus`` bandwidth used; values above 1 mean overload."""
    return float(_bus_load(mapping, bus))


def mac_overhead_ratio(mapping: Mapping, bus: str) -> Fraction:
    """Exact load ratio of the secured bus to the same bus with MAC bytes removed."""
    base = replace(mapping, channels={k: replace(c, mac_bytes=0) for k, c in mapping.channels.items()})
    unsecured = _bus_load(base, bus)
    if unsecured == 0:
        raise PartitionError(f"bus '{bus}' carries no traffic; the overhead ratio is undefined")
    return _bus_load(mapping, bus) / unsecured


def _cpu_utilization(mapping: Mapping, node: str) -> Fraction:
    n = mapping.node(node, EXEC_KINDS)
    demand = Fraction(0)
    for task, where in mapping.task_node.items():
        if where == node and task in mapping.tasks:
            t = mapping.tasks[task]
            demand += (_q(t.exec_cost) + _q(mapping.crypto_cycles.get(task, 0))) * _q(t.rate)
    return demand / _q(n.capacity)


def cpu_utilization(mapping: Mapping, node: str) -> float:
    return float(_cpu_utilization(mapping, node))


def path_latency(mapping: Mapping, channel: str) -> float:
    """Seconds for one message: source-task execution plus serial transfer on each bus."""
    c = mapping.channels.get(channel)
    if c is None:
        raise PartitionError(f"channel '{channel}' is not mapped")
    total = Fraction(0)
    for bus in c.buses:
        b = mapping.node(bus, ("bus",))
        total += (_q(c.message_size) + _q(c.mac_bytes)) * 8 / _q(b.capacity)
    src = mapping.channel_source.get(channel)
    if src is not None and src in mapping.tasks and src in mapping.task_node:
        cpu = mapping.node(mapping.task_node[src], EXEC_KINDS)
        t = mapping.tasks[src]
        total += (_q(t.exec_cost) + _q(mapping.crypto_cycles.get(src, 0))) / _q(cpu.capacity)
    return float(total)


@dataclass
class EstimateReport:
    bus_loads: dict[str, float] = field(default_factory=dict)
    utilizations: dict[str, float] = field(default_factory=dict)
    latencies: dict[str, float] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    assumption: str = NO_CONTENTION

    @property
    def overloaded(self) -> list[str]:
        return sorted(
            [k for k, v in self.bus_loads.items() if v > 1] + [k for k, v in self.utilizations.items() if v > 1]
        )

    def to_json(self) -> dict:
        return {
            "assumption": self.assumption,
            "bus_load": self.bus_loads,
            "cpu_utilization": self.utilizations,
            "path_latency_s": self.latencies,
            "overloaded": self.overloaded,
        }


def estimate(model: Model) -> EstimateReport:
    mapping = Mapping.from_model(model)
    rep = EstimateReport()
    for n in model.nodes:
        if n.kind == "bus":
            rep.bus_loads[n.name] = bus_load(mapping, n.name)
            if rep.bus_loads[n.name] > 1:
                rep.diagnostics.append(warning(n.span, f"bus '{n.name}' overloaded: load {rep.bus_loads[n.name]:.4g}"))
        elif n.kind in EXEC_KINDS:
            rep.utilizations[n.name] = cpu_utilization(mapping, n.name)
            if rep.utilizations[n.name] > 1:
                rep.diagnostics.append(
                    warning(n.span, f"node '{n.name}' overloaded: utilization {rep.utilizations[n.name]:.4g}")
                )
    for c in model.channel_maps:
        rep.latencies[c.channel] = path_latency(mapping, c.channel)
    return rep
