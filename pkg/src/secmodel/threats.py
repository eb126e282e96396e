"""Attack-graph semantics: achievability, trace enumeration and requirement coverage.

A trace is an ordering of elementary (leaf) attacks. Each operator node is
satisfied by a *scenario*: the set of leaves it uses plus ordering
constraints between them. SEQUENCE/BEFORE/AFTER require every leaf used by an
earlier input to precede every leaf used by a later one; OR picks one input;
AND takes the union with no extra constraint. A scenario is realisable iff its
constraints are acyclic, and its valid traces are the linear extensions.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product

import networkx as nx

from .model import AttackNode, AttackOperator, Model


class ThreatError(ValueError):
    pass


@dataclass(frozen=True)
class AttackTrace:
    leaves: tuple[str, ...]


@dataclass(frozen=True)
class Scenario:
    leaves: frozenset[str]
    before: frozenset[tuple[str, str]]

    def acyclic(self) -> bool:
        return not _has_cycle(self.leaves, self.before)


def _has_cycle(nodes, edges) -> bool:
    indeg = {n: 0 for n in nodes}
    succ = defaultdict(list)
    for a, b in edges:
        if a == b:
            return True
        succ[a].append(b)
        indeg[b] += 1
    ready = [n for n, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return seen != len(indeg)


def _linear_extensions(leaves: frozenset[str], before: frozenset[tuple[str, str]]):
    """All orderings of ``leaves`` respecting ``before``, in lexicographic order."""
    preds = defaultdict(set)
    for a, b in before:
        preds[b].add(a)
    out: list[tuple[str, ...]] = []

    def rec(prefix: list[str], placed: set[str]):
        if len(prefix) == len(leaves):
            out.append(tuple(prefix))
            return
        for x in sorted(leaves - placed):
            if preds[x] <= placed:
                prefix.append(x)
                placed.add(x)
                rec(prefix, placed)
                placed.discard(x)
                prefix.pop()

    rec([], set())
    return out


class AttackGraph:
    """Attacks and operators with cross-references resolved into alias classes.

    Cross-referenced attacks denote the same attack; an alias class whose
    member is produced by an operator stands for that operator's outcome.
    """

    def __init__(self, attacks: list[AttackNode], operators: list[AttackOperator]):
        self.attacks = {a.id: a for a in attacks}
        self.operators = {o.id: o for o in operators}
        self._parent = {a: a for a in self.attacks}
        for a in attacks:
            for x in a.cross_refs:
                if x in self.attacks:
                    self._union(a.id, x)
        self.producers: dict[str, list[str]] = defaultdict(list)
        for o in operators:
            if o.output in self.attacks:
                self.producers[self.find(o.output)].append(o.id)

    @classmethod
    def from_model(cls, model: Model) -> AttackGraph:
        return cls(list(model.attacks), list(model.operators))

    def _union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            lo, hi = sorted((ra, rb))
            self._parent[hi] = lo

    def find(self, a: str) -> str:
        while self._parent[a] != a:
            self._parent[a] = self._parent[self._parent[a]]
            a = self._parent[a]
        return a

    def aliases(self, a: str) -> list[str]:
        r = self.find(a)
        return sorted(x for x in self.attacks if self.find(x) == r)

    @property
    def leaves(self) -> list[str]:
        """Alias-class representatives that no operator produces."""
        return sorted({self.find(a) for a in self.attacks if not self.producers.get(self.find(a))})

    @property
    def roots(self) -> list[AttackNode]:
        return [a for a in self.attacks.values() if a.is_root]

    def resolve(self, ref: str) -> tuple[str, object]:
        """``("op", id)``, ``("alt", [op ids])`` or ``("leaf", representative)``."""
        if ref in self.operators:
            return ("op", ref)
        if ref not in self.attacks:
            raise ThreatError(f"unknown attack or operator '{ref}'")
        r = self.find(ref)
        prods = self.producers.get(r)
        if not prods:
            return ("leaf", r)
        if len(prods) == 1:
            return ("op", prods[0])
        return ("alt", tuple(sorted(prods)))

    def _op_edges(self):
        for o in self.operators.values():
            for i in o.inputs:
                try:
                    kind, ref = self.resolve(i)
                except ThreatError:
                    continue
                if kind == "op":
                    yield (ref, o.id)
                elif kind == "alt":
                    for p in ref:
                        yield (p, o.id)

    def cyclic_operators(self) -> set[str]:
        g = nx.DiGraph()
        g.add_nodes_from(self.operators)
        g.add_edges_from(self._op_edges())
        bad: set[str] = set()
        for comp in nx.strongly_connected_components(g):
            if len(comp) > 1:
                bad |= comp
        bad |= {u for u, v in g.edges if u == v}
        return bad

    def cross_asset_warnings(self):
        direct = {o.output for o in self.operators.values()}
        for o in sorted(self.operators.values(), key=lambda o: o.id):
            for i in o.inputs:
                a = self.attacks.get(i)
                if a is None or i in direct:
                    continue
                for p in self.producers.get(self.find(i), []):
                    out = self.attacks[self.operators[p].output]
                    if out.id != a.id and out.asset != a.asset:
                        yield a, (
                            f"attack '{a.id}' ({a.asset}) feeds operator '{o.id}' through a cross-reference "
                            f"to the outcome '{out.id}' of asset '{out.asset}'"
                        )

    def check_root(self, root: str) -> None:
        a = self.attacks.get(root)
        if a is None:
            raise ThreatError(f"unknown root attack '{root}'")
        if not a.is_root:
            raise ThreatError(f"attack '{root}' is not tagged as a root attack")
        if self.cyclic_operators():
            raise ThreatError("attack graph has a cycle")

    # --- scenarios ----------------------------------------------------------

    def scenarios(self, ref: str, enabled: frozenset[str] | None = None) -> list[Scenario]:
        memo: dict[tuple[str, object], list[Scenario]] = {}

        def of(node) -> list[Scenario]:
            if node in memo:
                return memo[node]
            kind, x = node
            if kind == "leaf":
                res = [Scenario(frozenset([x]), frozenset())] if enabled is None or x in enabled else []
            elif kind == "alt":
                res = _dedupe(s for p in x for s in of(("op", p)))
            else:
                o = self.operators[x]
                parts = [of(self.resolve(i)) for i in o.inputs]
                if o.op == "OR":
                    res = _dedupe(s for p in parts for s in p)
                else:
                    if o.op == "AFTER":
                        parts = parts[::-1]
                    ordered = o.op != "AND"
                    res = []
                    for combo in product(*parts):
                        leaves = frozenset().union(*(c.leaves for c in combo))
                        before = set().union(*(c.before for c in combo))
                        if ordered:
                            for a, b in zip(combo, combo[1:]):
                                before |= {(x1, x2) for x1 in a.leaves for x2 in b.leaves}
                        s = Scenario(leaves, frozenset(before))
                        if s.acyclic():
                            res.append(s)
                    res = _dedupe(res)
            memo[node] = res
            return res

        return of(self.resolve(ref))


def _dedupe(items) -> list[Scenario]:
    seen = {}
    for s in items:
        seen.setdefault(s, None)
    return list(seen)


def _enabled_set(graph: AttackGraph, enabled) -> frozenset[str]:
    leaves = set(graph.leaves)
    reps = set()
    for e in enabled:
        if e not in graph.attacks:
            raise ThreatError(f"unknown attack '{e}'")
        r = graph.find(e)
        if r not in leaves:
            raise ThreatError(f"attack '{e}' is not an elementary (leaf) attack")
        reps.add(r)
    return frozenset(reps)


def achievable(graph: AttackGraph, root: str, enabled) -> bool:
    """True iff some ordering of the ``enabled`` leaves achieves ``root``."""
    graph.check_root(root)
    return bool(graph.scenarios(root, _enabled_set(graph, enabled)))


def enumerate_traces(graph: AttackGraph, root: str, max_count: int = 100) -> list[AttackTrace]:
    """Orderings of the minimal satisfying leaf sets, lexicographically sorted."""
    graph.check_root(root)
    scen = graph.scenarios(root)
    sets = {s.leaves for s in scen}
    minimal = {L for L in sets if not any(o < L for o in sets)}
    orders: set[tuple[str, ...]] = set()
    for s in scen:
        if s.leaves in minimal:
            orders.update(_linear_extensions(s.leaves, s.before))
    return [AttackTrace(t) for t in sorted(orders)[:max_count]]


# --- coverage -------------------------------------------------------------------


@dataclass
class RootCoverage:
    root: str
    covered: bool
    requirements: list[str]
    subtree: list[str]


@dataclass
class CoverageReport:
    roots: list[RootCoverage] = field(default_factory=list)

    @property
    def covered(self) -> list[str]:
        return [r.root for r in self.roots if r.covered]

    @property
    def uncovered(self) -> list[str]:
        return [r.root for r in self.roots if not r.covered]

    @property
    def ok(self) -> bool:
        return not self.uncovered

    def to_json(self) -> dict:
        return {
            "roots": [
                {"root": r.root, "covered": r.covered, "requirements": r.requirements}
                for r in self.roots
            ],
            "covered": self.covered,
            "uncovered": self.uncovered,
            "totals": {"roots": len(self.roots), "covered": len(self.covered), "uncovered": len(self.uncovered)},
        }


def subtree_attacks(graph: AttackGraph, root: str) -> list[str]:
    seen_att: set[str] = set()
    seen_ops: set[str] = set()
    stack = [root]
    while stack:
        x = stack.pop()
        if x in graph.operators:
            if x in seen_ops:
                continue
            seen_ops.add(x)
            stack.extend(graph.operators[x].inputs)
            continue
        if x not in graph.attacks or x in seen_att:
            continue
        for a in graph.aliases(x):
            seen_att.add(a)
            stack.extend(graph.producers.get(graph.find(a), []))
    return sorted(seen_att)


def coverage(model: Model) -> CoverageReport:
    graph = AttackGraph.from_model(model)
    report = CoverageReport()
    for root in graph.roots:
        sub = subtree_attacks(graph, root.id)
        reqs = sorted({r for a in sub for r in graph.attacks[a].linked_requirements})
        report.roots.append(RootCoverage(root.id, bool(reqs), reqs, sub))
    return report
