from __future__ import annotations

from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass, field

from ..model import AuthenticityProperty, ConfidentialityProperty, Model
from ..piexport.abstract import AbstractDesign, AbstractQuery, abstract_design
from ..terms import Name
from .explore import Bounds, GlobalState, Move, ReachabilitySet, WitnessItem, explore, replay

SATISFIED = "satisfied"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive_at_bound"


@dataclass
class Verdict:
    query: str
    status: str
    bounds: Bounds
    witness: list[WitnessItem] | None = None
    moves: list[Move] | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if (self.status == VIOLATED) != (self.witness is not None):
            raise ValueError("a witness is present exactly when the query is violated")

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "status": self.status,
            "bounds": self.bounds.to_json(),
            "witness": [w.to_json() for w in self.witness] if self.witness is not None else None,
            "notes": list(self.notes),
        }


Predicate = Callable[[GlobalState], bool]


def _query_for(prop, design: AbstractDesign) -> AbstractQuery:
    if isinstance(prop, AbstractQuery):
        return prop
    for q in design.queries:
        if q.label == prop.label:
            return q
    raise KeyError(f"no query for '{prop.label}' in the abstract design")


def secret_names(design: AbstractDesign, block: str, attr: str, sessions: int) -> list[Name]:
    n = design.initial[(block, attr)]
    if n.scope == "system":
        return [Name(n.id)]
    return [Name(f"{n.id}#{s}") for s in range(sessions)]


def confidentiality_predicate(design: AbstractDesign, q: AbstractQuery, sessions: int) -> Predicate:
    names = secret_names(design, q.block, q.attribute, sessions)
    return lambda s: any(n in s.knowledge for n in names)


def authenticity_predicate(q: AbstractQuery, injective: bool = False) -> Predicate:
    def bad(s: GlobalState) -> bool:
        accepts = Counter(t for e, t in s.events if e == q.accept_event)
        if not accepts:
            return False
        sends = Counter(t for e, t in s.events if e == q.send_event)
        if injective:
            return any(c > sends[t] for t, c in accepts.items())
        return any(t not in sends for t in accepts)

    return bad


def _minimize(rs: ReachabilitySet, moves: list[Move], bad: Predicate) -> tuple[list[Move], list[WitnessItem]]:
    """Drop moves that the violation does not depend on, keeping the path replayable."""

    def violates(ms):
        r = replay(rs.explorer, ms)
        if r is None:
            return None
        states, items = r
        for k, st in enumerate(states):
            if bad(st):
                return ms[:k], items
        return None

    best = list(moves)
    i = len(best) - 1
    while i >= 0:
        trial = best[:i] + best[i + 1 :]
        if violates(trial) is not None:
            best = trial
        i -= 1
    ms, _ = violates(best)
    _, items = replay(rs.explorer, ms)
    return ms, items


def _decide(label: str, rs: ReachabilitySet, bad: Predicate) -> Verdict:
    for st in rs.states:
        if bad(st):
            moves, items = _minimize(rs, rs.path_to(st), bad)
            return Verdict(label, VIOLATED, rs.bounds, items, moves, list(rs.notes))
    status = SATISFIED if rs.complete else INCONCLUSIVE
    return Verdict(label, status, rs.bounds, notes=list(rs.notes))


def check_confidentiality(prop: ConfidentialityProperty | AbstractQuery, rs: ReachabilitySet) -> Verdict:
    design = rs.explorer.design
    q = _query_for(prop, design)
    return _decide(q.label, rs, confidentiality_predicate(design, q, rs.bounds.sessions))


def check_authenticity(
    prop: AuthenticityProperty | AbstractQuery, rs: ReachabilitySet, injective: bool = False
) -> Verdict:
    q = _query_for(prop, rs.explorer.design)
    label = q.label + (" (injective)" if injective else "")
    return _decide(label, rs, authenticity_predicate(q, injective))


def verify(
    model: Model, bounds: Bounds | None = None, injective: bool = False, reduce: bool = True
) -> list[Verdict]:
    """Explore once and answer every property of ``model``, in declaration order."""
    design = abstract_design(model)
    if not design.queries:
        return []
    rs = explore(design, bounds, reduce=reduce)
    out = []
    for q in design.queries:
        if q.kind == "confidentiality":
            out.append(check_confidentiality(q, rs))
        else:
            out.append(check_authenticity(q, rs, injective))
    return out


__all__ = [
    "INCONCLUSIVE",
    "SATISFIED",
    "VIOLATED",
    "Verdict",
    "check_authenticity",
    "check_confidentiality",
    "verify",
]
