"""Bounded operational semantics of an abstract design under a Dolev-Yao attacker.

Each block with a state machine is instantiated once per session. A move fires
one transition of one instance atomically: receives take a message from a
private channel or from the attacker, guards filter, assignments rebind
attributes, sends feed the attacker (public channel) or a private channel.
A transition whose destructor fails or whose guard is false is not enabled.

The attacker sees every message on the public channel and may answer any
public receive with a derivable term. It cannot inject arbitrary terms (that
set is infinite), so candidates for each received component are the terms it
holds explicitly, its own nonce and the public literals. A component that a
guard equates with a computable term is solved from the guard instead, and the
result is kept only if derivable. This covers replays, reflections and forged
MACs under known keys but not every conceivable composite forgery.

Private channels are unordered bags delivered faithfully. Public messages are
not queued: once sent they become attacker knowledge, so blocking, reordering
and duplication come for free.
"""

from __future__ import annotations

import itertools
import os
from collections import Counter, deque
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

from ..piexport.abstract import (
    ATTACKER_NAME,
    AAssign,
    AbstractBlock,
    AbstractDesign,
    AbstractTransition,
    AEvent,
    AGuard,
    ARecv,
    ASend,
    CAnd,
    CEq,
    CNot,
    COr,
    term_vars,
)
from ..terms import Name, Term, Var, substitute, term_sort_key, tuple_term, untuple
from .knowledge import KnowledgeBase, saturate


@dataclass(frozen=True)
class Bounds:
    sessions: int = 2
    steps: int = 40
    depth: int = 6
    max_states: int = 200_000

    def __post_init__(self) -> None:
        for k in ("sessions", "steps", "depth", "max_states"):
            if getattr(self, k) < 1:
                raise ValueError(f"bound '{k}' must be positive")

    @classmethod
    def from_env(cls, **overrides) -> Bounds:
        """Defaults, then SECMODEL_SESSIONS/STEPS/DEPTH/MAX_STATES, then ``overrides``."""
        vals = {}
        for k in ("sessions", "steps", "depth", "max_states"):
            env = os.environ.get(f"SECMODEL_{k.upper()}")
            if env:
                vals[k] = int(env)
        vals.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**vals)

    def to_json(self) -> dict:
        return {"sessions": self.sessions, "steps": self.steps, "depth": self.depth, "max_states": self.max_states}


@dataclass(frozen=True)
class LocalState:
    block: str
    session: int
    state: str
    bindings: tuple[Term, ...]
    steps: int = 0


@dataclass(frozen=True)
class GlobalState:
    locals: tuple[LocalState, ...]
    knowledge: frozenset[Term]
    pending: tuple[tuple[str, tuple[Term, ...]], ...]
    # emitted events as a sorted multiset; the emission order is recovered by replaying a path
    events: tuple[tuple[str, Term], ...]


@dataclass(frozen=True)
class Move:
    instance: int
    transition: int
    inputs: tuple[Term, ...]


@dataclass(frozen=True)
class WitnessItem:
    kind: str  # "transition" | "eavesdrop" | "inject"
    block: str = ""
    session: int = 0
    transition: str = ""
    channel: str = ""
    term: str = ""

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.block:
            out.update(block=self.block, session=self.session)
        if self.transition:
            out["transition"] = self.transition
        if self.channel:
            out["channel"] = self.channel
        if self.term:
            out["term"] = self.term
        return out

    def __str__(self) -> str:
        if self.kind == "transition":
            return f"{self.block}[{self.session}] {self.transition}"
        return f"{self.kind} {self.channel}: {self.term}"


def _bag_key(t: Term):
    return (term_sort_key(t), repr(t))


def _event_key(e: tuple[str, Term]):
    return (e[0], _bag_key(e[1]))


def eval_cond(c, env: dict[str, Term]) -> bool:
    if isinstance(c, CEq):
        left, right = substitute(c.left, env), substitute(c.right, env)
        return left is not None and left == right
    if isinstance(c, CNot):
        return not eval_cond(c.cond, env)
    if isinstance(c, CAnd):
        return all(eval_cond(x, env) for x in c.conds)
    if isinstance(c, COr):
        return any(eval_cond(x, env) for x in c.conds)
    raise TypeError(c)


def _conjuncts(c) -> list:
    if isinstance(c, CAnd):
        return [x for y in c.conds for x in _conjuncts(y)]
    return [c]


class _Fire:
    """Mutable scratch state while executing one transition."""

    __slots__ = ("env", "kb", "pending", "events", "inputs", "pre", "post")

    def __init__(self, env, kb, pending, events):
        self.env = env
        self.kb = kb
        self.pending = pending
        self.events = events
        self.inputs: list[Term] = []
        self.pre: list[WitnessItem] = []
        self.post: list[WitnessItem] = []

    def fork(self) -> _Fire:
        f = _Fire(dict(self.env), self.kb, {k: Counter(v) for k, v in self.pending.items()}, list(self.events))
        f.inputs, f.pre, f.post = list(self.inputs), list(self.pre), list(self.post)
        return f


class Explorer:
    def __init__(self, design: AbstractDesign, bounds: Bounds = Bounds(), reduce: bool = True):
        self.design = design
        self.bounds = bounds
        self.reduce = reduce
        self.blocks: list[AbstractBlock] = []
        for s in range(bounds.sessions):
            self.blocks.extend(design.blocks)
        self.private = sorted(n for n, c in design.channels.items() if not c.public)
        self._kb_cache: dict[frozenset, KnowledgeBase] = {}
        self._sat_cache: dict[tuple[frozenset, Term], frozenset] = {}
        # per (block, transition index): targets the guard solves, keyed by receive position
        self._solved: dict[tuple[str, int], dict[int, list[tuple[str, Term]]]] = {}

    # --- knowledge ----------------------------------------------------------

    def kb(self, terms: frozenset) -> KnowledgeBase:
        kb = self._kb_cache.get(terms)
        if kb is None:
            kb = self._kb_cache[terms] = KnowledgeBase(terms, self.bounds.depth)
        return kb

    def learn(self, terms: frozenset, t: Term) -> frozenset:
        if t in terms:
            return terms
        key = (terms, t)
        out = self._sat_cache.get(key)
        if out is None:
            out = self._sat_cache[key] = saturate(KnowledgeBase(terms | {t}, self.bounds.depth)).terms
        return out

    def initial_name(self, block: str, attr: str, session: int) -> Name:
        n = self.design.initial[(block, attr)]
        return Name(n.id if n.scope == "system" else f"{n.id}#{session}")

    def initial(self) -> GlobalState:
        locs = []
        for i, b in enumerate(self.blocks):
            s = i // max(1, len(self.design.blocks))
            locs.append(LocalState(b.name, s, b.initial, tuple(self.initial_name(b.name, a, s) for a in b.attr_names)))
        seed = {ATTACKER_NAME, *self.design.literals}
        kb = saturate(KnowledgeBase(seed, self.bounds.depth)).terms
        return GlobalState(tuple(locs), kb, tuple((c, ()) for c in self.private), ())

    # --- transitions --------------------------------------------------------

    def _guard_solutions(self, blk: AbstractBlock, t: AbstractTransition) -> dict[int, list[tuple[str, Term]]]:
        key = (blk.name, t.index)
        if key in self._solved:
            return self._solved[key]
        out: dict[int, list[tuple[str, Term]]] = {}
        acts = t.actions
        guard_at = next((k for k, a in enumerate(acts) if isinstance(a, AGuard)), None)
        if guard_at is not None and all(isinstance(a, ARecv) for a in acts[:guard_at]):
            later: set[str] = set()
            for k in range(guard_at - 1, -1, -1):
                r = acts[k]
                solved: list[tuple[str, Term]] = []
                if r.public:
                    taken: set[str] = set()
                    for c in _conjuncts(acts[guard_at].cond):
                        if not isinstance(c, CEq):
                            continue
                        for x, other in ((c.right, c.left), (c.left, c.right)):
                            if (
                                isinstance(x, Var)
                                and x.id in r.targets
                                and x.id not in taken
                                and not (term_vars(other) & (later | taken | {x.id}))
                            ):
                                solved.append((x.id, other))
                                taken.add(x.id)
                                break
                out[k] = solved
                later |= set(r.targets)
        self._solved[key] = out
        return out

    def _run(self, blk, t, k, f: _Fire, forced) -> Iterator[_Fire]:
        acts = t.actions
        while k < len(acts):
            a = acts[k]
            if isinstance(a, ARecv):
                yield from self._receive(blk, t, k, a, f, forced)
                return
            if isinstance(a, AGuard):
                if not eval_cond(a.cond, f.env):
                    return
            elif isinstance(a, AAssign):
                v = substitute(a.term, f.env)
                if v is None:
                    return
                f.env[a.target] = v
            elif isinstance(a, ASend):
                v = substitute(a.term, f.env)
                if v is None:
                    return
                if a.public:
                    f.kb = self.learn(f.kb, v)
                    f.post.append(WitnessItem("eavesdrop", channel=a.channel, term=str(v)))
                else:
                    f.pending[a.channel][v] += 1
            elif isinstance(a, AEvent):
                v = substitute(a.term, f.env)
                if v is None:
                    return
                f.events.append((a.name, v))
            k += 1
        yield f

    def _receive(self, blk, t, k, r: ARecv, f: _Fire, forced) -> Iterator[_Fire]:
        n = len(r.targets)
        if forced is not None:
            if len(f.inputs) >= len(forced):
                return
            options = [forced[len(f.inputs)]]
            if r.public:
                kb = self.kb(f.kb)
                options = [p for p in options if p in kb]
            else:
                options = [p for p in options if f.pending[r.channel][p] > 0]
        elif r.public:
            options = self._injections(blk, t, k, r, f)
        else:
            options = sorted(f.pending[r.channel], key=_bag_key)
        for payload in options:
            parts = untuple(payload, n)
            if parts is None:
                continue
            g = f.fork()
            g.inputs.append(payload)
            if r.public:
                g.pre.append(WitnessItem("inject", channel=r.channel, term=str(payload)))
            else:
                g.pending[r.channel][payload] -= 1
                if g.pending[r.channel][payload] == 0:
                    del g.pending[r.channel][payload]
            for x, v in zip(r.targets, parts):
                g.env[x] = v
            yield from self._run(blk, t, k + 1, g, forced)

    def _injections(self, blk, t, k, r: ARecv, f: _Fire) -> list[Term]:
        kb = self.kb(f.kb)
        solved = dict(self._guard_solutions(blk, t).get(k, []))
        free = [x for x in r.targets if x not in solved]
        pool = sorted(f.kb, key=_bag_key)
        out = []
        for combo in itertools.product(pool, repeat=len(free)):
            env = dict(f.env)
            env.update(zip(free, combo))
            ok = True
            for x, expr in solved.items():
                v = substitute(expr, env)
                if v is None or v not in kb:
                    ok = False
                    break
                env[x] = v
            if ok:
                out.append(tuple_term([env[x] for x in r.targets]))
        return out

    def fire(self, state: GlobalState, i: int, t: AbstractTransition, forced=None) -> Iterator[tuple[Move, GlobalState, list[WitnessItem]]]:
        loc = state.locals[i]
        blk = self.blocks[i]
        env = dict(zip(blk.attr_names, loc.bindings))
        pending = {c: Counter(msgs) for c, msgs in state.pending}
        start = _Fire(env, state.knowledge, pending, list(state.events))
        for f in self._run(blk, t, 0, start, forced):
            if forced is not None and len(f.inputs) != len(forced):
                continue
            new_loc = LocalState(
                loc.block, loc.session, t.target, tuple(f.env[a] for a in blk.attr_names), loc.steps + 1
            )
            locs = state.locals[:i] + (new_loc,) + state.locals[i + 1 :]
            pend = tuple((c, tuple(sorted(f.pending[c].elements(), key=_bag_key))) for c in self.private)
            nxt = GlobalState(locs, f.kb, pend, tuple(sorted(f.events, key=_event_key)))
            item = WitnessItem(
                "transition",
                block=blk.name,
                session=loc.session,
                transition=f"{t.source} -> {t.target} (#{t.index})",
                channel=",".join(sorted({a.channel for a in t.actions if isinstance(a, (ARecv, ASend))})),
            )
            yield Move(i, t.index, tuple(f.inputs)), nxt, f.pre + [item] + f.post

    def _invisible(self, state: GlobalState, i: int):
        """The single successor of a deterministic, input-free, event-free step, if any."""
        loc = state.locals[i]
        if loc.steps >= self.bounds.steps:
            return None
        outs = self.blocks[i].outgoing(loc.state)
        if len(outs) != 1:
            return None
        t = outs[0]
        if any(isinstance(a, (ARecv, AGuard, AEvent)) for a in t.actions):
            return None
        succ = list(self.fire(state, i, t))
        return succ[0] if len(succ) == 1 else None

    def successors(self, state: GlobalState) -> list[tuple[Move, GlobalState, list[WitnessItem]]]:
        if self.reduce:
            for i in range(len(self.blocks)):
                s = self._invisible(state, i)
                if s is not None:
                    return [s]
        out = []
        for i, loc in enumerate(state.locals):
            if loc.steps >= self.bounds.steps:
                continue
            for t in self.blocks[i].outgoing(loc.state):
                out.extend(self.fire(state, i, t))
        return out

    def apply(self, state: GlobalState, move: Move):
        """Replay one move; ``None`` if it is not enabled in ``state``."""
        if not 0 <= move.instance < len(self.blocks):
            return None
        loc = state.locals[move.instance]
        blk = self.blocks[move.instance]
        if loc.steps >= self.bounds.steps or not 0 <= move.transition < len(blk.transitions):
            return None
        t = blk.transitions[move.transition]
        if t.source != loc.state:
            return None
        for m, nxt, items in self.fire(state, move.instance, t, forced=move.inputs):
            return nxt, items
        return None


@dataclass
class ReachabilitySet:
    explorer: Explorer
    initial: GlobalState
    parent: dict[GlobalState, tuple[GlobalState, Move] | None]
    complete: bool
    step_bound_hit: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def states(self):
        return self.parent.keys()

    @property
    def bounds(self) -> Bounds:
        return self.explorer.bounds

    def __len__(self) -> int:
        return len(self.parent)

    def control_states(self) -> set[tuple[str, ...]]:
        return {tuple(loc.state for loc in s.locals) for s in self.parent}

    def path_to(self, state: GlobalState) -> list[Move]:
        moves: list[Move] = []
        cur = state
        while self.parent[cur] is not None:
            prev, mv = self.parent[cur]
            moves.append(mv)
            cur = prev
        return moves[::-1]


def explore(
    design: AbstractDesign,
    bounds: Bounds | None = None,
    reduce: bool = True,
    stop: Callable[[GlobalState], bool] | None = None,
) -> ReachabilitySet:
    """Breadth-first reachable states. ``stop`` ends the search early (result marked incomplete)."""
    bounds = bounds or Bounds()
    ex = Explorer(design, bounds, reduce)
    init = ex.initial()
    parent: dict[GlobalState, tuple[GlobalState, Move] | None] = {init: None}
    queue = deque([init])
    complete = True
    step_hit = False
    while queue:
        s = queue.popleft()
        if stop is not None and stop(s):
            complete = False
            break
        if not step_hit and any(loc.steps >= bounds.steps and ex.blocks[i].outgoing(loc.state) for i, loc in enumerate(s.locals)):
            step_hit = True
        for mv, nxt, _ in ex.successors(s):
            if nxt in parent:
                continue
            if len(parent) >= bounds.max_states:
                complete = False
                queue.clear()
                break
            parent[nxt] = (s, mv)
            queue.append(nxt)
    notes = []
    if step_hit:
        notes.append(f"some instance reached the per-instance step bound ({bounds.steps}); results hold up to that bound")
    if len(parent) >= bounds.max_states:
        notes.append(f"state budget of {bounds.max_states} exhausted; exploration is partial")
    return ReachabilitySet(ex, init, parent, complete, step_hit, notes)


def replay(explorer: Explorer, moves: list[Move]) -> tuple[list[GlobalState], list[WitnessItem]] | None:
    """States visited (including the initial one) and the witness items, or ``None`` if a move is not enabled."""
    state = explorer.initial()
    states = [state]
    items: list[WitnessItem] = []
    for mv in moves:
        r = explorer.apply(state, mv)
        if r is None:
            return None
        state, its = r
        states.append(state)
        items.extend(its)
    return states, items
