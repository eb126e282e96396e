"""Dolev-Yao attacker knowledge.

The closure of a term set is infinite (the attacker can always pair what it
knows), so a :class:`KnowledgeBase` keeps an explicit set ``S`` and decides
derivability lazily:

* ``S`` contains the initial terms and is closed under the analysis rules
  (unpairing, ``sdec`` with a derivable key, ``adec`` of ``aenc(m, pk(sk))``
  with ``sk`` derivable, ``checksign`` revealing ``m`` from ``sign(m, sk)`` when
  ``pk(sk)`` is derivable) and under synthesis of any subterm of the initial
  terms whose arguments are in ``S`` and whose depth is within the bound.
* ``t in kb`` holds when ``t`` is in ``S``, is a public name, or is a
  constructor application within the depth bound whose arguments are all
  derivable.

Every new term produced by analysis is a subterm of the initial set, so
saturation terminates.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable

from ..terms import App, Name, Term, Var, all_subterms, is_constructor

DEFAULT_DEPTH = 6


class KnowledgeBase:
    __slots__ = ("terms", "depth_bound", "_memo")

    def __init__(self, terms: Iterable[Term] = (), depth_bound: int = DEFAULT_DEPTH) -> None:
        if depth_bound < 1:
            raise ValueError("depth_bound must be >= 1")
        self.terms = frozenset(terms)
        self.depth_bound = depth_bound
        self._memo: dict[Term, bool] = {}

    def __contains__(self, t: Term) -> bool:
        if t in self.terms:
            return True
        if isinstance(t, Name):
            return not t.fresh
        if isinstance(t, Var):
            return False
        hit = self._memo.get(t)
        if hit is None:
            hit = (
                is_constructor(t.fn)
                and t.depth <= self.depth_bound
                and all(a in self for a in t.args)
            )
            self._memo[t] = hit
        return hit

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, KnowledgeBase)
            and self.terms == other.terms
            and self.depth_bound == other.depth_bound
        )

    def __hash__(self) -> int:
        return hash((self.terms, self.depth_bound))

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        return f"KnowledgeBase({len(self.terms)} terms, depth_bound={self.depth_bound})"

    def add(self, *terms: Term) -> KnowledgeBase:
        """Unsaturated union; call :func:`saturate` on the result."""
        return KnowledgeBase(self.terms | set(terms), self.depth_bound)


def saturate(kb: KnowledgeBase | Iterable[Term], depth_bound: int | None = None) -> KnowledgeBase:
    if not isinstance(kb, KnowledgeBase):
        kb = KnowledgeBase(kb, depth_bound or DEFAULT_DEPTH)
    bound = kb.depth_bound if depth_bound is None else depth_bound
    if bound < 1:
        raise ValueError("depth_bound must be >= 1")

    universe = all_subterms(kb.terms)
    parents: dict[Term, list[App]] = defaultdict(list)
    for u in universe:
        if isinstance(u, App):
            for a in set(u.args):
                parents[a].append(u)

    known: set[Term] = set()
    # analysis results blocked on a missing term: missing -> terms it unlocks
    waiting: dict[Term, list[Term]] = defaultdict(list)
    work: list[Term] = []

    def learn(t: Term) -> None:
        if t not in known:
            known.add(t)
            work.append(t)

    def derivable(t: Term) -> bool:
        if t in known or (isinstance(t, Name) and not t.fresh):
            return True
        return (
            isinstance(t, App)
            and is_constructor(t.fn)
            and t.depth <= bound
            and all(derivable(a) for a in t.args)
        )

    def synthesizable(u: Term) -> bool:
        if isinstance(u, Name):
            return not u.fresh
        return (
            isinstance(u, App)
            and is_constructor(u.fn)
            and u.depth <= bound
            and all(a in known for a in u.args)
        )

    for t in kb.terms:
        learn(t)
    for u in universe:
        if synthesizable(u):
            learn(u)

    while work:
        t = work.pop()
        for unlocked in waiting.pop(t, ()):
            learn(unlocked)
        if isinstance(t, App):
            f, args = t.fn, t.args
            if f == "pair":
                learn(args[0])
                learn(args[1])
            elif f == "senc":
                if derivable(args[1]):
                    learn(args[0])
                else:
                    waiting[args[1]].append(args[0])
            elif f == "aenc":
                pub = args[1]
                if isinstance(pub, App) and pub.fn == "pk":
                    if derivable(pub.args[0]):
                        learn(args[0])
                    else:
                        waiting[pub.args[0]].append(args[0])
            elif f == "sign":
                vk = App("pk", (args[1],))
                if derivable(vk):
                    learn(args[0])
                else:
                    waiting[vk].append(args[0])
                    if vk.depth <= bound:
                        waiting[args[1]].append(args[0])
        for p in parents.get(t, ()):
            if p not in known and synthesizable(p):
                learn(p)

    return KnowledgeBase(known, bound)
