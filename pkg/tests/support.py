"""Shared fixtures-by-import: bundled models, mutants and independent oracles."""

from __future__ import annotations

import random
from itertools import combinations, permutations

from secmodel import BUNDLED_MODELS, bundled_path
from secmodel.dsl import parse
from secmodel.model import AttackNode, AttackOperator, Model
from secmodel.terms import App, Name, Term, is_constructor, reduce_destructor

KEYDIST = "keydist.ssec"
FIRMWARE = "firmware_update.ssec"


def bundled_text(name: str) -> str:
    return bundled_path(name).read_text(encoding="utf-8")


def bundled_model(name: str) -> Model:
    return parse(bundled_text(name), name).to_model()


def all_bundled() -> list[str]:
    return list(BUNDLED_MODELS)


def model_of(text: str) -> Model:
    return parse(text, "test.ssec").to_model()


def edit(text: str, old: str, new: str) -> str:
    assert text.count(old) == 1, f"edit anchor not unique: {old!r}"
    return text.replace(old, new)


def mutant_plaintext_leak() -> str:
    """ECU1 puts PSK1 itself on the public link instead of its ciphertext."""
    return edit(bundled_text(KEYDIST), "msg = encrypt(req, PSK1);", "msg = PSK1;")


def mutant_no_mac_check() -> str:
    """KM accepts the request without verifying its MAC."""
    return edit(
        bundled_text(KEYDIST),
        "transition waiting -> decipherOK when verifyMAC(msgauth, PSK1, macr) {",
        "transition waiting -> decipherOK {",
    )


# --- knowledge oracle ---------------------------------------------------------


def _subterms(terms) -> set[Term]:
    out: set[Term] = set()

    def walk(t):
        out.add(t)
        if isinstance(t, App):
            for a in t.args:
                walk(a)

    for t in terms:
        walk(t)
    return out


def _depth(t: Term) -> int:
    return 1 + max((_depth(a) for a in t.args), default=0) if isinstance(t, App) else 1


def oracle_derivable(t: Term, known: set[Term], bound: int) -> bool:
    if t in known:
        return True
    if isinstance(t, Name):
        return not t.fresh
    return (
        isinstance(t, App)
        and is_constructor(t.fn)
        and _depth(t) <= bound
        and all(oracle_derivable(a, known, bound) for a in t.args)
    )


def oracle_saturate(kb, bound: int) -> set[Term]:
    """Naive fixpoint: apply every rule to every term until nothing changes."""
    universe = _subterms(kb)
    known = set(kb)
    changed = True
    while changed:
        changed = False
        new: set[Term] = set()
        for t in known:
            if not isinstance(t, App):
                continue
            if t.fn == "pair":
                new.update(t.args)
            elif t.fn == "senc" and oracle_derivable(t.args[1], known, bound):
                new.add(reduce_destructor("sdec", (t, t.args[1])))
            elif t.fn == "aenc":
                k = t.args[1]
                if isinstance(k, App) and k.fn == "pk" and oracle_derivable(k.args[0], known, bound):
                    new.add(t.args[0])
            elif t.fn == "sign" and oracle_derivable(App("pk", (t.args[1],)), known, bound):
                new.add(t.args[0])
        for u in universe:
            if isinstance(u, Name) and not u.fresh:
                new.add(u)
            elif (
                isinstance(u, App)
                and is_constructor(u.fn)
                and _depth(u) <= bound
                and all(a in known for a in u.args)
            ):
                new.add(u)
        if not new <= known:
            known |= new
            changed = True
    return known


NAMES = [Name("a"), Name("b"), Name("k1"), Name("k2"), Name("sk"), Name("pub", fresh=False)]


def random_term(rng: random.Random, depth: int) -> Term:
    if depth <= 1 or rng.random() < 0.3:
        return rng.choice(NAMES)
    fn = rng.choice(["senc", "aenc", "sign", "mac", "hash", "pair", "pk", "comb2"])
    sub = lambda: random_term(rng, depth - 1)  # noqa: E731
    if fn == "aenc":
        key = rng.choice([App("pk", (rng.choice(NAMES),)), sub()]) if depth > 2 else rng.choice(NAMES)
        return App("aenc", (sub(), key))
    if fn in ("hash", "pk"):
        return App(fn, (sub(),))
    return App(fn, (sub(), sub()))


def random_kb(rng: random.Random, max_terms: int = 12, max_depth: int = 4) -> list[Term]:
    return [random_term(rng, rng.randint(1, max_depth)) for _ in range(rng.randint(0, max_terms))]


# --- attack-graph oracle ------------------------------------------------------


def random_attack_graph(rng: random.Random, max_leaves: int = 8):
    """Random operator DAG over at most ``max_leaves`` leaves with one root ``R``."""
    n = rng.randint(1, max_leaves)
    leaves = [f"L{i}" for i in range(n)]
    attacks = [AttackNode(x, "asset") for x in leaves]
    ops: list[AttackOperator] = []
    counter = [0]

    def node(depth: int) -> str:
        if depth == 0 or rng.random() < 0.35:
            return rng.choice(leaves)
        counter[0] += 1
        k = counter[0]
        kind = rng.choice(["OR", "AND", "SEQUENCE", "BEFORE", "AFTER"])
        arity = 2 if kind in ("BEFORE", "AFTER") else rng.randint(2, 3)
        inputs = tuple(node(depth - 1) for _ in range(arity))
        out = f"M{k}"
        attacks.append(AttackNode(out, "asset"))
        ops.append(AttackOperator(f"op{k}", kind, inputs, out))
        return out

    top = node(3)
    kind = rng.choice(["OR", "AND", "SEQUENCE", "BEFORE", "AFTER"])
    second = node(2)
    ops.append(AttackOperator("opR", kind, (top, second), "R"))
    attacks.append(AttackNode("R", "asset", is_root=True))
    return attacks, ops


def _ways(ref: str, ops_by_out: dict, pos: dict[str, int]) -> set[frozenset[str]]:
    """Leaf sets through which ``ref`` is achieved by the ordering ``pos``."""
    if ref not in ops_by_out:
        return {frozenset([ref])} if ref in pos else set()
    o = ops_by_out[ref]
    parts = [_ways(i, ops_by_out, pos) for i in o.inputs]
    if o.op == "OR":
        return set().union(*parts)
    if o.op == "AFTER":
        parts = parts[::-1]
    # (union so far, leaves of the previous input) so ordered operators can compare neighbours
    states = {(frozenset(), None)}
    for p in parts:
        nxt = set()
        for used, prev in states:
            for w in p:
                if o.op != "AND" and prev is not None:
                    if max(pos[x] for x in prev) >= min(pos[x] for x in w):
                        continue
                nxt.add((used | w, w))
        states = nxt
    return {used for used, _ in states}


def oracle_attack(attacks, ops, root: str = "R"):
    """Exhaustive permutation check; returns (minimal satisfying sets, their exact orderings)."""
    ops_by_out = {o.output: o for o in ops}
    leaves = sorted({i for o in ops for i in o.inputs if i not in ops_by_out})
    satisfying: list[frozenset[str]] = []
    traces: set[tuple[str, ...]] = set()
    for size in range(1, len(leaves) + 1):
        for subset in combinations(leaves, size):
            s = frozenset(subset)
            if any(m <= s for m in satisfying):
                continue
            exact = [
                p for p in permutations(subset) if s in _ways(root, ops_by_out, {x: i for i, x in enumerate(p)})
            ]
            if exact:
                satisfying.append(s)
                traces.update(exact)
    return satisfying, traces


def oracle_achievable(attacks, ops, enabled, root: str = "R") -> bool:
    ops_by_out = {o.output: o for o in ops}
    return any(
        _ways(root, ops_by_out, {x: i for i, x in enumerate(p)}) for p in permutations(sorted(enabled))
    )


# --- single-edit model mutations ------------------------------------------------

GHOST = "Ghost_zz"


def _replace_decl(model: Model, i: int, new) -> Model:
    decls = list(model.decls)
    decls[i] = new
    return Model(tuple(decls))


def mutation_sites(model: Model) -> list[tuple[str, object]]:
    """Every single edit that should make the model invalid, as (kind, thunk)."""
    from dataclasses import replace

    from secmodel.model import (
        Assign,
        AuthenticityProperty,
        Call,
        ChannelMap,
        ConfidentialityProperty,
        DesignBlock,
        KnowledgePragma,
        Link,
        Requirement,
        ROLE_ARITY,
        Send,
        StateMachine,
        TaskMap,
    )

    sites: list[tuple[str, object]] = []

    def add(kind, i, make):
        sites.append((kind, lambda i=i, make=make: _replace_decl(model, i, make())))

    reqs = [d for d in model.decls if isinstance(d, Requirement)]
    for i, d in enumerate(model.decls):
        if isinstance(d, AttackOperator):
            for j in range(len(d.inputs)):
                add("dangling", i, lambda d=d, j=j: replace(d, inputs=d.inputs[:j] + (GHOST,) + d.inputs[j + 1 :]))
            add("cycle", i, lambda d=d: replace(d, inputs=d.inputs + (d.output,)))
            if d.op in ("BEFORE", "AFTER"):
                add("arity", i, lambda d=d: replace(d, inputs=d.inputs + d.inputs[:1]))
            add("arity", i, lambda d=d: replace(d, inputs=d.inputs[:1]))
        elif isinstance(d, AttackNode):
            add("dangling", i, lambda d=d: replace(d, linked_requirements=d.linked_requirements + (GHOST,)))
        elif isinstance(d, Requirement):
            add("cycle", i, lambda d=d: replace(d, children=d.children + (d.id,)))
            for child in reqs:
                if d.id in child.derived_from:
                    # the parent now also derives from its child
                    add("cycle", i, lambda d=d, c=child.id: replace(d, derived_from=d.derived_from + (c,)))
            add("dangling", i, lambda d=d: replace(d, derived_from=d.derived_from + (GHOST,)))
        elif isinstance(d, Link):
            add("dangling", i, lambda d=d: replace(d, block_a=GHOST))
            add("dangling", i, lambda d=d: replace(d, port_b=GHOST))
        elif isinstance(d, DesignBlock):
            for j, m in enumerate(d.methods):
                if m.role in ROLE_ARITY:
                    bad = replace(m, arity=m.arity + 1)
                    add("arity", i, lambda d=d, j=j, bad=bad: replace(d, methods=d.methods[:j] + (bad,) + d.methods[j + 1 :]))
        elif isinstance(d, StateMachine):
            for j, t in enumerate(d.transitions):
                swap = lambda t2, d=d, j=j: replace(d, transitions=d.transitions[:j] + (t2,) + d.transitions[j + 1 :])  # noqa: E731
                add("dangling", i, lambda t=t, swap=swap: swap(replace(t, target=GHOST)))
                for k, a in enumerate(t.actions):
                    acts = lambda a2, t=t, k=k: t.actions[:k] + (a2,) + t.actions[k + 1 :]  # noqa: E731
                    if isinstance(a, Send):
                        add("dangling", i, lambda a=a, t=t, acts=acts, swap=swap: swap(replace(t, actions=acts(replace(a, port=GHOST)))))
                    if isinstance(a, Assign) and isinstance(a.expr, Call) and a.expr.args:
                        short = Call(a.expr.fn, a.expr.args[:-1])
                        add("arity", i, lambda a=a, t=t, acts=acts, swap=swap, short=short: swap(replace(t, actions=acts(replace(a, expr=short)))))
        elif isinstance(d, KnowledgePragma):
            add("dangling", i, lambda d=d: replace(d, members=((GHOST, d.members[0][1]),) + d.members[1:]))
            add("dangling", i, lambda d=d: replace(d, members=((d.members[0][0], GHOST),) + d.members[1:]))
        elif isinstance(d, ConfidentialityProperty):
            add("dangling", i, lambda d=d: replace(d, attribute=GHOST))
            add("dangling", i, lambda d=d: replace(d, traces_to=GHOST))
        elif isinstance(d, AuthenticityProperty):
            add("dangling", i, lambda d=d: replace(d, sender=(d.sender[0], GHOST, d.sender[2])))
            add("dangling", i, lambda d=d: replace(d, receiver=(GHOST,) + d.receiver[1:]))
        elif isinstance(d, TaskMap):
            add("dangling", i, lambda d=d: replace(d, node=GHOST))
        elif isinstance(d, ChannelMap):
            if d.buses:
                add("dangling", i, lambda d=d: replace(d, buses=d.buses + (GHOST,)))
    return sites
