"""Symbolic message algebra shared by the ProVerif exporter and the Dolev-Yao engine.

Terms form a free algebra: two terms are equal iff they are syntactically equal.
Constructors build messages; destructors only appear in reduction rules and are
evaluated with :func:`reduce_destructor`, which returns ``None`` on failure.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator

# constructor name -> arity (comb_k is variadic and handled separately)
CONSTRUCTORS: dict[str, int] = {
    "senc": 2,
    "aenc": 2,
    "pk": 1,
    "sign": 2,
    "mac": 2,
    "hash": 1,
    "pair": 2,
}

DESTRUCTORS: dict[str, int] = {
    "sdec": 2,
    "adec": 2,
    "checksign": 2,
    "proj1": 1,
    "proj2": 1,
}

_COMB_RE = re.compile(r"^comb(\d+)$")


def comb_name(arity: int) -> str:
    return f"comb{arity}"


def is_comb(fn: str) -> bool:
    return _COMB_RE.match(fn) is not None


def is_constructor(fn: str) -> bool:
    return fn in CONSTRUCTORS or is_comb(fn)


def arity_of(fn: str) -> int:
    if fn in CONSTRUCTORS:
        return CONSTRUCTORS[fn]
    if fn in DESTRUCTORS:
        return DESTRUCTORS[fn]
    m = _COMB_RE.match(fn)
    if m:
        return int(m.group(1))
    raise KeyError(fn)


class Term:
    """Base class. Subclasses are immutable and hash-consed by value."""

    __slots__ = ()

    depth: int

    def subterms(self) -> Iterator[Term]:
        yield self


class Name(Term):
    """An atomic name. ``fresh`` names are restricted (``new``); others are public constants."""

    __slots__ = ("id", "fresh", "_hash")

    def __init__(self, id: str, fresh: bool = True) -> None:
        self.id = id
        self.fresh = fresh
        self._hash = hash(("N", id, fresh))

    depth = 1

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Name) and self.id == other.id and self.fresh == other.fresh
        )

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return self.id

    def __repr__(self) -> str:
        return f"Name({self.id!r}{'' if self.fresh else ', fresh=False'})"


class Var(Term):
    """A reference to a block attribute inside an expression template."""

    __slots__ = ("id", "_hash")

    def __init__(self, id: str) -> None:
        self.id = id
        self._hash = hash(("V", id))

    depth = 1

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Var) and self.id == other.id

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return f"${self.id}"

    def __repr__(self) -> str:
        return f"Var({self.id!r})"


class App(Term):
    __slots__ = ("fn", "args", "depth", "_hash", "_str")

    def __init__(self, fn: str, args: Iterable[Term]) -> None:
        args = tuple(args)
        self.fn = fn
        self.args = args
        self.depth = 1 + max((a.depth for a in args), default=0)
        self._hash = hash((fn, args))
        self._str: str | None = None

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, App)
            and self._hash == other._hash
            and self.fn == other.fn
            and self.args == other.args
        )

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        if self._str is None:
            self._str = f"{self.fn}({', '.join(str(a) for a in self.args)})"
        return self._str

    def __repr__(self) -> str:
        return f"App({self.fn!r}, {list(self.args)!r})"

    def subterms(self) -> Iterator[Term]:
        yield self
        for a in self.args:
            yield from a.subterms()


def app(fn: str, *args: Term) -> App:
    expected = arity_of(fn)
    if len(args) != expected:
        raise ValueError(f"{fn} expects {expected} arguments, got {len(args)}")
    return App(fn, args)


def tuple_term(items: list[Term] | tuple[Term, ...]) -> Term:
    """Right-nested pairing; a 1-tuple is the item itself."""
    if not items:
        raise ValueError("empty tuple")
    out = items[-1]
    for t in reversed(items[:-1]):
        out = App("pair", (t, out))
    return out


def untuple(t: Term, n: int) -> list[Term] | None:
    """Inverse of :func:`tuple_term` for an ``n``-tuple; ``None`` if shapes differ."""
    items: list[Term] = []
    cur = t
    for _ in range(n - 1):
        if not (isinstance(cur, App) and cur.fn == "pair"):
            return None
        items.append(cur.args[0])
        cur = cur.args[1]
    items.append(cur)
    return items


def reduce_destructor(fn: str, args: tuple[Term, ...]) -> Term | None:
    if fn == "sdec":
        c, k = args
        if isinstance(c, App) and c.fn == "senc" and c.args[1] == k:
            return c.args[0]
        return None
    if fn == "adec":
        c, sk = args
        if (
            isinstance(c, App)
            and c.fn == "aenc"
            and c.args[1] == App("pk", (sk,))
        ):
            return c.args[0]
        return None
    if fn == "checksign":
        s, vk = args
        if (
            isinstance(s, App)
            and s.fn == "sign"
            and isinstance(vk, App)
            and vk.fn == "pk"
            and vk.args[0] == s.args[1]
        ):
            return s.args[0]
        return None
    if fn in ("proj1", "proj2"):
        (p,) = args
        if isinstance(p, App) and p.fn == "pair":
            return p.args[0 if fn == "proj1" else 1]
        return None
    raise KeyError(fn)


def substitute(t: Term, env: dict[str, Term]) -> Term | None:
    """Instantiate ``Var`` leaves from ``env`` and evaluate destructors.

    Returns ``None`` when a destructor fails or a variable is unbound.
    """
    if isinstance(t, Var):
        return env.get(t.id)
    if isinstance(t, Name):
        return t
    assert isinstance(t, App)
    args = []
    for a in t.args:
        v = substitute(a, env)
        if v is None:
            return None
        args.append(v)
    if t.fn in DESTRUCTORS:
        return reduce_destructor(t.fn, tuple(args))
    return App(t.fn, args)


def all_subterms(terms: Iterable[Term]) -> set[Term]:
    out: set[Term] = set()
    stack = list(terms)
    while stack:
        t = stack.pop()
        if t in out:
            continue
        out.add(t)
        if isinstance(t, App):
            stack.extend(t.args)
    return out


def term_sort_key(t: Term) -> tuple[int, str]:
    return (t.depth, str(t))
