from __future__ import annotations

from collections import deque

import pytest

from secmodel.dyverifier import Bounds, explore, replay
from secmodel.piexport import abstract_design
from secmodel.terms import Name
from support import KEYDIST, bundled_model, model_of

LINEAR = """
block Solo {
  attribute x : data
  attribute y : data
  method H(1) : hash
}
statemachine Solo {
  initial state a
  state b
  state c
  transition a -> b { y = H(x) }
  transition b -> c { x = H(y) }
}
"""


def pingpong(visibility: str, loop: bool) -> str:
    back_a = "s1 -> s0" if loop else "s1 -> s2"
    back_b = "t1 -> t0" if loop else "t1 -> t2"
    extra_a = "" if loop else "  state s2\n"
    extra_b = "" if loop else "  state t2\n"
    return f"""
block A {{
  attribute x : nonce
  attribute y : data
  port out
  port inp
}}
block B {{
  attribute m : data
  port inp
  port out
}}
link A.out <-> B.inp {visibility}
link B.out <-> A.inp {visibility}
statemachine A {{
  initial state s0
  state s1
{extra_a}  transition s0 -> s1 {{ send out(x) }}
  transition {back_a} {{ receive inp(y) }}
}}
statemachine B {{
  initial state t0
  state t1
{extra_b}  transition t0 -> t1 {{ receive inp(m) }}
  transition {back_b} {{ send out(m) }}
}}
"""


def design_of(text: str):
    return abstract_design(model_of(text))


def test_linear_machine_has_three_control_states():
    rs = explore(design_of(LINEAR), Bounds(sessions=1), reduce=False)
    assert rs.control_states() == {("a",), ("b",), ("c",)}
    assert rs.complete and not rs.step_bound_hit


def test_por_collapses_invisible_steps_but_keeps_the_end_state():
    full = explore(design_of(LINEAR), Bounds(sessions=1), reduce=False)
    red = explore(design_of(LINEAR), Bounds(sessions=1), reduce=True)
    assert len(red) <= len(full)
    assert ("c",) in red.control_states()


def _pingpong_oracle(loop: bool, steps: int):
    """Hand-written interleaving enumeration over (A state, B state, A steps, B steps, A->B queue, B->A queue)."""
    init = ("s0", "t0", 0, 0, 0, 0)
    seen = {init}
    q = deque([init])
    while q:
        a, b, sa, sb, ab, ba = q.popleft()
        nxt = []
        if sa < steps:
            if a == "s0":
                nxt.append(("s1", b, sa + 1, sb, ab + 1, ba))
            elif a == "s1" and ba:
                nxt.append(("s0" if loop else "s2", b, sa + 1, sb, ab, ba - 1))
        if sb < steps:
            if b == "t0" and ab:
                nxt.append((a, "t1", sa, sb + 1, ab - 1, ba))
            elif b == "t1":
                nxt.append((a, "t0" if loop else "t2", sa, sb + 1, ab, ba + 1))
        for n in nxt:
            if n not in seen:
                seen.add(n)
                q.append(n)
    return seen


@pytest.mark.parametrize("loop", [False, True])
def test_private_pingpong_matches_oracle(loop):
    rs = explore(design_of(pingpong("private", loop)), Bounds(sessions=1, steps=10), reduce=False)
    oracle = _pingpong_oracle(loop, 10)
    assert rs.control_states() == {(a, b) for a, b, *_ in oracle}
    assert len(rs) == len(oracle)
    assert rs.step_bound_hit == loop


def test_public_pingpong_lets_the_attacker_drive_both_sides():
    rs = explore(design_of(pingpong("public", False)), Bounds(sessions=1, steps=10), reduce=False)
    assert rs.control_states() == {(a, b) for a in ("s0", "s1", "s2") for b in ("t0", "t1", "t2")}


def test_public_send_reaches_attacker_knowledge():
    rs = explore(design_of(pingpong("public", False)), Bounds(sessions=1), reduce=False)
    x = Name("A__x#0")
    assert any(x in s.knowledge for s in rs.states)
    assert x not in rs.initial.knowledge


def test_keydist_reaches_decipher_ok():
    design = abstract_design(bundled_model(KEYDIST))
    rs = explore(design, Bounds(sessions=1))
    km = [b.name for b in design.blocks].index("KM")
    assert any(cs[km] == "decipherOK" for cs in rs.control_states())
    assert rs.complete


def test_paths_replay_to_their_states():
    design = abstract_design(bundled_model(KEYDIST))
    rs = explore(design, Bounds(sessions=1))
    for st in list(rs.states)[:: max(1, len(rs) // 25)]:
        states, _ = replay(rs.explorer, rs.path_to(st))
        assert states[-1] == st


@pytest.mark.parametrize("reduce", [False, True])
def test_more_steps_never_lose_states(reduce):
    d = design_of(pingpong("private", True))
    small = explore(d, Bounds(sessions=1, steps=4), reduce=reduce)
    large = explore(d, Bounds(sessions=1, steps=8), reduce=reduce)
    assert small.control_states() <= large.control_states()
    assert len(small) < len(large)


def test_state_budget_marks_result_incomplete():
    rs = explore(design_of(pingpong("private", True)), Bounds(sessions=1, steps=10, max_states=5), reduce=False)
    assert not rs.complete and len(rs) == 5
    assert any("budget" in n for n in rs.notes)


def test_sessions_get_distinct_fresh_names():
    d = design_of(pingpong("public", False))
    rs = explore(d, Bounds(sessions=2, steps=3))
    init = rs.initial.locals
    assert init[0].bindings != init[2].bindings


@pytest.mark.parametrize("bad", [dict(sessions=0), dict(steps=0), dict(depth=-1), dict(max_states=0)])
def test_bounds_must_be_positive(bad):
    with pytest.raises(ValueError):
        Bounds(**bad)


def test_bounds_from_environment(monkeypatch):
    monkeypatch.setenv("SECMODEL_SESSIONS", "3")
    monkeypatch.setenv("SECMODEL_DEPTH", "4")
    b = Bounds.from_env(depth=5)
    assert (b.sessions, b.depth, b.steps) == (3, 5, 40)
