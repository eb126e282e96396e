from __future__ import annotations

import re
import shutil

import pytest

from secmodel.piexport import AbstractionError, abstract_design, check_pv, emit_proverif
from secmodel.piexport.abstract import PUBLIC_CHANNEL, AAssign, AGuard, ARecv, ASend, CAnd, CEq
from secmodel.piexport.external import parse_results, run_proverif
from secmodel.terms import App, Name, Var
from support import KEYDIST, all_bundled, bundled_model, bundled_text, edit, model_of

TOY = """
block A {
  attribute a : data
  attribute b : data
  attribute c : data
  attribute n : int
  method MAC(2) : mac
  method check(2) : plain
  port p
}
statemachine A {
  initial state s
  state t
  state u
  state w
  transition s -> t { a = b + c }
  transition t -> u after(5, 10)
  transition u -> w when n > 3 and a == b { send p(a, 7) }
}
"""


def transitions(design, block):
    return {(t.source, t.target): t for t in design.block(block).transitions}


# --- abstraction --------------------------------------------------------------


def test_arithmetic_becomes_an_opaque_combination():
    d = abstract_design(model_of(TOY))
    (act,) = transitions(d, "A")[("s", "t")].actions
    assert act == AAssign("a", App("comb2", (Var("b"), Var("c"))))
    assert 2 in d.comb_arities


def test_mac_call_maps_to_mac_constructor():
    d = abstract_design(bundled_model(KEYDIST))
    acts = transitions(d, "KM")[("decipherOK", "sent")].actions
    assert AAssign("msg8", App("mac", (Var("msg1"), Var("PSK1")))) in acts


def test_timing_clause_dropped():
    d = abstract_design(model_of(TOY))
    t = transitions(d, "A")[("t", "u")]
    assert t.actions == () and t.timing_dropped


def test_numeric_guard_conjunct_erased_symbolic_one_kept():
    d = abstract_design(model_of(TOY))
    acts = transitions(d, "A")[("u", "w")].actions
    guard = next(a for a in acts if isinstance(a, AGuard))
    assert guard.cond == CEq(Var("a"), Var("b"))
    send = next(a for a in acts if isinstance(a, ASend))
    assert send.public and send.channel == PUBLIC_CHANNEL
    assert send.term == App("pair", (Var("a"), Name("lit_7", fresh=False)))


def test_verify_mac_guard_after_receive():
    d = abstract_design(bundled_model(KEYDIST))
    acts = transitions(d, "KM")[("waiting", "decipherOK")].actions
    assert isinstance(acts[0], ARecv) and acts[0].targets == ("msgauth", "macr")
    guard = next(a for a in acts if isinstance(a, AGuard))
    assert guard.cond == CEq(App("mac", (Var("msgauth"), Var("PSK1"))), Var("macr"))
    ecu = transitions(d, "ECU1")[("waitAck", "done")].actions
    assert isinstance(next(a for a in ecu if isinstance(a, AGuard)).cond, CAnd)


def test_shared_pragma_members_share_one_name():
    d = abstract_design(bundled_model(KEYDIST))
    assert d.initial[("ECU1", "PSK1")] == d.initial[("KM", "PSK1")]
    assert d.initial[("ECU1", "PSK1")].scope == "system"
    assert d.initial[("KM", "kN")].scope == "fresh"


def test_private_links_get_directional_channels():
    text = edit(
        bundled_text(KEYDIST),
        "link KM.toECUN <-> ECUN.fromKM public",
        "link KM.toECUN <-> ECUN.fromKM private",
    )
    d = abstract_design(model_of(text))
    private = sorted(n for n, c in d.channels.items() if not c.public)
    assert private == ["c__ECUN_fromKM__KM_toECUN", "c__KM_toECUN__ECUN_fromKM"]


def test_confidentiality_of_written_attribute_is_an_error():
    text = bundled_text(KEYDIST) + "\nproperty Confidentiality KM.msg1\n"
    with pytest.raises(AbstractionError) as ei:
        abstract_design(model_of(text))
    assert "KM.msg1" in str(ei.value)


# --- emission -------------------------------------------------------------------


@pytest.mark.parametrize("name", all_bundled())
def test_emission_is_deterministic_and_self_consistent(name):
    one = emit_proverif(model=bundled_model(name))
    two = emit_proverif(model=bundled_model(name))
    assert one == two
    assert check_pv(one) == []


def test_keydist_queries():
    text = emit_proverif(model=bundled_model(KEYDIST))
    (secrecy,) = re.findall(r"query attacker\((\w+)\)\.", text)
    assert f"free {secrecy}: bitstring [private]." in text
    assert (
        "query x: bitstring; event(authAccept__KM__decipherOK__msgauth(x)) ==> event(authSend__ECU1__st1__msg(x))."
        in text
    )
    inj = emit_proverif(model=bundled_model(KEYDIST), injective=True)
    assert "inj-event(authAccept__KM__decipherOK__msgauth(x)) ==> inj-event(authSend__ECU1__st1__msg(x))" in inj


def test_fresh_secret_uses_restricted_name():
    text = edit(bundled_text(KEYDIST), "property Confidentiality ECU1.PSK1", "property Confidentiality KM.kN")
    pv = emit_proverif(model=model_of(text))
    assert "query attacker(new KM__kN)." in pv
    assert "new KM__kN: bitstring;" in pv


def test_no_properties_still_emits_processes():
    text = emit_proverif(model=model_of(TOY))
    assert "query" not in text
    assert "let proc_A =" in text and text.rstrip().endswith(")")
    assert check_pv(text) == []


def test_multi_value_receive_uses_a_pair_pattern():
    text = emit_proverif(model=bundled_model(KEYDIST))
    assert re.search(r"let pair\(KM__msgauth__\d+: bitstring, KM__macr__\d+: bitstring\) = KM__in__\d+ in", text)


def test_branching_uses_attacker_selector():
    m = model_of(
        """
block A {
  attribute x : data
  port p
}
statemachine A {
  initial state s
  state l
  state r
  transition s -> l { send p(x) }
  transition s -> r
}
"""
    )
    text = emit_proverif(model=m)
    assert "if A__sel__1 = br__0 then (" in text and "const br__1: bitstring." in text
    assert check_pv(text) == []


def test_cycles_are_cut():
    m = model_of(
        """
block A {
  attribute x : data
  method H(1) : hash
}
statemachine A {
  initial state s
  state t
  transition s -> t { x = H(x) }
  transition t -> s { x = H(x) }
}
"""
    )
    text = emit_proverif(model=m)
    assert check_pv(text) == []
    assert text.count("let A__x__") == 2


# --- validator negatives ----------------------------------------------------------


GOOD = emit_proverif(model=bundled_model(KEYDIST))


@pytest.mark.parametrize(
    "mutate, expect",
    [
        (lambda t: t.replace("fun hash(bitstring): bitstring.\n", ""), "undeclared identifier 'hash'"),
        (lambda t: t.replace("fun mac(bitstring, bitstring)", "fun mac(bitstring)"), "expects 1"),
        (lambda t: t[: t.index("process")], "missing main process"),
        (lambda t: t.replace("free ch: channel.", "free ch channel."), "malformed free"),
        (lambda t: t + "(", "unbalanced"),
        (lambda t: t.replace("event authSend__ECU1__st1__msg(bitstring).\n", ""), "undeclared event"),
    ],
)
def test_pvcheck_catches_broken_specs(mutate, expect):
    problems = check_pv(mutate(GOOD))
    assert any(expect in p for p in problems), problems


# --- external ProVerif ----------------------------------------------------------


def test_result_parsing():
    out = "RESULT not attacker(PSK1[]) is true.\nRESULT event(a(x)) ==> event(b(x)) is false.\nRESULT q cannot be proved.\n"
    assert [r for _, r in parse_results(out)] == ["true", "false", "unknown"]


def test_missing_binary_raises():
    with pytest.raises(FileNotFoundError):
        run_proverif("/nonexistent/proverif", GOOD)


@pytest.mark.skipif(shutil.which("proverif") is None, reason="ProVerif is not installed")
def test_external_proverif_agrees_on_keydist():
    res = run_proverif(shutil.which("proverif"), GOOD)
    assert res.returncode == 0
    assert [r for _, r in res.results] == ["true", "true"]
