from __future__ import annotations

import json
import time

import pytest

from secmodel.dyverifier import INCONCLUSIVE, SATISFIED, VIOLATED, Bounds, Verdict, explore, replay, verify
from secmodel.dyverifier.checks import check_authenticity, check_confidentiality
from secmodel.piexport import AbstractionError, abstract_design
from support import (
    FIRMWARE,
    KEYDIST,
    bundled_model,
    bundled_text,
    edit,
    model_of,
    mutant_no_mac_check,
    mutant_plaintext_leak,
)


def statuses(verdicts):
    return [(v.query, v.status) for v in verdicts]


def test_keydist_satisfied_at_two_sessions():
    vs = verify(bundled_model(KEYDIST), Bounds(sessions=2, depth=6))
    assert statuses(vs) == [
        ("Confidentiality ECU1.PSK1", SATISFIED),
        ("Authenticity ECU1.st1.msg KM.decipherOK.msgauth", SATISFIED),
    ]
    assert all(v.witness is None for v in vs)


def test_firmware_satisfied():
    assert {v.status for v in verify(bundled_model(FIRMWARE))} == {SATISFIED}


def test_plaintext_leak_has_short_replayable_witness():
    (conf, auth) = verify(model_of(mutant_plaintext_leak()), Bounds(sessions=1))
    assert conf.status == VIOLATED
    assert len(conf.witness) <= 3
    # the key-assigning step, the public send, then the attacker reads the channel
    assert [w.kind for w in conf.witness] == ["transition", "transition", "eavesdrop"]
    assert conf.witness[1].transition.startswith("st1 -> waitAck")
    explorer = explore(abstract_design(model_of(mutant_plaintext_leak())), Bounds(sessions=1)).explorer
    _, items = replay(explorer, conf.moves)
    assert items == conf.witness


def test_missing_mac_check_has_injection_witness():
    (conf, auth) = verify(model_of(mutant_no_mac_check()), Bounds(sessions=1))
    assert conf.status == SATISFIED
    assert auth.status == VIOLATED
    assert auth.witness[0].kind == "inject"
    assert auth.witness[-1].block == "KM"


def test_injective_mode_detects_replay():
    # a receiver that loops accepts the same MAC'd request twice
    text = edit(
        bundled_text(KEYDIST),
        "transition decipherOK -> sent {",
        "transition decipherOK -> waiting {",
    )
    plain = verify(model_of(text), Bounds(sessions=1, steps=6))
    inj = verify(model_of(text), Bounds(sessions=1, steps=6), injective=True)
    assert plain[1].status == SATISFIED
    assert inj[1].status == VIOLATED
    assert inj[1].query.endswith("(injective)")


def test_private_channel_authenticity():
    text = bundled_text(KEYDIST)
    text = edit(text, "link ECU1.toKM <-> KM.fromECU1 public", "link ECU1.toKM <-> KM.fromECU1 private")
    text = edit(
        text,
        "transition waiting -> decipherOK when verifyMAC(msgauth, PSK1, macr) {",
        "transition waiting -> decipherOK {",
    )
    (_, auth) = verify(model_of(text), Bounds(sessions=1))
    assert auth.status == SATISFIED


def test_never_sent_attribute_is_confidential():
    text = edit(bundled_text(KEYDIST), "block ECUN {\n", "block ECUN {\n  attribute spare : key\n")
    vs = verify(model_of(text + "\nproperty Confidentiality ECUN.spare\n"), Bounds(sessions=1))
    assert (vs[-1].query, vs[-1].status) == ("Confidentiality ECUN.spare", SATISFIED)


def test_confidentiality_of_a_written_attribute_is_rejected():
    text = bundled_text(KEYDIST) + "\nproperty Confidentiality ECUN.ksess\n"
    with pytest.raises(AbstractionError) as ei:
        verify(model_of(text), Bounds(sessions=1))
    (d,) = ei.value.diagnostics
    assert "ECUN.ksess" in d.message and "separate attribute" in d.message


def test_budget_exhaustion_is_inconclusive():
    vs = verify(bundled_model(KEYDIST), Bounds(sessions=1, max_states=3))
    assert {v.status for v in vs} == {INCONCLUSIVE}
    assert all(v.witness is None and v.notes for v in vs)


def test_por_does_not_change_verdicts():
    for text in (bundled_text(KEYDIST), mutant_plaintext_leak(), mutant_no_mac_check()):
        m = model_of(text)
        a = verify(m, Bounds(sessions=1), reduce=True)
        b = verify(m, Bounds(sessions=1), reduce=False)
        assert statuses(a) == statuses(b)


def test_checks_can_run_on_a_shared_reachability_set():
    m = model_of(mutant_plaintext_leak())
    design = abstract_design(m)
    rs = explore(design, Bounds(sessions=1))
    conf = check_confidentiality(m.properties[0], rs)
    auth = check_authenticity(m.properties[1], rs)
    # once PSK1 leaks the attacker can also forge requests
    assert (conf.status, auth.status) == (VIOLATED, VIOLATED)


def test_verdict_json_shape():
    (conf, _) = verify(model_of(mutant_plaintext_leak()), Bounds(sessions=1))
    data = json.loads(json.dumps(conf.to_json()))
    assert set(data) == {"query", "status", "bounds", "witness", "notes"}
    assert data["bounds"]["sessions"] == 1
    assert data["witness"][-1]["kind"] == "eavesdrop"


def test_witness_required_exactly_for_violations():
    with pytest.raises(ValueError):
        Verdict("q", VIOLATED, Bounds())
    with pytest.raises(ValueError):
        Verdict("q", SATISFIED, Bounds(), witness=[])


def test_model_without_properties_yields_nothing():
    assert verify(model_of("block A {}\n")) == []


def test_fast_enough_for_the_bundled_example():
    t0 = time.perf_counter()
    verify(bundled_model(KEYDIST), Bounds(sessions=2))
    assert time.perf_counter() - t0 < 60
