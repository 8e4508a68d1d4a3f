from __future__ import annotations

import json

import pytest

from groundqa.clients import FailingClient, ScriptedClient
from groundqa.errors import EmptyQuery, MissingHandler
from groundqa.router import (
    ConversationTurn,
    DecisionSource,
    HandlerRegistry,
    Intent,
    IntentDecision,
    Role,
    RuleTable,
    classify,
    parse_classifier_output,
    rephrase,
    route,
)


@pytest.mark.parametrize(
    "query, label",
    [
        ("How much zakat do I pay on 5000 dollars?", Intent.ZAKAT_CALCULATION),
        ("كم زكاة مالي إذا كان عندي 10000 ريال", Intent.ZAKAT_CALCULATION),
        ("How is the inheritance divided between a wife and two sons?", Intent.INHERITANCE_COMPUTATION),
        ("كيف يقسم الميراث بين الزوجة والابن", Intent.INHERITANCE_COMPUTATION),
        ("What are the prayer times in Doha today?", Intent.PRAYER_TIMES),
        ("ما هو اتجاه القبلة من لندن", Intent.PRAYER_TIMES),
        ("What is the Hijri date today?", Intent.CALENDAR_QUERY),
        ("When is Eid al-Fitr?", Intent.CALENDAR_QUERY),
        ("Which verse of the Quran mentions patience?", Intent.QURAN_RETRIEVAL),
        ("Is this hadith authentic?", Intent.HADITH_VERIFICATION),
        ("What is the dua before sleeping?", Intent.SUPPLICATION_LOOKUP),
        ("What is the ruling on combining prayers when travelling?", Intent.FIQH_REASONING),
    ],
)
def test_rule_layer(rules, query, label):
    decision = classify(query, rules=rules)
    assert decision.label is label and decision.source is DecisionSource.RULE_LAYER and decision.confidence == 1.0


def test_model_layer_and_fallbacks(rules):
    reply = json.dumps({"label": "general_knowledge", "confidence": 0.7, "rationale": "r", "sub_questions": ["a", " "]})
    decision = classify("Tell me about astronomy", model_client=ScriptedClient([reply]), rules=rules)
    assert decision.source is DecisionSource.MODEL_LAYER and decision.sub_questions == ("a",)
    assert classify("Tell me about astronomy", rules=rules).confidence == 0.0
    assert classify("Tell me about astronomy", model_client=FailingClient(), rules=rules).label is Intent.GENERAL_KNOWLEDGE
    with pytest.raises(EmptyQuery):
        classify("   ", rules=rules)


@pytest.mark.parametrize(
    "reply",
    ["not json", '{"label": "astrology", "confidence": 0.5}', '{"label": "fiqh_reasoning", "confidence": 2}',
     '{"label": "fiqh_reasoning", "confidence": 0.5, "sub_questions": "x"}'],
)
def test_bad_classifier_output_falls_back(reply):
    decision = parse_classifier_output(reply)
    assert decision.label is Intent.GENERAL_KNOWLEDGE and decision.confidence == 0.0


def test_retrieval_flag_defaults_by_intent():
    assert not parse_classifier_output('{"label": "zakat_calculation", "confidence": 0.9}').retrieval_required
    assert parse_classifier_output('{"label": "fiqh_reasoning", "confidence": 0.9}').retrieval_required


def test_rule_table_priority_and_kinds():
    table = RuleTable.from_dict({
        "priority": ["zakat_calculation", "fiqh_reasoning"],
        "rules": {
            "fiqh_reasoning": [{"id": "f", "pattern": "ruling"}],
            "zakat_calculation": [{"id": "z", "pattern": "zakat", "kind": "word"}, {"id": "zr", "kind": "regex", "pattern": r"\d+ gold"}],
        },
    })
    assert table.match("ruling on zakat").id == "z"
    assert table.match("the zakatable ruling").id == "f"
    assert table.match("100 gold").id == "zr"
    assert table.match("nothing") is None


def test_rephrase():
    history = [ConversationTurn(Role.USER, "What is zakat on gold?", 0), ConversationTurn(Role.ASSISTANT, "2.5%", 1)]
    client = ScriptedClient(["What is zakat on silver?"])
    assert rephrase("and silver?", history, client).text == "What is zakat on silver?"
    assert "Return only" in client.calls[0][0]["content"] or client.calls[0][0]["role"] == "system"
    assert rephrase("and silver?", history, None).text == "and silver?"
    degraded = rephrase("and silver?", history, FailingClient())
    assert degraded.text == "and silver?" and degraded.warning.startswith("rephrase_failed")
    assert rephrase("standalone", (), client).text == "standalone"


def test_registry_validation_and_routing():
    with pytest.raises(MissingHandler):
        HandlerRegistry({Intent.FIQH_REASONING: lambda ctx: None}).validate()
    handlers = {i: (lambda ctx, i=i: i) for i in Intent}
    reg = HandlerRegistry(handlers).validate()
    decision = IntentDecision(Intent.PRAYER_TIMES, 1.0, "x")
    assert route(decision, reg)(None) is Intent.PRAYER_TIMES
    with pytest.raises(ValueError):
        IntentDecision(Intent.PRAYER_TIMES, 1.5, "x")
