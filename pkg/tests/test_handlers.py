from __future__ import annotations

import json

import pytest

from groundqa.clients import ScriptedClient
from groundqa.errors import InvalidInput
from groundqa.extraction import RuleBasedExtractor, extract_inheritance, extract_zakat
from groundqa.handlers import (
    HandlerContext,
    build_tool_registry,
    calendar_handler,
    default_handlers,
    find_location,
    hadith_handler,
    inheritance_handler,
    prayer_handler,
    quran_handler,
    supplication_handler,
    zakat_handler,
)
from groundqa.router import Intent, IntentDecision
from groundqa.agent import ToolCall


def ctx(services, query, intent, locale="en", **options):
    return HandlerContext(query, IntentDecision(intent, 1.0, "test"), services, locale, options=options)


def test_extract_zakat_phrasings():
    assert extract_zakat("I have 10,000 dollars for a full year, nisab 5000")["assets"][0]["amount"] == 10000
    gold = extract_zakat("100 grams of gold held for one year, gold price 70")
    assert gold["assets"][0]["asset_class"] == "gold" and gold["assets"][0]["amount"] == 100
    assert extract_zakat("عندي 5000 ريال")["hawl_satisfied"] is None
    assert extract_zakat("savings of 300 dollars for less than a year")["hawl_satisfied"] is False


def test_extract_inheritance_phrasings():
    heirs = extract_inheritance("A man left a wife, two sons and a daughter; estate 120000")["heirs"]
    assert heirs == {"wife": 1, "son": 2, "daughter": 1}
    assert extract_inheritance("estate 120000 left to a wife")["estate_value"] == 120000
    with pytest.raises(ValueError):
        RuleBasedExtractor().generate([{"role": "user", "content": "x"}])


def test_zakat_handler_computes_or_asks(services):
    out = zakat_handler(ctx(services, "I have 10000 dollars held for a full year and the nisab is 5000", Intent.ZAKAT_CALCULATION))
    assert out.payload["zakat"]["total"] == "250.00"
    ask = zakat_handler(ctx(services, "How much zakat on 10000 dollars?", Intent.ZAKAT_CALCULATION))
    assert "needs" in ask.payload


def test_inheritance_handler(services):
    out = inheritance_handler(ctx(services, "The estate of 24000 goes to a wife and one son", Intent.INHERITANCE_COMPUTATION))
    shares = out.payload["inheritance"]["shares"]
    assert shares["wife"] == "1/8" and shares["son"] == "7/8"
    assert out.payload["inheritance"]["amounts"]["wife"] == "3000.00"


def test_calendar_handler(services):
    out = calendar_handler(ctx(services, "What is 2024-03-11 in the Hijri calendar?", Intent.CALENDAR_QUERY))
    assert out.payload["hijri"] == "1445-09-01"
    today = calendar_handler(ctx(services, "What is the Hijri date today?", Intent.CALENDAR_QUERY))
    assert today.payload["gregorian"] == "2025-03-01"
    eid = calendar_handler(ctx(services, "When is Eid al-Fitr?", Intent.CALENDAR_QUERY))
    assert eid.payload["hijri"] == "1446-10-01" and eid.payload["gregorian"] == "2025-03-31"
    with pytest.raises(InvalidInput):
        calendar_handler(ctx(services, "today", Intent.CALENDAR_QUERY, date="soon"))


def test_prayer_handler_and_locations(services):
    assert find_location("prayer times in doha").name == "Doha"
    assert find_location("times at 21.4, 39.8").latitude == 21.4
    assert find_location("nowhere special") is None
    times = prayer_handler(ctx(services, "Prayer times in Doha", Intent.PRAYER_TIMES))
    assert set(times.payload["times"]) >= {"fajr", "dhuhr", "isha"}
    qibla = prayer_handler(ctx(services, "Qibla direction from London", Intent.PRAYER_TIMES))
    assert abs(qibla.payload["qibla"] - 119.0) < 0.5
    assert "needs" in prayer_handler(ctx(services, "prayer times", Intent.PRAYER_TIMES)).payload


def test_retrieval_handlers_cite(services, index):
    quran = quran_handler(ctx(services, "verse about patience", Intent.QURAN_RETRIEVAL))
    assert quran.evidence and all(index.get(i).corpus.value == "quran" for i in quran.evidence)
    dua = supplication_handler(ctx(services, "dua before sleeping", Intent.SUPPLICATION_LOOKUP))
    assert dua.evidence and all(index.get(i).corpus.value == "supplication" for i in dua.evidence)
    text = index.get("hadith:nawawi40:1").text
    hadith = hadith_handler(ctx(services, f'Is this authentic: "{text}"', Intent.HADITH_VERIFICATION))
    assert hadith.payload["verification"]["verified"] and hadith.evidence == ("hadith:nawawi40:1",)


def test_tool_registry_covers_intents_and_stubs(services):
    registry = build_tool_registry(services)
    assert {"hijri_calendar", "prayer_times", "zakat_calculator", "quran_search"} <= set(registry.names)
    out = json.loads(registry.call(ToolCall("hijri_calendar", {"query": "2024-03-11"})))
    assert out["hijri"] == "1445-09-01"
    default_handlers()
