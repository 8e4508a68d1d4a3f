"""The nine intent handlers and the agent's tool registry.

Every handler takes a :class:`HandlerContext` and returns a
:class:`HandlerResult`. Deterministic intents (calculators, calendar, prayer
times) never call a language model except for parameter extraction; retrieval
intents quote the corpora verbatim and cite document ids.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from . import almanac
from .agent import (
    PLATFORM_STUBS,
    AgentTrace,
    EvidenceItem,
    Param,
    ToolRegistry,
    ToolSpec,
    assemble_grounded_answer,
    run_loop,
    stub_handler,
)
from .calculators import (
    JurisprudenceParams,
    compute_inheritance,
    compute_zakat,
    default_params,
    extract_estate_spec,
    extract_zakat_params,
)
from .calculators.params import present
from .clients import ChatClient, Embedder
from .config import Settings
from .errors import DegenerateLocation, ExtractionIncomplete, InvalidInput
from .extraction import RuleBasedExtractor
from .normalize import normalize
from .retrieval import Corpus, CorpusIndex, search_hybrid, verify_hadith
from .router import ConversationTurn, HandlerRegistry, Intent, IntentDecision
from .templates import pick_locale, template

log = logging.getLogger(__name__)


@dataclass
class Services:
    """Shared, read-only resources handed to every handler."""

    index: CorpusIndex
    embedder: Embedder
    settings: Settings = field(default_factory=Settings)
    chat_client: ChatClient | None = None  # rephrase, classify, agent loop
    answer_client: ChatClient | None = None  # grounded answers
    extractor: ChatClient = field(default_factory=RuleBasedExtractor)
    params: JurisprudenceParams = field(default_factory=default_params)
    today: Callable[[], dt.date] = dt.date.today
    tools: ToolRegistry | None = None


@dataclass(frozen=True)
class HandlerContext:
    query: str
    decision: IntentDecision
    services: Services
    locale: str = "en"
    history: tuple[ConversationTurn, ...] = ()
    options: Mapping[str, Any] = field(default_factory=dict)


@dataclass
class HandlerResult:
    text: str
    payload: dict[str, Any] = field(default_factory=dict)
    evidence: tuple[str, ...] = ()
    trace: AgentTrace | None = None


def _ar(ctx: HandlerContext) -> bool:
    return pick_locale(ctx.locale) == "ar"


def _clarify(ctx: HandlerContext, exc: ExtractionIncomplete) -> HandlerResult:
    missing = ", ".join(exc.missing)
    return HandlerResult(template("clarify", ctx.locale).format(missing=missing), {"needs": list(exc.missing)})


def _reference_date(ctx: HandlerContext) -> dt.date:
    value = ctx.options.get("date")
    if value is None:
        return ctx.services.today()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError:
        raise InvalidInput(f"invalid date option {value!r}; use YYYY-MM-DD") from None


# ---------------------------------------------------------------------------
# retrieval-backed handlers

# question scaffolding that carries no topical signal for corpus search
_FILLER = frozenset(normalize(w) for w in (
    "what is the a an of for to in on me please tell give show find which how do i can you when say should "
    "dua duaa dua'a supplication supplications verse verses ayah ayat quran about "
    "ما هو هي ماذا اريد اعطني اعطيني عن في من على الى دعاء ادعيه الدعاء ايه ايات الايه الايات القران قل لي"
).split())


def _topic(query: str) -> str:
    kept = [t for t in normalize(query).split() if t not in _FILLER]
    return " ".join(kept) if kept else query


def _grounded(ctx: HandlerContext, corpora: Sequence[Corpus], k: int = 5) -> HandlerResult:
    s = ctx.services
    hits = []
    for corpus in corpora:
        hits += search_hybrid(s.index, ctx.query, k, s.embedder, corpus=corpus, k_const=s.settings.rrf_k)
    hits.sort(key=lambda h: (-h.score, h.doc_id))
    docs = [s.index.get(h.doc_id) for h in hits[:k]]
    answer = assemble_grounded_answer(ctx.query, [EvidenceItem.from_document(d) for d in docs], s.answer_client, ctx.locale)
    return HandlerResult(
        answer.render(ctx.locale),
        {"answer": answer.to_dict(), "retrieved": [d.id for d in docs]},
        tuple(dict.fromkeys(src for _, src in answer.citations)),
    )


def fiqh_handler(ctx: HandlerContext) -> HandlerResult:
    return _grounded(ctx, (Corpus.FIQH, Corpus.QURAN, Corpus.HADITH))


def general_handler(ctx: HandlerContext) -> HandlerResult:
    """Agent loop when a chat model is configured, otherwise grounded retrieval."""
    s = ctx.services
    if s.chat_client is None:
        return _grounded(ctx, (Corpus.GENERAL, Corpus.FIQH))
    registry = s.tools or build_tool_registry(s)
    conversation = [{"role": "assistant" if t.role == "assistant" else "user", "content": t.text} for t in ctx.history if t.role != "tool"]
    conversation.append({"role": "user", "content": ctx.query})
    final, trace = run_loop(conversation, registry, s.chat_client, s.settings.max_iterations, ctx.locale)
    return HandlerResult(final.text, {"agent": trace.to_dict()}, trace=trace)


def quran_handler(ctx: HandlerContext, k: int = 3) -> HandlerResult:
    s = ctx.services
    hits = search_hybrid(s.index, _topic(ctx.query), k, s.embedder, corpus=Corpus.QURAN, k_const=s.settings.rrf_k)
    if not hits:
        return HandlerResult(template("abstention", ctx.locale), {"verses": []})
    lines, verses = [], []
    for hit in hits:
        doc = s.index.get(hit.doc_id)
        # the guard re-verifies each marked verse; the citation is already in place
        lines.append(f"⟪{doc.text}⟫ [Quran {doc.reference}]")
        verses.append({"doc_id": doc.id, "reference": doc.reference, "surah_name": doc.metadata.get("surah_name")})
    return HandlerResult("\n".join(lines), {"verses": verses}, tuple(v["doc_id"] for v in verses))


_QUOTED = re.compile(r"[\"“«]([^\"”»]{8,})[\"”»]")


def _quoted_text(query: str) -> str:
    match = _QUOTED.search(query)
    if match:
        return match.group(1)
    if ":" in query:
        head, tail = query.split(":", 1)
        if len(tail.split()) >= 3:
            return tail
    return query


def hadith_handler(ctx: HandlerContext) -> HandlerResult:
    s = ctx.services
    text = _quoted_text(ctx.query)
    result = verify_hadith(text, s.index, s.embedder, s.settings.hadith_verified_threshold)
    payload = {"verification": result.to_dict(), "checked_text": text}
    doc = result.document
    if doc is None:
        return HandlerResult(template("abstention", ctx.locale), payload)
    pct = f"{result.similarity:.0%}"
    if result.verified:
        lead = f"هذا النص موافق لحديث ثابت (تطابق {pct}):" if _ar(ctx) else f"This wording matches a recorded hadith ({pct} agreement):"
    else:
        lead = (
            f"لم أتمكن من التحقق من هذا النص. أقرب حديث في المجموعة (تطابق {pct}):"
            if _ar(ctx)
            else f"I could not verify this wording. The closest hadith in the collection ({pct} agreement) is:"
        )
    return HandlerResult(f"{lead}\n{doc.text}\n[{doc.id}] {doc.reference}", payload, (doc.id,))


def supplication_handler(ctx: HandlerContext, k: int = 3) -> HandlerResult:
    s = ctx.services
    hits = search_hybrid(s.index, _topic(ctx.query), k, s.embedder, corpus=Corpus.SUPPLICATION, k_const=s.settings.rrf_k)
    if not hits:
        return HandlerResult(template("abstention", ctx.locale), {"supplications": []})
    blocks, items = [], []
    for hit in hits:
        doc = s.index.get(hit.doc_id)
        translation = doc.metadata.get("translation", "")
        block = doc.text if _ar(ctx) or not translation else f"{doc.text}\n{translation}"
        blocks.append(f"{block}\n[{doc.id}] {doc.reference}")
        items.append({"doc_id": doc.id, "reference": doc.reference})
    return HandlerResult("\n\n".join(blocks), {"supplications": items}, tuple(i["doc_id"] for i in items))


# ---------------------------------------------------------------------------
# calculators


def zakat_handler(ctx: HandlerContext) -> HandlerResult:
    s = ctx.services
    try:
        zakat_input = extract_zakat_params(ctx.query, s.extractor, s.params)
    except ExtractionIncomplete as exc:
        return _clarify(ctx, exc)
    result = compute_zakat(zakat_input)
    amounts = result.presented()
    if _ar(ctx):
        head = f"الزكاة الواجبة: {amounts['total']}"
    else:
        head = f"Zakat due: {amounts['total']}"
    lines = [head, *(f"- {line}" for line in result.explanation)]
    return HandlerResult("\n".join(lines), {"zakat": amounts, "explanation": list(result.explanation)})


def inheritance_handler(ctx: HandlerContext) -> HandlerResult:
    s = ctx.services
    try:
        spec = extract_estate_spec(ctx.query, s.extractor)
    except ExtractionIncomplete as exc:
        return _clarify(ctx, exc)
    allocation = compute_inheritance(spec, s.params)
    amounts = allocation.amounts(spec)
    lines = []
    for rel, share in allocation.shares.items():
        count = spec.count(rel)
        who = rel.value.replace("_", " ") + (f" x{count}" if count > 1 else "")
        amount = f" = {present(amounts[rel])}" if spec.estate_value != 1 else ""
        lines.append(f"- {who}: {share.numerator}/{share.denominator}{amount}")
    head = "توزيع التركة:" if _ar(ctx) else "Distribution of the estate:"
    notes = [f"({a.value})" for a in sorted(allocation.adjustments_applied, key=lambda a: a.value)]
    text = "\n".join([head, *lines, *notes])
    payload = allocation.to_dict()
    payload["amounts"] = {rel.value: str(present(v)) for rel, v in amounts.items()}
    return HandlerResult(text, {"inheritance": payload})


# ---------------------------------------------------------------------------
# calendar


def _month_aliases() -> dict[str, int]:
    aliases: dict[str, int] = {}
    for i, (en, ar) in enumerate(zip(almanac.hijri.MONTH_NAMES, almanac.hijri.MONTH_NAMES_AR), 1):
        for name in (en, ar):
            aliases[normalize(name)] = i
    extra = {
        "rabi al awal": 3, "rabi ul awwal": 3, "rabi i": 3, "rabi al akhir": 4, "rabi ii": 4, "rabi ul thani": 4,
        "jumada al awwal": 5, "jumada i": 5, "jumada al thani": 6, "jumada ii": 6, "shaaban": 8, "shaban": 8,
        "ramadhan": 9, "ramazan": 9, "dhul qadah": 11, "dhu al qidah": 11, "dhul hijjah": 12, "dhu al hijja": 12,
        "ربيع الثاني": 4, "جمادى الاولى": 5, "جمادى الثانيه": 6, "ذي القعده": 11, "ذي الحجه": 12,
    }
    aliases.update({normalize(k): v for k, v in extra.items()})
    return aliases


_ISO_DATE = re.compile(r"\b(\d{4})-(\d{1,2})-(\d{1,2})\b")


def _find_hijri(norm: str) -> tuple[int | None, int, int | None] | None:
    """(day or None, month, year or None) for an 'D Month YYYY' mention."""
    for name, month in sorted(_month_aliases().items(), key=lambda kv: -len(kv[0])):
        m = re.search(rf"(?:(\d{{1,2}})\s+)?(?<!\w){re.escape(name)}(?:\s+(\d{{3,4}}))?(?!\w)", norm)
        if m:
            day = int(m.group(1)) if m.group(1) else None
            year = int(m.group(2)) if m.group(2) else None
            return day, month, year
    return None


def calendar_handler(ctx: HandlerContext) -> HandlerResult:
    today = _reference_date(ctx)
    norm = normalize(ctx.query)
    ar = _ar(ctx)

    def describe(h: almanac.HijriDate, g: dt.date) -> str:
        return f"{h.format_ar() if ar else h} = {g.isoformat()}"

    iso = _ISO_DATE.search(ctx.query)
    hijri = _find_hijri(norm)
    if iso and not (hijri and hijri[2]) and not re.search(r"\bah\b|هـ|هجري", norm):
        g = dt.date(*map(int, iso.groups()))
        h = almanac.gregorian_to_hijri(g)
        events = [e.name_ar if ar else e.name for e in almanac.events_on(h)]
        text = describe(h, g) + (f" ({', '.join(events)})" if events else "")
        return HandlerResult(text, {"gregorian": g.isoformat(), "hijri": h.isoformat(), "events": events})
    if iso:
        h = almanac.HijriDate(*map(int, iso.groups()))
        g = almanac.hijri_to_gregorian(h)
        return HandlerResult(describe(h, g), {"gregorian": g.isoformat(), "hijri": h.isoformat()})

    event = almanac.find_event(ctx.query)
    if event is not None:
        year = hijri[2] if hijri and hijri[2] else None
        if year is not None:
            h = event.on(year)
            g = almanac.hijri_to_gregorian(h)
        else:
            h, g = almanac.next_occurrence(event, today)
        name = event.name_ar if ar and event.name_ar else event.name
        return HandlerResult(f"{name}: {describe(h, g)}", {"event": event.name, "gregorian": g.isoformat(), "hijri": h.isoformat()})

    if hijri is not None:
        day, month, year = hijri
        if year is None:
            current = almanac.gregorian_to_hijri(today, check_range=False)
            year = current.year if (month, day or 1) >= (current.month, current.day) else current.year + 1
        h = almanac.HijriDate(year, month, day or 1)
        g = almanac.hijri_to_gregorian(h)
        return HandlerResult(describe(h, g), {"gregorian": g.isoformat(), "hijri": h.isoformat()})

    h = almanac.gregorian_to_hijri(today)
    events = [e.name_ar if ar else e.name for e in almanac.events_on(h)]
    text = describe(h, today) + (f" ({', '.join(events)})" if events else "")
    return HandlerResult(text, {"gregorian": today.isoformat(), "hijri": h.isoformat(), "events": events})


# ---------------------------------------------------------------------------
# prayer times and qibla

_COORDS = re.compile(r"(-?\d{1,2}(?:\.\d+)?)\s*[,;]\s*(-?\d{1,3}(?:\.\d+)?)")
_QIBLA = re.compile(r"qibla|kibla|قبله|القبله|اتجاه")


@dataclass(frozen=True)
class Location:
    name: str
    latitude: float
    longitude: float
    utc_offset: float = 0.0


def find_location(query: str, options: Mapping[str, Any] | None = None) -> Location | None:
    options = options or {}
    if options.get("latitude") is not None and options.get("longitude") is not None:
        return Location(
            str(options.get("city") or f"{options['latitude']}, {options['longitude']}"),
            float(options["latitude"]),
            float(options["longitude"]),
            float(options.get("utc_offset", 0.0)),
        )
    m = _COORDS.search(query)
    if m:
        lat, lon = float(m.group(1)), float(m.group(2))
        return Location(f"{lat}, {lon}", lat, lon, float(options.get("utc_offset", round(lon / 15))))
    norm = f" {normalize(query)} "
    best = None
    for city in almanac.load_almanac()["cities"]:
        for alias in (city["name"], *city.get("aliases", ())):
            key = normalize(alias)
            if key and f" {key} " in norm and (best is None or len(key) > best[0]):
                best = (len(key), city)
    if best is None:
        return None
    city = best[1]
    return Location(city["name"], city["latitude"], city["longitude"], float(options.get("utc_offset", city["utc_offset"])))


def prayer_handler(ctx: HandlerContext) -> HandlerResult:
    location = find_location(ctx.query, ctx.options)
    if location is None:
        return _clarify(ctx, ExtractionIncomplete(["location"]))
    ar = _ar(ctx)
    if _QIBLA.search(normalize(ctx.query)):
        try:
            bearing = almanac.qibla_bearing(location.latitude, location.longitude)
        except DegenerateLocation as exc:
            return HandlerResult(str(exc), {"location": location.name, "qibla": None})
        text = (f"اتجاه القبلة من {location.name}: {bearing:.1f}° من الشمال الجغرافي" if ar
                else f"Qibla from {location.name}: {bearing:.1f}° clockwise from true north")
        return HandlerResult(text, {"location": location.name, "qibla": round(bearing, 2)})

    date = _reference_date(ctx)
    times = almanac.prayer_times(location.latitude, location.longitude, date, ctx.options.get("method"), location.utc_offset)
    names_ar = {"fajr": "الفجر", "sunrise": "الشروق", "dhuhr": "الظهر", "asr": "العصر", "maghrib": "المغرب", "isha": "العشاء"}
    lines = [f"{location.name} {date.isoformat()} (UTC{location.utc_offset:+g}, {times.method.name}):"]
    for prayer in almanac.PRAYERS:
        value = getattr(times, prayer)
        label = names_ar[prayer] if ar else prayer.capitalize()
        shown = value.strftime("%H:%M") if value else ("غير محدد" if ar else "undefined")
        lines.append(f"- {label}: {shown}")
    if times.undefined:
        lines.append(("ملاحظة: " if ar else "Note: ") + ", ".join(f"{p}: {r}" for p, r in times.undefined.items()))
    return HandlerResult(
        "\n".join(lines),
        {"location": location.name, "date": date.isoformat(), "method": times.method.name,
         "times": times.as_dict(), "undefined": dict(times.undefined)},
    )


# ---------------------------------------------------------------------------
# registries

INTENT_HANDLERS: dict[Intent, Callable[[HandlerContext], HandlerResult]] = {
    Intent.FIQH_REASONING: fiqh_handler,
    Intent.QURAN_RETRIEVAL: quran_handler,
    Intent.HADITH_VERIFICATION: hadith_handler,
    Intent.ZAKAT_CALCULATION: zakat_handler,
    Intent.INHERITANCE_COMPUTATION: inheritance_handler,
    Intent.SUPPLICATION_LOOKUP: supplication_handler,
    Intent.CALENDAR_QUERY: calendar_handler,
    Intent.PRAYER_TIMES: prayer_handler,
    Intent.GENERAL_KNOWLEDGE: general_handler,
}


def default_handlers() -> HandlerRegistry:
    return HandlerRegistry(INTENT_HANDLERS).validate()


_TOOL_DESCRIPTIONS = {
    Intent.FIQH_REASONING: ("fiqh_answer", "Answer a jurisprudence question from cited sources."),
    Intent.QURAN_RETRIEVAL: ("quran_search", "Find Quran verses about a topic; returns verbatim text with references."),
    Intent.HADITH_VERIFICATION: ("hadith_verify", "Check whether a quoted hadith matches a recorded narration."),
    Intent.ZAKAT_CALCULATION: ("zakat_calculator", "Compute zakat due from a description of assets and holding period."),
    Intent.INHERITANCE_COMPUTATION: ("inheritance_calculator", "Compute inheritance shares from a description of the heirs."),
    Intent.SUPPLICATION_LOOKUP: ("supplication_search", "Find an authentic supplication for an occasion."),
    Intent.CALENDAR_QUERY: ("hijri_calendar", "Convert between Hijri and Gregorian dates or find an Islamic event date."),
    Intent.PRAYER_TIMES: ("prayer_times", "Prayer times or Qibla direction for a city or coordinates."),
}


def build_tool_registry(services: Services) -> ToolRegistry:
    """One tool per non-general intent plus the platform stubs."""
    from .router import DecisionSource

    registry = ToolRegistry()
    for intent, (name, description) in _TOOL_DESCRIPTIONS.items():
        handler = INTENT_HANDLERS[intent]
        decision = IntentDecision(intent, 1.0, f"agent tool {name}", source=DecisionSource.MODEL_LAYER)

        def run(query: str, latitude: float | None = None, longitude: float | None = None, date: str | None = None,
                _handler=handler, _decision=decision) -> str:
            options = {k: v for k, v in (("latitude", latitude), ("longitude", longitude), ("date", date)) if v is not None}
            result = _handler(HandlerContext(query, _decision, services, options=options))
            return json.dumps({"text": result.text, **result.payload}, ensure_ascii=False, default=str)

        parameters = [Param("query", "string", True, "the question in natural language")]
        if intent in (Intent.PRAYER_TIMES, Intent.CALENDAR_QUERY):
            parameters.append(Param("date", "string", False, "YYYY-MM-DD"))
        if intent is Intent.PRAYER_TIMES:
            parameters += [Param("latitude", "number"), Param("longitude", "number")]
        registry.register(ToolSpec(name, description, tuple(parameters), "JSON result"), run)
    for spec in PLATFORM_STUBS:
        registry.register(spec, stub_handler(spec.name))
    return registry
