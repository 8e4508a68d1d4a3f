"""Offline parameter extractor.

``RuleBasedExtractor`` speaks the same JSON contract as a model asked with
the calculators' extraction prompts, so the calculators can run with no model
configured. It understands short English and Arabic phrasings; anything it
cannot read is returned as null and the calculator asks the user.
"""

from __future__ import annotations

import json
import re

from .calculators.inheritance import INHERITANCE_EXTRACTION_PROMPT
from .calculators.zakat import ZAKAT_EXTRACTION_PROMPT
from .clients import Message, last_user_text
from .normalize import normalize

# normalize() turns separators into spaces, so numbers are protected first:
# thousands separators are dropped and a decimal point becomes "p".
_NUMBER = r"\d+(?:p\d+)?"
_WORD_NUMBERS = {
    "one": 1, "a": 1, "an": 1, "two": 2, "three": 3, "four": 4,
    "واحد": 1, "واحده": 1, "اثنين": 2, "اثنان": 2, "ثلاث": 3, "ثلاثه": 3, "اربع": 4, "اربعه": 4,
}


def _to_number(text: str) -> float | int:
    return float(text.replace("p", ".")) if "p" in text else int(text)


def _normalize(text: str) -> str:
    text = re.sub(r"(?<=\d)[,\u066c](?=\d{3}\b)", "", text)
    text = re.sub(r"(?<=\d)[.\u066b](?=\d)", "p", text)
    norm = normalize(text)
    return re.sub(r"(?<!\S)و(?=\d)", "و ", norm)  # split "و3" (and 3)


# ---------------------------------------------------------------------------
# zakat

_GOLD = re.compile(rf"({_NUMBER})\s*(?:g|grams?|gm|غرام|غراما|جرام|جراما|غم)\s*(?:of\s+)?(?:gold|من\s+الذهب|ذهب)")
_SILVER = re.compile(rf"({_NUMBER})\s*(?:g|grams?|gm|غرام|غراما|جرام|جراما|غم)\s*(?:of\s+)?(?:silver|من\s+الفضه|فضه)")
_TRADE = re.compile(rf"(?:trade goods|merchandise|inventory|stock|بضاعه|عروض التجاره|سلع)\D{{0,30}}?({_NUMBER})|({_NUMBER})\D{{0,20}}(?:of\s+)?(?:trade goods|merchandise|inventory|بضاعه|عروض تجاره|عروض التجاره)")
_MONEY = re.compile(
    rf"({_NUMBER})\s*(?:qar|sar|aed|usd|riyals?|rials?|dirhams?|dinars?|dollars?|pounds?|euros?|ريال|ريالا|درهم|دينار|دولار|جنيه|يورو|\$)"
    rf"|(?:\$|qar|sar|usd)\s*({_NUMBER})"
    rf"|(?:مبلغ|amount of|savings of|have|لدي|عندي|املك)\s+({_NUMBER})"
)
_NISAB = re.compile(rf"(?:nisab|النصاب|نصاب)\D{{0,20}}?({_NUMBER})")
_GOLD_PRICE = re.compile(rf"(?:gold price|price of gold|سعر غرام الذهب|سعر الذهب|سعر جرام الذهب)\D{{0,20}}?({_NUMBER})")
_HAWL_YES = re.compile(
    r"(?:full|whole|entire|one|a|lunar)\s+year|for\s+(?:a|one|over a)\s+year|a year has passed|حال عليه الحول|حال الحول|مر عليه (?:عام|سنه|حول)|سنه كامله|عام كامل|حولا كاملا|منذ سنه|منذ عام"
)
_HAWL_NO = re.compile(r"less than a year|not (?:yet )?(?:a|one) (?:full )?year|لم يحل|لم يمر عليه|اقل من سنه|اقل من عام")


def extract_zakat(text: str) -> dict:
    norm = _normalize(text)
    assets = []
    consumed: list[tuple[int, int]] = []

    def take(regex, asset_class):
        for m in regex.finditer(norm):
            if any(m.start() < hi and m.end() > lo for lo, hi in consumed):
                continue
            value = next(g for g in m.groups() if g)
            assets.append({"asset_class": asset_class, "amount": _to_number(value)})
            consumed.append((m.start(), m.end()))

    for regex in (_NISAB, _GOLD_PRICE):
        consumed.extend((m.start(), m.end()) for m in regex.finditer(norm))
    take(_GOLD, "gold")
    take(_SILVER, "silver")
    take(_TRADE, "trade_goods")
    take(_MONEY, "monetary")

    hawl = None
    if _HAWL_NO.search(norm):
        hawl = False
    elif _HAWL_YES.search(norm):
        hawl = True
    nisab = None
    if m := _NISAB.search(norm):
        nisab = {"monetary": _to_number(m.group(1))}
    price = _to_number(m.group(1)) if (m := _GOLD_PRICE.search(norm)) else None
    return {"assets": assets, "hawl_satisfied": hawl, "nisab": nisab, "gold_price_per_gram": price, "currency": None}


# ---------------------------------------------------------------------------
# inheritance

# (phrase in normalized text, relation, count; None = plural without a number)
_HEIR_PHRASES: list[tuple[str, str, int | None]] = [
    ("ابن الابن", "son_of_son", 1), ("ابن ابن", "son_of_son", 1), ("ابناء الابن", "son_of_son", None),
    ("بنت الابن", "daughter_of_son", 1), ("بنت ابن", "daughter_of_son", 1), ("بنات الابن", "daughter_of_son", None),
    ("sons of a son", "son_of_son", None), ("son's son", "son_of_son", 1), ("son s son", "son_of_son", 1),
    ("son of a son", "son_of_son", 1), ("son of the son", "son_of_son", 1),
    ("son's daughter", "daughter_of_son", 1), ("son s daughter", "daughter_of_son", 1),
    ("daughter of a son", "daughter_of_son", 1), ("daughter of the son", "daughter_of_son", 1),
    ("paternal grandfather", "paternal_grandfather", 1), ("grandfather", "paternal_grandfather", 1),
    ("grandmother", "grandmother", 1), ("grandsons", "son_of_son", None), ("grandson", "son_of_son", 1),
    ("granddaughters", "daughter_of_son", None), ("granddaughter", "daughter_of_son", 1),
    ("full brothers", "full_brother", None), ("full brother", "full_brother", 1),
    ("full sisters", "full_sister", None), ("full sister", "full_sister", 1),
    ("brothers", "full_brother", None), ("brother", "full_brother", 1),
    ("sisters", "full_sister", None), ("sister", "full_sister", 1),
    ("husband", "husband", 1), ("wives", "wife", None), ("wife", "wife", 1),
    ("sons", "son", None), ("son", "son", 1), ("daughters", "daughter", None), ("daughter", "daughter", 1),
    ("father", "father", 1), ("mother", "mother", 1),
]
_AR_TOKENS: dict[str, tuple[str, int | None]] = {
    "زوج": ("husband", 1), "زوجها": ("husband", 1),
    "زوجه": ("wife", 1), "زوجته": ("wife", 1), "زوجتين": ("wife", 2), "زوجتان": ("wife", 2), "زوجات": ("wife", None),
    "ابن": ("son", 1), "ولد": ("son", 1), "ابنا": ("son", 1), "ابنين": ("son", 2), "ابنان": ("son", 2),
    "ولدين": ("son", 2), "ابناء": ("son", None), "اولاد": ("son", None),
    "بنت": ("daughter", 1), "ابنه": ("daughter", 1), "ابنته": ("daughter", 1), "بنتين": ("daughter", 2),
    "بنتان": ("daughter", 2), "ابنتين": ("daughter", 2), "ابنتان": ("daughter", 2), "بنات": ("daughter", None),
    "اب": ("father", 1), "ابو": ("father", 1), "ابوه": ("father", 1), "ابيه": ("father", 1), "والد": ("father", 1),
    "ام": ("mother", 1), "امه": ("mother", 1), "امها": ("mother", 1), "والده": ("mother", 1), "والدته": ("mother", 1),
    "جد": ("paternal_grandfather", 1), "جده": ("grandmother", 1),
    "اخ": ("full_brother", 1), "اخا": ("full_brother", 1), "شقيق": ("full_brother", 1), "اخوين": ("full_brother", 2),
    "اخوان": ("full_brother", 2), "اخوه": ("full_brother", None), "اشقاء": ("full_brother", None),
    "اخت": ("full_sister", 1), "شقيقه": ("full_sister", 1), "اختين": ("full_sister", 2), "اختان": ("full_sister", 2),
    "اخوات": ("full_sister", None), "شقيقات": ("full_sister", None),
}
_SIBLING_ADJECTIVES = {"شقيق", "شقيقه", "اشقاء", "شقيقات"}
_ESTATE = re.compile(
    rf"(?:estate|left|leaves|wealth|تركه|ترك|خلف|ميراث|مبلغ)\D{{0,30}}?({_NUMBER})(?!\s*(?:sons?|daughters?|wives|brothers?|sisters?))"
)


def extract_inheritance(text: str) -> dict:
    norm = _normalize(text)
    heirs: dict[str, int | None] = {}

    def add(rel: str, count: int | None) -> None:
        if count is None or heirs.get(rel, 0) is None:
            heirs[rel] = None
        else:
            heirs[rel] = heirs.get(rel, 0) + count

    def count_before(prefix: str, default: int | None) -> int | None:
        words = prefix.split()
        if words:
            last = words[-1]
            if last.isdigit():
                return int(last)
            if last in _WORD_NUMBERS:
                return _WORD_NUMBERS[last] if default is None or last not in ("a", "an") else default
        return default

    work = f" {norm} "
    for phrase, rel, count in _HEIR_PHRASES:
        pattern = re.compile(rf"(?<=\W){re.escape(phrase)}(?=\W)")
        while (m := pattern.search(work)) is not None:
            add(rel, count_before(work[: m.start()], count))
            work = work[: m.start()] + " " * (m.end() - m.start()) + work[m.end() :]

    tokens = work.split()
    previous = None
    for i, token in enumerate(tokens):
        core = token[1:] if token.startswith("و") and token[1:] in _AR_TOKENS else token
        if core not in _AR_TOKENS:
            previous = None
            continue
        rel, count = _AR_TOKENS[core]
        if core in _SIBLING_ADJECTIVES and previous == rel:
            continue  # "اخ شقيق" is one heir, the second word only qualifies it
        previous = rel
        if i + 1 < len(tokens) and tokens[i + 1].isdigit():
            count = int(tokens[i + 1])
        elif i > 0 and (tokens[i - 1].isdigit() or tokens[i - 1] in _WORD_NUMBERS):
            prev = tokens[i - 1]
            count = int(prev) if prev.isdigit() else _WORD_NUMBERS[prev]
        elif i + 1 < len(tokens) and tokens[i + 1] in _WORD_NUMBERS and count in (1, None):
            count = _WORD_NUMBERS[tokens[i + 1]]
        add(rel, count)

    estate = _to_number(m.group(1)) if (m := _ESTATE.search(norm)) else None
    return {"estate_value": estate, "heirs": heirs}


class RuleBasedExtractor:
    """Chat-client stand-in for the calculators' extraction prompts."""

    def __init__(self):
        self.calls = 0

    def generate(self, messages: list[Message]) -> str:
        self.calls += 1
        system = next((m["content"] for m in messages if m.get("role") == "system"), "")
        text = last_user_text(messages)
        if system == ZAKAT_EXTRACTION_PROMPT:
            return json.dumps(extract_zakat(text))
        if system == INHERITANCE_EXTRACTION_PROMPT:
            return json.dumps(extract_inheritance(text), ensure_ascii=False)
        raise ValueError("RuleBasedExtractor only answers the calculator extraction prompts")
