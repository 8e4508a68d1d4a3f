"""Localized response templates (refusals, fallbacks, section headers)."""

from __future__ import annotations

from functools import lru_cache

from .config import load_json

LOCALES = ("en", "ar")


@lru_cache(maxsize=4)
def load_templates(path: str = "templates.json") -> dict:
    return load_json(path, log_checksum=True)


def pick_locale(locale: str | None) -> str:
    locale = (locale or "en").lower().split("-")[0]
    return locale if locale in LOCALES else "en"


def template(key: str, locale: str | None = None, path: str = "templates.json") -> str:
    return load_templates(path)[key][pick_locale(locale)]


def detect_locale(text: str) -> str:
    """'ar' when Arabic letters outnumber Latin letters."""
    arabic = sum(1 for ch in text if "؀" <= ch <= "ۿ")
    latin = sum(1 for ch in text if ch.isascii() and ch.isalpha())
    return "ar" if arabic > latin else "en"
