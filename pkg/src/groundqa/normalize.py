"""Arabic-aware text normalization used for indexing, matching and rule lookup.

Rules, applied in order:

1. NFKC (folds Arabic presentation forms onto base letters).
2. Drop harakat, tanween, shadda, sukun, superscript alef, Quranic
   annotation marks and tatweel.
3. Map alef variants (أ إ آ ٱ) to bare alef, hamza-on-waw to waw,
   hamza-on-ya and alef maqsura to ya, ta marbuta to ha.
4. Arabic-Indic digits become ASCII digits.
5. Casefold Latin text.
6. Punctuation becomes whitespace; whitespace runs collapse to one space.

Display text is never altered; only the normalized copy is used for lookups.
"""

from __future__ import annotations

import re
import unicodedata

_DIACRITICS = re.compile(
    "[\u0610-\u061a\u064b-\u065f\u0670\u06d6-\u06dc\u06df-\u06e4\u06e7\u06e8\u06ea-\u06ed\u0640]"
)

_LETTER_MAP = str.maketrans(
    {
        "\u0623": "\u0627",  # أ
        "\u0625": "\u0627",  # إ
        "\u0622": "\u0627",  # آ
        "\u0671": "\u0627",  # ٱ
        "\u0624": "\u0648",  # ؤ
        "\u0626": "\u064a",  # ئ
        "\u0649": "\u064a",  # ى
        "\u0629": "\u0647",  # ة
        **{chr(0x0660 + i): str(i) for i in range(10)},
        **{chr(0x06F0 + i): str(i) for i in range(10)},
    }
)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PSZC" and not ch.isspace()


def strip_diacritics(text: str) -> str:
    return _DIACRITICS.sub("", text)


def normalize(text: str) -> str:
    """Return the canonical matching form of ``text``."""
    text = unicodedata.normalize("NFKC", text)
    text = strip_diacritics(text)
    text = text.translate(_LETTER_MAP).casefold()
    text = "".join(" " if _is_punct(ch) else ch for ch in text)
    # casefold/NFKC can expose fresh combining marks; a second pass settles them
    text = strip_diacritics(unicodedata.normalize("NFKC", text)).translate(_LETTER_MAP)
    return " ".join(text.split())


def tokenize(text: str) -> list[str]:
    return normalize(text).split()
