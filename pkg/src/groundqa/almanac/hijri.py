"""Tabular (arithmetic) Hijri calendar with the civil epoch.

Months alternate 30/29 days starting with Muharram at 30; Dhu al-Hijjah gains
a 30th day in leap years. Years 2, 5, 7, 10, 13, 16, 18, 21, 24, 26 and 29 of
each 30-year cycle are leap years, i.e. ``(14 + 11 * year) % 30 < 11``.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from functools import lru_cache

from ..config import load_jsonl
from ..errors import InvalidHijriDate, OutOfRange
from ..normalize import normalize

# 1 Muharram 1 AH = 16 July 622 Julian = 19 July 622 proleptic Gregorian
EPOCH_ORDINAL = dt.date(622, 7, 19).toordinal()
SUPPORTED_YEARS = (1900, 2200)

MONTH_NAMES = (
    "Muharram", "Safar", "Rabi al-Awwal", "Rabi al-Thani", "Jumada al-Ula", "Jumada al-Akhirah",
    "Rajab", "Sha'ban", "Ramadan", "Shawwal", "Dhu al-Qadah", "Dhu al-Hijjah",
)
MONTH_NAMES_AR = (
    "محرم", "صفر", "ربيع الأول", "ربيع الآخر", "جمادى الأولى", "جمادى الآخرة",
    "رجب", "شعبان", "رمضان", "شوال", "ذو القعدة", "ذو الحجة",
)


def is_leap_year(year: int) -> bool:
    return (14 + 11 * year) % 30 < 11


def month_length(year: int, month: int) -> int:
    if month % 2 == 1 or (month == 12 and is_leap_year(year)):
        return 30
    return 29


def year_length(year: int) -> int:
    return 355 if is_leap_year(year) else 354


@dataclass(frozen=True, order=True)
class HijriDate:
    year: int
    month: int
    day: int

    def __post_init__(self):
        if self.year < 1:
            raise InvalidHijriDate(f"year must be positive, got {self.year}")
        if not 1 <= self.month <= 12:
            raise InvalidHijriDate(f"month must be 1-12, got {self.month}")
        if not 1 <= self.day <= month_length(self.year, self.month):
            raise InvalidHijriDate(
                f"day {self.day} invalid: {MONTH_NAMES[self.month - 1]} {self.year} has "
                f"{month_length(self.year, self.month)} days"
            )

    def __str__(self) -> str:
        return f"{self.day} {MONTH_NAMES[self.month - 1]} {self.year} AH"

    def format_ar(self) -> str:
        return f"{self.day} {MONTH_NAMES_AR[self.month - 1]} {self.year} هـ"

    def isoformat(self) -> str:
        return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"


def _ordinal(year: int, month: int, day: int) -> int:
    return (
        EPOCH_ORDINAL - 1
        + day
        + 29 * (month - 1) + (6 * month - 1) // 11
        + 354 * (year - 1) + (3 + 11 * year) // 30
    )


def _from_ordinal(ordinal: int) -> HijriDate:
    year = (30 * (ordinal - EPOCH_ORDINAL) + 10646) // 10631
    prior_days = ordinal - _ordinal(year, 1, 1)
    month = min(12, (11 * prior_days + 330) // 325)
    day = ordinal - _ordinal(year, month, 1) + 1
    return HijriDate(year, month, day)


def gregorian_to_hijri(date: dt.date, *, check_range: bool = True) -> HijriDate:
    """Convert a (proleptic) Gregorian date.

    Dates outside 1900-2200 CE raise :class:`OutOfRange` unless
    ``check_range=False``; the arithmetic itself is valid back to the epoch.
    """
    if check_range and not SUPPORTED_YEARS[0] <= date.year <= SUPPORTED_YEARS[1]:
        raise OutOfRange(f"{date.isoformat()} outside supported range {SUPPORTED_YEARS[0]}-{SUPPORTED_YEARS[1]} CE")
    ordinal = date.toordinal()
    if ordinal < EPOCH_ORDINAL:
        raise OutOfRange(f"{date.isoformat()} precedes the Hijri epoch")
    return _from_ordinal(ordinal)


def hijri_to_gregorian(h: HijriDate | tuple[int, int, int]) -> dt.date:
    if not isinstance(h, HijriDate):
        h = HijriDate(*h)
    return dt.date.fromordinal(_ordinal(h.year, h.month, h.day))


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class CalendarEvent:
    month: int
    day: int
    name: str
    name_ar: str = ""
    aliases: tuple[str, ...] = ()

    def on(self, year: int) -> HijriDate:
        return HijriDate(year, self.month, min(self.day, month_length(year, self.month)))


@lru_cache(maxsize=4)
def load_events(path: str = "events.jsonl") -> tuple[CalendarEvent, ...]:
    events = []
    for rec in load_jsonl(path):
        events.append(
            CalendarEvent(int(rec["month"]), int(rec["day"]), rec["name"], rec.get("name_ar", ""), tuple(rec.get("aliases", ())))
        )
    return tuple(events)


def events_on(h: HijriDate, events: tuple[CalendarEvent, ...] | None = None) -> list[CalendarEvent]:
    events = events if events is not None else load_events()
    return [e for e in events if e.month == h.month and e.day == h.day]


def find_event(text: str, events: tuple[CalendarEvent, ...] | None = None) -> CalendarEvent | None:
    """Return the event whose longest alias occurs in ``text`` (normalized match)."""
    events = events if events is not None else load_events()
    norm = f" {normalize(text)} "
    best, best_len = None, 0
    for event in events:
        for alias in (event.name, event.name_ar, *event.aliases):
            key = normalize(alias)
            if key and f" {key} " in norm and len(key) > best_len:
                best, best_len = event, len(key)
    return best


def next_occurrence(event: CalendarEvent, after: dt.date) -> tuple[HijriDate, dt.date]:
    """First date of ``event`` on or after ``after``."""
    year = gregorian_to_hijri(after, check_range=False).year
    for candidate_year in (year, year + 1):
        h = event.on(candidate_year)
        g = hijri_to_gregorian(h)
        if g >= after:
            return h, g
    raise AssertionError("unreachable: an event recurs every Hijri year")
