from .hijri import (
    CalendarEvent,
    HijriDate,
    events_on,
    find_event,
    gregorian_to_hijri,
    hijri_to_gregorian,
    is_leap_year,
    load_events,
    month_length,
    next_occurrence,
    year_length,
)
from .prayer import PRAYERS, PrayerMethod, PrayerTimes, get_method, kaaba, load_almanac, prayer_times, qibla_bearing

__all__ = [
    "CalendarEvent", "HijriDate", "events_on", "find_event", "gregorian_to_hijri", "hijri_to_gregorian",
    "is_leap_year", "load_events", "month_length", "next_occurrence", "year_length",
    "PRAYERS", "PrayerMethod", "PrayerTimes", "get_method", "kaaba", "load_almanac", "prayer_times", "qibla_bearing",
]
