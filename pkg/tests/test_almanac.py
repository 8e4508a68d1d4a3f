from __future__ import annotations

import datetime as dt

import pytest

import oracles
from groundqa.almanac import (
    HijriDate,
    find_event,
    get_method,
    gregorian_to_hijri,
    hijri_to_gregorian,
    next_occurrence,
    prayer_times,
    qibla_bearing,
    year_length,
)
from groundqa.almanac.prayer import kaaba
from groundqa.errors import DegenerateLocation, InvalidHijriDate, InvalidInput, OutOfRange, UndefinedTime


def test_epoch_and_known_dates():
    assert hijri_to_gregorian(HijriDate(1, 1, 1)) == dt.date(622, 7, 19)
    assert gregorian_to_hijri(dt.date(622, 7, 19), check_range=False) == HijriDate(1, 1, 1)
    assert gregorian_to_hijri(dt.date(2024, 3, 11)) == HijriDate(1445, 9, 1)
    assert hijri_to_gregorian((1446, 10, 1)) == dt.date(2025, 3, 31)
    assert str(HijriDate(1445, 9, 1)) == "1 Ramadan 1445 AH"
    assert HijriDate(1445, 9, 1).isoformat() == "1445-09-01"
    assert HijriDate(1445, 9, 1).format_ar().startswith("1 رمضان")


def test_range_and_validation():
    with pytest.raises(OutOfRange):
        gregorian_to_hijri(dt.date(1899, 12, 31))
    with pytest.raises(OutOfRange):
        gregorian_to_hijri(dt.date(600, 1, 1), check_range=False)
    with pytest.raises(InvalidHijriDate):
        HijriDate(1445, 2, 30)
    with pytest.raises(InvalidHijriDate):
        HijriDate(1445, 13, 1)
    assert {year_length(y) for y in range(1400, 1430)} == {354, 355}


def test_events():
    event = find_event("When is Eid al-Fitr this year?")
    assert event is not None and (event.month, event.day) == (10, 1)
    assert find_event("متى عيد الفطر").name == event.name
    assert find_event("nothing here") is None
    h, g = next_occurrence(event, dt.date(2025, 3, 1))
    assert h == HijriDate(1446, 10, 1) and g == dt.date(2025, 3, 31)
    h, g = next_occurrence(event, dt.date(2025, 4, 1))
    assert h.year == 1447 and g > dt.date(2025, 4, 1)


def _hours(t: dt.datetime) -> float:
    return t.hour + t.minute / 60 + t.second / 3600 + t.microsecond / 3.6e9


def test_doha_times_are_ordered_and_dhuhr_matches_noaa():
    day = dt.date(2025, 3, 1)
    times = prayer_times(25.2854, 51.531, day, "default", 3.0)
    order = [times.fajr, times.sunrise, times.dhuhr, times.asr, times.maghrib, times.isha]
    assert all(a < b for a, b in zip(order, order[1:]))
    assert abs(_hours(times.dhuhr) - 3.0 - oracles.noaa_solar_noon_utc(day, 51.531)) * 60 <= 2.0
    assert times.as_dict()["dhuhr"].startswith("2025-03-01T11:4")
    assert times.undefined == {}


def test_methods_change_the_right_times():
    day = dt.date(2025, 6, 1)
    standard = prayer_times(40.0, -74.0, day, "default", -4)
    hanafi = prayer_times(40.0, -74.0, day, "hanafi", -4)
    assert hanafi.asr > standard.asr and hanafi.fajr == standard.fajr
    isna = prayer_times(40.0, -74.0, day, "isna", -4)
    assert isna.fajr > standard.fajr
    uq = prayer_times(21.4, 39.8, day, "umm_al_qura", 3)
    assert uq.isha - uq.maghrib == dt.timedelta(minutes=90)
    with pytest.raises(InvalidInput):
        get_method("no-such-method")


def test_undefined_times_raise_on_access():
    polar = prayer_times(78.0, 15.0, dt.date(2025, 6, 21), "default", 1)
    with pytest.raises(UndefinedTime):
        polar.get("fajr")
    assert polar.as_dict()["fajr"] is None
    night = prayer_times(80.0, 0.0, dt.date(2025, 12, 21), "default", 0)
    assert night.sunrise is None and night.maghrib is None


def test_invalid_coordinates():
    with pytest.raises(InvalidInput):
        prayer_times(91, 0, dt.date(2025, 1, 1))
    with pytest.raises(InvalidInput):
        qibla_bearing(0, 181)


@pytest.mark.parametrize("lat, lon, expected", [(51.5074, -0.1278, 119.0), (40.7128, -74.006, 58.5), (35.68, 139.69, 293.0), (-6.2, 106.85, 295.2)])
def test_qibla_for_known_cities(lat, lon, expected):
    assert oracles.angle_diff(qibla_bearing(lat, lon), expected) < 0.5


def test_qibla_degenerate_points():
    k_lat, k_lon = kaaba()
    with pytest.raises(DegenerateLocation):
        qibla_bearing(k_lat, k_lon)
    with pytest.raises(DegenerateLocation):
        qibla_bearing(-k_lat, k_lon - 180)
    assert 0 <= qibla_bearing(k_lat + 0.01, k_lon) < 360
