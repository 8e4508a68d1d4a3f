"""Prayer times and Qibla bearing.

Solar coordinates use the USNO low-precision formulas (good to about a
minute of time between 1800 and 2200):

    d = JD - 2451545.0
    g = 357.529 + 0.98560028 d                  mean anomaly
    q = 280.459 + 0.98564736 d                  mean longitude
    L = q + 1.915 sin g + 0.020 sin 2g          ecliptic longitude
    e = 23.439 - 0.00000036 d                   obliquity
    RA = atan2(cos e sin L, cos L)
    declination = asin(sin e sin L)
    equation of time = q/15 - RA/15  (hours)
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from functools import lru_cache

from ..config import load_json
from ..errors import DegenerateLocation, InvalidInput, UndefinedTime

SUNRISE_ALTITUDE = -0.833  # refraction plus solar semi-diameter
PRAYERS = ("fajr", "sunrise", "dhuhr", "asr", "maghrib", "isha")


@dataclass(frozen=True)
class PrayerMethod:
    name: str
    fajr_angle: float
    isha_angle: float | None = None
    isha_minutes: float | None = None
    asr_factor: float = 1.0

    def __post_init__(self):
        if (self.isha_angle is None) == (self.isha_minutes is None):
            raise ValueError("a method sets exactly one of isha_angle and isha_minutes")


@lru_cache(maxsize=4)
def load_almanac(path: str = "almanac.json") -> dict:
    return load_json(path, log_checksum=True)


def get_method(name: str | None = None) -> PrayerMethod:
    config = load_almanac()
    name = name or config["default_method"]
    try:
        preset = config["methods"][name]
    except KeyError:
        raise InvalidInput(f"unknown calculation method {name!r}; known: {', '.join(config['methods'])}") from None
    return PrayerMethod(name=name, **preset)


def kaaba() -> tuple[float, float]:
    k = load_almanac()["kaaba"]
    return k["latitude"], k["longitude"]


def _sin(deg: float) -> float:
    return math.sin(math.radians(deg))


def _cos(deg: float) -> float:
    return math.cos(math.radians(deg))


def julian_day(date: dt.date) -> float:
    """Julian day at 00:00 UT of ``date``."""
    return date.toordinal() + 1721424.5


def sun_position(jd: float) -> tuple[float, float]:
    """Return (declination in degrees, equation of time in hours)."""
    d = jd - 2451545.0
    g = (357.529 + 0.98560028 * d) % 360
    q = (280.459 + 0.98564736 * d) % 360
    lam = (q + 1.915 * _sin(g) + 0.020 * _sin(2 * g)) % 360
    e = 23.439 - 0.00000036 * d
    ra = math.degrees(math.atan2(_cos(e) * _sin(lam), _cos(lam))) / 15 % 24
    decl = math.degrees(math.asin(_sin(e) * _sin(lam)))
    eqt = q / 15 - ra
    eqt = (eqt + 12) % 24 - 12
    return decl, eqt


@dataclass(frozen=True)
class PrayerTimes:
    fajr: dt.datetime | None
    sunrise: dt.datetime | None
    dhuhr: dt.datetime | None
    asr: dt.datetime | None
    maghrib: dt.datetime | None
    isha: dt.datetime | None
    method: PrayerMethod
    undefined: dict[str, str] = field(default_factory=dict)

    def get(self, prayer: str) -> dt.datetime:
        value = getattr(self, prayer)
        if value is None:
            raise UndefinedTime(prayer, self.undefined.get(prayer, "undefined"))
        return value

    def as_dict(self) -> dict[str, str | None]:
        return {p: (getattr(self, p).isoformat(timespec="minutes") if getattr(self, p) else None) for p in PRAYERS}


class _Day:
    def __init__(self, latitude: float, longitude: float, date: dt.date):
        self.lat = latitude
        self.lon = longitude
        self.jd0 = julian_day(date)

    def transit(self) -> float:
        t = 12.0 - self.lon / 15
        for _ in range(3):
            _, eqt = sun_position(self.jd0 + t / 24)
            t = 12.0 - eqt - self.lon / 15
        return t

    def _hour_angle(self, altitude: float, t: float) -> float | None:
        decl, _ = sun_position(self.jd0 + t / 24)
        cos_h = (_sin(altitude) - _sin(self.lat) * _sin(decl)) / (_cos(self.lat) * _cos(decl))
        if not -1.0 <= cos_h <= 1.0:
            return None
        return math.degrees(math.acos(cos_h)) / 15

    def time_at_altitude(self, altitude, direction: int, noon: float) -> float | None:
        """UT hour when the sun crosses ``altitude`` (callable of time, or degrees)."""
        t = noon + direction * 6
        for _ in range(4):
            alt = altitude(t) if callable(altitude) else altitude
            h = self._hour_angle(alt, t)
            if h is None:
                return None
            _, eqt = sun_position(self.jd0 + t / 24)
            t = 12.0 - eqt - self.lon / 15 + direction * h
        return t

    def asr_altitude(self, factor: float, t: float) -> float:
        decl, _ = sun_position(self.jd0 + t / 24)
        return math.degrees(math.atan(1.0 / (factor + math.tan(math.radians(abs(self.lat - decl))))))


def prayer_times(
    latitude: float,
    longitude: float,
    date: dt.date,
    method: PrayerMethod | str | None = None,
    utc_offset: float = 0.0,
) -> PrayerTimes:
    """Compute the six daily times; unattainable ones are ``None`` and listed in ``undefined``.

    Times are returned as aware datetimes at the fixed ``utc_offset`` (hours).
    """
    if not -90 <= latitude <= 90 or not -180 <= longitude <= 180:
        raise InvalidInput(f"invalid coordinates ({latitude}, {longitude})")
    if not isinstance(method, PrayerMethod):
        method = get_method(method)
    day = _Day(latitude, longitude, date)
    noon = day.transit()
    hours: dict[str, float | None] = {"dhuhr": noon}
    hours["sunrise"] = day.time_at_altitude(SUNRISE_ALTITUDE, -1, noon)
    hours["maghrib"] = day.time_at_altitude(SUNRISE_ALTITUDE, +1, noon)
    hours["fajr"] = day.time_at_altitude(-method.fajr_angle, -1, noon)
    hours["asr"] = day.time_at_altitude(lambda t: day.asr_altitude(method.asr_factor, t), +1, noon)
    if method.isha_minutes is not None:
        hours["isha"] = None if hours["maghrib"] is None else hours["maghrib"] + method.isha_minutes / 60
    else:
        hours["isha"] = day.time_at_altitude(-method.isha_angle, +1, noon)

    tz = dt.timezone(dt.timedelta(hours=utc_offset))
    base = dt.datetime.combine(date, dt.time(0), tzinfo=tz)
    undefined = {}
    values = {}
    for prayer in PRAYERS:
        h = hours[prayer]
        if h is None:
            undefined[prayer] = "the sun does not cross the required altitude on this date"
            values[prayer] = None
        else:
            values[prayer] = base + dt.timedelta(hours=h + utc_offset)
    return PrayerTimes(method=method, undefined=undefined, **values)


# ---------------------------------------------------------------------------
# qibla


def qibla_bearing(latitude: float, longitude: float, target: tuple[float, float] | None = None) -> float:
    """Initial great-circle bearing toward the Kaaba, degrees clockwise from true north in [0, 360)."""
    if not -90 <= latitude <= 90 or not -180 <= longitude <= 180:
        raise InvalidInput(f"invalid coordinates ({latitude}, {longitude})")
    lat2, lon2 = target or kaaba()
    phi1, phi2 = math.radians(latitude), math.radians(lat2)
    dlon = math.radians(lon2 - longitude)
    cos_dist = math.sin(phi1) * math.sin(phi2) + math.cos(phi1) * math.cos(phi2) * math.cos(dlon)
    if cos_dist > 1 - 1e-12:
        raise DegenerateLocation("location coincides with the Kaaba")
    if cos_dist < -1 + 1e-12:
        raise DegenerateLocation("location is antipodal to the Kaaba; every direction is a great circle")
    y = math.sin(dlon) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlon)
    bearing = math.degrees(math.atan2(y, x)) % 360.0
    return 0.0 if bearing == 360.0 else bearing
