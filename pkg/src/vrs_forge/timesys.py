"""Constellation time scales as (system, week, seconds-of-week)."""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass

from .constants import BEIDOU, GALILEO, GPS, SYSTEMS

SECONDS_PER_WEEK = 604800.0
HALF_WEEK = 302400.0
SECONDS_PER_DAY = 86400.0

BDT_MINUS_GPST = -14.0
BDT_WEEK_OFFSET = 1356
GPS_EPOCH = _dt.datetime(1980, 1, 6)
GPS_MINUS_UTC = 18.0


def wrap_half_week(dt: float) -> float:
    """Fold a time difference into (-302400, 302400] seconds."""
    dt = math.fmod(dt, SECONDS_PER_WEEK)
    if dt > HALF_WEEK:
        dt -= SECONDS_PER_WEEK
    elif dt <= -HALF_WEEK:
        dt += SECONDS_PER_WEEK
    return dt


@dataclass(frozen=True)
class GnssTime:
    """A time tag in one constellation's own time scale.

    Galileo system time is carried with GPS week numbering.  BeiDou time uses
    BDT weeks (GPS week - 1356) and lags GPS time by 14 s.
    """

    system: str
    week: int
    tow: float

    def __post_init__(self) -> None:
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown constellation {self.system!r}")
        if not (0.0 <= self.tow < SECONDS_PER_WEEK):
            raise ValueError(f"tow out of range: {self.tow!r}")

    @classmethod
    def normalized(cls, system: str, week: int, tow: float) -> "GnssTime":
        extra, tow = divmod(tow, SECONDS_PER_WEEK)
        week = int(week + extra)
        if tow >= SECONDS_PER_WEEK:
            week += 1
            tow -= SECONDS_PER_WEEK
        return cls(system, week, float(tow))

    def __add__(self, seconds: float) -> "GnssTime":
        return GnssTime.normalized(self.system, self.week, self.tow + float(seconds))

    def __sub__(self, other):
        """``time - time`` gives seconds (other converted first); ``time - s`` shifts."""
        if isinstance(other, GnssTime):
            other = other.to_system(self.system)
            return (self.week - other.week) * SECONDS_PER_WEEK + (self.tow - other.tow)
        return self + (-float(other))

    def diff_wrapped(self, other: "GnssTime") -> float:
        """``self - other`` folded into (-302400, 302400] s."""
        return wrap_half_week(self - other)

    def to_system(self, system: str) -> "GnssTime":
        if system == self.system:
            return self
        gps = self._as_gps()
        if system in (GPS, GALILEO):
            return GnssTime(system, gps.week, gps.tow)
        if system == BEIDOU:
            return GnssTime.normalized(BEIDOU, gps.week - BDT_WEEK_OFFSET, gps.tow + BDT_MINUS_GPST)
        raise ValueError(f"unknown constellation {system!r}")

    def _as_gps(self) -> "GnssTime":
        if self.system == BEIDOU:
            return GnssTime.normalized(GPS, self.week + BDT_WEEK_OFFSET, self.tow - BDT_MINUS_GPST)
        return GnssTime(GPS, self.week, self.tow)

    @property
    def seconds_of_day(self) -> float:
        return self.tow % SECONDS_PER_DAY

    def to_datetime(self) -> _dt.datetime:
        """Calendar date-time in this time scale (no leap-second handling)."""
        return GPS_EPOCH + _dt.timedelta(weeks=self.week, seconds=self.tow)

    def day_of_year(self) -> float:
        """Fractional day of year counted from 0 at January 1st, 00:00."""
        stamp = self.to_datetime()
        start = _dt.datetime(stamp.year, 1, 1)
        return (stamp - start).total_seconds() / SECONDS_PER_DAY

    def __str__(self) -> str:
        return f"{self.system}{self.week}:{self.tow:.3f}"


def gps_time_from_unix(unix_seconds: float) -> GnssTime:
    """GPS time for a POSIX timestamp, using a fixed 18 s leap offset."""
    epoch = (GPS_EPOCH - _dt.datetime(1970, 1, 1)).total_seconds()
    total = unix_seconds - epoch + GPS_MINUS_UTC
    week, tow = divmod(total, SECONDS_PER_WEEK)
    return GnssTime.normalized(GPS, int(week), tow)


def parse_time(text: str, system: str = GPS) -> GnssTime:
    """Parse ``"week:tow"``."""
    try:
        week_text, tow_text = text.split(":")
        return GnssTime.normalized(system, int(week_text), float(tow_text))
    except ValueError as exc:
        raise ValueError(f"expected WEEK:TOW, got {text!r}") from exc
