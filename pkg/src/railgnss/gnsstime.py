"""Continuous GNSS time as (week, seconds of week)."""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass
from functools import total_ordering

from railgnss.constants import SECONDS_PER_WEEK

GPS_EPOCH = _dt.datetime(1980, 1, 6)


@total_ordering
@dataclass(frozen=True)
class GpsTime:
    """A GNSS system-time instant.

    Galileo system time shares the GPS week numbering used in RINEX 3, so
    both constellations are expressed on this one scale.
    """

    week: int
    sow: float

    def __post_init__(self):
        if not 0.0 <= self.sow < SECONDS_PER_WEEK:
            week, sow = divmod(self.sow, SECONDS_PER_WEEK)
            object.__setattr__(self, "week", self.week + int(week))
            object.__setattr__(self, "sow", float(sow))

    @property
    def seconds(self) -> float:
        """Seconds since the GPS epoch."""
        return self.week * SECONDS_PER_WEEK + self.sow

    @classmethod
    def from_seconds(cls, seconds: float) -> GpsTime:
        week, sow = divmod(seconds, SECONDS_PER_WEEK)
        return cls(int(week), float(sow))

    @classmethod
    def from_calendar(cls, year, month, day, hour=0, minute=0, second=0.0) -> GpsTime:
        whole = int(second)
        stamp = _dt.datetime(year, month, day, hour, minute, whole)
        delta = stamp - GPS_EPOCH
        total = delta.days * 86400 + delta.seconds + (second - whole)
        week, sow = divmod(total, SECONDS_PER_WEEK)
        return cls(int(week), float(sow))

    def to_calendar(self) -> _dt.datetime:
        return GPS_EPOCH + _dt.timedelta(weeks=self.week, seconds=self.sow)

    def __sub__(self, other: GpsTime) -> float:
        return (self.week - other.week) * SECONDS_PER_WEEK + (self.sow - other.sow)

    def __add__(self, seconds: float) -> GpsTime:
        return GpsTime(self.week, self.sow + seconds)

    def __lt__(self, other: GpsTime) -> bool:
        return (self.week, self.sow) < (other.week, other.sow)
