"""Domain types produced by the ingest stage."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from railgnss.gnsstime import GpsTime
from railgnss.taxonomy import EnvironmentClass

PSEUDORANGE_MIN = 1e6
PSEUDORANGE_MAX = 5e7
CN0_MAX = 70.0


@dataclass(frozen=True)
class SatSignalObservation:
    satellite_id: str
    band_code: str
    pseudorange: float
    cn0: Optional[float] = None

    @property
    def constellation(self) -> str:
        return self.satellite_id[0]


@dataclass(frozen=True)
class ObservationEpoch:
    time: GpsTime
    observations: tuple
    leap_seconds: Optional[int] = None

    def satellites(self):
        return sorted({o.satellite_id for o in self.observations})


@dataclass
class ParseReport:
    """Counters accumulated while parsing one file."""

    epochs: int = 0
    skipped_epochs: int = 0
    event_records: int = 0
    skipped_codes: dict = field(default_factory=dict)
    invalid_values: int = 0
    warnings: list = field(default_factory=list)

    def skip_code(self, code):
        self.skipped_codes[code] = self.skipped_codes.get(code, 0) + 1


@dataclass(frozen=True)
class ObservationFile:
    epochs: list
    report: ParseReport
    leap_seconds: Optional[int] = None


@dataclass(frozen=True)
class BroadcastEphemeris:
    satellite_id: str
    week: int
    toe: float
    toc: float
    sqrtA: float
    e: float
    i0: float
    Omega0: float
    omega: float
    M0: float
    delta_n: float
    i_dot: float
    Omega_dot: float
    Cuc: float
    Cus: float
    Crc: float
    Crs: float
    Cic: float
    Cis: float
    af0: float
    af1: float
    af2: float
    tgd: float
    health: int = 0
    iode: int = 0

    @property
    def constellation(self) -> str:
        return self.satellite_id[0]

    @property
    def healthy(self) -> bool:
        return self.health == 0

    @property
    def toe_time(self) -> GpsTime:
        return GpsTime(self.week, self.toe)

    @property
    def toc_time(self) -> GpsTime:
        return GpsTime(self.week, self.toc)


@dataclass(frozen=True)
class IonoParams:
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        if len(self.alpha) != 4 or len(self.beta) != 4:
            raise ValueError("Klobuchar parameters need exactly 4 alpha and 4 beta terms")


@dataclass(frozen=True)
class NavigationData:
    ephemerides: dict  # satellite_id -> list of BroadcastEphemeris sorted by toe
    iono: Optional[IonoParams]
    report: ParseReport

    def __len__(self):
        return sum(len(v) for v in self.ephemerides.values())

    def records(self):
        for sat in sorted(self.ephemerides):
            yield from self.ephemerides[sat]


@dataclass(frozen=True)
class GroundTruthTrack:
    """Reference trajectory sampled in ECEF."""

    seconds: np.ndarray  # continuous GPS seconds
    positions: np.ndarray  # (n, 3)
    interpolation: str = "linear"

    def __len__(self):
        return len(self.seconds)

    @property
    def times(self):
        return [GpsTime.from_seconds(s) for s in self.seconds]

    def speeds(self):
        step = np.linalg.norm(np.diff(self.positions, axis=0), axis=1)
        return step / np.diff(self.seconds)

    def position_at(self, t: GpsTime):
        """Linearly interpolated ECEF position, or None outside coverage."""
        s = t.seconds
        if s < self.seconds[0] or s > self.seconds[-1]:
            return None
        j = int(np.searchsorted(self.seconds, s, side="right"))
        if j >= len(self.seconds):
            return self.positions[-1].copy()
        i = j - 1
        w = (s - self.seconds[i]) / (self.seconds[j] - self.seconds[i])
        if w == 0.0:
            return self.positions[i].copy()
        return self.positions[i] + w * (self.positions[j] - self.positions[i])


@dataclass(frozen=True)
class LabelInterval:
    start: GpsTime
    end: GpsTime
    env_class: EnvironmentClass


@dataclass(frozen=True)
class LabelTimeline:
    intervals: tuple

    def __post_init__(self):
        prev = None
        for iv in self.intervals:
            if not iv.start < iv.end:
                raise ValueError(f"interval start {iv.start} not before end {iv.end}")
            if prev is not None and iv.start < prev.end:
                raise ValueError(f"interval starting {iv.start} overlaps the previous one")
            prev = iv
        object.__setattr__(self, "_starts", np.array([iv.start.seconds for iv in self.intervals]))

    def __len__(self):
        return len(self.intervals)

    def label_at(self, t: GpsTime):
        """Class of the half-open interval [start, end) containing ``t``."""
        if not self.intervals:
            return None
        s = t.seconds
        k = int(np.searchsorted(self._starts, s, side="right")) - 1
        if k < 0:
            return None
        iv = self.intervals[k]
        if s < iv.end.seconds:
            return iv.env_class
        return None


@dataclass(frozen=True)
class AlignedEpoch:
    epoch: ObservationEpoch
    truth: np.ndarray
    env_class: Optional[EnvironmentClass]


@dataclass
class AlignReport:
    parsed: int = 0
    emitted: int = 0
    dropped_no_truth: int = 0
    unlabeled: int = 0
