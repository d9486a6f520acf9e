"""Local pseudorange error extraction.

Each pseudorange is reduced by the geometric range, satellite clock
(including the relativistic term), group delay, troposphere and ionosphere.
The receiver clock is then estimated per epoch as the median of what is
left, and the remainder is the local error ``epsilon``.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from railgnss.atmosphere import klobuchar_delay, tropospheric_delay
from railgnss.constants import F_L1, SPEED_OF_LIGHT, carrier_frequency
from railgnss.errors import IngestError, NoEphemerisError, RailGnssError
from railgnss.geodesy import ecef_to_geodetic, geometric_range, select_ephemeris
from railgnss.gnsstime import GpsTime
from railgnss.ingest.files import fmt
from railgnss.taxonomy import EnvironmentClass

OUTLIER_THRESHOLD = 1000.0  # m
RESIDUALS_HEADER = ["week", "sow", "sat", "band", "epsilon_m", "elev_rad", "az_rad", "cn0_dbhz",
                    "class"]
UNLABELED = "unlabeled"


class EpochSkipped(RailGnssError):
    """Raised when an epoch has no usable satellite."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


@dataclass
class ResidualConfig:
    elevation_cutoff_deg: float = 5.0
    tropo: bool = True
    iono_policy: str = "require"  # or "zero-if-absent"
    clock_grouping: str = "constellation_band"  # or "band"
    relative_humidity: float = 0.5

    def __post_init__(self):
        if self.iono_policy not in ("require", "zero-if-absent"):
            raise ValueError(f"unknown iono policy {self.iono_policy!r}")
        if self.clock_grouping not in ("constellation_band", "band"):
            raise ValueError(f"unknown clock grouping {self.clock_grouping!r}")


@dataclass(frozen=True)
class ResidualRecord:
    time: GpsTime
    satellite_id: str
    band_code: str
    epsilon: float
    pseudorange: float
    geometric_range: float
    rx_clock_m: float
    sat_clock_m: float
    tgd_m: float
    tropo_m: float
    iono_m: float
    elevation: float
    azimuth: float
    cn0: Optional[float] = None
    env_class: Optional[EnvironmentClass] = None

    @property
    def constellation(self):
        return self.satellite_id[0]

    @property
    def outlier(self):
        return abs(self.epsilon) >= OUTLIER_THRESHOLD

    def reconstructed_pseudorange(self):
        """Rebuild the pseudorange from its parts.

        The small terms are summed before the range so the result rounds to
        the original double whenever the decomposition is exact.
        """
        small = (self.rx_clock_m - self.sat_clock_m + self.tgd_m + self.tropo_m + self.iono_m
                 + self.epsilon)
        return self.geometric_range + small


@dataclass(frozen=True)
class EpochResiduals:
    time: GpsTime
    rx_clock_m: dict  # clock group key -> c * receiver clock offset (m)
    records: tuple
    excluded: dict = field(default_factory=dict)

    @property
    def satellite_count(self):
        return len({r.satellite_id for r in self.records})


def estimate_receiver_clock(raw_residuals):
    """Median of the raw residuals of one clock group (meters)."""
    if len(raw_residuals) == 0:
        raise ValueError("cannot estimate a receiver clock from no residuals")
    return float(np.median(np.asarray(raw_residuals, dtype=float)))


def clock_group(satellite_id, band_code, grouping):
    if grouping == "band":
        return band_code
    return f"{satellite_id[0]}:{band_code}"


def epoch_residuals(epoch, ephemerides, truth_position, iono=None, config=None, env_class=None):
    """Residuals of every usable satellite signal in one epoch.

    Raises
    ------
    EpochSkipped
        When no satellite survives ephemeris selection and the elevation
        cutoff.
    """
    config = config or ResidualConfig()
    if iono is None and config.iono_policy == "require":
        raise ValueError("ionospheric parameters required by iono policy but absent")
    truth = np.asarray(truth_position, dtype=float)
    geo = ecef_to_geodetic(truth)
    cutoff = math.radians(config.elevation_cutoff_deg)
    t = epoch.time
    excluded = Counter()
    geometry = {}
    for sat in epoch.satellites():
        try:
            eph = select_ephemeris(ephemerides, sat, t)
        except NoEphemerisError:
            excluded["no_ephemeris"] += 1
            continue
        sol = geometric_range(truth, t, eph, geodetic=geo)
        if sol.azel.elevation < cutoff:
            excluded["below_cutoff"] += 1
            continue
        tropo = tropospheric_delay(sol.azel, geo[2], config.relative_humidity) if config.tropo else 0.0
        geometry[sat] = (eph, sol, tropo)

    pending = []
    for obs in epoch.observations:
        g = geometry.get(obs.satellite_id)
        if g is None:
            continue
        eph, sol, tropo = g
        f = carrier_frequency(obs.constellation, obs.band_code)
        scale = (F_L1 / f) ** 2
        iono_m = 0.0
        if iono is not None:
            iono_m = klobuchar_delay(iono, geo[0], geo[1], sol.azel, t, f)
        sat_clock_m = SPEED_OF_LIGHT * sol.state.clock_offset
        tgd_m = SPEED_OF_LIGHT * eph.tgd * scale
        raw = (obs.pseudorange - sol.rho) + sat_clock_m - tgd_m - tropo - iono_m
        pending.append((obs, sol, sat_clock_m, tgd_m, tropo, iono_m, raw))

    if not pending:
        reason = max(excluded, key=excluded.get) if excluded else "no_satellites"
        raise EpochSkipped(reason)

    groups = {}
    for item in pending:
        key = clock_group(item[0].satellite_id, item[0].band_code, config.clock_grouping)
        groups.setdefault(key, []).append(item[6])
    clocks = {key: estimate_receiver_clock(vals) for key, vals in groups.items()}

    records = []
    for obs, sol, sat_clock_m, tgd_m, tropo, iono_m, raw in pending:
        clk = clocks[clock_group(obs.satellite_id, obs.band_code, config.clock_grouping)]
        records.append(
            ResidualRecord(
                time=t,
                satellite_id=obs.satellite_id,
                band_code=obs.band_code,
                epsilon=raw - clk,
                pseudorange=obs.pseudorange,
                geometric_range=sol.rho,
                rx_clock_m=clk,
                sat_clock_m=sat_clock_m,
                tgd_m=tgd_m,
                tropo_m=tropo,
                iono_m=iono_m,
                elevation=sol.azel.elevation,
                azimuth=sol.azel.azimuth,
                cn0=obs.cn0,
                env_class=env_class,
            )
        )
    return EpochResiduals(t, clocks, tuple(records), dict(excluded))


@dataclass
class ResidualReport:
    epochs: int = 0
    processed: int = 0
    skipped: Counter = field(default_factory=Counter)
    excluded: Counter = field(default_factory=Counter)
    outliers: int = 0


def residual_dataset(aligned, ephemerides, iono=None, config=None):
    """Residual records for a whole aligned journey, in time order.

    Returns
    -------
    records : list of ResidualRecord
        Each carries the epoch's environment class (or None).
    epochs : list of EpochResiduals
    report : ResidualReport
    """
    config = config or ResidualConfig()
    if iono is None and config.iono_policy == "require":
        raise ValueError("ionospheric parameters required by iono policy but absent")
    report = ResidualReport(epochs=len(aligned))
    records, epochs = [], []
    for item in aligned:
        try:
            er = epoch_residuals(item.epoch, ephemerides, item.truth, iono, config, item.env_class)
        except EpochSkipped as exc:
            report.skipped[exc.reason] += 1
            continue
        report.processed += 1
        report.excluded.update(er.excluded)
        epochs.append(er)
        records.extend(er.records)
    report.outliers = sum(r.outlier for r in records)
    return records, epochs, report


@dataclass(frozen=True)
class ResidualSample:
    """A residual as read back from ``residuals.csv``."""

    time: GpsTime
    satellite_id: str
    band_code: str
    epsilon: float
    elevation: float
    azimuth: float
    cn0: Optional[float]
    env_class: Optional[EnvironmentClass]

    @property
    def constellation(self):
        return self.satellite_id[0]


def write_residuals(path, records):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESIDUALS_HEADER)
        for r in records:
            w.writerow([
                r.time.week, fmt(r.time.sow), r.satellite_id, r.band_code, fmt(r.epsilon),
                fmt(r.elevation), fmt(r.azimuth), "" if r.cn0 is None else fmt(r.cn0),
                UNLABELED if r.env_class is None else r.env_class.name,
            ])


def read_residuals(path):
    samples = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != RESIDUALS_HEADER:
            raise IngestError(f"expected header {','.join(RESIDUALS_HEADER)}", path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            try:
                cls = None if row[8] == UNLABELED else EnvironmentClass.parse(row[8])
                samples.append(ResidualSample(
                    GpsTime(int(row[0]), float(row[1])), row[2], row[3], float(row[4]),
                    float(row[5]), float(row[6]), float(row[7]) if row[7] else None, cls,
                ))
            except (ValueError, IndexError) as exc:
                raise IngestError(f"unreadable row: {exc}", path=path, line=lineno) from None
    return samples
