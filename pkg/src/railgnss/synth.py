"""Forward-modeled railway journey used as an end-to-end oracle.

Every pseudorange is built as

    R = rho + c*dt_rx + band bias - c*dt_sat + c*TGD*(fL1/f)^2 + T + I + eps

with eps drawn from per-class Gaussian generators, so the residual
pipeline must recover eps up to the receiver-clock estimate. Orbits and
the light-time solution are computed here with a vectorized
implementation that shares no code with the pipeline's geodesy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from railgnss.atmosphere import klobuchar_delay, tropospheric_delay
from railgnss.constants import F_L1, GM, OMEGA_EARTH, REL_F, SPEED_OF_LIGHT, carrier_frequency
from railgnss.errormodel.models import ErrorModelSet, GaussianErrorModel, POOLED, ScheduleEntry
from railgnss.geodesy import AzEl
from railgnss.gnsstime import GpsTime
from railgnss.ingest.files import write_ground_truth, write_labels, write_obs_csv
from railgnss.ingest.rinex import nav_roundtrip_value, write_nav
from railgnss.ingest.types import (
    BroadcastEphemeris,
    IonoParams,
    LabelInterval,
    LabelTimeline,
    ObservationEpoch,
    SatSignalObservation,
)
from railgnss.taxonomy import EnvironmentClass as EC

C = SPEED_OF_LIGHT
_A_E = 6_378_137.0
_E2 = (1.0 / 298.257223563) * (2.0 - 1.0 / 298.257223563)

DEFAULT_IONO = IonoParams(
    alpha=(1.1176e-08, 7.4506e-09, -5.9605e-08, -5.9605e-08),
    beta=(9.0112e04, 0.0, -1.9661e05, -6.5536e04),
)


@dataclass(frozen=True)
class ClassSignature:
    """Observable behaviour of one environment class in the generator."""

    cn0_mean: float  # dB-Hz at 45 deg elevation
    cn0_sd: float
    mask_deg: float  # satellites below this elevation are blocked
    drop_prob: float  # per-epoch random blockage probability
    speed: float  # m/s
    error_var: dict  # band code -> m^2
    blocked_az: tuple = ()  # (az_lo, az_hi, below_el) in degrees


DEFAULT_SIGNATURES = {
    EC.Station: ClassSignature(40.0, 4.0, 10.0, 0.05, 0.0, {"C1C": 4.0, "C5Q": 3.0},
                               (180.0, 360.0, 35.0)),
    EC.Trees: ClassSignature(33.0, 6.0, 15.0, 0.25, 35.0, {"C1C": 7.7, "C5Q": 6.0}),
    EC.Buildings: ClassSignature(38.0, 5.0, 30.0, 0.10, 15.0, {"C1C": 12.0, "C5Q": 9.0}),
    EC.OpenSkyRural: ClassSignature(46.0, 2.0, 5.0, 0.0, 40.0, {"C1C": 1.5, "C5Q": 1.0}),
    EC.MixedTreesOpenSky: ClassSignature(40.0, 4.5, 10.0, 0.12, 35.0, {"C1C": 5.0, "C5Q": 4.0},
                                         (0.0, 180.0, 30.0)),
    EC.MixedTreesBuildings: ClassSignature(36.0, 5.5, 20.0, 0.18, 25.0, {"C1C": 9.0, "C5Q": 7.0}),
    EC.MixedBuildingsOpenSky: ClassSignature(42.0, 4.0, 15.0, 0.05, 25.0,
                                             {"C1C": 6.0, "C5Q": 5.0}, (90.0, 270.0, 40.0)),
}

# 7200 s: about 3000 clear epochs of which 2000 at stations, the rest mixed.
DEFAULT_LAYOUT = (
    (EC.Station, 500), (EC.MixedBuildingsOpenSky, 400), (EC.Buildings, 167),
    (EC.MixedTreesBuildings, 500), (EC.Trees, 167), (EC.MixedTreesOpenSky, 500),
    (EC.OpenSkyRural, 167), (EC.MixedTreesOpenSky, 200), (EC.Station, 500),
    (EC.MixedBuildingsOpenSky, 500), (EC.Buildings, 166), (EC.MixedTreesBuildings, 450),
    (EC.Trees, 166), (EC.MixedTreesOpenSky, 500), (EC.OpenSkyRural, 167),
    (EC.MixedTreesBuildings, 450), (EC.Station, 500), (EC.MixedTreesOpenSky, 200),
    (EC.MixedBuildingsOpenSky, 500), (EC.Station, 500),
)


@dataclass
class SynthConfig:
    epochs: int = 7200
    start_week: int = 2300
    start_sow: float = 216000.0
    origin_deg: tuple = (43.6, 1.4, 150.0)
    signals: dict = field(default_factory=lambda: {"G": ("C1C", "C5Q"), "E": ("C1C", "C5Q")})
    elevation_cutoff_deg: float = 5.0
    zero_error: bool = False
    rx_clock_bias_m: float = 2.5e4
    rx_clock_drift_m_s: float = 0.6
    band_bias_m: dict = field(default_factory=lambda: {"C1C": 0.0, "C5Q": 4.25})
    layout: tuple = DEFAULT_LAYOUT
    signatures: dict = field(default_factory=lambda: dict(DEFAULT_SIGNATURES))
    tropo: bool = True
    iono: bool = True
    relative_humidity: float = 0.5


@dataclass
class Scenario:
    config: SynthConfig
    ephemerides: list
    iono: IonoParams
    times: list
    positions: np.ndarray
    timeline: LabelTimeline
    epochs: list
    true_models: ErrorModelSet
    schedule: list
    epsilon: dict  # (epoch index, sat, band) -> injected error


def _q(x):
    return nav_roundtrip_value(x)


def nominal_constellation(week, toe, seed=0):
    """GPS (6 planes x 5) and Galileo (3 planes x 9) nominal broadcast records."""
    rng = np.random.default_rng([seed, 7])
    out = []

    def record(sat, a, inc, raan, m0):
        return BroadcastEphemeris(
            satellite_id=sat, week=week, toe=toe, toc=toe,
            sqrtA=_q(math.sqrt(a)), e=_q(rng.uniform(0.001, 0.012)), i0=_q(inc),
            Omega0=_q(raan), omega=_q(rng.uniform(-math.pi, math.pi)), M0=_q(m0),
            delta_n=_q(rng.uniform(4e-9, 5.5e-9)), i_dot=_q(rng.uniform(-5e-10, 5e-10)),
            Omega_dot=_q(rng.uniform(-8.5e-9, -7.8e-9)),
            Cuc=_q(rng.normal(0, 2e-6)), Cus=_q(rng.normal(0, 2e-6)),
            Crc=_q(rng.normal(200, 50)), Crs=_q(rng.normal(0, 40)),
            Cic=_q(rng.normal(0, 5e-8)), Cis=_q(rng.normal(0, 5e-8)),
            af0=_q(rng.uniform(-5e-4, 5e-4)), af1=_q(rng.uniform(-5e-12, 5e-12)), af2=0.0,
            tgd=_q(rng.uniform(-1.2e-8, 1.2e-8)),
        )

    k = 1
    for p in range(6):
        for s in range(5):
            m0 = math.remainder(2 * math.pi * s / 5 + 0.4 * p, 2 * math.pi)
            out.append(record(f"G{k:02d}", 26_559_700.0, math.radians(55.0),
                              math.remainder(math.radians(60.0 * p + 12.0), 2 * math.pi), m0))
            k += 1
    k = 1
    for p in range(3):
        for s in range(9):
            m0 = math.remainder(2 * math.pi * s / 9 + 0.25 * p, 2 * math.pi)
            out.append(record(f"E{k:02d}", 29_599_800.0, math.radians(56.0),
                              math.remainder(math.radians(120.0 * p + 40.0), 2 * math.pi), m0))
            k += 1
    return out


class _OrbitTable:
    """Vectorized broadcast orbit and clock for a fixed list of records."""

    def __init__(self, ephemerides):
        cols = ("sqrtA", "e", "i0", "Omega0", "omega", "M0", "delta_n", "i_dot", "Omega_dot",
                "Cuc", "Cus", "Crc", "Crs", "Cic", "Cis", "af0", "af1", "af2", "toe", "toc")
        for c in cols:
            setattr(self, c, np.array([getattr(e, c) for e in ephemerides], dtype=float))
        self.mu = np.array([GM[e.satellite_id[0]] for e in ephemerides])

    def state(self, t):
        """ECEF positions (..., S, 3) and clock offsets (..., S) at week seconds ``t``."""
        a = self.sqrtA ** 2
        tk = t - self.toe
        M = self.M0 + (np.sqrt(self.mu / a ** 3) + self.delta_n) * tk
        E = M.copy()
        for _ in range(12):
            E = E - (E - self.e * np.sin(E) - M) / (1.0 - self.e * np.cos(E))
        nu = np.arctan2(np.sqrt(1.0 - self.e ** 2) * np.sin(E), np.cos(E) - self.e)
        phi = nu + self.omega
        s2, c2 = np.sin(2 * phi), np.cos(2 * phi)
        u = phi + self.Cus * s2 + self.Cuc * c2
        r = a * (1.0 - self.e * np.cos(E)) + self.Crs * s2 + self.Crc * c2
        inc = self.i0 + self.i_dot * tk + self.Cis * s2 + self.Cic * c2
        lon_node = self.Omega0 + (self.Omega_dot - OMEGA_EARTH) * tk - OMEGA_EARTH * self.toe
        x, y = r * np.cos(u), r * np.sin(u)
        pos = np.stack([
            x * np.cos(lon_node) - y * np.cos(inc) * np.sin(lon_node),
            x * np.sin(lon_node) + y * np.cos(inc) * np.cos(lon_node),
            y * np.sin(inc),
        ], axis=-1)
        dt = t - self.toc
        clock = self.af0 + self.af1 * dt + self.af2 * dt ** 2 + REL_F * self.e * self.sqrtA * np.sin(E)
        return pos, clock


def solve_light_time(orbits, t_rx, rx):
    """Signal travel time for every (epoch, satellite) pair.

    Solves ``c*tau = |Rz(w*tau) x_sat(t_rx - tau) - rx|`` by fixed-point
    iteration, which contracts by about v/c per step.
    Returns (tau, rotated satellite positions, satellite clock offsets).
    """
    t = t_rx[:, None]
    tau = np.full((len(t_rx), len(orbits.toe)), 0.075)
    for _ in range(8):
        pos, clock = orbits.state(t - tau)
        th = OMEGA_EARTH * tau
        rot = np.stack([np.cos(th) * pos[..., 0] + np.sin(th) * pos[..., 1],
                        -np.sin(th) * pos[..., 0] + np.cos(th) * pos[..., 1],
                        pos[..., 2]], axis=-1)
        tau = np.linalg.norm(rot - rx[:, None, :], axis=-1) / C
    return tau, rot, clock


def _geodetic_to_ecef(lat, lon, h):
    N = _A_E / np.sqrt(1.0 - _E2 * np.sin(lat) ** 2)
    return np.stack([(N + h) * np.cos(lat) * np.cos(lon), (N + h) * np.cos(lat) * np.sin(lon),
                     (N * (1.0 - _E2) + h) * np.sin(lat)], axis=-1)


def trajectory(config, speeds):
    """Dead-reckoned geodetic track at 1 Hz for the given per-epoch speeds."""
    lat0, lon0, h0 = config.origin_deg
    n = len(speeds)
    k = np.arange(n)
    heading = np.radians(160.0 + 25.0 * np.sin(2 * np.pi * k / 3600.0))
    lat = np.empty(n)
    lon = np.empty(n)
    lat[0], lon[0] = math.radians(lat0), math.radians(lon0)
    for i in range(1, n):
        v = speeds[i - 1]
        N = _A_E / math.sqrt(1.0 - _E2 * math.sin(lat[i - 1]) ** 2)
        M = N * (1.0 - _E2) / (1.0 - _E2 * math.sin(lat[i - 1]) ** 2)
        lat[i] = lat[i - 1] + v * math.cos(heading[i - 1]) / (M + h0)
        lon[i] = lon[i - 1] + v * math.sin(heading[i - 1]) / ((N + h0) * math.cos(lat[i - 1]))
    h = np.full(n, h0)
    return lat, lon, h, _geodetic_to_ecef(lat, lon, h)


def class_sequence(layout, n):
    seq = [cls for cls, length in layout for _ in range(length)]
    if len(seq) < n:
        seq.extend([layout[-1][0]] * (n - len(seq)))
    return seq[:n]


def _timeline(seq, times):
    intervals = []
    start = 0
    for i in range(1, len(seq) + 1):
        if i == len(seq) or seq[i] != seq[start]:
            end = times[i] if i < len(seq) else times[-1] + 1.0
            intervals.append(LabelInterval(times[start], end, seq[start]))
            start = i
    return LabelTimeline(tuple(intervals))


def _blocked(sig, az_deg, el_deg):
    if el_deg < sig.mask_deg:
        return True
    if sig.blocked_az:
        lo, hi, below = sig.blocked_az
        if lo <= az_deg < hi and el_deg < below:
            return True
    return False


def true_model_set(config, counts=None):
    counts = counts or {}
    models = {}
    for cls, sig in config.signatures.items():
        for sys, bands in config.signals.items():
            for band in bands:
                key = (cls.name, sys, band)
                var = 0.0 if config.zero_error else sig.error_var[band]
                models[key] = GaussianErrorModel(key, 0.0, var, var, counts.get(key, 0), 1.0)
    pooled = float(np.mean([m.variance for m in models.values()]))
    return ErrorModelSet(models, GaussianErrorModel(POOLED, 0.0, pooled, pooled, 0, 1.0))


def generate(config=None, seed=0):
    """Build the synthetic journey in memory."""
    config = config or SynthConfig()
    n = config.epochs
    seq = class_sequence(config.layout, n)
    speeds = np.array([config.signatures[c].speed for c in seq])
    lat, lon, h, rx = trajectory(config, speeds)
    t0 = GpsTime(config.start_week, config.start_sow)
    times = [t0 + float(k) for k in range(n)]
    sow = np.array([t.sow for t in times])

    toe = float(round((config.start_sow + n / 2) / 16.0) * 16)
    ephs = [e for e in nominal_constellation(config.start_week, toe, seed)
            if e.satellite_id[0] in config.signals]
    orbits = _OrbitTable(ephs)
    iono = DEFAULT_IONO
    tau, sat_pos, sat_clock = solve_light_time(orbits, sow, rx)
    rho = tau * C

    # Local ENU azimuth/elevation from the known geodetic track.
    d = sat_pos - rx[:, None, :]
    sl, cl = np.sin(lat)[:, None], np.cos(lat)[:, None]
    so, co = np.sin(lon)[:, None], np.cos(lon)[:, None]
    east = -so * d[..., 0] + co * d[..., 1]
    north = -sl * co * d[..., 0] - sl * so * d[..., 1] + cl * d[..., 2]
    up = cl * co * d[..., 0] + cl * so * d[..., 1] + sl * d[..., 2]
    az = np.mod(np.arctan2(east, north), 2 * np.pi)
    az[az >= 2 * np.pi] = 0.0
    el = np.arctan2(up, np.hypot(east, north))

    cutoff = math.radians(config.elevation_cutoff_deg)
    epochs, schedule, eps_table = [], [], {}
    counts = {}
    for k in range(n):
        cls = seq[k]
        sig = config.signatures[cls]
        rng = np.random.default_rng([seed, k])
        clock_m = config.rx_clock_bias_m + config.rx_clock_drift_m_s * k + 3.0 * math.sin(k / 300.0)
        obs = []
        for j, eph in enumerate(ephs):
            if el[k, j] < cutoff:
                continue
            sat, sys = eph.satellite_id, eph.satellite_id[0]
            bands = config.signals[sys]
            for band in bands:
                schedule.append(ScheduleEntry(times[k], sat, band, cls))
            # Draws happen for every geometrically visible satellite so the
            # stream does not depend on which ones end up blocked.
            drop = rng.random()
            z_cn0 = rng.standard_normal(len(bands))
            z_eps = rng.standard_normal(len(bands))
            if drop < sig.drop_prob or _blocked(sig, math.degrees(az[k, j]), math.degrees(el[k, j])):
                continue
            azel = AzEl(float(az[k, j]), float(el[k, j]))
            tropo = (tropospheric_delay(azel, h[k], config.relative_humidity)
                     if config.tropo else 0.0)
            for b, band in enumerate(bands):
                f = carrier_frequency(sys, band)
                scale = (F_L1 / f) ** 2
                iono_m = (klobuchar_delay(iono, lat[k], lon[k], azel, times[k], f)
                          if config.iono else 0.0)
                var = 0.0 if config.zero_error else sig.error_var[band]
                eps = math.sqrt(var) * z_eps[b]
                key = (cls.name, sys, band)
                counts[key] = counts.get(key, 0) + 1
                eps_table[(k, sat, band)] = eps
                pr = (rho[k, j] + clock_m + config.band_bias_m.get(band, 0.0)
                      - C * sat_clock[k, j] + C * eph.tgd * scale + tropo + iono_m + eps)
                cn0 = sig.cn0_mean + 8.0 * (math.sin(el[k, j]) - math.sqrt(0.5)) \
                    + (2.0 if band[1] == "5" else 0.0) + sig.cn0_sd * z_cn0[b]
                obs.append(SatSignalObservation(sat, band, float(pr),
                                                float(min(max(cn0, 12.0), 60.0))))
        epochs.append(ObservationEpoch(times[k], tuple(obs), 18))

    return Scenario(config, ephs, iono, times, rx, _timeline(seq, times), epochs,
                    true_model_set(config, counts), schedule, eps_table)


def write_scenario(scenario, out_dir, config_hash=None):
    """Write the observation CSV, navigation, truth, labels, schedule and true models."""
    from railgnss.errormodel.models import write_schedule

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_obs_csv(out / "obs.csv", scenario.epochs)
    write_nav(out / "nav.rnx", scenario.ephemerides, scenario.iono)
    write_ground_truth(out / "ground_truth.csv", scenario.times, scenario.positions)
    write_labels(out / "labels.csv", scenario.timeline)
    write_schedule(out / "schedule.csv", scenario.schedule)
    scenario.true_models.save(out / "true_models.json", config_hash)
    return {name: str(out / name) for name in
            ("obs.csv", "nav.rnx", "ground_truth.csv", "labels.csv", "schedule.csv",
             "true_models.json")}
