"""Satellite state from broadcast ephemeris, ranging and frame utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from railgnss.constants import (
    GM,
    OMEGA_EARTH,
    REL_F,
    SECONDS_PER_WEEK,
    SPEED_OF_LIGHT,
    WGS84_A,
    WGS84_E2,
)
from railgnss.errors import NoEphemerisError, NumericalError

EPHEMERIS_VALIDITY = 4 * 3600.0  # s
KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 30
LIGHT_TIME_TOL = 1e-4  # m
LIGHT_TIME_MAX_ITER = 10


@dataclass(frozen=True)
class AzEl:
    azimuth: float
    elevation: float


@dataclass(frozen=True)
class SatelliteState:
    position: np.ndarray
    clock_offset: float  # s, polynomial + relativistic, TGD excluded
    relativistic_term: float  # s


@dataclass(frozen=True)
class RangeSolution:
    rho: float
    state: SatelliteState
    azel: AzEl
    travel_time: float
    sagnac_m: float


def _half_week_wrap(dt):
    if dt > SECONDS_PER_WEEK / 2:
        dt -= SECONDS_PER_WEEK
    elif dt < -SECONDS_PER_WEEK / 2:
        dt += SECONDS_PER_WEEK
    return dt


def select_ephemeris(collection, satellite_id, time, max_age=EPHEMERIS_VALIDITY):
    """Healthy record of ``satellite_id`` whose toe is closest to ``time``.

    ``collection`` is either a :class:`NavigationData` or a mapping from
    satellite id to records. Ties keep the earlier record.
    """
    records = getattr(collection, "ephemerides", collection).get(satellite_id, ())
    best, best_age = None, None
    for eph in records:
        if not eph.healthy:
            continue
        age = abs(time - eph.toe_time)
        if age <= max_age and (best_age is None or age < best_age):
            best, best_age = eph, age
    if best is None:
        raise NoEphemerisError(f"no ephemeris for {satellite_id} at {time.week}/{time.sow:.3f}")
    return best


def solve_kepler(mean_anomaly, e, tol=KEPLER_TOL, max_iter=KEPLER_MAX_ITER):
    """Eccentric anomaly E with E - e sin E = M, by Newton iteration."""
    E = mean_anomaly if e < 0.8 else math.pi
    for _ in range(max_iter):
        f = E - e * math.sin(E) - mean_anomaly
        step = f / (1.0 - e * math.cos(E))
        E -= step
        if abs(step) < tol:
            return E
    raise NumericalError(f"Kepler iteration did not converge (M={mean_anomaly}, e={e})")


def satellite_state(eph, t) -> SatelliteState:
    """Broadcast-ephemeris position (ECEF at ``t``) and clock offset at ``t``."""
    mu = GM.get(eph.constellation, GM["G"])
    a = eph.sqrtA * eph.sqrtA
    tk = t - eph.toe_time
    n = math.sqrt(mu / (a * a * a)) + eph.delta_n
    M = eph.M0 + n * tk
    E = solve_kepler(M, eph.e)
    sinE, cosE = math.sin(E), math.cos(E)
    nu = math.atan2(math.sqrt(1.0 - eph.e * eph.e) * sinE, cosE - eph.e)
    phi = nu + eph.omega
    s2, c2 = math.sin(2.0 * phi), math.cos(2.0 * phi)
    u = phi + eph.Cus * s2 + eph.Cuc * c2
    r = a * (1.0 - eph.e * cosE) + eph.Crs * s2 + eph.Crc * c2
    inc = eph.i0 + eph.i_dot * tk + eph.Cis * s2 + eph.Cic * c2
    xp, yp = r * math.cos(u), r * math.sin(u)
    Om = eph.Omega0 + (eph.Omega_dot - OMEGA_EARTH) * tk - OMEGA_EARTH * eph.toe
    cO, sO, ci = math.cos(Om), math.sin(Om), math.cos(inc)
    pos = np.array([xp * cO - yp * ci * sO, xp * sO + yp * ci * cO, yp * math.sin(inc)])

    dt = _half_week_wrap(t - eph.toc_time)
    rel = REL_F * eph.e * eph.sqrtA * sinE
    clock = eph.af0 + eph.af1 * dt + eph.af2 * dt * dt + rel
    return SatelliteState(pos, clock, rel)


def rotate_earth(position, seconds):
    """Express an ECEF position ``seconds`` earlier in the later ECEF frame."""
    th = OMEGA_EARTH * seconds
    c, s = math.cos(th), math.sin(th)
    x, y, z = position
    return np.array([c * x + s * y, -s * x + c * y, z])


def enu_matrix(lat, lon):
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array(
        [
            [-so, co, 0.0],
            [-sl * co, -sl * so, cl],
            [cl * co, cl * so, sl],
        ]
    )


def azimuth_elevation(rx, target, geodetic=None) -> AzEl:
    """Azimuth/elevation of ``target`` seen from ``rx`` in the local ENU frame."""
    if geodetic is None:
        geodetic = ecef_to_geodetic(rx)
    e, n, u = enu_matrix(geodetic[0], geodetic[1]) @ (np.asarray(target) - np.asarray(rx))
    az = math.atan2(e, n) % (2.0 * math.pi)
    if az >= 2.0 * math.pi:  # -tiny % 2pi rounds up to 2pi
        az = 0.0
    el = math.atan2(u, math.hypot(e, n))
    return AzEl(az, el)


def geometric_range(rx, reception_time, eph, sagnac=True, geodetic=None) -> RangeSolution:
    """Geometric range from the emission-time satellite position to ``rx``.

    The emission time is found by the light-time fixed point
    ``t_tx = t_rx - rho / c`` starting from the receiver position, so no
    measured quantity enters the range.
    """
    rx = np.asarray(rx, dtype=float)
    tau = 0.0
    rho = None
    for _ in range(LIGHT_TIME_MAX_ITER):
        state = satellite_state(eph, reception_time + (-tau))
        pos = rotate_earth(state.position, tau) if sagnac else state.position
        new_rho = float(math.dist(pos, rx))
        if rho is not None and abs(new_rho - rho) < LIGHT_TIME_TOL:
            rho = new_rho
            break
        rho = new_rho
        tau = rho / SPEED_OF_LIGHT
    else:
        raise NumericalError(f"light-time iteration did not converge for {eph.satellite_id}")
    sagnac_m = rho - float(math.dist(state.position, rx)) if sagnac else 0.0
    azel = azimuth_elevation(rx, pos, geodetic)
    return RangeSolution(rho, SatelliteState(pos, state.clock_offset, state.relativistic_term),
                         azel, tau, sagnac_m)


def ecef_to_geodetic(p, tol=1e-12):
    """WGS-84 latitude, longitude (rad) and ellipsoidal height (m)."""
    x, y, z = (float(v) for v in p)
    lon = math.atan2(y, x)
    rho = math.hypot(x, y)
    lat = math.atan2(z, rho * (1.0 - WGS84_E2))
    for _ in range(50):
        s = math.sin(lat)
        N = WGS84_A / math.sqrt(1.0 - WGS84_E2 * s * s)
        new = math.atan2(z + WGS84_E2 * N * s, rho)
        if abs(new - lat) < tol:
            lat = new
            break
        lat = new
    s, c = math.sin(lat), math.cos(lat)
    h = rho * c + z * s - WGS84_A * math.sqrt(1.0 - WGS84_E2 * s * s)
    return lat, lon, h


def geodetic_to_ecef(lat, lon, h):
    s = math.sin(lat)
    N = WGS84_A / math.sqrt(1.0 - WGS84_E2 * s * s)
    c = math.cos(lat)
    return np.array(
        [(N + h) * c * math.cos(lon), (N + h) * c * math.sin(lon), (N * (1.0 - WGS84_E2) + h) * s]
    )


def enu_to_ecef(origin_geodetic, enu):
    """Offset a local ENU displacement from a geodetic origin into ECEF."""
    lat, lon, h = origin_geodetic
    base = geodetic_to_ecef(lat, lon, h)
    return base + enu_matrix(lat, lon).T @ np.asarray(enu, dtype=float)
