"""Broadcast ionospheric (Klobuchar) and Saastamoinen tropospheric delays."""

from __future__ import annotations

import math
from dataclasses import dataclass

from railgnss.constants import F_L1, GPS_PI, SECONDS_PER_DAY, SPEED_OF_LIGHT

MIN_TROPO_ELEVATION = math.radians(2.0)


@dataclass(frozen=True)
class AtmosphericDelays:
    iono: float
    tropo: float


def klobuchar_delay(iono, lat, lon, azel, gps_time, carrier_frequency=F_L1):
    """Slant ionospheric group delay in meters.

    Parameters
    ----------
    iono : IonoParams
        Broadcast alpha/beta coefficients. ``None`` raises, so callers have
        to opt into a zero-ionosphere policy explicitly.
    lat, lon : float
        Receiver geodetic latitude/longitude in radians.
    azel : AzEl
    gps_time : GpsTime or float
        Receiver time; a float is taken as seconds of week.
    carrier_frequency : float
        Hz. The L1 delay is scaled by ``(f_L1 / f) ** 2``.
    """
    if iono is None:
        raise ValueError("Klobuchar parameters are absent")
    if azel.elevation < 0.0:
        raise ValueError("Klobuchar model needs a non-negative elevation")
    sow = getattr(gps_time, "sow", gps_time)
    # Angles in semicircles as in the broadcast algorithm.
    el = azel.elevation / GPS_PI
    phi_u = lat / GPS_PI
    lam_u = lon / GPS_PI

    psi = 0.0137 / (el + 0.11) - 0.022
    phi_i = phi_u + psi * math.cos(azel.azimuth)
    phi_i = min(max(phi_i, -0.416), 0.416)
    lam_i = lam_u + psi * math.sin(azel.azimuth) / math.cos(phi_i * GPS_PI)
    phi_m = phi_i + 0.064 * math.cos((lam_i - 1.617) * GPS_PI)

    t = (4.32e4 * lam_i + sow) % SECONDS_PER_DAY
    obliquity = 1.0 + 16.0 * (0.53 - el) ** 3

    a0, a1, a2, a3 = iono.alpha
    b0, b1, b2, b3 = iono.beta
    amp = max(a0 + phi_m * (a1 + phi_m * (a2 + phi_m * a3)), 0.0)
    per = max(b0 + phi_m * (b1 + phi_m * (b2 + phi_m * b3)), 72000.0)
    x = 2.0 * math.pi * (t - 50400.0) / per
    if abs(x) < 1.57:
        delay = obliquity * (5e-9 + amp * (1.0 - x * x / 2.0 + x ** 4 / 24.0))
    else:
        delay = obliquity * 5e-9
    scale = (F_L1 / carrier_frequency) ** 2
    return delay * SPEED_OF_LIGHT * scale


def standard_atmosphere(height, relative_humidity=0.5):
    """Pressure (hPa), temperature (K) and water-vapour pressure (hPa)."""
    h = max(height, 0.0)
    pressure = 1013.25 * (1.0 - 2.2557e-5 * h) ** 5.2568
    temperature = 15.0 - 6.5e-3 * h + 273.16
    e = 6.108 * relative_humidity * math.exp((17.15 * temperature - 4684.0) / (temperature - 38.45))
    return pressure, temperature, e


def zenith_tropo_delay(height, relative_humidity=0.5):
    """Saastamoinen zenith total delay (hydrostatic + wet) in meters."""
    p, t, e = standard_atmosphere(height, relative_humidity)
    h_km = max(height, 0.0) / 1e3
    hydro = 0.0022768 * p / (1.0 - 0.00028 * h_km)
    wet = 0.002277 * (1255.0 / t + 0.05) * e
    return hydro + wet


def tropospheric_delay(azel, height, relative_humidity=0.5):
    """Slant tropospheric delay, zenith delay mapped with ``1/sin(el)``."""
    if azel.elevation <= MIN_TROPO_ELEVATION:
        raise ValueError(
            f"elevation {math.degrees(azel.elevation):.2f} deg outside tropospheric model domain"
        )
    return zenith_tropo_delay(height, relative_humidity) / math.sin(azel.elevation)
