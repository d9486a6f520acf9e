"""Physical constants and signal plan."""

SPEED_OF_LIGHT = 299_792_458.0  # m/s
OMEGA_EARTH = 7.2921151467e-5  # rad/s, WGS-84
WGS84_A = 6_378_137.0  # m
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

# Gravitational parameters used by each constellation's broadcast algorithm.
GM = {"G": 3.986005e14, "E": 3.986004418e14}
# Relativistic clock correction constant, s/sqrt(m).
REL_F = -4.442807633e-10

GPS_PI = 3.1415926535898  # value fixed by IS-GPS-200
SECONDS_PER_WEEK = 604_800.0
SECONDS_PER_DAY = 86_400.0

F_L1 = 1575.42e6
F_L2 = 1227.60e6
F_L5 = 1176.45e6

# Carrier frequency by (constellation, RINEX band digit).
CARRIER_FREQUENCY = {
    ("G", "1"): F_L1,
    ("G", "2"): F_L2,
    ("G", "5"): F_L5,
    ("E", "1"): F_L1,
    ("E", "5"): F_L5,
    ("E", "7"): 1207.14e6,
    ("E", "8"): 1191.795e6,
    ("E", "6"): 1278.75e6,
}

SUPPORTED_CONSTELLATIONS = ("G", "E")


def carrier_frequency(constellation, band_code):
    """Carrier frequency in Hz of an observation code such as ``"C1C"``."""
    try:
        return CARRIER_FREQUENCY[(constellation, band_code[1])]
    except (KeyError, IndexError):
        raise KeyError(f"no carrier frequency for {constellation} {band_code!r}") from None
