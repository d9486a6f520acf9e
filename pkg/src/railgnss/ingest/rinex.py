"""RINEX 3.0x observation and navigation readers.

Only the fields needed for pseudorange residual analysis are decoded:
pseudoranges and C/N0 on the configured signals, GPS/Galileo Keplerian
broadcast records, and the Klobuchar header coefficients.
"""

from __future__ import annotations

import logging
from pathlib import Path

from railgnss.errors import IngestError
from railgnss.gnsstime import GpsTime
from railgnss.ingest.types import (
    CN0_MAX,
    PSEUDORANGE_MAX,
    PSEUDORANGE_MIN,
    BroadcastEphemeris,
    IonoParams,
    NavigationData,
    ObservationEpoch,
    ObservationFile,
    ParseReport,
    SatSignalObservation,
)

logger = logging.getLogger(__name__)

# One pseudorange code per (constellation, band).
DEFAULT_SIGNALS = {"G": ("C1C", "C5Q"), "E": ("C1C", "C5Q")}

_NAV_CONTINUATION_LINES = {"G": 7, "E": 7, "C": 7, "J": 7, "I": 7, "R": 3, "S": 3}


def _label(line):
    return line[60:].strip()


def _float(text):
    text = text.strip()
    if not text:
        return 0.0
    return float(text.replace("D", "E").replace("d", "e"))


def _read_lines(path):
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path=path)
    with open(path, "r", encoding="ascii", errors="replace") as f:
        return f.read().splitlines()


def _check_version(lines, path, file_type):
    if not lines or _label(lines[0]) != "RINEX VERSION / TYPE":
        raise IngestError("missing RINEX VERSION / TYPE header line", path=path, line=1)
    try:
        version = float(lines[0][:9])
    except ValueError:
        raise IngestError("unreadable RINEX version", path=path, line=1) from None
    if not 3.0 <= version < 4.0:
        raise IngestError(f"unsupported RINEX version {version}", path=path, line=1)
    if lines[0][20:21] != file_type:
        raise IngestError(
            f"expected file type {file_type!r}, found {lines[0][20:21]!r}", path=path, line=1
        )
    return version


def _parse_obs_header(lines, path):
    _check_version(lines, path, "O")
    obs_types = {}
    leap = None
    current = None
    remaining = 0
    for k, line in enumerate(lines):
        label = _label(line)
        lineno = k + 1
        if label == "END OF HEADER":
            if remaining:
                raise IngestError("truncated SYS / # / OBS TYPES record", path=path, line=lineno)
            return obs_types, leap, k + 1
        if label == "SYS / # / OBS TYPES":
            if line[0] != " ":
                if remaining:
                    raise IngestError(
                        "truncated SYS / # / OBS TYPES record", path=path, line=lineno
                    )
                current = line[0]
                try:
                    remaining = int(line[3:6])
                except ValueError:
                    raise IngestError(
                        "bad observation type count", path=path, line=lineno
                    ) from None
                obs_types[current] = []
            elif current is None:
                raise IngestError("continuation line without system", path=path, line=lineno)
            codes = line[7:58].split()
            if len(codes) > remaining or (remaining > len(codes) and len(codes) < 13):
                raise IngestError(
                    "observation code list does not match declared count", path=path, line=lineno
                )
            obs_types[current].extend(codes)
            remaining -= len(codes)
        elif label == "LEAP SECONDS":
            try:
                leap = int(line[:6])
            except ValueError:
                raise IngestError("bad LEAP SECONDS value", path=path, line=lineno) from None
    raise IngestError("missing END OF HEADER", path=path, line=len(lines))


def _parse_epoch_line(line):
    parts = line[1:].split()
    year, month, day, hour, minute = (int(p) for p in parts[:5])
    second = float(parts[5])
    flag = int(parts[6])
    nsat = int(parts[7])
    return GpsTime.from_calendar(year, month, day, hour, minute, second), flag, nsat


def _parse_sat_line(line, codes, wanted, report):
    sat = line[:3].replace(" ", "0")
    if len(sat) != 3 or not sat[1:].isdigit():
        raise ValueError(f"bad satellite id {line[:3]!r}")
    values = {}
    for j, code in enumerate(codes):
        start = 3 + 16 * j
        field = line[start:start + 14]
        if field.strip():
            values[code] = float(field)
    out = []
    for code in codes:
        if code[0] == "C" and code not in wanted:
            report.skip_code(f"{sat[0]}:{code}")
    for code in wanted:
        rho = values.get(code)
        if rho is None:
            continue
        if not PSEUDORANGE_MIN < rho < PSEUDORANGE_MAX:
            report.invalid_values += 1
            continue
        cn0 = values.get("S" + code[1:])
        if cn0 is not None and not 0.0 < cn0 <= CN0_MAX:
            report.invalid_values += 1
            cn0 = None
        out.append(SatSignalObservation(sat, code, rho, cn0))
    return sat, out


def parse_obs(path, signals=None) -> ObservationFile:
    """Read a RINEX 3 observation file.

    Parameters
    ----------
    path : path-like
    signals : dict, optional
        Constellation letter -> pseudorange codes to keep, e.g.
        ``{"G": ("C1C", "C5Q")}``. Defaults to GPS and Galileo L1/L5.

    Returns
    -------
    ObservationFile
        Epochs in strictly increasing time order plus a parse report.
        Malformed epoch bodies are skipped and counted; a malformed
        header raises :class:`IngestError` with the line number.
    """
    signals = DEFAULT_SIGNALS if signals is None else signals
    lines = _read_lines(path)
    obs_types, leap, k = _parse_obs_header(lines, path)
    report = ParseReport()
    epochs = []
    last = None
    n = len(lines)
    while k < n:
        line = lines[k]
        if not line.strip():
            k += 1
            continue
        if not line.startswith(">"):
            report.skipped_epochs += 1
            report.warnings.append(f"line {k + 1}: stray record outside an epoch")
            k += 1
            continue
        try:
            t, flag, nsat = _parse_epoch_line(line)
        except (ValueError, IndexError):
            report.skipped_epochs += 1
            report.warnings.append(f"line {k + 1}: malformed epoch header")
            k += 1
            continue
        body = lines[k + 1:k + 1 + nsat]
        if flag > 1:
            report.event_records += 1
            k += 1 + nsat
            continue
        bad = len(body) < nsat or any(b.startswith(">") for b in body)
        if bad:
            cut = next((i for i, b in enumerate(body) if b.startswith(">")), len(body))
            report.skipped_epochs += 1
            report.warnings.append(f"line {k + 1}: epoch body truncated")
            k += 1 + cut
            continue
        k += 1 + nsat
        observations = []
        seen = set()
        try:
            for b in body:
                sys = b[0]
                codes = obs_types.get(sys)
                if codes is None:
                    report.skip_code(f"{sys}:*")
                    continue
                wanted = signals.get(sys, ())
                if not wanted:
                    report.skip_code(f"{sys}:*")
                    continue
                sat, obs = _parse_sat_line(b, codes, wanted, report)
                if sat in seen:
                    report.warnings.append(f"epoch {t}: duplicate satellite {sat} ignored")
                    continue
                seen.add(sat)
                observations.extend(obs)
        except (ValueError, IndexError) as exc:
            report.skipped_epochs += 1
            report.warnings.append(f"epoch {t}: {exc}")
            continue
        if last is not None and not last < t:
            report.skipped_epochs += 1
            report.warnings.append(f"epoch {t}: time not increasing")
            continue
        last = t
        epochs.append(ObservationEpoch(t, tuple(observations), leap))
    report.epochs = len(epochs)
    if report.skipped_epochs:
        logger.warning("%s: skipped %d malformed epochs", path, report.skipped_epochs)
    return ObservationFile(epochs, report, leap)


def _parse_iono_header(lines, path):
    alpha = beta = None
    for k, line in enumerate(lines):
        label = _label(line)
        if label == "END OF HEADER":
            break
        try:
            if label == "IONOSPHERIC CORR":
                kind = line[:4]
                vals = tuple(_float(line[5 + 12 * j:17 + 12 * j]) for j in range(4))
                if kind == "GPSA":
                    alpha = vals
                elif kind == "GPSB":
                    beta = vals
            elif label == "ION ALPHA":
                alpha = tuple(_float(line[2 + 12 * j:14 + 12 * j]) for j in range(4))
            elif label == "ION BETA":
                beta = tuple(_float(line[2 + 12 * j:14 + 12 * j]) for j in range(4))
        except ValueError:
            raise IngestError("bad ionospheric coefficient", path=path, line=k + 1) from None
    else:
        raise IngestError("missing END OF HEADER", path=path, line=len(lines))
    if alpha is None or beta is None:
        return None, k + 1
    return IonoParams(alpha, beta), k + 1


def _orbit_values(line):
    return [_float(line[4 + 19 * j:4 + 19 * (j + 1)]) for j in range(4)]


def _ephemeris_from_record(lines):
    head = lines[0]
    sat = head[:3].replace(" ", "0")
    parts = head[3:23].split()
    year, month, day, hour, minute = (int(p) for p in parts[:5])
    second = float(parts[5])
    toc_time = GpsTime.from_calendar(year, month, day, hour, minute, second)
    af0, af1, af2 = (_float(head[23 + 19 * j:42 + 19 * j]) for j in range(3))
    o = [_orbit_values(line) for line in lines[1:8]]
    iode, crs, delta_n, m0 = o[0]
    cuc, e, cus, sqrt_a = o[1]
    toe, cic, omega0, cis = o[2]
    i0, crc, omega, omega_dot = o[3]
    idot, _, week, _ = o[4]
    _, health, tgd, _ = o[5]
    return BroadcastEphemeris(
        satellite_id=sat,
        week=int(week),
        toe=toe,
        toc=toc_time.sow,
        sqrtA=sqrt_a,
        e=e,
        i0=i0,
        Omega0=omega0,
        omega=omega,
        M0=m0,
        delta_n=delta_n,
        i_dot=idot,
        Omega_dot=omega_dot,
        Cuc=cuc,
        Cus=cus,
        Crc=crc,
        Crs=crs,
        Cic=cic,
        Cis=cis,
        af0=af0,
        af1=af1,
        af2=af2,
        tgd=tgd,
        health=int(health),
        iode=int(iode),
    )


def parse_nav(path) -> NavigationData:
    """Read a RINEX 3 navigation file (GPS and Galileo records).

    Unhealthy records are kept with their health flag; records of other
    constellations are skipped and counted. A missing Klobuchar block
    yields ``iono=None``.
    """
    lines = _read_lines(path)
    _check_version(lines, path, "N")
    iono, k = _parse_iono_header(lines, path)
    report = ParseReport()
    ephemerides = {}
    n = len(lines)
    while k < n:
        line = lines[k]
        if not line.strip():
            k += 1
            continue
        sys = line[0]
        extra = _NAV_CONTINUATION_LINES.get(sys)
        if extra is None:
            report.warnings.append(f"line {k + 1}: unrecognized record start")
            report.skipped_epochs += 1
            k += 1
            continue
        block = lines[k:k + 1 + extra]
        k += 1 + extra
        if sys not in ("G", "E"):
            report.skip_code(f"{sys}:nav")
            continue
        try:
            if len(block) < 8:
                raise ValueError("truncated record")
            eph = _ephemeris_from_record(block)
        except (ValueError, IndexError) as exc:
            report.skipped_epochs += 1
            report.warnings.append(f"line {k - extra}: {exc}")
            continue
        ephemerides.setdefault(eph.satellite_id, []).append(eph)
        report.epochs += 1
    for recs in ephemerides.values():
        recs.sort(key=lambda r: (r.week, r.toe))
    return NavigationData(ephemerides, iono, report)


def _d19(x):
    return f"{x:19.12E}"


def write_nav(path, ephemerides, iono=None):
    """Write GPS/Galileo broadcast records as a RINEX 3.04 navigation file."""
    first = f"{3.04:9.2f}{'':11}N: GNSS NAV DATA{'':4}M: Mixed"
    out = [f"{first:<60}RINEX VERSION / TYPE"]
    if iono is not None:
        for kind, vals in (("GPSA", iono.alpha), ("GPSB", iono.beta)):
            body = kind + " " + "".join(f"{v:12.4E}" for v in vals)
            out.append(f"{body:<60}IONOSPHERIC CORR")
    out.append(f"{'':<60}END OF HEADER")
    for eph in ephemerides:
        cal = GpsTime(eph.week, eph.toc).to_calendar()
        head = (
            f"{eph.satellite_id} {cal.year:04d} {cal.month:02d} {cal.day:02d} "
            f"{cal.hour:02d} {cal.minute:02d} {cal.second:02d}"
        )
        out.append(head + _d19(eph.af0) + _d19(eph.af1) + _d19(eph.af2))
        rows = [
            (eph.iode, eph.Crs, eph.delta_n, eph.M0),
            (eph.Cuc, eph.e, eph.Cus, eph.sqrtA),
            (eph.toe, eph.Cic, eph.Omega0, eph.Cis),
            (eph.i0, eph.Crc, eph.omega, eph.Omega_dot),
            (eph.i_dot, 0.0, eph.week, 0.0),
            (0.0, eph.health, eph.tgd, 0.0),
            (eph.toe, 0.0),
        ]
        for row in rows:
            out.append("    " + "".join(_d19(float(v)) for v in row))
    Path(path).write_text("\n".join(out) + "\n", encoding="ascii")


def nav_roundtrip_value(x):
    """The value a float takes after a write/read cycle through :func:`write_nav`."""
    return float(_d19(x))
