"""CSV side inputs (ground truth, labels) and the toolkit's observation CSV."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from railgnss.errors import IngestError
from railgnss.gnsstime import GpsTime
from railgnss.ingest.types import (
    CN0_MAX,
    PSEUDORANGE_MAX,
    PSEUDORANGE_MIN,
    GroundTruthTrack,
    LabelInterval,
    LabelTimeline,
    ObservationEpoch,
    ObservationFile,
    ParseReport,
    SatSignalObservation,
)
from railgnss.taxonomy import EnvironmentClass

TRUTH_HEADER = ["time_gps_week", "time_gps_sow", "ecef_x_m", "ecef_y_m", "ecef_z_m"]
LABELS_HEADER = ["start_week", "start_sow", "end_week", "end_sow", "class"]
OBS_CSV_HEADER = ["week", "sow", "sat", "band", "pseudorange_m", "cn0_dbhz"]

MAX_TRAIN_SPEED = 150.0  # m/s


def fmt(x):
    """Shortest repr that reads back to the identical double."""
    return repr(float(x))


def _open_csv(path, header):
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path=path)
    f = open(path, newline="", encoding="utf-8")
    reader = csv.reader(f)
    first = next(reader, None)
    if first is None or [h.strip() for h in first] != header:
        f.close()
        raise IngestError(f"expected header {','.join(header)}", path=path, line=1)
    return f, reader


def parse_ground_truth(path) -> GroundTruthTrack:
    """Read ``ground_truth.csv``.

    Rows with non-finite coordinates are dropped. Time regressions,
    implausible train speeds and tracks of fewer than two samples are fatal.
    """
    f, reader = _open_csv(path, TRUTH_HEADER)
    seconds, positions = [], []
    with f:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                week, sow = int(row[0]), float(row[1])
                xyz = [float(v) for v in row[2:5]]
            except (ValueError, IndexError):
                raise IngestError("unreadable row", path=path, line=lineno) from None
            if len(xyz) != 3 or not all(math.isfinite(v) for v in xyz):
                continue
            s = GpsTime(week, sow).seconds
            if seconds and s <= seconds[-1]:
                raise IngestError(f"time does not increase at row {lineno}", path=path, line=lineno)
            if seconds:
                step = math.dist(xyz, positions[-1]) / (s - seconds[-1])
                if step >= MAX_TRAIN_SPEED:
                    raise IngestError(
                        f"implied speed {step:.1f} m/s at row {lineno}", path=path, line=lineno
                    )
            seconds.append(s)
            positions.append(xyz)
    if len(seconds) < 2:
        raise IngestError("ground truth needs at least 2 samples", path=path)
    return GroundTruthTrack(np.array(seconds), np.array(positions, dtype=float))


def write_ground_truth(path, times, positions):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for t, p in zip(times, positions):
            w.writerow([t.week, fmt(t.sow), fmt(p[0]), fmt(p[1]), fmt(p[2])])


def parse_labels(path) -> LabelTimeline:
    """Read ``labels.csv`` into a validated, time-ordered timeline."""
    f, reader = _open_csv(path, LABELS_HEADER)
    intervals = []
    with f:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                start = GpsTime(int(row[0]), float(row[1]))
                end = GpsTime(int(row[2]), float(row[3]))
            except (ValueError, IndexError):
                raise IngestError("unreadable row", path=path, line=lineno) from None
            try:
                cls = EnvironmentClass.parse(row[4])
            except (ValueError, IndexError) as exc:
                raise IngestError(str(exc), path=path, line=lineno) from None
            if not start < end:
                raise IngestError("interval start not before end", path=path, line=lineno)
            intervals.append(LabelInterval(start, end, cls))
    intervals.sort(key=lambda iv: iv.start)
    for a, b in zip(intervals, intervals[1:]):
        if b.start < a.end:
            raise IngestError(f"intervals overlap at {b.start.week},{b.start.sow}", path=path)
    return LabelTimeline(tuple(intervals))


def write_labels(path, timeline):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(LABELS_HEADER)
        for iv in timeline.intervals:
            w.writerow(
                [iv.start.week, fmt(iv.start.sow), iv.end.week, fmt(iv.end.sow), iv.env_class.name]
            )


def write_obs_csv(path, epochs):
    """Write epochs as one row per (satellite, signal); absent C/N0 is empty."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(OBS_CSV_HEADER)
        for ep in epochs:
            for o in ep.observations:
                cn0 = "" if o.cn0 is None else fmt(o.cn0)
                w.writerow([ep.time.week, fmt(ep.time.sow), o.satellite_id, o.band_code,
                            fmt(o.pseudorange), cn0])


def read_obs_csv(path, signals=None) -> ObservationFile:
    """Read the toolkit observation CSV written by :func:`write_obs_csv`."""
    f, reader = _open_csv(path, OBS_CSV_HEADER)
    report = ParseReport()
    epochs = []
    current_key, current, seen = None, [], set()

    def flush():
        if current_key is None:
            return
        t = GpsTime(*current_key)
        if epochs and not epochs[-1].time < t:
            report.skipped_epochs += 1
            report.warnings.append(f"epoch {t}: time not increasing")
            return
        epochs.append(ObservationEpoch(t, tuple(current)))

    with f:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                key = (int(row[0]), float(row[1]))
                sat, band = row[2], row[3]
                rho = float(row[4])
                cn0 = float(row[5]) if row[5].strip() else None
            except (ValueError, IndexError):
                raise IngestError("unreadable row", path=path, line=lineno) from None
            if key != current_key:
                flush()
                current_key, current, seen = key, [], set()
            if signals is not None and band not in signals.get(sat[0], ()):
                report.skip_code(f"{sat[0]}:{band}")
                continue
            if (sat, band) in seen:
                report.warnings.append(f"line {lineno}: duplicate {sat} {band} ignored")
                continue
            if not PSEUDORANGE_MIN < rho < PSEUDORANGE_MAX:
                report.invalid_values += 1
                continue
            if cn0 is not None and not 0.0 < cn0 <= CN0_MAX:
                report.invalid_values += 1
                cn0 = None
            seen.add((sat, band))
            current.append(SatSignalObservation(sat, band, rho, cn0))
        flush()
    report.epochs = len(epochs)
    return ObservationFile(epochs, report)


def load_observations(path, signals=None) -> ObservationFile:
    """Dispatch on content: RINEX 3 observation file or toolkit CSV."""
    from railgnss.ingest.rinex import parse_obs

    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path=path)
    with open(path, encoding="ascii", errors="replace") as f:
        first = f.readline()
    if first.rstrip("\n").split(",") == OBS_CSV_HEADER:
        return read_obs_csv(path, signals)
    return parse_obs(path, signals)
