"""Per-epoch environment features and labeled datasets."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from railgnss.errors import IngestError, NoEphemerisError
from railgnss.geodesy import ecef_to_geodetic, geometric_range, select_ephemeris
from railgnss.gnsstime import GpsTime
from railgnss.ingest.files import fmt
from railgnss.taxonomy import CLEAR_CLASSES, MIXED_CLASSES, EnvironmentClass

__all__ = [
    "CLEAR_CLASSES",
    "MIXED_CLASSES",
    "EnvironmentClass",
    "FeatureSchema",
    "FeatureVector",
    "LabeledSample",
    "build_dataset",
    "epoch_geometry",
    "featurize_epoch",
    "featurize_journey",
    "read_features",
    "sample_stats",
    "split",
    "to_xy",
    "write_features",
]

SCHEMA_VERSION = 1
CN0_STATS = ("mean", "min", "max", "var", "skew", "kurt")
GEOMETRY_FEATURES = ("nsat", "elev_mean", "elev_min", "elev_max", "pdop", "hdop", "vdop")
DOP_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names for a signal configuration."""

    names: tuple
    signals: tuple  # ((constellation, (codes...)), ...)

    @classmethod
    def from_signals(cls, signals):
        items = tuple((sys, tuple(sorted(codes))) for sys, codes in sorted(signals.items()))
        names = []
        for sys, codes in items:
            for code in codes:
                names.extend(f"{sys}_{code}_cn0_{s}" for s in CN0_STATS)
        for sys, _ in items:
            names.extend(f"{sys}_{g}" for g in GEOMETRY_FEATURES)
        names.append("total_nsat")
        return cls(tuple(names), items)

    @classmethod
    def from_names(cls, names):
        return cls(tuple(names), ())

    def __len__(self):
        return len(self.names)

    @property
    def hash(self):
        doc = json.dumps({"version": SCHEMA_VERSION, "names": list(self.names)})
        return hashlib.sha256(doc.encode()).hexdigest()[:16]

    def index(self, name):
        return self.names.index(name)


@dataclass(frozen=True)
class FeatureVector:
    time: Optional[GpsTime]
    values: np.ndarray  # NaN marks a masked entry

    @property
    def mask(self):
        return np.isnan(self.values)


@dataclass(frozen=True)
class LabeledSample:
    vector: FeatureVector
    env_class: EnvironmentClass


def sample_stats(values):
    """Mean, min, max, unbiased variance, skewness and kurtosis.

    Skewness and kurtosis use biased central moments (``m3 / m2**1.5`` and
    ``m4 / m2**2``). Entries that are undefined for the sample are NaN:
    variance for n < 2, skewness for n < 3, kurtosis for n < 4, and both
    shape statistics when the sample has zero spread.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("sample_stats needs at least one value")
    mean = x.mean()
    d = x - mean
    m2 = np.mean(d * d)
    var = d @ d / (n - 1) if n >= 2 else math.nan
    degenerate = m2 <= 1e-24 * max(1.0, mean * mean)
    skew = kurt = math.nan
    if n >= 3 and not degenerate:
        skew = np.mean(d ** 3) / m2 ** 1.5
    if n >= 4 and not degenerate:
        kurt = np.mean(d ** 4) / (m2 * m2)
    return float(mean), float(x.min()), float(x.max()), float(var), float(skew), float(kurt)


def dops(azels):
    """(PDOP, HDOP, VDOP) from line-of-sight geometry; NaN when underdetermined."""
    if len(azels) < 4:
        return math.nan, math.nan, math.nan
    G = np.array([
        [-math.cos(a.elevation) * math.sin(a.azimuth),
         -math.cos(a.elevation) * math.cos(a.azimuth),
         -math.sin(a.elevation), 1.0]
        for a in azels
    ])
    N = G.T @ G
    if np.linalg.cond(N) > DOP_MAX_CONDITION:
        return math.nan, math.nan, math.nan
    Q = np.linalg.inv(N)
    return (math.sqrt(Q[0, 0] + Q[1, 1] + Q[2, 2]), math.sqrt(Q[0, 0] + Q[1, 1]),
            math.sqrt(Q[2, 2]))


def featurize_epoch(epoch, geometry, schema, elevation_cutoff_deg=5.0):
    """Feature vector of one epoch.

    Parameters
    ----------
    epoch : ObservationEpoch
    geometry : dict
        Satellite id -> AzEl. Satellites without geometry are ignored.
    schema : FeatureSchema
        Must be built with :meth:`FeatureSchema.from_signals`.
    """
    cutoff = math.radians(elevation_cutoff_deg)
    visible = {s: g for s, g in geometry.items() if g.elevation >= cutoff}
    values = []
    for sys, codes in schema.signals:
        for code in codes:
            cn0 = [o.cn0 for o in epoch.observations
                   if o.satellite_id in visible and o.satellite_id[0] == sys
                   and o.band_code == code and o.cn0 is not None]
            values.extend(sample_stats(cn0) if cn0 else [math.nan] * len(CN0_STATS))
    observed = {o.satellite_id for o in epoch.observations}
    total = 0
    for sys, _ in schema.signals:
        sats = sorted(s for s in visible if s[0] == sys and s in observed)
        total += len(sats)
        if not sats:
            values.extend([0.0] + [math.nan] * (len(GEOMETRY_FEATURES) - 1))
            continue
        el = [visible[s].elevation for s in sats]
        values.extend([float(len(sats)), float(np.mean(el)), min(el), max(el)])
        values.extend(dops([visible[s] for s in sats]))
    values.append(float(total))
    return FeatureVector(epoch.time, np.array(values, dtype=float))


def epoch_geometry(epoch, ephemerides, truth_position):
    """Azimuth/elevation of every satellite of an epoch seen from the truth position."""
    truth = np.asarray(truth_position, dtype=float)
    geo = ecef_to_geodetic(truth)
    out = {}
    for sat in epoch.satellites():
        try:
            eph = select_ephemeris(ephemerides, sat, epoch.time)
        except NoEphemerisError:
            continue
        out[sat] = geometric_range(truth, epoch.time, eph, geodetic=geo).azel
    return out


def featurize_journey(aligned, ephemerides, schema, elevation_cutoff_deg=5.0, window=1):
    """Feature vectors for an aligned journey.

    With ``window > 1`` (odd), each vector is the NaN-aware mean of the
    per-epoch vectors in a centered window, truncated at the ends.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("feature window must be a positive odd integer")
    vectors = [
        featurize_epoch(a.epoch, epoch_geometry(a.epoch, ephemerides, a.truth), schema,
                        elevation_cutoff_deg)
        for a in aligned
    ]
    if window == 1:
        return vectors
    half = window // 2
    stack = np.array([v.values for v in vectors])
    out = []
    for i, v in enumerate(vectors):
        block = stack[max(0, i - half):i + half + 1]
        with np.errstate(all="ignore"):
            cnt = np.sum(~np.isnan(block), axis=0)
            tot = np.nansum(block, axis=0)
        mean = np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)
        out.append(FeatureVector(v.time, mean))
    return out


@dataclass
class DatasetReport:
    policy: str
    counts: dict
    dropped_mixed: int = 0
    dropped_unlabeled: int = 0


def build_dataset(vectors, labels, policy="clear-only"):
    """Attach labels to feature vectors and filter them by ``policy``.

    ``labels`` is a :class:`LabelTimeline` or a sequence of classes (or
    None) aligned with ``vectors``. ``clear-only`` keeps the ten primary
    classes; ``all-classes`` keeps mixed classes as their own labels.
    Unlabeled vectors are always dropped.
    """
    if policy not in ("clear-only", "all-classes"):
        raise ValueError(f"unknown dataset policy {policy!r}")
    if hasattr(labels, "label_at"):
        labels = [labels.label_at(v.time) for v in vectors]
    if len(labels) != len(vectors):
        raise ValueError("labels and vectors differ in length")
    report = DatasetReport(policy, {})
    samples = []
    for v, c in zip(vectors, labels):
        if c is None:
            report.dropped_unlabeled += 1
            continue
        if policy == "clear-only" and not c.is_clear:
            report.dropped_mixed += 1
            continue
        samples.append(LabeledSample(v, c))
    if not samples:
        raise ValueError("dataset is empty after applying the labeling policy")
    counts = Counter(s.env_class.name for s in samples)
    report.counts = dict(sorted(counts.items()))
    return samples, report


def split(dataset, train_size, seed):
    """Seeded shuffle, then the first ``train_size`` samples form the training set."""
    n = len(dataset)
    if not 0 < train_size < n:
        raise ValueError(f"train_size must be in (0, {n}), got {train_size}")
    order = np.random.default_rng(seed).permutation(n)
    return [dataset[i] for i in order[:train_size]], [dataset[i] for i in order[train_size:]]


def to_xy(samples):
    """Feature matrix (NaN for masked entries) and class-name labels."""
    X = np.array([s.vector.values for s in samples], dtype=float)
    y = np.array([s.env_class.name for s in samples])
    return X, y


def write_features(path, vectors, schema, labels=None):
    """Write ``features.csv``; masked entries are empty fields."""
    labels = labels if labels is not None else [None] * len(vectors)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(schema.names) + ["class"])
        for v, c in zip(vectors, labels):
            row = ["" if math.isnan(x) else fmt(x) for x in v.values]
            w.writerow(row + ["" if c is None else c.name])


def read_features(path):
    """Read ``features.csv`` back as (schema, vectors, labels)."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[-1] != "class":
            raise IngestError("features header must end with 'class'", path=path, line=1)
        schema = FeatureSchema.from_names(header[:-1])
        vectors, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise IngestError("row length does not match header", path=path, line=lineno)
            try:
                vals = np.array([float(x) if x else math.nan for x in row[:-1]])
                labels.append(EnvironmentClass.parse(row[-1]) if row[-1] else None)
            except ValueError as exc:
                raise IngestError(str(exc), path=path, line=lineno) from None
            vectors.append(FeatureVector(None, vals))
    return schema, vectors, labels
