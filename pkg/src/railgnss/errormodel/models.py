"""Per-environment Gaussian local-error models and error-stream sampling."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from railgnss.errormodel.mcd import MinCovDet
from railgnss.errors import IngestError
from railgnss.gnsstime import GpsTime
from railgnss.ingest.files import fmt
from railgnss.taxonomy import EnvironmentClass

ERROR_MODELS_VERSION = 1
ANY = "*"
POOLED = (ANY, ANY, ANY)
STREAM_HEADER = ["week", "sow", "sat", "band", "class", "error_m"]
SCHEDULE_HEADER = ["week", "sow", "sat", "band", "class"]
NO_SIGNAL = "NOSIGNAL"


@dataclass(frozen=True)
class GaussianErrorModel:
    key: tuple  # (class name or "*", constellation, band)
    mean: float
    variance: float
    classical_variance: float
    sample_count: int
    h_fraction: float = 0.75

    def sample(self, size, rng):
        return self.mean + math.sqrt(self.variance) * rng.standard_normal(size)

    def to_dict(self):
        return {"mean_m": self.mean, "var_m2": self.variance,
                "classical_var_m2": self.classical_variance, "n": self.sample_count,
                "h_fraction": self.h_fraction}


@dataclass
class ErrorModelSet:
    models: dict
    fallback: Optional[GaussianErrorModel]
    too_small: dict = field(default_factory=dict)
    grouping: str = "class"

    def resolve(self, env_class, constellation, band):
        """Model for a key: exact class group, then the class-free group, then the fallback."""
        name = env_class.name if isinstance(env_class, EnvironmentClass) else (env_class or ANY)
        for key in ((name, constellation, band), (ANY, constellation, band)):
            if key in self.models:
                return self.models[key]
        if self.fallback is None:
            raise KeyError(f"no error model for {(name, constellation, band)} and no fallback")
        return self.fallback

    def to_dict(self):
        return {
            "version": ERROR_MODELS_VERSION,
            "grouping": self.grouping,
            "models": {"|".join(k): m.to_dict() for k, m in sorted(self.models.items())},
            "fallback": None if self.fallback is None else self.fallback.to_dict(),
            "too_small": {"|".join(k): n for k, n in sorted(self.too_small.items())},
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("version") != ERROR_MODELS_VERSION:
            raise ValueError(f"unsupported error model version {doc.get('version')!r}")

        def build(key, d):
            return GaussianErrorModel(key, d["mean_m"], d["var_m2"], d["classical_var_m2"],
                                      d["n"], d["h_fraction"])

        models = {tuple(k.split("|")): build(tuple(k.split("|")), d)
                  for k, d in doc["models"].items()}
        fb = doc.get("fallback")
        return cls(models, None if fb is None else build(POOLED, fb),
                   {tuple(k.split("|")): n for k, n in doc.get("too_small", {}).items()},
                   doc.get("grouping", "class"))

    def save(self, path, config_hash=None):
        doc = self.to_dict()
        doc["config_hash"] = config_hash
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=1, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def fit_gaussian(key, values, h_fraction=0.75, seed=0, reweight=True, n_starts=500):
    """Robust (MCD) and classical moments of a 1-D error sample."""
    x = np.asarray(values, dtype=float)
    mcd = MinCovDet(h_fraction=h_fraction, reweight=reweight, n_starts=n_starts,
                    random_state=seed).fit(x[:, None])
    return GaussianErrorModel(
        key,
        float(mcd.location_[0]),
        float(mcd.covariance_[0, 0]),
        float(np.var(x, ddof=1)),
        int(x.size),
        h_fraction,
    )


def _group_key(record, grouping):
    if grouping == "class":
        cls = record.env_class
        return (cls.name if cls is not None else None, record.satellite_id[0], record.band_code)
    return (ANY, record.satellite_id[0], record.band_code)


def fit_error_models(records, grouping="class", h_fraction=0.75, min_samples=50, seed=0,
                     reweight=True):
    """Fit one robust Gaussian per (class, constellation, band) group.

    With ``grouping="constellation_band"`` the class is ignored and keys use
    ``"*"`` in its place. Unlabeled records only feed the pooled fallback.
    Groups with fewer than ``min_samples`` residuals are left out and listed
    in ``too_small``.
    """
    if grouping not in ("class", "constellation_band"):
        raise ValueError(f"unknown grouping {grouping!r}")
    groups = defaultdict(list)
    pooled = []
    for r in records:
        pooled.append(r.epsilon)
        key = _group_key(r, grouping)
        if key[0] is not None:
            groups[key].append(r.epsilon)
    models, too_small = {}, {}
    for key in sorted(groups):
        vals = groups[key]
        if len(vals) < min_samples:
            too_small[key] = len(vals)
            continue
        models[key] = fit_gaussian(key, vals, h_fraction, seed, reweight)
    if not models:
        raise ValueError(f"no residual group reaches the minimum size of {min_samples}")
    fallback = fit_gaussian(POOLED, pooled, h_fraction, seed, reweight)
    return ErrorModelSet(models, fallback, too_small, grouping)


@dataclass(frozen=True)
class ScheduleEntry:
    time: GpsTime
    satellite_id: str
    band_code: str
    env_class: Optional[EnvironmentClass]


def write_schedule(path, schedule):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SCHEDULE_HEADER)
        for e in schedule:
            cls = "unlabeled" if e.env_class is None else e.env_class.name
            w.writerow([e.time.week, fmt(e.time.sow), e.satellite_id, e.band_code, cls])


def read_schedule(path):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        if next(reader, None) != SCHEDULE_HEADER:
            raise IngestError(f"expected header {','.join(SCHEDULE_HEADER)}", path=path, line=1)
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                cls = None if row[4] == "unlabeled" else EnvironmentClass.parse(row[4])
                out.append(ScheduleEntry(GpsTime(int(row[0]), float(row[1])), row[2], row[3], cls))
            except (ValueError, IndexError) as exc:
                raise IngestError(f"unreadable row: {exc}", path=path, line=lineno) from None
    return out


def schedule_from_journey(epochs, timeline=None):
    """Schedule of every observed (satellite, band) of a journey with its label."""
    out = []
    for ep in epochs:
        cls = timeline.label_at(ep.time) if timeline is not None else None
        for o in sorted(ep.observations, key=lambda o: (o.satellite_id, o.band_code)):
            out.append(ScheduleEntry(ep.time, o.satellite_id, o.band_code, cls))
    return out


def _epoch_seed(seed, t):
    usec = int(round(t.sow * 1e6))
    digest = hashlib.sha256(f"{t.week}:{usec}".encode()).digest()
    return np.random.SeedSequence([int(seed), int.from_bytes(digest[:8], "little")])


def sample_errors(model_set, schedule, seed, no_signal_classes=()):
    """Independent Gaussian error per scheduled (epoch, satellite, band).

    Every epoch draws from its own stream derived from ``(seed, epoch time)``
    in sorted (satellite, band) order, so the output depends only on the
    seed and the schedule. Entries whose class is in ``no_signal_classes``
    get ``None``.
    """
    schedule = list(schedule)
    values = [None] * len(schedule)
    by_epoch = defaultdict(list)
    for i, e in enumerate(schedule):
        by_epoch[(e.time.week, e.time.sow)].append(i)
    no_signal = set(no_signal_classes)
    for (week, sow), idx in by_epoch.items():
        idx = sorted(idx, key=lambda i: (schedule[i].satellite_id, schedule[i].band_code))
        rng = np.random.default_rng(_epoch_seed(seed, GpsTime(week, sow)))
        z = rng.standard_normal(len(idx))
        for i, zi in zip(idx, z):
            e = schedule[i]
            if e.env_class is not None and e.env_class in no_signal:
                continue
            m = model_set.resolve(e.env_class, e.satellite_id[0], e.band_code)
            values[i] = m.mean + math.sqrt(m.variance) * zi
    return values


def write_stream(path, schedule, values, marker=NO_SIGNAL):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(STREAM_HEADER)
        for e, v in zip(schedule, values):
            cls = "unlabeled" if e.env_class is None else e.env_class.name
            w.writerow([e.time.week, fmt(e.time.sow), e.satellite_id, e.band_code, cls,
                        marker if v is None else fmt(v)])


def histogram_rows(records, bins=60, span=None):
    """Histogram of residuals per (class, constellation, band) for plotting."""
    groups = defaultdict(list)
    for r in records:
        cls = "unlabeled" if r.env_class is None else r.env_class.name
        groups[(cls, r.satellite_id[0], r.band_code)].append(r.epsilon)
    rows = []
    for key in sorted(groups):
        x = np.asarray(groups[key])
        lo, hi = span if span is not None else (float(np.percentile(x, 0.5)),
                                                 float(np.percentile(x, 99.5)))
        if not hi > lo:
            hi = lo + 1.0
        counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
        for c, a, b in zip(counts, edges[:-1], edges[1:]):
            rows.append((*key, float(a), float(b), int(c)))
    return rows
