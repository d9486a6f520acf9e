"""Parsing of RINEX, truth and label files, and their time alignment."""

from railgnss.ingest.align import align
from railgnss.ingest.files import (
    load_observations,
    parse_ground_truth,
    parse_labels,
    read_obs_csv,
    write_ground_truth,
    write_labels,
    write_obs_csv,
)
from railgnss.ingest.rinex import DEFAULT_SIGNALS, parse_nav, parse_obs, write_nav
from railgnss.ingest.types import (
    AlignedEpoch,
    AlignReport,
    BroadcastEphemeris,
    GroundTruthTrack,
    IonoParams,
    LabelInterval,
    LabelTimeline,
    NavigationData,
    ObservationEpoch,
    ObservationFile,
    ParseReport,
    SatSignalObservation,
)

__all__ = [
    "DEFAULT_SIGNALS",
    "AlignReport",
    "AlignedEpoch",
    "BroadcastEphemeris",
    "GroundTruthTrack",
    "IonoParams",
    "LabelInterval",
    "LabelTimeline",
    "NavigationData",
    "ObservationEpoch",
    "ObservationFile",
    "ParseReport",
    "SatSignalObservation",
    "align",
    "load_observations",
    "parse_ground_truth",
    "parse_labels",
    "parse_nav",
    "parse_obs",
    "read_obs_csv",
    "write_ground_truth",
    "write_labels",
    "write_nav",
    "write_obs_csv",
]
