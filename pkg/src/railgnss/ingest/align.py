"""Time alignment of observation epochs with truth and labels."""

from __future__ import annotations

from railgnss.ingest.types import AlignedEpoch, AlignReport


def align(epochs, track, timeline=None):
    """Attach the interpolated truth position and the environment label.

    Epochs outside the truth coverage are dropped and counted; epochs not
    covered by the timeline are kept with ``env_class=None``.

    Returns
    -------
    aligned : list of AlignedEpoch
    report : AlignReport
    """
    report = AlignReport(parsed=len(epochs))
    out = []
    for ep in epochs:
        pos = track.position_at(ep.time)
        if pos is None:
            report.dropped_no_truth += 1
            continue
        label = timeline.label_at(ep.time) if timeline is not None else None
        if label is None:
            report.unlabeled += 1
        out.append(AlignedEpoch(ep, pos, label))
    report.emitted = len(out)
    return out, report
