import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from railgnss import synth
from railgnss.ingest import align, parse_ground_truth, parse_labels, parse_nav, read_obs_csv

DATA = Path(__file__).parent / "data"

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def obs_header(types=None, leap=18):
    types = types or {"G": ["C1C", "S1C", "C5Q", "S5Q"], "E": ["C1C", "S1C", "C5Q", "S5Q"]}
    lines = [f"{'     3.04           OBSERVATION DATA    M':<60}RINEX VERSION / TYPE"]
    for sys, codes in types.items():
        body = f"{sys}  {len(codes):>3} " + " ".join(codes)
        lines.append(f"{body:<60}SYS / # / OBS TYPES")
    if leap is not None:
        lines.append(f"{leap:>6}{'':<54}LEAP SECONDS")
    lines.append(f"{'':<60}END OF HEADER")
    return lines


def obs_epoch(time_fields, sats, flag=0):
    """``sats`` maps satellite id -> list of values (None for blank fields)."""
    y, mo, d, h, mi, s = time_fields
    lines = [f"> {y:04d} {mo:02d} {d:02d} {h:02d} {mi:02d}{s:11.7f}  {flag:d}{len(sats):3d}"]
    for sat, values in sats.items():
        fields = "".join(" " * 16 if v is None else f"{v:14.3f}  " for v in values)
        lines.append(sat + fields.rstrip())
    return lines


def write_text(path, lines):
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


@pytest.fixture(scope="session")
def example_nav():
    return parse_nav(DATA / "example_nav.rnx")


@pytest.fixture(scope="session")
def small_scenario(tmp_path_factory):
    """Short synthetic journey written to disk and read back."""
    out = tmp_path_factory.mktemp("small_scenario")
    EC = synth.EC
    cfg = synth.SynthConfig(epochs=400, layout=(
        (EC.Station, 100), (EC.Trees, 100), (EC.OpenSkyRural, 100), (EC.Buildings, 100)))
    sc = synth.generate(cfg, seed=11)
    synth.write_scenario(sc, out)
    obs = read_obs_csv(out / "obs.csv")
    nav = parse_nav(out / "nav.rnx")
    track = parse_ground_truth(out / "ground_truth.csv")
    timeline = parse_labels(out / "labels.csv")
    aligned, _ = align(obs.epochs, track, timeline)
    return {"dir": out, "scenario": sc, "obs": obs, "nav": nav, "track": track,
            "timeline": timeline, "aligned": aligned}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance results: criterion number -> list of (passed, detail).
ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE.setdefault(number, []).append((bool(passed), detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        status = "PASS" if all(p for p, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {number}: {status} | {detail}")
