import datetime as dt

import pytest
from hypothesis import given
from hypothesis import strategies as st

from railgnss.gnsstime import GpsTime
from railgnss.taxonomy import CLEAR_CLASSES, MIXED_CLASSES, EnvironmentClass


def test_calendar_conversion_known_instant():
    # 1999-09-02 17:51:44 is Thursday of GPS week 1025.
    t = GpsTime.from_calendar(1999, 9, 2, 17, 51, 44)
    assert (t.week, t.sow) == (1025, 409904.0)
    assert t.to_calendar() == dt.datetime(1999, 9, 2, 17, 51, 44)


def test_gps_epoch_is_week_zero():
    assert GpsTime.from_calendar(1980, 1, 6) == GpsTime(0, 0.0)


def test_sow_normalization_across_week_boundary():
    t = GpsTime(2000, 604799.5) + 1.0
    assert (t.week, t.sow) == (2001, 0.5)
    assert GpsTime(2001, -1.0) == GpsTime(2000, 604799.0)


@given(st.integers(0, 4000), st.floats(0, 604799.999), st.floats(-1e6, 1e6))
def test_add_then_subtract_roundtrip(week, sow, delta):
    t = GpsTime(week, sow)
    assert (t + delta) - t == pytest.approx(delta, abs=1e-6)


def test_ordering():
    assert GpsTime(5, 10.0) < GpsTime(5, 11.0) < GpsTime(6, 0.0)


def test_taxonomy_has_thirteen_classes_ten_clear():
    assert len(EnvironmentClass) == 13
    assert len(CLEAR_CLASSES) == 10 and len(MIXED_CLASSES) == 3
    assert EnvironmentClass.Station.is_clear
    assert not EnvironmentClass.MixedTreesOpenSky.is_clear


@pytest.mark.parametrize("token,expected", [
    ("Trees", EnvironmentClass.Trees),
    ("Mixed trees and open-sky", EnvironmentClass.MixedTreesOpenSky),
    ("Open-sky (rural)", EnvironmentClass.OpenSkyRural),
    (" PostTunnel ", EnvironmentClass.PostTunnel),
])
def test_parse_canonical_and_display_names(token, expected):
    assert EnvironmentClass.parse(token) is expected


def test_parse_unknown_name_mentions_token():
    with pytest.raises(ValueError, match="Forest"):
        EnvironmentClass.parse("Forest")
