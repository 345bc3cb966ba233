import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npcquake.catalog import (ColumnMap, SelectionWindow, filter_catalog,
                              load_catalog, parse_time, write_catalog)
from npcquake.errors import DataError
from npcquake.synth import MixtureSpec, synth_catalog

CSV3 = """evid,longitude,latitude,depth_km,ml,origin
10,-72.1,-35.2,12.0,2.5,2010-03-01T00:00:00Z
11,-71.9,-34.8,,3.1,2010-03-01T12:30:15Z
12,-73.5,-37.9,25.5,2.0,2010-03-02T08:00:00
"""
MAP = "lon=longitude,lat=latitude,mag=ml,time=origin,id=evid,depth=depth_km"


@pytest.fixture
def csv3(tmp_path):
    p = tmp_path / "cat.csv"
    p.write_text(CSV3)
    return p


def test_load_three_rows(csv3):
    cat = load_catalog(csv3, MAP)
    assert len(cat) == 3
    assert list(cat.ids) == [10, 11, 12]
    assert cat.lon[2] == -73.5
    assert math.isnan(cat.depth[1])
    assert cat.events[1].depth is None
    assert cat.time[1] == np.datetime64("2010-03-01T12:30:15", "ms")


def test_bad_latitude_names_the_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(CSV3.replace("-37.9", "95"))
    with pytest.raises(DataError, match=r":4:.*lat=95"):
        load_catalog(p, MAP)
    cat = load_catalog(p, MAP, on_error="skip")
    assert len(cat) == 2
    assert cat.rejected[0][0] == 4


def test_missing_required_field_rejected(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text(CSV3.replace("2.5,", ","))
    with pytest.raises(DataError, match="missing magnitude"):
        load_catalog(p, MAP)


def test_missing_file_and_column(tmp_path, csv3):
    with pytest.raises(DataError, match="not found"):
        load_catalog(tmp_path / "nope.csv", MAP)
    with pytest.raises(DataError, match="not in header"):
        load_catalog(csv3, "lon=lon,lat=latitude,mag=ml,time=origin")


def test_column_map_parse_errors():
    with pytest.raises(DataError):
        ColumnMap.parse("lon=a,lat=b,mag=c")
    with pytest.raises(DataError):
        ColumnMap.parse("lon=a,lat=b,mag=c,time=d,colour=e")


def test_duplicate_ids_rejected(tmp_path):
    p = tmp_path / "dup.csv"
    p.write_text(CSV3.replace("\n11,", "\n10,"))
    with pytest.raises(DataError, match="unique"):
        load_catalog(p, MAP)


def test_parse_time_offsets():
    assert parse_time("2010-02-27T06:34:00Z") == np.datetime64("2010-02-27T06:34:00", "ms")
    assert parse_time("2010-02-27T03:34:00-03:00") == np.datetime64("2010-02-27T06:34:00", "ms")
    assert parse_time("2010-02-27") == np.datetime64("2010-02-27T00:00", "ms")
    with pytest.raises(DataError):
        parse_time("yesterday")


def test_round_trip(tmp_path, csv3):
    cat = load_catalog(csv3, MAP)
    out = tmp_path / "out.csv"
    write_catalog(cat, out)
    again = load_catalog(out)
    assert again == cat
    write_catalog(again, tmp_path / "out2.csv")
    assert (tmp_path / "out2.csv").read_text() == out.read_text()


def test_synthetic_catalog_of_paper_size(tmp_path):
    cat, _ = synth_catalog(MixtureSpec(n=6714), seed=1)
    write_catalog(cat, tmp_path / "big.csv")
    assert len(load_catalog(tmp_path / "big.csv")) == 6714


def _cat():
    cat, _ = synth_catalog(MixtureSpec(blobs=5, n=500, sigma=0.5, center=(-72.0, -36.0)), seed=3)
    return cat


def test_identity_filter():
    cat = _cat()
    assert filter_catalog(cat, SelectionWindow()) == cat
    box = SelectionWindow(cat.lon.min(), cat.lon.max(), cat.lat.min(), cat.lat.max(),
                          mag_min=cat.mag.min())
    assert filter_catalog(cat, box) == cat


def test_study_area_window():
    cat = _cat()
    win = SelectionWindow(-75.5, -69.0, -40.0, -32.0, mag_min=2.0)
    sub = filter_catalog(cat, win)
    inside = ((cat.lon >= -75.5) & (cat.lon <= -69.0) & (cat.lat >= -40.0)
              & (cat.lat <= -32.0) & (cat.mag >= 2.0))
    assert list(sub.ids) == list(cat.ids[inside])
    assert 0 < len(sub) < len(cat)


def test_infinite_magnitude_floor_gives_empty():
    sub = filter_catalog(_cat(), SelectionWindow(mag_min=math.inf))
    assert len(sub) == 0


def test_invalid_window():
    with pytest.raises(DataError):
        SelectionWindow(lon_min=1.0, lon_max=0.0)


windows = st.builds(
    lambda a, b, c, d, m: SelectionWindow(min(a, b) - 0.01, max(a, b), min(c, d) - 0.01,
                                          max(c, d), mag_min=m),
    st.floats(-80, -65), st.floats(-80, -65), st.floats(-45, -28), st.floats(-45, -28),
    st.floats(1.5, 4.0),
)


@settings(max_examples=40, deadline=None)
@given(windows)
def test_filter_idempotent_and_complementary(win):
    cat = _cat()
    once = filter_catalog(cat, win)
    assert filter_catalog(once, win) == once
    keep = win.mask(cat)
    assert len(once) + len(cat.subset(~keep)) == len(cat)
    assert np.all(np.diff(np.searchsorted(cat.ids, once.ids)) > 0) or len(once) < 2
