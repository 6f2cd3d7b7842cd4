import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from floodproj.raster import GridGeometry, Raster, coarsen, read_asc, regrid_bilinear, write_asc
from floodproj.series import DailySeries, read_series_csv, write_series_csv


def ramp(geom):
    x = geom.x_centers()[None, :]
    y = geom.y_centers()[:, None]
    return x + 2.0 * y


def test_identity_regrid():
    src = Raster.from_array(np.arange(12.0).reshape(3, 4), cellsize=5.0)
    out = regrid_bilinear(src, src.geometry)
    np.testing.assert_array_equal(out.data, src.data)


def test_constant_regrid():
    src = Raster.from_array(np.full((4, 5), 3.25), cellsize=10.0)
    out = regrid_bilinear(src, GridGeometry(13, 17, 6.0, 6.0, 2.0))
    np.testing.assert_allclose(out.data, 3.25, rtol=1e-15)


@given(st.integers(2, 9), st.floats(0.3, 4.0))
def test_ramp_reproduced(n, cell):
    src_geom = GridGeometry(6, 7, 0.0, 0.0, 10.0)
    src = Raster(ramp(src_geom), src_geom)
    # target centres inside the hull of the source centres (5..65, 5..55)
    tgt = GridGeometry(n, n, 5.0, 5.0, min(cell, 50.0 / n))
    out = regrid_bilinear(src, tgt)
    np.testing.assert_allclose(out.data, ramp(tgt), rtol=1e-12, atol=1e-10)


def test_regrid_outside_extent():
    src = Raster.from_array(np.zeros((3, 3)), cellsize=1.0)
    with pytest.raises(ValueError):
        regrid_bilinear(src, GridGeometry(3, 3, -5.0, 0.0, 1.0))


def test_asc_roundtrip(tmp_path):
    data = np.array([[1.0, 2.5, -9999.0], [0.1 + 0.2, 4.0, 1e-17]])
    r = Raster.from_array(data, cellsize=30.0, xll=100.0, yll=200.5)
    back = read_asc(write_asc(r, tmp_path / "a.asc"))
    np.testing.assert_array_equal(back.data, data)
    assert back.geometry == r.geometry
    assert not back.valid_mask()[0, 2]
    text = (tmp_path / "a.asc").read_text().splitlines()
    assert [line.split()[0] for line in text[:6]] == [
        "NCOLS", "NROWS", "XLLCORNER", "YLLCORNER", "CELLSIZE", "NODATA_VALUE"]


def test_asc_center_header(tmp_path):
    p = tmp_path / "c.asc"
    p.write_text("ncols 2\nnrows 1\nxllcenter 0.5\nyllcenter 0.5\ncellsize 1\n1 2\n")
    r = read_asc(p)
    assert r.geometry.xll == 0.0 and r.nodata == -9999
    p.write_text("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n")
    with pytest.raises(ValueError):
        read_asc(p)


def test_coarsen():
    r = Raster.from_array(np.arange(16.0).reshape(4, 4), cellsize=10.0)
    m = coarsen(r, 2)
    np.testing.assert_array_equal(m.data, [[2.5, 4.5], [10.5, 12.5]])
    assert m.cellsize == 20.0
    lc = Raster.from_array(np.array([[1, 1, 2, 3], [1, 2, 3, 3], [0, 0, 4, 4], [0, 1, 4, 2]]), 1.0)
    np.testing.assert_array_equal(coarsen(lc, 2, "mode").data, [[1, 3], [0, 4]])
    odd = coarsen(Raster.from_array(np.ones((5, 5)), cellsize=1.0), 2)
    assert odd.shape == (2, 2) and odd.geometry.yll == 1.0


def test_series_csv_roundtrip(tmp_path):
    s = DailySeries.from_values([1.5, 0.0, 2.25], start="2001-12-31", name="g1")
    back = read_series_csv(write_series_csv(s, tmp_path / "s.csv"), name="g1")
    np.testing.assert_array_equal(back.values, s.values)
    np.testing.assert_array_equal(back.dates, s.dates)
    assert back.window("2002-01-01", None).values.tolist() == [0.0, 2.25]
