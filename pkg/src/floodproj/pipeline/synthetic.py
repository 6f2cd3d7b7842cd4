"""Small synthetic study area: a hydrologic basin, climate members and a valley reach.

Everything here is generated from integer seeds so a pipeline run on the
synthetic inputs is reproducible byte for byte.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterator

import numpy as np

from ..hydromodel.model import ForcingGrid
from ..hydromodel.network import ChannelNetwork, d8_from_dem
from ..raster import GridGeometry, Raster, regrid_bilinear, write_asc
from ..riskmetrics import DevClass

__all__ = [
    "basin_dem",
    "basin_gages",
    "climate_chunks",
    "climate_forcing",
    "valley_dem",
    "valley_landcover",
    "valley_admin",
    "write_synthetic_inputs",
]


def basin_dem(n: int = 50, cellsize: float = 1000.0, seed: int = 0) -> Raster:
    """Tilted valley draining to the middle of the southern edge.

    Along-valley fall of 2 m per cell and 1 m per cell of cross fall toward
    the centre column dominate the noise (< 0.25 m), so D8 leaves a single
    outlet.
    """
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:n, 0:n]
    centre = n // 2
    z = 100.0 + 2.0 * (n - 1 - rows) + 1.0 * np.abs(cols - centre)
    z = z + rng.uniform(0.0, 0.25, z.shape)
    return Raster.from_array(z, cellsize=cellsize)


def basin_gages(n: int = 50) -> dict[str, tuple[int, int]]:
    """Gages down the main stem plus two on side slopes."""
    centre = n // 2
    rows = [n // 5, 2 * n // 5, 3 * n // 5, 4 * n // 5, n - 1]
    gages = {f"G{i + 1}": (r, centre) for i, r in enumerate(rows)}
    gages["G6"] = (n - 1, centre - n // 5)
    gages["G7"] = (n - 1, centre + n // 5)
    return gages


def _seasonal(doy: np.ndarray) -> np.ndarray:
    return np.sin(2.0 * np.pi * (doy - 105.0) / 365.25)


def climate_chunks(
    target: GridGeometry,
    start_year: int,
    end_year: int,
    seed: int,
    precip_trend: float = 0.2,
    warming: float = 2.0,
    coarse_factor: int = 5,
    chunk_years: int = 10,
) -> Iterator[ForcingGrid]:
    """Daily precipitation and temperature from a coarse stochastic weather field.

    The coarse field (``coarse_factor`` basin cells per climate cell, with
    nodes beyond the basin edges) is interpolated bilinearly onto ``target``.
    Wet-day amounts grow by ``precip_trend`` (fraction) and temperature by
    ``warming`` (degC) between the first and last year. The record is
    yielded in consecutive blocks of ``chunk_years`` to bound memory; the
    block length changes values only at rounding level.
    """
    rng = np.random.default_rng(seed)
    end = np.datetime64(f"{end_year}-12-31", "D")
    dates = np.arange(np.datetime64(f"{start_year}-01-01", "D"), end + 1)
    n_t = dates.size
    csize = target.cellsize * coarse_factor
    ncr = int(np.ceil(target.nrows / coarse_factor)) + 1
    ncc = int(np.ceil(target.ncols / coarse_factor)) + 1
    coarse = GridGeometry(ncr, ncc, target.xll - csize / 2.0,
                          target.yll + target.nrows * target.cellsize - (ncr - 0.5) * csize, csize)

    years = dates.astype("datetime64[Y]").astype(int) + 1970
    frac = (years - start_year) / max(end_year - start_year, 1)
    doy = (dates - dates.astype("datetime64[Y]")).astype(int)
    wet = rng.random(n_t) < 0.3 + 0.05 * _seasonal(doy)
    amount = rng.gamma(0.8, 9.0, n_t) * (1.0 + precip_trend * frac)
    storm = np.where(wet, amount, 0.0)
    t_base = 8.0 + 12.0 * _seasonal(doy) + warming * frac + rng.normal(0.0, 3.0, n_t)

    # bilinear interpolation is linear in the data: build its matrix from unit impulses
    basis = np.zeros((ncr * ncc, target.nrows * target.ncols))
    for k in range(ncr * ncc):
        impulse = np.zeros(ncr * ncc)
        impulse[k] = 1.0
        basis[k] = regrid_bilinear(Raster(impulse.reshape(ncr, ncc), coarse), target).data.ravel()

    # one noise stream per variable, drawn in date order
    day_rng = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
    for y0 in range(start_year, end_year + 1, chunk_years):
        sel = (years >= y0) & (years < y0 + chunk_years)
        m = int(sel.sum())
        spatial_p = day_rng[0].lognormal(0.0, 0.25, (m, ncr * ncc))
        spatial_t = day_rng[1].normal(0.0, 0.5, (m, ncr * ncc))
        precip = ((storm[sel, None] * spatial_p) @ basis).reshape(m, *target.shape)
        temp = ((t_base[sel, None] + spatial_t) @ basis).reshape(m, *target.shape)
        np.maximum(precip, 0.0, out=precip)
        yield ForcingGrid(dates[sel], precip, temp, target)


def climate_forcing(target: GridGeometry, start_year: int, end_year: int, seed: int,
                    **kwargs) -> ForcingGrid:
    """The whole record of :func:`climate_chunks` as one forcing grid."""
    parts = list(climate_chunks(target, start_year, end_year, seed, **kwargs))
    return ForcingGrid(np.concatenate([p.dates for p in parts]),
                       np.concatenate([p.precip for p in parts]),
                       np.concatenate([p.temp for p in parts]), target)


def valley_dem(
    nrows: int = 90,
    ncols: int = 63,
    cellsize: float = 10.0,
    slope: float = 0.001,
    side_slope: float = 0.02,
    seed: int = 0,
) -> Raster:
    """Straight valley flowing south with a floodplain that rises toward the sides."""
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:nrows, 0:ncols]
    xc = (ncols - 1) / 2.0
    x = np.abs(cols - xc) * cellsize
    z = 50.0 + slope * cellsize * (nrows - 1 - rows) + side_slope * x
    # gentle along-valley undulation; symmetric about the valley axis
    bumps = rng.normal(0.0, 0.05, (nrows, (ncols + 1) // 2))
    sym = np.concatenate([bumps, bumps[:, : ncols // 2][:, ::-1]], axis=1)[:, :ncols]
    z = z + np.abs(sym) * (x > 2 * cellsize)
    return Raster.from_array(z, cellsize=cellsize)


def valley_landcover(dem: Raster, seed: int = 0) -> Raster:
    """Development intensity falling off with height above the valley floor."""
    rng = np.random.default_rng(seed)
    z = dem.data
    rel = z - z.min(axis=1, keepdims=True)
    lc = np.full(z.shape, int(DevClass.NONE))
    lc[rel < 3.0] = int(DevClass.OPEN)
    lc[rel < 2.0] = int(DevClass.LOW)
    lc[rel < 1.2] = int(DevClass.MEDIUM)
    lc[(rel < 0.6) & (rel > 0.1)] = int(DevClass.HIGH)
    flip = rng.random(z.shape) < 0.1
    lc[flip] = rng.integers(0, 5, int(flip.sum()))
    return Raster(lc.astype(float), dem.geometry, dem.nodata, "landcover")


def valley_admin(dem: Raster, n_bands: int = 3) -> tuple[Raster, list[dict]]:
    """Units as along-valley bands split at the valley axis; the top band's halves are cities."""
    nr, nc = dem.shape
    ids = np.zeros(dem.shape)
    rows = []
    edges = np.linspace(0, nr, n_bands + 1).astype(int)
    uid = 1
    for b in range(n_bands):
        for side, cols in (("W", slice(0, nc // 2)), ("E", slice(nc // 2, nc))):
            ids[edges[b]: edges[b + 1], cols] = uid
            kind = "city" if b == 0 else "borough"
            pop = 1000 * (n_bands - b) + (250 if side == "E" else 0)
            rows.append({"unit_id": str(uid), "class": kind, "name": f"band{b + 1}{side}",
                         "population": pop})
            uid += 1
    return Raster(ids, dem.geometry, dem.nodata, "admin"), rows


def write_synthetic_inputs(
    directory,
    seed: int = 0,
    members: tuple[str, ...] = ("cm1", "cm2"),
    resolutions: tuple[int, ...] = (10, 30),
    basin_size: int = 50,
    valley_shape: tuple[int, int] = (90, 63),
    start_year: int = 1981,
    end_year: int = 2060,
) -> Path:
    """Write rasters, CSVs and an INI file for a complete synthetic study; return the INI path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    dem = basin_dem(basin_size, seed=seed)
    write_asc(dem, d / "basin_dem.asc")
    gages = basin_gages(basin_size)
    with (d / "gages.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gage_id", "row", "col"])
        for name, (r, c) in gages.items():
            w.writerow([name, r, c])
    net = ChannelNetwork.from_d8(d8_from_dem(dem.data, dem.cellsize), dem.cellsize)
    outlet_area = float(net.area_km2[net.outlets].max())

    fine = min(resolutions)
    vd = valley_dem(*valley_shape, cellsize=float(fine), seed=seed)
    write_asc(vd, d / "valley_dem.asc")
    write_asc(valley_landcover(vd, seed=seed), d / "landcover.asc")
    ids, attrs = valley_admin(vd)
    write_asc(ids, d / "admin_ids.asc")
    with (d / "admin.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, ["unit_id", "class", "name", "population"], lineterminator="\n")
        w.writeheader()
        w.writerows(attrs)

    trends = ", ".join(f"{0.1 + 0.2 * i:g}" for i in range(len(members)))
    warming = ", ".join(f"{1.5 + i:g}" for i in range(len(members)))
    ini = f"""[run]
seed = {seed}
output_dir = out
workers = 1

[inputs]
basin_dem = basin_dem.asc
gages = gages.csv
hydraulic_dem = valley_dem.asc
landcover = landcover.asc
admin_ids = admin_ids.asc
admin_attributes = admin.csv
inflow_row = 0
inflow_col = {valley_shape[1] // 2}
inflow_area_km2 = {outlet_area!r}

[climate]
members = {", ".join(members)}
forcing = synthetic
start_year = {start_year}
end_year = {end_year}
precip_trend = {trends}
warming = {warming}

[hydromodel]
substeps = 1

[extremes]
percentile = 99
min_separation_days = 3
period_years = 100
iterations = 20000
burn_in = 5000
quantiles = 2

[epochs]
baseline = 1995
future = 2050

[hydraulics]
resolutions = {", ".join(str(r) for r in resolutions)}
manning = 0.045
max_time = 43200
channel_min_area_km2 = {outlet_area!r}

[risk]
hazard_threshold = 60
"""
    path = d / "pipeline.ini"
    path.write_text(ini)
    return path
