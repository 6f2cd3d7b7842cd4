"""Georeferenced rasters, ESRI ASCII grid I/O and resampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

__all__ = [
    "GridGeometry",
    "Raster",
    "read_asc",
    "write_asc",
    "regrid_bilinear",
    "coarsen",
]

DEFAULT_NODATA = -9999.0


@dataclass(frozen=True)
class GridGeometry:
    """Shape and placement of a north-up grid.

    Row 0 is the northern edge, as in ESRI ASCII files. ``xll``/``yll`` are
    the coordinates of the lower-left corner of the lower-left cell.
    """

    nrows: int
    ncols: int
    xll: float = 0.0
    yll: float = 0.0
    cellsize: float = 1.0

    def __post_init__(self):
        if self.nrows < 1 or self.ncols < 1:
            raise ValueError("grid must have at least one row and column")
        if not self.cellsize > 0:
            raise ValueError("cellsize must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def cell_area(self) -> float:
        return self.cellsize * self.cellsize

    def x_centers(self) -> np.ndarray:
        return self.xll + (np.arange(self.ncols) + 0.5) * self.cellsize

    def y_centers(self) -> np.ndarray:
        # north to south, matching row order
        return self.yll + (self.nrows - np.arange(self.nrows) - 0.5) * self.cellsize

    def congruent(self, other: "GridGeometry") -> bool:
        return (
            self.shape == other.shape
            and np.isclose(self.cellsize, other.cellsize)
            and np.isclose(self.xll, other.xll)
            and np.isclose(self.yll, other.yll)
        )


@dataclass
class Raster:
    data: np.ndarray
    geometry: GridGeometry
    nodata: float = DEFAULT_NODATA
    name: str = field(default="", compare=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != self.geometry.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match geometry {self.geometry.shape}"
            )

    @classmethod
    def from_array(cls, data, cellsize=1.0, xll=0.0, yll=0.0, nodata=DEFAULT_NODATA):
        data = np.asarray(data, dtype=float)
        geom = GridGeometry(data.shape[0], data.shape[1], xll, yll, cellsize)
        return cls(data, geom, nodata)

    @property
    def cellsize(self) -> float:
        return self.geometry.cellsize

    @property
    def shape(self) -> tuple[int, int]:
        return self.geometry.shape

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.data) & (self.data != self.nodata)

    def masked(self) -> np.ndarray:
        """Copy of the data with nodata replaced by NaN."""
        out = self.data.copy()
        out[~self.valid_mask()] = np.nan
        return out

    def mirrored_lr(self) -> "Raster":
        return Raster(self.data[:, ::-1].copy(), self.geometry, self.nodata, self.name)


_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


def read_asc(path) -> Raster:
    """Read an ESRI ASCII grid.

    Accepts ``XLLCENTER``/``YLLCENTER`` as well as the corner form; a missing
    ``NODATA_VALUE`` defaults to -9999.
    """
    path = Path(path)
    header: dict[str, float] = {}
    with path.open() as fh:
        lines = fh.readlines()
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0].lower()
        if key[0].isalpha():
            header[key] = float(parts[1])
            i += 1
        else:
            break
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        cellsize = header["cellsize"]
    except KeyError as exc:
        raise ValueError(f"{path}: missing header key {exc.args[0].upper()}") from None
    if "xllcorner" in header:
        xll = header["xllcorner"]
    elif "xllcenter" in header:
        xll = header["xllcenter"] - 0.5 * cellsize
    else:
        raise ValueError(f"{path}: missing XLLCORNER")
    if "yllcorner" in header:
        yll = header["yllcorner"]
    elif "yllcenter" in header:
        yll = header["yllcenter"] - 0.5 * cellsize
    else:
        raise ValueError(f"{path}: missing YLLCORNER")
    nodata = header.get("nodata_value", DEFAULT_NODATA)
    values = np.array(" ".join(lines[i:]).split(), dtype=float)
    if values.size != nrows * ncols:
        raise ValueError(f"{path}: expected {nrows * ncols} values, found {values.size}")
    geom = GridGeometry(nrows, ncols, xll, yll, cellsize)
    return Raster(values.reshape(nrows, ncols), geom, nodata, name=path.stem)


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_asc(raster: Raster, path) -> Path:
    """Write ``raster`` as ESRI ASCII with round-trip exact values."""
    path = Path(path)
    g = raster.geometry
    data = np.where(np.isfinite(raster.data), raster.data, raster.nodata)
    out = [
        f"NCOLS {g.ncols}",
        f"NROWS {g.nrows}",
        f"XLLCORNER {_fmt(g.xll)}",
        f"YLLCORNER {_fmt(g.yll)}",
        f"CELLSIZE {_fmt(g.cellsize)}",
        f"NODATA_VALUE {_fmt(raster.nodata)}",
    ]
    out.extend(" ".join(_fmt(v) for v in row) for row in data)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path


def regrid_bilinear(src: Raster, target: GridGeometry) -> Raster:
    """Bilinear resampling between cell-centre lattices.

    The target cell centres must fall inside the hull of the source cell
    centres (a small tolerance absorbs floating-point noise at the edges).
    """
    xs = src.geometry.x_centers()
    ys = src.geometry.y_centers()[::-1]  # ascending for the interpolator
    tx = target.x_centers()
    ty = target.y_centers()
    tol = 1e-9 * max(src.cellsize, 1.0)
    if (
        tx.min() < xs.min() - tol
        or tx.max() > xs.max() + tol
        or ty.min() < ys.min() - tol
        or ty.max() > ys.max() + tol
    ):
        raise ValueError("target grid extends outside the source extent")
    if src.geometry.congruent(target):
        return Raster(src.data.copy(), target, src.nodata, src.name)
    tx = np.clip(tx, xs.min(), xs.max())
    ty = np.clip(ty, ys.min(), ys.max())
    values = src.masked()[::-1, :]
    if values.shape[0] == 1 or values.shape[1] == 1:
        raise ValueError("bilinear regridding needs at least 2x2 source cells")
    interp = RegularGridInterpolator((ys, xs), values, method="linear")
    yy, xx = np.meshgrid(ty, tx, indexing="ij")
    out = interp(np.column_stack([yy.ravel(), xx.ravel()])).reshape(target.shape)
    out[~np.isfinite(out)] = src.nodata
    return Raster(out, target, src.nodata, src.name)


def coarsen(src: Raster, factor: int, how: str = "mean") -> Raster:
    """Aggregate ``factor`` x ``factor`` blocks; trailing partial blocks are dropped."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return Raster(src.data.copy(), src.geometry, src.nodata, src.name)
    g = src.geometry
    nr, nc = g.nrows // factor, g.ncols // factor
    if nr == 0 or nc == 0:
        raise ValueError("coarsening factor larger than the grid")
    # keep the northern/western edges aligned
    block = src.masked()[: nr * factor, : nc * factor].reshape(nr, factor, nc, factor)
    if how == "mean":
        data = np.nanmean(block, axis=(1, 3))
    elif how == "mode":
        flat = block.transpose(0, 2, 1, 3).reshape(nr, nc, factor * factor)
        data = np.empty((nr, nc))
        for i in range(nr):
            for j in range(nc):
                vals, counts = np.unique(flat[i, j], return_counts=True)
                data[i, j] = vals[np.argmax(counts)]
    else:
        raise ValueError(f"unknown aggregation {how!r}")
    yll = g.yll + (g.nrows - nr * factor) * g.cellsize
    geom = GridGeometry(nr, nc, g.xll, yll, g.cellsize * factor)
    data = np.where(np.isfinite(data), data, src.nodata)
    return Raster(data, geom, src.nodata, src.name)
