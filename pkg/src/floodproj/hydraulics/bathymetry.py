"""Channel bathymetry from hydraulic-geometry power laws in drainage area."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..hydromodel.network import D8_OFFSETS, ChannelNetwork

__all__ = ["HydraulicGeometry", "ChannelGeometry", "estimate_bathymetry", "DEFAULT_GEOMETRY"]


@dataclass(frozen=True)
class HydraulicGeometry:
    """Bankfull width ``a_w * A**b_w`` and depth ``a_d * A**b_d`` (m, A in km2)."""

    a_w: float = 2.3
    b_w: float = 0.5
    a_d: float = 0.27
    b_d: float = 0.3

    def __post_init__(self):
        if min(self.a_w, self.b_w, self.a_d, self.b_d) <= 0:
            raise ValueError("hydraulic-geometry coefficients must be positive")

    def width(self, area_km2):
        return self.a_w * np.power(area_km2, self.b_w)

    def depth(self, area_km2):
        return self.a_d * np.power(area_km2, self.b_d)


DEFAULT_GEOMETRY = HydraulicGeometry()


@dataclass
class ChannelGeometry:
    """Subgrid channel per cell; ``width`` is 0 and ``bed`` equals the DEM off-channel."""

    mask: np.ndarray
    width: np.ndarray
    depth: np.ndarray
    bed: np.ndarray
    area_km2: np.ndarray

    def mirrored_lr(self) -> "ChannelGeometry":
        return ChannelGeometry(*(a[:, ::-1].copy() for a in
                                 (self.mask, self.width, self.depth, self.bed, self.area_km2)))

    @classmethod
    def none(cls, dem: np.ndarray) -> "ChannelGeometry":
        z = np.asarray(dem, float)
        zeros = np.zeros(z.shape)
        return cls(np.zeros(z.shape, bool), zeros, zeros.copy(), z.copy(), zeros.copy())


def _four_connect(mask: np.ndarray, area: np.ndarray, net: ChannelNetwork, dem: np.ndarray) -> None:
    """Add an orthogonal cell at every diagonal channel link."""
    nr, nc = mask.shape
    for flat in np.flatnonzero(mask.ravel()):
        r, c = divmod(int(flat), nc)
        code = int(net.flowdir[r, c])
        if code not in D8_OFFSETS:
            continue
        dr, dc = D8_OFFSETS[code]
        if dr and dc:
            # pick the lower of the two orthogonal stepping cells
            a, b = (r, c + dc), (r + dr, c)
            ok = [p for p in (a, b) if 0 <= p[0] < nr and 0 <= p[1] < nc]
            if not ok:
                continue
            p = min(ok, key=lambda q: (dem[q], q))
            if not mask[p]:
                mask[p] = True
                area[p] = max(area[p], area[r, c])


def estimate_bathymetry(
    network: ChannelNetwork,
    dem: np.ndarray,
    coeffs: HydraulicGeometry = DEFAULT_GEOMETRY,
    min_area_km2: float | None = None,
    channel_mask: np.ndarray | None = None,
    max_width_ratio: float = 1.0,
) -> ChannelGeometry:
    """Width, depth and bed elevation of channel cells.

    Channel cells are ``channel_mask`` or every cell draining at least
    ``min_area_km2``. A channel wider than ``max_width_ratio * cellsize`` is
    spread over a band of neighbouring cells sharing the centreline bed, each
    carrying an equal share of the width.
    """
    z = np.asarray(dem, dtype=float)
    area = network.area_grid().astype(float).copy()
    if channel_mask is None:
        if min_area_km2 is None:
            raise ValueError("give channel_mask or min_area_km2")
        mask = area >= min_area_km2
    else:
        mask = np.asarray(channel_mask, bool).copy()
    mask &= network.active
    if np.any(area[mask] <= 0):
        raise ValueError("channel cells need positive drainage area")
    _four_connect(mask, area, network, z)

    dx = network.cellsize
    nr, nc = z.shape
    width = np.zeros(z.shape)
    depth = np.zeros(z.shape)
    bed = z.copy()
    src_area = np.zeros(z.shape)
    w_all = coeffs.width(area[mask])
    d_all = coeffs.depth(area[mask])
    # process small to large so the main stem wins overlaps
    cells = np.argwhere(mask)
    order = np.lexsort((cells[:, 1], cells[:, 0], area[mask]))
    limit = max_width_ratio * dx
    for k in order:
        r, c = cells[k]
        w, d = w_all[k], d_all[k]
        span = max(1, math.ceil(w / limit))
        rad = span // 2
        share = w / (2 * rad + 1)
        base = z[r, c] - d
        for rr in range(max(r - rad, 0), min(r + rad + 1, nr)):
            for cc in range(max(c - rad, 0), min(c + rad + 1, nc)):
                if not network.active[rr, cc]:
                    continue
                if src_area[rr, cc] > area[r, c]:
                    continue
                width[rr, cc] = share
                bed[rr, cc] = min(base, z[rr, cc] - 1e-3)
                depth[rr, cc] = z[rr, cc] - bed[rr, cc]
                src_area[rr, cc] = area[r, c]
    full = width > 0
    return ChannelGeometry(full, width, depth, bed, np.where(full, src_area, 0.0))
