"""D8 drainage topology on a regular grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["D8_OFFSETS", "ChannelNetwork", "d8_from_dem", "CyclicNetworkError"]

# ESRI D8 codes -> (drow, dcol); 0 marks an outlet
D8_OFFSETS = {
    1: (0, 1),
    2: (1, 1),
    4: (1, 0),
    8: (1, -1),
    16: (0, -1),
    32: (-1, -1),
    64: (-1, 0),
    128: (-1, 1),
}


class CyclicNetworkError(ValueError):
    pass


@dataclass
class ChannelNetwork:
    """Flow directions, downstream links and upstream drainage areas.

    Cells are addressed by their row-major flat index. ``order`` lists every
    active cell with all upstream cells before their receivers.
    """

    flowdir: np.ndarray
    downstream: np.ndarray
    order: np.ndarray
    area_km2: np.ndarray
    cellsize: float
    active: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.flowdir.shape

    @property
    def outlets(self) -> np.ndarray:
        return np.flatnonzero(self.active.ravel() & (self.downstream < 0))

    def flat(self, row: int, col: int) -> int:
        nr, nc = self.shape
        if not (0 <= row < nr and 0 <= col < nc):
            raise IndexError(f"cell ({row}, {col}) outside the {nr}x{nc} grid")
        return row * nc + col

    def area_grid(self) -> np.ndarray:
        return self.area_km2.reshape(self.shape)

    def path_downstream(self, start: int) -> list[int]:
        path = [start]
        while self.downstream[path[-1]] >= 0:
            path.append(int(self.downstream[path[-1]]))
        return path

    @classmethod
    def from_d8(cls, flowdir, cellsize: float, active=None, extra_area_km2=None) -> "ChannelNetwork":
        """Build from ESRI D8 codes; links leaving the grid or active set become outlets.

        ``extra_area_km2`` (per cell) adds drainage area entering from outside
        the grid, e.g. an upstream basin feeding a boundary cell.
        """
        fd = np.asarray(flowdir, dtype=np.int64)
        nr, nc = fd.shape
        act = np.ones(fd.shape, bool) if active is None else np.asarray(active, bool)
        bad = ~np.isin(fd, [0, *D8_OFFSETS])
        if np.any(bad & act):
            raise ValueError("flow directions must be ESRI D8 codes or 0")
        down = np.full(nr * nc, -1, dtype=np.int64)
        for code, (dr, dc) in D8_OFFSETS.items():
            rr, cc = np.nonzero((fd == code) & act)
            tr, tc = rr + dr, cc + dc
            inside = (tr >= 0) & (tr < nr) & (tc >= 0) & (tc < nc)
            rr, cc, tr, tc = rr[inside], cc[inside], tr[inside], tc[inside]
            ok = act[tr, tc]
            down[rr[ok] * nc + cc[ok]] = tr[ok] * nc + tc[ok]
        order = _topological_order(down, act.ravel())
        cell_km2 = cellsize * cellsize / 1e6
        area = np.where(act.ravel(), cell_km2, 0.0)
        if extra_area_km2 is not None:
            area = area + np.asarray(extra_area_km2, dtype=float).ravel()
        for i in order:
            j = down[i]
            if j >= 0:
                area[j] += area[i]
        return cls(fd, down, order, area, float(cellsize), act)


def _topological_order(down: np.ndarray, active: np.ndarray) -> np.ndarray:
    n = down.size
    indeg = np.zeros(n, dtype=np.int64)
    for i in range(n):
        if active[i] and down[i] >= 0:
            indeg[down[i]] += 1
    stack = [i for i in range(n) if active[i] and indeg[i] == 0]
    # reverse so pops come out in ascending index order
    stack.reverse()
    order = []
    while stack:
        i = stack.pop()
        order.append(i)
        j = down[i]
        if j >= 0:
            indeg[j] -= 1
            if indeg[j] == 0:
                stack.append(j)
    if len(order) != int(active.sum()):
        raise CyclicNetworkError("flow directions contain a cycle")
    return np.asarray(order, dtype=np.int64)


def d8_from_dem(dem: np.ndarray, cellsize: float = 1.0) -> np.ndarray:
    """Steepest-descent D8 codes; pits and flats drain nowhere (code 0).

    Ties keep the first direction in code order. NaN cells get code 0.
    """
    z = np.asarray(dem, dtype=float)
    nr, nc = z.shape
    best = np.zeros(z.shape)
    code = np.zeros(z.shape, dtype=np.int64)
    pad = np.pad(z, 1, constant_values=np.nan)
    for c, (dr, dc) in D8_OFFSETS.items():
        nb = pad[1 + dr: 1 + dr + nr, 1 + dc: 1 + dc + nc]
        dist = cellsize * (np.sqrt(2.0) if dr and dc else 1.0)
        with np.errstate(invalid="ignore"):
            slope = (z - nb) / dist
        better = np.isfinite(slope) & (slope > best)
        best[better] = slope[better]
        code[better] = c
    code[~np.isfinite(z)] = 0
    return code
