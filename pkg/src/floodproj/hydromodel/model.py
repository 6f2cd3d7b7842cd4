"""Gridded conceptual rainfall-runoff model.

Every cell runs a daily bucket: precipitation falls as snow at or below the
threshold temperature, snow melts by degree-days, water entering a full soil
store spills as quick runoff, evaporation scales with positive temperature,
and the remaining store drains as a linear reservoir. Cell runoff enters the
channel network and is routed with :func:`route_kinematic`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from numba import njit

from ..raster import GridGeometry, Raster, read_asc, write_asc
from ..series import DailySeries
from .network import ChannelNetwork
from .routing import route_kinematic

__all__ = [
    "PARAM_FIELDS",
    "ForcingGrid",
    "CellParams",
    "MultiplierVector",
    "ModelState",
    "WaterBudget",
    "SimulatedFlow",
    "simulate_runoff",
    "read_forcing_dir",
    "write_forcing_dir",
]

PARAM_FIELDS = ("capacity", "drainage", "melt", "snow_temp", "evap", "roughness")
SECONDS_PER_DAY = 86400.0


@dataclass
class ForcingGrid:
    dates: np.ndarray
    precip: np.ndarray  # (n_days, nrows, ncols), mm/day
    temp: np.ndarray  # (n_days, nrows, ncols), deg C
    geometry: GridGeometry

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.precip = np.asarray(self.precip, dtype=float)
        self.temp = np.asarray(self.temp, dtype=float)
        shape = (self.dates.size,) + self.geometry.shape
        if self.precip.shape != shape or self.temp.shape != shape:
            raise ValueError(f"forcing rasters must have shape {shape}")
        if self.dates.size > 1 and np.any(np.diff(self.dates) != np.timedelta64(1, "D")):
            raise ValueError("forcing timestamps must be consecutive days")
        if np.any(self.precip < 0) or not np.all(np.isfinite(self.precip)):
            raise ValueError("precipitation must be finite and non-negative")

    @property
    def n_days(self) -> int:
        return self.dates.size

    def window(self, start=None, end=None) -> "ForcingGrid":
        keep = np.ones(self.n_days, bool)
        if start is not None:
            keep &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            keep &= self.dates <= np.datetime64(end, "D")
        return ForcingGrid(self.dates[keep], self.precip[keep], self.temp[keep], self.geometry)

    def scaled(self, factor: float) -> "ForcingGrid":
        return ForcingGrid(self.dates, self.precip * factor, self.temp, self.geometry)


@dataclass
class CellParams:
    """A-priori per-cell parameter fields.

    capacity (mm), drainage (1/day), melt (mm/degC/day), snow_temp (degC),
    evap (mm/degC/day), roughness (rating coefficient of the channel reach).
    """

    capacity: np.ndarray
    drainage: np.ndarray
    melt: np.ndarray
    snow_temp: np.ndarray
    evap: np.ndarray
    roughness: np.ndarray

    def __post_init__(self):
        shapes = set()
        for name in PARAM_FIELDS:
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
            shapes.add(arr.shape)
        if len(shapes) != 1:
            raise ValueError("all parameter fields must share one grid shape")
        self.validate()

    def validate(self) -> None:
        if np.any(self.capacity <= 0):
            raise ValueError("capacity must be positive")
        for name in ("drainage", "melt", "evap", "roughness"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"{name} must be non-negative")
        if np.any(self.roughness <= 0):
            raise ValueError("roughness must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.capacity.shape

    @classmethod
    def uniform(cls, shape, capacity=100.0, drainage=0.05, melt=3.0, snow_temp=0.0,
                evap=0.15, roughness=8.0) -> "CellParams":
        vals = dict(capacity=capacity, drainage=drainage, melt=melt, snow_temp=snow_temp,
                    evap=evap, roughness=roughness)
        return cls(**{k: np.full(shape, float(v)) for k, v in vals.items()})

    def scaled(self, factors: "MultiplierVector") -> "CellParams":
        return CellParams(**{n: getattr(self, n) * factors[n] for n in PARAM_FIELDS})


@dataclass(frozen=True)
class MultiplierVector:
    """One multiplicative factor per parameter field, each with its own bounds."""

    factors: Mapping[str, float]
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        missing = set(PARAM_FIELDS) - set(self.factors)
        if missing:
            raise ValueError(f"missing factors: {sorted(missing)}")
        bounds = {n: tuple(self.bounds.get(n, (0.1, 10.0))) for n in PARAM_FIELDS}
        for n, (lo, hi) in bounds.items():
            if not 0 < lo <= hi:
                raise ValueError(f"invalid bounds for {n}: {(lo, hi)}")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "factors", {n: float(self.factors[n]) for n in PARAM_FIELDS})

    @classmethod
    def ones(cls, bounds=None, lo=0.1, hi=10.0) -> "MultiplierVector":
        bounds = bounds or {n: (lo, hi) for n in PARAM_FIELDS}
        return cls({n: 1.0 for n in PARAM_FIELDS}, bounds)

    def __getitem__(self, name: str) -> float:
        return self.factors[name]

    def as_array(self) -> np.ndarray:
        return np.array([self.factors[n] for n in PARAM_FIELDS])

    def within_bounds(self) -> bool:
        return all(lo <= self.factors[n] <= hi for n, (lo, hi) in self.bounds.items())

    def check(self) -> None:
        for n, (lo, hi) in self.bounds.items():
            if not lo <= self.factors[n] <= hi:
                raise ValueError(f"factor {n}={self.factors[n]} outside [{lo}, {hi}]")

    def with_factor(self, name: str, value: float) -> "MultiplierVector":
        """Copy with one factor replaced, clamped to its bounds."""
        lo, hi = self.bounds[name]
        new = dict(self.factors)
        new[name] = min(max(float(value), lo), hi)
        return MultiplierVector(new, self.bounds)


@dataclass
class ModelState:
    soil: np.ndarray  # mm
    snow: np.ndarray  # mm water equivalent
    channel: np.ndarray  # m3 per reach

    @classmethod
    def empty(cls, shape) -> "ModelState":
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(int(np.prod(shape))))

    def volume(self, cell_area: float) -> float:
        return float((self.soil.sum() + self.snow.sum()) / 1000.0 * cell_area + self.channel.sum())


@dataclass(frozen=True)
class WaterBudget:
    """Volumes in m3 over a run."""

    precipitation: float
    evaporation: float
    outflow: float
    storage_change: float

    @property
    def residual(self) -> float:
        return self.precipitation - (self.outflow + self.evaporation + self.storage_change)

    @property
    def relative_error(self) -> float:
        if self.precipitation == 0:
            return abs(self.residual)
        return abs(self.residual) / self.precipitation


@dataclass
class SimulatedFlow:
    dates: np.ndarray
    flows: dict[str, DailySeries]
    budget: WaterBudget
    state: ModelState
    discharge: np.ndarray  # (n_days, n_nodes) daily mean outflow at the recorded reaches
    nodes: np.ndarray  # flat cell index of each discharge column

    def __getitem__(self, gage: str) -> DailySeries:
        return self.flows[gage]


@njit(cache=True)
def _buckets(precip, temp, cap, kd, melt, tsnow, evap, soil, snow):
    n_t, n = precip.shape
    runoff = np.zeros((n_t, n))
    et_total = 0.0
    for t in range(n_t):
        for i in range(n):
            p = precip[t, i]
            tc = temp[t, i]
            if tc <= tsnow[i]:
                snow[i] += p
                rain = 0.0
            else:
                rain = p
            m = melt[i] * (tc - tsnow[i])
            if m < 0.0:
                m = 0.0
            if m > snow[i]:
                m = snow[i]
            snow[i] -= m
            s = soil[i] + rain + m
            quick = s - cap[i]
            if quick < 0.0:
                quick = 0.0
            s -= quick
            e = evap[i] * tc if tc > 0.0 else 0.0
            if e > s:
                e = s
            s -= e
            frac = kd[i] if kd[i] < 1.0 else 1.0
            base = frac * s
            s -= base
            soil[i] = s
            runoff[t, i] = quick + base
            et_total += e
    return runoff, et_total


def simulate_runoff(
    forcing: ForcingGrid,
    params: CellParams,
    factors: MultiplierVector,
    network: ChannelNetwork,
    gages: Mapping[str, tuple[int, int]] | None = None,
    state: ModelState | None = None,
    substeps: int = 24,
) -> SimulatedFlow:
    """Run the bucket model and route runoff to the gages.

    ``gages`` maps names to (row, col); by default every network outlet is a
    gage named ``outlet<flat index>``. ``state`` (modified copy returned in the
    result) sets the initial soil, snow and channel storage.
    """
    g = forcing.geometry
    if params.shape != g.shape or network.shape != g.shape:
        raise ValueError("forcing, parameters and network must share one grid")
    if not np.isclose(network.cellsize, g.cellsize):
        raise ValueError("network cellsize differs from the forcing grid")
    factors.check()
    p = params.scaled(factors)
    p.validate()
    n = g.nrows * g.ncols
    st = ModelState.empty(g.shape) if state is None else ModelState(
        np.array(state.soil, float), np.array(state.snow, float), np.array(state.channel, float))
    cell_area = g.cell_area
    v0 = st.volume(cell_area)

    active = network.active.ravel()
    pr = np.ascontiguousarray(forcing.precip.reshape(forcing.n_days, n))
    pr = np.where(active, pr, 0.0)
    tp = np.ascontiguousarray(forcing.temp.reshape(forcing.n_days, n))
    soil = np.ascontiguousarray(st.soil.ravel())
    snow = np.ascontiguousarray(st.snow.ravel())
    runoff_mm, et_mm = _buckets(pr, tp, p.capacity.ravel(), p.drainage.ravel(), p.melt.ravel(),
                                p.snow_temp.ravel(), p.evap.ravel(), soil, snow)
    lateral = runoff_mm / 1000.0 * cell_area / SECONDS_PER_DAY
    if gages is None:
        gages = {f"outlet{o}": divmod(int(o), g.ncols) for o in network.outlets}
    gage_idx = {name: network.flat(r, c) for name, (r, c) in gages.items()}
    outlets = network.outlets
    nodes = np.unique(np.concatenate([outlets, np.array(list(gage_idx.values()), dtype=np.int64)]))
    routed = route_kinematic(lateral, network, p.roughness.ravel(), SECONDS_PER_DAY,
                             substeps, st.channel, record=nodes)
    st = ModelState(soil.reshape(g.shape), snow.reshape(g.shape), routed.storage)

    outflow = math.fsum(float(routed.at(o).sum()) for o in outlets) * SECONDS_PER_DAY
    budget = WaterBudget(
        precipitation=float(pr.sum() / 1000.0 * cell_area),
        evaporation=float(et_mm / 1000.0 * cell_area),
        outflow=outflow,
        storage_change=st.volume(cell_area) - v0,
    )
    flows = {name: DailySeries(forcing.dates, routed.at(idx).copy(), name)
             for name, idx in gage_idx.items()}
    return SimulatedFlow(forcing.dates, flows, budget, st, routed.discharge, routed.nodes)


# -- forcing directories -------------------------------------------------------

_FORCING_RE = re.compile(r"^(precip|temp)_(\d{8})\.asc$")


def read_forcing_dir(path) -> ForcingGrid:
    """Load ``precip_YYYYMMDD.asc`` / ``temp_YYYYMMDD.asc`` rasters."""
    path = Path(path)
    found: dict[str, dict[np.datetime64, Path]] = {"precip": {}, "temp": {}}
    for f in sorted(path.iterdir()):
        m = _FORCING_RE.match(f.name)
        if m:
            d = m.group(2)
            found[m.group(1)][np.datetime64(f"{d[:4]}-{d[4:6]}-{d[6:]}", "D")] = f
    if not found["precip"]:
        raise ValueError(f"{path}: no precip_YYYYMMDD.asc rasters")
    if set(found["precip"]) != set(found["temp"]):
        raise ValueError(f"{path}: precip and temp dates differ")
    dates = np.array(sorted(found["precip"]), dtype="datetime64[D]")
    geom = None
    pr, tp = [], []
    for d in dates:
        a, b = read_asc(found["precip"][d]), read_asc(found["temp"][d])
        if geom is None:
            geom = a.geometry
        if not (a.geometry.congruent(geom) and b.geometry.congruent(geom)):
            raise ValueError(f"{path}: raster geometry changes on {d}")
        pr.append(a.data)
        tp.append(b.data)
    return ForcingGrid(dates, np.stack(pr), np.stack(tp), geom)


def write_forcing_dir(forcing: ForcingGrid, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for k, d in enumerate(forcing.dates):
        tag = str(d).replace("-", "")
        write_asc(Raster(forcing.precip[k], forcing.geometry), path / f"precip_{tag}.asc")
        write_asc(Raster(forcing.temp[k], forcing.geometry), path / f"temp_{tag}.asc")
    return path
