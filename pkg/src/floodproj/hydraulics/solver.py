"""Explicit local-inertial shallow-water solver on a staggered raster grid.

Depths live at cell centres; unit discharges live on cell faces (``qx`` on
the ncols+1 vertical faces of each row, ``qy`` on the nrows+1 horizontal
faces of each column; positive toward +col / +row, i.e. east / south).
Channel cells carry a subgrid rectangular channel whose discharge ``Qx`` /
``Qy`` (m3/s) is computed separately on faces joining two channel cells;
the floodplain flux then acts only on the remaining face width.

Each face update is semi-implicit in friction::

    q' = (q - g h_f dt S) / (1 + g dt n^2 |q| / h_f^(7/3))

with ``h_f`` the difference between the higher water surface and the higher
bed across the face and ``S`` the water-surface slope. Outgoing fluxes are
scaled down where they would drain a cell below zero, which keeps depths
non-negative without creating or destroying volume.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from numba import njit

from ..raster import Raster
from .bathymetry import ChannelGeometry

__all__ = [
    "SolverConfig",
    "FlowState",
    "InundationMap",
    "RunLog",
    "NonFiniteStateError",
    "adaptive_timestep",
    "step_local_inertial",
    "run_to_steady",
    "normal_depth",
    "read_inflows_csv",
]

EDGES = ("N", "S", "W", "E")


class NonFiniteStateError(FloatingPointError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    manning: float = 0.045
    g: float = 9.81
    cfl: float = 0.7
    h_dry: float = 0.01
    h_flow: float = 1e-4  # minimum face depth that carries flow
    max_dt: float = 10.0
    window_steps: int = 1000
    tolerance: float = 1e-3
    max_time: float = 5 * 86400.0
    open_edges: tuple[str, ...] = ("N", "S", "W", "E")
    boundary_slope: float | None = None  # None: local ground slope at the edge
    min_boundary_slope: float = 1e-4
    log_every: int = 500

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must be in (0, 1]")
        if self.manning <= 0 or self.h_dry <= 0 or self.g <= 0:
            raise ValueError("manning, h_dry and g must be positive")
        if self.max_dt <= 0 or self.window_steps < 1:
            raise ValueError("max_dt and window_steps must be positive")
        bad = set(self.open_edges) - set(EDGES)
        if bad:
            raise ValueError(f"unknown edges {sorted(bad)}")


@dataclass
class FlowState:
    h: np.ndarray
    qx: np.ndarray
    qy: np.ndarray
    Qx: np.ndarray
    Qy: np.ndarray
    time: float = 0.0

    @classmethod
    def dry(cls, shape) -> "FlowState":
        nr, nc = shape
        return cls(np.zeros(shape), np.zeros((nr, nc + 1)), np.zeros((nr + 1, nc)),
                   np.zeros((nr, nc + 1)), np.zeros((nr + 1, nc)))

    @classmethod
    def at_rest(cls, depth) -> "FlowState":
        st = cls.dry(np.shape(depth))
        st.h = np.array(depth, dtype=float)
        return st

    def copy(self) -> "FlowState":
        return FlowState(self.h.copy(), self.qx.copy(), self.qy.copy(),
                         self.Qx.copy(), self.Qy.copy(), self.time)


@dataclass
class RunLog:
    rows: list[tuple] = field(default_factory=list)
    header: tuple[str, ...] = ("step", "time_s", "dt_s", "wet_area_km2", "storage_m3",
                               "inflow_m3", "outflow_m3", "mass_error")

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for r in self.rows:
                w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
        return path


@dataclass
class InundationMap:
    depth: np.ndarray
    wet: np.ndarray
    area_km2: float
    cellsize: float
    converged: bool = True
    steps: int = 0
    sim_time: float = 0.0
    inflow_volume: float = 0.0
    outflow_volume: float = 0.0
    storage_change: float = 0.0
    log: RunLog = field(default_factory=RunLog)
    state: FlowState | None = None

    @property
    def mass_balance_error(self) -> float:
        """(inflow - outflow - storage change) / inflow."""
        if self.inflow_volume == 0:
            return 0.0
        return (self.inflow_volume - self.outflow_volume - self.storage_change) / self.inflow_volume

    def depth_raster(self, like: Raster) -> Raster:
        return Raster(self.depth.copy(), like.geometry, like.nodata, "depth")

    def wet_raster(self, like: Raster) -> Raster:
        return Raster(self.wet.astype(float), like.geometry, like.nodata, "wet")


def normal_depth(unit_discharge: float, manning: float, slope: float) -> float:
    """Manning normal depth of wide sheet flow."""
    return (unit_discharge * manning / math.sqrt(slope)) ** 0.6


# -- kernel ------------------------------------------------------------------------


@njit(cache=True)
def _volume(h, w, dbank, dx):
    if h <= dbank:
        return w * dx * h
    return w * dx * dbank + dx * dx * (h - dbank)


@njit(cache=True)
def _depth(v, w, dbank, dx):
    vb = w * dx * dbank
    if v <= vb:
        return v / (w * dx) if w > 0.0 else 0.0
    return dbank + (v - vb) / (dx * dx)


@njit(cache=True)
def _fp_update(q, hf, s, dt, g, n2):
    return (q - g * hf * dt * s) / (1.0 + g * dt * n2 * abs(q) / hf ** (7.0 / 3.0))


@njit(cache=True)
def _ch_update(Q, hc, w, s, dt, g, n2):
    a = w * hc
    r = a / (w + 2.0 * hc)
    return (Q - g * a * dt * s) / (1.0 + g * dt * n2 * abs(Q) / (a * r ** (4.0 / 3.0)))


@njit(cache=True)
def _step_kernel(h, qx, qy, Qx, Qy, zb, zbank, chw, active, dx, dt, g, n2, hflow,
                 open_n, open_s, open_w, open_e, slope_n, slope_s, slope_w, slope_e,
                 src_flat, src_q, fx, fy, factor):
    nr, nc = h.shape
    # x faces
    for i in range(nr):
        for j in range(nc + 1):
            qn = 0.0
            Qn = 0.0
            wfp = dx
            if 0 < j < nc:
                a = j - 1
                if active[i, a] and active[i, j]:
                    etal = zb[i, a] + h[i, a]
                    etar = zb[i, j] + h[i, j]
                    s = (etar - etal) / dx
                    emax = max(etal, etar)
                    if chw[i, a] > 0.0 and chw[i, j] > 0.0:
                        wc = min(chw[i, a], chw[i, j])
                        wfp = dx - wc
                        hc = emax - max(zb[i, a], zb[i, j])
                        if hc > hflow:
                            Qn = _ch_update(Qx[i, j], hc, wc, s, dt, g, n2)
                    hf = emax - max(zbank[i, a], zbank[i, j])
                    if hf > hflow and wfp > 0.0:
                        qn = _fp_update(qx[i, j], hf, s, dt, g, n2)
            else:
                c = 0 if j == 0 else nc - 1
                is_open = open_w if j == 0 else open_e
                if is_open and active[i, c]:
                    s = slope_w[i] if j == 0 else -slope_e[i]
                    eta = zb[i, c] + h[i, c]
                    if chw[i, c] > 0.0:
                        wfp = dx - chw[i, c]
                        hc = h[i, c]
                        if hc > hflow:
                            Qn = _ch_update(Qx[i, j], hc, chw[i, c], s, dt, g, n2)
                    hf = eta - zbank[i, c]
                    if hf > hflow and wfp > 0.0:
                        qn = _fp_update(qx[i, j], hf, s, dt, g, n2)
                    # outflow only
                    if j == 0:
                        qn = min(qn, 0.0)
                        Qn = min(Qn, 0.0)
                    else:
                        qn = max(qn, 0.0)
                        Qn = max(Qn, 0.0)
            qx[i, j] = qn
            Qx[i, j] = Qn
            fx[i, j] = qn * wfp + Qn
    # y faces
    for i in range(nr + 1):
        for j in range(nc):
            qn = 0.0
            Qn = 0.0
            wfp = dx
            if 0 < i < nr:
                a = i - 1
                if active[a, j] and active[i, j]:
                    etan = zb[a, j] + h[a, j]
                    etas = zb[i, j] + h[i, j]
                    s = (etas - etan) / dx
                    emax = max(etan, etas)
                    if chw[a, j] > 0.0 and chw[i, j] > 0.0:
                        wc = min(chw[a, j], chw[i, j])
                        wfp = dx - wc
                        hc = emax - max(zb[a, j], zb[i, j])
                        if hc > hflow:
                            Qn = _ch_update(Qy[i, j], hc, wc, s, dt, g, n2)
                    hf = emax - max(zbank[a, j], zbank[i, j])
                    if hf > hflow and wfp > 0.0:
                        qn = _fp_update(qy[i, j], hf, s, dt, g, n2)
            else:
                r = 0 if i == 0 else nr - 1
                is_open = open_n if i == 0 else open_s
                if is_open and active[r, j]:
                    s = slope_n[j] if i == 0 else -slope_s[j]
                    eta = zb[r, j] + h[r, j]
                    if chw[r, j] > 0.0:
                        wfp = dx - chw[r, j]
                        hc = h[r, j]
                        if hc > hflow:
                            Qn = _ch_update(Qy[i, j], hc, chw[r, j], s, dt, g, n2)
                    hf = eta - zbank[r, j]
                    if hf > hflow and wfp > 0.0:
                        qn = _fp_update(qy[i, j], hf, s, dt, g, n2)
                    if i == 0:
                        qn = min(qn, 0.0)
                        Qn = min(Qn, 0.0)
                    else:
                        qn = max(qn, 0.0)
                        Qn = max(Qn, 0.0)
            qy[i, j] = qn
            Qy[i, j] = Qn
            fy[i, j] = qn * wfp + Qn
    # positivity: scale each cell's outgoing fluxes to its available volume
    for i in range(nr):
        for j in range(nc):
            out = (max(-fx[i, j], 0.0) + max(fx[i, j + 1], 0.0)) + (
                max(-fy[i, j], 0.0) + max(fy[i + 1, j], 0.0))
            factor[i, j] = 1.0
            if out > 0.0:
                dbank = zbank[i, j] - zb[i, j]
                v = _volume(h[i, j], chw[i, j], dbank, dx)
                if out * dt > v:
                    factor[i, j] = v / (out * dt)
    for i in range(nr):
        for j in range(nc + 1):
            f = fx[i, j]
            if f > 0.0 and j > 0:
                k = factor[i, j - 1]
            elif f < 0.0 and j < nc:
                k = factor[i, j]
            else:
                k = 1.0
            if k < 1.0:
                qx[i, j] *= k
                Qx[i, j] *= k
                fx[i, j] *= k
    for i in range(nr + 1):
        for j in range(nc):
            f = fy[i, j]
            if f > 0.0 and i > 0:
                k = factor[i - 1, j]
            elif f < 0.0 and i < nr:
                k = factor[i, j]
            else:
                k = 1.0
            if k < 1.0:
                qy[i, j] *= k
                Qy[i, j] *= k
                fy[i, j] *= k
    # boundary outflow in fixed order
    out_rate = 0.0
    for i in range(nr):
        out_rate += -fx[i, 0]
        out_rate += fx[i, nc]
    for j in range(nc):
        out_rate += -fy[0, j]
        out_rate += fy[nr, j]
    # continuity
    for i in range(nr):
        for j in range(nc):
            net = (fx[i, j] - fx[i, j + 1]) + (fy[i, j] - fy[i + 1, j])
            if net != 0.0:
                dbank = zbank[i, j] - zb[i, j]
                v = _volume(h[i, j], chw[i, j], dbank, dx) + dt * net
                hn = _depth(v, chw[i, j], dbank, dx)
                h[i, j] = hn if hn > 0.0 else 0.0
    in_rate = 0.0
    for m in range(src_flat.size):
        i = src_flat[m] // nc
        j = src_flat[m] % nc
        dbank = zbank[i, j] - zb[i, j]
        v = _volume(h[i, j], chw[i, j], dbank, dx) + dt * src_q[m]
        h[i, j] = _depth(v, chw[i, j], dbank, dx)
        in_rate += src_q[m]
    return out_rate * dt, in_rate * dt


@njit(cache=True)
def _storage(h, zb, zbank, chw, active, dx, h_dry):
    nr, nc = h.shape
    total = 0.0
    wet = 0
    for i in range(nr):
        for j in range(nc):
            if active[i, j]:
                total += _volume(h[i, j], chw[i, j], zbank[i, j] - zb[i, j], dx)
                if h[i, j] > h_dry:
                    wet += 1
    return total, wet


# -- model setup -------------------------------------------------------------------


class _Domain:
    """Static arrays shared by every step of a run."""

    def __init__(self, dem: Raster, geometry: ChannelGeometry | None, config: SolverConfig):
        z = dem.masked()
        self.active = np.isfinite(z)
        zf = np.where(self.active, z, 0.0)
        self.dx = float(dem.cellsize)
        if geometry is None:
            geometry = ChannelGeometry.none(zf)
        if geometry.mask.shape != z.shape:
            raise ValueError("channel geometry does not match the DEM")
        self.geometry = geometry
        self.chw = np.where(geometry.mask & self.active, np.minimum(geometry.width, self.dx), 0.0)
        self.zbank = zf
        self.zb = np.where(self.chw > 0, np.minimum(geometry.bed, zf), zf)
        self.config = config
        self.n2 = config.manning ** 2
        self.slopes = self._edge_slopes(zf)
        nr, nc = z.shape
        self.fx = np.zeros((nr, nc + 1))
        self.fy = np.zeros((nr + 1, nc))
        self.factor = np.ones((nr, nc))

    def _edge_slopes(self, z):
        cfg = self.config
        nr, nc = z.shape

        def clip(s):
            return np.maximum(s, cfg.min_boundary_slope)

        if cfg.boundary_slope is not None:
            v = float(cfg.boundary_slope)
            return {"N": np.full(nc, v), "S": np.full(nc, v), "W": np.full(nr, v), "E": np.full(nr, v)}
        if nr > 1:
            sn = clip((z[1, :] - z[0, :]) / self.dx)
            ss = clip((z[-2, :] - z[-1, :]) / self.dx)
        else:
            sn = ss = np.full(nc, cfg.min_boundary_slope)
        if nc > 1:
            sw = clip((z[:, 1] - z[:, 0]) / self.dx)
            se = clip((z[:, -2] - z[:, -1]) / self.dx)
        else:
            sw = se = np.full(nr, cfg.min_boundary_slope)
        return {"N": sn, "S": ss, "W": sw, "E": se}

    def storage(self, h) -> tuple[float, int]:
        return _storage(h, self.zb, self.zbank, self.chw, self.active, self.dx, self.config.h_dry)


def adaptive_timestep(state: FlowState, cellsize: float, config: SolverConfig = SolverConfig()) -> float:
    """``cfl * cellsize / sqrt(g * h_max)``, capped at ``config.max_dt``."""
    h_max = float(np.max(state.h)) if state.h.size else 0.0
    if not h_max > 0:
        return config.max_dt
    return min(config.cfl * cellsize / math.sqrt(config.g * h_max), config.max_dt)


def _sources(inflows, shape):
    nr, nc = shape
    flat, q = [], []
    for (r, c), val in sorted(inflows.items()):
        if not (0 <= r < nr and 0 <= c < nc):
            raise ValueError(f"inflow node ({r}, {c}) outside the grid")
        flat.append(int(r) * nc + int(c))
        q.append(float(val))
    return np.array(flat, dtype=np.int64), np.array(q, dtype=float)


def _advance(state: FlowState, dom: _Domain, dt: float, src_flat, src_q) -> tuple[float, float]:
    cfg = dom.config
    open_ = set(cfg.open_edges)
    out_v, in_v = _step_kernel(
        state.h, state.qx, state.qy, state.Qx, state.Qy, dom.zb, dom.zbank, dom.chw, dom.active,
        dom.dx, dt, cfg.g, dom.n2, cfg.h_flow,
        "N" in open_, "S" in open_, "W" in open_, "E" in open_,
        dom.slopes["N"], dom.slopes["S"], dom.slopes["W"], dom.slopes["E"],
        src_flat, src_q, dom.fx, dom.fy, dom.factor)
    state.time += dt
    return out_v, in_v


def _check_finite(state: FlowState) -> None:
    if not np.all(np.isfinite(state.h)):
        bad = np.argwhere(~np.isfinite(state.h))[:5]
        raise NonFiniteStateError(f"non-finite depth at cells {bad.tolist()} (t={state.time:.1f}s)")


def step_local_inertial(
    state: FlowState,
    dem: Raster,
    geometry: ChannelGeometry | None = None,
    config: SolverConfig = SolverConfig(),
    dt: float | None = None,
    inflows: Mapping[tuple[int, int], float] | None = None,
) -> FlowState:
    """Advance one step and return the new state (the input is left untouched)."""
    dom = _Domain(dem, geometry, config)
    new = state.copy()
    if dt is None:
        dt = adaptive_timestep(new, dom.dx, config)
    flat, q = _sources(inflows or {}, dem.shape)
    _advance(new, dom, dt, flat, q)
    _check_finite(new)
    return new


def run_to_steady(
    dem: Raster,
    geometry: ChannelGeometry | None,
    inflows: Mapping[tuple[int, int], float],
    config: SolverConfig = SolverConfig(),
    state: FlowState | None = None,
    max_steps: int | None = None,
) -> InundationMap:
    """Drive steady inflows until the wet area and stored volume settle.

    Convergence requires both the wet area and the stored volume to change by
    less than ``config.tolerance`` (relative) over ``config.window_steps``
    steps. Runs reaching ``config.max_time`` return with ``converged=False``.
    With channels present every inflow node must be a channel cell.
    """
    dom = _Domain(dem, geometry, config)
    has_channels = bool(np.any(dom.chw > 0))
    for (r, c), val in inflows.items():
        if val < 0:
            raise ValueError("inflow discharge must be non-negative")
        if has_channels and not dom.chw[r, c] > 0:
            raise ValueError(f"inflow node ({r}, {c}) is not on a channel")
        if not dom.active[r, c]:
            raise ValueError(f"inflow node ({r}, {c}) is a nodata cell")
    src_flat, src_q = _sources(inflows, dem.shape)
    st = FlowState.dry(dem.shape) if state is None else state.copy()
    s0, _ = dom.storage(st.h)
    cell_km2 = dom.dx * dom.dx / 1e6
    win = config.window_steps
    hist_area = np.zeros(win + 1)
    hist_store = np.zeros(win + 1)
    cum_in = cum_out = 0.0
    log = RunLog()
    step = 0
    converged = False
    h_cap = float(np.max(st.h)) if st.h.size else 0.0
    while True:
        dt = adaptive_timestep(st, dom.dx, config)
        out_v, in_v = _advance(st, dom, dt, src_flat, src_q)
        cum_in += in_v
        cum_out += out_v
        step += 1
        store, wet = dom.storage(st.h)
        hist_area[step % (win + 1)] = wet
        hist_store[step % (win + 1)] = store
        if step % config.log_every == 0 or step == 1:
            _check_finite(st)
            err = (cum_in - cum_out - (store - s0)) / cum_in if cum_in > 0 else 0.0
            log.rows.append((step, st.time, dt, wet * cell_km2, store, cum_in, cum_out, err))
        if step > win:
            old_a = hist_area[(step - win) % (win + 1)]
            old_s = hist_store[(step - win) % (win + 1)]
            da = abs(wet - old_a) / max(wet, 1)
            ds = abs(store - old_s) / store if store > 0 else 0.0
            if da < config.tolerance and ds < config.tolerance:
                converged = True
                break
        if st.time >= config.max_time or (max_steps is not None and step >= max_steps):
            break
    _check_finite(st)
    store, wet = dom.storage(st.h)
    err = (cum_in - cum_out - (store - s0)) / cum_in if cum_in > 0 else 0.0
    log.rows.append((step, st.time, dt, wet * cell_km2, store, cum_in, cum_out, err))
    depth = np.where(dom.active, st.h, 0.0)
    wet_mask = dom.active & (depth > config.h_dry)
    return InundationMap(
        depth=depth, wet=wet_mask, area_km2=int(wet_mask.sum()) * cell_km2, cellsize=dom.dx,
        converged=converged, steps=step, sim_time=st.time, inflow_volume=cum_in,
        outflow_volume=cum_out, storage_change=store - s0, log=log, state=st)


def read_inflows_csv(path) -> dict[tuple[int, int], float]:
    """``node_row,node_col,q_m3s`` rows; repeated nodes are summed."""
    out: dict[tuple[int, int], float] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["node_row"]), int(row["node_col"]))
            out[key] = out.get(key, 0.0) + float(row["q_m3s"])
    return out
