"""End-to-end orchestration over the climate x hydrology x hydraulics scenario grid."""

from __future__ import annotations

import csv
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..extremes import MCMCConfig, fit_mcmc, posterior_return_levels, select_exceedances
from ..hydraulics import ChannelGeometry, HydraulicGeometry, SolverConfig, estimate_bathymetry, run_to_steady
from ..hydromodel import (
    CellParams,
    ChannelNetwork,
    ForcingGrid,
    ModelState,
    MultiplierVector,
    d8_from_dem,
    read_forcing_dir,
    simulate_runoff,
)
from ..raster import Raster, coarsen, read_asc, regrid_bilinear, write_asc
from ..regionalize import GagePeak, fit_scaling, predict_peak
from ..riskmetrics import DevClass, disaggregate_population, exposure_percent, hazard_percent, load_admin_units
from ..series import DailySeries
from .config import ConfigError, PipelineConfig, config_hash
from .manifest import MANIFEST_NAME, RunManifest
from .reports import emit_reports
from .synthetic import climate_chunks

__all__ = ["run_pipeline", "stage_seeds"]

log = logging.getLogger(__name__)


def stage_seeds(seed: int, n_members: int, n_gages: int) -> tuple[list[int], list[list[int]]]:
    """Climate seeds per member and MCMC seeds per (member, gage), all from one root seed."""
    clim_ss, mcmc_ss = np.random.SeedSequence(seed).spawn(2)

    def word(ss):
        return int(ss.generate_state(1, dtype=np.uint32)[0])

    clim = [word(s) for s in clim_ss.spawn(n_members)]
    mcmc = [[word(s) for s in m.spawn(n_gages)] for m in mcmc_ss.spawn(n_members)]
    return clim, mcmc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_gages(path: Path) -> dict[str, tuple[int, int]]:
    with path.open(newline="") as fh:
        return {r["gage_id"]: (int(r["row"]), int(r["col"])) for r in csv.DictReader(fh)}


def _quantile_label(level: float) -> str:
    return f"q{level:.3f}"


# -- climate and hydrology -----------------------------------------------------------


def _forcing_chunks(cfg: PipelineConfig, member_index: int, seed: int, geometry):
    if cfg.forcing == "synthetic":
        trend = cfg.precip_trend[member_index] if cfg.precip_trend else 0.2
        warm = cfg.warming[member_index] if cfg.warming else 2.0
        yield from climate_chunks(geometry, cfg.start_year, cfg.end_year, seed,
                                  precip_trend=trend, warming=warm, chunk_years=cfg.chunk_years)
        return
    f = read_forcing_dir(cfg.forcing_dir(cfg.members[member_index]))
    f = f.window(f"{cfg.start_year}-01-01", f"{cfg.end_year}-12-31")
    if f.geometry.congruent(geometry):
        yield ForcingGrid(f.dates, f.precip, f.temp, geometry)
        return
    # climate-model grid: interpolate every day onto the basin grid
    p = np.stack([regrid_bilinear(Raster(d, f.geometry), geometry).data for d in f.precip])
    t = np.stack([regrid_bilinear(Raster(d, f.geometry), geometry).data for d in f.temp])
    yield ForcingGrid(f.dates, np.maximum(p, 0.0), t, geometry)


def _simulate_member(cfg, member_index, seed, dem, network, gages) -> dict[str, DailySeries]:
    params = CellParams.uniform(dem.shape)
    factors = MultiplierVector.ones()
    for name, val in cfg.factors.items():
        factors = factors.with_factor(name, val)
    state = ModelState.empty(dem.shape)
    parts: dict[str, list] = {g: [] for g in gages}
    dates = []
    for chunk in _forcing_chunks(cfg, member_index, seed, dem.geometry):
        sim = simulate_runoff(chunk, params, factors, network, gages, state, cfg.substeps)
        state = sim.state
        dates.append(chunk.dates)
        for g in gages:
            parts[g].append(sim[g].values)
    all_dates = np.concatenate(dates)
    return {g: DailySeries(all_dates, np.concatenate(v), g) for g, v in parts.items()}


def _hydrology(cfg: PipelineConfig, manifest: RunManifest) -> dict[tuple[str, str, str], float]:
    """Peak inflow at the hydraulic inflow node per (epoch, member, quantile label)."""
    dem = read_asc(cfg.path("basin_dem"))
    network = ChannelNetwork.from_d8(d8_from_dem(dem.masked(), dem.cellsize), dem.cellsize,
                                     active=dem.valid_mask())
    gages = _read_gages(cfg.path("gages"))
    area = network.area_grid()
    clim_seeds, mcmc_seeds = stage_seeds(cfg.seed, len(cfg.members), len(gages))
    levels = cfg.quantile_levels
    peaks: dict[tuple[str, str, str], float] = {}
    for mi, member in enumerate(cfg.members):
        try:
            flows = _simulate_member(cfg, mi, clim_seeds[mi], dem, network, gages)
        except (ValueError, FloatingPointError) as exc:
            manifest.failures.append({"stage": "simulate", "climate": member, "error": str(exc)})
            continue
        per_gage: dict[str, dict[str, np.ndarray]] = {}
        for gi, (gid, (r, c)) in enumerate(gages.items()):
            try:
                data = select_exceedances(flows[gid], cfg.percentile, cfg.min_separation_days)
                sample = fit_mcmc(data, config=MCMCConfig(
                    iterations=cfg.iterations, burn_in=cfg.burn_in, seed=mcmc_seeds[mi][gi]))
            except (ValueError, RuntimeError) as exc:
                manifest.failures.append({"stage": "extremes", "climate": member, "gage": gid,
                                          "error": str(exc)})
                continue
            per_gage[gid] = {}
            for epoch, year in cfg.epochs.items():
                lv = posterior_return_levels(sample, cfg.period_years, data.covariate_of_year(year))
                if lv.size == 0:
                    continue
                per_gage[gid][epoch] = lv
                manifest.return_levels.append({
                    "member": member, "gage": gid, "epoch": epoch, "year": year,
                    "threshold": data.threshold, "n_events": data.n_events,
                    "acceptance": sample.acceptance_rate,
                    "mean": float(np.mean(lv)), "q05": float(np.quantile(lv, 0.05)),
                    "q95": float(np.quantile(lv, 0.95)), "min": float(lv.min()),
                    "max": float(lv.max())})
        for epoch in cfg.epochs:
            for level in levels:
                q_label = _quantile_label(level)
                points = []
                for gid, by_epoch in per_gage.items():
                    if epoch not in by_epoch:
                        continue
                    qp = float(np.quantile(by_epoch[epoch], level))
                    r, c = gages[gid]
                    points.append(GagePeak(gid, float(area[r, c]), qp, epoch))
                    manifest.gage_peaks.append({
                        "epoch": epoch, "climate": member, "hydrology": q_label, "gage_id": gid,
                        "area_km2": float(area[r, c]), "qp_m3s": qp})
                try:
                    fit = fit_scaling(points, epoch)
                except ValueError as exc:
                    manifest.failures.append({"stage": "scaling", "epoch": epoch, "climate": member,
                                              "hydrology": q_label, "error": str(exc)})
                    continue
                q_in = predict_peak(fit, cfg.inflow_area_km2)
                peaks[(epoch, member, q_label)] = q_in
                manifest.scaling.append({
                    "epoch": epoch, "climate": member, "hydrology": q_label, "beta": fit.beta,
                    "alpha": fit.alpha, "r": fit.r, "n": fit.n,
                    "inflow_area_km2": cfg.inflow_area_km2, "inflow_peak_m3s": q_in})
    return peaks


# -- hydraulics and risk -------------------------------------------------------------


@dataclass
class _Resolution:
    label: str
    dem: Raster
    geometry: ChannelGeometry
    inflow_cells: list[tuple[int, int]]
    inflow_weights: list[float]
    units: list
    population: dict[str, np.ndarray]


def _prepare_resolution(cfg: PipelineConfig, res: int, fine: Raster, landcover: Raster,
                        admin: Raster, out: Path) -> _Resolution:
    factor = res / fine.cellsize
    if abs(factor - round(factor)) > 1e-9 or round(factor) < 1:
        raise ConfigError(f"resolution {res} m is not a multiple of the {fine.cellsize} m DEM")
    f = int(round(factor))
    dem = coarsen(fine, f)
    lc = coarsen(landcover, f, how="mode")
    ids = coarsen(admin, f, how="mode")
    r0, c0 = cfg.inflow_row // f, cfg.inflow_col // f
    extra = np.zeros(dem.shape)
    extra[r0, c0] = cfg.inflow_area_km2
    net = ChannelNetwork.from_d8(d8_from_dem(dem.masked(), dem.cellsize), dem.cellsize,
                                 active=dem.valid_mask(), extra_area_km2=extra)
    coeffs = HydraulicGeometry(cfg.a_w, cfg.b_w, cfg.a_d, cfg.b_d)
    min_area = cfg.channel_min_area_km2 if cfg.channel_min_area_km2 is not None else cfg.inflow_area_km2
    geo = estimate_bathymetry(net, dem.masked(), coeffs, min_area_km2=min_area)
    # the peak enters across the channel section at the inflow node, split by width
    lo = hi = c0
    while lo > 0 and geo.mask[r0, lo - 1]:
        lo -= 1
    while hi < dem.shape[1] - 1 and geo.mask[r0, hi + 1]:
        hi += 1
    cells = [(r0, c) for c in range(lo, hi + 1)]
    w = np.array([geo.width[rc] for rc in cells])
    weights = list(w / w.sum()) if w.sum() > 0 else [1.0 / len(cells)] * len(cells)

    label = f"{res}m"
    d = out / "hydraulics" / label
    write_asc(dem, d / "dem.asc")
    write_asc(Raster(geo.width, dem.geometry, name="width"), d / "channel_width.asc")
    write_asc(Raster(geo.bed, dem.geometry, name="bed"), d / "channel_bed.asc")
    units = load_admin_units(ids.data, cfg.path("admin_attributes"), dem.geometry.cell_area / 1e6)
    units = [u for u in units if u.n_cells > 0]
    weights_map = {DevClass.OPEN: cfg.weights[0], DevClass.LOW: cfg.weights[1],
                   DevClass.MEDIUM: cfg.weights[2], DevClass.HIGH: cfg.weights[3]}
    pop = {u.unit_id: disaggregate_population(u, lc.data.astype(int), weights_map) for u in units}
    return _Resolution(label, dem, geo, cells, weights, units, pop)


def _hydraulic_job(args):
    key, dem, geo, inflows, solver_cfg = args
    try:
        m = run_to_steady(dem, geo, inflows, solver_cfg)
    except (ValueError, FloatingPointError) as exc:
        return key, None, f"{type(exc).__name__}: {exc}"
    return key, m, None


def _solver_config(cfg: PipelineConfig) -> SolverConfig:
    return SolverConfig(manning=cfg.manning, cfl=cfg.cfl, h_dry=cfg.h_dry, tolerance=cfg.tolerance,
                        window_steps=cfg.window_steps, max_time=cfg.max_time, open_edges=("S",))


def _write_inflows(path: Path, inflows: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_row", "node_col", "q_m3s"])
        for (r, c), q in sorted(inflows.items()):
            w.writerow([r, c, repr(float(q))])


def _hydraulics(cfg, manifest, peaks, out: Path) -> None:
    fine = read_asc(cfg.path("hydraulic_dem"))
    landcover = read_asc(cfg.path("landcover"))
    admin = read_asc(cfg.path("admin_ids"))
    resolutions = {}
    for res in cfg.resolutions:
        r = _prepare_resolution(cfg, res, fine, landcover, admin, out)
        resolutions[r.label] = r
    solver_cfg = _solver_config(cfg)
    jobs = []
    for epoch in cfg.epochs:
        for member in cfg.members:
            for level in cfg.quantile_levels:
                q_label = _quantile_label(level)
                for label, r in resolutions.items():
                    key = (epoch, member, q_label, label)
                    if (epoch, member, q_label) not in peaks:
                        manifest.runs.append(_run_row(key, None, "skipped: no inflow peak"))
                        continue
                    q = peaks[(epoch, member, q_label)]
                    inflows = {rc: q * w for rc, w in zip(r.inflow_cells, r.inflow_weights)}
                    d = out / "hydraulics" / label / epoch / f"{member}_{q_label}"
                    _write_inflows(d / "inflows.csv", inflows)
                    jobs.append((key, r.dem, r.geometry, inflows, solver_cfg))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_hydraulic_job, jobs))
    else:
        results = [_hydraulic_job(j) for j in jobs]
    for (key, m, err), job in zip(results, jobs):
        epoch, member, q_label, label = key
        if m is None:
            manifest.runs.append(_run_row(key, None, err, job[3]))
            manifest.failures.append({"stage": "hydraulics", "epoch": epoch, "climate": member,
                                      "hydrology": q_label, "hydraulic": label, "error": err})
            continue
        d = out / "hydraulics" / label / epoch / f"{member}_{q_label}"
        r = resolutions[label]
        write_asc(m.depth_raster(r.dem), d / "depth.asc")
        write_asc(m.wet_raster(r.dem), d / "wet.asc")
        m.log.write(d / "run_log.csv")
        status = "ok" if m.converged else "ok (not converged)"
        manifest.runs.append(_run_row(key, m, status, job[3]))
        for u in r.units:
            manifest.risk.append({
                "epoch": epoch, "climate": member, "hydrology": q_label, "hydraulic": label,
                "unit_id": u.unit_id, "class": u.kind,
                "hazard_pct": hazard_percent(m, u),
                "exposure_pct": exposure_percent(m, u, r.population[u.unit_id])})


def _run_row(key, m, status, inflows=None) -> dict:
    epoch, member, q_label, label = key
    row = {"epoch": epoch, "climate": member, "hydrology": q_label, "hydraulic": label,
           "peak_m3s": float(sum(inflows.values())) if inflows else None,
           "status": "ok" if status and status.startswith("ok") else "failed", "note": status}
    if m is not None:
        row.update(area_km2=m.area_km2, converged=m.converged, steps=m.steps,
                   sim_time_s=m.sim_time, mass_balance_error=m.mass_balance_error)
    return row


def run_pipeline(config: PipelineConfig) -> RunManifest:
    """Run every scenario combination and write outputs plus ``manifest.json``.

    Stage failures are recorded per combination and the remaining
    combinations still run; the manifest's ``status`` is then 2.
    """
    config.validate()

    out = config.output_path
    out.mkdir(parents=True, exist_ok=True)
    levels = config.quantile_levels
    manifest = RunManifest(
        config_hash=config_hash(config), seed=config.seed, epochs=dict(config.epochs),
        labels={"climate": list(config.members),
                "hydrology": [_quantile_label(q) for q in levels],
                "hydraulic": [f"{r}m" for r in config.resolutions]},
        quantile_levels=list(levels),
        inputs={getattr(config, k): _sha256(config.path(k)) for k in (
            "basin_dem", "gages", "hydraulic_dem", "landcover", "admin_ids", "admin_attributes")},
        config=config.hashable(),
    )
    log.info("hydrology: %d member(s)", len(config.members))
    peaks = _hydrology(config, manifest)
    log.info("hydraulics: %d peak(s)", len(peaks))
    _hydraulics(config, manifest, peaks, out)
    emit_reports(manifest, out)
    manifest.outputs = sorted(p.relative_to(out).as_posix() for p in out.rglob("*")
                              if p.is_file() and p.name != MANIFEST_NAME)
    manifest.write(out)
    return manifest
