"""Command-line entry point: ``floodproj <subcommand> ...``.

Each subcommand runs one stage on files written by the previous stage (or
by hand); ``pipeline`` runs the whole chain from an INI file.

Exit codes: 0 success, 2 partial (some runs or members failed), 1 invalid
configuration or arguments.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which we reserve for partial runs
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _kv_floats(items) -> dict[str, float]:
    out = {}
    for it in items or ():
        key, _, val = it.partition("=")
        if not _:
            raise ValueError(f"expected name=value, got {it!r}")
        out[key.strip()] = float(val)
    return out


def _read_gages(path) -> dict[str, tuple[int, int]]:
    with Path(path).open(newline="") as fh:
        return {r["gage_id"]: (int(r["row"]), int(r["col"])) for r in csv.DictReader(fh)}


# -- subcommands ----------------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .hydromodel import (
        CellParams, ChannelNetwork, MultiplierVector, SLSConfig, calibrate_model, d8_from_dem,
        read_forcing_dir, simulate_runoff, write_calibration_report,
    )
    from .raster import read_asc
    from .series import read_series_csv, write_series_csv

    dem = read_asc(args.dem)
    forcing = read_forcing_dir(args.forcing)
    net = ChannelNetwork.from_d8(d8_from_dem(dem.masked(), dem.cellsize), dem.cellsize,
                                 active=dem.valid_mask())
    gages = _read_gages(args.gages) if args.gages else None
    params = CellParams.uniform(dem.shape)
    factors = MultiplierVector.ones()
    for name, val in _kv_floats(args.factor).items():
        factors = factors.with_factor(name, val)
    out = Path(args.out)
    if args.observed:
        obs = {p.stem: read_series_csv(p, p.stem) for p in sorted(Path(args.observed).glob("*.csv"))}
        if gages is None:
            raise ValueError("--observed needs --gages")
        obs = {k: v for k, v in obs.items() if k in gages}
        res = calibrate_model(forcing, params, net, gages, obs, factors, SLSConfig(),
                              spinup_days=args.spinup_days)
        factors = res.factors
        print(f"calibration: OF {res.seed_objective:.6g} -> {res.objective:.6g} "
              f"({res.evaluations} evaluations)")
    sim = simulate_runoff(forcing, params, factors, net, gages, substeps=args.substeps)
    for name, series in sim.flows.items():
        write_series_csv(series, out / f"{name}.csv")
    if args.observed:
        write_calibration_report(factors, obs, sim.flows, out / "calibration.csv")
    b = sim.budget
    print(f"water balance: P={b.precipitation:.6g} m3 E={b.evaporation:.6g} m3 "
          f"Q={b.outflow:.6g} m3 dS={b.storage_change:.6g} m3 rel.err={b.relative_error:.2e}")
    return EXIT_OK


def cmd_extremes(args) -> int:
    from .extremes import MCMCConfig, ensemble_return_levels, write_draws_csv, write_return_level_summary
    from .series import read_series_csv

    members = [read_series_csv(p, Path(p).stem) for p in args.series]
    cfg = MCMCConfig(iterations=args.iterations, burn_in=args.burn_in, seed=args.seed,
                     allow_few_events=args.allow_few_events)
    res = ensemble_return_levels(members, args.target_year, args.period, cfg,
                                 percentile=args.percentile,
                                 min_separation_days=args.min_separation_days)
    out = Path(args.out)
    for m in res.members:
        write_draws_csv(m.sample, out / f"draws_{m.member}.csv")
    write_return_level_summary(res, out / "return_levels.csv")
    for m in res.members:
        s = m.summary()
        print(f"{m.member}: {args.period:g}-yr level in {args.target_year} mean {s['mean']:.6g} "
              f"[{s['q05']:.6g}, {s['q95']:.6g}]")
    for name, err in res.failures.items():
        print(f"{name}: FAILED {err}", file=sys.stderr)
    return EXIT_PARTIAL if res.partial else EXIT_OK


def cmd_scaling(args) -> int:
    from .regionalize import fit_scaling, peak_ratio, read_gage_peaks, write_scaling_report

    points = read_gage_peaks(args.peaks)
    epochs = sorted({p.epoch for p in points})
    fits = {e: fit_scaling([p for p in points if p.epoch == e], e) for e in epochs}
    write_scaling_report(list(fits.values()), args.out)
    for e, f in fits.items():
        print(f"{e or '(all)'}: Qp = {f.beta:.6g} A^{f.alpha:.4f}  R = {f.r:.4f}  n = {f.n}")
    if args.base and args.future:
        print(f"ratio {args.future}/{args.base}: {peak_ratio(fits[args.future], fits[args.base])}")
    return EXIT_OK


def cmd_inundate(args) -> int:
    from .hydraulics import ChannelGeometry, SolverConfig, read_inflows_csv, run_to_steady
    from .raster import read_asc, write_asc

    dem = read_asc(args.dem)
    geo = None
    if args.channel_width:
        width = read_asc(args.channel_width).data
        bed = read_asc(args.channel_bed).data if args.channel_bed else dem.data
        mask = width > 0
        geo = ChannelGeometry(mask, width, np.where(mask, dem.data - bed, 0.0), bed,
                              np.zeros(dem.shape))
    cfg = SolverConfig(manning=args.manning, cfl=args.cfl, h_dry=args.h_dry,
                       tolerance=args.tolerance, window_steps=args.window_steps,
                       max_time=args.max_time, open_edges=tuple(args.open_edges))
    m = run_to_steady(dem, geo, read_inflows_csv(args.inflows), cfg)
    out = Path(args.out)
    write_asc(m.depth_raster(dem), out / "depth.asc")
    write_asc(m.wet_raster(dem), out / "wet.asc")
    m.log.write(out / "run_log.csv")
    print(f"inundated area {m.area_km2!r} km2, converged={m.converged}, steps={m.steps}, "
          f"mass balance error {m.mass_balance_error:.2e}")
    return EXIT_OK if m.converged else EXIT_PARTIAL


def cmd_risk(args) -> int:
    from .raster import read_asc
    from .riskmetrics import (
        DevClass, RiskRecord, disaggregate_population, exposure_percent, hazard_percent,
        load_admin_units, write_risk_records,
    )

    wet = read_asc(args.wet)
    ids = read_asc(args.admin_ids)
    lc = read_asc(args.landcover)
    if not (wet.geometry.congruent(ids.geometry) and wet.geometry.congruent(lc.geometry)):
        raise ValueError("wet mask, admin ids and landcover must share one grid")
    units = load_admin_units(ids.data, args.admin_csv, wet.geometry.cell_area / 1e6)
    w = args.weights
    weights = {DevClass.OPEN: w[0], DevClass.LOW: w[1], DevClass.MEDIUM: w[2], DevClass.HIGH: w[3]}
    mask = wet.data > 0
    recs = []
    for u in units:
        if u.n_cells == 0:
            continue
        pop = disaggregate_population(u, lc.data.astype(int), weights)
        recs.append(RiskRecord(u.unit_id, hazard_percent(mask, u), exposure_percent(mask, u, pop),
                               args.epoch, u.kind))
    write_risk_records(recs, args.out)
    for r in recs:
        print(f"{r.unit_id} ({r.kind}): hazard {r.hazard:.2f}%  exposure {r.exposure:.2f}%")
    return EXIT_OK


def cmd_uncertainty(args) -> int:
    from .uncertainty import decompose, format_report, read_tensor_csv, write_report_csv

    tensor = read_tensor_csv(args.tensor)
    measures = ("range", "std") if args.measure == "both" else (args.measure,)
    reps = [decompose(tensor, m) for m in measures]
    if args.out:
        write_report_csv(reps, args.out)
    print("\n\n".join(format_report(r, unit=args.unit) for r in reps))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    from .pipeline import load_config, run_pipeline, write_synthetic_inputs

    if args.init_synthetic:
        path = write_synthetic_inputs(args.init_synthetic, seed=args.seed)
        print(f"wrote synthetic inputs and {path}")
        if not args.config:
            return EXIT_OK
    if not args.config:
        raise _ConfigProblem("--config is required")
    cfg = load_config(args.config, seed=args.seed, workers=args.workers, output_dir=args.output_dir)
    manifest = run_pipeline(cfg)
    ok = sum(r["status"] == "ok" for r in manifest.runs)
    print(f"{ok}/{len(manifest.runs)} hydraulic runs succeeded; manifest {manifest.digest()}")
    for f in manifest.failures:
        print(f"FAILED {f}", file=sys.stderr)
    return manifest.status


class _ConfigProblem(ValueError):
    pass


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="floodproj", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run (and optionally calibrate) the runoff model")
    s.add_argument("--dem", required=True, help="basin DEM (.asc)")
    s.add_argument("--forcing", required=True, help="directory of precip_/temp_YYYYMMDD.asc")
    s.add_argument("--gages", help="CSV gage_id,row,col (default: basin outlets)")
    s.add_argument("--factor", action="append", metavar="NAME=VALUE", help="parameter multiplier")
    s.add_argument("--observed", help="directory of <gage_id>.csv observations to calibrate against")
    s.add_argument("--spinup-days", type=int, default=365)
    s.add_argument("--substeps", type=int, default=24)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("extremes", help="fit the time-varying Poisson-GPD model per member")
    s.add_argument("--series", nargs="+", required=True, help="daily discharge CSVs, one per member")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--target-year", type=int, required=True)
    s.add_argument("--period", type=float, default=100.0)
    s.add_argument("--percentile", type=float, default=95.0)
    s.add_argument("--min-separation-days", type=int, default=3)
    s.add_argument("--iterations", type=int, default=100000)
    s.add_argument("--burn-in", type=int, default=25000)
    s.add_argument("--allow-few-events", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extremes)

    s = sub.add_parser("scaling", help="fit peak-flow scaling laws in drainage area")
    s.add_argument("--peaks", required=True, help="CSV gage_id,area_km2,qp_m3s,epoch")
    s.add_argument("--base", help="baseline epoch label for the ratio law")
    s.add_argument("--future", help="future epoch label for the ratio law")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scaling)

    s = sub.add_parser("inundate", help="run the hydraulic model to steady state")
    s.add_argument("--dem", required=True)
    s.add_argument("--inflows", required=True, help="CSV node_row,node_col,q_m3s")
    s.add_argument("--channel-width", help="subgrid channel width raster (0 off-channel)")
    s.add_argument("--channel-bed", help="channel bed elevation raster")
    s.add_argument("--manning", type=float, default=0.045)
    s.add_argument("--cfl", type=float, default=0.7)
    s.add_argument("--h-dry", type=float, default=0.01)
    s.add_argument("--tolerance", type=float, default=1e-3)
    s.add_argument("--window-steps", type=int, default=1000)
    s.add_argument("--max-time", type=float, default=86400.0)
    s.add_argument("--open-edges", default="S", type=lambda t: [c for c in t.upper() if c in "NSWE"],
                   help="letters of the free-outfall edges, e.g. S or NSWE")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_inundate)

    s = sub.add_parser("risk", help="hazard and exposure percentages per unit")
    s.add_argument("--wet", required=True, help="wet mask raster (non-zero = wet)")
    s.add_argument("--admin-ids", required=True)
    s.add_argument("--admin-csv", required=True, help="CSV unit_id,class,name,population")
    s.add_argument("--landcover", required=True)
    s.add_argument("--weights", type=float, nargs=4, default=[0.1, 0.35, 0.65, 1.0],
                   metavar=("OPEN", "LOW", "MEDIUM", "HIGH"))
    s.add_argument("--epoch", default="")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_risk)

    s = sub.add_parser("uncertainty", help="decompose a scenario tensor by stage")
    s.add_argument("--tensor", required=True, help="CSV stage1,...,stageK,value")
    s.add_argument("--measure", choices=("range", "std", "both"), default="both")
    s.add_argument("--unit", default="km2")
    s.add_argument("--out")
    s.set_defaults(func=cmd_uncertainty)

    s = sub.add_parser("pipeline", help="run the full chain from an INI file")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--output-dir")
    s.add_argument("--init-synthetic", metavar="DIR", help="write a synthetic study to DIR first")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    from .pipeline import ConfigError

    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, _ConfigProblem) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
