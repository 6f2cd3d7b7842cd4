"""One test per acceptance criterion, each at its stated tolerance.

Every test appends a PASS/FAIL line (with runtime) to ``RESULTS``; the
conftest prints them at the end of the session.
"""

import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from floodproj.extremes import (
    ExceedanceSet,
    GPDParams,
    MCMCConfig,
    fit_mcmc,
    return_level,
)
from floodproj.hydraulics import (
    FlowState,
    HydraulicGeometry,
    SolverConfig,
    estimate_bathymetry,
    normal_depth,
    run_to_steady,
    step_local_inertial,
)
from floodproj.hydromodel import ChannelNetwork, d8_from_dem, modified_correlation, nse
from floodproj.pipeline import load_config, run_pipeline, with_overrides
from floodproj.pipeline.synthetic import valley_dem, write_synthetic_inputs
from floodproj.raster import Raster
from floodproj.regionalize import GagePeak, fit_scaling, peak_ratio, predict_peak
from floodproj.riskmetrics import (
    AdminUnit,
    disaggregate_population,
    exposure_percent,
    hazard_percent,
    pearson,
    spearman_rank,
)
from floodproj.uncertainty import ProjectionTensor, decompose, read_tensor_csv

RESULTS: list[str] = []


class Criterion:
    """Collects named checks, records one summary line, then asserts."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.failed = []
        self.start = time.perf_counter()

    def check(self, ok, what):
        if not ok:
            self.failed.append(what)

    def finish(self, limit_s=None):
        elapsed = time.perf_counter() - self.start
        if limit_s is not None:
            self.check(elapsed < limit_s, f"runtime {elapsed:.1f}s >= {limit_s}s")
        status = "PASS" if not self.failed else "FAIL"
        detail = "" if not self.failed else " | " + "; ".join(self.failed)
        RESULTS.append(f"{status} criterion {self.number} ({self.title}) in {elapsed:.2f}s{detail}")
        print(RESULTS[-1])
        assert not self.failed, self.failed


def close(a, b, tol):
    return abs(a - b) <= tol


# -- 1 ----------------------------------------------------------------------------

def test_criterion_1_stage_shares_anchor():
    c = Criterion(1, "engineered tensor stage shares")
    vals = np.zeros((2, 2, 2))
    vals[1] += 0.23
    vals[:, 1] += 0.10
    vals[:, :, 1] += 0.04
    rep = decompose(ProjectionTensor.from_array(vals, ("climate", "hydrology", "hydraulic")), "range")
    for got, want in zip(rep.cumulative, (0.23, 0.33, 0.37)):
        c.check(close(got, want, 1e-12), f"cumulative {got} != {want}")
    for got, want in zip(rep.stage, (0.23, 0.10, 0.04)):
        c.check(close(got, want, 1e-12), f"stage {got} != {want}")
    for got, want in zip(rep.stage_fraction, (62.2, 27.0, 10.8)):
        c.check(close(got, want, 0.5), f"share {got:.2f}% not within 0.5 of {want}%")
    c.check(rep.stage_fraction[0] > 60 and rep.stage_fraction[1] > 25, "share ordering")
    c.finish(limit_s=1.0)


# -- 2 ----------------------------------------------------------------------------

def test_criterion_2_telescoping_random_tensors():
    c = Criterion(2, "telescoping identity on random tensors")
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(100):
        shape = tuple(rng.integers(1, 6, 3))
        vals = rng.normal(0.0, rng.uniform(0.01, 100.0), shape) + rng.uniform(-50, 50)
        t = ProjectionTensor.from_array(vals)
        for measure in ("range", "std"):
            rep = decompose(t, measure)
            err = abs(math.fsum(rep.stage) - rep.total) / max(abs(rep.total), 1e-300)
            if rep.total == 0:
                err = abs(math.fsum(rep.stage))
            worst = max(worst, err)
            c.check(err <= 1e-12, f"tensor {i} {measure}: telescoping error {err:.2e}")
            c.check(bool(np.all(np.diff(rep.cumulative) >= 0)),
                    f"tensor {i} {measure}: cumulative decreases {rep.cumulative}")
    c.finish(limit_s=5.0)


# -- 3 ----------------------------------------------------------------------------

def test_criterion_3_peak_ratio_anchor():
    c = Criterion(3, "peak-ratio law and power-law recovery")
    areas = np.geomspace(10.0, 1e4, 15)
    base = fit_scaling([GagePeak(f"g{i}", a, 2.0 * a ** 0.65, "base") for i, a in enumerate(areas)])
    fut = fit_scaling([GagePeak(f"g{i}", a, 3.0 * a ** (0.65 - 0.0196), "future")
                       for i, a in enumerate(areas)])
    ratio = peak_ratio(fut, base)
    c.check(str(ratio) == "1.50A^{-0.0196}", f"ratio law printed as {ratio}")
    c.check(close(ratio.beta_ratio, 1.5, 1e-10), f"beta ratio {ratio.beta_ratio}")
    c.check(close(ratio.alpha_diff, -0.0196, 1e-10), f"alpha diff {ratio.alpha_diff}")
    exact = fit_scaling([GagePeak(str(i), a, 2.7 * a ** 0.62) for i, a in enumerate(np.geomspace(1, 1e5, 20))])
    c.check(abs(exact.beta / 2.7 - 1) <= 1e-10, f"beta {exact.beta}")
    c.check(abs(exact.alpha - 0.62) <= 1e-10, f"alpha {exact.alpha}")
    pred = predict_peak(exact, areas)
    c.check(bool(np.all(np.abs(pred / (2.7 * areas ** 0.62) - 1) <= 1e-10)), "prediction mismatch")
    c.finish()


# -- 4 ----------------------------------------------------------------------------

def test_criterion_4_gpd_machinery():
    c = Criterion(4, "Poisson-GPD inference and return levels")
    lam, sig, xi, n_years = 5.0, 1.0, 0.1, 80
    rng = np.random.default_rng(80)
    counts = rng.poisson(lam, n_years)
    year = np.repeat(np.arange(n_years), counts)
    marks = 10.0 + stats.genpareto.rvs(xi, scale=sig, size=year.size, random_state=rng)
    data = ExceedanceSet.from_events(10.0, n_years, year, marks, rng.uniform(0, 1, year.size))
    sample = fit_mcmc(data, config=MCMCConfig(seed=7))
    truth = GPDParams.stationary(lam, sig, xi).as_array()
    mean, sd = sample.mean(), sample.sd()
    for name, m, s, t in zip(sample.names, mean, sd, truth):
        c.check(abs(m - t) <= 3 * s, f"{name}: mean {m:.4f} vs truth {t} (sd {s:.4f})")

    # closed form against a brute-force annual-maximum quantile over 10^6 years
    T = 100.0
    mc = np.random.default_rng(1_000_000)
    n_mc = 1_000_000
    k = mc.poisson(lam, n_mc)
    x = stats.genpareto.rvs(xi, scale=sig, size=int(k.sum()), random_state=mc)
    owner = np.repeat(np.arange(n_mc), k)
    annual_max = np.zeros(n_mc)
    np.maximum.at(annual_max, owner, x)
    oracle = np.quantile(annual_max, 1 - 1 / T)
    z = return_level(GPDParams.stationary(lam, sig, xi), 0.0, T, 0.5)
    c.check(abs(z / oracle - 1) <= 0.05, f"return level {z:.4f} vs oracle {oracle:.4f}")

    z0 = return_level(GPDParams.stationary(lam, sig, 0.0), 0.0, T, 0.5)
    for eps in (1e-9, -1e-9):
        ze = return_level(GPDParams.stationary(lam, sig, eps), 0.0, T, 0.5)
        c.check(abs(ze / z0 - 1) <= 1e-6, f"continuity at xi={eps}: {ze} vs {z0}")
    c.finish(limit_s=120.0)


# -- 5 ----------------------------------------------------------------------------

def test_criterion_5_hydraulic_solver():
    c = Criterion(5, "local-inertial solver properties")
    converged_runs = []

    # lake at rest over 10^4 steps, with dry islands
    rng = np.random.default_rng(5)
    dem = Raster.from_array(rng.uniform(0.0, 2.0, (16, 16)), cellsize=10.0)
    rest = FlowState.at_rest(np.maximum(1.4 - dem.data, 0.0))
    closed = SolverConfig(open_edges=())
    st = rest
    for _ in range(10_000):
        st = step_local_inertial(st, dem, None, closed)
    drift = float(np.max(np.abs(st.h - rest.h)))
    c.check(drift <= 1e-12, f"lake at rest drift {drift:.2e}")

    # closed-domain volume over 10^4 steps of a spreading column
    h0 = np.zeros(dem.shape)
    h0[3:7, 3:7] = 2.0
    st = FlowState.at_rest(h0)
    v0 = math.fsum(h0.ravel())
    for _ in range(10_000):
        st = step_local_inertial(st, dem, None, closed)
    rel = abs(math.fsum(st.h.ravel()) - v0) / v0
    c.check(rel <= 1e-9, f"closed-domain volume error {rel:.2e}")
    c.check(float(st.h.min()) >= 0.0, "negative depth")

    # plane slope against Manning normal depth
    nrows, ncols, dx, S = 40, 3, 10.0, 0.001
    zp = 10.0 + S * dx * (nrows - 1 - np.arange(nrows))[:, None] * np.ones(ncols)
    cfg = SolverConfig(manning=0.045, open_edges=("S",), boundary_slope=S, window_steps=500,
                       tolerance=1e-5, max_time=4 * 3600.0)
    res = run_to_steady(Raster.from_array(zp, cellsize=dx), None,
                        {(0, j): 1.0 * dx for j in range(ncols)}, cfg)
    hn = normal_depth(1.0, 0.045, S)
    mid = float(res.depth[10:30].mean())
    c.check(res.converged, "plane run did not converge")
    c.check(abs(mid / hn - 1) <= 0.02, f"plane depth {mid:.4f} vs normal depth {hn:.4f}")
    converged_runs.append(res)

    # mirror symmetry, asymmetric terrain and inflow position
    vd = valley_dem(40, 21, cellsize=10.0, seed=3)
    vd = Raster.from_array(vd.data + np.random.default_rng(9).uniform(0, 0.2, vd.shape), cellsize=10.0)
    mcfg = SolverConfig(open_edges=("S",), window_steps=300, max_time=3600.0)
    a = run_to_steady(vd, None, {(0, 7): 6.0}, mcfg)
    b = run_to_steady(vd.mirrored_lr(), None, {(0, 13): 6.0}, mcfg)
    c.check(np.array_equal(a.depth[:, ::-1], b.depth), "mirrored run differs")
    converged_runs += [r for r in (a, b) if r.converged]

    # 200 x 200 channelised valley to steady state
    t0 = time.perf_counter()
    big = valley_dem(200, 200, cellsize=10.0, seed=0)
    net = ChannelNetwork.from_d8(d8_from_dem(big.data, 10.0), 10.0,
                                 extra_area_km2=np.where(np.arange(200 * 200) == 100, 500.0, 0.0))
    geo = estimate_bathymetry(net, big.data, HydraulicGeometry(), min_area_km2=500.0,
                              max_width_ratio=1.0)
    inflow = {(0, j): w for j, w in enumerate(geo.width[0]) if w > 0}
    total_w = sum(inflow.values())
    inflow = {k: 150.0 * w / total_w for k, w in inflow.items()}
    large = run_to_steady(big, geo, inflow, SolverConfig(open_edges=("S",)))
    t_big = time.perf_counter() - t0
    c.check(large.converged, "200x200 run did not converge")
    c.check(t_big < 60.0, f"200x200 steady run took {t_big:.1f}s")
    if large.converged:
        converged_runs.append(large)

    for r in converged_runs:
        c.check(abs(r.mass_balance_error) <= 1e-3, f"mass balance error {r.mass_balance_error:.2e}")
    c.finish()


# -- 6 ----------------------------------------------------------------------------

def test_criterion_6_metric_examples():
    c = Criterion(6, "hand-computed metric examples")
    tol = 1e-12
    obs = np.array([1.0, 2.0, 3.0])
    c.check(nse(obs, obs) == 1.0, "nse identical")
    c.check(close(nse(obs, np.full(3, 2.0)), 0.0, tol), "nse climatology")
    c.check(close(nse(obs, [1.0, 2.0, 4.0]), 0.5, tol), "nse 0.5")
    x = np.array([1.0, 4.0, 2.0, 8.0])
    c.check(close(modified_correlation(x, x), 1.0, tol), "R_m identical")
    c.check(close(modified_correlation(x, -x), -1.0, tol), "R_m negated")
    c.check(close(modified_correlation(x, 2 * x), 0.5, tol), "R_m doubled")

    unit = AdminUnit("u", "borough", np.ones((10, 10), bool), 1000.0, 1e-4)
    wet = np.zeros((10, 10), bool)
    wet.ravel()[:25] = True
    c.check(hazard_percent(wet, unit) == 25.0, "hazard 25%")
    c.check(hazard_percent(np.zeros((10, 10), bool), unit) == 0.0, "hazard 0%")
    checker = (np.add.outer(np.arange(10), np.arange(10)) % 2) == 0
    c.check(hazard_percent(checker, unit) == 50.0, "hazard checkerboard")

    pair = AdminUnit("p", "city", np.ones((1, 2), bool), 1000.0, 1e-4)
    pop = disaggregate_population(pair, np.array([[1, 2]]), {1: 1.0, 2: 3.0})
    c.check(pop.tolist() == [[250.0, 750.0]], f"disaggregation {pop.tolist()}")
    c.check(exposure_percent(np.array([[False, True]]), pair, pop) == 75.0, "exposure 75%")
    c.check(exposure_percent(np.array([[True, False]]), pair, np.array([[0.0, 5.0]])) == 0.0,
            "exposure 0%")
    c.check(exposure_percent(checker, unit, np.full((10, 10), 10.0)) == 50.0, "exposure 50%")

    c.check(close(pearson([1, 2, 3, 4], [1, 2, 3, 4]), 1.0, tol), "pearson identical")
    c.check(close(spearman_rank([1, 2, 3, 4], [1, 2, 3, 4]), 1.0, tol), "spearman identical")
    c.check(close(spearman_rank([1, 2, 3, 4], np.exp([1, 2, 3, 4])), 1.0, tol), "spearman monotone")
    c.check(close(spearman_rank([1, 2, 3, 4], [2, 1, 4, 3]), 0.6, tol), "spearman 0.6")

    rng = np.random.default_rng(6)
    for i in range(200):
        shape = (int(rng.integers(1, 12)), int(rng.integers(1, 12)))
        mask = rng.random(shape) < 0.7
        mask.ravel()[0] = True
        total = float(rng.choice([rng.integers(0, 10**6), rng.uniform(0, 1e6)]))
        u = AdminUnit(str(i), "borough", mask, total, 1e-4)
        lc = rng.integers(0, 5, shape)
        c.check(math.fsum(disaggregate_population(u, lc).ravel()) == total, f"float total {i}")
        if float(total).is_integer():
            p = disaggregate_population(u, lc, integerize=True)
            c.check(p.sum() == total and np.all(p == np.round(p)), f"integer total {i}")
    c.finish()


# -- 7 ----------------------------------------------------------------------------

def _files(root: Path):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


@pytest.mark.slow
def test_criterion_7_end_to_end(tmp_path):
    c = Criterion(7, "synthetic 2x2x2 pipeline, deterministic")
    ini = write_synthetic_inputs(tmp_path / "study", seed=42)
    cfg = load_config(ini)
    c.check((len(cfg.members), cfg.quantiles, len(cfg.resolutions)) == (2, 2, 2), "grid is not 2x2x2")

    t0 = time.perf_counter()
    first = run_pipeline(with_overrides(cfg, output_dir=str(tmp_path / "run1")))
    t_first = time.perf_counter() - t0
    t0 = time.perf_counter()
    second = run_pipeline(with_overrides(cfg, output_dir=str(tmp_path / "run2")))
    t_second = time.perf_counter() - t0
    c.check(t_first < 300 and t_second < 300, f"runtimes {t_first:.0f}s / {t_second:.0f}s")

    c.check(first.status == 0, f"status {first.status}, failures {first.failures}")
    c.check(first.digest() == second.digest(), "manifest digests differ")
    a, b = tmp_path / "run1", tmp_path / "run2"
    c.check(_files(a) == _files(b), "output file lists differ")
    diff = [str(p) for p in _files(a) if not filecmp.cmp(a / p, b / p, shallow=False)]
    c.check(not diff, f"files differ: {diff[:5]}")

    for epoch in cfg.epochs:
        tensor = read_tensor_csv(a / "reports" / f"tensor_{epoch}.csv")
        c.check(tensor.values.shape == (2, 2, 2), f"{epoch}: tensor shape {tensor.values.shape}")
        for measure in ("range", "std"):
            rep = decompose(tensor, measure)
            c.check(abs(math.fsum(rep.stage) - rep.total) <= 1e-12 * max(rep.total, 1.0),
                    f"{epoch} {measure}: telescoping")
        text = (a / "reports" / f"decomposition_{epoch}.txt").read_text()
        c.check("telescoping check" in text, f"{epoch}: report footer missing")
        # tensor entries are the extents of the individual hydraulic runs
        runs = {(r["climate"], r["hydrology"], r["hydraulic"]): r["area_km2"]
                for r in first.runs if r["epoch"] == epoch}
        for idx in np.ndindex(tensor.values.shape):
            key = tuple(tensor.labels[k][i] for k, i in enumerate(idx))
            c.check(runs.get(key) == tensor.values[idx], f"{epoch} {key}: tensor/run mismatch")
    for r in first.runs:
        if r["converged"]:
            c.check(abs(r["mass_balance_error"]) <= 1e-3, f"mass balance {r['mass_balance_error']}")
    c.finish()
