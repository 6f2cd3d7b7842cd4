import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from floodproj.extremes import (
    ExceedanceSet,
    GPDParams,
    MCMCConfig,
    MCMCError,
    PriorSpec,
    default_priors,
    ensemble_return_levels,
    fit_mcmc,
    log_likelihood,
    log_posterior,
    member_seeds,
    pot_threshold,
    return_level,
    select_exceedances,
    write_draws_csv,
    write_return_level_summary,
)
from floodproj.series import DailySeries


def synthetic_events(rate, scale, shape, n_years, seed, threshold=10.0):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rate, n_years)
    year = np.repeat(np.arange(n_years), counts)
    x = threshold + stats.genpareto.rvs(shape, scale=scale, size=year.size, random_state=rng)
    frac = rng.uniform(0, 1, year.size)
    return ExceedanceSet.from_events(threshold, n_years, year, x, frac)


def flow_series(n_years=10, seed=0, shift=0.0, name=""):
    rng = np.random.default_rng(seed)
    n = 365 * n_years
    base = 20 + 10 * np.sin(2 * np.pi * np.arange(n) / 365.25)
    v = base + rng.gamma(1.2, 8.0, n) + shift
    return DailySeries.from_values(v, start="2001-01-01", name=name)


# -- threshold and declustering ------------------------------------------------

def test_threshold_order_statistics():
    v = np.arange(1, 101, dtype=float)
    thr = pot_threshold(v, 95)
    assert thr == pytest.approx(95.05, abs=1e-12)
    assert list(v[v > thr]) == [96, 97, 98, 99, 100]


def test_select_keeps_every_day_without_declustering():
    # 1..365 over one year: 95th percentile 346.8, days 347..365 exceed
    s = DailySeries.from_values(np.arange(1, 366, dtype=float), start="2001-01-01")
    ex = select_exceedances(s, 95, min_separation_days=1)
    assert ex.threshold == pytest.approx(346.8)
    np.testing.assert_array_equal(ex.event_x, np.arange(347, 366))
    assert ex.year_counts.tolist() == [19]
    clustered = select_exceedances(s, 95, min_separation_days=3)
    np.testing.assert_array_equal(clustered.event_x, [365.0])


def test_select_errors():
    with pytest.raises(ValueError, match="constant"):
        select_exceedances(DailySeries.from_values(np.full(400, 3.0)))
    with pytest.raises(ValueError, match="short"):
        select_exceedances(DailySeries.from_values(np.arange(1.0, 101.0)))
    with pytest.raises(ValueError):
        pot_threshold([2.0, 2.0, 2.0])


def test_declustering_keeps_larger():
    v = np.zeros(400)
    v[100], v[101] = 50.0, 60.0
    v[200] = 40.0
    ex = select_exceedances(DailySeries.from_values(v), threshold=10.0, min_separation_days=3)
    np.testing.assert_array_equal(ex.event_x, [60.0, 40.0])
    ex1 = select_exceedances(DailySeries.from_values(v), threshold=10.0, min_separation_days=1)
    assert ex1.n_events == 3


def test_covariate_spans_window():
    s = flow_series(3)
    ex = select_exceedances(s)
    assert np.all((ex.event_t >= 0) & (ex.event_t <= 1))
    assert ex.covariate(s.dates[0]) == 0.0 and ex.covariate(s.dates[-1]) == 1.0
    assert np.all(ex.event_x > ex.threshold)


@given(st.lists(st.integers(0, 9), min_size=1, max_size=20))
def test_appending_low_values_is_invariant(extra_days):
    s = flow_series(2, seed=3)
    base = select_exceedances(s, threshold=60.0)
    tail = np.full(365, 0.0)
    tail[np.asarray(extra_days) * 30] = 59.0
    longer = DailySeries.from_values(np.concatenate([s.values, tail]), start="2001-01-01")
    ext = select_exceedances(longer, threshold=60.0)
    np.testing.assert_array_equal(base.event_x, ext.event_x)
    np.testing.assert_array_equal(base.event_dates, ext.event_dates)


# -- likelihood ----------------------------------------------------------------

def test_gpd_log_density_term():
    data = ExceedanceSet.from_events(100.0, 1, [0], [101.0])
    gpd, _ = log_likelihood(GPDParams.stationary(1.0, 1.0, 0.5), data)
    assert gpd == pytest.approx(-3 * math.log(1.5), abs=1e-12)
    assert gpd == pytest.approx(-1.21640, abs=1e-5)
    # independent oracle
    assert gpd == pytest.approx(stats.genpareto.logpdf(1.0, 0.5, scale=1.0), abs=1e-12)


def test_outside_support_is_minus_inf():
    # 1 + xi*y/sigma = 1 - 0.6*2 = -0.2
    data = ExceedanceSet.from_events(0.0, 1, [0], [2.0])
    assert log_posterior(GPDParams.stationary(1.0, 1.0, -0.6), data) == -math.inf
    assert log_posterior(GPDParams(-1.0), data) == -math.inf


def test_poisson_term():
    data = ExceedanceSet.from_events(0.0, 1, [0, 0], [1.0, 2.0])
    _, pois = log_likelihood(GPDParams.stationary(2.0, 1.0, 0.1), data)
    assert pois == pytest.approx(2 * math.log(2) - 2 - math.log(2), abs=1e-12)
    assert pois == pytest.approx(-1.30685, abs=1e-5)


def test_likelihood_matches_scipy():
    data = synthetic_events(4.0, 2.0, 0.2, 15, seed=1)
    p = GPDParams.stationary(4.0, 2.0, 0.2)
    gpd, pois = log_likelihood(p, data)
    assert gpd == pytest.approx(stats.genpareto.logpdf(data.excesses, 0.2, scale=2.0).sum(), rel=1e-10)
    assert pois == pytest.approx(stats.poisson.logpmf(data.year_counts, 4.0).sum(), rel=1e-10)


@given(st.randoms(use_true_random=False))
def test_posterior_invariant_to_event_order(rnd):
    data = synthetic_events(3.0, 1.0, 0.1, 10, seed=2)
    perm = list(range(data.n_events))
    rnd.shuffle(perm)
    shuffled = ExceedanceSet(data.threshold, data.event_t[perm], data.event_x[perm],
                             data.year_t, data.year_counts, data.year_exposure)
    p = GPDParams(3.0, 0.5, 0.1, -0.2, 0.1, 0.05)
    pri = default_priors(data)
    assert log_posterior(p, shuffled, pri) == pytest.approx(log_posterior(p, data, pri), rel=1e-12)


# -- return level ---------------------------------------------------------------

def test_return_level_closed_form():
    p = GPDParams.stationary(5.0, 20.0, 0.2)
    assert return_level(p, 100.0, 100, 0.0) == pytest.approx(100 + 100 * (500 ** 0.2 - 1), rel=1e-12)
    assert return_level(p, 100.0, 100, 0.0) == pytest.approx(346.57, abs=0.01)
    g = GPDParams.stationary(5.0, 20.0, 1e-12)
    assert return_level(g, 100.0, 100, 0.0) == pytest.approx(224.29, abs=0.01)


def test_return_level_monte_carlo():
    rng = np.random.default_rng(7)
    n_years, lam, sig, xi, T = 200_000, 5.0, 20.0, 0.2, 100
    counts = rng.poisson(lam, n_years)
    marks = 100 + stats.genpareto.rvs(xi, scale=sig, size=counts.sum(), random_state=rng)
    owner = np.repeat(np.arange(n_years), counts)
    annual_max = np.full(n_years, 100.0)
    np.maximum.at(annual_max, owner, marks)
    oracle = np.quantile(annual_max, 1 - 1 / T)
    z = return_level(GPDParams.stationary(lam, sig, xi), 100.0, T, 0.0)
    assert abs(z / oracle - 1) < 0.05


@pytest.mark.parametrize("xi", [1e-9, -1e-9])
def test_continuity_at_zero_shape(xi):
    zero = return_level(GPDParams.stationary(5.0, 20.0, 0.0), 100.0, 100, 0.0)
    near = return_level(GPDParams.stationary(5.0, 20.0, xi), 100.0, 100, 0.0)
    assert abs(near / zero - 1) < 1e-6


def test_return_level_below_threshold_warns():
    with pytest.warns(RuntimeWarning):
        z = return_level(GPDParams.stationary(0.005, 1.0, 0.1), 50.0, 100, 0.0)
    assert z == 50.0


def test_return_level_nonstationary_uses_t_eval():
    p = GPDParams(2.0, 2.0, 0.0, math.log(2.0), 0.1, 0.0)
    z1 = return_level(p, 0.0, 100, 1.0)
    assert z1 == pytest.approx(2.0 / 0.1 * ((4.0 * 100) ** 0.1 - 1), rel=1e-12)


@given(st.floats(1.1, 1e3), st.floats(1.01, 10), st.floats(0.1, 50), st.floats(-0.4, 0.8),
       st.floats(1.01, 5))
def test_return_level_increasing(T, factor, sigma, xi, sfac):
    p = GPDParams.stationary(1.0, sigma, xi)
    z = return_level(p, 0.0, T, 0.0)
    assert return_level(p, 0.0, T * factor, 0.0) > z
    assert return_level(GPDParams.stationary(1.0, sigma * sfac, xi), 0.0, T, 0.0) > z


def test_return_level_draw_matrix():
    draws = np.array([GPDParams.stationary(5.0, 20.0, s).as_array() for s in (0.0, 0.1, 0.2)])
    z = return_level(draws, 100.0, 100, 0.0)
    assert z.shape == (3,) and np.all(np.diff(z) > 0)


# -- sampler ---------------------------------------------------------------------

def test_mcmc_deterministic_and_recovers_truth():
    data = synthetic_events(5.0, 1.0, 0.1, 60, seed=11)
    cfg = MCMCConfig(iterations=6000, burn_in=2000, seed=5)
    a = fit_mcmc(data, config=cfg)
    b = fit_mcmc(data, config=cfg)
    np.testing.assert_array_equal(a.draws, b.draws)
    assert a.draws.shape == (4000, 6)
    assert 0.05 < a.acceptance_rate < 0.8
    truth = GPDParams.stationary(5.0, 1.0, 0.1).as_array()
    # check the stationary summaries at mid-window
    mean, sd = a.mean(), a.sd()
    lam_mid = a.draws[:, 0] + 0.5 * a.draws[:, 1]
    assert abs(lam_mid.mean() - 5.0) < 3 * lam_mid.std()
    assert abs(mean[4] + 0.5 * mean[5] - truth[4]) < 3 * np.std(a.draws[:, 4] + 0.5 * a.draws[:, 5])
    assert np.all(sd > 0)


def test_point_mass_prior_pins_draws():
    data = synthetic_events(5.0, 1.0, 0.1, 20, seed=4)
    truth = GPDParams(5.0, 0.0, 0.0, 0.0, 0.1, 0.0)
    s = fit_mcmc(data, PriorSpec.point_mass(truth), MCMCConfig(iterations=300, burn_in=100))
    assert np.all(s.draws == truth.as_array())


def test_few_events_needs_flag():
    data = synthetic_events(1.0, 1.0, 0.1, 5, seed=0)
    assert data.n_events < 20
    with pytest.raises(MCMCError):
        fit_mcmc(data, config=MCMCConfig(iterations=200, burn_in=50))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = fit_mcmc(data, config=MCMCConfig(iterations=200, burn_in=50, allow_few_events=True))
    assert s.few_events


def test_draws_csv(tmp_path):
    data = synthetic_events(5.0, 1.0, 0.1, 20, seed=4)
    s = fit_mcmc(data, config=MCMCConfig(iterations=200, burn_in=100))
    lines = write_draws_csv(s, tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "draw,lam0,lam1,sig0,sig1,xi0,xi1"
    assert len(lines) == 101


# -- ensembles -------------------------------------------------------------------

FAST = MCMCConfig(iterations=2000, burn_in=500, seed=9)


def test_member_seeds_stable():
    assert member_seeds(3, 4) == member_seeds(3, 4)
    assert member_seeds(3, 4)[:2] == member_seeds(3, 2)
    assert len(set(member_seeds(3, 10))) == 10


def test_single_member_and_identical_members(tmp_path):
    one = ensemble_return_levels([flow_series(name="a")], 2005, config=FAST)
    assert one.mean == one.min == one.max
    twin = MCMCConfig(iterations=2000, burn_in=500, seed=9)
    s = flow_series(name="a")
    pair = ensemble_return_levels([s, s], 2005, config=twin)
    # identical series: the same data, so any spread is sampler noise only
    assert pair.max - pair.min < 0.05 * pair.mean
    text = write_return_level_summary(pair, tmp_path / "rl.csv").read_text().splitlines()
    assert text[0].startswith("member,mean,q05,q95,min,max")


def test_shifted_members_are_ordered():
    shifts = np.arange(13) * 15.0
    members = [flow_series(seed=1, shift=s, name=f"m{i:02d}") for i, s in enumerate(shifts)]
    res = ensemble_return_levels(members, 2005, config=FAST)
    assert not res.partial
    assert np.all(np.diff(res.values) > 0)
    assert res.min == res.values[0] and res.max == res.values[-1]


def test_failed_member_is_flagged():
    bad = DailySeries.from_values(np.full(400, 1.0), name="flat")
    res = ensemble_return_levels([flow_series(name="ok"), bad], 2005, config=FAST)
    assert res.partial and "flat" in res.failures and len(res.members) == 1
