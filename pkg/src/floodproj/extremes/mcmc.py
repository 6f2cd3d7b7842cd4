"""Component-wise random-walk Metropolis sampler for the Poisson-GPD posterior."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .gpd import (
    PARAM_NAMES,
    PriorSpec,
    _gpd_loglik,
    _log_prior_1,
    _poisson_loglik,
    _year_arrays,
    default_priors,
)
from .pot import ExceedanceSet

__all__ = ["MCMCConfig", "PosteriorSample", "MCMCError", "fit_mcmc", "write_draws_csv"]

MIN_EVENTS = 20


class MCMCError(RuntimeError):
    pass


@dataclass(frozen=True)
class MCMCConfig:
    iterations: int = 100_000
    burn_in: int = 25_000
    seed: int = 0
    proposal_scales: tuple[float, ...] | None = None
    adapt_interval: int = 100
    target_acceptance: tuple[float, float] = (0.2, 0.4)
    allow_few_events: bool = False

    def __post_init__(self):
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")


@dataclass
class PosteriorSample:
    draws: np.ndarray
    iterations: int
    burn_in: int
    seed: int
    acceptance: np.ndarray  # per component, after burn-in
    proposal_scales: np.ndarray
    threshold: float
    n_events: int
    few_events: bool = False
    names: tuple[str, ...] = field(default=PARAM_NAMES)

    @property
    def acceptance_rate(self) -> float:
        free = self.proposal_scales > 0
        return float(self.acceptance[free].mean()) if free.any() else 1.0

    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    def sd(self) -> np.ndarray:
        return self.draws.std(axis=0, ddof=1) if len(self.draws) > 1 else np.zeros(6)


@njit(cache=True)
def _chain(init, scales, prior_mean, prior_sd, ev_t, ev_y, yr_t, yr_n, yr_dt, yr_lgam,
           normals, log_u, burn_in, adapt_interval, acc_lo, acc_hi):
    n_iter = normals.shape[0]
    cur = init.copy()
    gpd = _gpd_loglik(cur[2], cur[3], cur[4], cur[5], ev_t, ev_y)
    pois = _poisson_loglik(cur[0], cur[1], yr_t, yr_n, yr_dt, yr_lgam)
    draws = np.empty((n_iter - burn_in, 6))
    acc_window = np.zeros(6)
    acc_after = np.zeros(6)
    for it in range(n_iter):
        for j in range(6):
            if scales[j] == 0.0:
                continue
            old = cur[j]
            new = old + scales[j] * normals[it, j]
            cur[j] = new
            if j < 2:
                cand = _poisson_loglik(cur[0], cur[1], yr_t, yr_n, yr_dt, yr_lgam)
                base = pois
            else:
                cand = _gpd_loglik(cur[2], cur[3], cur[4], cur[5], ev_t, ev_y)
                base = gpd
            log_r = (cand + _log_prior_1(new, prior_mean[j], prior_sd[j])) - (
                base + _log_prior_1(old, prior_mean[j], prior_sd[j]))
            if cand > -np.inf and log_u[it, j] < log_r:
                if j < 2:
                    pois = cand
                else:
                    gpd = cand
                if it < burn_in:
                    acc_window[j] += 1.0
                else:
                    acc_after[j] += 1.0
            else:
                cur[j] = old
        if it < burn_in and (it + 1) % adapt_interval == 0:
            # tune toward the target band, then freeze after burn-in
            for j in range(6):
                if scales[j] == 0.0:
                    continue
                rate = acc_window[j] / adapt_interval
                if rate < acc_lo:
                    scales[j] *= 0.75
                elif rate > acc_hi:
                    scales[j] *= 1.35
                acc_window[j] = 0.0
        if it >= burn_in:
            draws[it - burn_in, :] = cur
    n_after = n_iter - burn_in
    return draws, acc_after / max(n_after, 1), scales


def _initial_state(data: ExceedanceSet, priors: PriorSpec) -> np.ndarray:
    init = np.array(priors.mean, dtype=float)
    free = priors.free
    rate = data.n_events / max(data.span_years, 1e-12)
    mean_exc = float(np.mean(data.excesses))
    start = np.array([max(rate, 1e-3), 0.0, math.log(mean_exc), 0.0, 0.0, 0.0])
    init[free] = start[free]
    return init


def _default_scales(data: ExceedanceSet) -> np.ndarray:
    n_years = max(data.span_years, 1.0)
    rate = max(data.n_events / n_years, 1e-3)
    n = max(data.n_events, 1)
    lam = math.sqrt(rate / n_years)
    return np.array([lam, 2 * lam, 1.0 / math.sqrt(n), 2.0 / math.sqrt(n),
                     1.0 / math.sqrt(n), 2.0 / math.sqrt(n)])


def fit_mcmc(data: ExceedanceSet, priors: PriorSpec | None = None,
             config: MCMCConfig = MCMCConfig()) -> PosteriorSample:
    """Sample the posterior with a fixed-length, seeded Metropolis chain.

    Proposal scales adapt during burn-in toward the target acceptance band
    and are frozen afterwards; only post-burn-in draws are kept.
    """
    if data.n_events == 0:
        raise MCMCError("no exceedances to fit")
    few = data.n_events < MIN_EVENTS
    if few:
        if not config.allow_few_events:
            raise MCMCError(
                f"only {data.n_events} events (< {MIN_EVENTS}); set allow_few_events to proceed")
        warnings.warn(f"fitting with only {data.n_events} events", RuntimeWarning, stacklevel=2)
    priors = default_priors(data) if priors is None else priors
    free = priors.free
    scales = (_default_scales(data) if config.proposal_scales is None
              else np.array(config.proposal_scales, dtype=float))
    scales = np.where(free, scales, 0.0)
    init = _initial_state(data, priors)

    yr_t, yr_n, yr_dt, yr_lg = _year_arrays(data)
    ev_t, ev_y = data.event_t, data.excesses
    lp0 = _gpd_loglik(init[2], init[3], init[4], init[5], ev_t, ev_y) + _poisson_loglik(
        init[0], init[1], yr_t, yr_n, yr_dt, yr_lg)
    if not np.isfinite(lp0):
        raise MCMCError(f"initial state {init} lies outside the support")

    rng = np.random.default_rng(config.seed)
    normals = rng.standard_normal((config.iterations, 6))
    log_u = np.log(rng.random((config.iterations, 6)))
    draws, acc, final_scales = _chain(
        init, scales.copy(), np.array(priors.mean, float), np.array(priors.sd, float),
        ev_t, ev_y, yr_t, yr_n, yr_dt, yr_lg, normals, log_u,
        config.burn_in, config.adapt_interval, *config.target_acceptance)
    if free.any() and not np.any(acc[free] > 0):
        raise MCMCError(
            "zero acceptance after burn-in; final proposal scales "
            + ", ".join(f"{n}={s:.3g}" for n, s in zip(PARAM_NAMES, final_scales)))
    return PosteriorSample(
        draws=draws, iterations=config.iterations, burn_in=config.burn_in, seed=config.seed,
        acceptance=acc, proposal_scales=final_scales, threshold=data.threshold,
        n_events=data.n_events, few_events=few)


def write_draws_csv(sample: PosteriorSample, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw", *sample.names])
        for i, row in enumerate(sample.draws):
            w.writerow([i, *(repr(float(v)) for v in row)])
    return path
