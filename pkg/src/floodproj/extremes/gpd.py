"""Nonstationary Poisson-GPD model: likelihood, priors and return levels.

Parameters (events/year for the rate, covariate ``t`` in [0, 1] over the fit
window)::

    rate(t)  = lam0 + lam1 * t
    scale(t) = exp(sig0 + sig1 * t)
    shape(t) = xi0 + xi1 * t
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .pot import ExceedanceSet

__all__ = [
    "PARAM_NAMES",
    "GPDParams",
    "PriorSpec",
    "default_priors",
    "log_posterior",
    "log_likelihood",
    "return_level",
    "XI_ZERO",
]

PARAM_NAMES = ("lam0", "lam1", "sig0", "sig1", "xi0", "xi1")
XI_ZERO = 1e-8


@dataclass(frozen=True)
class GPDParams:
    lam0: float
    lam1: float = 0.0
    sig0: float = 0.0
    sig1: float = 0.0
    xi0: float = 0.0
    xi1: float = 0.0

    @classmethod
    def stationary(cls, rate: float, scale: float, shape: float) -> "GPDParams":
        return cls(rate, 0.0, math.log(scale), 0.0, shape, 0.0)

    @classmethod
    def from_array(cls, a) -> "GPDParams":
        return cls(*(float(x) for x in a))

    def as_array(self) -> np.ndarray:
        return np.array([self.lam0, self.lam1, self.sig0, self.sig1, self.xi0, self.xi1])

    def rate(self, t):
        return self.lam0 + self.lam1 * np.asarray(t, dtype=float)

    def scale(self, t):
        return np.exp(self.sig0 + self.sig1 * np.asarray(t, dtype=float))

    def shape(self, t):
        return self.xi0 + self.xi1 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal priors; a zero sd pins that parameter to its mean."""

    mean: tuple[float, ...]
    sd: tuple[float, ...]

    def __post_init__(self):
        if len(self.mean) != 6 or len(self.sd) != 6:
            raise ValueError("priors need six means and six sds")
        if any(s < 0 for s in self.sd):
            raise ValueError("prior sd must be non-negative")

    @classmethod
    def point_mass(cls, params: GPDParams) -> "PriorSpec":
        return cls(tuple(params.as_array()), (0.0,) * 6)

    @property
    def free(self) -> np.ndarray:
        return np.array(self.sd) > 0


def default_priors(data: ExceedanceSet) -> PriorSpec:
    """Weakly informative priors centred on crude data summaries."""
    rate = data.n_events / max(data.span_years, 1e-12)
    exc = data.excesses
    spread = float(np.std(exc)) if exc.size > 1 else float(np.mean(exc)) if exc.size else 1.0
    spread = spread if spread > 0 else 1.0
    return PriorSpec(
        mean=(rate, 0.0, math.log(spread), 0.0, 0.0, 0.0),
        sd=(max(10.0 * rate, 10.0), max(1.0, rate), 1.0, 1.0, 0.5, 1.0),
    )


# -- scalar kernels shared with the sampler ----------------------------------


@njit(cache=True)
def _gpd_loglik(sig0, sig1, xi0, xi1, ev_t, ev_y):
    total = 0.0
    for i in range(ev_y.size):
        t = ev_t[i]
        log_s = sig0 + sig1 * t
        s = math.exp(log_s)
        xi = xi0 + xi1 * t
        u = ev_y[i] / s
        if abs(xi) < 1e-8:
            total += -log_s - u
        else:
            z = xi * u
            if z <= -1.0:
                return -np.inf
            total += -log_s - (1.0 / xi + 1.0) * math.log1p(z)
    return total


@njit(cache=True)
def _poisson_loglik(lam0, lam1, yr_t, yr_n, yr_dt, yr_lgam):
    # rate must stay positive over the whole window t in [0, 1]
    if lam0 <= 0.0 or lam0 + lam1 <= 0.0:
        return -np.inf
    total = 0.0
    for k in range(yr_t.size):
        mu = (lam0 + lam1 * yr_t[k]) * yr_dt[k]
        if mu <= 0.0:
            return -np.inf
        total += yr_n[k] * math.log(mu) - mu - yr_lgam[k]
    return total


@njit(cache=True)
def _log_prior_1(value, mean, sd):
    if sd == 0.0:
        return 0.0 if value == mean else -np.inf
    z = (value - mean) / sd
    return -0.5 * z * z - math.log(sd) - 0.5 * math.log(2.0 * math.pi)


def _year_arrays(data: ExceedanceSet):
    n = data.year_counts.astype(float)
    lgam = np.array([math.lgamma(k + 1.0) for k in n])
    return data.year_t, n, data.year_exposure, lgam


def log_likelihood(params: GPDParams, data: ExceedanceSet) -> tuple[float, float]:
    """(GPD magnitude term, Poisson count term)."""
    p = params.as_array()
    gpd = _gpd_loglik(p[2], p[3], p[4], p[5], data.event_t, data.excesses)
    yt, yn, ydt, lg = _year_arrays(data)
    pois = _poisson_loglik(p[0], p[1], yt, yn, ydt, lg)
    return float(gpd), float(pois)


def log_posterior(params: GPDParams, data: ExceedanceSet, priors: PriorSpec | None = None) -> float:
    """Unnormalised log posterior; ``-inf`` outside the parameter support."""
    if data.n_events == 0:
        raise ValueError("no exceedances to fit")
    gpd, pois = log_likelihood(params, data)
    if priors is None:
        lp = 0.0
    else:
        p = params.as_array()
        lp = sum(_log_prior_1(p[j], priors.mean[j], priors.sd[j]) for j in range(6))
    total = gpd + pois + lp
    return float(total) if np.isfinite(total) else -math.inf


def return_level(params, threshold: float, period_years: float, t_eval: float):
    """Level exceeded on average once every ``period_years`` at covariate ``t_eval``.

    ``params`` is a :class:`GPDParams` or an (n, 6) array of draws. Entries
    with ``rate * T <= 1`` lie below the threshold and are reported as the
    threshold itself (with a warning); a non-positive rate yields NaN.
    """
    single = isinstance(params, GPDParams)
    p = np.atleast_2d(params.as_array() if single else np.asarray(params, dtype=float))
    if p.shape[1] != 6:
        raise ValueError("parameter draws must have 6 columns")
    if not period_years > 0:
        raise ValueError("return period must be positive")
    lam = p[:, 0] + p[:, 1] * t_eval
    sig = np.exp(p[:, 2] + p[:, 3] * t_eval)
    xi = p[:, 4] + p[:, 5] * t_eval
    m = lam * period_years
    out = np.full(lam.shape, np.nan)
    ok = lam > 0
    above = ok & (m > 1)
    if np.any(ok & ~above):
        warnings.warn("rate * T <= 1: return level below threshold, reporting threshold",
                      RuntimeWarning, stacklevel=2)
        out[ok & ~above] = threshold
    small = above & (np.abs(xi) < XI_ZERO)
    big = above & ~small
    logm = np.log(m, where=above, out=np.zeros_like(m))
    out[small] = threshold + sig[small] * logm[small]
    # expm1 keeps accuracy as the shape approaches zero
    out[big] = threshold + sig[big] / xi[big] * np.expm1(xi[big] * logm[big])
    if single:
        if not ok[0]:
            raise ValueError("non-positive exceedance rate at t_eval")
        return float(out[0])
    return out
