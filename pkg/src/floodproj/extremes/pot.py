"""Peaks-over-threshold selection with run declustering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..series import DailySeries

__all__ = ["ExceedanceSet", "select_exceedances", "pot_threshold", "MIN_RECORD_DAYS"]

MIN_RECORD_DAYS = 365


@dataclass
class ExceedanceSet:
    """Cluster peaks above a fixed threshold plus per-year occurrence counts.

    Times are on a covariate scale where the fit window maps to [0, 1].
    ``year_exposure`` is the covered fraction of each year (1 for whole years).
    """

    threshold: float
    event_t: np.ndarray
    event_x: np.ndarray
    year_t: np.ndarray
    year_counts: np.ndarray
    year_exposure: np.ndarray
    years: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    event_dates: np.ndarray | None = None
    start: np.datetime64 | None = None
    end: np.datetime64 | None = None

    def __post_init__(self):
        self.event_t = np.asarray(self.event_t, dtype=float)
        self.event_x = np.asarray(self.event_x, dtype=float)
        self.year_t = np.asarray(self.year_t, dtype=float)
        self.year_counts = np.asarray(self.year_counts, dtype=np.int64)
        self.year_exposure = np.asarray(self.year_exposure, dtype=float)
        if self.years.size == 0:
            self.years = np.arange(self.year_t.size)
        if self.event_t.shape != self.event_x.shape:
            raise ValueError("event times and magnitudes differ in length")
        if np.any(self.event_x <= self.threshold):
            raise ValueError("every event magnitude must exceed the threshold")
        if not (self.year_t.shape == self.year_counts.shape == self.year_exposure.shape):
            raise ValueError("per-year arrays differ in length")
        if int(self.year_counts.sum()) != self.event_x.size:
            raise ValueError("annual counts disagree with the event list")

    @classmethod
    def from_events(cls, threshold, n_years, event_year, event_x, event_frac=None):
        """Synthetic set over ``n_years`` whole years; ``event_year`` indexes 0..n-1."""
        event_year = np.asarray(event_year, dtype=int)
        if event_frac is None:
            event_frac = np.full(event_year.shape, 0.5)
        counts = np.bincount(event_year, minlength=n_years)
        year_t = (np.arange(n_years) + 0.5) / n_years
        event_t = (event_year + np.asarray(event_frac, dtype=float)) / n_years
        return cls(float(threshold), event_t, event_x, year_t, counts, np.ones(n_years))

    @property
    def n_events(self) -> int:
        return int(self.event_x.size)

    @property
    def excesses(self) -> np.ndarray:
        return self.event_x - self.threshold

    @property
    def span_years(self) -> float:
        return float(self.year_exposure.sum())

    def covariate(self, date) -> float:
        """Covariate value of a calendar date (may fall outside [0, 1])."""
        if self.start is None or self.end is None:
            raise ValueError("exceedance set has no calendar window")
        d = np.datetime64(date, "D")
        span = (self.end - self.start).astype(float)
        return float((d - self.start).astype(float) / span)

    def covariate_of_year(self, year: int) -> float:
        return self.covariate(np.datetime64(f"{int(year)}-07-02"))


def pot_threshold(values, percentile: float = 95.0) -> float:
    """Empirical percentile with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no values")
    if np.all(v == v[0]):
        raise ValueError("constant series has no usable threshold")
    return float(np.percentile(v, percentile, method="linear"))


def _decluster(idx: np.ndarray, values: np.ndarray, min_sep: int) -> np.ndarray:
    """Keep the maximum of each run whose members lie less than ``min_sep`` days apart."""
    if idx.size == 0:
        return idx
    breaks = np.flatnonzero(np.diff(idx) >= min_sep) + 1
    keep = []
    for run in np.split(idx, breaks):
        keep.append(run[np.argmax(values[run])])
    return np.asarray(keep, dtype=int)


def select_exceedances(
    series: DailySeries,
    percentile: float = 95.0,
    min_separation_days: int = 3,
    threshold: float | None = None,
    window=None,
) -> ExceedanceSet:
    """Threshold a daily series and decluster the exceedances.

    The threshold is the empirical ``percentile`` with linear interpolation
    between order statistics unless given explicitly. Exceedances closer than
    ``min_separation_days`` form one cluster represented by its peak, so
    ``min_separation_days=1`` keeps every exceeding day. ``window`` optionally
    fixes the (start, end) dates mapped to covariate 0 and 1.
    """
    v = series.values
    if v.size < MIN_RECORD_DAYS:
        raise ValueError(f"series too short: {v.size} days < {MIN_RECORD_DAYS}")
    if not np.all(np.isfinite(v)):
        raise ValueError("series contains missing values")
    if min_separation_days < 1:
        raise ValueError("min_separation_days must be >= 1")
    if threshold is None:
        threshold = pot_threshold(v, percentile)
    idx = np.flatnonzero(v > threshold)
    idx = _decluster(idx, v, int(min_separation_days))

    dates = series.dates
    start, end = (dates[0], dates[-1]) if window is None else (
        np.datetime64(window[0], "D"), np.datetime64(window[1], "D"))
    span = float((end - start).astype(float))
    if span <= 0:
        raise ValueError("covariate window must span more than one day")

    def cov(d):
        return (d - start).astype(float) / span

    years = series.years()
    uniq = np.unique(years)
    counts = np.zeros(uniq.size, dtype=np.int64)
    exposure = np.empty(uniq.size)
    year_t = np.empty(uniq.size)
    for k, y in enumerate(uniq):
        in_year = dates[years == y]
        ndays = 366 if (y % 4 == 0 and (y % 100 != 0 or y % 400 == 0)) else 365
        exposure[k] = in_year.size / ndays
        mid = in_year[0] + (in_year[-1] - in_year[0]) / 2
        year_t[k] = cov(mid)
    ev_years = years[idx]
    for k, y in enumerate(uniq):
        counts[k] = int(np.count_nonzero(ev_years == y))
    return ExceedanceSet(
        threshold=float(threshold),
        event_t=cov(dates[idx]),
        event_x=v[idx].copy(),
        year_t=year_t,
        year_counts=counts,
        year_exposure=exposure,
        years=uniq,
        event_dates=dates[idx].copy(),
        start=start,
        end=end,
    )
