"""Daily discharge series and their CSV form (``date,discharge_m3s``)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["DailySeries", "read_series_csv", "write_series_csv", "daily_dates"]

ONE_DAY = np.timedelta64(1, "D")


def daily_dates(start: str, n: int) -> np.ndarray:
    return np.datetime64(start, "D") + np.arange(n) * ONE_DAY


@dataclass
class DailySeries:
    dates: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=float)
        if self.dates.shape != self.values.shape or self.values.ndim != 1:
            raise ValueError("dates and values must be 1-d arrays of equal length")
        if self.dates.size > 1 and np.any(np.diff(self.dates) != ONE_DAY):
            raise ValueError("dates must be consecutive days")

    @classmethod
    def from_values(cls, values, start="2000-01-01", name=""):
        values = np.asarray(values, dtype=float)
        return cls(daily_dates(start, values.size), values, name)

    def __len__(self) -> int:
        return self.values.size

    def window(self, start=None, end=None) -> "DailySeries":
        """Sub-series with ``start <= date <= end`` (either bound optional)."""
        keep = np.ones(len(self), dtype=bool)
        if start is not None:
            keep &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            keep &= self.dates <= np.datetime64(end, "D")
        return DailySeries(self.dates[keep], self.values[keep], self.name)

    def years(self) -> np.ndarray:
        return self.dates.astype("datetime64[Y]").astype(int) + 1970


def read_series_csv(path, name: str | None = None) -> DailySeries:
    path = Path(path)
    dates, values = [], []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "discharge_m3s"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'date,discharge_m3s'")
        for row in reader:
            dates.append(row["date"])
            values.append(float(row["discharge_m3s"]))
    return DailySeries(np.array(dates, dtype="datetime64[D]"), np.array(values), name or path.stem)


def write_series_csv(series: DailySeries, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "discharge_m3s"])
        for d, v in zip(series.dates, series.values):
            w.writerow([str(d), repr(float(v))])
    return path
